#ifndef EXOBOUNDS_DIST_HPP
#define EXOBOUNDS_DIST_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace exobounds {

inline constexpr double kProbTol = 1e-10;
inline constexpr double kDefaultTailEps = 1e-6;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard normal density.
inline double normal_pdf(double z) {
  if (std::isinf(z)) return 0.0;
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

// Standard normal cdf via the complementary error function.
inline double normal_cdf(double z) {
  if (z == -kInf) return 0.0;
  if (z == kInf) return 1.0;
  return 0.5 * std::erfc(-z * 0.7071067811865475244);
}

// Inverse standard normal cdf (Wichura's PPND16 rational approximation,
// accurate to ~1e-16 relative over (0,1)).
inline double normal_quantile(double p) {
  if (p < 0.0 || p > 1.0) throw std::domain_error("normal_quantile: p outside [0,1]");
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;
  const double q = p - 0.5;
  double r, val;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    val = q *
          (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
               45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
            133.14166789178437745) * r + 3.387132872796366608) /
          (((((((5226.495278852545703 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
               21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
            42.313330701600911252) * r + 1.0);
    return val;
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

// A univariate cdf: monotone, right-continuous, with left-inverse quantile
// evaluation. Representations: step function over a finite sample, piecewise
// linear over knots, uniform, standard normal, or an integrated-Gaussian
// kernel estimate. Values are immutable after construction.
class Cdf {
 public:
  // Empirical step cdf from a finite sample.
  static Cdf from_samples(std::vector<double> samples) {
    if (samples.empty()) throw std::domain_error("Cdf::from_samples: empty sample");
    for (double v : samples)
      if (!std::isfinite(v)) throw std::domain_error("Cdf::from_samples: non-finite sample value");
    std::sort(samples.begin(), samples.end());
    Cdf c;
    c.rep_ = Step{std::move(samples)};
    return c;
  }

  // Piecewise-linear cdf through (knots[i], probs[i]). Knots nondecreasing
  // (repeated knots encode jumps), probs nondecreasing from 0 to 1.
  static Cdf piecewise_linear(std::vector<double> knots, std::vector<double> probs) {
    if (knots.size() < 2 || knots.size() != probs.size())
      throw std::invalid_argument("Cdf::piecewise_linear: need matching knot/prob lists of size >= 2");
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      if (!(knots[i] < knots[i + 1]) && !(knots[i] == knots[i + 1] && probs[i] <= probs[i + 1]))
        throw std::invalid_argument("Cdf::piecewise_linear: knots must be nondecreasing");
      if (probs[i + 1] < probs[i] - 1e-15)
        throw std::invalid_argument("Cdf::piecewise_linear: non-monotone probability values");
    }
    if (std::fabs(probs.front()) > kProbTol || std::fabs(probs.back() - 1.0) > kProbTol)
      throw std::invalid_argument("Cdf::piecewise_linear: probs must run from 0 to 1");
    // Collapse vertical segments (repeated knots) and clamp endpoints.
    std::vector<double> xs, ps;
    for (std::size_t i = 0; i < knots.size(); ++i) {
      double p = std::min(1.0, std::max(0.0, probs[i]));
      if (!xs.empty() && knots[i] == xs.back()) {
        ps.back() = std::max(ps.back(), p);
      } else {
        xs.push_back(knots[i]);
        ps.push_back(p);
      }
    }
    ps.front() = 0.0;
    ps.back() = 1.0;
    Cdf c;
    c.rep_ = Linear{std::move(xs), std::move(ps)};
    return c;
  }

  static Cdf uniform(double lo, double hi) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("Cdf::uniform: need finite lo < hi");
    Cdf c;
    c.rep_ = Uniform{lo, hi};
    return c;
  }

  static Cdf standard_normal() {
    Cdf c;
    c.rep_ = Normal{};
    return c;
  }

  // Integrated-Gaussian kernel cdf F(y) = (1/n) sum Phi((y - Y_i)/h),
  // truncated to the sample range and renormalized so the support endpoints
  // are the sample extremes. h = 0 degenerates to the empirical step cdf.
  static Cdf gaussian_kernel(std::vector<double> samples, double bandwidth) {
    if (samples.empty()) throw std::domain_error("Cdf::gaussian_kernel: empty sample");
    if (bandwidth < 0.0) throw std::domain_error("Cdf::gaussian_kernel: negative bandwidth");
    if (bandwidth == 0.0) return from_samples(std::move(samples));
    for (double v : samples)
      if (!std::isfinite(v)) throw std::domain_error("Cdf::gaussian_kernel: non-finite sample value");
    std::sort(samples.begin(), samples.end());
    if (samples.front() == samples.back()) return from_samples(std::move(samples));
    Kernel k{std::move(samples), bandwidth, 0.0, 0.0};
    k.raw_lo = k.raw(k.sorted.front());
    k.norm = k.raw(k.sorted.back()) - k.raw_lo;
    Cdf c;
    c.rep_ = std::move(k);
    return c;
  }

  double support_lo() const {
    return std::visit([](const auto& r) { return r.lo(); }, rep_);
  }
  double support_hi() const {
    return std::visit([](const auto& r) { return r.hi(); }, rep_);
  }

  bool is_continuous() const { return !std::holds_alternative<Step>(rep_); }

  // F(y), nondecreasing and right-continuous.
  double evaluate(double y) const {
    return std::visit([y](const auto& r) { return r.evaluate(y); }, rep_);
  }

  // Left-inverse quantile: inf{y : F(y) >= tau} for tau in (0,1];
  // quantile(0) and quantile(1) return the support endpoints.
  double quantile(double tau) const {
    if (tau < 0.0 || tau > 1.0) throw std::domain_error("Cdf::quantile: tau outside [0,1]");
    if (tau == 0.0) return support_lo();
    if (tau == 1.0) return support_hi();
    return std::visit([tau](const auto& r) { return r.quantile(tau); }, rep_);
  }

  // F(y) as a rank in [0,1]. Requires a continuous representation.
  double rank_transform(double y) const {
    if (!is_continuous())
      throw std::domain_error("Cdf::rank_transform: unsupported for step representations");
    if (y < support_lo() || y > support_hi())
      throw std::domain_error("Cdf::rank_transform: point outside support");
    return evaluate(y);
  }

  // P(lo < Y <= hi).
  double mass(double lo, double hi) const {
    if (hi <= lo) return 0.0;
    return std::max(0.0, evaluate(hi) - evaluate(lo));
  }

  // E[Y 1(lo < Y <= hi)], exact for every representation.
  double partial_mean(double lo, double hi) const {
    if (hi <= lo) return 0.0;
    return std::visit([lo, hi](const auto& r) { return r.partial_mean(lo, hi); }, rep_);
  }

  // E[Y^2 1(lo < Y <= hi)], exact for every representation.
  double partial_second_moment(double lo, double hi) const {
    if (hi <= lo) return 0.0;
    return std::visit([lo, hi](const auto& r) { return r.partial_second_moment(lo, hi); }, rep_);
  }

  double mean() const { return partial_mean(-kInf, kInf); }

  // Exact integral of the quantile function over [t1, t2] in (0,1).
  double quantile_integral(double t1, double t2) const {
    if (t1 < 0.0 || t2 > 1.0 || t1 > t2)
      throw std::domain_error("Cdf::quantile_integral: need 0 <= t1 <= t2 <= 1");
    if (t1 == t2) return 0.0;
    return std::visit([t1, t2](const auto& r) { return r.quantile_integral(t1, t2); }, rep_);
  }

  // Knot/value pairs for piecewise-linear representations (a uniform cdf is
  // one segment). Other representations have no finite knot list.
  std::vector<std::pair<double, double>> knots() const {
    if (const auto* lin = std::get_if<Linear>(&rep_)) {
      std::vector<std::pair<double, double>> out;
      out.reserve(lin->xs.size());
      for (std::size_t i = 0; i < lin->xs.size(); ++i) out.emplace_back(lin->xs[i], lin->ps[i]);
      return out;
    }
    if (const auto* u = std::get_if<Uniform>(&rep_)) return {{u->l, 0.0}, {u->r, 1.0}};
    throw std::domain_error("Cdf::knots: representation has no finite knot list");
  }

 private:
  struct Step {
    std::vector<double> sorted;
    double lo() const { return sorted.front(); }
    double hi() const { return sorted.back(); }
    double evaluate(double y) const {
      auto it = std::upper_bound(sorted.begin(), sorted.end(), y);
      return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
    }
    double quantile(double tau) const {
      const double n = static_cast<double>(sorted.size());
      auto k = static_cast<std::size_t>(std::ceil(tau * n - 1e-9));
      k = std::min(std::max<std::size_t>(k, 1), sorted.size());
      return sorted[k - 1];
    }
    double partial_mean(double a, double b) const {
      double s = 0.0;
      for (double v : sorted)
        if (v > a && v <= b) s += v;
      return s / static_cast<double>(sorted.size());
    }
    double partial_second_moment(double a, double b) const {
      double s = 0.0;
      for (double v : sorted)
        if (v > a && v <= b) s += v * v;
      return s / static_cast<double>(sorted.size());
    }
    double quantile_integral(double t1, double t2) const {
      const double n = static_cast<double>(sorted.size());
      double s = 0.0;
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        const double seg_lo = static_cast<double>(k) / n;
        const double seg_hi = static_cast<double>(k + 1) / n;
        const double w = std::min(seg_hi, t2) - std::max(seg_lo, t1);
        if (w > 0.0) s += w * sorted[k];
      }
      return s;
    }
  };

  struct Linear {
    std::vector<double> xs, ps;
    double lo() const { return xs.front(); }
    double hi() const { return xs.back(); }
    double evaluate(double y) const {
      if (y <= xs.front()) return y < xs.front() ? 0.0 : ps.front();
      if (y >= xs.back()) return 1.0;
      auto it = std::upper_bound(xs.begin(), xs.end(), y);
      std::size_t i = static_cast<std::size_t>(it - xs.begin());
      const double t = (y - xs[i - 1]) / (xs[i] - xs[i - 1]);
      return ps[i - 1] + t * (ps[i] - ps[i - 1]);
    }
    double quantile(double tau) const {
      auto it = std::lower_bound(ps.begin(), ps.end(), tau);
      std::size_t i = static_cast<std::size_t>(it - ps.begin());
      if (i == 0) return xs.front();
      if (it == ps.end()) return xs.back();
      const double t = (tau - ps[i - 1]) / (ps[i] - ps[i - 1]);
      return xs[i - 1] + t * (xs[i] - xs[i - 1]);
    }
    double partial_mean(double a, double b) const {
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double l = std::max(xs[i], a), h = std::min(xs[i + 1], b);
        if (h <= l) continue;
        const double dens = (ps[i + 1] - ps[i]) / (xs[i + 1] - xs[i]);
        s += dens * 0.5 * (h * h - l * l);
      }
      return s;
    }
    double partial_second_moment(double a, double b) const {
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double l = std::max(xs[i], a), h = std::min(xs[i + 1], b);
        if (h <= l) continue;
        const double dens = (ps[i + 1] - ps[i]) / (xs[i + 1] - xs[i]);
        s += dens * (h * h * h - l * l * l) / 3.0;
      }
      return s;
    }
    double quantile_integral(double t1, double t2) const {
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < ps.size(); ++i) {
        if (ps[i + 1] <= ps[i]) continue;
        const double pl = std::max(ps[i], t1), ph = std::min(ps[i + 1], t2);
        if (ph <= pl) continue;
        const double inv_slope = (xs[i + 1] - xs[i]) / (ps[i + 1] - ps[i]);
        const double ql = xs[i] + (pl - ps[i]) * inv_slope;
        const double qh = xs[i] + (ph - ps[i]) * inv_slope;
        s += (ph - pl) * 0.5 * (ql + qh);
      }
      return s;
    }
  };

  struct Uniform {
    double l, r;
    double lo() const { return l; }
    double hi() const { return r; }
    double evaluate(double y) const {
      if (y <= l) return 0.0;
      if (y >= r) return 1.0;
      return (y - l) / (r - l);
    }
    double quantile(double tau) const { return l + tau * (r - l); }
    double partial_mean(double a, double b) const {
      const double x1 = std::max(l, a), x2 = std::min(r, b);
      if (x2 <= x1) return 0.0;
      return 0.5 * (x2 * x2 - x1 * x1) / (r - l);
    }
    double partial_second_moment(double a, double b) const {
      const double x1 = std::max(l, a), x2 = std::min(r, b);
      if (x2 <= x1) return 0.0;
      return (x2 * x2 * x2 - x1 * x1 * x1) / (3.0 * (r - l));
    }
    double quantile_integral(double t1, double t2) const {
      return l * (t2 - t1) + 0.5 * (r - l) * (t2 * t2 - t1 * t1);
    }
  };

  struct Normal {
    double lo() const { return -kInf; }
    double hi() const { return kInf; }
    double evaluate(double y) const { return normal_cdf(y); }
    double quantile(double tau) const { return normal_quantile(tau); }
    double partial_mean(double a, double b) const { return normal_pdf(a) - normal_pdf(b); }
    double partial_second_moment(double a, double b) const {
      auto g = [](double z) { return std::isinf(z) ? 0.0 : z * normal_pdf(z); };
      return normal_cdf(b) - g(b) - (normal_cdf(a) - g(a));
    }
    double quantile_integral(double t1, double t2) const {
      return normal_pdf(normal_quantile(t1)) - normal_pdf(normal_quantile(t2));
    }
  };

  struct Kernel {
    std::vector<double> sorted;
    double h;
    double raw_lo;  // raw kernel mass below the sample minimum
    double norm;    // raw mass of the sample range, the truncation normalizer
    double lo() const { return sorted.front(); }
    double hi() const { return sorted.back(); }
    double raw(double y) const {
      double s = 0.0;
      for (double v : sorted) s += normal_cdf((y - v) / h);
      return s / static_cast<double>(sorted.size());
    }
    double evaluate(double y) const {
      if (y < lo()) return 0.0;
      if (y >= hi()) return 1.0;
      return std::clamp((raw(y) - raw_lo) / norm, 0.0, 1.0);
    }
    double quantile(double tau) const {
      double a = lo(), b = hi();
      for (int it = 0; it < 200 && a < b; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        if (evaluate(m) >= tau)
          b = m;
        else
          a = m;
      }
      return b;
    }
    double raw_partial_mean(double a, double b) const {
      double s = 0.0;
      for (double v : sorted) {
        const double z1 = (a - v) / h;
        const double z2 = (b - v) / h;
        s += v * (normal_cdf(z2) - normal_cdf(z1)) - h * (normal_pdf(z2) - normal_pdf(z1));
      }
      return s / static_cast<double>(sorted.size());
    }
    double partial_mean(double a, double b) const {
      const double l = std::max(a, lo()), r = std::min(b, hi());
      if (r <= l) return 0.0;
      return raw_partial_mean(l, r) / norm;
    }
    double partial_second_moment(double a, double b) const {
      const double l = std::max(a, lo()), r = std::min(b, hi());
      if (r <= l) return 0.0;
      auto g = [](double z) { return z * normal_pdf(z); };
      double s = 0.0;
      for (double v : sorted) {
        const double z1 = (l - v) / h;
        const double z2 = (r - v) / h;
        const double dPhi = normal_cdf(z2) - normal_cdf(z1);
        const double dphi = normal_pdf(z2) - normal_pdf(z1);
        s += v * v * dPhi - 2.0 * v * h * dphi + h * h * (dPhi - (g(z2) - g(z1)));
      }
      return s / (static_cast<double>(sorted.size()) * norm);
    }
    double quantile_integral(double t1, double t2) const {
      return partial_mean(quantile(t1), quantile(t2));
    }
  };

  std::variant<Step, Linear, Uniform, Normal, Kernel> rep_;
};

}  // namespace exobounds

#endif  // EXOBOUNDS_DIST_HPP
