#ifndef EXOBOUNDS_SELECTION_HPP
#define EXOBOUNDS_SELECTION_HPP

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "exobounds/dist.hpp"

namespace exobounds {

// One affine piece of a latent propensity score, defined on [lo, hi).
struct AffinePiece {
  double lo = 0.0;
  double hi = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double value_at(double y) const { return slope * y + intercept; }
};

// The latent selection function p(y) = P(X=1 | outcome = y), represented as
// an ordered list of affine pieces partitioning the outcome support. Values
// are clamped to [0,1] on evaluation; construction rejects pieces that leave
// [0,1] by more than a small tolerance. Unbounded end pieces must be flat.
class PropensityScore {
 public:
  explicit PropensityScore(std::vector<AffinePiece> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw std::invalid_argument("PropensityScore: no pieces");
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      auto& pc = pieces_[i];
      if (!(pc.lo < pc.hi)) throw std::invalid_argument("PropensityScore: empty or inverted piece");
      if (std::isinf(pc.lo) || std::isinf(pc.hi)) {
        if (pc.slope != 0.0)
          throw std::invalid_argument("PropensityScore: unbounded piece must be constant");
      }
      if (i > 0) {
        const double gap = pc.lo - pieces_[i - 1].hi;
        const double scale = std::max(1.0, std::fabs(pc.lo));
        if (std::fabs(gap) > 1e-9 * scale)
          throw std::invalid_argument("PropensityScore: pieces do not partition the domain");
        pc.lo = pieces_[i - 1].hi;
      }
      for (double y : {pc.lo, pc.hi}) {
        if (std::isinf(y)) continue;
        const double v = pc.value_at(y);
        if (v < -1e-9 || v > 1.0 + 1e-9)
          throw std::invalid_argument("PropensityScore: value outside [0,1]");
      }
    }
  }

  static PropensityScore constant(double c, double lo, double hi) {
    return PropensityScore({{lo, hi, 0.0, c}});
  }

  // Piecewise-linear interpolation of f at the given strictly increasing knots.
  static PropensityScore tabulate_at(const std::function<double(double)>& f,
                                     const std::vector<double>& knots) {
    if (knots.size() < 2) throw std::invalid_argument("PropensityScore::tabulate_at: need >= 2 knots");
    std::vector<AffinePiece> pieces;
    double v_prev = std::clamp(f(knots.front()), 0.0, 1.0);
    for (std::size_t i = 1; i < knots.size(); ++i) {
      const double v = std::clamp(f(knots[i]), 0.0, 1.0);
      const double dx = knots[i] - knots[i - 1];
      if (dx <= 0.0) throw std::invalid_argument("PropensityScore::tabulate_at: knots must increase");
      const double slope = (v - v_prev) / dx;
      pieces.push_back({knots[i - 1], knots[i], slope, v_prev - slope * knots[i - 1]});
      v_prev = v;
    }
    return PropensityScore(std::move(pieces));
  }

  static PropensityScore tabulate(const std::function<double(double)>& f, double lo, double hi,
                                  std::size_t n_knots = 1001) {
    std::vector<double> knots(n_knots);
    for (std::size_t i = 0; i < n_knots; ++i)
      knots[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_knots - 1);
    return tabulate_at(f, knots);
  }

  double domain_lo() const { return pieces_.front().lo; }
  double domain_hi() const { return pieces_.back().hi; }
  const std::vector<AffinePiece>& pieces() const { return pieces_; }

  double operator()(double y) const {
    if (y < domain_lo() || y > domain_hi())
      throw std::domain_error("PropensityScore: evaluation outside domain");
    // half-open pieces; the final piece is closed on the right
    std::size_t lo = 0, hi = pieces_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (y < pieces_[mid].hi)
        hi = mid;
      else
        lo = mid + 1;
    }
    return std::clamp(pieces_[lo].value_at(y), 0.0, 1.0);
  }

  // Integral of p against dist over (lo, hi], exact piece by piece.
  double integral(const Cdf& dist, double lo, double hi) const {
    double s = 0.0;
    for (const auto& pc : pieces_) {
      const double l = std::max(pc.lo, lo), h = std::min(pc.hi, hi);
      if (h <= l) continue;
      s += pc.slope * dist.partial_mean(l, h) + pc.intercept * dist.mass(l, h);
    }
    return s;
  }

  // Integral of y*p(y) against dist over (lo, hi], split as
  // y*(a y + b) = a y^2 + b y against the restricted moments.
  double weighted_integral(const Cdf& dist, double lo, double hi) const {
    double s = 0.0;
    for (const auto& pc : pieces_) {
      const double l = std::max(pc.lo, lo), h = std::min(pc.hi, hi);
      if (h <= l) continue;
      s += pc.slope * dist.partial_second_moment(l, h) + pc.intercept * dist.partial_mean(l, h);
    }
    return s;
  }

  static nlohmann::json piece_to_json(const AffinePiece& pc) {
    auto enc = [](double v) -> nlohmann::json {
      if (v == kInf) return "inf";
      if (v == -kInf) return "-inf";
      return v;
    };
    return {{"lo", enc(pc.lo)}, {"hi", enc(pc.hi)}, {"slope", pc.slope}, {"intercept", pc.intercept}};
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& pc : pieces_) arr.push_back(piece_to_json(pc));
    return arr;
  }

  static PropensityScore from_json(const nlohmann::json& arr) {
    if (!arr.is_array() || arr.empty())
      throw std::invalid_argument("PropensityScore::from_json: expected a non-empty piece array");
    auto dec = [](const nlohmann::json& v) -> double {
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        throw std::invalid_argument("PropensityScore::from_json: bad endpoint string");
      }
      return v.get<double>();
    };
    std::vector<AffinePiece> pieces;
    for (const auto& e : arr)
      pieces.push_back({dec(e.at("lo")), dec(e.at("hi")), e.at("slope").get<double>(),
                        e.at("intercept").get<double>()});
    return PropensityScore(std::move(pieces));
  }

 private:
  std::vector<AffinePiece> pieces_;
};

enum class Verdict { pass, fail, undefined };

// Result of an exogeneity check: worst violating interval, its gap, and the
// implied treatment share.
struct IndependenceReport {
  std::string assumption;
  Verdict verdict = Verdict::fail;
  double worst_gap = 0.0;
  double worst_lo = 0.0;
  double worst_hi = 0.0;
  double share = 0.0;
  bool skipped_zero_mass = false;
  std::string note;
  bool passed() const { return verdict == Verdict::pass; }
};

namespace detail {

inline void require_domain_covers(const PropensityScore& p, const Cdf& dist) {
  const double dlo = dist.support_lo(), dhi = dist.support_hi();
  const bool lo_ok = std::isinf(p.domain_lo()) ||
                     (!std::isinf(dlo) && p.domain_lo() <= dlo + 1e-12 * std::max(1.0, std::fabs(dlo)));
  const bool hi_ok = std::isinf(p.domain_hi()) ||
                     (!std::isinf(dhi) && p.domain_hi() >= dhi - 1e-12 * std::max(1.0, std::fabs(dhi)));
  if (!lo_ok || !hi_ok)
    throw std::invalid_argument("propensity score domain does not cover the outcome support");
}

}  // namespace detail

// P(X=1) = integral of p against dist.
inline double treatment_share(const PropensityScore& p, const Cdf& dist) {
  detail::require_domain_covers(p, dist);
  return p.integral(dist, dist.support_lo(), dist.support_hi());
}

namespace detail {

// All-pairs average-value check over the given endpoint list.
inline IndependenceReport average_value_check(const PropensityScore& p, const Cdf& dist,
                                              std::vector<double> endpoints, double tol,
                                              std::string label) {
  IndependenceReport rep;
  rep.assumption = std::move(label);
  rep.share = treatment_share(p, dist);
  rep.worst_gap = -1.0;
  std::sort(endpoints.begin(), endpoints.end());
  endpoints.erase(std::unique(endpoints.begin(), endpoints.end()), endpoints.end());
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    for (std::size_t j = i + 1; j < endpoints.size(); ++j) {
      const double t1 = endpoints[i], t2 = endpoints[j];
      const double m = dist.mass(t1, t2);
      if (m <= 1e-14) {
        rep.skipped_zero_mass = true;
        continue;
      }
      const double avg = p.integral(dist, t1, t2) / m;
      const double gap = std::fabs(avg - rep.share);
      if (gap > rep.worst_gap) {
        rep.worst_gap = gap;
        rep.worst_lo = t1;
        rep.worst_hi = t2;
      }
    }
  }
  rep.worst_gap = std::max(rep.worst_gap, 0.0);
  rep.verdict = rep.worst_gap <= tol ? Verdict::pass : Verdict::fail;
  return rep;
}

}  // namespace detail

// T-independence over a finite set of outcome values: the average value of p
// over each interval with endpoints in T plus the support bounds must equal
// the treatment share.
inline IndependenceReport check_T_independence(const PropensityScore& p, const Cdf& dist,
                                               const std::vector<double>& T_points,
                                               double tol = 1e-8) {
  if (T_points.empty()) throw std::invalid_argument("check_T_independence: empty T");
  std::vector<double> endpoints = T_points;
  for (double t : T_points)
    if (t < dist.support_lo() || t > dist.support_hi())
      throw std::invalid_argument("check_T_independence: T point outside support");
  endpoints.push_back(dist.support_lo());
  endpoints.push_back(dist.support_hi());
  return detail::average_value_check(p, dist, std::move(endpoints), tol, "T-independence");
}

// T-independence over an interval [t_lo, t_hi]: endpoints plus an interior
// refinement (flatness of p on the interval is part of the requirement).
inline IndependenceReport check_T_independence_interval(const PropensityScore& p, const Cdf& dist,
                                                        double t_lo, double t_hi, double tol = 1e-8,
                                                        std::size_t refine = 101) {
  if (t_lo > t_hi) throw std::invalid_argument("check_T_independence_interval: t_lo > t_hi");
  if (t_lo < dist.support_lo() || t_hi > dist.support_hi())
    throw std::invalid_argument("check_T_independence_interval: interval outside support");
  std::vector<double> endpoints{dist.support_lo(), dist.support_hi(), t_lo, t_hi};
  for (std::size_t k = 1; k <= refine; ++k)
    endpoints.push_back(t_lo + (t_hi - t_lo) * static_cast<double>(k) / static_cast<double>(refine + 1));
  return detail::average_value_check(p, dist, std::move(endpoints), tol, "T-independence(interval)");
}

// U-independence: p(y) equals the treatment share for almost every y in
// [u_lo, u_hi]. With affine pieces this is exact: every piece overlapping the
// open interval must be flat at the share. A zero-mass interval imposes no
// constraint.
inline IndependenceReport check_U_independence(const PropensityScore& p, const Cdf& dist,
                                               double u_lo, double u_hi, double tol = 1e-8) {
  if (u_lo > u_hi) throw std::invalid_argument("check_U_independence: u_lo > u_hi");
  if (u_lo < dist.support_lo() || u_hi > dist.support_hi())
    throw std::invalid_argument("check_U_independence: interval outside support");
  IndependenceReport rep;
  rep.assumption = "U-independence";
  rep.share = treatment_share(p, dist);
  if (dist.mass(u_lo, u_hi) <= 1e-14) {
    rep.verdict = Verdict::pass;
    rep.note = "zero-mass interval: no constraint";
    return rep;
  }
  for (const auto& pc : p.pieces()) {
    const double l = std::max(pc.lo, u_lo), h = std::min(pc.hi, u_hi);
    if (h <= l) continue;
    for (double y : {l, 0.5 * (l + h), h}) {
      const double gap = std::fabs(pc.value_at(y) - rep.share);
      if (gap > rep.worst_gap) {
        rep.worst_gap = gap;
        rep.worst_lo = l;
        rep.worst_hi = h;
      }
    }
  }
  rep.verdict = rep.worst_gap <= tol ? Verdict::pass : Verdict::fail;
  return rep;
}

// Mean independence: E[(Y/EY) p(Y)] must equal the treatment share.
inline IndependenceReport check_mean_independence(const PropensityScore& p, const Cdf& dist,
                                                  double tol = 1e-8) {
  IndependenceReport rep;
  rep.assumption = "mean independence";
  rep.share = treatment_share(p, dist);
  const double mu = dist.mean();
  const double scale = std::max(std::fabs(dist.partial_mean(dist.support_lo(), dist.support_hi())), 1.0);
  if (std::fabs(mu) <= 1e-12 * scale) {
    rep.verdict = Verdict::undefined;
    rep.note = "undefined: outcome mean is zero, renormalize the outcome";
    return rep;
  }
  const double weighted = p.weighted_integral(dist, dist.support_lo(), dist.support_hi()) / mu;
  rep.worst_gap = std::fabs(weighted - rep.share);
  rep.worst_lo = dist.support_lo();
  rep.worst_hi = dist.support_hi();
  rep.verdict = rep.worst_gap <= tol ? Verdict::pass : Verdict::fail;
  return rep;
}

namespace detail {

struct Movement {
  int sign;         // +1 rising, -1 falling
  bool splittable;  // sloped piece of positive length, as opposed to a jump
};

inline std::vector<Movement> movements(const PropensityScore& p) {
  std::vector<Movement> ms;
  const auto& pieces = p.pieces();
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i > 0) {
      const double left = pieces[i - 1].value_at(pieces[i - 1].hi);
      const double right = pieces[i].value_at(pieces[i].lo);
      const double jump = right - left;
      if (std::fabs(jump) > 1e-12) ms.push_back({jump > 0 ? 1 : -1, false});
    }
    if (std::fabs(pieces[i].slope) > 1e-12) ms.push_back({pieces[i].slope > 0 ? 1 : -1, true});
  }
  return ms;
}

}  // namespace detail

// Maximum K such that the domain splits into K intervals on each of which p
// is non-monotonic. Scan: collapse movements into alternating monotone runs;
// adjacent direction reversals can both count only when the run they share
// can be divided (it has a sloped segment or more than one movement).
inline int count_direction_changes(const PropensityScore& p) {
  const auto ms = detail::movements(p);
  if (ms.empty()) return 0;
  struct Run {
    int sign;
    int n_movements;
    bool has_sloped;
  };
  std::vector<Run> runs;
  for (const auto& m : ms) {
    if (!runs.empty() && runs.back().sign == m.sign) {
      runs.back().n_movements++;
      runs.back().has_sloped |= m.splittable;
    } else {
      runs.push_back({m.sign, 1, m.splittable});
    }
  }
  auto divisible = [](const Run& r) { return r.n_movements > 1 || r.has_sloped; };
  int count = 0;
  std::size_t last_selected = static_cast<std::size_t>(-2);
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (last_selected == r - 1 && !divisible(runs[r - 1])) continue;
    ++count;
    last_selected = r;
  }
  return count;
}

// True iff every movement of p shares one weak direction and p is not a.e.
// constant.
inline bool is_monotone_nonconstant(const PropensityScore& p) {
  const auto ms = detail::movements(p);
  if (ms.empty()) return false;
  const int s = ms.front().sign;
  for (const auto& m : ms)
    if (m.sign != s) return false;
  return true;
}

// A score attaining 0 and 1 on positive-measure subsets of [a,b] while
// remaining consistent with T-independence for any T disjoint from (a,b):
// p = 1 on [a, thr), p = 0 on [thr, b], p = share elsewhere, where thr makes
// the average over (a,b) equal the share.
inline PropensityScore construct_extreme_propensity(const Cdf& dist, double a, double b,
                                                    double share) {
  if (!(share > 0.0 && share < 1.0))
    throw std::invalid_argument("construct_extreme_propensity: share must be in (0,1)");
  if (!(a < b) || a < dist.support_lo() || b > dist.support_hi())
    throw std::invalid_argument("construct_extreme_propensity: need support_lo <= a < b <= support_hi");
  const double fa = dist.evaluate(a);
  const double gap_mass = dist.mass(a, b);
  if (gap_mass <= 0.0) throw std::domain_error("construct_extreme_propensity: zero-mass gap");
  const double thr = dist.quantile(fa + share * gap_mass);
  std::vector<AffinePiece> pieces;
  if (a > dist.support_lo()) pieces.push_back({dist.support_lo(), a, 0.0, share});
  pieces.push_back({a, thr, 0.0, 1.0});
  pieces.push_back({thr, b, 0.0, 0.0});
  if (b < dist.support_hi()) pieces.push_back({b, dist.support_hi(), 0.0, share});
  return PropensityScore(std::move(pieces));
}

// Roy selection: X = 1(Y1 > Y0) with Y1 = Y0 + mu(Y0) - eps, eps ~ N(0,1),
// so p(y0) = Phi(mu(y0)).
struct RoyModel {
  std::vector<AffinePiece> mu;  // piecewise affine, covering the baseline support
  Cdf baseline;
};

inline PropensityScore roy_propensity(const RoyModel& model, std::size_t knots_per_piece = 1001,
                                      double tail_eps = kDefaultTailEps) {
  if (model.mu.empty()) throw std::invalid_argument("roy_propensity: empty mu");
  const double lo = model.baseline.support_lo();
  const double hi = model.baseline.support_hi();
  if (model.mu.front().lo > lo || model.mu.back().hi < hi)
    throw std::invalid_argument("roy_propensity: mu does not cover the baseline support");
  const double t_lo = std::isinf(lo) ? model.baseline.quantile(tail_eps) : lo;
  const double t_hi = std::isinf(hi) ? model.baseline.quantile(1.0 - tail_eps) : hi;
  std::vector<AffinePiece> pieces;
  if (std::isinf(lo)) {
    const double v = normal_cdf(model.mu.front().value_at(std::isinf(model.mu.front().lo)
                                                              ? t_lo
                                                              : std::max(t_lo, model.mu.front().lo)));
    pieces.push_back({lo, t_lo, 0.0, v});
  }
  for (const auto& m : model.mu) {
    const double l = std::max(m.lo, t_lo), h = std::min(m.hi, t_hi);
    if (h <= l) continue;
    for (std::size_t k = 0; k + 1 < knots_per_piece; ++k) {
      const double x0 = l + (h - l) * static_cast<double>(k) / static_cast<double>(knots_per_piece - 1);
      const double x1 = l + (h - l) * static_cast<double>(k + 1) / static_cast<double>(knots_per_piece - 1);
      const double v0 = normal_cdf(m.value_at(x0));
      const double v1 = normal_cdf(m.value_at(x1));
      const double slope = (v1 - v0) / (x1 - x0);
      pieces.push_back({x0, x1, slope, v0 - slope * x0});
    }
  }
  if (std::isinf(hi)) {
    const double v = normal_cdf(model.mu.back().value_at(std::isinf(model.mu.back().hi)
                                                             ? t_hi
                                                             : std::min(t_hi, model.mu.back().hi)));
    pieces.push_back({t_hi, hi, 0.0, v});
  }
  return PropensityScore(std::move(pieces));
}

// Stochastic monotonicity of a family of conditional treatment distributions
// indexed by increasing u: true iff the survival functions are ordered in one
// direction across the whole u-grid.
inline bool check_regression_dependence(const std::vector<Cdf>& family_by_u,
                                        const std::vector<double>& x_grid, double tol = 1e-9) {
  if (family_by_u.size() < 2 || x_grid.empty())
    throw std::invalid_argument("check_regression_dependence: inconsistent grids");
  bool increasing_ok = true, decreasing_ok = true;
  for (std::size_t i = 0; i + 1 < family_by_u.size(); ++i) {
    for (double x : x_grid) {
      const double d = family_by_u[i + 1].evaluate(x) - family_by_u[i].evaluate(x);
      if (d > tol) increasing_ok = false;   // P(X>x|u) rose then fell
      if (d < -tol) decreasing_ok = false;
    }
    if (!increasing_ok && !decreasing_ok) return false;
  }
  return increasing_ok || decreasing_ok;
}

// Per-treatment-level verdicts for a multi-valued or continuous treatment,
// via the indicator reduction 1(X > x) for each x on the grid. U must be
// normalized to Unif[0,1].
struct GeneralIndependenceReport {
  bool pass = false;
  std::vector<double> failing_x;
  std::vector<IndependenceReport> per_x;
};

inline GeneralIndependenceReport check_T_independence_general_X(
    const std::function<double(double /*x*/, double /*u*/)>& conditional_survival,
    const std::vector<double>& x_grid, const Cdf& dist_U, const std::vector<double>& T_points,
    double tol = 1e-8, const std::vector<double>& extra_u_knots = {},
    std::size_t base_knots = 1001) {
  if (x_grid.empty()) throw std::invalid_argument("check_T_independence_general_X: empty x grid");
  if (std::fabs(dist_U.support_lo()) > kProbTol || std::fabs(dist_U.support_hi() - 1.0) > kProbTol)
    throw std::invalid_argument("check_T_independence_general_X: U must be normalized to [0,1]");
  std::vector<double> knots(base_knots);
  for (std::size_t i = 0; i < base_knots; ++i)
    knots[i] = static_cast<double>(i) / static_cast<double>(base_knots - 1);
  knots.insert(knots.end(), extra_u_knots.begin(), extra_u_knots.end());
  knots.insert(knots.end(), T_points.begin(), T_points.end());
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  GeneralIndependenceReport out;
  out.pass = true;
  for (double x : x_grid) {
    // midpoint-constant reduction: exact for survival functions that are
    // piecewise affine between knots, and it cannot smear jumps at knots
    std::vector<AffinePiece> pieces;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      const double mid = 0.5 * (knots[i] + knots[i + 1]);
      pieces.push_back({knots[i], knots[i + 1], 0.0,
                        std::clamp(conditional_survival(x, mid), 0.0, 1.0)});
    }
    PropensityScore p(std::move(pieces));
    auto rep = check_T_independence(p, dist_U, T_points, tol);
    if (!rep.passed()) {
      out.pass = false;
      out.failing_x.push_back(x);
    }
    out.per_x.push_back(std::move(rep));
  }
  return out;
}

}  // namespace exobounds

#endif  // EXOBOUNDS_SELECTION_HPP
