#ifndef EXOBOUNDS_BOUNDS_HPP
#define EXOBOUNDS_BOUNDS_HPP

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "exobounds/dist.hpp"

namespace exobounds {

enum class AssumptionKind { t_independence, u_independence, full_independence, none };

inline const char* kind_label(AssumptionKind k) {
  switch (k) {
    case AssumptionKind::t_independence: return "T";
    case AssumptionKind::u_independence: return "U";
    case AssumptionKind::full_independence: return "full";
    case AssumptionKind::none: return "none";
  }
  return "?";
}

// Which exogeneity assumption is imposed and on which quantile interval
// [a, b]. The symmetric parameterization delta gives [delta, 1 - delta].
struct AssumptionSpec {
  AssumptionKind kind = AssumptionKind::full_independence;
  double a = 0.0;
  double b = 1.0;

  static AssumptionSpec t_independence(double a, double b) {
    return validated({AssumptionKind::t_independence, a, b});
  }
  static AssumptionSpec u_independence(double a, double b) {
    return validated({AssumptionKind::u_independence, a, b});
  }
  static AssumptionSpec full_independence() { return {AssumptionKind::full_independence, 0.0, 1.0}; }
  static AssumptionSpec none() { return {AssumptionKind::none, 0.0, 0.0}; }
  static AssumptionSpec symmetric(AssumptionKind k, double delta) {
    if (delta < 0.0 || delta > 0.5)
      throw std::invalid_argument("AssumptionSpec: delta outside [0, 0.5]");
    if (k == AssumptionKind::full_independence || k == AssumptionKind::none)
      return k == AssumptionKind::full_independence ? full_independence() : none();
    return validated({k, delta, 1.0 - delta});
  }

  // The symmetric parameter when [a, b] = [delta, 1 - delta].
  std::optional<double> delta() const {
    if (std::fabs(b - (1.0 - a)) <= 1e-12) return a;
    return std::nullopt;
  }

 private:
  static AssumptionSpec validated(AssumptionSpec s) {
    if (!(s.a >= 0.0 && s.a <= s.b && s.b <= 1.0))
      throw std::invalid_argument("AssumptionSpec: need 0 <= a <= b <= 1 in quantile units");
    return s;
  }
};

// Marginal treatment probabilities with the overlap requirement p1 in (0,1).
struct TreatmentMarginal {
  double p1;
  explicit TreatmentMarginal(double p1_) : p1(p1_) {
    if (!(p1 > 0.0 && p1 < 1.0))
      throw std::invalid_argument("TreatmentMarginal: overlap requires p1 in (0,1)");
  }
  double p0() const { return 1.0 - p1; }
};

struct BoundInterval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
};

inline std::string render_double(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// A family of bound intervals indexed by tau or delta.
struct BoundCurve {
  std::vector<double> grid;
  std::vector<BoundInterval> intervals;
  std::string kind;
  std::string param;

  void validate() const {
    if (grid.size() != intervals.size()) throw std::invalid_argument("BoundCurve: size mismatch");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
      if (!(grid[i] < grid[i + 1])) throw std::invalid_argument("BoundCurve: grid must increase");
  }

  void write_csv(std::ostream& os) const {
    os << "index,lower,upper,kind,param\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
      os << render_double(grid[i]) << ',' << render_double(intervals[i].lower) << ','
         << render_double(intervals[i].upper) << ',' << kind << ',' << param << '\n';
  }
};

// ---------------------------------------------------------------------------
// Rank-scale cdf bounds. With U the rank of the outcome (so F_U = identity on
// [0,1]), the sharp envelopes for F_{U|X}(.|x) are piecewise linear with the
// knots below; alpha and beta are the probability levels of the assumption
// interval and p_x the marginal probability of the arm being bounded.
// ---------------------------------------------------------------------------

struct RankCdfBounds {
  Cdf lower;
  Cdf upper;
};

namespace detail {

// Bound knots are sorted in exact arithmetic for the matching case; snap the
// ulp-level disorder that shows up right at a case boundary.
inline Cdf pl(std::vector<double> knots, std::vector<double> values) {
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (knots[i] < knots[i - 1]) {
      if (knots[i] < knots[i - 1] - 1e-9)
        throw std::logic_error("rank_cdf_bounds: knot order violated beyond tolerance");
      knots[i] = knots[i - 1];
    }
    if (values[i] < values[i - 1]) {
      if (values[i] < values[i - 1] - 1e-9)
        throw std::logic_error("rank_cdf_bounds: value order violated beyond tolerance");
      values[i] = values[i - 1];
    }
  }
  for (auto& v : values) v = std::clamp(v, 0.0, 1.0);
  return Cdf::piecewise_linear(std::move(knots), std::move(values));
}

inline Cdf rank_upper_T(double alpha, double beta, double p) {
  return pl({0.0, p * alpha, alpha, beta, p + beta * (1.0 - p), 1.0},
            {0.0, alpha, alpha, beta, 1.0, 1.0});
}

inline Cdf rank_lower_T(double alpha, double beta, double p) {
  return pl({0.0, (1.0 - p) * alpha, alpha, beta, p * beta + (1.0 - p), 1.0},
            {0.0, 0.0, alpha, beta, beta, 1.0});
}

inline void assert_case_agreement(const Cdf& first, const Cdf& second) {
  for (int i = 0; i <= 64; ++i) {
    const double t = static_cast<double>(i) / 64.0;
    if (std::fabs(first.evaluate(t) - second.evaluate(t)) > 1e-9)
      throw std::logic_error("rank_cdf_bounds: case formulas disagree at the case boundary");
  }
}

// The U-independence envelopes split on (1 - (beta - alpha)) p <asymp> alpha
// (upper) and the 1-p analog (lower). At equality both case formulas are
// built, checked against each other, and the first is returned.
inline Cdf rank_upper_U(double alpha, double beta, double p) {
  const double cut = (1.0 - (beta - alpha)) * p;
  auto case_le = [&] {
    return pl({0.0, cut, alpha, beta, 1.0},
              {0.0, 1.0 - (beta - alpha), 1.0 - (beta - alpha), 1.0, 1.0});
  };
  auto case_ge = [&] {
    return pl({0.0, alpha, beta, (beta - alpha) * (1.0 - p) + p, 1.0},
              {0.0, alpha / p, alpha / p + (beta - alpha), 1.0, 1.0});
  };
  if (std::fabs(cut - alpha) <= 1e-12) {
    auto first = case_le();
    assert_case_agreement(first, case_ge());
    return first;
  }
  return cut < alpha ? case_le() : case_ge();
}

inline Cdf rank_lower_U(double alpha, double beta, double p) {
  const double cut = (1.0 - (beta - alpha)) * (1.0 - p);
  auto case_le = [&] {
    return pl({0.0, cut, alpha, beta, 1.0},
              {0.0, 0.0, (alpha - cut) / p, (beta - 1.0) * (1.0 - p) / p + beta, 1.0});
  };
  auto case_ge = [&] {
    return pl({0.0, alpha, beta, p * (beta - alpha) + 1.0 - p, 1.0},
              {0.0, 0.0, beta - alpha, beta - alpha, 1.0});
  };
  if (std::fabs(cut - alpha) <= 1e-12) {
    auto first = case_le();
    assert_case_agreement(first, case_ge());
    return first;
  }
  return cut < alpha ? case_le() : case_ge();
}

inline Cdf rank_upper_none(double p) { return pl({0.0, p, 1.0}, {0.0, 1.0, 1.0}); }
inline Cdf rank_lower_none(double p) { return pl({0.0, 1.0 - p, 1.0}, {0.0, 0.0, 1.0}); }

}  // namespace detail

// Sharp rank-scale envelopes for the conditional rank cdf of the arm with
// marginal probability p_x, under the assumption held on quantile interval
// [alpha, beta].
inline RankCdfBounds rank_cdf_bounds(AssumptionKind kind, double alpha, double beta, double p_x) {
  if (!(p_x > 0.0 && p_x < 1.0)) throw std::invalid_argument("rank_cdf_bounds: p_x outside (0,1)");
  if (kind != AssumptionKind::none && !(0.0 <= alpha && alpha <= beta && beta <= 1.0))
    throw std::invalid_argument("rank_cdf_bounds: need 0 <= alpha <= beta <= 1");
  switch (kind) {
    case AssumptionKind::t_independence:
      return {detail::rank_lower_T(alpha, beta, p_x), detail::rank_upper_T(alpha, beta, p_x)};
    case AssumptionKind::u_independence:
      return {detail::rank_lower_U(alpha, beta, p_x), detail::rank_upper_U(alpha, beta, p_x)};
    case AssumptionKind::full_independence: {
      auto ident = detail::pl({0.0, 1.0}, {0.0, 1.0});
      return {ident, ident};
    }
    case AssumptionKind::none:
      return {detail::rank_lower_none(p_x), detail::rank_upper_none(p_x)};
  }
  throw std::logic_error("rank_cdf_bounds: unreachable");
}

// A cdf bound over a general marginal: the rank-scale envelope composed with
// the marginal cdf. Valid cdf in its own right.
struct CdfBound {
  Cdf rank_bound;
  Cdf base;
  double evaluate(double u) const { return rank_bound.evaluate(base.evaluate(u)); }
};

struct CdfBoundPair {
  CdfBound lower;
  CdfBound upper;
};

namespace detail {

inline CdfBoundPair cdf_bounds_impl(AssumptionKind kind, const Cdf& F_U, double p_x, double a,
                                    double b) {
  if (a > b) throw std::invalid_argument("cdf_bounds: need a <= b");
  if (a < F_U.support_lo() || b > F_U.support_hi())
    throw std::invalid_argument("cdf_bounds: interval endpoints outside support");
  const double alpha = F_U.evaluate(a);
  const double beta = F_U.evaluate(b);
  auto rb = rank_cdf_bounds(kind, alpha, beta, p_x);
  return {{rb.lower, F_U}, {rb.upper, F_U}};
}

}  // namespace detail

// Five-branch T-independence envelopes for F_{U|X}(.|x) over marginal F_U,
// with [a, b] in outcome units. Both bounds coincide with F_U on [a, b].
inline CdfBoundPair cdf_bounds_T(const Cdf& F_U, double p_x, double a, double b) {
  return detail::cdf_bounds_impl(AssumptionKind::t_independence, F_U, p_x, a, b);
}

// Case-split U-independence envelopes; a == b reproduces the no-assumption
// envelopes min(F/p_x, 1) and max(1 + (F-1)/p_x, 0).
inline CdfBoundPair cdf_bounds_U(const Cdf& F_U, double p_x, double a, double b) {
  return detail::cdf_bounds_impl(AssumptionKind::u_independence, F_U, p_x, a, b);
}

// ---------------------------------------------------------------------------
// Identified sets for the untreated-outcome distribution of the treated arm,
// written directly in terms of the observed control-arm quantile function.
// ---------------------------------------------------------------------------

// Bounds on the tau-quantile of Y0 given X=1. Point identification holds for
// tau inside the closed assumption interval under T-independence.
inline BoundInterval quantile_bounds_Y0(const AssumptionSpec& assn, const Cdf& q_cond,
                                        const TreatmentMarginal& marg, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::domain_error("quantile_bounds_Y0: tau must be in (0,1)");
  auto Q = [&](double t) { return q_cond.quantile(std::clamp(t, 0.0, 1.0)); };
  const double a = assn.a, b = assn.b, p1 = marg.p1, p0 = marg.p0();
  switch (assn.kind) {
    case AssumptionKind::full_independence:
      return {Q(tau), Q(tau)};
    case AssumptionKind::none:
      return {Q(0.0), Q(1.0)};
    case AssumptionKind::t_independence: {
      if (tau >= a && tau <= b) return {Q(tau), Q(tau)};
      if (tau < a) return {Q(0.0), Q(a)};
      return {Q(b), Q(1.0)};
    }
    case AssumptionKind::u_independence: {
      double lower, upper;
      if ((1.0 - (b - a)) * p1 <= a) {
        lower = tau <= 1.0 - (b - a) ? Q(0.0) : Q(tau + (b - 1.0) / p0);
      } else {
        if (tau <= a / p1)
          lower = Q(0.0);
        else if (tau <= a / p1 + (b - a))
          lower = Q(tau - a / p1);
        else
          lower = Q(b - a);
      }
      if ((1.0 - (b - a)) * p0 <= a) {
        if (tau <= 1.0 - (b - a) - (1.0 - b) / p1)
          upper = Q(1.0 - (b - a));
        else if (tau <= 1.0 - (1.0 - b) / p1)
          upper = Q(tau + (1.0 - b) / p1);
        else
          upper = Q(1.0);
      } else {
        upper = tau <= b - a ? Q(tau + a / p0) : Q(1.0);
      }
      return {lower, upper};
    }
  }
  throw std::logic_error("quantile_bounds_Y0: unreachable");
}

namespace detail {

// coef * value with the convention 0 * (+-inf) = 0, so that vanishing branch
// weights never poison finite bounds.
inline double weighted(double coef, double value) { return coef == 0.0 ? 0.0 : coef * value; }

}  // namespace detail

// Bounds on E(Y0 | X=1): closed-form integrals of the quantile bounds.
inline BoundInterval mean_bounds_Y0(const AssumptionSpec& assn, const Cdf& q_cond,
                                    const TreatmentMarginal& marg) {
  auto Q = [&](double t) { return q_cond.quantile(std::clamp(t, 0.0, 1.0)); };
  auto I = [&](double t1, double t2) {
    return q_cond.quantile_integral(std::clamp(t1, 0.0, 1.0), std::clamp(t2, 0.0, 1.0));
  };
  const double a = assn.a, b = assn.b, p1 = marg.p1, p0 = marg.p0();
  switch (assn.kind) {
    case AssumptionKind::full_independence: {
      const double m = I(0.0, 1.0);
      return {m, m};
    }
    case AssumptionKind::none:
      return {Q(0.0), Q(1.0)};
    case AssumptionKind::t_independence: {
      const double mid = I(a, b);
      const double upper = detail::weighted(a, Q(a)) + mid + detail::weighted(1.0 - b, Q(1.0));
      const double lower = detail::weighted(a, Q(0.0)) + mid + detail::weighted(1.0 - b, Q(b));
      return {lower, upper};
    }
    case AssumptionKind::u_independence: {
      double lower, upper;
      if ((1.0 - (b - a)) * p1 <= a) {
        lower = detail::weighted(1.0 - (b - a), Q(0.0)) +
                I(1.0 - (b - a) + (b - 1.0) / p0, 1.0 + (b - 1.0) / p0);
      } else {
        lower = detail::weighted(a / p1, Q(0.0)) + I(0.0, b - a) +
                detail::weighted(1.0 - (b - a) - a / p1, Q(b - a));
      }
      if ((1.0 - (b - a)) * p0 <= a) {
        upper = detail::weighted(1.0 - (b - a) - (1.0 - b) / p1, Q(1.0 - (b - a))) +
                I(1.0 - (b - a), 1.0) + detail::weighted((1.0 - b) / p1, Q(1.0));
      } else {
        upper = I(a / p0, b - a + a / p0) + detail::weighted(1.0 - (b - a), Q(1.0));
      }
      return {lower, upper};
    }
  }
  throw std::logic_error("mean_bounds_Y0: unreachable");
}

// ATT identified set: observed treated mean minus the reversed mean bounds.
inline BoundInterval att_identified_set(double obs_mean_treated, const AssumptionSpec& assn,
                                        const Cdf& q_cond, const TreatmentMarginal& marg) {
  if (!std::isfinite(obs_mean_treated))
    throw std::invalid_argument("att_identified_set: observed treated mean must be finite");
  auto mb = mean_bounds_Y0(assn, q_cond, marg);
  return {obs_mean_treated - mb.upper, obs_mean_treated - mb.lower};
}

// QTT(q) identified set: observed treated quantile minus the reversed
// quantile bounds.
inline BoundInterval qtt_identified_set(double q, double obs_quantile_treated,
                                        const AssumptionSpec& assn, const Cdf& q_cond,
                                        const TreatmentMarginal& marg) {
  if (!std::isfinite(obs_quantile_treated))
    throw std::invalid_argument("qtt_identified_set: observed treated quantile must be finite");
  auto qb = quantile_bounds_Y0(assn, q_cond, marg, q);
  return {obs_quantile_treated - qb.upper, obs_quantile_treated - qb.lower};
}

// ---------------------------------------------------------------------------
// Breakdown point of a nonincreasing lower-bound curve over delta in [0,0.5].
// ---------------------------------------------------------------------------

struct BreakdownResult {
  double delta = 0.0;
  bool fails_at_point_identification = false;
};

inline BreakdownResult breakdown_point(const std::function<double(double)>& lower_bound,
                                       double threshold = 0.0) {
  // the [delta, 1-delta] family is nested, so the curve must be nonincreasing
  double prev = lower_bound(0.0);
  for (int i = 1; i <= 25; ++i) {
    const double d = 0.5 * static_cast<double>(i) / 25.0;
    const double v = lower_bound(d);
    const double scale = std::max({1.0, std::fabs(prev), std::fabs(v)});
    if (v > prev + 1e-7 * scale)
      throw std::invalid_argument("breakdown_point: lower-bound curve is not nonincreasing");
    prev = v;
  }
  if (lower_bound(0.0) < threshold) return {0.0, true};
  if (lower_bound(0.5) >= threshold) return {0.5, false};
  double lo = 0.0, hi = 0.5;
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    if (lower_bound(mid) >= threshold)
      lo = mid;
    else
      hi = mid;
  }
  return {lo, false};
}

}  // namespace exobounds

#endif  // EXOBOUNDS_BOUNDS_HPP
