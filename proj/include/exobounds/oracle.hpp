#ifndef EXOBOUNDS_ORACLE_HPP
#define EXOBOUNDS_ORACLE_HPP

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "exobounds/bounds.hpp"
#include "exobounds/selection.hpp"

namespace exobounds {

// ---------------------------------------------------------------------------
// LP brute force over discretized propensity scores on the rank scale.
//
// The score is piecewise constant on n equal cells of [0,1]. The assumption
// pins cells inside [a,b] at p1 (T and U kinds) and constrains segment
// averages: T-independence fixes the average on each side of [a,b], while
// U-independence only fixes the overall marginal. The extremal conditional
// cdf at a grid point is then a small box-constrained LP whose exact optimum
// has the bang-bang form: within a constrained segment, mass packs into (or
// away from) the objective window.
// ---------------------------------------------------------------------------

struct DiscretizedProblem {
  int n = 100;
  double p1 = 0.5;
  AssumptionKind kind = AssumptionKind::t_independence;
  double a = 0.0;  // quantile units, aligned to the grid internally
  double b = 1.0;

  void validate() const {
    if (n < 2) throw std::invalid_argument("DiscretizedProblem: n < 2");
    if (!(p1 > 0.0 && p1 < 1.0)) throw std::invalid_argument("DiscretizedProblem: p1 outside (0,1)");
    if (kind == AssumptionKind::t_independence || kind == AssumptionKind::u_independence)
      if (!(0.0 <= a && a <= b && b <= 1.0))
        throw std::invalid_argument("DiscretizedProblem: need 0 <= a <= b <= 1");
  }
};

enum class OptSense { minimize, maximize };

namespace detail {

struct Segment {
  int cells = 0;     // m
  int in_window = 0; // c, cells of the segment inside the objective prefix
  double sum = 0.0;  // s, required total mass
};

inline double segment_extreme(const Segment& seg, OptSense sense) {
  if (seg.cells == 0) return 0.0;
  const double c = static_cast<double>(seg.in_window);
  const double m = static_cast<double>(seg.cells);
  if (sense == OptSense::maximize) return std::min(seg.sum, c);
  return std::max(0.0, seg.sum - (m - c));
}

}  // namespace detail

// Extremal value of F_{U|X=1}(u) over all discretized scores satisfying the
// assumption's linear constraints, exact via the greedy exchange argument.
inline double lp_extremal_cdf(const DiscretizedProblem& prob, double u, OptSense sense) {
  prob.validate();
  const int n = prob.n;
  const int k = std::clamp(static_cast<int>(std::lround(u * n)), 0, n);
  const int ia = std::clamp(static_cast<int>(std::lround(prob.a * n)), 0, n);
  const int ib = std::clamp(static_cast<int>(std::lround(prob.b * n)), ia, n);

  double total = 0.0;
  auto window_cells = [k](int lo, int hi) { return std::max(0, std::min(hi, k) - lo); };

  switch (prob.kind) {
    case AssumptionKind::full_independence:
      total = prob.p1 * k;
      break;
    case AssumptionKind::t_independence: {
      total = prob.p1 * window_cells(ia, ib);  // pinned cells
      detail::Segment left{ia, window_cells(0, ia), prob.p1 * ia};
      detail::Segment right{n - ib, window_cells(ib, n), prob.p1 * (n - ib)};
      total += detail::segment_extreme(left, sense) + detail::segment_extreme(right, sense);
      break;
    }
    case AssumptionKind::u_independence: {
      total = prob.p1 * window_cells(ia, ib);
      detail::Segment pooled{ia + (n - ib), window_cells(0, ia) + window_cells(ib, n),
                             prob.p1 * (ia + (n - ib))};
      total += detail::segment_extreme(pooled, sense);
      break;
    }
    case AssumptionKind::none: {
      detail::Segment pooled{n, k, prob.p1 * n};
      total += detail::segment_extreme(pooled, sense);
      break;
    }
  }
  return total / (prob.p1 * n);
}

// Largest discrepancy between the LP extremes and the analytic rank-scale
// bounds over a u-grid.
inline double oracle_max_gap(const DiscretizedProblem& prob, int u_points = 21) {
  auto rb = rank_cdf_bounds(prob.kind, prob.a, prob.b, prob.p1);
  double worst = 0.0;
  for (int i = 0; i < u_points; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(u_points - 1);
    const double up = lp_extremal_cdf(prob, u, OptSense::maximize);
    const double lo = lp_extremal_cdf(prob, u, OptSense::minimize);
    worst = std::max(worst, std::fabs(up - rb.upper.evaluate(u)));
    worst = std::max(worst, std::fabs(lo - rb.lower.evaluate(u)));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Sharpness witnesses: explicit selection functions attaining the bounds, and
// their epsilon-mixtures.
// ---------------------------------------------------------------------------

struct WitnessPair {
  PropensityScore treated;    // P(X=1 | U=u) on the rank scale
  PropensityScore untreated;  // P(X=0 | U=u) = 1 - treated
};

namespace detail {

// The witness score is the scaled slope of its induced bound cdf: by the
// integral representation F_{U|X}(u|x) = int_0^u p(v)/p_x dv on the rank
// scale, p(v) = p_x * d/du F.
inline std::vector<AffinePiece> score_steps_from_bound(const Cdf& bound, double p_x) {
  auto kn = bound.knots();
  std::vector<AffinePiece> steps;
  for (std::size_t i = 0; i + 1 < kn.size(); ++i) {
    const double dx = kn[i + 1].first - kn[i].first;
    if (dx <= 0.0) continue;
    const double v = std::clamp(p_x * (kn[i + 1].second - kn[i].second) / dx, 0.0, 1.0);
    steps.push_back({kn[i].first, kn[i + 1].first, 0.0, v});
  }
  return steps;
}

inline std::vector<AffinePiece> mix_steps(const std::vector<AffinePiece>& lo_steps,
                                          const std::vector<AffinePiece>& hi_steps, double eps) {
  std::vector<double> cuts;
  for (const auto& s : lo_steps) {
    cuts.push_back(s.lo);
    cuts.push_back(s.hi);
  }
  for (const auto& s : hi_steps) {
    cuts.push_back(s.lo);
    cuts.push_back(s.hi);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  auto value_at = [](const std::vector<AffinePiece>& steps, double y) {
    for (const auto& s : steps)
      if (y >= s.lo && y < s.hi) return s.intercept;
    return steps.back().intercept;
  };
  std::vector<AffinePiece> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    const double v = eps * value_at(lo_steps, mid) + (1.0 - eps) * value_at(hi_steps, mid);
    out.push_back({cuts[i], cuts[i + 1], 0.0, v});
  }
  return out;
}

}  // namespace detail

// Witness selection function whose induced conditional cdf for the arm with
// marginal p_x equals eps * lower + (1 - eps) * upper bound, together with
// the implied score of the other arm.
inline WitnessPair sharpness_witness(AssumptionKind kind, double a, double b, double p_x,
                                     double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("sharpness_witness: eps outside [0,1]");
  auto rb = rank_cdf_bounds(kind, a, b, p_x);
  auto lo_steps = detail::score_steps_from_bound(rb.lower, p_x);
  auto hi_steps = detail::score_steps_from_bound(rb.upper, p_x);
  auto mixed = detail::mix_steps(lo_steps, hi_steps, eps);
  std::vector<AffinePiece> flipped;
  flipped.reserve(mixed.size());
  for (const auto& s : mixed) flipped.push_back({s.lo, s.hi, 0.0, 1.0 - s.intercept});
  return {PropensityScore(mixed), PropensityScore(flipped)};
}

// F_{U|X}(u | arm) induced by a selection function via the integral
// representation, normalized by the arm share.
inline double conditional_cdf_from_score(const PropensityScore& p, const Cdf& dist, double u) {
  const double share = treatment_share(p, dist);
  if (share <= 0.0) throw std::domain_error("conditional_cdf_from_score: degenerate arm");
  return p.integral(dist, dist.support_lo(), std::min(u, dist.support_hi())) / share;
}

// ---------------------------------------------------------------------------
// Joint simulator: Y ~ dist, X ~ Bernoulli(p(Y)).
// ---------------------------------------------------------------------------

struct SimulatedSample {
  std::vector<double> outcome;
  std::vector<int> treatment;
  bool degenerate_arm = false;

  void write_csv(std::ostream& os, const std::string& outcome_col = "y",
                 const std::string& treatment_col = "x") const {
    os << outcome_col << ',' << treatment_col << '\n';
    for (std::size_t i = 0; i < outcome.size(); ++i)
      os << render_double(outcome[i]) << ',' << treatment[i] << '\n';
  }
};

// Deterministic under a fixed 64-bit seed; uniforms are drawn from the raw
// engine bits so results do not depend on the library's distribution
// implementations.
inline SimulatedSample simulate_joint(const PropensityScore& p, const Cdf& dist, std::size_t n,
                                      std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate_joint: n < 1");
  detail::require_domain_covers(p, dist);
  std::mt19937_64 rng(seed);
  auto next_u = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };
  SimulatedSample out;
  out.outcome.reserve(n);
  out.treatment.reserve(n);
  const double share = treatment_share(p, dist);
  out.degenerate_arm = share <= kProbTol || share >= 1.0 - kProbTol;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = dist.quantile(next_u());
    const int x = next_u() < p(y) ? 1 : 0;
    out.outcome.push_back(y);
    out.treatment.push_back(x);
  }
  return out;
}

}  // namespace exobounds

#endif  // EXOBOUNDS_ORACLE_HPP
