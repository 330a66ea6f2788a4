#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "exobounds/selection.hpp"
#include "test_support.hpp"

using namespace exobounds;
using exosupport::double_sawtooth;
using exosupport::sawtooth;

namespace {
const Cdf u01 = Cdf::uniform(0, 1);
}

TEST_CASE("treatment share integrates exactly") {
  CHECK(treatment_share(PropensityScore::constant(0.5, 0, 1), u01) == Catch::Approx(0.5).margin(1e-15));
  CHECK(treatment_share(sawtooth(), u01) == Catch::Approx(0.5).margin(1e-15));
  CHECK(treatment_share(PropensityScore({{0, 1, 1.0, 0.0}}), u01) == Catch::Approx(0.5).margin(1e-15));
  // domain mismatch
  CHECK_THROWS_AS(treatment_share(PropensityScore::constant(0.5, 0, 0.8), u01), std::invalid_argument);
}

TEST_CASE("T-independence checker on the sawtooth") {
  auto rep = check_T_independence(sawtooth(), u01, {0.5});
  CHECK(rep.passed());
  CHECK(rep.share == Catch::Approx(0.5).margin(1e-15));

  auto bad = check_T_independence(sawtooth(), u01, {0.25});
  CHECK_FALSE(bad.passed());
  // E(p | U in (0, 0.25)) = 0.25, half the overall share
  CHECK(bad.worst_gap == Catch::Approx(0.25).margin(1e-12));
  CHECK(bad.worst_lo == Catch::Approx(0.0).margin(1e-12));
  CHECK(bad.worst_hi == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("zero-mass pairs are skipped with a flag") {
  // flat region of the outcome law between 0.4 and 0.6
  auto gapped = Cdf::piecewise_linear({0.0, 0.4, 0.6, 1.0}, {0.0, 0.5, 0.5, 1.0});
  auto p = PropensityScore::constant(0.3, 0, 1);
  auto rep = check_T_independence(p, gapped, {0.45, 0.55});
  CHECK(rep.passed());
  CHECK(rep.skipped_zero_mass);
}

TEST_CASE("monotone scores fail every tau check") {
  PropensityScore ramp({{0, 1, 1.0, 0.0}});
  for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9})
    CHECK_FALSE(check_T_independence(ramp, u01, {tau}).passed());
  CHECK(check_T_independence(PropensityScore::constant(0.5, 0, 1), u01, {0.5}).passed());
}

TEST_CASE("interval T requires flatness inside") {
  // constant on [0.25, 0.75] and balanced outside: passes the interval check
  PropensityScore flat_mid({{0.0, 0.125, 0.0, 1.0},
                            {0.125, 0.25, 0.0, 0.0},
                            {0.25, 0.75, 0.0, 0.5},
                            {0.75, 0.875, 0.0, 0.0},
                            {0.875, 1.0, 0.0, 1.0}});
  CHECK(check_T_independence_interval(flat_mid, u01, 0.25, 0.75).passed());
  // sawtooth averages to 0.5 on (0.25, 0.75) but is not flat there
  CHECK_FALSE(check_T_independence_interval(sawtooth(), u01, 0.25, 0.75).passed());
}

TEST_CASE("mean independence checker") {
  CHECK(check_mean_independence(PropensityScore::constant(0.3, 0, 1), u01).passed());

  auto ramp = check_mean_independence(PropensityScore({{0, 1, 1.0, 0.0}}), u01);
  CHECK_FALSE(ramp.passed());
  // E(2U * U) = 2/3 against share 1/2
  CHECK(ramp.worst_gap == Catch::Approx(2.0 / 3.0 - 0.5).margin(1e-12));

  auto saw = check_mean_independence(sawtooth(), u01);
  CHECK_FALSE(saw.passed());
  // weighted average value 7/12: median independent but not mean independent
  CHECK(saw.worst_gap == Catch::Approx(7.0 / 12.0 - 0.5).margin(1e-12));

  // zero-mean outcome: undefined, renormalize
  auto undef = check_mean_independence(PropensityScore::constant(0.5, -1, 1), Cdf::uniform(-1, 1));
  CHECK(undef.verdict == Verdict::undefined);
}

TEST_CASE("direction change counting") {
  CHECK(count_direction_changes(PropensityScore::constant(0.5, 0, 1)) == 0);
  CHECK(count_direction_changes(PropensityScore({{0, 1, 1.0, 0.0}})) == 0);
  CHECK(count_direction_changes(sawtooth()) == 1);
  CHECK(count_direction_changes(double_sawtooth()) == 2);
  // continuous triangle: up then down, one reversal
  PropensityScore tri({{0.0, 0.5, 2.0, 0.0}, {0.5, 1.0, -2.0, 2.0}});
  CHECK(count_direction_changes(tri) == 1);
  // N-shape: up, down, up with sloped middle -> both reversals countable
  PropensityScore nshape({{0.0, 0.25, 4.0, 0.0}, {0.25, 0.75, -2.0, 1.5}, {0.75, 1.0, 4.0, -3.0}});
  CHECK(count_direction_changes(nshape) == 2);
}

TEST_CASE("monotonicity classification") {
  CHECK(is_monotone_nonconstant(PropensityScore({{0, 1, 1.0, 0.0}})));
  CHECK_FALSE(is_monotone_nonconstant(PropensityScore::constant(0.3, 0, 1)));
  CHECK_FALSE(is_monotone_nonconstant(sawtooth()));
  // monotone with a jump
  CHECK(is_monotone_nonconstant(PropensityScore({{0, 0.5, 0.0, 0.2}, {0.5, 1, 0.0, 0.7}})));
}

TEST_CASE("extreme propensity construction") {
  auto p = construct_extreme_propensity(u01, 0.6, 1.0, 0.5);
  // threshold at 0.6 + 0.5 * 0.4 = 0.8
  CHECK(p(0.7) == 1.0);
  CHECK(p(0.79) == 1.0);
  CHECK(p(0.81) == 0.0);
  CHECK(p(0.9) == 0.0);
  CHECK(p(0.3) == 0.5);
  CHECK(check_T_independence(p, u01, {0.5}).passed());
  CHECK(treatment_share(p, u01) == Catch::Approx(0.5).margin(1e-12));

  auto q = construct_extreme_propensity(u01, 0.4, 0.6, 0.25);
  CHECK(q(0.44) == 1.0);
  CHECK(q(0.46) == 0.0);  // threshold at 0.4 + 0.25 * 0.2 = 0.45
  CHECK(q(0.2) == 0.25);

  CHECK_THROWS_AS(construct_extreme_propensity(u01, 0.5, 0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(construct_extreme_propensity(u01, 0.4, 0.6, 0.0), std::invalid_argument);
}

TEST_CASE("extreme construction invariant over random draws") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const double a = 0.05 + 0.5 * exosupport::uniform01(rng);
    const double b = a + 0.05 + (0.95 - a - 0.05) * exosupport::uniform01(rng);
    const double share = 0.1 + 0.8 * exosupport::uniform01(rng);
    auto p = construct_extreme_propensity(u01, a, b, share);
    // any T disjoint from (a, b)
    std::vector<double> T;
    if (a > 0.03) T.push_back(a / 2);
    if (b < 0.97) T.push_back(b + (1.0 - b) / 2);
    T.push_back(a);
    auto chk = check_T_independence(p, u01, T, 1e-9);
    CHECK(chk.passed());
    // attains {0,1} on total mass equal to the gap mass
    double extreme_mass = 0.0;
    for (const auto& pc : p.pieces())
      if (pc.slope == 0.0 && (pc.intercept == 0.0 || pc.intercept == 1.0))
        extreme_mass += u01.mass(pc.lo, pc.hi);
    CHECK(extreme_mass >= u01.mass(a, b) - 1e-12);
  }
}

TEST_CASE("roy model propensities") {
  // mu identically zero: p = Phi(0) = 0.5
  RoyModel flat{{{-kInf, kInf, 0.0, 0.0}}, Cdf::standard_normal()};
  auto pf = roy_propensity(flat);
  CHECK(pf(0.0) == Catch::Approx(0.5).margin(1e-12));
  CHECK(pf(1.3) == Catch::Approx(0.5).margin(1e-12));

  // mu(y) = y: monotone selection, no tau-independence anywhere
  RoyModel mono{{{-kInf, -3.0, 0.0, -3.0}, {-3.0, 3.0, 1.0, 0.0}, {3.0, kInf, 0.0, 3.0}},
                Cdf::standard_normal()};
  auto pm = roy_propensity(mono);
  CHECK(is_monotone_nonconstant(pm));
  for (double tau : {-1.0, 0.0, 1.0})
    CHECK_FALSE(check_T_independence(pm, Cdf::standard_normal(), {tau}, 1e-6).passed());

  // mu positive on a middle band only: the selection probability must turn
  RoyModel band{{{-kInf, -1.0, 0.0, -0.5},
                 {-1.0, 0.0, 1.5, 1.0},
                 {0.0, 1.0, -1.5, 1.0},
                 {1.0, kInf, 0.0, -0.5}},
                Cdf::standard_normal()};
  auto pb = roy_propensity(band);
  CHECK(count_direction_changes(pb) >= 1);
  CHECK_FALSE(is_monotone_nonconstant(pb));
}

TEST_CASE("regression dependence of conditional families") {
  std::vector<double> xg;
  for (int i = -8; i <= 8; ++i) xg.push_back(i * 0.5);

  std::vector<Cdf> same(5, Cdf::standard_normal());
  CHECK(check_regression_dependence(same, xg));

  // location family N(u, 1): first-order stochastic dominance in u
  std::vector<Cdf> loc;
  for (double u : {0.0, 0.25, 0.5, 0.75, 1.0})
    loc.push_back(Cdf::piecewise_linear({u - 6, u - 2, u, u + 2, u + 6},
                                        {0.0, normal_cdf(-2), 0.5, normal_cdf(2), 1.0}));
  CHECK(check_regression_dependence(loc, xg));

  // N(sin(4 pi u), 1): the location rises to u = 0.125 then falls by 0.375
  std::vector<Cdf> wobble;
  for (double u : {0.0, 0.125, 0.25, 0.375, 0.5}) {
    const double m = std::sin(4.0 * M_PI * u);
    wobble.push_back(Cdf::piecewise_linear({m - 6, m - 2, m, m + 2, m + 6},
                                           {0.0, normal_cdf(-2), 0.5, normal_cdf(2), 1.0}));
  }
  CHECK_FALSE(check_regression_dependence(wobble, xg));

  CHECK_THROWS_AS(check_regression_dependence({}, xg), std::invalid_argument);
}

TEST_CASE("general treatments via indicator reduction") {
  // X independent of U
  auto indep = [](double, double) { return 0.4; };
  CHECK(check_T_independence_general_X(indep, {0.0, 1.0}, u01, {0.5}).pass);

  // ordered thresholds X = x_k iff U in [alpha_k, alpha_{k+1}): survival of
  // every interior x is a monotone step in u
  auto ordered = [](double x, double u) {
    const double alpha1 = 0.3, alpha2 = 0.7;  // levels 0, 1, 2
    if (x < 1.0) return u >= alpha1 ? 1.0 : 0.0;
    return u >= alpha2 ? 1.0 : 0.0;
  };
  for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    auto rep = check_T_independence_general_X(ordered, {0.0, 1.0}, u01, {tau}, 1e-8, {0.3, 0.7});
    CHECK_FALSE(rep.pass);
  }

  // three-valued X built so that 1(X > x1) is sawtooth-balanced at the median
  // but 1(X > x2) is a monotone step: verdicts differ across x
  auto crafted = [](double x, double u) {
    if (x < 1.0) {
      // sawtooth survival
      return u < 0.5 ? 2.0 * u : 2.0 * u - 1.0;
    }
    return u >= 0.75 ? 1.0 : 0.0;
  };
  auto rep = check_T_independence_general_X(crafted, {0.0, 1.0}, u01, {0.5}, 1e-8, {0.5, 0.75});
  CHECK_FALSE(rep.pass);
  REQUIRE(rep.failing_x.size() == 1);
  CHECK(rep.failing_x[0] == 1.0);
  CHECK(rep.per_x[0].passed());
  CHECK_FALSE(rep.per_x[1].passed());

  CHECK_THROWS_AS(check_T_independence_general_X(indep, {}, u01, {0.5}), std::invalid_argument);
}

TEST_CASE("indicator reduction agrees with the binary checker") {
  std::mt19937_64 rng(123);
  for (int rep = 0; rep < 20; ++rep) {
    auto score = exosupport::random_monotone_score(rng);
    std::vector<double> brk;
    for (const auto& pc : score.pieces()) brk.push_back(pc.lo);
    brk.push_back(1.0);
    auto survival = [&](double, double u) { return score(u); };
    for (double tau : {0.2, 0.5, 0.8}) {
      auto direct = check_T_independence(score, u01, {tau});
      auto reduced = check_T_independence_general_X(survival, {0.0}, u01, {tau}, 1e-8, brk);
      CHECK(direct.passed() == reduced.pass);
    }
  }
  // and a passing case
  auto saw = sawtooth();
  auto survival = [&](double, double u) { return saw(u); };
  CHECK(check_T_independence_general_X(survival, {0.0}, u01, {0.5}, 1e-8, {0.5}).pass);
}

TEST_CASE("characterization sweep: random monotone scores never pass") {
  std::mt19937_64 rng(2024);
  const std::vector<double> taus{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  for (int i = 0; i < 500; ++i) {
    auto p = exosupport::random_monotone_score(rng);
    REQUIRE(is_monotone_nonconstant(p));
    for (double tau : taus) CHECK_FALSE(check_T_independence(p, u01, {tau}).passed());
    CHECK_FALSE(check_mean_independence(p, u01).passed());
  }
}

TEST_CASE("oscillation lower bound from passing checks") {
  // sawtooth passes one isolated tau, double sawtooth passes two in
  // separate cells; direction changes must be at least that many
  CHECK(check_T_independence(sawtooth(), u01, {0.5}).passed());
  CHECK(count_direction_changes(sawtooth()) >= 1);
  auto dbl = double_sawtooth();
  CHECK(check_T_independence(dbl, u01, {0.25}).passed());
  CHECK(check_T_independence(dbl, u01, {0.75}).passed());
  CHECK(check_T_independence(dbl, u01, {0.25, 0.75}).passed());
  CHECK(count_direction_changes(dbl) >= 2);
}

TEST_CASE("full independence degeneracy") {
  auto p = PropensityScore::constant(0.42, 0, 1);
  for (double tau : {0.1, 0.5, 0.9}) CHECK(check_T_independence(p, u01, {tau}).passed());
  CHECK(check_T_independence_interval(p, u01, 0.2, 0.8).passed());
  CHECK(check_mean_independence(p, u01).passed());
}

TEST_CASE("score JSON round trip") {
  auto saw = sawtooth();
  auto j = saw.to_json();
  auto back = PropensityScore::from_json(j);
  for (int i = 0; i <= 100; ++i) {
    const double u = i / 100.0;
    CHECK(back(u) == Catch::Approx(saw(u)).margin(1e-12));
  }
  // unbounded endpoints survive the trip
  PropensityScore inf_score({{-kInf, 0.0, 0.0, 0.3}, {0.0, kInf, 0.0, 0.7}});
  auto j2 = inf_score.to_json();
  auto back2 = PropensityScore::from_json(nlohmann::json::parse(j2.dump()));
  CHECK(back2.domain_lo() == -kInf);
  CHECK(back2.domain_hi() == kInf);
  CHECK(back2(1.0) == 0.7);
}

TEST_CASE("score validation") {
  CHECK_THROWS_AS(PropensityScore({}), std::invalid_argument);
  CHECK_THROWS_AS(PropensityScore({{0, 0.4, 0, 0.5}, {0.6, 1, 0, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(PropensityScore({{0, 1, 2.0, 0.0}}), std::invalid_argument);  // exceeds 1
  CHECK_THROWS_AS(PropensityScore({{-kInf, 1, 0.5, 0.0}}), std::invalid_argument);
  PropensityScore ok({{0, 0.5, 0, 0.2}, {0.5, 1, 0, 0.8}});
  CHECK_THROWS_AS(ok(1.5), std::domain_error);
  CHECK(ok(0.5) == 0.8);  // half-open pieces
  CHECK(ok(0.499) == 0.2);
}
