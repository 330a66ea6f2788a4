// Command-line surface for the exobounds library: classify latent selection
// models against exogeneity assumptions, compute sharp identified sets and
// breakdown points, verify the closed forms against the LP brute force, and
// simulate / estimate end to end.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "exobounds/bounds.hpp"
#include "exobounds/estimate.hpp"
#include "exobounds/oracle.hpp"
#include "exobounds/selection.hpp"

using namespace exobounds;

namespace {

Cdf parse_dist(const std::string& spec) {
  if (spec == "unif01" || spec == "identity") return Cdf::uniform(0, 1);
  if (spec == "normal") return Cdf::standard_normal();
  if (spec.rfind("uniform:", 0) == 0) {
    const auto body = spec.substr(8);
    const auto comma = body.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("dist: expected uniform:LO,HI, got '" + spec + "'");
    return Cdf::uniform(std::stod(body.substr(0, comma)), std::stod(body.substr(comma + 1)));
  }
  throw std::invalid_argument("dist: unknown spec '" + spec +
                              "' (use unif01, normal, uniform:LO,HI, or identity)");
}

PropensityScore load_score(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open score file " + path);
  nlohmann::json j;
  in >> j;
  return PropensityScore::from_json(j);
}

AssumptionKind parse_kind(const std::string& s) {
  if (s == "T" || s == "t") return AssumptionKind::t_independence;
  if (s == "U" || s == "u") return AssumptionKind::u_independence;
  if (s == "full") return AssumptionKind::full_independence;
  if (s == "none") return AssumptionKind::none;
  throw std::invalid_argument("kind: expected T, U, full, or none, got '" + s + "'");
}

AssumptionSpec make_spec(const std::string& kind_str, double a, double b, double delta) {
  const auto kind = parse_kind(kind_str);
  if (kind == AssumptionKind::full_independence) return AssumptionSpec::full_independence();
  if (kind == AssumptionKind::none) return AssumptionSpec::none();
  if (delta >= 0.0 && a < 0.0) return AssumptionSpec::symmetric(kind, delta);
  if (a < 0.0 || b < 0.0)
    throw std::invalid_argument("assumption interval: give --delta or both --a and --b");
  return kind == AssumptionKind::t_independence ? AssumptionSpec::t_independence(a, b)
                                                : AssumptionSpec::u_independence(a, b);
}

nlohmann::json report_to_json(const IndependenceReport& r) {
  nlohmann::json j;
  j["assumption"] = r.assumption;
  j["verdict"] = r.verdict == Verdict::pass ? "pass"
                 : r.verdict == Verdict::fail ? "fail"
                                              : "undefined";
  j["worst_gap"] = r.worst_gap;
  j["worst_interval"] = {r.worst_lo, r.worst_hi};
  j["treatment_share"] = r.share;
  j["skipped_zero_mass"] = r.skipped_zero_mass;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

std::uint64_t effective_seed(std::uint64_t cli_seed) {
  if (const char* env = std::getenv("EXOBOUNDS_SEED")) return std::strtoull(env, nullptr, 10);
  return cli_seed;
}

// Run the items on up to `jobs` threads; results land at their own index so
// output order never depends on scheduling.
template <typename Work>
void run_parallel(std::size_t count, unsigned jobs, Work&& work) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  const unsigned n_threads = std::min<std::size_t>(jobs, count);
  for (unsigned t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) work(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct CheckOpts {
  std::string score_path, dist = "unif01";
  std::vector<double> T;
  std::vector<double> T_interval;
  std::vector<double> U_interval;
  bool mean = false;
  double tol = 1e-8;
  std::string out;
};

int run_check(const CheckOpts& o) {
  auto score = load_score(o.score_path);
  auto dist = parse_dist(o.dist);
  nlohmann::json reports = nlohmann::json::array();
  if (!o.T.empty()) reports.push_back(report_to_json(check_T_independence(score, dist, o.T, o.tol)));
  if (o.T_interval.size() == 2)
    reports.push_back(report_to_json(
        check_T_independence_interval(score, dist, o.T_interval[0], o.T_interval[1], o.tol)));
  if (o.U_interval.size() == 2)
    reports.push_back(report_to_json(
        check_U_independence(score, dist, o.U_interval[0], o.U_interval[1], o.tol)));
  if (o.mean) reports.push_back(report_to_json(check_mean_independence(score, dist, o.tol)));
  if (reports.empty())
    throw std::invalid_argument("check: give at least one of --T, --T-interval, --U, --mean");
  nlohmann::json out;
  out["reports"] = reports;
  out["diagnostics"] = {{"direction_changes", count_direction_changes(score)},
                        {"monotone_nonconstant", is_monotone_nonconstant(score)},
                        {"treatment_share", treatment_share(score, dist)}};
  write_text(o.out, out.dump(2) + "\n");
  return 0;
}

struct BoundsOpts {
  std::string kind = "T";
  double a = -1.0, b = -1.0, delta = -1.0;
  double p1 = 0.5;
  std::string param = "mean-Y0";
  double tau = 0.5, q = 0.5;
  double obs_mean = 0.0, obs_quantile = 0.0;
  std::string quantiles = "identity";
  unsigned cdf_points = 101;
  std::string out;
};

int run_bounds(const BoundsOpts& o) {
  const auto spec = make_spec(o.kind, o.a, o.b, o.delta);
  const TreatmentMarginal marg(o.p1);
  const Cdf q_cond = parse_dist(o.quantiles);
  std::ostringstream os;
  BoundCurve curve;
  curve.kind = kind_label(spec.kind);
  curve.param = o.param;
  if (o.param == "mean-Y0") {
    curve.grid = {0.0};
    curve.intervals = {mean_bounds_Y0(spec, q_cond, marg)};
  } else if (o.param == "quantile-Y0") {
    curve.grid = {o.tau};
    curve.intervals = {quantile_bounds_Y0(spec, q_cond, marg, o.tau)};
  } else if (o.param == "att") {
    curve.grid = {0.0};
    curve.intervals = {att_identified_set(o.obs_mean, spec, q_cond, marg)};
  } else if (o.param == "qtt") {
    curve.grid = {o.q};
    curve.intervals = {qtt_identified_set(o.q, o.obs_quantile, spec, q_cond, marg)};
  } else if (o.param == "cdf") {
    // bounds on the conditional cdf over the marginal law, grid in outcome
    // units (identity marginal = the rank scale)
    auto rb = rank_cdf_bounds(spec.kind, spec.a, spec.b, o.p1);
    const double glo = std::isfinite(q_cond.support_lo()) ? q_cond.support_lo()
                                                          : q_cond.quantile(0.001);
    const double ghi = std::isfinite(q_cond.support_hi()) ? q_cond.support_hi()
                                                          : q_cond.quantile(0.999);
    for (unsigned i = 0; i < o.cdf_points; ++i) {
      const double u = glo + (ghi - glo) * static_cast<double>(i) /
                                 static_cast<double>(o.cdf_points - 1);
      const double r = q_cond.evaluate(u);
      curve.grid.push_back(u);
      curve.intervals.push_back({rb.lower.evaluate(r), rb.upper.evaluate(r)});
    }
  } else {
    throw std::invalid_argument("param: expected mean-Y0, quantile-Y0, att, qtt, or cdf, got '" +
                                o.param + "'");
  }
  curve.write_csv(os);
  write_text(o.out, os.str());
  return 0;
}

struct OracleOpts {
  int n = 200;
  std::string kind = "T";
  double a = -1.0, b = -1.0, delta = -1.0;
  double p1 = 0.5;
  unsigned u_points = 21;
  bool suite = false;
  unsigned jobs = 1;
};

int run_oracle(const OracleOpts& o) {
  if (o.suite) {
    struct Combo {
      AssumptionKind kind;
      double p1, a, b;
      int n;
      double gap = 0.0;
    };
    std::vector<Combo> combos;
    for (auto kind : {AssumptionKind::t_independence, AssumptionKind::u_independence})
      for (double p1 : {0.25, 0.5, 0.75})
        for (auto ab : {std::pair{0.25, 0.75}, std::pair{0.1, 0.9}, std::pair{0.4, 0.4}})
          for (int n : {100, 200, 400}) combos.push_back({kind, p1, ab.first, ab.second, n});
    run_parallel(combos.size(), o.jobs, [&](std::size_t i) {
      auto& c = combos[i];
      c.gap = oracle_max_gap({c.n, c.p1, c.kind, c.a, c.b}, static_cast<int>(o.u_points));
    });
    double worst_ratio = 0.0;
    for (const auto& c : combos) {
      std::cout << "kind=" << kind_label(c.kind) << " p1=" << c.p1 << " a=" << c.a << " b=" << c.b
                << " n=" << c.n << " max_gap=" << render_double(c.gap)
                << " tol=" << render_double(2.0 / c.n) << '\n';
      worst_ratio = std::max(worst_ratio, c.gap * c.n / 2.0);
    }
    std::cout << "worst gap/tolerance ratio: " << render_double(worst_ratio) << '\n';
    return 0;
  }
  const auto spec = make_spec(o.kind, o.a, o.b, o.delta);
  DiscretizedProblem prob{o.n, o.p1, spec.kind, spec.a, spec.b};
  const double gap = oracle_max_gap(prob, static_cast<int>(o.u_points));
  std::cout << "max gap between LP extremal cdf and analytic bounds over " << o.u_points
            << " grid points: " << render_double(gap) << " (tolerance 2/n = "
            << render_double(2.0 / o.n) << ")\n";
  return 0;
}

struct SimulateOpts {
  std::string score_path, dist = "unif01";
  std::size_t n = 1000;
  std::uint64_t seed = 12345;
  std::string out;
  std::string outcome_col = "y", treatment_col = "x";
};

int run_simulate(const SimulateOpts& o) {
  auto score = load_score(o.score_path);
  auto dist = parse_dist(o.dist);
  auto sim = simulate_joint(score, dist, o.n, effective_seed(o.seed));
  if (sim.degenerate_arm)
    std::cerr << "warning: treatment share is degenerate, one arm will be (almost) empty\n";
  std::ostringstream os;
  sim.write_csv(os, o.outcome_col, o.treatment_col);
  write_text(o.out, os.str());
  return 0;
}

struct SensitivityOpts {
  std::string data_path, config_path;
  std::string kind = "both";
  unsigned delta_points = 101;
  std::string params = "catt,cqtt:0.25,cqtt:0.5,cqtt:0.75";
  double bandwidth = -1.0;  // negative: plug-in
  std::string rule = "median-split";
  std::string out_dir = "sensitivity_out";
  unsigned jobs = 1;
};

int run_sensitivity(const SensitivityOpts& o) {
  std::ifstream cfg_in(o.config_path);
  if (!cfg_in) throw std::runtime_error("cannot open config " + o.config_path);
  nlohmann::json cfg_json;
  cfg_in >> cfg_json;
  const auto cfg = IngestConfig::from_json(cfg_json);

  IngestReport rep;
  const auto ds = ingest_csv(o.data_path, cfg, &rep);
  std::cout << "rows read: " << rep.rows_read << ", dropped missing: " << rep.dropped_missing
            << ", dropped by filters: " << rep.dropped_filtered << ", kept: " << ds.size() << '\n';
  if (ds.size() == 0) throw std::runtime_error("no rows left after ingestion");

  PartitionRule rule;
  if (o.rule == "exact-levels") {
    rule = PartitionRule::exact_levels;
  } else if (o.rule == "median-split") {
    rule = PartitionRule::median_split;
  } else {
    throw std::invalid_argument("rule: expected median-split or exact-levels, got '" + o.rule + "'");
  }
  std::vector<std::string> warnings;
  auto cells = cell_partition(ds, cfg.covariates, rule, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  ParamRequest req;
  req.catt = false;
  std::stringstream ps(o.params);
  std::string tok;
  while (std::getline(ps, tok, ',')) {
    if (tok == "catt") {
      req.catt = true;
    } else if (tok.rfind("cqtt:", 0) == 0) {
      req.cqtt_quantiles.push_back(std::stod(tok.substr(5)));
    } else if (!tok.empty()) {
      throw std::invalid_argument("params: expected catt or cqtt:Q entries, got '" + tok + "'");
    }
  }

  std::vector<AssumptionKind> kinds;
  if (o.kind == "both") {
    kinds = {AssumptionKind::t_independence, AssumptionKind::u_independence};
  } else {
    kinds = {parse_kind(o.kind)};
  }
  std::vector<double> grid(o.delta_points);
  for (unsigned i = 0; i < o.delta_points; ++i)
    grid[i] = 0.5 * static_cast<double>(i) / static_cast<double>(o.delta_points - 1);

  struct Item {
    const Cell* cell;
    AssumptionKind kind;
    SensitivityResult result;
    std::string skip_reason;
  };
  std::vector<Item> items;
  for (const auto& c : cells)
    for (auto k : kinds) items.push_back({&c, k, {}, {}});

  std::optional<double> bw;
  if (o.bandwidth >= 0.0) bw = o.bandwidth;
  run_parallel(items.size(), o.jobs, [&](std::size_t i) {
    auto& it = items[i];
    try {
      it.result = estimate_sensitivity_curve(*it.cell, it.kind, grid, req, bw);
    } catch (const std::exception& e) {
      it.skip_reason = e.what();
    }
  });

  std::filesystem::create_directories(o.out_dir);
  std::vector<SensitivityResult> results;
  for (const auto& it : items) {
    if (!it.skip_reason.empty()) {
      std::cerr << "skipped: " << it.skip_reason << '\n';
      continue;
    }
    for (const auto& p : it.result.params) {
      const auto fname = o.out_dir + "/cell_" + sanitize(it.result.cell_key) + "__" +
                         sanitize(p.param) + "__" + it.result.kind + ".csv";
      std::ostringstream os;
      p.curve.write_csv(os);
      write_text(fname, os.str());
    }
    results.push_back(it.result);
  }
  write_text(o.out_dir + "/breakdown_summary.json", breakdown_summary(results).dump(2) + "\n");
  std::cout << "wrote " << results.size() << " cell/kind results to " << o.out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "exobounds: sharp identified sets and breakdown points for treatment effects under "
      "quantile (T-) independence and its monotonicity-permitting U-independence relaxation, "
      "with latent-propensity-score diagnostics and an LP verification oracle"};
  app.require_subcommand(1);

  CheckOpts check;
  auto* c_check = app.add_subcommand(
      "check", "classify a latent propensity score: T-independence (average-value "
               "characterization), U-independence (flatness), mean independence, monotonicity");
  c_check->add_option("--score", check.score_path, "propensity score JSON piece list")->required();
  c_check->add_option("--dist", check.dist, "outcome marginal: unif01, normal, uniform:LO,HI");
  c_check->add_option("--T", check.T, "T-independence at these outcome values");
  c_check->add_option("--T-interval", check.T_interval, "T-independence on an interval")
      ->expected(2);
  c_check->add_option("--U", check.U_interval, "U-independence (flat score) on an interval")
      ->expected(2);
  c_check->add_flag("--mean", check.mean, "check mean independence");
  c_check->add_option("--tol", check.tol, "checker tolerance");
  c_check->add_option("--out", check.out, "output JSON path (default stdout)");

  BoundsOpts bounds;
  auto* c_bounds = app.add_subcommand(
      "bounds", "sharp identified sets: conditional cdf envelopes, quantile and mean bounds for "
                "the untreated outcome of the treated, ATT and QTT(q) sets");
  c_bounds->add_option("--kind", bounds.kind, "T, U, full, or none");
  c_bounds->add_option("--a", bounds.a, "assumption interval lower quantile");
  c_bounds->add_option("--b", bounds.b, "assumption interval upper quantile");
  c_bounds->add_option("--delta", bounds.delta, "symmetric interval [delta, 1-delta]");
  c_bounds->add_option("--p1", bounds.p1, "treatment probability P(X=1)")->required();
  c_bounds->add_option("--param", bounds.param, "mean-Y0, quantile-Y0, att, qtt, or cdf");
  c_bounds->add_option("--tau", bounds.tau, "quantile level for quantile-Y0");
  c_bounds->add_option("--q", bounds.q, "quantile level for qtt");
  c_bounds->add_option("--obs-mean", bounds.obs_mean, "observed treated mean, for att");
  c_bounds->add_option("--obs-quantile", bounds.obs_quantile, "observed treated quantile, for qtt");
  c_bounds->add_option("--quantiles", bounds.quantiles,
                       "control-arm outcome distribution (identity = uniform on [0,1])");
  c_bounds->add_option("--points", bounds.cdf_points, "grid size for the cdf curve");
  c_bounds->add_option("--out", bounds.out, "output CSV path (default stdout)");

  OracleOpts oracle;
  auto* c_oracle = app.add_subcommand(
      "oracle", "verify analytic bounds against the exact LP over discretized selection "
                "functions; prints the max gap (tolerance 2/n)");
  c_oracle->add_option("--n", oracle.n, "rank-scale grid size");
  c_oracle->add_option("--kind", oracle.kind, "T or U");
  c_oracle->add_option("--a", oracle.a, "interval lower quantile");
  c_oracle->add_option("--b", oracle.b, "interval upper quantile");
  c_oracle->add_option("--delta", oracle.delta, "symmetric interval [delta, 1-delta]");
  c_oracle->add_option("--p1", oracle.p1, "treatment probability");
  c_oracle->add_option("--u-points", oracle.u_points, "evaluation grid size");
  c_oracle->add_flag("--suite", oracle.suite, "run the full kind/p1/interval/n comparison table");
  c_oracle->add_option("--jobs", oracle.jobs, "parallel workers for --suite");

  SimulateOpts sim;
  auto* c_sim = app.add_subcommand(
      "simulate", "draw (outcome, treatment) pairs with X ~ Bernoulli(p(Y)) for a given latent "
                  "propensity score; emits the CSV schema `sensitivity` ingests");
  c_sim->add_option("--score", sim.score_path, "propensity score JSON piece list")->required();
  c_sim->add_option("--dist", sim.dist, "outcome marginal");
  c_sim->add_option("--n", sim.n, "sample size");
  c_sim->add_option("--seed", sim.seed, "64-bit seed (EXOBOUNDS_SEED overrides)");
  c_sim->add_option("--out", sim.out, "output CSV path (default stdout)");
  c_sim->add_option("--outcome-col", sim.outcome_col, "outcome column name");
  c_sim->add_option("--treatment-col", sim.treatment_col, "treatment column name");

  SensitivityOpts sens;
  auto* c_sens = app.add_subcommand(
      "sensitivity", "full empirical pipeline: ingest CSV, build covariate cells, estimate "
                     "smoothed conditional cdfs, emit CATT/CQTT identified-set curves over the "
                     "symmetric relaxation family and their breakdown points");
  c_sens->add_option("--data", sens.data_path, "input CSV with header")->required();
  c_sens->add_option("--config", sens.config_path, "column-mapping JSON config")->required();
  c_sens->add_option("--kind", sens.kind, "T, U, or both");
  c_sens->add_option("--delta-points", sens.delta_points, "delta grid size on [0, 0.5]");
  c_sens->add_option("--params", sens.params, "comma list: catt, cqtt:Q");
  c_sens->add_option("--bandwidth", sens.bandwidth, "kernel bandwidth (default: plug-in rule)");
  c_sens->add_option("--rule", sens.rule, "median-split or exact-levels");
  c_sens->add_option("--out", sens.out_dir, "output directory");
  c_sens->add_option("--jobs", sens.jobs, "parallel workers over cells");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (c_check->parsed()) return run_check(check);
    if (c_bounds->parsed()) return run_bounds(bounds);
    if (c_oracle->parsed()) return run_oracle(oracle);
    if (c_sim->parsed()) return run_simulate(sim);
    if (c_sens->parsed()) return run_sensitivity(sens);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
