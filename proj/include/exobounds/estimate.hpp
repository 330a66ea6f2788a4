#ifndef EXOBOUNDS_ESTIMATE_HPP
#define EXOBOUNDS_ESTIMATE_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "exobounds/bounds.hpp"
#include "exobounds/dist.hpp"

namespace exobounds {

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

struct IngestConfig {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
  struct Filter {
    std::string col;
    std::string op;  // one of > >= < <= == !=
    double val = 0.0;
  };
  std::vector<Filter> filters;

  static IngestConfig from_json(const nlohmann::json& j) {
    IngestConfig c;
    c.outcome = j.at("outcome").get<std::string>();
    c.treatment = j.at("treatment").get<std::string>();
    if (j.contains("covariates"))
      for (const auto& e : j.at("covariates")) c.covariates.push_back(e.get<std::string>());
    if (j.contains("filters"))
      for (const auto& e : j.at("filters"))
        c.filters.push_back({e.at("col").get<std::string>(), e.at("op").get<std::string>(),
                             e.at("val").get<double>()});
    return c;
  }
};

struct Dataset {
  std::vector<double> y;
  std::vector<int> x;
  std::vector<std::vector<double>> w;  // row-major covariate tuples
  std::vector<std::string> covariate_names;
  std::size_t size() const { return y.size(); }
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t dropped_missing = 0;
  std::size_t dropped_filtered = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

inline bool is_missing_cell(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == ".";
}

inline bool parse_cell(const std::string& s, double& out) {
  if (is_missing_cell(s)) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end != nullptr && *end == '\0' && std::isfinite(out);
}

inline bool filter_keeps(const IngestConfig::Filter& f, double v) {
  if (f.op == ">") return v > f.val;
  if (f.op == ">=") return v >= f.val;
  if (f.op == "<") return v < f.val;
  if (f.op == "<=") return v <= f.val;
  if (f.op == "==") return v == f.val;
  if (f.op == "!=") return v != f.val;
  throw std::invalid_argument("ingest_csv: unknown filter op '" + f.op + "'");
}

}  // namespace detail

// Typed dataset from a headered CSV; rows with missing mapped values or rows
// failing a filter are dropped and counted.
inline Dataset ingest_csv(const std::string& path, const IngestConfig& cfg,
                          IngestReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("ingest_csv: empty file " + path);
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < header.size(); ++i) col_index[header[i]] = i;
  auto require_col = [&](const std::string& name) {
    auto it = col_index.find(name);
    if (it == col_index.end())
      throw std::runtime_error("ingest_csv: column '" + name + "' not found in " + path);
    return it->second;
  };
  const std::size_t yc = require_col(cfg.outcome);
  const std::size_t xc = require_col(cfg.treatment);
  std::vector<std::size_t> wc;
  for (const auto& c : cfg.covariates) wc.push_back(require_col(c));
  std::vector<std::size_t> fc;
  for (const auto& f : cfg.filters) fc.push_back(require_col(f.col));

  Dataset ds;
  ds.covariate_names = cfg.covariates;
  IngestReport rep;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("ingest_csv: row " + std::to_string(row_no) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    ++rep.rows_read;
    double yv = 0.0, xv = 0.0;
    bool missing = !detail::parse_cell(cells[yc], yv);
    if (!detail::parse_cell(cells[xc], xv)) {
      missing = true;
    } else if (xv != 0.0 && xv != 1.0) {
      throw std::runtime_error("ingest_csv: row " + std::to_string(row_no) +
                               ": treatment value '" + cells[xc] + "' is not binary");
    }
    std::vector<double> wrow(wc.size());
    for (std::size_t k = 0; k < wc.size() && !missing; ++k)
      if (!detail::parse_cell(cells[wc[k]], wrow[k])) missing = true;
    if (missing) {
      ++rep.dropped_missing;
      continue;
    }
    bool keep = true;
    for (std::size_t k = 0; k < cfg.filters.size() && keep; ++k) {
      double fv = 0.0;
      if (!detail::parse_cell(cells[fc[k]], fv)) {
        ++rep.dropped_missing;
        keep = false;
      } else if (!detail::filter_keeps(cfg.filters[k], fv)) {
        ++rep.dropped_filtered;
        keep = false;
      }
    }
    if (!keep) continue;
    ds.y.push_back(yv);
    ds.x.push_back(static_cast<int>(xv));
    ds.w.push_back(std::move(wrow));
  }
  if (report) *report = rep;
  return ds;
}

// ---------------------------------------------------------------------------
// Covariate cells
// ---------------------------------------------------------------------------

struct Cell {
  std::string key;
  std::vector<double> arm0;
  std::vector<double> arm1;
  std::size_t size() const { return arm0.size() + arm1.size(); }
  double p1_hat() const { return static_cast<double>(arm1.size()) / static_cast<double>(size()); }
  bool has_overlap() const { return !arm0.empty() && !arm1.empty(); }
};

enum class PartitionRule { median_split, exact_levels };

inline double sample_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Covariate cells: median-split replaces each covariate with an
// above-median indicator; exact-levels keys on the raw value tuples. Empty
// combinations are simply absent from the result.
inline std::vector<Cell> cell_partition(const Dataset& ds,
                                        const std::vector<std::string>& covariates,
                                        PartitionRule rule,
                                        std::vector<std::string>* warnings = nullptr) {
  std::vector<std::size_t> idx;
  for (const auto& name : covariates) {
    auto it = std::find(ds.covariate_names.begin(), ds.covariate_names.end(), name);
    if (it == ds.covariate_names.end())
      throw std::invalid_argument("cell_partition: covariate '" + name + "' not in dataset");
    idx.push_back(static_cast<std::size_t>(it - ds.covariate_names.begin()));
  }
  std::vector<double> medians(idx.size(), 0.0);
  if (rule == PartitionRule::median_split) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::vector<double> col(ds.size());
      for (std::size_t i = 0; i < ds.size(); ++i) col[i] = ds.w[i][idx[k]];
      medians[k] = sample_median(std::move(col));
    }
  }
  std::map<std::string, Cell> cells;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (!key.empty()) key += ',';
      if (rule == PartitionRule::median_split) {
        key += covariates[k] + ">med=" + (ds.w[i][idx[k]] > medians[k] ? "1" : "0");
      } else {
        key += covariates[k] + "=" + render_double(ds.w[i][idx[k]]);
      }
    }
    if (key.empty()) key = "all";
    auto& cell = cells[key];
    cell.key = key;
    (ds.x[i] ? cell.arm1 : cell.arm0).push_back(ds.y[i]);
  }
  std::vector<Cell> out;
  for (auto& [k, c] : cells) out.push_back(std::move(c));
  if (warnings) {
    if (rule == PartitionRule::exact_levels && out.size() > ds.size() / 2 && ds.size() > 8)
      warnings->push_back("exact-levels produced nearly one cell per row; consider median-split");
    for (const auto& c : out)
      if (!c.has_overlap())
        warnings->push_back("cell '" + c.key + "' has a single treatment arm and will be skipped");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Smoothed conditional cdf
// ---------------------------------------------------------------------------

// Silverman's rule on the sample: 0.9 min(sd, IQR/1.34) n^(-1/5).
inline double silverman_bandwidth(const std::vector<double>& samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("silverman_bandwidth: need at least 2 samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  auto step = Cdf::from_samples(samples);
  const double iqr = step.quantile(0.75) - step.quantile(0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

// Integrated-Gaussian kernel estimate of the cdf; h = 0 degenerates to the
// empirical step function.
inline Cdf smoothed_cdf(const std::vector<double>& samples, double bandwidth) {
  if (bandwidth < 0.0) throw std::domain_error("smoothed_cdf: negative bandwidth");
  return Cdf::gaussian_kernel(samples, bandwidth);
}

// Plug-in variant using Silverman's rule.
inline Cdf smoothed_cdf(const std::vector<double>& samples) {
  return smoothed_cdf(samples, silverman_bandwidth(samples));
}

// ---------------------------------------------------------------------------
// Plug-in sensitivity curves and breakdown points
// ---------------------------------------------------------------------------

struct ParamRequest {
  bool catt = true;
  std::vector<double> cqtt_quantiles;  // e.g. {0.25, 0.5, 0.75}
};

struct ParamCurve {
  std::string param;
  BoundCurve curve;
  BreakdownResult breakdown;
};

struct SensitivityResult {
  std::string cell_key;
  std::string kind;
  double p1_hat = 0.0;
  std::size_t n0 = 0, n1 = 0;
  double bandwidth0 = 0.0, bandwidth1 = 0.0;
  std::vector<ParamCurve> params;
};

// Plug-in identified-set curves over a delta grid for one covariate cell:
// smoothed cdf per arm, cell-level treatment share, closed-form bounds, and
// a bisection-refined breakdown point per parameter. An absent bandwidth
// requests the plug-in rule per arm.
inline SensitivityResult estimate_sensitivity_curve(const Cell& cell, AssumptionKind kind,
                                                    const std::vector<double>& delta_grid,
                                                    const ParamRequest& request,
                                                    std::optional<double> bandwidth = {}) {
  if (!cell.has_overlap())
    throw std::invalid_argument("estimate_sensitivity_curve: cell '" + cell.key +
                                "' has a single treatment arm");
  for (std::size_t i = 0; i + 1 < delta_grid.size(); ++i)
    if (!(delta_grid[i] < delta_grid[i + 1]))
      throw std::invalid_argument("estimate_sensitivity_curve: delta grid must increase");

  SensitivityResult res;
  res.cell_key = cell.key;
  res.kind = kind_label(kind);
  res.p1_hat = cell.p1_hat();
  res.n0 = cell.arm0.size();
  res.n1 = cell.arm1.size();
  res.bandwidth0 = bandwidth.value_or(silverman_bandwidth(cell.arm0));
  res.bandwidth1 = bandwidth.value_or(silverman_bandwidth(cell.arm1));

  const Cdf f0 = smoothed_cdf(cell.arm0, res.bandwidth0);
  const Cdf f1 = smoothed_cdf(cell.arm1, res.bandwidth1);
  const TreatmentMarginal marg(res.p1_hat);

  double mean1 = 0.0;
  for (double v : cell.arm1) mean1 += v;
  mean1 /= static_cast<double>(cell.arm1.size());

  auto make_param = [&](const std::string& name,
                        const std::function<BoundInterval(double)>& at_delta) {
    ParamCurve pc;
    pc.param = name;
    pc.curve.kind = res.kind;
    pc.curve.param = name;
    pc.curve.grid = delta_grid;
    for (double d : delta_grid) pc.curve.intervals.push_back(at_delta(d));
    pc.curve.validate();
    pc.breakdown = breakdown_point([&](double d) { return at_delta(d).lower; });
    return pc;
  };

  if (request.catt) {
    res.params.push_back(make_param("CATT", [&](double d) {
      return att_identified_set(mean1, AssumptionSpec::symmetric(kind, d), f0, marg);
    }));
  }
  for (double q : request.cqtt_quantiles) {
    const double obs_q = f1.quantile(q);
    std::ostringstream name;
    name << "CQTT(" << q << ")";
    res.params.push_back(make_param(name.str(), [&, q, obs_q](double d) {
      return qtt_identified_set(q, obs_q, AssumptionSpec::symmetric(kind, d), f0, marg);
    }));
  }
  return res;
}

// JSON summary of breakdown points across cells and parameters.
inline nlohmann::json breakdown_summary(const std::vector<SensitivityResult>& results) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json cell;
    cell["cell"] = r.cell_key;
    cell["kind"] = r.kind;
    cell["p1_hat"] = r.p1_hat;
    cell["n0"] = r.n0;
    cell["n1"] = r.n1;
    nlohmann::json bps = nlohmann::json::object();
    for (const auto& p : r.params) {
      bps[p.param] = {{"delta_bp", p.breakdown.delta},
                      {"fails_at_point_identification", p.breakdown.fails_at_point_identification}};
    }
    cell["breakdown_points"] = bps;
    out.push_back(cell);
  }
  return out;
}

}  // namespace exobounds

#endif  // EXOBOUNDS_ESTIMATE_HPP
