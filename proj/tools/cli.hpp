#pragma once

// Subcommand implementations for the torfrech executable. Kept in a header so
// the test suites can drive the CLI in-process.

#include <algorithm>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "torfrech/torfrech.hpp"

namespace torfrech::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3 };

//! Raised for flag problems found after parsing; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//! Raised for numerical failures that should be reported with context.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

inline double to_double(const std::string& s, const std::string& flag) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(flag + ": '" + s + "' is not a number");
  }
}

inline std::vector<double> parse_list(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  for (const auto& p : split(s, ',')) {
    if (!p.empty()) out.push_back(to_double(p, flag));
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

//! One axis: "a:b:step" (inclusive) or a comma list.
inline std::vector<double> parse_axis(const std::string& s, const std::string& flag) {
  if (s.find(':') == std::string::npos) return parse_list(s, flag);
  const auto p = split(s, ':');
  if (p.size() != 3) throw UsageError(flag + ": range must be lo:hi:step");
  const double lo = to_double(p[0], flag), hi = to_double(p[1], flag), step = to_double(p[2], flag);
  if (!(step > 0.0) || hi < lo) throw UsageError(flag + ": need lo <= hi and step > 0");
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> v;
  for (long i = 0; i < count; ++i) v.push_back(lo + step * static_cast<double>(i));
  return v;
}

//! Axes separated by ';'. A single axis is replicated to all d axes.
inline std::vector<std::vector<double>> parse_grid(const std::string& s, std::size_t d, const std::string& flag) {
  std::vector<std::vector<double>> axes;
  for (const auto& a : split(s, ';')) axes.push_back(parse_axis(a, flag));
  if (axes.size() == 1) axes.resize(d, axes.front());
  if (axes.size() != d) {
    throw UsageError(flag + ": expected 1 or " + std::to_string(d) + " axes, got " + std::to_string(axes.size()));
  }
  return axes;
}

//! --space accepts a descriptor path or inline JSON; empty means the sidecar
//! of the data file.
inline ResponseSpace resolve_space(const std::string& spec, const std::string& data_path) {
  if (spec.empty()) return space_from_json(read_json_file(sidecar_path(data_path)));
  const auto first = spec.find_first_not_of(" \t");
  if (first != std::string::npos && spec[first] == '{') {
    try {
      return space_from_json(json::parse(spec));
    } catch (const json::exception& e) {
      throw UsageError(std::string("--space: ") + e.what());
    }
  }
  return space_from_json(read_json_file(spec));
}

inline json condition_to_json(double c) { return std::isfinite(c) ? json(c) : json("inf"); }

struct CvFlags {
  std::string grid1;
  double stage2_frac = 0.25;
  int stage2_halfwidth = 2;
  int k = 5;
  std::uint64_t seed = 1;
};

inline void add_cv_flags(CLI::App* sub, CvFlags& f) {
  sub->add_option("--grid1", f.grid1,
                  "Stage-1 grid: per-axis 'lo:hi:step' or comma list, axes separated by ';' "
                  "(default 0.1:1.0:0.1 on every axis)");
  sub->add_option("--stage2-frac", f.stage2_frac, "Stage-2 spacing as a fraction of stage-1 spacing")
    ->capture_default_str();
  sub->add_option("--stage2-halfwidth", f.stage2_halfwidth, "Stage-2 cells per side of the stage-1 winner")
    ->capture_default_str();
  sub->add_option("--k", f.k, "Number of cross-validation folds")->capture_default_str();
  sub->add_option("--seed", f.seed, "Seed for the fold assignment")->capture_default_str();
}

inline GridSpec make_grid(const CvFlags& f, std::size_t d) {
  GridSpec g = default_grid(d);
  if (!f.grid1.empty()) g.stage1 = parse_grid(f.grid1, d, "--grid1");
  g.stage2_fraction = f.stage2_frac;
  g.stage2_halfwidth = f.stage2_halfwidth;
  validate_grid(g);
  return g;
}

struct FitFlags {
  std::string data, space, estimator = "ll", bandwidth, kernel = "vonmises", query, out, diagnostics;
  bool cv = false;
  CvFlags cvf;
};

inline int cmd_fit(const FitFlags& f, std::ostream& log) {
  if (f.bandwidth.empty() && !f.cv) throw UsageError("fit: one of --bandwidth or --cv is required");
  const auto space = resolve_space(f.space, f.data);
  const auto est = parse_estimator(f.estimator);
  const auto kernel = parse_kernel(f.kernel);
  const Dataset data = load_dataset(f.data, space);
  const auto queries = load_queries(f.query);
  for (std::size_t r = 0; r < queries.size(); ++r) {
    if (queries[r].dim() != data.dim()) {
      throw UsageError("--query row " + std::to_string(r + 1) + " has dimension " + std::to_string(queries[r].dim()) +
                       ", data has " + std::to_string(data.dim()));
    }
  }

  json diag;
  BandwidthVector h;
  if (f.cv) {
    const auto grid = make_grid(f.cvf, data.dim());
    const auto cv = two_stage_search(data, kernel, grid, f.cvf.k, f.cvf.seed, est, default_thread_count());
    h = cv.best_h;
    diag["cv"] = cv_result_to_json(cv);
  } else {
    auto hv = parse_list(f.bandwidth, "--bandwidth");
    if (hv.size() == 1) hv.resize(data.dim(), hv.front());
    if (hv.size() != data.dim()) {
      throw UsageError("--bandwidth: expected " + std::to_string(data.dim()) + " components");
    }
    h = BandwidthVector(hv);
  }

  std::vector<Payload> preds(queries.size());
  json per_query = json::array();
  for (std::size_t r = 0; r < queries.size(); ++r) {
    try {
      const LocalFit fit = estimate(est, data, queries[r], h, kernel);
      preds[r] = fit.estimate;
      per_query.push_back({{"row", r + 1},
                           {"condition_number", condition_to_json(fit.diagnostics.condition_number)},
                           {"solver_iterations", fit.diagnostics.solver_iterations},
                           {"objective", fit.diagnostics.objective}});
    } catch (const Error& e) {
      if (!e.is_numerical()) throw;
      throw NumericalFailure("query row " + std::to_string(r + 1) + ": " + e.what());
    }
  }
  save_rows(f.out, space, data.dim(), queries, preds);
  diag["estimator"] = std::string(to_string(est));
  diag["kernel"] = std::string(to_string(kernel));
  diag["bandwidth"] = std::vector<double>(h.values().begin(), h.values().end());
  diag["queries"] = per_query;
  write_json_file(f.diagnostics.empty() ? f.out + ".diagnostics.json" : f.diagnostics, diag);
  log << "fit: wrote " << queries.size() << " predictions to " << f.out << "\n";
  return kOk;
}

struct CvCmdFlags {
  std::string data, space, estimator = "ll", kernel = "vonmises", out;
  CvFlags cvf;
};

inline int cmd_cv(const CvCmdFlags& f, std::ostream& log) {
  const auto space = resolve_space(f.space, f.data);
  const auto est = parse_estimator(f.estimator);
  const auto kernel = parse_kernel(f.kernel);
  const Dataset data = load_dataset(f.data, space);
  const auto grid = make_grid(f.cvf, data.dim());
  const auto cv = two_stage_search(data, kernel, grid, f.cvf.k, f.cvf.seed, est, default_thread_count());
  write_json_file(f.out, cv_result_to_json(cv));
  log << "cv: best h = (";
  for (std::size_t l = 0; l < cv.best_h.dim(); ++l) log << (l ? ", " : "") << cv.best_h[l];
  log << "), score " << cv.best_score << "\n";
  return kOk;
}

struct SimFlags {
  std::string n = "50", sigma = "0.1", estimators = "lc,ll", kernel = "vonmises", out;
  int reps = 20, quad = 30;
  bool timing = false;
  CvFlags cvf;
};

inline int cmd_simulate(const SimFlags& f, std::ostream& log) {
  std::vector<SimConfig> configs;
  std::vector<Estimator> ests;
  for (const auto& e : split(f.estimators, ',')) {
    if (!e.empty()) ests.push_back(parse_estimator(e));
  }
  const auto grid = make_grid(f.cvf, 2);
  for (double sigma : parse_list(f.sigma, "--sigma")) {
    for (double nv : parse_list(f.n, "--n")) {
      SimConfig c;
      c.n = static_cast<int>(nv);
      if (static_cast<double>(c.n) != nv) throw UsageError("--n: sample sizes must be integers");
      c.sigma = sigma;
      c.reps = f.reps;
      c.seed = f.cvf.seed;
      c.grid = grid;
      c.quad_per_axis = f.quad;
      c.folds = f.cvf.k;
      c.kernel = parse_kernel(f.kernel);
      c.estimators = ests;
      c.threads = default_thread_count();
      validate(c);
      configs.push_back(c);
    }
  }
  std::vector<SimReport> reports;
  for (const auto& c : configs) {
    reports.push_back(run_study(c));
    log << "simulate: sigma=" << c.sigma << " n=" << c.n;
    for (const auto& e : reports.back().estimators) log << " " << to_string(e.estimator) << "=" << e.mise;
    log << " (" << reports.back().wall_seconds << " s)\n";
  }
  write_json_file(f.out, sim_reports_to_json(reports, f.timing));
  return kOk;
}

struct IngestFlags {
  std::string trips, out;
  int k = 13;
  std::optional<double> cw;
};

inline int cmd_ingest_network(const IngestFlags& f, std::ostream& log) {
  std::vector<TripRecord> trips;
  try {
    trips = load_trips(f.trips);
  } catch (const Error& e) {
    throw UsageError(std::string("--trips: ") + e.what());
  }
  LaplacianSeries series;
  try {
    series = build_laplacians(trips, f.k, f.cw);
  } catch (const Error& e) {
    throw UsageError(std::string("--trips: ") + e.what());
  }
  const auto space = ResponseSpace::graph_laplacian(series.nodes, series.cw);
  save_rows(f.out, space, 2, series.predictors, series.laplacians);
  if (series.predictors.empty()) {
    log << "warning: no trips in '" << f.trips << "'; wrote an empty dataset\n";
  } else {
    log << "ingest-network: wrote " << series.predictors.size() << " Laplacians to " << f.out << "\n";
  }
  return kOk;
}

struct EvalFlags {
  std::string pred, truth, space, out;
};

inline int cmd_eval(const EvalFlags& f, std::ostream& log) {
  const auto space = resolve_space(f.space, f.truth);
  const auto pred = load_rows(f.pred, space);
  const auto truth = load_rows(f.truth, space);
  if (pred.responses.size() != truth.responses.size()) {
    throw UsageError("--pred has " + std::to_string(pred.responses.size()) + " rows but --truth has " +
                     std::to_string(truth.responses.size()));
  }
  if (truth.responses.empty()) throw UsageError("--truth has no rows");
  double total = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < truth.responses.size(); ++i) {
    const double d = distance_unchecked(space, pred.responses[i], truth.responses[i]);
    total += d * d;
    worst = std::max(worst, d * d);
  }
  const json out = {{"n", truth.responses.size()},
                    {"mean_sq_distance", total / static_cast<double>(truth.responses.size())},
                    {"max_sq_distance", worst}};
  if (!f.out.empty()) write_json_file(f.out, out);
  log << out.dump() << "\n";
  return kOk;
}

//! Appends "--key value" for every config-file entry whose flag does not
//! already appear on the command line, so explicit flags win.
inline std::vector<std::string> merge_config(std::vector<std::string> args, const std::string& config_path) {
  const json cfg = read_json_file(config_path);
  if (!cfg.is_object()) throw UsageError("--config: expected a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
      continue;
    }
    std::string text;
    if (value.is_string()) text = value.get<std::string>();
    else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) text += (i ? "," : "") + value[i].dump();
    } else text = value.dump();
    args.push_back(flag);
    args.push_back(text);
  }
  return args;
}

//! Entry point; args excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  // The config file is merged before parsing so that its values are
  // validated exactly like flags.
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      const std::string path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      try {
        args = merge_config(std::move(args), path);
      } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
      }
      break;
    }
  }

  CLI::App app{"Local constant and local linear Fréchet regression with toroidal predictors"};
  app.require_subcommand(1);
  app.add_option("--config", "JSON file of flag values; explicit flags take precedence");

  FitFlags fit;
  auto* s_fit = app.add_subcommand("fit", "Fit an estimator and predict at query points");
  s_fit->add_option("--data", fit.data, "Dataset CSV (theta_1..theta_d,response)")->required();
  s_fit->add_option("--space", fit.space, "Space descriptor JSON file or inline JSON (default: <data>.space.json)");
  s_fit->add_option("--estimator", fit.estimator, "lc (local constant) or ll (local linear)")->capture_default_str();
  auto* o_bw = s_fit->add_option("--bandwidth", fit.bandwidth, "Bandwidths h1,..,hd (one value applies to all axes)");
  auto* o_cv = s_fit->add_flag("--cv", fit.cv, "Select the bandwidth by two-stage cross-validation");
  o_bw->excludes(o_cv);
  s_fit->add_option("--kernel", fit.kernel, "vonmises | exponential | uniform")->capture_default_str();
  s_fit->add_option("--query", fit.query, "Query CSV with columns theta_1..theta_d")->required();
  s_fit->add_option("--out", fit.out, "Prediction CSV to write")->required();
  s_fit->add_option("--diagnostics", fit.diagnostics, "Diagnostics JSON (default: <out>.diagnostics.json)");
  add_cv_flags(s_fit, fit.cvf);

  CvCmdFlags cvc;
  auto* s_cv = app.add_subcommand("cv", "Two-stage cross-validated bandwidth search");
  s_cv->add_option("--data", cvc.data, "Dataset CSV")->required();
  s_cv->add_option("--space", cvc.space, "Space descriptor JSON file or inline JSON");
  s_cv->add_option("--estimator", cvc.estimator, "lc or ll")->capture_default_str();
  s_cv->add_option("--kernel", cvc.kernel, "vonmises | exponential | uniform")->capture_default_str();
  s_cv->add_option("--out", cvc.out, "CV result JSON to write")->required();
  add_cv_flags(s_cv, cvc.cvf);

  SimFlags sim;
  auto* s_sim = app.add_subcommand("simulate", "Monte Carlo study with sphere-valued responses on T^2");
  s_sim->add_option("--n", sim.n, "Sample size(s), comma separated")->capture_default_str();
  s_sim->add_option("--sigma", sim.sigma, "Noise level(s), comma separated; concentration is 1/sigma")
    ->capture_default_str();
  s_sim->add_option("--reps", sim.reps, "Monte Carlo replications")->capture_default_str();
  s_sim->add_option("--quad", sim.quad, "Quadrature points per axis for the integrated error")->capture_default_str();
  s_sim->add_option("--estimators", sim.estimators, "Estimators to run, comma separated")->capture_default_str();
  s_sim->add_option("--kernel", sim.kernel, "vonmises | exponential | uniform")->capture_default_str();
  s_sim->add_option("--out", sim.out, "Report JSON to write")->required();
  s_sim->add_flag("--timing", sim.timing, "Include wall-clock seconds in the report");
  add_cv_flags(s_sim, sim.cvf);

  IngestFlags ing;
  auto* s_ing = app.add_subcommand("ingest-network", "Build per-hour graph Laplacians from trip records");
  s_ing->add_option("--trips", ing.trips, "Trips CSV (hour,day,doy_len,origin,dest)")->required();
  s_ing->add_option("--k", ing.k, "Number of regions")->capture_default_str();
  s_ing->add_option("--cw", ing.cw, "Edge-weight bound (default: largest observed count)");
  s_ing->add_option("--out", ing.out, "Dataset CSV to write")->required();

  EvalFlags ev;
  auto* s_eval = app.add_subcommand("eval", "Squared-distance summary between prediction and truth files");
  s_eval->add_option("--pred", ev.pred, "Prediction CSV")->required();
  s_eval->add_option("--truth", ev.truth, "Truth CSV")->required();
  s_eval->add_option("--space", ev.space, "Space descriptor (default: <truth>.space.json)");
  s_eval->add_option("--out", ev.out, "Summary JSON to write");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    CLI::App* shown = &app;
    for (auto* sub : app.get_subcommands()) shown = sub;
    err << shown->help();
    return kUsage;
  }

  try {
    if (s_fit->parsed()) return cmd_fit(fit, err);
    if (s_cv->parsed()) return cmd_cv(cvc, err);
    if (s_sim->parsed()) return cmd_simulate(sim, err);
    if (s_ing->parsed()) return cmd_ingest_network(ing, err);
    if (s_eval->parsed()) return cmd_eval(ev, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return kUsage;
  } catch (const NumericalFailure& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_numerical() ? kNumerical : kUsage;
  }
  return kUsage;
}

} // namespace torfrech::cli
