#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "bandwidth.hpp"
#include "error.hpp"
#include "frechet.hpp"
#include "metric.hpp"
#include "simulate.hpp"
#include "torus.hpp"

namespace torfrech {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON codecs

inline json space_to_json(const ResponseSpace& space) {
  return std::visit(
    [](const auto& s) -> json {
      using T = std::decay_t<decltype(s)>;
      if constexpr (std::is_same_v<T, ScalarSpace>) return {{"kind", "scalar"}, {"lo", s.lo}, {"hi", s.hi}};
      else if constexpr (std::is_same_v<T, SphereSpace>) return {{"kind", "sphere"}, {"p", s.p}};
      else if constexpr (std::is_same_v<T, WassersteinSpace>)
        return {{"kind", "wasserstein"}, {"grid", s.grid}, {"a", s.a}, {"b", s.b}};
      else return {{"kind", "graph_laplacian"}, {"nodes", s.nodes}, {"cw", s.cw}};
    },
    space.kind());
}

inline ResponseSpace space_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "scalar") return ResponseSpace::scalar(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (kind == "sphere") return ResponseSpace::sphere(j.at("p").get<int>());
    if (kind == "wasserstein")
      return ResponseSpace::wasserstein(j.at("grid").get<int>(), j.at("a").get<double>(), j.at("b").get<double>());
    if (kind == "graph_laplacian") return ResponseSpace::graph_laplacian(j.at("nodes").get<int>(), j.at("cw").get<double>());
    fail(ErrorKind::Parse, "unknown space kind '" + kind + "'");
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("space descriptor: ") + e.what());
  }
}

//! Scalar payloads encode as a bare number, all others as a flat array.
inline json payload_to_json(const ResponseSpace& space, const Payload& y) {
  if (space.is<ScalarSpace>()) return y.at(0);
  return json(y);
}

inline Payload payload_from_json(const ResponseSpace& space, const json& j) {
  Payload y;
  if (space.is<ScalarSpace>()) {
    if (!j.is_number()) fail(ErrorKind::Parse, "scalar payload must be a number");
    y.push_back(j.get<double>());
  } else {
    if (!j.is_array()) fail(ErrorKind::Parse, space.name() + " payload must be an array");
    for (const auto& v : j) {
      if (!v.is_number()) fail(ErrorKind::Parse, space.name() + " payload entries must be numbers");
      y.push_back(v.get<double>());
    }
  }
  validate(space, y);
  return y;
}

inline json grid_to_json(const GridSpec& g) {
  return {{"stage1", g.stage1}, {"stage2_fraction", g.stage2_fraction}, {"stage2_halfwidth", g.stage2_halfwidth}};
}

inline GridSpec grid_from_json(const json& j) {
  try {
    GridSpec g;
    g.stage1 = j.at("stage1").get<std::vector<std::vector<double>>>();
    if (j.contains("stage2_fraction")) g.stage2_fraction = j.at("stage2_fraction").get<double>();
    if (j.contains("stage2_halfwidth")) g.stage2_halfwidth = j.at("stage2_halfwidth").get<int>();
    validate_grid(g);
    return g;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("grid spec: ") + e.what());
  }
}

//! Scores may be the infinite sentinel, which JSON cannot carry as a number.
inline json score_to_json(double s) {
  if (std::isinf(s)) return "inf";
  return s;
}

inline json cv_result_to_json(const CVResult& r) {
  auto entries = [](const std::vector<CvEntry>& v) {
    json a = json::array();
    for (const auto& e : v) {
      json o = {{"h", e.h}, {"score", score_to_json(e.score)}};
      if (e.reused) o["reused"] = true;
      a.push_back(std::move(o));
    }
    return a;
  };
  return {{"best_h", std::vector<double>(r.best_h.values().begin(), r.best_h.values().end())},
          {"best_score", score_to_json(r.best_score)},
          {"seed", r.seed},
          {"folds", r.folds},
          {"stage1", entries(r.stage1)},
          {"stage2", entries(r.stage2)}};
}

inline json sim_config_to_json(const SimConfig& c) {
  json est = json::array();
  for (auto e : c.estimators) est.push_back(std::string(to_string(e)));
  return {{"n", c.n},
          {"sigma", c.sigma},
          {"reps", c.reps},
          {"seed", c.seed},
          {"grid", grid_to_json(c.grid)},
          {"quad_per_axis", c.quad_per_axis},
          {"folds", c.folds},
          {"kernel", std::string(to_string(c.kernel))},
          {"estimators", est}};
}

inline SimConfig sim_config_from_json(const json& j) {
  try {
    SimConfig c;
    if (j.contains("n")) c.n = j.at("n").get<int>();
    if (j.contains("sigma")) c.sigma = j.at("sigma").get<double>();
    if (j.contains("reps")) c.reps = j.at("reps").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
    if (j.contains("quad_per_axis")) c.quad_per_axis = j.at("quad_per_axis").get<int>();
    if (j.contains("folds")) c.folds = j.at("folds").get<int>();
    if (j.contains("kernel")) c.kernel = parse_kernel(j.at("kernel").get<std::string>());
    if (j.contains("estimators")) {
      c.estimators.clear();
      for (const auto& e : j.at("estimators")) c.estimators.push_back(parse_estimator(e.get<std::string>()));
    }
    validate(c);
    return c;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("simulation config: ") + e.what());
  }
}

//! Report with a summary table (one row per scenario, one column per
//! estimator) followed by per-replication detail.
inline json sim_reports_to_json(const std::vector<SimReport>& reports, bool with_timing = false) {
  json table = json::array();
  json scenarios = json::array();
  for (const auto& r : reports) {
    json row = {{"sigma", r.sigma}, {"n", r.n}};
    json detail = {{"sigma", r.sigma}, {"n", r.n}, {"reps", r.reps}, {"seed", r.seed}, {"quad_per_axis", r.quad_per_axis}};
    json ests = json::object();
    for (const auto& e : r.estimators) {
      const std::string key(to_string(e.estimator));
      row[key] = std::isnan(e.mise) ? json(nullptr) : json(e.mise);
      json reps = json::array();
      for (const auto& rr : e.replications) {
        json o = {{"excluded", rr.excluded}};
        if (rr.excluded) {
          o["error"] = rr.error;
        } else {
          o["bandwidth"] = rr.bandwidth;
          o["cv_score"] = rr.cv_score;
          o["ise"] = rr.ise;
        }
        reps.push_back(std::move(o));
      }
      ests[key] = {{"mise", row[key]}, {"excluded", e.excluded}, {"replications", reps}};
    }
    detail["estimators"] = ests;
    if (with_timing) detail["wall_seconds"] = r.wall_seconds;
    table.push_back(std::move(row));
    scenarios.push_back(std::move(detail));
  }
  return {{"table", table}, {"scenarios", scenarios}};
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

//! Split one CSV record; fields may be double-quoted with "" escapes.
inline std::vector<std::string> csv_split(const std::string& line, std::size_t row) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) fail(ErrorKind::Parse, "row " + std::to_string(row) + ": unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

inline double parse_double(const std::string& s, std::size_t row, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Parse, "row " + std::to_string(row) + ": column '" + column + "' is not a number: '" + s + "'");
  }
}

inline long parse_int(const std::string& s, std::size_t row, const std::string& column) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Parse, "row " + std::to_string(row) + ": column '" + column + "' is not an integer: '" + s + "'");
  }
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidArgument, "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  // trailing blank lines
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorKind::InvalidArgument, "write failed for '" + path + "'");
}

} // namespace detail

inline std::string sidecar_path(const std::string& data_path) { return data_path + ".space.json"; }

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidArgument, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, "'" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) { detail::write_text(path, j.dump(2) + "\n"); }

//! Header theta_1..theta_d,response; one row per observation, the response
//! column holding the payload's JSON text.
inline std::string dataset_to_csv(const ResponseSpace& space, std::size_t d, const std::vector<TorusPoint>& x,
                                  const std::vector<Payload>& y) {
  std::ostringstream out;
  for (std::size_t l = 0; l < d; ++l) out << "theta_" << (l + 1) << ',';
  out << "response\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (double a : x[i].angles()) out << detail::format_double(a) << ',';
    std::string payload;
    if (space.is<ScalarSpace>()) {
      payload = detail::format_double(y[i][0]);
    } else {
      payload = "[";
      for (std::size_t c = 0; c < y[i].size(); ++c) {
        if (c) payload += ',';
        payload += detail::format_double(y[i][c]);
      }
      payload += "]";
    }
    out << detail::csv_quote(payload) << '\n';
  }
  return out.str();
}

//! Writes the CSV and its space descriptor sidecar. Zero rows are allowed.
inline void save_rows(const std::string& path, const ResponseSpace& space, std::size_t d,
                      const std::vector<TorusPoint>& x, const std::vector<Payload>& y) {
  detail::write_text(path, dataset_to_csv(space, d, x, y));
  write_json_file(sidecar_path(path), space_to_json(space));
}

inline void save_dataset(const std::string& path, const Dataset& data) {
  save_rows(path, data.space(), data.dim(), data.predictors(), data.responses());
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::string& path) {
  const auto lines = detail::read_lines(path);
  CsvTable t;
  if (lines.empty()) return t;
  t.header = detail::csv_split(lines[0], 0);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].empty()) continue;
    auto f = detail::csv_split(lines[r], r);
    if (f.size() != t.header.size()) {
      fail(ErrorKind::Parse, "row " + std::to_string(r) + ": expected " + std::to_string(t.header.size()) +
                               " fields, got " + std::to_string(f.size()));
    }
    t.rows.push_back(std::move(f));
  }
  return t;
}

namespace detail {

//! Number of leading theta_l columns; throws if the header is malformed.
inline std::size_t theta_columns(const std::vector<std::string>& header) {
  std::size_t d = 0;
  while (d < header.size() && header[d] == "theta_" + std::to_string(d + 1)) ++d;
  if (d == 0) fail(ErrorKind::Parse, "header must start with theta_1");
  return d;
}

} // namespace detail

//! Query points: a CSV whose leading columns are theta_1..theta_d. Other
//! columns (such as a response) are ignored.
inline std::vector<TorusPoint> load_queries(const std::string& path) {
  const auto t = read_csv(path);
  if (t.header.empty()) fail(ErrorKind::EmptyDataset, "'" + path + "' is empty");
  const auto d = detail::theta_columns(t.header);
  std::vector<TorusPoint> q;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<double> a(d);
    for (std::size_t l = 0; l < d; ++l) {
      a[l] = detail::parse_double(t.rows[r][l], r + 1, t.header[l]);
      if (!std::isfinite(a[l])) fail(ErrorKind::Parse, "row " + std::to_string(r + 1) + ": non-finite angle");
    }
    q.emplace_back(std::move(a));
  }
  return q;
}

//! Rows of a dataset file without constructing a Dataset (allows zero rows).
struct DatasetRows {
  std::size_t d = 0;
  std::vector<TorusPoint> predictors;
  std::vector<Payload> responses;
};

inline DatasetRows load_rows(const std::string& path, const ResponseSpace& space) {
  const auto t = read_csv(path);
  if (t.header.empty()) fail(ErrorKind::EmptyDataset, "'" + path + "' is empty");
  DatasetRows out;
  out.d = detail::theta_columns(t.header);
  if (t.header.size() != out.d + 1 || t.header.back() != "response") {
    fail(ErrorKind::Parse, "header must be theta_1..theta_d,response");
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::size_t row = r + 1;
    std::vector<double> a(out.d);
    for (std::size_t l = 0; l < out.d; ++l) {
      a[l] = detail::parse_double(t.rows[r][l], row, t.header[l]);
      if (!std::isfinite(a[l])) fail(ErrorKind::Parse, "row " + std::to_string(row) + ": non-finite angle");
    }
    json pj;
    try {
      pj = json::parse(t.rows[r][out.d]);
    } catch (const json::exception&) {
      fail(ErrorKind::Parse, "row " + std::to_string(row) + ": response is not valid JSON");
    }
    try {
      out.responses.push_back(payload_from_json(space, pj));
    } catch (const Error& e) {
      fail(e.kind(), "row " + std::to_string(row) + ": " + e.what());
    }
    out.predictors.emplace_back(std::move(a));
  }
  return out;
}

inline Dataset load_dataset(const std::string& path, const ResponseSpace& space) {
  auto rows = load_rows(path, space);
  if (rows.predictors.empty()) fail(ErrorKind::EmptyDataset, "'" + path + "' has no observations");
  return Dataset(space, std::move(rows.predictors), std::move(rows.responses));
}

//! Loads with the descriptor from the sidecar file next to `path`.
inline Dataset load_dataset(const std::string& path) {
  return load_dataset(path, space_from_json(read_json_file(sidecar_path(path))));
}

// ---------------------------------------------------------------------------
// Trip records and graph Laplacians

struct TripRecord {
  int hour = 0;      // 0..23
  int day = 1;       // 1..days_in_year
  int days_in_year = 365;
  int origin = 1;    // 1..nodes
  int dest = 1;      // 1..nodes
};

//! Hour of day and day of year as a point on T^2:
//! angles 2 pi (hour + 0.5) / 24 and 2 pi (day - 0.5) / D.
inline TorusPoint encode_time_to_torus(int hour, int day, int days_in_year) {
  require(hour >= 0 && hour <= 23, "encode_time_to_torus: hour must lie in 0..23");
  require(days_in_year == 365 || days_in_year == 366, "encode_time_to_torus: year length must be 365 or 366");
  require(day >= 1 && day <= days_in_year, "encode_time_to_torus: day must lie in 1..D");
  return TorusPoint{kTwoPi * (hour + 0.5) / 24.0, kTwoPi * (day - 0.5) / days_in_year};
}

inline std::vector<TripRecord> load_trips(const std::string& path) {
  const auto t = read_csv(path);
  std::vector<TripRecord> trips;
  if (t.header.empty()) return trips;
  const std::vector<std::string> expected{"hour", "day", "doy_len", "origin", "dest"};
  if (t.header != expected) fail(ErrorKind::Parse, "trips header must be hour,day,doy_len,origin,dest");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    TripRecord tr;
    tr.hour = static_cast<int>(detail::parse_int(f[0], r + 1, "hour"));
    tr.day = static_cast<int>(detail::parse_int(f[1], r + 1, "day"));
    tr.days_in_year = static_cast<int>(detail::parse_int(f[2], r + 1, "doy_len"));
    tr.origin = static_cast<int>(detail::parse_int(f[3], r + 1, "origin"));
    tr.dest = static_cast<int>(detail::parse_int(f[4], r + 1, "dest"));
    trips.push_back(tr);
  }
  return trips;
}

struct LaplacianSeries {
  double cw = 1.0;
  int nodes = 2;
  std::vector<TorusPoint> predictors;
  std::vector<Payload> laplacians;
};

//! Groups trips by (hour, day), counts undirected edges (both directions
//! summed, self-loops dropped), clips counts at cw and forms L = D - W.
//! Without an explicit cw the largest observed count is used, so nothing is
//! clipped.
inline LaplacianSeries build_laplacians(const std::vector<TripRecord>& trips, int nodes,
                                        std::optional<double> cw = std::nullopt) {
  require(nodes >= 2, "build_laplacians: need at least two nodes");
  if (cw) require(std::isfinite(*cw) && *cw > 0.0, "build_laplacians: cw must be > 0");
  const auto k = static_cast<std::size_t>(nodes);
  // key: (D, day, hour)
  std::map<std::tuple<int, int, int>, std::vector<double>> counts;
  for (std::size_t r = 0; r < trips.size(); ++r) {
    const auto& t = trips[r];
    const std::string where = "trip " + std::to_string(r + 1) + ": ";
    require(t.origin >= 1 && t.origin <= nodes && t.dest >= 1 && t.dest <= nodes, where + "region out of range");
    (void)encode_time_to_torus(t.hour, t.day, t.days_in_year); // range checks
    auto& c = counts[{t.days_in_year, t.day, t.hour}];
    if (c.empty()) c.assign(k * k, 0.0);
    if (t.origin == t.dest) continue;
    const auto i = static_cast<std::size_t>(t.origin - 1), j = static_cast<std::size_t>(t.dest - 1);
    c[i * k + j] += 1.0;
    c[j * k + i] += 1.0;
  }
  double max_count = 0.0;
  for (const auto& [key, c] : counts) {
    for (double v : c) max_count = std::max(max_count, v);
  }
  LaplacianSeries out;
  out.nodes = nodes;
  out.cw = cw ? *cw : std::max(1.0, max_count);
  for (const auto& [key, c] : counts) {
    const auto [days, day, hour] = key;
    std::vector<double> w;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) w.push_back(std::min(out.cw, c[i * k + j]));
    }
    out.predictors.push_back(encode_time_to_torus(hour, day, days));
    out.laplacians.push_back(detail::laplacian_from_weights(k, w));
  }
  return out;
}

} // namespace torfrech
