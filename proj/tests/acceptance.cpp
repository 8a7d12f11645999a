// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Arguments select a subset, e.g.
// `acceptance 2 3 9`.

#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"

using namespace torfrech;
using torfrech::testing::random_payload;
using torfrech::testing::random_point;
using torfrech::testing::random_sphere;
using torfrech::testing::TempDir;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

KernelFamily random_family(Rng& rng) {
  static constexpr KernelFamily all[] = {KernelFamily::VonMises, KernelFamily::Exponential, KernelFamily::Uniform};
  return all[uniform_below(rng, 3)];
}

Dataset scalar_dataset(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<TorusPoint> x;
  std::vector<Payload> y;
  for (std::size_t i = 0; i < n; ++i) {
    x.push_back(random_point(d, rng));
    y.push_back({standard_normal(rng)});
  }
  return Dataset(ResponseSpace::scalar(-10.0, 10.0), std::move(x), std::move(y));
}

// Angle offsets and kernel weights computed directly from the raw angles.
void local_design(const Dataset& data, const TorusPoint& x, const std::vector<double>& h,
                  std::vector<std::vector<double>>& theta, std::vector<double>& L) {
  theta.clear();
  L.clear();
  for (const auto& z : data.predictors()) {
    std::vector<double> t(x.dim());
    double r = 0.0;
    for (std::size_t l = 0; l < x.dim(); ++l) {
      const double diff = z[l] - x[l];
      t[l] = std::atan2(std::sin(diff), std::cos(diff));
      r += (1.0 - std::cos(diff)) / (h[l] * h[l]);
    }
    theta.push_back(std::move(t));
    L.push_back(std::exp(-r));
  }
}

// Intercept of the weighted least squares fit of y on (1, theta).
double wls_intercept(const std::vector<std::vector<double>>& theta, const std::vector<double>& L,
                     const std::vector<Payload>& y) {
  using M = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const auto n = static_cast<Eigen::Index>(theta.size());
  const auto d = static_cast<Eigen::Index>(theta.front().size());
  M A = M::Zero(d + 1, d + 1), b = M::Zero(d + 1, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Matrix<long double, Eigen::Dynamic, 1> x(d + 1);
    x(0) = 1.0L;
    for (Eigen::Index l = 0; l < d; ++l) x(l + 1) = theta[i][l];
    A += L[i] * x * x.transpose();
    b += L[i] * y[i][0] * x;
  }
  return static_cast<double>(A.fullPivLu().solve(b)(0, 0));
}

// 1. Scaled-down Monte Carlo comparison of the two estimators.
Verdict criterion1() {
  TempDir dir;
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream log;
  const int code = cli::run({"simulate", "--n", "50,200", "--sigma", "0.1", "--reps", "20", "--grid1", "0.1:1.0:0.1",
                             "--quad", "30", "--seed", "20240601", "--out", dir.file("sim.json")},
                            log, log);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (code != 0) return {false, "simulate exited " + std::to_string(code) + ": " + log.str()};
  const auto j = read_json_file(dir.file("sim.json"));
  double lc[2], ll[2];
  for (int s = 0; s < 2; ++s) {
    const auto& row = j["table"][s];
    if (row["lc"].is_null() || row["ll"].is_null()) return {false, "an estimator had every replication excluded"};
    lc[s] = row["lc"].get<double>();
    ll[s] = row["ll"].get<double>();
  }
  Verdict v;
  v.pass = ll[0] < lc[0] && ll[1] < lc[1] && lc[1] < lc[0] && ll[1] < ll[0] && ll[1] >= 0.3 && ll[1] <= 1.3 &&
           lc[1] >= 0.5 && lc[1] <= 2.0 && secs <= 900.0;
  v.detail = "MISE n=50: lc " + fmt(lc[0]) + " ll " + fmt(ll[0]) + "; n=200: lc " + fmt(lc[1]) + " ll " + fmt(ll[1]) +
             "; " + fmt(secs) + " s";
  return v;
}

// 2. Local linear weights average to one and have zero first moment.
Verdict criterion2() {
  Rng rng(2);
  int checked = 0, singular = 0;
  double worst0 = 0.0, worst1 = 0.0;
  for (std::size_t d : {1u, 2u}) {
    for (int t = 0; t < 500; ++t) {
      const auto data = scalar_dataset(5 + uniform_below(rng, 56), d, rng);
      const auto x = random_point(d, rng);
      std::vector<double> h(d);
      for (double& v : h) v = 0.05 + 1.5 * uniform01(rng);
      std::vector<double> w;
      LocalMoments m;
      try {
        m = local_moments(data, x, BandwidthVector(h), random_family(rng));
        w = local_linear_weights(m);
      } catch (const Error& e) {
        if (!e.is_numerical()) return {false, e.what()};
        ++singular;
        continue;
      }
      ++checked;
      long double s0 = 0.0L;
      std::vector<long double> s1(d, 0.0L);
      for (std::size_t i = 0; i < w.size(); ++i) {
        s0 += w[i];
        for (std::size_t l = 0; l < d; ++l) {
          const double diff = data.predictors()[i][l] - x[l];
          s1[l] += static_cast<long double>(w[i]) * std::atan2(std::sin(diff), std::cos(diff));
        }
      }
      const auto n = static_cast<long double>(w.size());
      long double nrm = 0.0L;
      for (auto v : s1) nrm += (v / n) * (v / n);
      worst0 = std::max(worst0, static_cast<double>(std::abs(s0 / n - 1.0L)));
      worst1 = std::max(worst1, static_cast<double>(std::sqrt(nrm)));
    }
  }
  return {worst0 <= 1e-10 && worst1 <= 1e-10 && checked > 0,
          std::to_string(checked) + " nonsingular fits (" + std::to_string(singular) + " singular); max |mean W - 1| " +
            fmt(worst0) + ", max |mean W theta| " + fmt(worst1)};
}

// 3. Scalar responses: weighted least squares and Nadaraya-Watson.
Verdict criterion3() {
  Rng rng(3);
  double worst_ll = 0.0, worst_lc = 0.0;
  int ll_checked = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + t % 2;
    const auto data = scalar_dataset(8 + uniform_below(rng, 40), d, rng);
    const auto x = random_point(d, rng);
    std::vector<double> h(d);
    for (double& v : h) v = 0.3 + uniform01(rng);
    std::vector<std::vector<double>> theta;
    std::vector<double> L;
    local_design(data, x, h, theta, L);
    long double num = 0.0L, den = 0.0L;
    for (std::size_t i = 0; i < L.size(); ++i) {
      num += static_cast<long double>(L[i]) * data.responses()[i][0];
      den += L[i];
    }
    const auto lc = local_constant_estimate(data, x, BandwidthVector(h), KernelFamily::VonMises);
    worst_lc = std::max(worst_lc, std::abs(lc.estimate[0] - static_cast<double>(num / den)));
    try {
      const auto ll = local_linear_estimate(data, x, BandwidthVector(h), KernelFamily::VonMises);
      worst_ll = std::max(worst_ll, std::abs(ll.estimate[0] - wls_intercept(theta, L, data.responses())));
      ++ll_checked;
    } catch (const Error& e) {
      if (!e.is_numerical()) return {false, e.what()};
    }
  }
  return {worst_ll <= 1e-8 && worst_lc <= 1e-12 && ll_checked > 0,
          "local linear " + std::to_string(ll_checked) + " fits, max diff " + fmt(worst_ll) +
            "; local constant max diff " + fmt(worst_lc)};
}

// 4. chart and inverse_chart are mutually inverse on T^3.
Verdict criterion4() {
  Rng rng(4);
  double worst = 0.0;
  for (int t = 0; t < 100000; ++t) {
    const auto x = random_point(3, rng);
    const auto z = random_point(3, rng);
    const auto back = chart(x, inverse_chart(x, z));
    for (std::size_t l = 0; l < 3; ++l) worst = std::max(worst, torfrech::testing::circular_gap(back[l], z[l]));
    std::vector<double> a(3);
    for (double& v : a) v = -kPi + kTwoPi * uniform01(rng);
    const auto th = inverse_chart(x, chart(x, TangentCoords{a}));
    for (std::size_t l = 0; l < 3; ++l) worst = std::max(worst, torfrech::testing::circular_gap(th.theta[l], a[l]));
  }
  return {worst <= 1e-12, "max angle error " + fmt(worst)};
}

// 5. Kernel moments with an odd component vanish.
Verdict criterion5() {
  double worst = 0.0;
  int count = 0;
  const std::vector<std::vector<int>> indices{{1}, {3}, {5}, {1, 0}, {0, 1}, {1, 1}, {3, 2}, {2, 5}, {1, 2, 2}, {2, 0, 3}};
  for (auto k : {KernelFamily::VonMises, KernelFamily::Exponential, KernelFamily::Uniform}) {
    for (double h : {0.05, 0.2, 0.5, 1.0, 2.0}) {
      for (const auto& j : indices) {
        const BandwidthVector bw(std::vector<double>(j.size(), h));
        for (int power : {1, 2}) {
          worst = std::max(worst, std::abs(kernel_moment(k, bw, j, power, j.size() == 3 ? 64 : 128)));
          ++count;
        }
      }
    }
  }
  return {worst <= 1e-8, std::to_string(count) + " moments, max |value| " + fmt(worst)};
}

// 6. Solver objective against brute-force grids.
Verdict criterion6() {
  Rng rng(6);
  struct Case {
    ResponseSpace space;
    double resolution;
  };
  const std::vector<Case> cases{{ResponseSpace::scalar(-1.0, 1.0), 1e-4},
                                {ResponseSpace::sphere(2), kPi / 180.0},
                                {ResponseSpace::graph_laplacian(2, 2.0), 1e-3}};
  Verdict v;
  for (const auto& c : cases) {
    double worst = -INFINITY;
    for (int t = 0; t < 50; ++t) {
      std::vector<Payload> pts;
      std::vector<double> w;
      const auto m = 2 + uniform_below(rng, 9);
      for (std::size_t i = 0; i < m; ++i) {
        pts.push_back(random_payload(c.space, rng));
        w.push_back(uniform01(rng) + 0.01);
      }
      const auto r = weighted_frechet_mean(c.space, pts, w);
      const auto o = frechet_mean_oracle(c.space, pts, w, c.resolution);
      const double gap = std::abs(r.objective - o.objective);
      worst = std::max(worst, gap - o.resolution_bound);
      if (gap > o.resolution_bound) v.pass = false;
    }
    v.detail += c.space.name() + " max(gap - bound) " + fmt(worst) + "; ";
  }
  return v;
}

// 7. A common rotation of predictors and query leaves the fit unchanged.
Verdict criterion7() {
  Rng rng(7);
  double worst_w = 0.0, worst_est = 0.0;
  int fits = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 1 + t % 3;
    std::vector<TorusPoint> x;
    std::vector<Payload> y;
    for (int i = 0; i < 30; ++i) {
      x.push_back(random_point(d, rng));
      y.push_back(random_sphere(2, rng));
    }
    std::vector<double> delta(d);
    for (double& v : delta) v = kTwoPi * (2.0 * uniform01(rng) - 1.0);
    std::vector<TorusPoint> xs;
    for (const auto& p : x) xs.push_back(shifted(p, delta));
    const Dataset a(ResponseSpace::sphere(2), x, y), b(ResponseSpace::sphere(2), xs, y);
    const auto q = random_point(d, rng);
    const BandwidthVector h(std::vector<double>(d, 0.4 + uniform01(rng)));
    for (auto est : {Estimator::LocalConstant, Estimator::LocalLinear}) {
      LocalFit fa, fb;
      try {
        fa = estimate(est, a, q, h, KernelFamily::VonMises);
      } catch (const Error& e) {
        if (!e.is_numerical()) return {false, e.what()};
        continue;
      }
      fb = estimate(est, b, shifted(q, delta), h, KernelFamily::VonMises);
      for (std::size_t i = 0; i < fa.weights.size(); ++i) worst_w = std::max(worst_w, std::abs(fa.weights[i] - fb.weights[i]));
      worst_est = std::max(worst_est, distance(a.space(), fa.estimate, fb.estimate));
      ++fits;
    }
  }
  return {worst_w <= 1e-10 && worst_est <= 1e-6,
          std::to_string(fits) + " fits; max weight diff " + fmt(worst_w) + ", max estimate distance " + fmt(worst_est)};
}

// 8. Every Laplacian produced passes the validator.
Verdict criterion8() {
  Rng rng(8);
  int checked = 0;
  try {
    for (int t = 0; t < 20; ++t) {
      const int k = 2 + static_cast<int>(uniform_below(rng, 12));
      std::vector<TripRecord> trips;
      for (int i = 0; i < 500; ++i) {
        trips.push_back({static_cast<int>(uniform_below(rng, 24)), 1 + static_cast<int>(uniform_below(rng, 3)), 366,
                         1 + static_cast<int>(uniform_below(rng, k)), 1 + static_cast<int>(uniform_below(rng, k))});
      }
      const std::optional<double> cw = t % 2 ? std::optional<double>(1.0 + uniform_below(rng, 4)) : std::nullopt;
      const auto series = build_laplacians(trips, k, cw);
      const auto space = ResponseSpace::graph_laplacian(series.nodes, series.cw);
      for (const auto& L : series.laplacians) {
        validate(space, L);
        ++checked;
      }
      // means with positive and with mixed-sign weights
      for (int s = 0; s < 5; ++s) {
        std::vector<double> w;
        for (std::size_t i = 0; i < series.laplacians.size(); ++i) w.push_back(uniform01(rng) - (s % 2 ? 0.3 : 0.0));
        if (std::abs(std::accumulate(w.begin(), w.end(), 0.0)) < 1e-3) continue;
        validate(space, weighted_frechet_mean(space, series.laplacians, w).value);
        ++checked;
      }
      // local fits on the series
      const Dataset data(space, series.predictors, series.laplacians);
      for (auto est : {Estimator::LocalConstant, Estimator::LocalLinear}) {
        try {
          validate(space, estimate(est, data, random_point(2, rng), BandwidthVector{0.8, 0.8}, KernelFamily::VonMises).estimate);
          ++checked;
        } catch (const Error& e) {
          if (!e.is_numerical() || e.kind() == ErrorKind::PayloadViolation) throw;
        }
      }
    }
  } catch (const Error& e) {
    return {false, std::string("after ") + std::to_string(checked) + " valid outputs: " + e.what()};
  }
  return {true, std::to_string(checked) + " Laplacians valid"};
}

// 9. The executable gives identical bytes across reruns and thread counts.
Verdict criterion9() {
  TempDir dir;
  Rng rng(9);
  std::vector<TorusPoint> x;
  std::vector<Payload> y;
  for (int i = 0; i < 60; ++i) {
    auto p = random_point(2, rng);
    y.push_back(sample_vmf(regression_fn(p), 10.0, rng));
    x.push_back(std::move(p));
  }
  save_dataset(dir.file("data.csv"), Dataset(ResponseSpace::sphere(2), x, y));
  const std::string cli = TORFRECH_CLI_PATH;
  const std::vector<std::pair<std::string, std::string>> commands{
    {"simulate", " simulate --n 40 --reps 4 --quad 10 --grid1 0.2:1.0:0.2 --seed 17 --out "},
    {"cv", " cv --data " + dir.file("data.csv") + " --grid1 0.2:1.0:0.2 --seed 17 --out "}};
  Verdict v;
  for (const auto& [name, args] : commands) {
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "8", "1", "8"}) {
      const auto out = dir.file(name + "_" + std::to_string(outputs.size()) + ".json");
      const std::string cmd = std::string("TORFRECH_THREADS=") + threads + " '" + cli + "'" + args + out + " 2>/dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, name + " failed: " + cmd};
      outputs.push_back(slurp(out));
    }
    bool same = !outputs[0].empty();
    for (const auto& o : outputs) same = same && o == outputs[0];
    v.pass = v.pass && same;
    v.detail += name + (same ? " identical" : " differs") + " over 4 runs; ";
  }
  return v;
}

} // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Verdict()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int id = static_cast<int>(c) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[c]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("criterion %d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
