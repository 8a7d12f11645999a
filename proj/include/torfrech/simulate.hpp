#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bandwidth.hpp"
#include "error.hpp"
#include "frechet.hpp"
#include "metric.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "torus.hpp"

namespace torfrech {

//! Sphere-valued regression function on T^2: the normalized
//! (cos psi, sin phi, sin psi cos phi) with (psi, phi) the two angles.
inline Payload regression_fn(const TorusPoint& x) {
  require(x.dim() == 2, "regression_fn: predictor must lie on T^2");
  const double psi = x[0], phi = x[1];
  Payload v{std::cos(psi), std::sin(phi), std::sin(psi) * std::cos(phi)};
  const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (norm < 1e-8) {
    fail(ErrorKind::InvalidArgument, "regression_fn: degenerate direction");
  }
  for (double& c : v) c /= norm;
  return v;
}

inline std::vector<TorusPoint> sample_uniform_torus(std::size_t d, std::size_t count, Rng& rng) {
  std::vector<TorusPoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> a(d);
    for (double& v : a) v = -kPi + kTwoPi * uniform01(rng);
    out.emplace_back(std::move(a));
  }
  return out;
}

//! von Mises-Fisher draw on S^2 by the exact inverse CDF of the cosine to
//! the mean direction, with a uniform azimuth around it.
inline Payload sample_vmf(const Payload& mu, double kappa, Rng& rng) {
  require(mu.size() == 3, "sample_vmf: mean direction must lie on S^2");
  require(std::isfinite(kappa) && kappa > 0.0, "sample_vmf: kappa must be > 0");
  const double u = uniform01(rng);
  double w = 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa;
  w = std::clamp(w, -1.0, 1.0);
  const double azimuth = kTwoPi * uniform01(rng);

  // Orthonormal frame {b1, b2} of the plane orthogonal to mu, seeded from
  // the coordinate axis least aligned with mu.
  std::size_t axis = 0;
  for (std::size_t c = 1; c < 3; ++c) {
    if (std::abs(mu[c]) < std::abs(mu[axis])) axis = c;
  }
  double b1[3] = {0.0, 0.0, 0.0};
  b1[axis] = 1.0;
  const double proj = mu[axis];
  for (std::size_t c = 0; c < 3; ++c) b1[c] -= proj * mu[c];
  const double n1 = std::sqrt(b1[0] * b1[0] + b1[1] * b1[1] + b1[2] * b1[2]);
  for (double& c : b1) c /= n1;
  const double b2[3] = {mu[1] * b1[2] - mu[2] * b1[1], mu[2] * b1[0] - mu[0] * b1[2], mu[0] * b1[1] - mu[1] * b1[0]};

  const double r = std::sqrt(std::max(0.0, 1.0 - w * w));
  Payload y(3);
  for (std::size_t c = 0; c < 3; ++c) {
    y[c] = w * mu[c] + r * (std::cos(azimuth) * b1[c] + std::sin(azimuth) * b2[c]);
  }
  detail::normalize_in_place(y);
  return y;
}

//! Cell midpoints of a q x q tensor grid on [-pi, pi)^2, first angle major.
inline std::vector<TorusPoint> quadrature_grid(int q) {
  require(q >= 1, "quadrature_grid: need at least one point per axis");
  std::vector<TorusPoint> pts;
  pts.reserve(static_cast<std::size_t>(q) * q);
  const double step = kTwoPi / q;
  for (int a = 0; a < q; ++a) {
    for (int b = 0; b < q; ++b) {
      pts.push_back(TorusPoint{-kPi + (a + 0.5) * step, -kPi + (b + 0.5) * step});
    }
  }
  return pts;
}

//! Midpoint-rule integral over [-pi, pi)^2 (not normalized by the area).
template <class Fn>
double torus_midpoint_integral(int q, Fn&& integrand) {
  const double cell = (kTwoPi / q) * (kTwoPi / q);
  double total = 0.0;
  for (const auto& x : quadrature_grid(q)) total += integrand(x);
  return total * cell;
}

//! Integrated squared geodesic error of estimates on quadrature_grid(q).
template <class Truth>
double integrated_squared_error(const ResponseSpace& space, const std::vector<Payload>& estimates, Truth&& truth,
                                int q) {
  const auto grid = quadrature_grid(q);
  require(estimates.size() == grid.size(), "integrated_squared_error: estimates do not match the grid");
  const double cell = (kTwoPi / q) * (kTwoPi / q);
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = distance_unchecked(space, estimates[i], truth(grid[i]));
    total += d * d;
  }
  return total * cell;
}

//! Average of per-replication integrated squared errors.
template <class Truth>
double mise(const ResponseSpace& space, const std::vector<std::vector<Payload>>& per_replication, Truth&& truth,
            int q) {
  require(!per_replication.empty(), "mise: no replications");
  double total = 0.0;
  for (const auto& est : per_replication) total += integrated_squared_error(space, est, truth, q);
  return total / static_cast<double>(per_replication.size());
}

struct SimConfig {
  int n = 50;
  double sigma = 0.1;
  int reps = 20;
  std::uint64_t seed = 1;
  GridSpec grid = default_grid(2);
  int quad_per_axis = 30;
  int folds = 5;
  KernelFamily kernel = KernelFamily::VonMises;
  std::vector<Estimator> estimators{Estimator::LocalConstant, Estimator::LocalLinear};
  unsigned threads = 1;
};

inline void validate(const SimConfig& c) {
  require(c.n >= 10, "simulate: n must be >= 10");
  require(std::isfinite(c.sigma) && c.sigma > 0.0, "simulate: sigma must be > 0");
  require(c.reps >= 1, "simulate: reps must be >= 1");
  require(c.quad_per_axis >= 10, "simulate: quad_per_axis must be >= 10");
  require(c.folds >= 2 && c.folds <= c.n, "simulate: folds must lie in [2, n]");
  require(!c.estimators.empty(), "simulate: no estimators selected");
  validate_grid(c.grid);
  require(c.grid.stage1.size() == 2, "simulate: grid must have two axes");
}

struct ReplicationResult {
  bool excluded = false;
  std::string error;
  std::vector<double> bandwidth;
  double cv_score = 0.0;
  double ise = 0.0;
};

struct EstimatorSummary {
  Estimator estimator = Estimator::LocalConstant;
  //! Mean over non-excluded replications; NaN if all were excluded.
  double mise = 0.0;
  int excluded = 0;
  std::vector<ReplicationResult> replications;
};

struct SimReport {
  int n = 0;
  double sigma = 0.0;
  int reps = 0;
  std::uint64_t seed = 0;
  int quad_per_axis = 0;
  std::vector<EstimatorSummary> estimators;
  double wall_seconds = 0.0;
};

//! One replication's data: uniform predictors, vMF responses around the
//! regression function with concentration 1/sigma.
inline Dataset simulate_dataset(int n, double sigma, Rng& rng) {
  auto x = sample_uniform_torus(2, static_cast<std::size_t>(n), rng);
  std::vector<Payload> y;
  y.reserve(x.size());
  for (const auto& p : x) y.push_back(sample_vmf(regression_fn(p), 1.0 / sigma, rng));
  return Dataset(ResponseSpace::sphere(2), std::move(x), std::move(y));
}

//! Seed of replication r; a fixed split of the master seed so results do not
//! depend on the order replications are run in.
inline std::uint64_t replication_seed(std::uint64_t master, int r) {
  return derive_seed(master, static_cast<std::uint64_t>(r));
}

inline SimReport run_study(const SimConfig& config) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  const auto space = ResponseSpace::sphere(2);
  const auto grid_points = quadrature_grid(config.quad_per_axis);

  // results[r][e]
  std::vector<std::vector<ReplicationResult>> results(static_cast<std::size_t>(config.reps));
  parallel_for(results.size(), config.threads, [&](std::size_t r) {
    const std::uint64_t rs = replication_seed(config.seed, static_cast<int>(r));
    Rng rng(derive_seed(rs, 0));
    const Dataset data = simulate_dataset(config.n, config.sigma, rng);
    const std::uint64_t cv_seed = derive_seed(rs, 1);
    for (Estimator est : config.estimators) {
      ReplicationResult rr;
      try {
        const CVResult cv = two_stage_search(data, config.kernel, config.grid, config.folds, cv_seed, est, 1);
        rr.bandwidth.assign(cv.best_h.values().begin(), cv.best_h.values().end());
        rr.cv_score = cv.best_score;
        std::vector<Payload> fitted;
        fitted.reserve(grid_points.size());
        for (const auto& x : grid_points) fitted.push_back(estimate(est, data, x, cv.best_h, config.kernel).estimate);
        rr.ise = integrated_squared_error(space, fitted, regression_fn, config.quad_per_axis);
      } catch (const Error& e) {
        if (!e.is_numerical()) throw;
        rr.excluded = true;
        rr.error = e.what();
      }
      results[r].push_back(std::move(rr));
    }
  });

  SimReport report;
  report.n = config.n;
  report.sigma = config.sigma;
  report.reps = config.reps;
  report.seed = config.seed;
  report.quad_per_axis = config.quad_per_axis;
  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    EstimatorSummary s;
    s.estimator = config.estimators[e];
    double total = 0.0;
    int used = 0;
    for (auto& rep : results) {
      const auto& rr = rep[e];
      if (rr.excluded) {
        ++s.excluded;
      } else {
        total += rr.ise;
        ++used;
      }
      s.replications.push_back(rr);
    }
    s.mise = used > 0 ? total / used : std::numeric_limits<double>::quiet_NaN();
    report.estimators.push_back(std::move(s));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

} // namespace torfrech
