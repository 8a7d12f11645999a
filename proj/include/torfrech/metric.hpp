#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "torus.hpp"

namespace torfrech {

//! Real line, with caller-declared bounds used only for the diameter.
struct ScalarSpace {
  double lo = 0.0;
  double hi = 1.0;
};

//! Unit sphere S^p in R^{p+1} with the geodesic distance.
struct SphereSpace {
  int p = 2;
};

//! Distributions on [a, b], represented by quantiles at levels (i - 0.5)/G.
struct WassersteinSpace {
  int grid = 100;
  double a = 0.0;
  double b = 1.0;
};

//! Graph Laplacians on `nodes` vertices with edge weights in [0, cw].
struct GraphLaplacianSpace {
  int nodes = 2;
  double cw = 1.0;
};

//! A response payload is a flat vector; its length and invariants are set by
//! the space (scalar: 1, sphere: p+1, Wasserstein: G, Laplacian: k*k row-major).
using Payload = std::vector<double>;

class ResponseSpace {
public:
  using Kind = std::variant<ScalarSpace, SphereSpace, WassersteinSpace, GraphLaplacianSpace>;

  ResponseSpace() : kind_(ScalarSpace{}) {}

  static ResponseSpace scalar(double lo, double hi) {
    require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "scalar space: need finite lo < hi");
    return ResponseSpace(ScalarSpace{lo, hi});
  }
  static ResponseSpace sphere(int p) {
    require(p >= 1, "sphere space: p must be >= 1");
    return ResponseSpace(SphereSpace{p});
  }
  static ResponseSpace wasserstein(int grid, double a, double b) {
    require(grid >= 2, "wasserstein space: grid must be >= 2");
    require(std::isfinite(a) && std::isfinite(b) && a < b, "wasserstein space: need finite a < b");
    return ResponseSpace(WassersteinSpace{grid, a, b});
  }
  static ResponseSpace graph_laplacian(int nodes, double cw) {
    require(nodes >= 2, "graph laplacian space: nodes must be >= 2");
    require(std::isfinite(cw) && cw > 0.0, "graph laplacian space: cw must be > 0");
    return ResponseSpace(GraphLaplacianSpace{nodes, cw});
  }

  const Kind& kind() const noexcept { return kind_; }

  template <class T>
  bool is() const noexcept {
    return std::holds_alternative<T>(kind_);
  }
  template <class T>
  const T& as() const {
    return std::get<T>(kind_);
  }

  std::string name() const {
    return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ScalarSpace>) return "scalar";
        else if constexpr (std::is_same_v<T, SphereSpace>) return "sphere";
        else if constexpr (std::is_same_v<T, WassersteinSpace>) return "wasserstein";
        else return "graph_laplacian";
      },
      kind_);
  }

  std::size_t payload_size() const {
    return std::visit(
      [](const auto& s) -> std::size_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ScalarSpace>) return 1;
        else if constexpr (std::is_same_v<T, SphereSpace>) return static_cast<std::size_t>(s.p) + 1;
        else if constexpr (std::is_same_v<T, WassersteinSpace>) return static_cast<std::size_t>(s.grid);
        else return static_cast<std::size_t>(s.nodes) * static_cast<std::size_t>(s.nodes);
      },
      kind_);
  }

  //! Upper bound on the distance between any two payloads.
  double diameter() const {
    return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ScalarSpace>) return s.hi - s.lo;
        else if constexpr (std::is_same_v<T, SphereSpace>) return kPi;
        else if constexpr (std::is_same_v<T, WassersteinSpace>) return s.b - s.a;
        else return s.cw * s.nodes * std::sqrt(static_cast<double>(s.nodes - 1));
      },
      kind_);
  }

  friend bool operator==(const ResponseSpace& a, const ResponseSpace& b) {
    if (a.kind_.index() != b.kind_.index()) return false;
    return std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        const auto& o = std::get<T>(b.kind_);
        if constexpr (std::is_same_v<T, ScalarSpace>) return s.lo == o.lo && s.hi == o.hi;
        else if constexpr (std::is_same_v<T, SphereSpace>) return s.p == o.p;
        else if constexpr (std::is_same_v<T, WassersteinSpace>) return s.grid == o.grid && s.a == o.a && s.b == o.b;
        else return s.nodes == o.nodes && s.cw == o.cw;
      },
      a.kind_);
  }

private:
  explicit ResponseSpace(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

namespace detail {

[[noreturn]] inline void payload_violation(const std::string& what) { fail(ErrorKind::PayloadViolation, what); }

inline double sphere_distance(std::span<const double> u, std::span<const double> v) {
  // Chord-based forms stay accurate near 0 and near pi, where acos of the
  // inner product loses half its digits.
  double diff = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    diff += (u[i] - v[i]) * (u[i] - v[i]);
    sum += (u[i] + v[i]) * (u[i] + v[i]);
  }
  if (diff <= sum) {
    return 2.0 * std::asin(std::min(1.0, 0.5 * std::sqrt(diff)));
  }
  return kPi - 2.0 * std::asin(std::min(1.0, 0.5 * std::sqrt(sum)));
}

inline double sq_euclid(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double e = u[i] - v[i];
    s += e * e;
  }
  return s;
}

} // namespace detail

//! Check a payload against the space's invariants; throws PayloadViolation
//! naming the broken invariant.
inline void validate(const ResponseSpace& space, std::span<const double> y) {
  if (y.size() != space.payload_size()) {
    detail::payload_violation(space.name() + " payload must have " + std::to_string(space.payload_size()) +
                              " entries, got " + std::to_string(y.size()));
  }
  for (double v : y) {
    if (!std::isfinite(v)) detail::payload_violation(space.name() + " payload has a non-finite entry");
  }
  std::visit(
    [&](const auto& s) {
      using T = std::decay_t<decltype(s)>;
      if constexpr (std::is_same_v<T, SphereSpace>) {
        double n2 = 0.0;
        for (double v : y) n2 += v * v;
        if (std::abs(std::sqrt(n2) - 1.0) > 1e-10) {
          detail::payload_violation("sphere payload must have unit norm (|norm - 1| <= 1e-10)");
        }
      } else if constexpr (std::is_same_v<T, WassersteinSpace>) {
        for (std::size_t i = 0; i < y.size(); ++i) {
          if (y[i] < s.a || y[i] > s.b) {
            detail::payload_violation("wasserstein quantiles must lie in [a, b]");
          }
          if (i > 0 && y[i] < y[i - 1]) {
            detail::payload_violation("wasserstein quantiles must be nondecreasing");
          }
        }
      } else if constexpr (std::is_same_v<T, GraphLaplacianSpace>) {
        const auto k = static_cast<std::size_t>(s.nodes);
        for (std::size_t i = 0; i < k; ++i) {
          double row = 0.0;
          for (std::size_t j = 0; j < k; ++j) {
            const double v = y[i * k + j];
            row += v;
            if (j != i) {
              if (v != y[j * k + i]) detail::payload_violation("graph laplacian must be symmetric");
              if (v > 0.0 || v < -s.cw) {
                detail::payload_violation("graph laplacian off-diagonals must lie in [-cw, 0]");
              }
            }
          }
          if (std::abs(row) > 1e-9) detail::payload_violation("graph laplacian rows must sum to zero (1e-9)");
        }
      }
    },
    space.kind());
}

inline bool is_valid(const ResponseSpace& space, std::span<const double> y) {
  try {
    validate(space, y);
    return true;
  } catch (const Error&) {
    return false;
  }
}

//! Distance without payload validation; for inner loops over validated data.
inline double distance_unchecked(const ResponseSpace& space, std::span<const double> y1, std::span<const double> y2) {
  return std::visit(
    [&](const auto& s) -> double {
      using T = std::decay_t<decltype(s)>;
      if constexpr (std::is_same_v<T, ScalarSpace>) return std::abs(y1[0] - y2[0]);
      else if constexpr (std::is_same_v<T, SphereSpace>) return detail::sphere_distance(y1, y2);
      else if constexpr (std::is_same_v<T, WassersteinSpace>)
        return std::sqrt(detail::sq_euclid(y1, y2) / static_cast<double>(s.grid));
      else return std::sqrt(detail::sq_euclid(y1, y2));
    },
    space.kind());
}

inline double distance(const ResponseSpace& space, std::span<const double> y1, std::span<const double> y2) {
  validate(space, y1);
  validate(space, y2);
  return distance_unchecked(space, y1, y2);
}

//! Weighted Fréchet functional  sum_i w_i d^2(points_i, y).
inline double frechet_objective(const ResponseSpace& space, std::span<const Payload> points,
                                std::span<const double> weights, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const double d = distance_unchecked(space, points[i], y);
    s += weights[i] * d * d;
  }
  return s;
}

//! Euclidean projection onto nondecreasing sequences (pool adjacent violators).
inline std::vector<double> isotonic_projection(std::span<const double> values) {
  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (double v : values) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      const Block last = blocks.back();
      blocks.pop_back();
      blocks.back().sum += last.sum;
      blocks.back().count += last.count;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) {
    out.insert(out.end(), b.count, b.mean());
  }
  return out;
}

struct MeanOptions {
  //! Seed for the sphere solver's random restarts. Each call owns its generator.
  std::uint64_t seed = 0x7f4a7c15u;
  int restarts = 3;
  //! 0 selects the per-space default (sphere 500, Laplacian 2000).
  int max_iterations = 0;
  double tolerance = 1e-10;
  //! Optional m*m row-major table of squared distances between the sample
  //! points; speeds up the sphere solver's choice of starting point.
  std::span<const double> pairwise_sq = {};
};

struct MeanResult {
  Payload value;
  double objective = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
};

namespace detail {

inline double checked_weight_total(std::span<const Payload> points, std::span<const double> weights) {
  require(!points.empty(), "weighted_frechet_mean: no points");
  require(points.size() == weights.size(), "weighted_frechet_mean: points and weights differ in length");
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w), "weighted_frechet_mean: non-finite weight");
    total += w;
  }
  if (!(total > 0.0)) {
    fail(ErrorKind::DegenerateWeights, "weights must have a positive sum");
  }
  return total;
}

inline std::vector<double> weighted_average(std::span<const Payload> points, std::span<const double> w) {
  std::vector<double> avg(points.front().size(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (w[i] == 0.0) continue;
    for (std::size_t c = 0; c < avg.size(); ++c) avg[c] += w[i] * points[i][c];
  }
  return avg;
}

inline void normalize_in_place(std::vector<double>& v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
}

struct SphereRun {
  Payload y;
  double objective;
  int iterations;
  double gradient_norm;
  bool converged;
};

//! Riemannian gradient of sum_i w_i d^2(Y_i, y):  -2 sum_i w_i log_y(Y_i).
inline double sphere_gradient(std::span<const Payload> pts, std::span<const double> w, const Payload& y,
                              std::vector<double>& grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const std::size_t dim = y.size();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (w[i] == 0.0) continue;
    const auto& p = pts[i];
    double c = 0.0;
    for (std::size_t k = 0; k < dim; ++k) c += y[k] * p[k];
    c = std::clamp(c, -1.0, 1.0);
    double s2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double v = p[k] - c * y[k];
      s2 += v * v;
    }
    const double s = std::sqrt(s2);
    if (s < 1e-15) continue; // coincident or antipodal: no usable direction
    const double theta = sphere_distance(y, p);
    const double scale = -2.0 * w[i] * theta / s;
    for (std::size_t k = 0; k < dim; ++k) grad[k] += scale * (p[k] - c * y[k]);
  }
  double g2 = 0.0;
  for (double g : grad) g2 += g * g;
  return std::sqrt(g2);
}

inline SphereRun sphere_descent(const ResponseSpace& space, std::span<const Payload> pts, std::span<const double> w,
                                Payload y, int max_iter, double tol) {
  std::vector<double> grad(y.size());
  Payload trial(y.size());
  double f = frechet_objective(space, pts, w, y);
  double gnorm = sphere_gradient(pts, w, y, grad);
  int it = 0;
  for (; it < max_iter; ++it) {
    if (gnorm < 1e-14) return {y, f, it, gnorm, true};
    // Armijo backtracking; step 1/2 is the Newton step for nonnegative
    // normalized weights near the minimizer.
    double eta = 0.5;
    double f_trial = f;
    bool accepted = false;
    while (eta > 1e-12) {
      for (std::size_t k = 0; k < y.size(); ++k) trial[k] = y[k] - eta * grad[k];
      normalize_in_place(trial);
      f_trial = frechet_objective(space, pts, w, trial);
      if (f_trial <= f - 1e-4 * eta * gnorm * gnorm) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      // No descent available at working precision.
      return {y, f, it, gnorm, true};
    }
    const double decrease = f - f_trial;
    y.swap(trial);
    f = f_trial;
    gnorm = sphere_gradient(pts, w, y, grad);
    if (decrease < tol) {
      return {y, f, it + 1, gnorm, true};
    }
  }
  return {y, f, it, gnorm, false};
}

inline MeanResult sphere_mean(const ResponseSpace& space, std::span<const Payload> pts, std::span<const double> w,
                              const MeanOptions& opt) {
  const std::size_t m = pts.size();
  // Starting point: the sample point with the smallest objective.
  std::size_t best_i = 0;
  double best_f = std::numeric_limits<double>::infinity();
  const bool have_table = opt.pairwise_sq.size() == m * m;
  for (std::size_t j = 0; j < m; ++j) {
    double f = 0.0;
    if (have_table) {
      const double* row = opt.pairwise_sq.data() + j * m;
      for (std::size_t i = 0; i < m; ++i) f += w[i] * row[i];
    } else {
      f = frechet_objective(space, pts, w, pts[j]);
    }
    if (f < best_f) {
      best_f = f;
      best_i = j;
    }
  }
  const int max_iter = opt.max_iterations > 0 ? opt.max_iterations : 500;
  SphereRun best = sphere_descent(space, pts, w, pts[best_i], max_iter, opt.tolerance);
  int total_iter = best.iterations;

  Rng rng(opt.seed);
  for (int r = 0; r < opt.restarts; ++r) {
    Payload start(pts.front().size());
    for (double& v : start) v = standard_normal(rng);
    normalize_in_place(start);
    SphereRun run = sphere_descent(space, pts, w, std::move(start), max_iter, opt.tolerance);
    total_iter += run.iterations;
    if (run.objective < best.objective) best = std::move(run);
  }
  if (!best.converged) {
    throw ConvergenceError("sphere Fréchet mean did not converge in " + std::to_string(max_iter) + " iterations",
                           best.y, best.objective);
  }
  return {std::move(best.y), best.objective, total_iter, best.gradient_norm};
}

inline MeanResult wasserstein_mean(const ResponseSpace& space, std::span<const Payload> pts,
                                   std::span<const double> w) {
  const auto& s = space.as<WassersteinSpace>();
  auto q = isotonic_projection(weighted_average(pts, w));
  for (double& v : q) v = std::clamp(v, s.a, s.b);
  const double f = frechet_objective(space, pts, w, q);
  return {std::move(q), f, 0, 0.0};
}

// Candidates are parametrized by the upper-triangle edge weights; the
// diagonal is induced as row sums.
inline Payload laplacian_from_weights(std::size_t k, std::span<const double> wts) {
  Payload L(k * k, 0.0);
  std::size_t e = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j, ++e) {
      L[i * k + j] = -wts[e];
      L[j * k + i] = -wts[e];
      L[i * k + i] += wts[e];
      L[j * k + j] += wts[e];
    }
  }
  return L;
}

inline MeanResult laplacian_mean(const ResponseSpace& space, std::span<const Payload> pts, std::span<const double> w,
                                 const MeanOptions& opt) {
  const auto& s = space.as<GraphLaplacianSpace>();
  const auto k = static_cast<std::size_t>(s.nodes);
  const std::size_t edges = k * (k - 1) / 2;
  const auto avg = weighted_average(pts, w); // normalized weights: the target matrix

  std::vector<double> target_off(edges), target_deg(k);
  std::vector<std::pair<std::size_t, std::size_t>> ends(edges);
  for (std::size_t i = 0, e = 0; i < k; ++i) {
    target_deg[i] = avg[i * k + i];
    for (std::size_t j = i + 1; j < k; ++j, ++e) {
      target_off[e] = -0.5 * (avg[i * k + j] + avg[j * k + i]);
      ends[e] = {i, j};
    }
  }
  std::vector<double> wt(edges);
  for (std::size_t e = 0; e < edges; ++e) wt[e] = std::clamp(target_off[e], 0.0, s.cw);

  // The normalized objective is ||L(w) - avg||_F^2 up to a constant; its
  // Hessian is 4I + 2 B^T B with ||B^T B|| = 2k - 2, so 1/(4k) is a safe step.
  const double step = 1.0 / (4.0 * static_cast<double>(k));
  const int max_iter = opt.max_iterations > 0 ? opt.max_iterations : 2000;
  std::vector<double> deg(k), grad(edges);
  double last_change = 0.0;
  int it = 0;
  bool converged = false;
  for (; it < max_iter; ++it) {
    std::fill(deg.begin(), deg.end(), 0.0);
    for (std::size_t e = 0; e < edges; ++e) {
      deg[ends[e].first] += wt[e];
      deg[ends[e].second] += wt[e];
    }
    last_change = 0.0;
    for (std::size_t e = 0; e < edges; ++e) {
      const auto [i, j] = ends[e];
      grad[e] = 4.0 * (wt[e] - target_off[e]) + 2.0 * (deg[i] - target_deg[i]) + 2.0 * (deg[j] - target_deg[j]);
    }
    for (std::size_t e = 0; e < edges; ++e) {
      const double next = std::clamp(wt[e] - step * grad[e], 0.0, s.cw);
      last_change = std::max(last_change, std::abs(next - wt[e]));
      wt[e] = next;
    }
    if (last_change <= opt.tolerance) {
      converged = true;
      ++it;
      break;
    }
  }
  Payload L = laplacian_from_weights(k, wt);
  const double f = frechet_objective(space, pts, w, L);
  if (!converged) {
    throw ConvergenceError("graph Laplacian Fréchet mean did not converge in " + std::to_string(max_iter) +
                             " iterations",
                           L, f);
  }
  return {std::move(L), f, it, last_change / step};
}

} // namespace detail

//! Minimizer of sum_i w_i d^2(points_i, y) over the space. Weights may be
//! negative as long as their sum is positive; the minimizer is invariant to
//! positive rescaling, so the solvers work with normalized weights. The
//! reported objective uses the weights as given.
inline MeanResult weighted_frechet_mean(const ResponseSpace& space, std::span<const Payload> points,
                                        std::span<const double> weights, const MeanOptions& opt = {}) {
  const double total = detail::checked_weight_total(points, weights);
  std::vector<double> w(weights.begin(), weights.end());
  for (double& v : w) v /= total;

  MeanResult r = std::visit(
    [&](const auto& s) -> MeanResult {
      using T = std::decay_t<decltype(s)>;
      if constexpr (std::is_same_v<T, ScalarSpace>) {
        double acc = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) acc += w[i] * points[i][0];
        return {Payload{acc}, 0.0, 0, 0.0};
      } else if constexpr (std::is_same_v<T, SphereSpace>) {
        return detail::sphere_mean(space, points, w, opt);
      } else if constexpr (std::is_same_v<T, WassersteinSpace>) {
        return detail::wasserstein_mean(space, points, w);
      } else {
        return detail::laplacian_mean(space, points, w, opt);
      }
    },
    space.kind());
  r.objective = frechet_objective(space, points, weights, r.value);
  return r;
}

struct OracleResult {
  Payload value;
  double objective = 0.0;
  //! Bound on objective(grid optimum) - objective(true optimum) implied by
  //! the grid's covering radius.
  double resolution_bound = 0.0;
};

//! Exhaustive grid minimization of the weighted Fréchet functional. Supported
//! for Scalar (resolution = step), Sphere(2) (resolution = angular step in
//! radians, latitude-longitude grid) and GraphLaplacian with k <= 3
//! (resolution = step on each edge weight).
inline OracleResult frechet_mean_oracle(const ResponseSpace& space, std::span<const Payload> points,
                                        std::span<const double> weights, double resolution) {
  require(points.size() == weights.size() && !points.empty(), "frechet_mean_oracle: bad inputs");
  require(resolution > 0.0, "frechet_mean_oracle: resolution must be > 0");
  double abs_w = 0.0;
  for (double w : weights) abs_w += std::abs(w);

  OracleResult best;
  best.objective = std::numeric_limits<double>::infinity();
  auto consider = [&](const Payload& y) {
    const double f = frechet_objective(space, points, weights, y);
    if (f < best.objective) {
      best.objective = f;
      best.value = y;
    }
  };
  // |d^2(a, y) - d^2(a, y*)| <= 2 D d(y, y*) for distances bounded by D.
  auto lipschitz_bound = [&](double diam, double cover) { return 2.0 * diam * abs_w * cover; };

  if (space.is<ScalarSpace>()) {
    const auto& s = space.as<ScalarSpace>();
    double lo = s.lo, hi = s.hi;
    for (const auto& p : points) {
      lo = std::min(lo, p[0]);
      hi = std::max(hi, p[0]);
    }
    const auto steps = static_cast<std::size_t>(std::ceil((hi - lo) / resolution));
    for (std::size_t i = 0; i <= steps; ++i) consider(Payload{std::min(hi, lo + resolution * i)});
    best.resolution_bound = lipschitz_bound(hi - lo, 0.5 * resolution);
    return best;
  }
  if (space.is<SphereSpace>() && space.as<SphereSpace>().p == 2) {
    const auto n_polar = static_cast<int>(std::ceil(kPi / resolution));
    const auto n_azim = static_cast<int>(std::ceil(kTwoPi / resolution));
    for (int a = 0; a <= n_polar; ++a) {
      const double polar = std::min(kPi, a * resolution);
      const int count = (a == 0 || polar == kPi) ? 1 : n_azim;
      for (int b = 0; b < count; ++b) {
        const double az = b * kTwoPi / n_azim;
        consider(Payload{std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), std::cos(polar)});
      }
    }
    // Any point is within half a cell diagonal of a grid vertex.
    best.resolution_bound = lipschitz_bound(kPi, resolution * std::sqrt(0.5));
    return best;
  }
  if (space.is<GraphLaplacianSpace>() && space.as<GraphLaplacianSpace>().nodes <= 3) {
    const auto& s = space.as<GraphLaplacianSpace>();
    const auto k = static_cast<std::size_t>(s.nodes);
    const std::size_t edges = k * (k - 1) / 2;
    const auto steps = static_cast<std::size_t>(std::llround(std::ceil(s.cw / resolution - 1e-9)));
    std::vector<std::size_t> idx(edges, 0);
    std::vector<double> wts(edges);
    while (true) {
      for (std::size_t e = 0; e < edges; ++e) wts[e] = std::min(s.cw, resolution * static_cast<double>(idx[e]));
      consider(detail::laplacian_from_weights(k, wts));
      std::size_t e = 0;
      while (e < edges && ++idx[e] > steps) idx[e++] = 0;
      if (e == edges) break;
    }
    // Moving every edge weight by <= res/2 moves L by at most
    // (res/2) sqrt(2 E + k (k-1)^2) in Frobenius norm.
    const double cover = 0.5 * resolution * std::sqrt(2.0 * edges + k * (k - 1.0) * (k - 1.0));
    best.resolution_bound = lipschitz_bound(space.diameter(), cover);
    return best;
  }
  fail(ErrorKind::UnsupportedOracle, "frechet_mean_oracle supports scalar, sphere(2) and graph_laplacian(k<=3) only");
}

} // namespace torfrech
