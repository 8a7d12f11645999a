#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "kernels.hpp"
#include "metric.hpp"
#include "torus.hpp"

namespace torfrech {

enum class Estimator { LocalConstant, LocalLinear };

inline std::string_view to_string(Estimator e) { return e == Estimator::LocalConstant ? "lc" : "ll"; }

inline Estimator parse_estimator(std::string_view s) {
  if (s == "lc" || s == "local_constant") return Estimator::LocalConstant;
  if (s == "ll" || s == "local_linear") return Estimator::LocalLinear;
  fail(ErrorKind::InvalidArgument, "unknown estimator '" + std::string(s) + "' (lc|ll)");
}

//! Paired predictors on T^d and responses in a common space.
class Dataset {
public:
  Dataset() = default;

  Dataset(ResponseSpace space, std::vector<TorusPoint> predictors, std::vector<Payload> responses)
    : space_(std::move(space)), predictors_(std::move(predictors)), responses_(std::move(responses)) {
    require(predictors_.size() == responses_.size(), "Dataset: predictor and response counts differ");
    if (predictors_.empty()) {
      fail(ErrorKind::EmptyDataset, "Dataset: no observations");
    }
    const auto d = predictors_.front().dim();
    for (std::size_t i = 0; i < predictors_.size(); ++i) {
      require(predictors_[i].dim() == d, "Dataset: predictor " + std::to_string(i) + " has a different dimension");
      try {
        validate(space_, responses_[i]);
      } catch (const Error& e) {
        fail(ErrorKind::PayloadViolation, "row " + std::to_string(i) + ": " + e.what());
      }
    }
  }

  const ResponseSpace& space() const noexcept { return space_; }
  std::size_t size() const noexcept { return predictors_.size(); }
  std::size_t dim() const noexcept { return predictors_.empty() ? 0 : predictors_.front().dim(); }
  const std::vector<TorusPoint>& predictors() const noexcept { return predictors_; }
  const std::vector<Payload>& responses() const noexcept { return responses_; }

  //! Rows whose index satisfies `keep`.
  template <class Pred>
  Dataset subset(Pred keep) const {
    std::vector<TorusPoint> x;
    std::vector<Payload> y;
    for (std::size_t i = 0; i < size(); ++i) {
      if (keep(i)) {
        x.push_back(predictors_[i]);
        y.push_back(responses_[i]);
      }
    }
    Dataset out;
    out.space_ = space_;
    out.predictors_ = std::move(x);
    out.responses_ = std::move(y);
    return out;
  }

private:
  ResponseSpace space_;
  std::vector<TorusPoint> predictors_;
  std::vector<Payload> responses_;
};

namespace detail {

// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) carry += (sum - t) + v;
    else carry += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

} // namespace detail

//! Chart coordinates and cosine gaps of every observation about a query,
//! row-major n x d. Independent of bandwidth and kernel.
struct LocalGeometry {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> theta;
  std::vector<double> gaps;
};

inline LocalGeometry local_geometry(std::span<const TorusPoint> predictors, const TorusPoint& x) {
  LocalGeometry g;
  g.n = predictors.size();
  g.d = x.dim();
  g.theta.resize(g.n * g.d);
  g.gaps.resize(g.n * g.d);
  for (std::size_t i = 0; i < g.n; ++i) {
    detail::check_dims(x.dim(), predictors[i].dim(), "local_geometry");
    for (std::size_t l = 0; l < g.d; ++l) {
      g.theta[i * g.d + l] = relative_angle(x[l], predictors[i][l]);
      const double s = std::sin(0.5 * (predictors[i][l] - x[l]));
      g.gaps[i * g.d + l] = 2.0 * s * s;
    }
  }
  return g;
}

struct LocalMoments {
  double mu0 = 0.0;
  std::vector<double> mu1;
  //! d x d, row-major.
  std::vector<double> mu2;
  //! mu0 - mu1^T mu2^{-1} mu1; NaN when mu2 is singular.
  double sigma = std::numeric_limits<double>::quiet_NaN();
  //! Ratio of extreme eigenvalues of mu2 (inf when singular).
  double condition_number = std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> theta;
  std::vector<double> kernel_weights;
  //! First row of the inverse augmented moment matrix [[mu0, mu1^T], [mu1, mu2]],
  //! i.e. (1, -mu2^{-1} mu1) / sigma. Empty when mu2 is singular.
  std::vector<double> inverse_row;
};

//! mu2 is declared singular above this condition number.
inline constexpr double kMaxConditionNumber = 1e12;

//! sigma at or below this fraction of mu0 counts as zero.
inline constexpr double kMinRelativeSigma = 1e-12;

namespace detail {

// Solves A g = b for the augmented moment matrix A = n^{-1} sum_i L_i x_i x_i^T,
// x_i = (1, theta_i), through a QR factorization of the row-scaled design
// rather than the explicit Schur complement mu0 - mu1^T mu2^{-1} mu1.
class AugmentedSolver {
public:
  AugmentedSolver(std::span<const double> theta, std::span<const double> L, std::size_t n, std::size_t d)
      : cols_(static_cast<Eigen::Index>(d + 1)) {
    Eigen::MatrixXd B(static_cast<Eigen::Index>(n), cols_);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::sqrt(L[i] * inv_n);
      const auto r = static_cast<Eigen::Index>(i);
      B(r, 0) = s;
      for (std::size_t l = 0; l < d; ++l) B(r, static_cast<Eigen::Index>(l + 1)) = s * theta[i * d + l];
    }
    R_ = Eigen::HouseholderQR<Eigen::MatrixXd>(B).matrixQR().topRows(cols_).triangularView<Eigen::Upper>();
  }

  Eigen::VectorXd solve(Eigen::VectorXd rhs) const {
    R_.transpose().triangularView<Eigen::Lower>().solveInPlace(rhs);
    R_.triangularView<Eigen::Upper>().solveInPlace(rhs);
    return rhs;
  }

  Eigen::VectorXd first_row() const {
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(cols_);
    e1[0] = 1.0;
    return solve(std::move(e1));
  }

private:
  Eigen::Index cols_;
  Eigen::MatrixXd R_;
};

} // namespace detail

inline LocalMoments moments_from_geometry(const LocalGeometry& g, const BandwidthVector& h, KernelFamily k) {
  detail::check_dims(g.d, h.dim(), "local_moments");
  LocalMoments m;
  m.n = g.n;
  m.d = g.d;
  m.theta = g.theta;
  m.kernel_weights.resize(g.n);
  const std::size_t d = g.d;
  detail::CompensatedSum s0;
  std::vector<detail::CompensatedSum> s1(d), s2(d * d);
  for (std::size_t i = 0; i < g.n; ++i) {
    const double w = toroidal_weight_from_gaps(k, std::span(g.gaps).subspan(i * d, d), h);
    m.kernel_weights[i] = w;
    s0.add(w);
    const double* t = g.theta.data() + i * d;
    for (std::size_t a = 0; a < d; ++a) {
      s1[a].add(w * t[a]);
      for (std::size_t b = a; b < d; ++b) s2[a * d + b].add(w * t[a] * t[b]);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(g.n);
  m.mu0 = s0.value() * inv_n;
  m.mu1.resize(d);
  m.mu2.assign(d * d, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    m.mu1[a] = s1[a].value() * inv_n;
    for (std::size_t b = a; b < d; ++b) {
      m.mu2[a * d + b] = m.mu2[b * d + a] = s2[a * d + b].value() * inv_n;
    }
  }

  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mu2(
    m.mu2.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mu2, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (lmin > 0.0) {
    m.condition_number = lmax / lmin;
  }
  if (m.condition_number <= kMaxConditionNumber) {
    const Eigen::VectorXd row = detail::AugmentedSolver(g.theta, m.kernel_weights, g.n, d).first_row();
    m.inverse_row.assign(row.data(), row.data() + row.size());
    m.sigma = 1.0 / m.inverse_row[0];
  }
  return m;
}

inline LocalMoments local_moments(const Dataset& data, const TorusPoint& x, const BandwidthVector& h, KernelFamily k) {
  return moments_from_geometry(local_geometry(data.predictors(), x), h, k);
}

//! Local linear weights  W_i = (L_i / sigma) (1 - mu1^T mu2^{-1} theta_i).
//! They satisfy mean(W) = 1 and mean(W theta) = 0.
inline std::vector<double> local_linear_weights(const LocalMoments& m) {
  if (!(m.condition_number <= kMaxConditionNumber)) {
    fail(ErrorKind::SingularDesign, "second moment matrix is singular (condition number " +
                                      std::to_string(m.condition_number) + ")");
  }
  if (!(m.sigma > kMinRelativeSigma * m.mu0)) {
    fail(ErrorKind::DegenerateVariance, "local variance term is not positive (sigma " + std::to_string(m.sigma) +
                                          ", mu0 " + std::to_string(m.mu0) + ")");
  }
  const std::size_t d = m.d;
  std::vector<double> w(m.n, 0.0);
  auto add_correction = [&](const Eigen::VectorXd& g) {
    for (std::size_t i = 0; i < m.n; ++i) {
      double xg = g[0];
      for (std::size_t l = 0; l < d; ++l) xg += g[static_cast<Eigen::Index>(l + 1)] * m.theta[i * d + l];
      w[i] += m.kernel_weights[i] * xg;
    }
  };
  add_correction(Eigen::Map<const Eigen::VectorXd>(m.inverse_row.data(), static_cast<Eigen::Index>(d + 1)));

  // W_i = L_i x_i^T g cancels heavily when sigma << mu0; restore
  // n^{-1} sum_i W_i x_i = e1 by correcting along the same L_i x_i directions.
  const detail::AugmentedSolver solver(m.theta, m.kernel_weights, m.n, d);
  for (int sweep = 0; sweep < 3; ++sweep) {
    std::vector<detail::CompensatedSum> acc(d + 1);
    for (std::size_t i = 0; i < m.n; ++i) {
      acc[0].add(w[i]);
      for (std::size_t l = 0; l < d; ++l) acc[l + 1].add(w[i] * m.theta[i * d + l]);
    }
    Eigen::VectorXd r(static_cast<Eigen::Index>(d + 1));
    double worst = 0.0;
    for (std::size_t j = 0; j <= d; ++j) {
      r[static_cast<Eigen::Index>(j)] = (j == 0 ? 1.0 : 0.0) - acc[j].value() / static_cast<double>(m.n);
      worst = std::max(worst, std::abs(r[static_cast<Eigen::Index>(j)]));
    }
    if (worst <= 1e-15) break;
    add_correction(solver.solve(std::move(r)));
  }
  return w;
}

struct FitDiagnostics {
  double condition_number = std::numeric_limits<double>::quiet_NaN();
  int solver_iterations = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
};

struct LocalFit {
  Payload estimate;
  //! Local linear W, or kernel weights scaled to mean one.
  std::vector<double> weights;
  TorusPoint query;
  Estimator estimator = Estimator::LocalConstant;
  FitDiagnostics diagnostics;
};

namespace detail {

inline LocalFit finish_fit(const ResponseSpace& space, std::span<const Payload> responses, std::vector<double> weights,
                           const TorusPoint& x, Estimator est, double cond, const MeanOptions& opt) {
  MeanResult r = weighted_frechet_mean(space, responses, weights, opt);
  LocalFit fit;
  fit.estimate = std::move(r.value);
  fit.weights = std::move(weights);
  fit.query = x;
  fit.estimator = est;
  fit.diagnostics = {cond, r.iterations, r.objective, r.gradient_norm};
  return fit;
}

} // namespace detail

inline LocalFit local_constant_from_moments(const ResponseSpace& space, std::span<const Payload> responses,
                                            const LocalMoments& m, const TorusPoint& x, const MeanOptions& opt = {}) {
  if (!(m.mu0 > 0.0)) {
    fail(ErrorKind::EmptyNeighborhood, "all kernel weights are zero at the query");
  }
  std::vector<double> w(m.n);
  for (std::size_t i = 0; i < m.n; ++i) w[i] = m.kernel_weights[i] / m.mu0;
  return detail::finish_fit(space, responses, std::move(w), x, Estimator::LocalConstant, m.condition_number, opt);
}

inline LocalFit local_linear_from_moments(const ResponseSpace& space, std::span<const Payload> responses,
                                          const LocalMoments& m, const TorusPoint& x, const MeanOptions& opt = {}) {
  auto w = local_linear_weights(m);
  return detail::finish_fit(space, responses, std::move(w), x, Estimator::LocalLinear, m.condition_number, opt);
}

//! Minimizer of the kernel-weighted Fréchet functional at x.
inline LocalFit local_constant_estimate(const Dataset& data, const TorusPoint& x, const BandwidthVector& h,
                                        KernelFamily k, const MeanOptions& opt = {}) {
  return local_constant_from_moments(data.space(), data.responses(), local_moments(data, x, h, k), x, opt);
}

//! Minimizer of the local-linear-weighted Fréchet functional at x.
inline LocalFit local_linear_estimate(const Dataset& data, const TorusPoint& x, const BandwidthVector& h,
                                      KernelFamily k, const MeanOptions& opt = {}) {
  return local_linear_from_moments(data.space(), data.responses(), local_moments(data, x, h, k), x, opt);
}

inline LocalFit estimate(Estimator est, const Dataset& data, const TorusPoint& x, const BandwidthVector& h,
                         KernelFamily k, const MeanOptions& opt = {}) {
  return est == Estimator::LocalConstant ? local_constant_estimate(data, x, h, k, opt)
                                         : local_linear_estimate(data, x, h, k, opt);
}

} // namespace torfrech
