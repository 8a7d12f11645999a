#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <functional>

#include "test_support.hpp"

using namespace torfrech;
using torfrech::testing::random_point;
using torfrech::testing::random_sphere;

namespace {

using Quad = __float128;

struct RefMoments {
  double mu0;
  std::vector<double> mu1, mu2;
};

// Independent recomputation: angles from atan2 of the raw difference, kernel
// as exp(-sum (1 - cos)/h^2), sums accumulated in quad precision.
RefMoments reference_moments(const std::vector<TorusPoint>& pts, const TorusPoint& x, const std::vector<double>& h) {
  const std::size_t d = x.dim(), n = pts.size();
  Quad s0 = 0;
  std::vector<Quad> s1(d, 0), s2(d * d, 0);
  for (const auto& z : pts) {
    std::vector<double> t(d);
    double r = 0.0;
    for (std::size_t l = 0; l < d; ++l) {
      const double diff = z[l] - x[l];
      t[l] = std::atan2(std::sin(diff), std::cos(diff));
      r += (1.0 - std::cos(diff)) / (h[l] * h[l]);
    }
    const Quad L = std::exp(-r);
    s0 += L;
    for (std::size_t a = 0; a < d; ++a) {
      s1[a] += L * t[a];
      for (std::size_t b = 0; b < d; ++b) s2[a * d + b] += L * t[a] * t[b];
    }
  }
  RefMoments m;
  m.mu0 = static_cast<double>(s0 / n);
  for (auto v : s1) m.mu1.push_back(static_cast<double>(v / n));
  for (auto v : s2) m.mu2.push_back(static_cast<double>(v / n));
  return m;
}

// Weighted least squares of y on (1, theta) with kernel weights; returns the
// intercept and the first row of the hat matrix scaled by n.
struct WlsResult {
  double intercept;
  std::vector<double> hat_row;
};

WlsResult normal_equations(const std::vector<std::vector<double>>& theta, const std::vector<double>& L,
                           const std::vector<double>& y) {
  using M = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const auto n = static_cast<Eigen::Index>(theta.size());
  const auto d = static_cast<Eigen::Index>(theta.front().size());
  M X(n, d + 1), W = M::Zero(n, n), Y(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0L;
    for (Eigen::Index l = 0; l < d; ++l) X(i, l + 1) = theta[i][l];
    W(i, i) = L[i];
    Y(i, 0) = y[i];
  }
  const M A = X.transpose() * W * X;
  const M hat = A.fullPivLu().solve(X.transpose() * W);
  const M beta = hat * Y;
  WlsResult r{static_cast<double>(beta(0, 0)), {}};
  for (Eigen::Index i = 0; i < n; ++i) r.hat_row.push_back(static_cast<double>(hat(0, i) * n));
  return r;
}

Dataset scalar_dataset(std::size_t n, std::size_t d, Rng& rng, double spread = kPi) {
  std::vector<TorusPoint> x;
  std::vector<Payload> y;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> a(d);
    for (double& v : a) v = spread * (2.0 * uniform01(rng) - 1.0);
    x.emplace_back(a);
    y.push_back({standard_normal(rng)});
  }
  return Dataset(ResponseSpace::scalar(-10.0, 10.0), std::move(x), std::move(y));
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::InvalidArgument;
}

} // namespace

TEST(Dataset, Validation) {
  const auto s = ResponseSpace::scalar(0, 1);
  EXPECT_EQ(kind_of([&] { Dataset(s, {}, {}); }), ErrorKind::EmptyDataset);
  EXPECT_EQ(kind_of([&] { Dataset(s, {TorusPoint{0.0}}, {}); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([&] { Dataset(s, {TorusPoint{0.0}, TorusPoint{0.0, 1.0}}, {{0.0}, {0.0}}); }),
            ErrorKind::InvalidArgument);
  try {
    Dataset(ResponseSpace::wasserstein(3, 0, 1), {TorusPoint{0.0}, TorusPoint{1.0}}, {{0.1, 0.2, 0.3}, {0.3, 0.2, 0.4}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PayloadViolation);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("nondecreasing"), std::string::npos);
  }
}

TEST(LocalMoments, SingleCenteredPoint) {
  const TorusPoint x{0.4, -1.2};
  const Dataset data(ResponseSpace::scalar(0, 1), {x}, {{0.5}});
  const auto m = local_moments(data, x, BandwidthVector{0.3, 0.3}, KernelFamily::VonMises);
  EXPECT_EQ(m.mu0, 1.0);
  EXPECT_EQ(m.mu1, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(m.mu2, (std::vector<double>(4, 0.0)));
  EXPECT_TRUE(std::isinf(m.condition_number));
  EXPECT_EQ(kind_of([&] { local_linear_weights(m); }), ErrorKind::SingularDesign);
}

TEST(LocalMoments, MatchesQuadPrecisionRecomputation) {
  const std::vector<TorusPoint> pts{{0.1, 0.2}, {-0.4, 0.5}, {2.9, -3.0}, {0.7, -0.1}, {-0.2, -0.6}};
  const TorusPoint x{0.05, -0.1};
  std::vector<Payload> y(5, Payload{0.0});
  const Dataset data(ResponseSpace::scalar(0, 1), pts, y);
  const auto m = local_moments(data, x, BandwidthVector{0.3, 0.3}, KernelFamily::VonMises);
  const auto r = reference_moments(pts, x, {0.3, 0.3});
  EXPECT_NEAR(m.mu0, r.mu0, 1e-15);
  for (std::size_t a = 0; a < 2; ++a) EXPECT_NEAR(m.mu1[a], r.mu1[a], 1e-15);
  for (std::size_t a = 0; a < 4; ++a) EXPECT_NEAR(m.mu2[a], r.mu2[a], 1e-15);
}

TEST(LocalMoments, RandomAgainstRecomputation) {
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const std::size_t d = 1 + i % 3;
    const auto data = scalar_dataset(30, d, rng);
    const auto x = random_point(d, rng);
    std::vector<double> h(d);
    for (double& v : h) v = 0.2 + uniform01(rng);
    const auto m = local_moments(data, x, BandwidthVector(h), KernelFamily::VonMises);
    const auto r = reference_moments(data.predictors(), x, h);
    EXPECT_NEAR(m.mu0, r.mu0, 1e-13 * (1 + r.mu0));
    for (std::size_t a = 0; a < d; ++a) EXPECT_NEAR(m.mu1[a], r.mu1[a], 1e-13);
    for (std::size_t a = 0; a < d * d; ++a) EXPECT_NEAR(m.mu2[a], r.mu2[a], 1e-13);
  }
}

TEST(LocalLinearWeights, SymmetricDesignCollapsesToLocalConstant) {
  const TorusPoint x{0.3};
  const Dataset data(ResponseSpace::scalar(0, 1), {TorusPoint{0.3 - 0.5}, TorusPoint{0.3 + 0.5}}, {{0.0}, {1.0}});
  const auto m = local_moments(data, x, BandwidthVector{0.6}, KernelFamily::VonMises);
  EXPECT_NEAR(m.mu1[0], 0.0, 1e-15);
  const auto w = local_linear_weights(m);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(w[i], m.kernel_weights[i] / m.mu0, 1e-12);
}

TEST(LocalLinearWeights, SixPointNormalEquations) {
  const std::vector<double> angles{-1.1, -0.6, -0.2, 0.15, 0.5, 1.4};
  std::vector<TorusPoint> pts;
  for (double a : angles) pts.push_back(TorusPoint{a});
  const TorusPoint x{0.1};
  const Dataset data(ResponseSpace::scalar(0, 1), pts, std::vector<Payload>(6, Payload{0.0}));
  const auto m = local_moments(data, x, BandwidthVector{0.4}, KernelFamily::VonMises);
  const auto w = local_linear_weights(m);
  std::vector<std::vector<double>> theta;
  std::vector<double> L;
  for (double a : angles) {
    theta.push_back({a - 0.1});
    L.push_back(std::exp(-(1.0 - std::cos(a - 0.1)) / 0.16));
  }
  const auto ref = normal_equations(theta, L, std::vector<double>(6, 0.0));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(w[i], ref.hat_row[i], 1e-10);
}

TEST(LocalLinearWeights, IdentitiesHold) {
  Rng rng(33);
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    const std::size_t d = 1 + i % 2;
    const auto data = scalar_dataset(5 + i % 40, d, rng);
    const auto x = random_point(d, rng);
    std::vector<double> h(d);
    for (double& v : h) v = 0.1 + uniform01(rng);
    const auto m = local_moments(data, x, BandwidthVector(h), KernelFamily::VonMises);
    std::vector<double> w;
    try {
      w = local_linear_weights(m);
    } catch (const Error& e) {
      EXPECT_TRUE(e.is_numerical());
      continue;
    }
    ++checked;
    double s0 = 0.0;
    std::vector<double> s1(d, 0.0);
    for (std::size_t j = 0; j < w.size(); ++j) {
      s0 += w[j];
      for (std::size_t l = 0; l < d; ++l) s1[l] += w[j] * m.theta[j * d + l];
    }
    const double n = static_cast<double>(w.size());
    EXPECT_LE(std::abs(s0 / n - 1.0), 1e-10);
    double nrm = 0.0;
    for (double v : s1) nrm += (v / n) * (v / n);
    EXPECT_LE(std::sqrt(nrm), 1e-10);
  }
  EXPECT_GT(checked, 200);
}

TEST(LocalLinearWeights, DegenerateVariance) {
  LocalMoments m;
  m.n = 2;
  m.d = 1;
  m.mu0 = 1.0;
  m.mu1 = {0.0};
  m.mu2 = {1.0};
  m.sigma = 0.0;
  m.condition_number = 1.0;
  m.theta = {0.0, 0.0};
  m.kernel_weights = {1.0, 1.0};
  EXPECT_EQ(kind_of([&] { local_linear_weights(m); }), ErrorKind::DegenerateVariance);
}

TEST(LocalLinearWeights, TwoSupportPointsOnT2AreDegenerate) {
  // mu2 is invertible but the augmented moment matrix has rank 2
  const Dataset data(ResponseSpace::scalar(0, 1), {TorusPoint{0.1, 0.05}, TorusPoint{-0.05, 0.1}, TorusPoint{2.0, 2.0}},
                     {{0.0}, {1.0}, {0.5}});
  const auto m = local_moments(data, TorusPoint{0.0, 0.0}, BandwidthVector{0.3, 0.3}, KernelFamily::Uniform);
  EXPECT_LT(m.condition_number, 1e3);
  EXPECT_EQ(kind_of([&] { local_linear_weights(m); }), ErrorKind::DegenerateVariance);
}

TEST(LocalConstant, MatchesNadarayaWatson) {
  Rng rng(35);
  for (int i = 0; i < 100; ++i) {
    const auto data = scalar_dataset(25, 2, rng);
    const auto x = random_point(2, rng);
    const std::vector<double> h{0.3 + uniform01(rng), 0.3 + uniform01(rng)};
    const auto fit = local_constant_estimate(data, x, BandwidthVector(h), KernelFamily::VonMises);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < data.size(); ++j) {
      double r = 0.0;
      for (std::size_t l = 0; l < 2; ++l) r += (1.0 - std::cos(data.predictors()[j][l] - x[l])) / (h[l] * h[l]);
      num += std::exp(-r) * data.responses()[j][0];
      den += std::exp(-r);
    }
    EXPECT_NEAR(fit.estimate[0], num / den, 1e-12);
  }
}

TEST(LocalConstant, ConstantResponses) {
  Rng rng(37);
  const Payload y = random_sphere(2, rng);
  std::vector<TorusPoint> x;
  for (int i = 0; i < 15; ++i) x.push_back(random_point(2, rng));
  const Dataset data(ResponseSpace::sphere(2), x, std::vector<Payload>(15, y));
  for (auto est : {Estimator::LocalConstant, Estimator::LocalLinear}) {
    const auto fit = estimate(est, data, random_point(2, rng), BandwidthVector{0.8, 0.8}, KernelFamily::VonMises);
    EXPECT_LE(distance(data.space(), fit.estimate, y), 1e-9);
  }
}

TEST(LocalConstant, EmptyNeighborhood) {
  const Dataset data(ResponseSpace::scalar(0, 1), {TorusPoint{2.0}}, {{0.5}});
  EXPECT_EQ(kind_of([&] { local_constant_estimate(data, TorusPoint{0.0}, BandwidthVector{0.1}, KernelFamily::Uniform); }),
            ErrorKind::EmptyNeighborhood);
}

TEST(LocalConstant, SphereWithinOracleBound) {
  Rng rng(39);
  std::vector<TorusPoint> x;
  std::vector<Payload> y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(random_point(2, rng));
    y.push_back(random_sphere(2, rng));
  }
  const Dataset data(ResponseSpace::sphere(2), x, y);
  const TorusPoint q{0.2, -0.4};
  const auto fit = local_constant_estimate(data, q, BandwidthVector{0.7, 0.7}, KernelFamily::VonMises);
  const auto o = frechet_mean_oracle(data.space(), y, fit.weights, kPi / 180.0);
  EXPECT_LE(std::abs(fit.diagnostics.objective - o.objective), o.resolution_bound);
  EXPECT_LE(fit.diagnostics.objective, o.objective + 1e-12);
}

TEST(LocalLinear, ReproducesAffineData) {
  Rng rng(41);
  for (int i = 0; i < 50; ++i) {
    const TorusPoint x = random_point(2, rng);
    const double a = standard_normal(rng), b1 = standard_normal(rng), b2 = standard_normal(rng);
    std::vector<TorusPoint> pts;
    std::vector<Payload> y;
    for (int j = 0; j < 30; ++j) {
      const double t1 = 2.0 * uniform01(rng) - 1.0, t2 = 2.0 * uniform01(rng) - 1.0;
      pts.push_back(chart(x, TangentCoords{{t1, t2}}));
      y.push_back({a + b1 * t1 + b2 * t2});
    }
    const Dataset data(ResponseSpace::scalar(-100, 100), pts, y);
    const auto fit = local_linear_estimate(data, x, BandwidthVector{0.5, 0.5}, KernelFamily::VonMises);
    EXPECT_NEAR(fit.estimate[0], a, 1e-8);
  }
}

TEST(LocalLinear, MatchesNormalEquations) {
  Rng rng(43);
  for (int i = 0; i < 100; ++i) {
    const auto data = scalar_dataset(10, 2, rng);
    const auto x = random_point(2, rng);
    const BandwidthVector h{0.5, 0.5};
    LocalFit fit;
    try {
      fit = local_linear_estimate(data, x, h, KernelFamily::VonMises);
    } catch (const Error& e) {
      EXPECT_TRUE(e.is_numerical());
      continue;
    }
    std::vector<std::vector<double>> theta;
    std::vector<double> L, y;
    for (std::size_t j = 0; j < data.size(); ++j) {
      const auto t = inverse_chart(x, data.predictors()[j]);
      theta.push_back(t.theta);
      L.push_back(toroidal_weight(KernelFamily::VonMises, x, data.predictors()[j], h));
      y.push_back(data.responses()[j][0]);
    }
    EXPECT_NEAR(fit.estimate[0], normal_equations(theta, L, y).intercept, 1e-8);
  }
}

TEST(LocalFit, ShiftEquivariance) {
  Rng rng(45);
  for (int i = 0; i < 30; ++i) {
    std::vector<TorusPoint> x;
    std::vector<Payload> y;
    for (int j = 0; j < 25; ++j) {
      x.push_back(random_point(2, rng));
      y.push_back(random_sphere(2, rng));
    }
    const std::vector<double> delta{kTwoPi * uniform01(rng), kTwoPi * uniform01(rng)};
    std::vector<TorusPoint> xs;
    for (const auto& p : x) xs.push_back(shifted(p, delta));
    const Dataset a(ResponseSpace::sphere(2), x, y), b(ResponseSpace::sphere(2), xs, y);
    const auto q = random_point(2, rng);
    for (auto est : {Estimator::LocalConstant, Estimator::LocalLinear}) {
      try {
        const auto fa = estimate(est, a, q, BandwidthVector{0.6, 0.6}, KernelFamily::VonMises);
        const auto fb = estimate(est, b, shifted(q, delta), BandwidthVector{0.6, 0.6}, KernelFamily::VonMises);
        for (std::size_t j = 0; j < fa.weights.size(); ++j) EXPECT_NEAR(fa.weights[j], fb.weights[j], 1e-10);
        EXPECT_LE(distance(a.space(), fa.estimate, fb.estimate), 1e-6);
      } catch (const Error& e) {
        EXPECT_TRUE(e.is_numerical());
      }
    }
  }
}

TEST(EstimatorNames, RoundTrip) {
  EXPECT_EQ(parse_estimator("lc"), Estimator::LocalConstant);
  EXPECT_EQ(parse_estimator("local_linear"), Estimator::LocalLinear);
  EXPECT_EQ(parse_estimator(to_string(Estimator::LocalLinear)), Estimator::LocalLinear);
  EXPECT_THROW(parse_estimator("nw"), Error);
}
