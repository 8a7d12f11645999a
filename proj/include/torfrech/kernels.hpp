#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "torus.hpp"

namespace torfrech {

//! Scalar kernel profiles L : [0, inf) -> [0, inf), applied to
//! (1 - cos dt) / h^2.
enum class KernelFamily { VonMises, Exponential, Uniform };

inline std::string_view to_string(KernelFamily k) {
  switch (k) {
  case KernelFamily::VonMises: return "vonmises";
  case KernelFamily::Exponential: return "exponential";
  case KernelFamily::Uniform: return "uniform";
  }
  return "?";
}

inline KernelFamily parse_kernel(std::string_view name) {
  if (name == "vonmises") return KernelFamily::VonMises;
  if (name == "exponential") return KernelFamily::Exponential;
  if (name == "uniform") return KernelFamily::Uniform;
  fail(ErrorKind::InvalidArgument, "unknown kernel '" + std::string(name) + "' (vonmises|exponential|uniform)");
}

inline double scalar_kernel(KernelFamily k, double r) {
  if (!(r >= 0.0)) {
    fail(ErrorKind::InvalidArgument, "scalar_kernel: argument must be >= 0");
  }
  switch (k) {
  case KernelFamily::VonMises: return std::exp(-r);
  case KernelFamily::Exponential: return std::exp(-std::sqrt(r));
  case KernelFamily::Uniform: return r <= 1.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

//! Strictly positive per-axis bandwidths.
class BandwidthVector {
public:
  BandwidthVector() = default;

  explicit BandwidthVector(std::vector<double> h) : h_(std::move(h)) {
    require(!h_.empty(), "BandwidthVector: at least one component required");
    for (double v : h_) {
      require(std::isfinite(v) && v > 0.0, "BandwidthVector: components must be finite and > 0");
    }
  }

  BandwidthVector(std::initializer_list<double> h) : BandwidthVector(std::vector<double>(h)) {}

  std::size_t dim() const noexcept { return h_.size(); }
  double operator[](std::size_t l) const { return h_[l]; }
  std::span<const double> values() const noexcept { return h_; }

  //! Product of the components.
  double volume() const {
    double p = 1.0;
    for (double v : h_) p *= v;
    return p;
  }

  double norm() const {
    double s = 0.0;
    for (double v : h_) s += v * v;
    return std::sqrt(s);
  }

  friend bool operator==(const BandwidthVector&, const BandwidthVector&) = default;

private:
  std::vector<double> h_;
};

//! Product kernel weight from precomputed per-axis 1 - cos gaps.
inline double toroidal_weight_from_gaps(KernelFamily k, std::span<const double> gaps, const BandwidthVector& h) {
  if (k == KernelFamily::VonMises) {
    double s = 0.0;
    for (std::size_t l = 0; l < gaps.size(); ++l) {
      s += gaps[l] / (h[l] * h[l]);
    }
    return std::exp(-s);
  }
  double w = 1.0;
  for (std::size_t l = 0; l < gaps.size() && w > 0.0; ++l) {
    w *= scalar_kernel(k, gaps[l] / (h[l] * h[l]));
  }
  return w;
}

inline double toroidal_weight(KernelFamily k, const TorusPoint& x, const TorusPoint& z, const BandwidthVector& h) {
  detail::check_dims(x.dim(), h.dim(), "toroidal_weight");
  const auto gaps = cos_gaps(x, z);
  return toroidal_weight_from_gaps(k, gaps, h);
}

//! Numerical integral of  prod_l L^power((1 - cos t_l)/h_l^2) t_l^{j_l}
//! over [-pi, pi)^d by a tensor-product Gauss-Legendre rule. For the uniform
//! kernel each axis is split at the support endpoints so the discontinuity
//! falls on a panel boundary. Oracle tooling; not used by the estimators.
inline double kernel_moment(KernelFamily k, const BandwidthVector& h, std::span<const int> j, int power,
                            int quad_points) {
  require(j.size() == h.dim(), "kernel_moment: multi-index dimension must match bandwidths");
  require(power == 1 || power == 2, "kernel_moment: power must be 1 or 2");
  require(quad_points >= 64, "kernel_moment: at least 64 quadrature points per axis");

  // Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_m.
  constexpr int kNodes = 32;
  static const auto rule = [] {
    std::vector<std::pair<double, double>> r(kNodes);
    for (int i = 0; i < kNodes; ++i) {
      double x = std::cos(kPi * (i + 0.75) / (kNodes + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int m = 2; m <= kNodes; ++m) {
          const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
          p0 = p1;
          p1 = p2;
        }
        dp = kNodes * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      r[i] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
    }
    return r;
  }();

  // Per-axis 1-D integrals; the integrand factorizes.
  double total = 1.0;
  for (std::size_t l = 0; l < h.dim(); ++l) {
    // Breakpoints graded geometrically from the peak at zero out to pi, plus
    // the uniform kernel's support edges, mirrored so odd moments cancel.
    std::vector<double> half_breaks{0.0};
    for (double b = h[l]; b < kPi; b *= 2.0) {
      half_breaks.push_back(b);
    }
    if (k == KernelFamily::Uniform && h[l] * h[l] < 2.0) {
      half_breaks.push_back(std::acos(1.0 - h[l] * h[l]));
    }
    half_breaks.push_back(kPi);
    std::sort(half_breaks.begin(), half_breaks.end());
    half_breaks.erase(std::unique(half_breaks.begin(), half_breaks.end()), half_breaks.end());
    std::vector<double> breaks;
    for (auto it = half_breaks.rbegin(); it != half_breaks.rend(); ++it) {
      if (*it > 0.0) breaks.push_back(-*it);
    }
    breaks.insert(breaks.end(), half_breaks.begin(), half_breaks.end());

    const int panels = std::max(1, quad_points / kNodes);
    double axis = 0.0;
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
      const double lo = breaks[b], hi = breaks[b + 1];
      for (int p = 0; p < panels; ++p) {
        const double a = lo + (hi - lo) * p / panels;
        const double c = lo + (hi - lo) * (p + 1) / panels;
        const double half = 0.5 * (c - a), mid = 0.5 * (c + a);
        for (const auto& [node, weight] : rule) {
          const double t = mid + half * node;
          const double kv = scalar_kernel(k, (1.0 - std::cos(t)) / (h[l] * h[l]));
          axis += weight * half * std::pow(kv, power) * std::pow(t, j[l]);
        }
      }
    }
    total *= axis;
  }
  return total;
}

} // namespace torfrech
