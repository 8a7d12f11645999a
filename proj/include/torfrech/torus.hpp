#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace torfrech {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

//! Reduce an angle to the canonical interval [-pi, pi).
inline double canonicalize(double angle) {
  if (!std::isfinite(angle)) {
    fail(ErrorKind::InvalidArgument, "canonicalize: non-finite angle");
  }
  if (angle >= -kPi && angle < kPi) {
    return angle;
  }
  double r = std::fmod(angle + kPi, kTwoPi);
  if (r < 0.0) {
    r += kTwoPi;
  }
  r -= kPi;
  // fmod can land exactly on +pi after the shift back.
  if (r >= kPi) {
    r -= kTwoPi;
  }
  return r;
}

//! A point on the d-torus, stored as d canonical angles.
class TorusPoint {
public:
  TorusPoint() = default;

  explicit TorusPoint(std::vector<double> angles) : angles_(std::move(angles)) {
    require(!angles_.empty(), "TorusPoint: dimension must be >= 1");
    for (double& a : angles_) {
      a = canonicalize(a);
    }
  }

  TorusPoint(std::initializer_list<double> angles) : TorusPoint(std::vector<double>(angles)) {}

  std::size_t dim() const noexcept { return angles_.size(); }
  double operator[](std::size_t l) const { return angles_[l]; }
  std::span<const double> angles() const noexcept { return angles_; }

  friend bool operator==(const TorusPoint&, const TorusPoint&) = default;

private:
  std::vector<double> angles_;
};

//! Angle offsets relative to a base point (the coordinates of the chart).
struct TangentCoords {
  std::vector<double> theta;

  std::size_t dim() const noexcept { return theta.size(); }
  double operator[](std::size_t l) const { return theta[l]; }
};

namespace detail {
inline void check_dims(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    fail(ErrorKind::InvalidArgument,
         std::string(op) + ": dimension mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}
} // namespace detail

//! (cos t_1, sin t_1, ..., cos t_d, sin t_d).
inline std::vector<double> embed(const TorusPoint& p) {
  std::vector<double> out;
  out.reserve(2 * p.dim());
  for (double a : p.angles()) {
    out.push_back(std::cos(a));
    out.push_back(std::sin(a));
  }
  return out;
}

//! Inverse of embed for a 2d vector of (cos, sin) pairs.
inline TorusPoint from_embedded(std::span<const double> xy) {
  require(!xy.empty() && xy.size() % 2 == 0, "from_embedded: expected an even, nonzero length");
  std::vector<double> angles(xy.size() / 2);
  for (std::size_t l = 0; l < angles.size(); ++l) {
    angles[l] = canonicalize(std::atan2(xy[2 * l + 1], xy[2 * l]));
  }
  return TorusPoint(std::move(angles));
}

//! The chart: per circle, x_l cos t_l + (R x_l) sin t_l with R the
//! counterclockwise quarter turn. On angles this is a rotation by t_l, so
//! the result is computed as canonicalize(x_l + t_l).
inline TorusPoint chart(const TorusPoint& x, const TangentCoords& theta) {
  detail::check_dims(x.dim(), theta.dim(), "chart");
  std::vector<double> out(x.dim());
  for (std::size_t l = 0; l < x.dim(); ++l) {
    out[l] = canonicalize(x[l] + theta[l]);
  }
  return TorusPoint(std::move(out));
}

//! Embedded form of the chart, evaluated literally from the tangent-normal
//! decomposition. Used to cross-check chart().
inline std::vector<double> chart_embedded(const TorusPoint& x, const TangentCoords& theta) {
  detail::check_dims(x.dim(), theta.dim(), "chart_embedded");
  const auto e = embed(x);
  std::vector<double> out(e.size());
  for (std::size_t l = 0; l < x.dim(); ++l) {
    const double c = e[2 * l], s = e[2 * l + 1];
    // R (c, s) = (-s, c)
    out[2 * l] = c * std::cos(theta[l]) - s * std::sin(theta[l]);
    out[2 * l + 1] = s * std::cos(theta[l]) + c * std::sin(theta[l]);
  }
  return out;
}

//! Relative angle of `z` seen from `x` on one circle:
//! atan2((R x)^T z, x^T z) = atan2(sin(z - x), cos(z - x)).
inline double relative_angle(double x, double z) {
  const double dz = z - x;
  return canonicalize(std::atan2(std::sin(dz), std::cos(dz)));
}

//! Chart coordinates of z about x, i.e. the theta with chart(x, theta) = z.
inline TangentCoords inverse_chart(const TorusPoint& x, const TorusPoint& z) {
  detail::check_dims(x.dim(), z.dim(), "inverse_chart");
  TangentCoords t{std::vector<double>(x.dim())};
  for (std::size_t l = 0; l < x.dim(); ++l) {
    t.theta[l] = relative_angle(x[l], z[l]);
  }
  return t;
}

//! 1 - cos of the per-circle angle between x and z; each entry in [0, 2].
inline std::vector<double> cos_gaps(const TorusPoint& x, const TorusPoint& z) {
  detail::check_dims(x.dim(), z.dim(), "cos_gaps");
  std::vector<double> g(x.dim());
  for (std::size_t l = 0; l < x.dim(); ++l) {
    // 2 sin^2(dt/2) is accurate near zero where 1 - cos loses digits.
    const double s = std::sin(0.5 * (z[l] - x[l]));
    g[l] = 2.0 * s * s;
  }
  return g;
}

//! The 2d x d frame whose l-th column holds R x_l in rows 2l, 2l+1.
//! Row-major storage.
inline std::vector<double> rotation_frame(const TorusPoint& x) {
  const std::size_t d = x.dim();
  std::vector<double> frame(2 * d * d, 0.0);
  for (std::size_t l = 0; l < d; ++l) {
    frame[(2 * l) * d + l] = -std::sin(x[l]);
    frame[(2 * l + 1) * d + l] = std::cos(x[l]);
  }
  return frame;
}

//! Add a common per-circle offset to a point.
inline TorusPoint shifted(const TorusPoint& x, std::span<const double> delta) {
  detail::check_dims(x.dim(), delta.size(), "shifted");
  std::vector<double> out(x.dim());
  for (std::size_t l = 0; l < x.dim(); ++l) {
    out[l] = x[l] + delta[l];
  }
  return TorusPoint(std::move(out));
}

} // namespace torfrech
