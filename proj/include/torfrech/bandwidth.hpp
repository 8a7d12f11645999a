#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "error.hpp"
#include "frechet.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace torfrech {

//! Two-stage grid: a full tensor grid, then a (2*halfwidth+1)^d refinement
//! around the stage-1 winner with spacing `stage2_fraction` times the
//! stage-1 spacing.
struct GridSpec {
  std::vector<std::vector<double>> stage1;
  double stage2_fraction = 0.25;
  int stage2_halfwidth = 2;
};

inline constexpr double kMinStage2Bandwidth = 1e-4;

//! {0.1 k : k = 1..10}^d, tuned for the von Mises kernel.
inline GridSpec default_grid(std::size_t d) {
  std::vector<double> axis;
  for (int k = 1; k <= 10; ++k) axis.push_back(0.1 * k);
  return GridSpec{std::vector<std::vector<double>>(d, axis), 0.25, 2};
}

inline void validate_grid(const GridSpec& g) {
  require(!g.stage1.empty(), "grid: no axes");
  for (const auto& axis : g.stage1) {
    require(!axis.empty(), "grid: empty axis");
    for (double v : axis) require(std::isfinite(v) && v > 0.0, "grid: candidates must be finite and > 0");
  }
  require(g.stage2_fraction > 0.0, "grid: stage2_fraction must be > 0");
  require(g.stage2_halfwidth >= 0, "grid: stage2_halfwidth must be >= 0");
}

//! Seeded permutation of 0..n-1 cut into k contiguous blocks; the first
//! n mod k blocks get one extra element.
inline std::vector<int> kfold_split(std::size_t n, int k, std::uint64_t seed) {
  require(k >= 2, "kfold_split: need k >= 2");
  require(static_cast<std::size_t>(k) <= n, "kfold_split: k exceeds n");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[uniform_below(rng, i)]);
  }
  std::vector<int> folds(n);
  const std::size_t base = n / static_cast<std::size_t>(k), extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t c = 0; c < size; ++c) folds[perm[pos++]] = static_cast<int>(f);
  }
  return folds;
}

//! Held-out prediction, or nothing when the fit failed numerically.
using CvPrediction = std::optional<Payload>;

//! Per-fold training data and held-out geometry, built once and reused for
//! every bandwidth candidate.
class CvContext {
public:
  CvContext(const Dataset& data, std::vector<int> folds) : data_(&data), folds_(std::move(folds)) {
    require(folds_.size() == data.size(), "cv: fold assignment length differs from dataset size");
    int k = 0;
    for (int f : folds_) {
      require(f >= 0, "cv: negative fold id");
      k = std::max(k, f + 1);
    }
    const bool sphere = data.space().is<SphereSpace>();
    parts_.resize(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) {
      Part& p = parts_[static_cast<std::size_t>(f)];
      std::vector<TorusPoint> train_x;
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (folds_[i] == f) {
          p.held_out.push_back(i);
        } else {
          train_x.push_back(data.predictors()[i]);
          p.train_y.push_back(data.responses()[i]);
        }
      }
      for (std::size_t i : p.held_out) p.geometry.push_back(local_geometry(train_x, data.predictors()[i]));
      if (sphere) {
        const std::size_t m = p.train_y.size();
        p.pairwise_sq.resize(m * m);
        for (std::size_t a = 0; a < m; ++a) {
          for (std::size_t b = a; b < m; ++b) {
            const double dd = distance_unchecked(data.space(), p.train_y[a], p.train_y[b]);
            p.pairwise_sq[a * m + b] = p.pairwise_sq[b * m + a] = dd * dd;
          }
        }
      }
    }
  }

  const Dataset& data() const { return *data_; }
  const std::vector<int>& folds() const { return folds_; }

  //! Held-out predictions for every row at bandwidth h.
  std::vector<CvPrediction> predictions(const BandwidthVector& h, KernelFamily k, Estimator est,
                                        MeanOptions opt = {}) const {
    std::vector<CvPrediction> out(data_->size());
    for (const Part& p : parts_) {
      if (p.train_y.empty()) continue;
      opt.pairwise_sq = p.pairwise_sq;
      for (std::size_t c = 0; c < p.held_out.size(); ++c) {
        const std::size_t i = p.held_out[c];
        try {
          const auto m = moments_from_geometry(p.geometry[c], h, k);
          const auto& x = data_->predictors()[i];
          LocalFit fit = est == Estimator::LocalConstant ? local_constant_from_moments(data_->space(), p.train_y, m, x, opt)
                                                         : local_linear_from_moments(data_->space(), p.train_y, m, x, opt);
          out[i] = std::move(fit.estimate);
        } catch (const Error& e) {
          if (!e.is_numerical()) throw;
        }
      }
    }
    return out;
  }

  //! Mean held-out squared distance; failed fits cost the squared diameter.
  //! Infinity when every fit fails.
  double score(const BandwidthVector& h, KernelFamily k, Estimator est, const MeanOptions& opt = {}) const {
    const auto preds = predictions(h, k, est, opt);
    const double penalty = data_->space().diameter() * data_->space().diameter();
    double total = 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i]) {
        const double d = distance_unchecked(data_->space(), *preds[i], data_->responses()[i]);
        total += d * d;
        ++ok;
      } else {
        total += penalty;
      }
    }
    if (ok == 0) return std::numeric_limits<double>::infinity();
    return total / static_cast<double>(preds.size());
  }

private:
  struct Part {
    std::vector<std::size_t> held_out;
    std::vector<Payload> train_y;
    std::vector<LocalGeometry> geometry;
    std::vector<double> pairwise_sq;
  };

  const Dataset* data_;
  std::vector<int> folds_;
  std::vector<Part> parts_;
};

inline double cv_score(const Dataset& data, const BandwidthVector& h, KernelFamily k, const std::vector<int>& folds,
                       Estimator est) {
  return CvContext(data, folds).score(h, k, est);
}

struct CvEntry {
  std::vector<double> h;
  double score = 0.0;
  //! Stage-2 candidate that coincides with a stage-1 point; score copied.
  bool reused = false;
};

struct CVResult {
  BandwidthVector best_h;
  double best_score = 0.0;
  std::vector<CvEntry> stage1;
  std::vector<CvEntry> stage2;
  std::vector<int> folds;
  std::uint64_t seed = 0;
};

namespace detail {

//! Strict weak order for picking the winner: score, then norm, then lexicographic.
inline bool better_candidate(const CvEntry& a, const CvEntry& b) {
  if (a.score != b.score) return a.score < b.score;
  double na = 0.0, nb = 0.0;
  for (double v : a.h) na += v * v;
  for (double v : b.h) nb += v * v;
  if (na != nb) return na < nb;
  return a.h < b.h;
}

inline bool same_bandwidth(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (std::abs(a[l] - b[l]) > 1e-9 * std::max(1.0, std::abs(a[l]))) return false;
  }
  return true;
}

inline std::vector<std::vector<double>> tensor_grid(const std::vector<std::vector<double>>& axes) {
  std::vector<std::vector<double>> out{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out) {
      for (double v : axis) {
        auto p = prefix;
        p.push_back(v);
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  return out;
}

inline double axis_spacing(const std::vector<double>& axis) {
  if (axis.size() < 2) return 0.0;
  const auto [lo, hi] = std::minmax_element(axis.begin(), axis.end());
  return (*hi - *lo) / static_cast<double>(axis.size() - 1);
}

} // namespace detail

//! Two-stage grid search with k-fold CV. One fold assignment (from `seed`)
//! is shared by every candidate; candidates are scored in canonical order,
//! so the result does not depend on `threads`.
inline CVResult two_stage_search(const Dataset& data, KernelFamily kernel, const GridSpec& grid, int k,
                                 std::uint64_t seed, Estimator est, unsigned threads = 1) {
  validate_grid(grid);
  require(grid.stage1.size() == data.dim(), "two_stage_search: grid dimension differs from predictor dimension");
  CVResult res;
  res.seed = seed;
  res.folds = kfold_split(data.size(), k, seed);
  const CvContext ctx(data, res.folds);

  auto score_all = [&](std::vector<CvEntry>& entries) {
    parallel_for(entries.size(), threads, [&](std::size_t i) {
      if (!entries[i].reused) entries[i].score = ctx.score(BandwidthVector(entries[i].h), kernel, est);
    });
  };

  for (auto& h : detail::tensor_grid(grid.stage1)) res.stage1.push_back({std::move(h), 0.0, false});
  score_all(res.stage1);
  const CvEntry* winner1 = &res.stage1.front();
  for (const auto& e : res.stage1) {
    if (detail::better_candidate(e, *winner1)) winner1 = &e;
  }

  std::vector<std::vector<double>> axes(data.dim());
  for (std::size_t l = 0; l < data.dim(); ++l) {
    const double step = grid.stage2_fraction * detail::axis_spacing(grid.stage1[l]);
    for (int j = -grid.stage2_halfwidth; j <= grid.stage2_halfwidth; ++j) {
      const double v = std::max(kMinStage2Bandwidth, winner1->h[l] + j * step);
      if (std::none_of(axes[l].begin(), axes[l].end(), [&](double u) { return std::abs(u - v) <= 1e-12; })) {
        axes[l].push_back(v);
      }
    }
  }
  for (auto& h : detail::tensor_grid(axes)) {
    CvEntry e{std::move(h), 0.0, false};
    for (const auto& s1 : res.stage1) {
      if (detail::same_bandwidth(e.h, s1.h)) {
        e.score = s1.score;
        e.reused = true;
        break;
      }
    }
    res.stage2.push_back(std::move(e));
  }
  score_all(res.stage2);

  CvEntry best = *winner1;
  for (const auto& e : res.stage2) {
    if (detail::better_candidate(e, best)) best = e;
  }
  if (!std::isfinite(best.score)) {
    fail(ErrorKind::EmptyNeighborhood, "every bandwidth candidate failed cross-validation");
  }
  res.best_h = BandwidthVector(best.h);
  res.best_score = best.score;
  return res;
}

} // namespace torfrech
