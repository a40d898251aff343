#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "slowfast/seeding.hpp"
#include "slowfast/types.hpp"

namespace slowfast {

/// Uniform partition t_k = k T / n of [0, T]; t_n is exactly T.
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t n_steps);

  double horizon() const noexcept { return horizon_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t size() const noexcept { return n_steps_ + 1; }
  double step() const noexcept { return horizon_ / static_cast<double>(n_steps_); }
  double at(std::size_t k) const noexcept;
  std::vector<double> points() const;

  TimeGrid refined(std::size_t factor) const;
  TimeGrid coarsened(std::size_t factor) const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double horizon_;
  std::size_t n_steps_;
};

/// Hurst index in [1/2, 1). The value 1/2 is the Brownian test mode.
class HurstParameter {
 public:
  explicit HurstParameter(double h);

  double value() const noexcept { return h_; }
  bool degenerate() const noexcept { return h_ == 0.5; }

 private:
  double h_;
};

// R_H(s, t) = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2. Throws std::domain_error
// for negative times.
double covariance_rh(double s, double t, HurstParameter hurst);

enum class FbmMethod { circulant_embedding, cholesky };
std::string_view to_string(FbmMethod method);

/// A sampled noise trajectory: row k holds the position at grid point t_k.
/// Immutable after construction. The digest identifies the generating
/// parameters (kind, seed, grid, dim, Hurst, method) and is what noise
/// coupling checks compare.
class NoisePath {
 public:
  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  const Matrix& values() const noexcept { return values_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t digest() const noexcept { return digest_; }

  Vector increment(std::size_t k) const { return (values_.row(k + 1) - values_.row(k)).transpose(); }

 protected:
  NoisePath(TimeGrid grid, Matrix values, std::uint64_t seed, std::uint64_t digest);

  Matrix subsample(std::size_t factor) const;

 private:
  TimeGrid grid_;
  Matrix values_;
  std::uint64_t seed_;
  std::uint64_t digest_;
};

class BmPath : public NoisePath {
 public:
  BmPath(TimeGrid grid, Matrix values, std::uint64_t seed);

  /// Positions at every `factor`-th grid point (exact for a cumulative path).
  BmPath coarsened(std::size_t factor) const;

 private:
  BmPath(TimeGrid grid, Matrix values, std::uint64_t seed, std::uint64_t digest)
      : NoisePath(std::move(grid), std::move(values), seed, digest) {}
};

class FbmPath : public NoisePath {
 public:
  FbmPath(TimeGrid grid, HurstParameter hurst, Matrix values, std::uint64_t seed, FbmMethod method);

  HurstParameter hurst() const noexcept { return hurst_; }
  FbmMethod method() const noexcept { return method_; }

  FbmPath coarsened(std::size_t factor) const;

 private:
  FbmPath(TimeGrid grid, HurstParameter hurst, Matrix values, std::uint64_t seed, FbmMethod method,
          std::uint64_t digest)
      : NoisePath(std::move(grid), std::move(values), seed, digest), hurst_(hurst), method_(method) {}

  HurstParameter hurst_;
  FbmMethod method_;
};

/// Brownian increments drawn one step at a time. Produces exactly the
/// increments sample_bm would cumulate for the same (seed, dim, step).
class BmIncrementStream {
 public:
  BmIncrementStream(std::size_t dim, double step, std::uint64_t seed);

  void next(Vector& out);

 private:
  std::vector<NormalStream> streams_;
  double scale_;
};

BmPath sample_bm(const TimeGrid& grid, std::size_t dim, std::uint64_t seed);

/// Eigenvalues of the circulant embedding (size 2n) of the unit-step
/// fractional Gaussian noise covariance.
std::vector<double> circulant_eigenvalues(std::size_t n_steps, HurstParameter hurst);

/// Exact fBm sampler by circulant embedding. Construction does the one
/// spectral decomposition; sampling is O(n log n) per component.
class CirculantFbmSampler {
 public:
  static constexpr double kClipTolerance = 1e-12;

  CirculantFbmSampler(const TimeGrid& grid, HurstParameter hurst);

  /// False when some eigenvalue is below -kClipTolerance * max eigenvalue.
  bool valid() const noexcept { return valid_; }
  double min_relative_eigenvalue() const noexcept { return min_relative_eigenvalue_; }

  FbmPath sample(std::size_t dim, std::uint64_t seed) const;

 private:
  TimeGrid grid_;
  HurstParameter hurst_;
  std::vector<double> sqrt_weights_;
  bool valid_ = true;
  double min_relative_eigenvalue_ = 0.0;
};

/// Cholesky factor of the R_H matrix on the grid; limited to kMaxSteps.
class CholeskyFbmSampler {
 public:
  static constexpr std::size_t kMaxSteps = 4096;

  CholeskyFbmSampler(const TimeGrid& grid, HurstParameter hurst);

  FbmPath sample(std::size_t dim, std::uint64_t seed) const;

 private:
  TimeGrid grid_;
  HurstParameter hurst_;
  Matrix lower_;
};

FbmPath sample_fbm(const TimeGrid& grid, HurstParameter hurst, std::size_t dim, std::uint64_t seed,
                   FbmMethod method = FbmMethod::circulant_embedding);

}  // namespace slowfast
