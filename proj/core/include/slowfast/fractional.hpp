#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "slowfast/noise.hpp"
#include "slowfast/types.hpp"

namespace slowfast {

/// A path f: [0, T] -> R^d sampled on a grid, read as its piecewise-linear
/// interpolant. Row k is f(t_k).
class SampledFunction {
 public:
  SampledFunction(TimeGrid grid, Matrix values);
  explicit SampledFunction(const NoisePath& path) : SampledFunction(path.grid(), path.values()) {}

  template <typename F>
  static SampledFunction tabulate(const TimeGrid& grid, F&& scalar_fn) {
    Matrix values(grid.size(), 1);
    for (std::size_t k = 0; k < grid.size(); ++k) values(k, 0) = scalar_fn(grid.at(k));
    return SampledFunction(grid, std::move(values));
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  const Matrix& values() const noexcept { return values_; }

  SampledFunction scaled(double c) const { return SampledFunction(grid_, c * values_); }
  SampledFunction subsampled(std::size_t factor) const;

 private:
  TimeGrid grid_;
  Matrix values_;
};

/// Fractional order alpha in (0, 1). Individual functionals narrow the range.
class AlphaExponent {
 public:
  explicit AlphaExponent(double alpha);
  double value() const noexcept { return alpha_; }

 private:
  double alpha_;
};

struct NormReport {
  std::vector<double> pointwise;  // ||f(t_k)||_alpha
  double supremum = 0.0;
  std::size_t argmax = 0;
  // Kernel integral over the cell adjacent to the maximizing point.
  double singular_tail_estimate = 0.0;
};

/// ||f(t)||_alpha = |f(t)| + int_0^t |f(t) - f(s)| / (t - s)^{alpha+1} ds on
/// every grid point, and its supremum over the grid (a lower bound for the
/// continuum supremum).
NormReport w_alpha_infty_norm(const SampledFunction& f, AlphaExponent alpha);

/// ||g||_{1-alpha,infty,T}: supremum over grid pairs s < t of
/// |g(t) - g(s)| / (t - s)^{1-alpha} + int_s^t |g(r) - g(s)| / (r - s)^{2-alpha} dr.
double w_1ma_norm(const SampledFunction& g, AlphaExponent alpha);

/// ||f||_{alpha,1} = int_0^T |f(s)| s^{-alpha} ds
///                  + int_0^T int_0^s |f(s) - f(r)| (s - r)^{-alpha-1} dr ds.
double w_alpha_1_norm(const SampledFunction& f, AlphaExponent alpha);

struct WeylReport {
  double lambda = 0.0;  // Lambda_alpha^{0,T}(g)
  double bound = 0.0;   // ||g||_{1-alpha,infty,T} / (Gamma(1-alpha) Gamma(alpha))
  double w_1ma = 0.0;
  // Lambda_alpha^{0,t_k}(g) for every grid point (nondecreasing).
  std::vector<double> running_lambda;
};

/// Lambda_alpha(g) = sup_{s<t} |(D_{t-}^{1-alpha} g_{t-})(s)| / Gamma(1-alpha),
/// Weyl derivative taken by magnitude (the unimodular phase factor of the
/// complex-order definition is dropped). Throws std::logic_error if the
/// computed value exceeds the W^{1-alpha,infty} bound.
WeylReport weyl_lambda_alpha(const SampledFunction& g, AlphaExponent alpha);

/// Running left-point sums I_k = sum_{j<k} f(t_j) . (g(t_{j+1}) - g(t_j)).
/// If f and g share a dimension the result is scalar (inner product); if f
/// is scalar the result has g's dimension. Warns on std::clog when the
/// estimated Hoelder exponents do not sum above one.
SampledFunction young_integral(const SampledFunction& f, const SampledFunction& g);

struct RefinedYoungIntegral {
  std::vector<std::size_t> resolutions;  // n_steps per level, coarse to fine
  std::vector<double> estimates;         // left-point sum at T (first component)
  double finest = 0.0;
  double extrapolated = 0.0;    // Aitken delta-squared on the last three levels
  double last_increment = 0.0;  // |finest - previous level|
};

/// Left-point sums of int_0^T f dg on dyadic subsamplings of the given fine
/// paths, from `coarsest_steps` up to the full resolution.
RefinedYoungIntegral young_integral_refined(const SampledFunction& f, const SampledFunction& g,
                                            std::size_t coarsest_steps);

struct GrrReport {
  double ratio = 0.0;            // empirical C_{theta,p}
  double double_integral = 0.0;  // int int |f(x)-f(y)|^p / |x-y|^{theta p + 1}
  bool flagged = false;
  std::string note;
};

/// Largest ratio |f(t)-f(s)|^p / (|t-s|^{theta p - 1} * double_integral) over
/// grid pairs. Requires p >= 1 and theta p > 1. Flags (does not throw) when
/// the double integral is not finite or theta is at or above the estimated
/// Hoelder exponent of the path.
GrrReport grr_check(const SampledFunction& f, double p, double theta);

/// Log-log slope of the maximal increment over dyadic lags. Constant paths
/// report 1.
double estimate_holder_exponent(const SampledFunction& f);

namespace detail {

/// int_{u0}^{u1} phi(u) u^{-k} du for phi linear from phi0 (at u0) to phi1 (at u1).
double linear_kernel_integral(double u0, double u1, double phi0, double phi1, double k);

}  // namespace detail

}  // namespace slowfast
