#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "slowfast/fractional.hpp"
#include "slowfast/noise.hpp"
#include "slowfast/types.hpp"

namespace slowfast {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dimensions of the slow-fast system: slow state n, fast state m, fBm d1,
/// slow Brownian d2, fast Brownian d3.
struct Dimensions {
  std::size_t n = 1;
  std::size_t m = 1;
  std::size_t d1 = 1;
  std::size_t d2 = 1;
  std::size_t d3 = 1;

  bool operator==(const Dimensions&) const = default;
};

/// Growth, Hoelder and dissipativity constants of a coefficient set, where
/// known. Unknown entries stay empty; nothing downstream invents them.
struct AssumptionMetadata {
  std::optional<double> theta1, theta2, theta3;
  std::optional<double> kappa;   // time regularity of b1, f1
  std::optional<double> gamma;   // Hoelder exponent of grad g1
  std::optional<double> beta;    // time regularity of g1
  std::optional<double> iota;    // time regularity of b2, f2
  std::optional<double> alpha1, alpha2;
  std::optional<double> beta1;   // strict monotonicity rate
  std::optional<double> beta_p;  // strict coercivity rate
  std::optional<double> coercivity_constant;
};

using DriftFn = std::function<Vector(double t, const Vector& x, const Vector& y)>;
using SlowDiffusionFn = std::function<Matrix(double t, const Vector& x)>;
using FastDiffusionFn = std::function<Matrix(double t, const Vector& x, const Vector& y)>;
using AveragedDrift = std::function<Vector(double t, const Vector& x)>;

/// The five coefficients of
///   du = b1(t,u,v) dt + f1(t,u) dW1 + g1(t,u) dB^H
///   dv = b2(t,u,v) dt / eps + f2(t,u,v) dW2 / sqrt(eps).
/// Callables must be safe to invoke concurrently.
struct CoefficientSet {
  Dimensions dims;
  DriftFn b1;
  SlowDiffusionFn f1;  // n x d2
  SlowDiffusionFn g1;  // n x d1
  DriftFn b2;
  FastDiffusionFn f2;  // m x d3
  AssumptionMetadata meta;

  /// Evaluates every coefficient on a small lattice and checks output
  /// shapes and finiteness. Throws ConfigError.
  void validate() const;
};

/// Radial projection x -> x n / |x| outside the closed ball of radius n;
/// returns x unchanged (bitwise) inside.
Vector project_to_ball(const Vector& x, double radius);

/// Truncated set b_{i,n}, f_{1,n}, g_{1,n}: arguments are projected onto the
/// ball of radius `level` before evaluation. f2 is left as is.
CoefficientSet truncate_coefficients(const CoefficientSet& c, double level);

struct SystemConfig {
  double epsilon = 0.1;
  double horizon = 1.0;
  Vector x0 = Vector::Zero(1);
  Vector y0 = Vector::Zero(1);
  double alpha = 0.35;
  double hurst = 0.75;
  std::size_t macro_steps = 256;
  std::size_t micro_substeps_per_macro = 4;
  double stability_factor = 10.0;
  double blowup_guard = 1e10;

  TimeGrid macro_grid() const { return TimeGrid(horizon, macro_steps); }
  /// max(ceil(stability_factor * h_macro / eps), micro_substeps_per_macro)
  std::size_t micro_factor() const;
  TimeGrid micro_grid() const { return TimeGrid(horizon, macro_steps * micro_factor()); }

  /// Checks eps in (0, 1], dimensions of x0/y0, and the admissible alpha
  /// window (1 - H, 1/2 ^ beta ^ gamma/2) when beta, gamma are declared.
  void validate(const CoefficientSet& c) const;
  std::uint64_t digest() const;
};

struct Provenance {
  std::uint64_t w1 = 0;
  std::uint64_t w2 = 0;
  std::uint64_t bh = 0;
  std::uint64_t config = 0;
};

enum class PathRole { slow, fast, auxiliary, averaged };

struct BlowupInfo {
  std::size_t index = 0;  // first grid index whose value exceeded the guard
  std::string advice;
};

/// A solver trajectory on a grid. Rows after a blow-up are NaN.
class SolutionPath {
 public:
  SolutionPath(TimeGrid grid, Matrix values, PathRole role, Provenance provenance,
               std::optional<BlowupInfo> blowup = std::nullopt);

  const TimeGrid& grid() const noexcept { return grid_; }
  const Matrix& values() const noexcept { return values_; }
  PathRole role() const noexcept { return role_; }
  const Provenance& provenance() const noexcept { return provenance_; }
  bool blown_up() const noexcept { return blowup_.has_value(); }
  const std::optional<BlowupInfo>& blowup() const noexcept { return blowup_; }

  SampledFunction as_function() const { return SampledFunction(grid_, values_); }

 private:
  TimeGrid grid_;
  Matrix values_;
  PathRole role_;
  Provenance provenance_;
  std::optional<BlowupInfo> blowup_;
};

struct SlowFastSolution {
  SolutionPath slow;
  SolutionPath fast;

  bool blown_up() const noexcept { return slow.blown_up() || fast.blown_up(); }
};

/// One explicit step of the fast equation:
///   v + (h / eps) b2(t, x, v) + f2(t, x, v) dw / sqrt(eps).
/// Shared by every fast-variable integrator so that identical inputs give
/// bitwise identical trajectories.
Vector fast_step(const CoefficientSet& c, double t, const Vector& x, const Vector& v, double h, double eps,
                 const Vector& dw);

/// Euler-Maruyama for dW1/dW2 and left-point Riemann sums for dB^H. Within
/// each macro step the slow state is frozen at the left endpoint while the
/// fast state takes micro_factor() substeps; the slow drift integrates b1
/// along those substeps. w1 and bh live on the macro grid, w2 on the micro
/// grid. Throws ConfigError on incompatible noise or h_micro > eps.
SlowFastSolution solve_slow_fast(const CoefficientSet& c, const SystemConfig& cfg, const BmPath& w1,
                                 const BmPath& w2, const FbmPath& bh);

/// dv = b2(s, x, v) dt + f2(s, x, v) dW2 with (s, x) frozen; w2 on `grid`.
SolutionPath solve_frozen_fast(const CoefficientSet& c, double s, const Vector& x, const Vector& y,
                               const TimeGrid& grid, const BmPath& w2);

/// du = bbar(t, u) dt + f1 dW1 + g1 dB^H with the slow scheme of
/// solve_slow_fast. Pass the same w1 and bh objects as the coupled run.
SolutionPath solve_averaged(const AveragedDrift& drift, const CoefficientSet& c, const SystemConfig& cfg,
                            const BmPath& w1, const FbmPath& bh);

/// Throws std::logic_error unless both paths were driven by the same W1 and
/// B^H realisations.
void require_shared_noise(const SolutionPath& a, const SolutionPath& b);

/// First index where u + ubar + lambda >= level, if any.
std::optional<std::size_t> stopping_time_tau(std::span<const double> u_norm, std::span<const double> ubar_norm,
                                             std::span<const double> lambda_path, double level);

struct NoiseSeeds {
  std::uint64_t w1 = 0;
  std::uint64_t w2 = 0;
  std::uint64_t bh = 0;
};

struct NoiseSet {
  BmPath w1;
  BmPath w2;
  FbmPath bh;
};

/// Draws W1 and B^H on the macro grid and W2 on the micro grid of cfg.
NoiseSet make_noise(const Dimensions& dims, const SystemConfig& cfg, const NoiseSeeds& seeds);

struct SelfConvergence {
  double discrepancy = 0.0;  // sup |u_h - u_{h/4}| on the coarse grid
  double estimate = 0.0;     // sup |u_h - u_{h/2}|
  bool blown_up = false;
};

/// Solves the coupled system at h, h/2 and h/4 on shared noise (the finest
/// noise subsampled) and compares the slow components on the coarse grid.
/// The micro step shrinks with the macro step.
SelfConvergence self_convergence(const CoefficientSet& c, const SystemConfig& cfg, const NoiseSeeds& seeds);

struct LatticeCheck {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_margin = 0.0;  // max of lhs - rhs; <= 0 means satisfied
};

/// 2<y1-y2, b2(t,x,y1)-b2(t,x,y2)> + |f2(t,x,y1)-f2(t,x,y2)|^2 <= -beta1 |y1-y2|^2
/// on random points of the dyadic lattice 2^-8 Z inside [-radius, radius].
/// Dyadic points keep polynomial benchmark arithmetic exact.
LatticeCheck check_strict_monotonicity(const CoefficientSet& c, double beta1, std::size_t samples,
                                       std::uint64_t seed, double radius = 4.0);

/// 2<y, b2(t,x,y)> + |f2(t,x,y)|^2 <= -beta_p |y|^2 + constant (1 + |x|^2).
LatticeCheck check_strict_coercivity(const CoefficientSet& c, double beta_p, double constant, std::size_t samples,
                                     std::uint64_t seed, double radius = 4.0);

}  // namespace slowfast
