#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "slowfast/sde.hpp"
#include "slowfast/stats.hpp"
#include "slowfast/types.hpp"

namespace slowfast {

/// Thrown when a frozen-equation run leaves the blow-up guard. Carries what
/// was simulated up to that point.
class FrozenBlowup : public std::runtime_error {
 public:
  FrozenBlowup(const std::string& what, std::size_t step, Matrix recorded)
      : std::runtime_error(what), step_(step), recorded_(std::move(recorded)) {}

  std::size_t step() const noexcept { return step_; }
  // Thinned states recorded before the guard tripped (rows are samples).
  const Matrix& recorded() const noexcept { return recorded_; }

 private:
  std::size_t step_;
  Matrix recorded_;
};

struct FrozenRunOptions {
  double step = 0.01;
  double burn_in_fraction = 0.2;
  double guard = 1e10;
};

/// Draws from the invariant measure of the frozen equation at (s, x),
/// collected from one long trajectory started at y = 0.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(Matrix samples, double burn_in, double s, Vector x, std::uint64_t seed, std::size_t stride,
                   double step);

  const Matrix& samples() const noexcept { return samples_; }
  std::size_t count() const noexcept { return static_cast<std::size_t>(samples_.rows()); }
  double burn_in() const noexcept { return burn_in_; }
  double s() const noexcept { return s_; }
  const Vector& x() const noexcept { return x_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t stride() const noexcept { return stride_; }
  double step() const noexcept { return step_; }

  /// E[z_j^p] with a batch-means standard error (samples stay correlated
  /// after thinning, so the iid error would be optimistic).
  MeanError moment(std::size_t component, int p) const;
  /// Sample variance of one component with a batch-means error.
  MeanError variance(std::size_t component) const;

 private:
  Matrix samples_;
  double burn_in_;
  double s_;
  Vector x_;
  std::uint64_t seed_;
  std::size_t stride_;
  double step_;
};

/// Thinning stride: max(1, ceil((1 / beta1) / step)) when beta1 is declared,
/// otherwise 10 steps.
std::size_t thinning_stride(const AssumptionMetadata& meta, double step);

EmpiricalMeasure estimate_invariant_measure(const CoefficientSet& c, double s, const Vector& x, double total_time,
                                            std::uint64_t seed, const FrozenRunOptions& opts = {});

struct DriftEstimate {
  Vector value;
  Vector std_error;  // batch means along the trajectory
};

/// (1 / Lambda) int_0^Lambda b1(s, x, v_r) dr along one frozen trajectory
/// started at y = 0 (left-point sum on a grid of the given step).
DriftEstimate averaged_drift(const CoefficientSet& c, double s, const Vector& x, double lambda, std::uint64_t seed,
                             const FrozenRunOptions& opts = {});

/// Ensemble cross-check: mean of b1(s, x, v_horizon) over independent frozen
/// paths started at y = 0.
DriftEstimate averaged_drift_ensemble(const CoefficientSet& c, double s, const Vector& x, double horizon,
                                      std::size_t paths, std::uint64_t seed, const FrozenRunOptions& opts = {});

/// Averaged drift tabulated on a tensor lattice in (s, x_1, ..., x_n) with
/// multilinear interpolation. Queries outside the hull throw
/// std::out_of_range.
class DriftTable {
 public:
  DriftTable(std::vector<double> s_lattice, std::vector<std::vector<double>> x_lattice, Matrix values,
             Matrix std_errors);

  Vector operator()(double s, const Vector& x) const;
  AveragedDrift as_function() const;

  const std::vector<double>& s_lattice() const noexcept { return s_; }
  const std::vector<std::vector<double>>& x_lattice() const noexcept { return x_; }
  std::size_t node_count() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  /// Node values in row-major order over (s, x_1, ..., x_n), x_n fastest.
  const Matrix& values() const noexcept { return values_; }
  const Matrix& std_errors() const noexcept { return std_errors_; }
  double max_std_error() const;
  /// Coordinates (s, x) of a node.
  std::pair<double, Vector> node(std::size_t index) const;

 private:
  std::vector<double> s_;
  std::vector<std::vector<double>> x_;
  Matrix values_;
  Matrix std_errors_;
};

/// Evaluates averaged_drift at every node in parallel; node i uses seed
/// derive_seed(seed, i).
DriftTable build_drift_table(const CoefficientSet& c, std::vector<double> s_lattice,
                             std::vector<std::vector<double>> x_lattice, double lambda, std::uint64_t seed,
                             const FrozenRunOptions& opts = {});

struct ContractionReport {
  std::vector<double> times;
  std::vector<double> mean_sq_gap;  // E|v^{y1}_t - v^{y2}_t|^2 over replicates
  double slope = 0.0;               // of log mean_sq_gap against t
  double slope_error = 0.0;
  bool degenerate = false;          // y1 == y2: the gap is identically zero
  std::optional<bool> meets_beta1;  // slope <= -beta1 + tolerance, when beta1 is declared
};

struct ContractionOptions {
  double step = 1e-3;
  std::size_t record_every = 10;
  double tolerance = 0.1;
};

/// Runs frozen paths from y1 and y2 on the same W2 for each replicate and
/// fits the exponential decay of the mean-square gap.
ContractionReport contraction_check(const CoefficientSet& c, double s, const Vector& x, const Vector& y1,
                                    const Vector& y2, double horizon, std::size_t reps, std::uint64_t seed,
                                    const ContractionOptions& opts = {});

}  // namespace slowfast
