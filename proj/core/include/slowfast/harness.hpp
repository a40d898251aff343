#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "slowfast/averaging.hpp"
#include "slowfast/khasminskii.hpp"
#include "slowfast/sde.hpp"

namespace slowfast {

struct Benchmark {
  std::string name;
  std::string description;
  CoefficientSet coefficients;
  std::optional<AveragedDrift> closed_form;  // bbar_1, when known
  double recommended_alpha = 0.35;
  // Control cases solve identical slow equations for every eps, so the
  // measured error must sit at the floating-point floor.
  bool control = false;
};

class UnknownBenchmark : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Registered names, sorted.
std::vector<std::string> benchmark_names();

/// Built-ins: "linear-ou", "cubic", "frozen-constant". Declared monotonicity
/// and coercivity constants are re-checked on a dyadic lattice before the
/// benchmark is returned.
Benchmark load_benchmark(const std::string& name);

enum class DriftSource { closed_form, table };

struct TableSettings {
  double lambda = 100.0;
  double x_min = -8.0;
  double x_max = 8.0;
  std::size_t x_nodes = 33;
  std::size_t s_nodes = 3;
};

struct SweepConfig {
  std::vector<double> epsilons{0.1, 0.05, 0.02, 0.01};
  std::size_t reps = 200;
  SystemConfig system;
  DriftSource drift_source = DriftSource::closed_form;
  TableSettings table;
  std::uint64_t seed = 1;
  // Localization level R for tau_R; infinity disables it.
  double localization_level = std::numeric_limits<double>::infinity();
  bool check_discretization = true;
  std::size_t discretization_reps = 20;
  double discretization_floor = 1e-6;
  bool auto_refine = false;
  std::size_t max_refinements = 2;
};

struct ReplicateRow {
  double epsilon = 0.0;
  std::size_t replicate = 0;
  double sup_alpha_norm_sq = 0.0;        // pathwise sup_t ||u^eps_t - ubar_t||_alpha^2
  std::vector<double> alpha_norm_sq;     // per macro grid point, zero after tau_R
  bool blowup = false;
  std::optional<std::size_t> tau_index;  // first index reaching R, if any
  NoiseSeeds seeds;
};

struct AggregateRow {
  double epsilon = 0.0;
  double sup_t_mean_sq = 0.0;  // max over t of the MC mean of squared alpha-norms
  double std_error = 0.0;      // at the maximizing t
  double t_argmax = 0.0;
  std::size_t n_valid = 0;
  std::size_t n_blowup = 0;
};

struct DiscretizationCheck {
  bool performed = false;
  double macro_step = 0.0;
  // MC mean of sup_t ||e_h - e_{h/2}||_alpha^2 at the smallest eps, where
  // e = u^eps - ubar, with h/2 compared on the coarse grid.
  double discrepancy = 0.0;
  double reference = 0.0;  // aggregate error at the smallest eps
  bool accepted = true;
  std::size_t refinements = 0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double lower = 0.0;  // 95% interval
  double upper = 0.0;
  std::size_t points = 0;
  std::string method;  // "bootstrap" or "normal"
};

struct ConvergenceReport {
  std::string benchmark;
  bool control = false;
  SweepConfig config;
  double macro_step = 0.0;
  std::vector<double> times;
  std::vector<ReplicateRow> rows;  // epsilon-major, replicate order
  std::vector<AggregateRow> aggregates;
  DiscretizationCheck discretization;
  std::optional<RateFit> fit;
};

class SweepFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Convergence study of sup_t E||u^eps_t - ubar_t||_alpha^2. For each
/// replicate W1 and B^H are shared by every eps and by ubar; W2 is drawn per
/// (eps, replicate). Throws SweepFailure when more than 5% of the replicates
/// of some eps blow up.
ConvergenceReport run_convergence_sweep(const Benchmark& benchmark, const SweepConfig& cfg);

/// Aggregates recomputed from the raw rows (same fold as the sweep).
std::vector<AggregateRow> recompute_aggregates(const std::vector<ReplicateRow>& rows,
                                               const std::vector<double>& times);

/// Least-squares slope of log error against log eps. The interval comes
/// from a deterministic bootstrap over replicates when rows are present,
/// otherwise from the normal approximation. Rows with nonpositive error are
/// dropped; fewer than three survivors throws std::invalid_argument.
RateFit fit_rate(const ConvergenceReport& report);
RateFit fit_rate(const std::vector<double>& epsilons, const std::vector<double>& errors);

struct AcceptanceVerdict {
  bool passed = false;
  std::vector<std::string> reasons;  // empty when passed
};

/// Control benchmarks: every aggregate below the discretization floor.
/// Otherwise: aggregates strictly decreasing as eps decreases, each drop
/// larger than the bigger of the two standard errors, and the smallest-eps
/// value below 25% of the largest-eps value. A rejected discretization check
/// fails either way.
AcceptanceVerdict evaluate_acceptance(const ConvergenceReport& report);

/// CSV: replicate rows, then "# aggregate" rows keyed by epsilon, then a
/// "# fit" line when a fit is present. Doubles use 17 significant digits.
void write_report_csv(const ConvergenceReport& report, std::ostream& out);

/// Pointwise squared alpha-norm of u - ubar on the macro grid.
std::vector<double> alpha_error_profile(const SolutionPath& u, const SolutionPath& ubar, double alpha);

}  // namespace slowfast
