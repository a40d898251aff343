#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "slowfast/sde.hpp"

namespace slowfast {

/// Block length delta of the frozen-coefficient auxiliary process.
class DiscretizationStep {
 public:
  enum class Derivation { explicit_value, from_epsilon };
  using Rule = std::function<double(double eps)>;

  explicit DiscretizationStep(double delta);
  /// delta = rule(eps); the default rule is eps ln(1/eps).
  static DiscretizationStep from_epsilon(double eps, const Rule& rule = default_rule);
  static double default_rule(double eps);

  double value() const noexcept { return delta_; }
  Derivation derivation() const noexcept { return derivation_; }

 private:
  DiscretizationStep(double delta, Derivation derivation);
  double delta_;
  Derivation derivation_;
};

/// floor(r / delta) delta. Values of r within 1e-9 (relative) of a multiple
/// of delta are treated as that multiple and returned unchanged.
double breakpoint(double r, const DiscretizationStep& delta);

class ProvenanceError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// v-hat: the fast equation with (t, x) frozen at the last breakpoint
/// (r(delta), u_{r(delta)}), integrated with the same micro steps and the
/// same W2 increments as solve_slow_fast. `u_path` must come from a run
/// driven by `w2`. delta must be a whole number of macro steps; delta >= T
/// freezes everything at (0, x0). Returned on the macro grid.
SolutionPath build_auxiliary(const CoefficientSet& c, const SolutionPath& u_path, const DiscretizationStep& delta,
                             double eps, const Vector& y0, const BmPath& w2);

struct GapReport {
  std::vector<double> times;      // macro grid
  std::vector<double> mean_sq;    // MC mean of |v_t - vhat_t|^2
  std::vector<double> std_error;
  double sup = 0.0;
  double sup_std_error = 0.0;
  double t_argmax = 0.0;
  std::size_t reps_used = 0;
  std::size_t blowups = 0;
};

/// Paired (v, v-hat) on shared noise over `reps` replicates; replicate r uses
/// the noise seeds derived from (seed, r).
GapReport auxiliary_gap(const CoefficientSet& c, const SystemConfig& cfg, const DiscretizationStep& delta,
                        std::size_t reps, std::uint64_t seed);

/// Noise seeds of replicate r for a master seed.
NoiseSeeds replicate_seeds(std::uint64_t seed, std::size_t replicate);

}  // namespace slowfast
