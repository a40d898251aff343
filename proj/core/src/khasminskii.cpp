#include "slowfast/khasminskii.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "slowfast/parallel.hpp"
#include "slowfast/seeding.hpp"
#include "slowfast/stats.hpp"

namespace slowfast {

namespace {

constexpr double kSnap = 1e-9;

// Number of macro steps per block, or 0 when delta covers the horizon.
std::size_t block_steps(double delta, const TimeGrid& macro) {
  if (delta >= macro.horizon()) return 0;
  const double ratio = delta / macro.step();
  const double whole = std::round(ratio);
  if (whole < 1.0 || std::abs(ratio - whole) > kSnap * whole) {
    std::ostringstream msg;
    msg << "build_auxiliary: delta " << delta << " is not a whole number of macro steps (h = " << macro.step() << ")";
    throw ConfigError(msg.str());
  }
  return static_cast<std::size_t>(whole);
}

}  // namespace

DiscretizationStep::DiscretizationStep(double delta) : DiscretizationStep(delta, Derivation::explicit_value) {}

DiscretizationStep::DiscretizationStep(double delta, Derivation derivation) : delta_(delta), derivation_(derivation) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("DiscretizationStep: delta must be positive");
}

double DiscretizationStep::default_rule(double eps) { return eps * std::log(1.0 / eps); }

DiscretizationStep DiscretizationStep::from_epsilon(double eps, const Rule& rule) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("DiscretizationStep: eps must lie in (0, 1)");
  return DiscretizationStep(rule(eps), Derivation::from_epsilon);
}

double breakpoint(double r, const DiscretizationStep& delta) {
  if (!(r >= 0.0)) throw std::invalid_argument("breakpoint: r must be nonnegative");
  const double d = delta.value();
  const double q = r / d;
  const double nearest = std::round(q);
  if (std::abs(q - nearest) <= kSnap * std::max(1.0, nearest)) return r;
  return std::min(r, std::floor(q) * d);
}

SolutionPath build_auxiliary(const CoefficientSet& c, const SolutionPath& u_path, const DiscretizationStep& delta,
                             double eps, const Vector& y0, const BmPath& w2) {
  if (u_path.provenance().w2 != w2.digest()) {
    throw ProvenanceError("build_auxiliary: u_path was not produced with this W2 realisation");
  }
  if (w2.dim() != c.dims.d3) throw ConfigError("build_auxiliary: W2 dimension does not match d3");
  const TimeGrid& macro = u_path.grid();
  if (w2.grid().horizon() != macro.horizon() || w2.grid().n_steps() % macro.n_steps() != 0) {
    throw ConfigError("build_auxiliary: W2 grid must refine the macro grid");
  }
  const std::size_t block = block_steps(delta.value(), macro);
  const std::size_t micro = w2.grid().n_steps() / macro.n_steps();
  const double h_micro = w2.grid().step();
  const Matrix& u = u_path.values();

  Matrix values(macro.size(), c.dims.m);
  values.row(0) = y0.transpose();
  Vector v = y0;
  std::optional<BlowupInfo> blowup;
  for (std::size_t k = 0; k < macro.n_steps(); ++k) {
    const std::size_t anchor = block == 0 ? 0 : (k / block) * block;
    const double t_frozen = macro.at(anchor);
    const Vector x_frozen = u.row(static_cast<Eigen::Index>(anchor)).transpose();
    if (!x_frozen.allFinite()) {
      blowup = BlowupInfo{k, "slow path is not finite at the breakpoint"};
    } else {
      for (std::size_t j = 0; j < micro; ++j) {
        v = fast_step(c, t_frozen, x_frozen, v, h_micro, eps, w2.increment(k * micro + j));
      }
      if (!v.allFinite() || v.cwiseAbs().maxCoeff() > 1e10) blowup = BlowupInfo{k + 1, "auxiliary path blew up"};
    }
    if (blowup) {
      values.bottomRows(static_cast<Eigen::Index>(macro.size() - k - 1))
          .setConstant(std::numeric_limits<double>::quiet_NaN());
      break;
    }
    values.row(static_cast<Eigen::Index>(k + 1)) = v.transpose();
  }
  return SolutionPath(macro, std::move(values), PathRole::auxiliary, u_path.provenance(), blowup);
}

NoiseSeeds replicate_seeds(std::uint64_t seed, std::size_t replicate) {
  return NoiseSeeds{derive_seed(derive_seed(seed, 1), replicate), derive_seed(derive_seed(seed, 2), replicate),
                    derive_seed(derive_seed(seed, 3), replicate)};
}

GapReport auxiliary_gap(const CoefficientSet& c, const SystemConfig& cfg, const DiscretizationStep& delta,
                        std::size_t reps, std::uint64_t seed) {
  if (reps < 2) throw std::invalid_argument("auxiliary_gap: reps must be at least 2");
  cfg.validate(c);
  const TimeGrid macro = cfg.macro_grid();
  block_steps(delta.value(), macro);

  std::vector<std::vector<double>> gaps(reps);
  parallel_for(reps, [&](std::size_t rep) {
    const NoiseSet noise = make_noise(c.dims, cfg, replicate_seeds(seed, rep));
    const SlowFastSolution sol = solve_slow_fast(c, cfg, noise.w1, noise.w2, noise.bh);
    if (sol.blown_up()) return;
    const SolutionPath aux = build_auxiliary(c, sol.slow, delta, cfg.epsilon, cfg.y0, noise.w2);
    if (aux.blown_up()) return;
    std::vector<double> g(macro.size());
    for (std::size_t k = 0; k < macro.size(); ++k) {
      g[k] = (sol.fast.values().row(k) - aux.values().row(k)).squaredNorm();
    }
    gaps[rep] = std::move(g);
  });

  GapReport out;
  out.times = macro.points();
  out.mean_sq.assign(macro.size(), 0.0);
  out.std_error.assign(macro.size(), 0.0);
  std::vector<double> column;
  column.reserve(reps);
  for (const auto& g : gaps) {
    if (g.empty()) ++out.blowups;
  }
  out.reps_used = reps - out.blowups;
  if (out.reps_used < 2) throw std::runtime_error("auxiliary_gap: fewer than two replicates survived");
  for (std::size_t k = 0; k < macro.size(); ++k) {
    column.clear();
    for (const auto& g : gaps) {
      if (!g.empty()) column.push_back(g[k]);
    }
    const MeanError me = mean_error(column);
    out.mean_sq[k] = me.mean;
    out.std_error[k] = me.std_error;
    if (k == 0 || me.mean > out.sup) {
      out.sup = me.mean;
      out.sup_std_error = me.std_error;
      out.t_argmax = out.times[k];
    }
  }
  return out;
}

}  // namespace slowfast
