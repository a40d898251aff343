#include "slowfast/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "slowfast/fractional.hpp"
#include "slowfast/parallel.hpp"
#include "slowfast/seeding.hpp"
#include "slowfast/stats.hpp"

namespace slowfast {

namespace {

Matrix constant_matrix(std::size_t rows, std::size_t cols, double value) {
  return Matrix::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols), value);
}

constexpr double kSigma1 = 1.0;
constexpr double kSigma2 = 0.5;

AssumptionMetadata linear_metadata() {
  AssumptionMetadata meta;
  meta.kappa = 1.0;
  meta.iota = 1.0;
  meta.gamma = 1.0;
  meta.beta = 1.0;
  meta.beta1 = 2.0;
  meta.beta_p = 1.0;
  meta.coercivity_constant = 2.0;
  return meta;
}

Benchmark make_linear_ou() {
  Benchmark b;
  b.name = "linear-ou";
  b.description = "b1 = y, f1 = 1, g1 = 0.5, b2 = -x - v, f2 = sqrt(2); invariant law N(-x, 1), bbar1(x) = -x";
  CoefficientSet& c = b.coefficients;
  c.b1 = [](double, const Vector&, const Vector& y) { return Vector(y); };
  c.f1 = [](double, const Vector&) { return constant_matrix(1, 1, kSigma1); };
  c.g1 = [](double, const Vector&) { return constant_matrix(1, 1, kSigma2); };
  c.b2 = [](double, const Vector& x, const Vector& y) { return Vector(-x - y); };
  c.f2 = [](double, const Vector&, const Vector&) { return constant_matrix(1, 1, std::sqrt(2.0)); };
  c.meta = linear_metadata();
  b.closed_form = [](double, const Vector& x) { return Vector(-x); };
  return b;
}

Benchmark make_cubic() {
  Benchmark b;
  b.name = "cubic";
  b.description = "b1 = y, f1 = 1, g1 = 0.5, b2 = -v^3 - v + x, f2 = sqrt(2); no closed-form bbar1";
  CoefficientSet& c = b.coefficients;
  c.b1 = [](double, const Vector&, const Vector& y) { return Vector(y); };
  c.f1 = [](double, const Vector&) { return constant_matrix(1, 1, kSigma1); };
  c.g1 = [](double, const Vector&) { return constant_matrix(1, 1, kSigma2); };
  c.b2 = [](double, const Vector& x, const Vector& y) { return Vector(-y.array().cube().matrix() - y + x); };
  c.f2 = [](double, const Vector&, const Vector&) { return constant_matrix(1, 1, std::sqrt(2.0)); };
  c.meta = linear_metadata();
  return b;
}

Benchmark make_frozen_constant() {
  Benchmark b;
  b.name = "frozen-constant";
  b.description = "b1 = -x (independent of y), f1 = 1, g1 = 0.5, b2 = 0, f2 = 0; fast path stays at y0";
  CoefficientSet& c = b.coefficients;
  c.b1 = [](double, const Vector& x, const Vector&) { return Vector(-x); };
  c.f1 = [](double, const Vector&) { return constant_matrix(1, 1, kSigma1); };
  c.g1 = [](double, const Vector&) { return constant_matrix(1, 1, kSigma2); };
  c.b2 = [](double, const Vector&, const Vector& y) { return Vector(Vector::Zero(y.size())); };
  c.f2 = [](double, const Vector&, const Vector& y) { return constant_matrix(static_cast<std::size_t>(y.size()), 1, 0.0); };
  c.meta.kappa = 1.0;
  c.meta.gamma = 1.0;
  c.meta.beta = 1.0;
  b.closed_form = [](double, const Vector& x) { return Vector(-x); };
  b.control = true;
  return b;
}

void check_registration(const Benchmark& b) {
  b.coefficients.validate();
  const AssumptionMetadata& meta = b.coefficients.meta;
  constexpr std::size_t kSamples = 512;
  if (meta.beta1) {
    const LatticeCheck check = check_strict_monotonicity(b.coefficients, *meta.beta1, kSamples, 0x5EED);
    if (check.violations != 0) {
      throw std::logic_error("benchmark " + b.name + ": declared beta1 fails the lattice monotonicity check");
    }
  }
  if (meta.beta_p && meta.coercivity_constant) {
    const LatticeCheck check =
        check_strict_coercivity(b.coefficients, *meta.beta_p, *meta.coercivity_constant, kSamples, 0x5EED);
    if (check.violations != 0) {
      throw std::logic_error("benchmark " + b.name + ": declared coercivity constants fail the lattice check");
    }
  }
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 1) return {0.5 * (lo + hi)};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  out.back() = hi;
  return out;
}

AveragedDrift resolve_drift(const Benchmark& b, const SweepConfig& cfg) {
  if (cfg.drift_source == DriftSource::closed_form) {
    if (!b.closed_form) {
      throw ConfigError("benchmark " + b.name + " has no closed-form averaged drift; use the table drift source");
    }
    return *b.closed_form;
  }
  const TableSettings& t = cfg.table;
  if (t.x_nodes == 0 || t.s_nodes == 0 || !(t.x_max > t.x_min)) throw ConfigError("invalid drift table settings");
  std::vector<double> s_axis =
      t.s_nodes == 1 ? std::vector<double>{0.0} : linspace(0.0, cfg.system.horizon, t.s_nodes);
  std::vector<std::vector<double>> x_axes(b.coefficients.dims.n, linspace(t.x_min, t.x_max, t.x_nodes));
  const DriftTable table =
      build_drift_table(b.coefficients, std::move(s_axis), std::move(x_axes), t.lambda, derive_seed(cfg.seed, 99));
  if (t.s_nodes == 1) {
    // Time-homogeneous table: every query is answered at s = 0.
    return [table](double, const Vector& x) { return table(0.0, x); };
  }
  return table.as_function();
}

std::uint64_t fast_seed(const NoiseSeeds& base, double eps) { return derive_seed(base.w2, hash_double(eps)); }

SystemConfig config_for(const SystemConfig& base, double eps) {
  SystemConfig out = base;
  out.epsilon = eps;
  return out;
}

struct SweepPass {
  std::vector<ReplicateRow> rows;
  std::vector<AggregateRow> aggregates;
};

SweepPass sweep_pass(const Benchmark& b, const SweepConfig& cfg, const AveragedDrift& drift) {
  const CoefficientSet& c = b.coefficients;
  const std::size_t n_eps = cfg.epsilons.size();
  const TimeGrid macro = cfg.system.macro_grid();
  const AlphaExponent alpha(cfg.system.alpha);
  const bool localize = std::isfinite(cfg.localization_level);

  SweepPass pass;
  pass.rows.resize(n_eps * cfg.reps);
  parallel_for(cfg.reps, [&](std::size_t rep) {
    const NoiseSeeds base = replicate_seeds(cfg.seed, rep);
    const BmPath w1 = sample_bm(macro, c.dims.d2, base.w1);
    const FbmPath bh = sample_fbm(macro, HurstParameter(cfg.system.hurst), c.dims.d1, base.bh);
    const SolutionPath ubar = solve_averaged(drift, c, config_for(cfg.system, cfg.epsilons.front()), w1, bh);

    std::vector<double> ubar_norm, lambda_path;
    if (localize && !ubar.blown_up()) {
      ubar_norm = w_alpha_infty_norm(ubar.as_function(), alpha).pointwise;
      lambda_path = weyl_lambda_alpha(SampledFunction(bh), alpha).running_lambda;
    }
    for (std::size_t e = 0; e < n_eps; ++e) {
      const double eps = cfg.epsilons[e];
      ReplicateRow& row = pass.rows[e * cfg.reps + rep];
      row.epsilon = eps;
      row.replicate = rep;
      row.seeds = NoiseSeeds{base.w1, fast_seed(base, eps), base.bh};
      if (ubar.blown_up()) {
        row.blowup = true;
        row.sup_alpha_norm_sq = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const SystemConfig sys = config_for(cfg.system, eps);
      const BmPath w2 = sample_bm(sys.micro_grid(), c.dims.d3, row.seeds.w2);
      const SlowFastSolution sol = solve_slow_fast(c, sys, w1, w2, bh);
      if (sol.blown_up()) {
        row.blowup = true;
        row.sup_alpha_norm_sq = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      row.alpha_norm_sq = alpha_error_profile(sol.slow, ubar, cfg.system.alpha);
      if (localize) {
        const std::vector<double> u_norm = w_alpha_infty_norm(sol.slow.as_function(), alpha).pointwise;
        row.tau_index = stopping_time_tau(u_norm, ubar_norm, lambda_path, cfg.localization_level);
        if (row.tau_index) {
          for (std::size_t k = *row.tau_index + 1; k < row.alpha_norm_sq.size(); ++k) row.alpha_norm_sq[k] = 0.0;
        }
      }
      row.sup_alpha_norm_sq = *std::max_element(row.alpha_norm_sq.begin(), row.alpha_norm_sq.end());
    }
  });
  pass.aggregates = recompute_aggregates(pass.rows, macro.points());
  return pass;
}

double discrepancy_at(const Benchmark& b, const SweepConfig& cfg, const AveragedDrift& drift, double eps) {
  const CoefficientSet& c = b.coefficients;
  const SystemConfig coarse = [&] {
    SystemConfig s = config_for(cfg.system, eps);
    s.micro_substeps_per_macro = s.micro_factor();
    return s;
  }();
  SystemConfig fine = coarse;
  fine.macro_steps = coarse.macro_steps * 2;

  const std::size_t reps = std::min(cfg.reps, cfg.discretization_reps);
  std::vector<double> sups(reps, 0.0);
  std::vector<char> ok(reps, 0);
  parallel_for(reps, [&](std::size_t rep) {
    const NoiseSeeds base = replicate_seeds(derive_seed(cfg.seed, 7), rep);
    const NoiseSet noise = make_noise(c.dims, fine, NoiseSeeds{base.w1, fast_seed(base, eps), base.bh});
    const BmPath w1c = noise.w1.coarsened(2);
    const FbmPath bhc = noise.bh.coarsened(2);
    const SlowFastSolution uf = solve_slow_fast(c, fine, noise.w1, noise.w2, noise.bh);
    const SlowFastSolution uc = solve_slow_fast(c, coarse, w1c, noise.w2.coarsened(2), bhc);
    const SolutionPath af = solve_averaged(drift, c, fine, noise.w1, noise.bh);
    const SolutionPath ac = solve_averaged(drift, c, coarse, w1c, bhc);
    if (uf.blown_up() || uc.blown_up() || af.blown_up() || ac.blown_up()) return;
    const TimeGrid grid = coarse.macro_grid();
    Matrix d(grid.size(), c.dims.n);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      d.row(static_cast<Eigen::Index>(k)) = (uc.slow.values().row(k) - ac.values().row(k)) -
                                            (uf.slow.values().row(2 * k) - af.values().row(2 * k));
    }
    const NormReport norm = w_alpha_infty_norm(SampledFunction(grid, std::move(d)), AlphaExponent(coarse.alpha));
    sups[rep] = norm.supremum * norm.supremum;
    ok[rep] = 1;
  });
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    if (ok[r]) {
      sum += sups[r];
      ++used;
    }
  }
  if (used == 0) throw SweepFailure("discretization check: every replicate blew up");
  return sum / static_cast<double>(used);
}

}  // namespace

std::vector<std::string> benchmark_names() { return {"cubic", "frozen-constant", "linear-ou"}; }

Benchmark load_benchmark(const std::string& name) {
  Benchmark b;
  if (name == "linear-ou") {
    b = make_linear_ou();
  } else if (name == "cubic") {
    b = make_cubic();
  } else if (name == "frozen-constant") {
    b = make_frozen_constant();
  } else {
    std::string msg = "unknown benchmark '" + name + "'; registered:";
    for (const auto& n : benchmark_names()) msg += " " + n;
    throw UnknownBenchmark(msg);
  }
  check_registration(b);
  return b;
}

std::vector<double> alpha_error_profile(const SolutionPath& u, const SolutionPath& ubar, double alpha) {
  require_shared_noise(u, ubar);
  if (!(u.grid() == ubar.grid())) throw std::invalid_argument("alpha_error_profile: grids differ");
  const NormReport report = w_alpha_infty_norm(SampledFunction(u.grid(), u.values() - ubar.values()), AlphaExponent(alpha));
  std::vector<double> out(report.pointwise.size());
  std::transform(report.pointwise.begin(), report.pointwise.end(), out.begin(), [](double v) { return v * v; });
  return out;
}

std::vector<AggregateRow> recompute_aggregates(const std::vector<ReplicateRow>& rows,
                                               const std::vector<double>& times) {
  std::vector<AggregateRow> out;
  std::vector<double> order;
  std::map<double, std::vector<const ReplicateRow*>> by_eps;
  for (const ReplicateRow& row : rows) {
    if (!by_eps.count(row.epsilon)) order.push_back(row.epsilon);
    by_eps[row.epsilon].push_back(&row);
  }
  for (double eps : order) {
    AggregateRow agg;
    agg.epsilon = eps;
    std::vector<const ReplicateRow*> valid;
    for (const ReplicateRow* r : by_eps[eps]) {
      if (r->blowup) {
        ++agg.n_blowup;
      } else {
        valid.push_back(r);
      }
    }
    agg.n_valid = valid.size();
    std::vector<double> column(valid.size());
    for (std::size_t k = 0; k < times.size() && !valid.empty(); ++k) {
      for (std::size_t i = 0; i < valid.size(); ++i) column[i] = valid[i]->alpha_norm_sq.at(k);
      const MeanError me = mean_error(column);
      if (k == 0 || me.mean > agg.sup_t_mean_sq) {
        agg.sup_t_mean_sq = me.mean;
        agg.std_error = me.std_error;
        agg.t_argmax = times[k];
      }
    }
    out.push_back(agg);
  }
  return out;
}

ConvergenceReport run_convergence_sweep(const Benchmark& benchmark, const SweepConfig& cfg_in) {
  SweepConfig cfg = cfg_in;
  if (cfg.epsilons.empty()) throw ConfigError("run_convergence_sweep: empty epsilon list");
  if (!std::is_sorted(cfg.epsilons.begin(), cfg.epsilons.end(), std::greater<>()) ||
      std::adjacent_find(cfg.epsilons.begin(), cfg.epsilons.end()) != cfg.epsilons.end()) {
    throw ConfigError("run_convergence_sweep: epsilons must be strictly decreasing");
  }
  if (cfg.reps == 0) throw ConfigError("run_convergence_sweep: reps must be positive");
  benchmark.coefficients.validate();
  for (double eps : cfg.epsilons) config_for(cfg.system, eps).validate(benchmark.coefficients);

  const AveragedDrift drift = resolve_drift(benchmark, cfg);
  ConvergenceReport report;
  report.benchmark = benchmark.name;
  report.control = benchmark.control;

  for (std::size_t refinement = 0;; ++refinement) {
    SweepPass pass = sweep_pass(benchmark, cfg, drift);
    for (const AggregateRow& agg : pass.aggregates) {
      const std::size_t total = agg.n_valid + agg.n_blowup;
      if (static_cast<double>(agg.n_blowup) > 0.05 * static_cast<double>(total)) {
        std::ostringstream msg;
        msg << "sweep failed: " << agg.n_blowup << " of " << total << " replicates blew up at eps = " << agg.epsilon;
        throw SweepFailure(msg.str());
      }
    }
    DiscretizationCheck check;
    check.macro_step = cfg.system.macro_grid().step();
    check.refinements = refinement;
    if (cfg.check_discretization) {
      check.performed = true;
      check.reference = pass.aggregates.back().sup_t_mean_sq;
      check.discrepancy = discrepancy_at(benchmark, cfg, drift, cfg.epsilons.back());
      check.accepted = check.discrepancy <= 0.1 * check.reference ||
                       (check.discrepancy < cfg.discretization_floor && check.reference < cfg.discretization_floor);
    }
    if (check.accepted || !cfg.auto_refine || refinement >= cfg.max_refinements) {
      report.config = cfg;
      report.macro_step = check.macro_step;
      report.times = cfg.system.macro_grid().points();
      report.rows = std::move(pass.rows);
      report.aggregates = std::move(pass.aggregates);
      report.discretization = check;
      break;
    }
    cfg.system.macro_steps *= 2;
  }

  std::size_t positive = 0;
  for (const AggregateRow& agg : report.aggregates) positive += agg.sup_t_mean_sq > 0.0 ? 1 : 0;
  if (positive >= 3) report.fit = fit_rate(report);
  return report;
}

RateFit fit_rate(const std::vector<double>& epsilons, const std::vector<double>& errors) {
  if (epsilons.size() != errors.size()) throw std::invalid_argument("fit_rate: length mismatch");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i] > 0.0 && epsilons[i] > 0.0 && std::isfinite(errors[i])) {
      x.push_back(std::log(epsilons[i]));
      y.push_back(std::log(errors[i]));
    }
  }
  if (x.size() < 3) throw std::invalid_argument("fit_rate: need at least three positive aggregate errors");
  const LinearFit fit = least_squares(x, y);
  RateFit out;
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.lower = fit.slope - 1.96 * fit.slope_error;
  out.upper = fit.slope + 1.96 * fit.slope_error;
  out.points = x.size();
  out.method = "normal";
  return out;
}

RateFit fit_rate(const ConvergenceReport& report) {
  std::vector<double> eps, err;
  for (const AggregateRow& agg : report.aggregates) {
    eps.push_back(agg.epsilon);
    err.push_back(agg.sup_t_mean_sq);
  }
  RateFit base = fit_rate(eps, err);
  const std::size_t reps = report.config.reps;
  if (report.rows.empty() || reps < 2 || report.rows.size() != eps.size() * reps) return base;

  constexpr std::size_t kResamples = 1000;
  std::mt19937_64 engine(derive_seed(report.config.seed, 0xB0075742));
  std::uniform_int_distribution<std::size_t> pick(0, reps - 1);
  std::vector<std::size_t> idx(reps);
  std::vector<double> slopes;
  slopes.reserve(kResamples);
  std::vector<double> boot(eps.size());
  for (std::size_t b = 0; b < kResamples; ++b) {
    for (auto& i : idx) i = pick(engine);
    for (std::size_t e = 0; e < eps.size(); ++e) {
      double best = 0.0;
      for (std::size_t k = 0; k < report.times.size(); ++k) {
        double sum = 0.0;
        std::size_t used = 0;
        for (std::size_t i : idx) {
          const ReplicateRow& row = report.rows[e * reps + i];
          if (row.blowup) continue;
          sum += row.alpha_norm_sq[k];
          ++used;
        }
        if (used) best = std::max(best, sum / static_cast<double>(used));
      }
      boot[e] = best;
    }
    try {
      slopes.push_back(fit_rate(eps, boot).slope);
    } catch (const std::invalid_argument&) {
      // a resample with too few positive errors carries no slope
    }
  }
  if (slopes.size() < kResamples / 2) return base;
  std::sort(slopes.begin(), slopes.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(slopes.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, slopes.size() - 1);
    return slopes[lo] + (pos - static_cast<double>(lo)) * (slopes[hi] - slopes[lo]);
  };
  base.lower = quantile(0.025);
  base.upper = quantile(0.975);
  base.method = "bootstrap";
  return base;
}

AcceptanceVerdict evaluate_acceptance(const ConvergenceReport& report) {
  AcceptanceVerdict v;
  const auto& agg = report.aggregates;
  if (report.discretization.performed && !report.discretization.accepted) {
    std::ostringstream msg;
    msg << "discretization discrepancy " << report.discretization.discrepancy << " is not below 10% of "
        << report.discretization.reference;
    v.reasons.push_back(msg.str());
  }
  if (report.control) {
    for (const AggregateRow& a : agg) {
      if (!(a.sup_t_mean_sq < report.config.discretization_floor)) {
        std::ostringstream msg;
        msg << "control error " << a.sup_t_mean_sq << " at eps = " << a.epsilon << " is above the floor";
        v.reasons.push_back(msg.str());
      }
    }
  } else {
    if (agg.size() < 2) v.reasons.push_back("need at least two epsilon values");
    for (std::size_t i = 0; i + 1 < agg.size(); ++i) {
      const double drop = agg[i].sup_t_mean_sq - agg[i + 1].sup_t_mean_sq;
      const double se = std::max(agg[i].std_error, agg[i + 1].std_error);
      if (!(drop > se)) {
        std::ostringstream msg;
        msg << "error does not drop by more than one stderr from eps = " << agg[i].epsilon << " to "
            << agg[i + 1].epsilon << " (drop " << drop << ", stderr " << se << ")";
        v.reasons.push_back(msg.str());
      }
    }
    if (agg.size() >= 2 && !(agg.back().sup_t_mean_sq < 0.25 * agg.front().sup_t_mean_sq)) {
      v.reasons.push_back("smallest-eps error is not below 25% of the largest-eps error");
    }
  }
  v.passed = v.reasons.empty();
  return v;
}

void write_report_csv(const ConvergenceReport& report, std::ostream& out) {
  out << "epsilon,replicate,sup_alpha_norm_sq,blowup_flag,seed_w1,seed_w2,seed_bh\n";
  for (const ReplicateRow& row : report.rows) {
    out << format_double(row.epsilon) << ',' << row.replicate << ',' << format_double(row.sup_alpha_norm_sq) << ','
        << (row.blowup ? 1 : 0) << ',' << row.seeds.w1 << ',' << row.seeds.w2 << ',' << row.seeds.bh << '\n';
  }
  out << "# aggregate\n";
  out << "epsilon,sup_t_mean_sq,stderr,t_argmax,n_valid,n_blowup\n";
  for (const AggregateRow& a : report.aggregates) {
    out << format_double(a.epsilon) << ',' << format_double(a.sup_t_mean_sq) << ',' << format_double(a.std_error)
        << ',' << format_double(a.t_argmax) << ',' << a.n_valid << ',' << a.n_blowup << '\n';
  }
  const DiscretizationCheck& d = report.discretization;
  out << "# discretization,macro_step=" << format_double(d.macro_step) << ",performed=" << (d.performed ? 1 : 0)
      << ",discrepancy=" << format_double(d.discrepancy) << ",reference=" << format_double(d.reference)
      << ",accepted=" << (d.accepted ? 1 : 0) << ",refinements=" << d.refinements << '\n';
  if (report.fit) {
    const RateFit& f = *report.fit;
    out << "# fit,slope=" << format_double(f.slope) << ",lower=" << format_double(f.lower)
        << ",upper=" << format_double(f.upper) << ",points=" << f.points << ",method=" << f.method << '\n';
  }
}

}  // namespace slowfast
