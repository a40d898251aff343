// slowfast: command line front end for the slow-fast SDE toolkit.
//
// Every subcommand writes CSV to --out (or stdout) and takes an explicit
// --seed, so repeated invocations reproduce their output byte for byte.
// Options can also come from an INI file given with --config; each
// subcommand reads its own [section], and flags on the command line win.

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slowfast/averaging.hpp"
#include "slowfast/fractional.hpp"
#include "slowfast/harness.hpp"
#include "slowfast/khasminskii.hpp"
#include "slowfast/noise.hpp"
#include "slowfast/sde.hpp"

namespace sf = slowfast;

namespace {

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// Owns the output file when --out is given.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw std::runtime_error("cannot open " + path + " for writing");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

sf::Vector to_vector(const std::vector<double>& xs) {
  sf::Vector v(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<Eigen::Index>(i)] = xs[i];
  return v;
}

sf::SampledFunction read_path_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw std::runtime_error("non-numeric row in " + path + ": " + line);
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw std::runtime_error("ragged CSV in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2 || rows.front().size() < 2) {
    throw std::runtime_error(path + ": need a t column, one value column and at least two rows");
  }
  const double horizon = rows.back()[0];
  const std::size_t n = rows.size() - 1;
  if (rows.front()[0] != 0.0) throw std::runtime_error(path + ": time column must start at 0");
  sf::TimeGrid grid(horizon, n);
  sf::Matrix values(rows.size(), rows.front().size() - 1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (std::abs(rows[k][0] - grid.at(k)) > 1e-9 * horizon) {
      throw std::runtime_error(path + ": time column is not a uniform grid");
    }
    for (std::size_t j = 1; j < rows[k].size(); ++j) values(k, j - 1) = rows[k][j];
  }
  return sf::SampledFunction(grid, std::move(values));
}

struct FbmArgs {
  double hurst = 0.75;
  std::size_t steps = 1024;
  double horizon = 1.0;
  std::size_t dim = 1;
  std::uint64_t seed = 1;
  std::string method = "circulant";
  std::string out;
};

int run_fbm(const FbmArgs& a) {
  const sf::TimeGrid grid(a.horizon, a.steps);
  const sf::FbmMethod method = a.method == "cholesky" ? sf::FbmMethod::cholesky : sf::FbmMethod::circulant_embedding;
  const sf::FbmPath path = sf::sample_fbm(grid, sf::HurstParameter(a.hurst), a.dim, a.seed, method);
  Output out(a.out);
  std::ostream& os = out.stream();
  os << 't';
  for (std::size_t j = 0; j < a.dim; ++j) os << ",comp_" << j;
  os << '\n';
  for (std::size_t k = 0; k < grid.size(); ++k) {
    os << num(grid.at(k));
    for (std::size_t j = 0; j < a.dim; ++j) os << ',' << num(path.values()(k, j));
    os << '\n';
  }
  return 0;
}

struct NormsArgs {
  std::string in;
  double alpha = 0.35;
};

int run_norms(const NormsArgs& a) {
  const sf::SampledFunction f = read_path_csv(a.in);
  const sf::AlphaExponent alpha(a.alpha);
  const sf::NormReport inf = sf::w_alpha_infty_norm(f, alpha);
  std::cout << "w_alpha_infty_norm," << num(inf.supremum) << '\n';
  std::cout << "w_alpha_1_norm," << num(sf::w_alpha_1_norm(f, alpha)) << '\n';
  if (a.alpha < 0.5) {
    const sf::WeylReport weyl = sf::weyl_lambda_alpha(f, alpha);
    std::cout << "w_1ma_norm," << num(weyl.w_1ma) << '\n';
    std::cout << "weyl_lambda_alpha," << num(weyl.lambda) << '\n';
    std::cout << "weyl_bound," << num(weyl.bound) << '\n';
  } else {
    std::cout << "w_1ma_norm,nan\nweyl_lambda_alpha,nan\n";
    std::cerr << "note: the 1-alpha functionals need alpha < 1/2\n";
  }
  return 0;
}

struct SystemArgs {
  std::string benchmark = "linear-ou";
  double epsilon = 0.05;
  double horizon = 1.0;
  std::size_t steps = 256;
  std::size_t micro = 4;
  double alpha = 0.35;
  double hurst = 0.75;
  std::vector<double> x0{0.0};
  std::vector<double> y0{0.0};
  std::uint64_t seed = 1;
  std::string out;

  sf::SystemConfig config() const {
    sf::SystemConfig cfg;
    cfg.epsilon = epsilon;
    cfg.horizon = horizon;
    cfg.macro_steps = steps;
    cfg.micro_substeps_per_macro = micro;
    cfg.alpha = alpha;
    cfg.hurst = hurst;
    cfg.x0 = to_vector(x0);
    cfg.y0 = to_vector(y0);
    return cfg;
  }
};

void add_system_options(CLI::App* cmd, SystemArgs& a) {
  cmd->add_option("--benchmark", a.benchmark, "Benchmark name")->capture_default_str();
  cmd->add_option("--epsilon", a.epsilon, "Time-scale ratio")->capture_default_str();
  cmd->add_option("--horizon", a.horizon, "Final time T")->capture_default_str();
  cmd->add_option("--steps", a.steps, "Macro steps on [0, T]")->capture_default_str();
  cmd->add_option("--micro", a.micro, "Minimum micro substeps per macro step")->capture_default_str();
  cmd->add_option("--alpha", a.alpha, "Fractional order alpha")->capture_default_str();
  cmd->add_option("--hurst", a.hurst, "Hurst index H")->capture_default_str();
  cmd->add_option("--x0", a.x0, "Initial slow state, comma separated")->delimiter(',');
  cmd->add_option("--y0", a.y0, "Initial fast state, comma separated")->delimiter(',');
  cmd->add_option("--seed", a.seed, "Master seed")->capture_default_str();
  cmd->add_option("--out", a.out, "Output CSV (stdout if omitted)");
}

int run_simulate(const SystemArgs& a) {
  const sf::Benchmark b = sf::load_benchmark(a.benchmark);
  const sf::SystemConfig cfg = a.config();
  const sf::NoiseSet noise = sf::make_noise(b.coefficients.dims, cfg, sf::replicate_seeds(a.seed, 0));
  const sf::SlowFastSolution sol = sf::solve_slow_fast(b.coefficients, cfg, noise.w1, noise.w2, noise.bh);
  std::optional<sf::SolutionPath> ubar;
  if (b.closed_form) ubar = sf::solve_averaged(*b.closed_form, b.coefficients, cfg, noise.w1, noise.bh);

  Output out(a.out);
  std::ostream& os = out.stream();
  const auto& dims = b.coefficients.dims;
  os << 't';
  for (std::size_t j = 0; j < dims.n; ++j) os << ",u_" << j;
  for (std::size_t j = 0; j < dims.m; ++j) os << ",v_" << j;
  if (ubar) {
    for (std::size_t j = 0; j < dims.n; ++j) os << ",ubar_" << j;
  }
  os << '\n';
  const sf::TimeGrid& grid = sol.slow.grid();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    os << num(grid.at(k));
    for (std::size_t j = 0; j < dims.n; ++j) os << ',' << num(sol.slow.values()(k, j));
    for (std::size_t j = 0; j < dims.m; ++j) os << ',' << num(sol.fast.values()(k, j));
    if (ubar) {
      for (std::size_t j = 0; j < dims.n; ++j) os << ',' << num(ubar->values()(k, j));
    }
    os << '\n';
  }
  if (sol.blown_up()) {
    const auto& info = sol.slow.blowup() ? *sol.slow.blowup() : *sol.fast.blowup();
    std::cerr << "blow-up at index " << info.index << ": " << info.advice << '\n';
    return 3;
  }
  return 0;
}

struct DriftArgs {
  std::string benchmark = "linear-ou";
  double s = 0.0;
  std::vector<double> x{0.0};
  double lambda = 1000.0;
  double step = 0.01;
  std::uint64_t seed = 1;
};

int run_avg_drift(const DriftArgs& a) {
  const sf::Benchmark b = sf::load_benchmark(a.benchmark);
  sf::FrozenRunOptions opts;
  opts.step = a.step;
  const sf::DriftEstimate est = sf::averaged_drift(b.coefficients, a.s, to_vector(a.x), a.lambda, a.seed, opts);
  std::cout << "component,estimate,stderr\n";
  for (Eigen::Index i = 0; i < est.value.size(); ++i) {
    std::cout << i << ',' << num(est.value[i]) << ',' << num(est.std_error[i]) << '\n';
  }
  return 0;
}

struct TableArgs {
  std::string benchmark = "linear-ou";
  std::size_t s_nodes = 1;
  double s_max = 1.0;
  double x_min = -4.0;
  double x_max = 4.0;
  std::size_t x_nodes = 9;
  double lambda = 100.0;
  double step = 0.01;
  std::uint64_t seed = 1;
  std::string out;
};

int run_drift_table(const TableArgs& a) {
  const sf::Benchmark b = sf::load_benchmark(a.benchmark);
  if (a.s_nodes == 0 || a.x_nodes == 0) throw std::invalid_argument("node counts must be positive");
  const auto axis = [](double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
  };
  sf::FrozenRunOptions opts;
  opts.step = a.step;
  const sf::DriftTable table =
      sf::build_drift_table(b.coefficients, axis(0.0, a.s_max, a.s_nodes),
                            std::vector<std::vector<double>>(b.coefficients.dims.n, axis(a.x_min, a.x_max, a.x_nodes)),
                            a.lambda, a.seed, opts);
  Output out(a.out);
  std::ostream& os = out.stream();
  const std::size_t n = b.coefficients.dims.n;
  os << 's';
  for (std::size_t j = 0; j < n; ++j) os << ",x_" << j;
  for (std::size_t j = 0; j < n; ++j) os << ",bbar_" << j;
  for (std::size_t j = 0; j < n; ++j) os << ",stderr_" << j;
  os << '\n';
  for (std::size_t i = 0; i < table.node_count(); ++i) {
    const auto [s, x] = table.node(i);
    os << num(s);
    for (Eigen::Index j = 0; j < x.size(); ++j) os << ',' << num(x[j]);
    for (std::size_t j = 0; j < n; ++j) os << ',' << num(table.values()(i, j));
    for (std::size_t j = 0; j < n; ++j) os << ',' << num(table.std_errors()(i, j));
    os << '\n';
  }
  return 0;
}

struct GapArgs {
  SystemArgs sys;
  double delta = 0.1;
  std::size_t reps = 100;
};

int run_khasminskii(const GapArgs& a) {
  const sf::Benchmark b = sf::load_benchmark(a.sys.benchmark);
  const sf::GapReport gap =
      sf::auxiliary_gap(b.coefficients, a.sys.config(), sf::DiscretizationStep(a.delta), a.reps, a.sys.seed);
  Output out(a.sys.out);
  std::ostream& os = out.stream();
  os << "t,mean_sq_gap,stderr\n";
  for (std::size_t k = 0; k < gap.times.size(); ++k) {
    os << num(gap.times[k]) << ',' << num(gap.mean_sq[k]) << ',' << num(gap.std_error[k]) << '\n';
  }
  os << "# sup,value=" << num(gap.sup) << ",stderr=" << num(gap.sup_std_error) << ",t=" << num(gap.t_argmax)
     << ",reps_used=" << gap.reps_used << ",blowups=" << gap.blowups << '\n';
  return 0;
}

struct ConvergeArgs {
  SystemArgs sys;
  std::vector<double> epsilons{0.1, 0.05, 0.02, 0.01};
  std::size_t reps = 200;
  double localization = std::numeric_limits<double>::infinity();
  std::string drift = "closed-form";
  bool auto_refine = false;
  bool skip_discretization = false;
  std::size_t discretization_reps = 20;
};

int run_converge(const ConvergeArgs& a) {
  const sf::Benchmark b = sf::load_benchmark(a.sys.benchmark);
  sf::SweepConfig cfg;
  cfg.epsilons = a.epsilons;
  cfg.reps = a.reps;
  cfg.system = a.sys.config();
  cfg.seed = a.sys.seed;
  cfg.localization_level = a.localization;
  cfg.drift_source = a.drift == "table" ? sf::DriftSource::table : sf::DriftSource::closed_form;
  cfg.auto_refine = a.auto_refine;
  cfg.check_discretization = !a.skip_discretization;
  cfg.discretization_reps = a.discretization_reps;
  const sf::ConvergenceReport report = sf::run_convergence_sweep(b, cfg);
  {
    Output out(a.sys.out);
    sf::write_report_csv(report, out.stream());
  }
  const sf::AcceptanceVerdict verdict = sf::evaluate_acceptance(report);
  for (const auto& agg : report.aggregates) {
    std::cerr << "eps=" << agg.epsilon << "  sup_t E|u-ubar|_alpha^2=" << agg.sup_t_mean_sq << " +- "
              << agg.std_error << '\n';
  }
  if (report.fit) {
    std::cerr << "log-log slope " << report.fit->slope << " [" << report.fit->lower << ", " << report.fit->upper
              << "] (" << report.fit->method << ")\n";
  }
  std::cerr << (verdict.passed ? "acceptance: met" : "acceptance: NOT met") << '\n';
  for (const auto& r : verdict.reasons) std::cerr << "  " << r << '\n';
  return verdict.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slow-fast SDE toolkit: fBm sampling, fractional norms, solvers, averaging studies"};
  app.set_config("--config", "", "INI file with one [section] per subcommand");
  app.require_subcommand(1);

  FbmArgs fbm;
  auto* fbm_cmd = app.add_subcommand("fbm", "Sample fractional Brownian motion");
  fbm_cmd->add_option("--hurst", fbm.hurst)->capture_default_str();
  fbm_cmd->add_option("--steps", fbm.steps)->capture_default_str();
  fbm_cmd->add_option("--horizon", fbm.horizon)->capture_default_str();
  fbm_cmd->add_option("--dim", fbm.dim)->capture_default_str();
  fbm_cmd->add_option("--seed", fbm.seed)->capture_default_str();
  fbm_cmd->add_option("--method", fbm.method)->check(CLI::IsMember({"circulant", "cholesky"}))->capture_default_str();
  fbm_cmd->add_option("--out", fbm.out);

  NormsArgs norms;
  auto* norms_cmd = app.add_subcommand("norms", "Fractional norms of a sampled path (CSV: t,value...)");
  norms_cmd->add_option("--in", norms.in)->required();
  norms_cmd->add_option("--alpha", norms.alpha)->capture_default_str();

  SystemArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Solve the coupled system (and the averaged one when known)");
  add_system_options(sim_cmd, sim);

  DriftArgs drift;
  auto* drift_cmd = app.add_subcommand("avg-drift", "Time-average estimate of the averaged drift");
  drift_cmd->add_option("--benchmark", drift.benchmark)->capture_default_str();
  drift_cmd->add_option("--s", drift.s)->capture_default_str();
  drift_cmd->add_option("--x", drift.x, "Slow state, comma separated")->delimiter(',');
  drift_cmd->add_option("--lambda", drift.lambda)->capture_default_str();
  drift_cmd->add_option("--step", drift.step)->capture_default_str();
  drift_cmd->add_option("--seed", drift.seed)->capture_default_str();

  TableArgs table;
  auto* table_cmd = app.add_subcommand("drift-table", "Tabulate the averaged drift on a lattice");
  table_cmd->add_option("--benchmark", table.benchmark)->capture_default_str();
  table_cmd->add_option("--s-nodes", table.s_nodes)->capture_default_str();
  table_cmd->add_option("--s-max", table.s_max)->capture_default_str();
  table_cmd->add_option("--x-min", table.x_min)->capture_default_str();
  table_cmd->add_option("--x-max", table.x_max)->capture_default_str();
  table_cmd->add_option("--x-nodes", table.x_nodes)->capture_default_str();
  table_cmd->add_option("--lambda", table.lambda)->capture_default_str();
  table_cmd->add_option("--step", table.step)->capture_default_str();
  table_cmd->add_option("--seed", table.seed)->capture_default_str();
  table_cmd->add_option("--out", table.out);

  GapArgs gap;
  gap.sys.steps = 200;
  auto* gap_cmd = app.add_subcommand("khasminskii-check", "Mean-square gap between v and the frozen auxiliary process");
  add_system_options(gap_cmd, gap.sys);
  gap_cmd->add_option("--delta", gap.delta)->capture_default_str();
  gap_cmd->add_option("--reps", gap.reps)->capture_default_str();

  ConvergeArgs conv;
  auto* conv_cmd = app.add_subcommand("converge", "Convergence sweep over epsilon; exit 0 iff acceptance is met");
  add_system_options(conv_cmd, conv.sys);
  conv_cmd->add_option("--epsilons", conv.epsilons, "Decreasing list, comma separated")->delimiter(',');
  conv_cmd->add_option("--reps", conv.reps)->capture_default_str();
  conv_cmd->add_option("--localization", conv.localization, "Level R of the stopping time (default: off)");
  conv_cmd->add_option("--drift", conv.drift)->check(CLI::IsMember({"closed-form", "table"}))->capture_default_str();
  conv_cmd->add_flag("--auto-refine", conv.auto_refine, "Halve the macro step until the discretization check passes");
  conv_cmd->add_flag("--skip-discretization-check", conv.skip_discretization);
  conv_cmd->add_option("--discretization-reps", conv.discretization_reps)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fbm_cmd) return run_fbm(fbm);
    if (*norms_cmd) return run_norms(norms);
    if (*sim_cmd) return run_simulate(sim);
    if (*drift_cmd) return run_avg_drift(drift);
    if (*table_cmd) return run_drift_table(table);
    if (*gap_cmd) return run_khasminskii(gap);
    if (*conv_cmd) return run_converge(conv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
