// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "slowfast/averaging.hpp"
#include "slowfast/fractional.hpp"
#include "slowfast/harness.hpp"
#include "slowfast/khasminskii.hpp"
#include "slowfast/noise.hpp"
#include "slowfast/parallel.hpp"
#include "slowfast/seeding.hpp"
#include "slowfast/stats.hpp"

using namespace slowfast;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "  ok   " : "  FAIL ") + what);
  }
  void info(const std::string& what) { notes.push_back("  info " + what); }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[192];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Vector vec(double x) { return Vector::Constant(1, x); }

// ---------------------------------------------------------------------------

Outcome fbm_law() {
  Outcome out;
  const std::size_t n = 512, reps = 10000;
  const TimeGrid grid(1.0, n);
  std::mt19937_64 pick(2024);
  std::uniform_int_distribution<std::size_t> index(1, n);
  for (double h : {0.6, 0.75, 0.9}) {
    const HurstParameter hurst(h);
    std::vector<Vector> paths(reps);
    parallel_for(reps, [&](std::size_t r) {
      paths[r] = sample_fbm(grid, hurst, 1, derive_seed(0xACCE1, r)).values().col(0);
    });

    std::size_t within = 0;
    double worst = 0.0;
    for (int p = 0; p < 10; ++p) {
      const std::size_t i = index(pick), j = index(pick);
      std::vector<double> prod(reps);
      for (std::size_t r = 0; r < reps; ++r) prod[r] = paths[r][i] * paths[r][j];
      const MeanError m = mean_error(prod);
      const double z = std::abs(m.mean - covariance_rh(grid.at(i), grid.at(j), hurst)) / m.std_error;
      worst = std::max(worst, z);
      if (z <= 3.0) ++within;
    }
    out.require(within == 10, fmt("H=%.2f covariance at 10 random pairs, worst |z| = %.2f", h, worst));

    std::vector<double> lags, vars;
    for (std::size_t lag = 1; lag <= n / 2; lag *= 2) {
      double acc = 0.0;
      std::size_t count = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t k = 0; k + lag <= n; k += lag) {
          const double d = paths[r][k + lag] - paths[r][k];
          acc += d * d;
          ++count;
        }
      }
      lags.push_back(static_cast<double>(lag) * grid.step());
      vars.push_back(acc / static_cast<double>(count));
    }
    const double slope = log_log_fit(lags, vars).slope;
    out.require(std::abs(slope - 2.0 * h) <= 0.1, fmt("H=%.2f increment-variance slope %.4f (target %.2f)", h, slope, 2 * h));
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome fractional_closed_forms() {
  Outcome out;
  const std::size_t n = 4096;
  const TimeGrid grid(1.0, n);
  const auto id = SampledFunction::tabulate(grid, [](double t) { return t; });
  const auto sq = SampledFunction::tabulate(grid, [](double t) { return t * t; });
  const auto cst = SampledFunction::tabulate(grid, [](double) { return -1.5; });
  const auto zero = SampledFunction::tabulate(grid, [](double) { return 0.0; });

  auto close = [&](double got, double want, const std::string& what) {
    const double rel = want == 0.0 ? std::abs(got) : std::abs(got - want) / std::abs(want);
    out.require(rel <= 0.01, what + fmt(": %.6f vs %.6f", got, want));
  };

  const double a = 0.4;
  const AlphaExponent al(a);
  close(w_alpha_infty_norm(cst, al).supremum, 1.5, "w_alpha_infty constant");
  close(w_alpha_infty_norm(id, al).supremum, 1.0 + 1.0 / (1.0 - a), "w_alpha_infty identity");
  close(w_alpha_infty_norm(sq, al).pointwise.back(), 1.0 + 1.0 / (1.0 - a) + 1.0 / ((1.0 - a) * (2.0 - a)),
        "w_alpha_infty t^2 at T");
  close(w_1ma_norm(cst, al), 0.0, "w_1ma constant");
  close(w_1ma_norm(id, al), 1.0 + 1.0 / a, "w_1ma identity");
  close(w_alpha_1_norm(zero, al), 0.0, "w_alpha_1 zero");
  close(w_alpha_1_norm(cst, al), 1.5 / (1.0 - a), "w_alpha_1 constant");
  close(w_alpha_1_norm(id, al), 1.0 / (2.0 - a) + 1.0 / ((1.0 - a) * (2.0 - a)), "w_alpha_1 identity");
  close(weyl_lambda_alpha(cst, al).lambda, 0.0, "weyl constant");
  const double weyl_id = weyl_lambda_alpha(id, al).lambda;
  close(weyl_id, std::sin(std::numbers::pi * a) / (std::numbers::pi * a), "weyl identity sin(pi a)/(pi a)");
  out.info(fmt("value 1/(a Gamma(1-a)) = %.4f is not the Weyl supremum of t (computed %.4f)",
               1.0 / (a * std::tgamma(1.0 - a)), weyl_id));

  std::size_t violations = 0;
  double worst = 0.0;
  std::vector<WeylReport> reports(100);
  parallel_for(reports.size(), [&](std::size_t s) {
    reports[s] = weyl_lambda_alpha(SampledFunction(sample_fbm(TimeGrid(1.0, 1024), HurstParameter(0.75), 1, 500 + s)),
                                   AlphaExponent(0.35));
  });
  for (const WeylReport& r : reports) {
    if (!(r.lambda <= r.bound)) ++violations;
    worst = std::max(worst, r.lambda / r.bound);
  }
  out.require(violations == 0, fmt("Lambda <= bound on 100 fBm seeds, max ratio %.3f", worst));
  return out;
}

// ---------------------------------------------------------------------------

Outcome young() {
  Outcome out;
  const std::size_t n = std::size_t{1} << 16;
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const SampledFunction g(sample_fbm(TimeGrid(1.0, n), HurstParameter(0.75), 1, 900 + s));
    const double gT = g.values()(static_cast<Eigen::Index>(n), 0), g0 = g.values()(0, 0);
    const double exact = 0.5 * (gT * gT - g0 * g0);
    const RefinedYoungIntegral r = young_integral_refined(g, g, 1024);
    const double err = std::abs(r.extrapolated - exact);
    worst = std::max(worst, err);
    if (err <= 1e-3) ++ok;
    out.info(fmt("seed %g: extrapolated error %.2e, left-point error at 2^16 %.2e", static_cast<double>(900 + s),
                 err, std::abs(r.finest - exact)));
  }
  out.require(ok == 5, fmt("chain rule for int g dg on 5 fBm paths, worst error %.2e", worst));

  std::size_t violations = 0;
  double ratio = 0.0;
  const TimeGrid grid(1.0, 1024);
  const AlphaExponent al(0.35);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const SampledFunction f(sample_fbm(grid, HurstParameter(0.75), 1, 2 * s + 7000));
    const SampledFunction g(sample_fbm(grid, HurstParameter(0.75), 1, 2 * s + 7001));
    const double lhs = std::abs(young_integral(f, g).values()(1024, 0));
    const double rhs = weyl_lambda_alpha(g, al).lambda * w_alpha_1_norm(f, al);
    if (!(lhs <= rhs)) ++violations;
    ratio = std::max(ratio, lhs / rhs);
  }
  out.require(violations == 0, fmt("|int f dg| <= Lambda ||f||_{a,1} on 100 pairs, max ratio %.3f", ratio));
  return out;
}

// ---------------------------------------------------------------------------

// Fast drift x - v with f2 = sqrt(2): frozen invariant law N(x, 1).
CoefficientSet ou_toward_x() {
  CoefficientSet c = load_benchmark("linear-ou").coefficients;
  c.b2 = [](double, const Vector& x, const Vector& v) { return Vector(x - v); };
  return c;
}

Outcome ergodicity() {
  Outcome out;
  const Benchmark ou = load_benchmark("linear-ou");

  ContractionOptions fine;
  fine.step = 1e-6;
  fine.record_every = 1000;
  const ContractionReport det = contraction_check(ou.coefficients, 0.0, vec(0.5), vec(2.0), vec(-1.0), 1.0, 1, 1, fine);
  const double discrete = 2.0 * std::log1p(-fine.step) / fine.step;
  out.require(std::abs(det.slope - discrete) <= 1e-9,
              fmt("linear-ou gap slope %.9f equals the discrete rate %.9f", det.slope, discrete));
  out.require(std::abs(det.slope + 2.0) <= 1e-5, fmt("linear-ou gap slope %.9f = -2 to 1e-5", det.slope));

  const ContractionReport cubic =
      contraction_check(load_benchmark("cubic").coefficients, 0.0, vec(0.0), vec(1.5), vec(-1.0), 3.0, 1000, 2);
  out.require(cubic.slope <= -1.9, fmt("cubic gap slope %.4f over 1000 pairs", cubic.slope));

  FrozenRunOptions opts;
  opts.step = 1e-3;
  for (double x : {-1.0, 0.5, 2.0}) {
    const EmpiricalMeasure m = estimate_invariant_measure(ou_toward_x(), 0.0, vec(x), 1000.0, 31, opts);
    const MeanError m1 = m.moment(0, 1), m2 = m.moment(0, 2), var = m.variance(0);
    out.require(std::abs(m1.mean - x) <= 3.0 * m1.std_error,
                fmt("x=%.1f mean %.4f +- %.4f", x, m1.mean, m1.std_error));
    out.require(std::abs(m2.mean - (x * x + 1.0)) <= 3.0 * m2.std_error,
                fmt("x=%.1f second moment %.4f +- %.4f", x, m2.mean, m2.std_error));
    out.require(std::abs(var.mean - 1.0) <= 3.0 * var.std_error,
                fmt("x=%.1f variance %.4f +- %.4f", x, var.mean, var.std_error));
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome ergodic_rate() {
  Outcome out;
  const Benchmark ou = load_benchmark("linear-ou");
  const Vector x = vec(1.0);
  const double truth = (*ou.closed_form)(0.0, x)[0];
  std::vector<double> lambdas{1e2, 1e3, 1e4}, mse;
  for (double lambda : lambdas) {
    std::vector<double> sq(200);
    parallel_for(sq.size(), [&](std::size_t r) {
      const double d = averaged_drift(ou.coefficients, 0.0, x, lambda, derive_seed(0x5A7E, r)).value[0] - truth;
      sq[r] = d * d;
    });
    mse.push_back(mean_error(sq).mean);
    out.info(fmt("Lambda=%g MSE %.3e", lambda, mse.back()));
  }
  const double slope = log_log_fit(lambdas, mse).slope;
  out.require(std::abs(slope + 1.0) <= 0.2, fmt("MSE slope %.4f", slope));
  return out;
}

// ---------------------------------------------------------------------------

Outcome khasminskii_gap() {
  Outcome out;
  const Benchmark ou = load_benchmark("linear-ou");
  SystemConfig cfg;
  cfg.epsilon = 0.05;
  cfg.macro_steps = 200;
  std::vector<double> deltas{0.2, 0.1, 0.05, 0.025}, sups;
  for (double d : deltas) {
    const GapReport g = auxiliary_gap(ou.coefficients, cfg, DiscretizationStep(d), 500, 0x6A9);
    sups.push_back(g.sup);
    out.info(fmt("delta=%.3f sup gap %.4e +- %.1e", d, g.sup, g.sup_std_error));
  }
  const double slope = log_log_fit(deltas, sups).slope;
  out.require(slope >= 0.8, fmt("sup-t gap slope in delta %.4f", slope));
  return out;
}

// ---------------------------------------------------------------------------

Outcome averaging_principle() {
  Outcome out;
  SweepConfig cfg;
  cfg.epsilons = {0.1, 0.05, 0.02, 0.01};
  cfg.reps = 200;
  cfg.system.hurst = 0.75;
  cfg.system.alpha = 0.35;
  cfg.system.horizon = 1.0;
  cfg.seed = 7;
  const ConvergenceReport r = run_convergence_sweep(load_benchmark("linear-ou"), cfg);
  for (const AggregateRow& a : r.aggregates) {
    out.info(fmt("eps=%.2f sup_t E||u-ubar||^2 = %.4e +- %.1e", a.epsilon, a.sup_t_mean_sq, a.std_error));
  }
  if (r.fit) out.info(fmt("rate slope %.3f [%.3f, %.3f]", r.fit->slope, r.fit->lower, r.fit->upper));
  out.info(fmt("discretization discrepancy %.2e vs reference %.2e", r.discretization.discrepancy,
               r.discretization.reference));
  const AcceptanceVerdict v = evaluate_acceptance(r);
  for (const auto& reason : v.reasons) out.info(reason);
  out.require(v.passed, "linear-ou sweep: decreasing by more than a stderr, last < 25% of first");

  const ConvergenceReport control = run_convergence_sweep(load_benchmark("frozen-constant"), cfg);
  double worst = 0.0;
  for (const AggregateRow& a : control.aggregates) worst = std::max(worst, a.sup_t_mean_sq);
  out.require(worst < 1e-6, fmt("frozen-constant control, max aggregate %.3e", worst));
  return out;
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  Outcome out;
#ifndef SLOWFAST_CLI_PATH
  out.require(false, "built without the command line tool");
  return out;
#else
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("slowfast_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string cli = SLOWFAST_CLI_PATH;
  const std::vector<std::pair<std::string, std::string>> cases{
      {"fbm", "fbm --hurst 0.7 --steps 512 --dim 2 --seed 11"},
      {"fbm-cholesky", "fbm --hurst 0.6 --steps 256 --method cholesky --seed 12"},
      {"simulate", "simulate --benchmark linear-ou --epsilon 0.02 --steps 128 --seed 13"},
      {"avg-drift", "avg-drift --benchmark cubic --x 0.5 --lambda 200 --seed 14"},
      {"drift-table", "drift-table --benchmark linear-ou --x-nodes 9 --lambda 50 --seed 15"},
      {"khasminskii", "khasminskii-check --benchmark linear-ou --epsilon 0.05 --delta 0.05 --reps 40 --seed 16"},
      {"converge", "converge --benchmark linear-ou --epsilons 0.1,0.05,0.02,0.01 --reps 20 --seed 17"},
  };
  for (const auto& [name, args] : cases) {
    std::string first;
    bool same = true, ran = true;
    for (int run = 0; run < 2; ++run) {
      const fs::path file = dir / (name + "_" + std::to_string(run) + ".csv");
      const std::string cmd = "\"" + cli + "\" " + args + " > \"" + file.string() + "\" 2>/dev/null";
      const int rc = std::system(cmd.c_str());
      if (rc == -1) ran = false;
      const std::string body = slurp(file);
      if (body.empty()) ran = false;
      if (run == 0) first = body;
      else same = same && body == first;
    }
    out.require(ran && same, name + ": repeated run is byte-identical");
  }
  // norms reads a CSV written by fbm
  const fs::path path = dir / "fbm_0.csv";
  std::string a, b;
  for (std::string* s : {&a, &b}) {
    const fs::path file = dir / "norms.txt";
    std::system(("\"" + cli + "\" norms --in \"" + path.string() + "\" --alpha 0.35 > \"" + file.string() + "\"").c_str());
    *s = slurp(file);
  }
  out.require(!a.empty() && a == b, "norms: repeated run is byte-identical");
  fs::remove_all(dir);
  return out;
#endif
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"fBm law", fbm_law},
      {"fractional closed forms", fractional_closed_forms},
      {"Young integral", young},
      {"frozen-equation ergodicity", ergodicity},
      {"ergodic-average rate", ergodic_rate},
      {"auxiliary-process gap", khasminskii_gap},
      {"averaging principle", averaging_principle},
      {"CLI determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("  FAIL exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& n : o.notes) std::cout << n << '\n';
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " ("
              << fmt("%.1f s", secs) << ")\n"
              << std::flush;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
