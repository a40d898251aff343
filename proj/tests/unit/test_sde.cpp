#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "slowfast/fractional.hpp"
#include "slowfast/harness.hpp"
#include "slowfast/sde.hpp"
#include "slowfast/stats.hpp"

using namespace slowfast;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

// n = m = d = 1 set with every term switched off.
CoefficientSet zero_set() {
  CoefficientSet c;
  c.b1 = [](double, const Vector& x, const Vector&) { return Vector(Vector::Zero(x.size())); };
  c.f1 = [](double, const Vector&) { return scalar(0.0); };
  c.g1 = [](double, const Vector&) { return scalar(0.0); };
  c.b2 = [](double, const Vector&, const Vector& y) { return Vector(Vector::Zero(y.size())); };
  c.f2 = [](double, const Vector&, const Vector&) { return scalar(0.0); };
  return c;
}

SystemConfig small_config(double eps, std::size_t steps = 64) {
  SystemConfig cfg;
  cfg.epsilon = eps;
  cfg.macro_steps = steps;
  cfg.x0 = Vector::Constant(1, 1.0);
  cfg.y0 = Vector::Zero(1);
  return cfg;
}

}  // namespace

TEST(CoefficientSet, ValidateCatchesShapeErrors) {
  CoefficientSet c = zero_set();
  EXPECT_NO_THROW(c.validate());
  c.f1 = [](double, const Vector&) { return Matrix(Matrix::Zero(2, 1)); };
  EXPECT_THROW(c.validate(), ConfigError);
  c = zero_set();
  c.b2 = nullptr;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Truncation, ProjectionCases) {
  Vector x(2);
  x << 0.3, -0.4;
  EXPECT_TRUE(project_to_ball(x, 1.0) == x);
  x << 6.0, 8.0;  // |x| = 10 = 2n for n = 5
  const Vector p = project_to_ball(x, 5.0);
  EXPECT_NEAR(p[0], 3.0, 1e-15);
  EXPECT_NEAR(p[1], 4.0, 1e-15);
}

TEST(Truncation, InsideBallIsBitIdentical) {
  const Benchmark b = load_benchmark("cubic");
  const CoefficientSet t = truncate_coefficients(b.coefficients, 3.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.7, 1.7);
  for (int i = 0; i < 1000; ++i) {
    const Vector x = Vector::Constant(1, u(rng)), y = Vector::Constant(1, u(rng));
    EXPECT_TRUE(t.b1(0.1, x, y) == b.coefficients.b1(0.1, x, y));
    EXPECT_TRUE(t.b2(0.1, x, y) == b.coefficients.b2(0.1, x, y));
    EXPECT_TRUE(t.f1(0.1, x) == b.coefficients.f1(0.1, x));
    EXPECT_TRUE(t.g1(0.1, x) == b.coefficients.g1(0.1, x));
  }
}

TEST(Truncation, OutsideBallEvaluatesAtProjection) {
  const Benchmark b = load_benchmark("cubic");
  const double n = 2.0;
  const CoefficientSet t = truncate_coefficients(b.coefficients, n);
  const Vector x = Vector::Constant(1, 2.0 * n), y = Vector::Constant(1, 0.5);
  EXPECT_TRUE(t.b2(0.0, x, y) == b.coefficients.b2(0.0, Vector::Constant(1, n), y));
  EXPECT_THROW(truncate_coefficients(b.coefficients, 0.0), std::invalid_argument);
}

TEST(Truncation, ContinuousAcrossBoundary) {
  const Benchmark b = load_benchmark("linear-ou");
  const double n = 4.0;
  const CoefficientSet t = truncate_coefficients(b.coefficients, n);
  const Vector y = Vector::Constant(1, 0.3);
  const double lip = 1.0;
  const double below = t.b2(0.0, Vector::Constant(1, n * (1.0 - 1e-9)), y)[0];
  const double above = t.b2(0.0, Vector::Constant(1, n * (1.0 + 1e-9)), y)[0];
  EXPECT_LT(std::abs(below - above), 1e-6 * lip);
}

TEST(SystemConfig, ValidationAndMicroFactor) {
  const Benchmark b = load_benchmark("linear-ou");
  SystemConfig cfg = small_config(0.05, 100);
  EXPECT_NO_THROW(cfg.validate(b.coefficients));
  // ceil(10 * 0.01 / 0.05) = 2 < 4 substeps
  EXPECT_EQ(cfg.micro_factor(), 4u);
  cfg.epsilon = 0.001;
  EXPECT_EQ(cfg.micro_factor(), 100u);
  cfg.epsilon = 0.0;
  EXPECT_THROW(cfg.validate(b.coefficients), ConfigError);
  cfg.epsilon = 0.1;
  cfg.alpha = 0.2;  // below 1 - H = 0.25
  EXPECT_THROW(cfg.validate(b.coefficients), ConfigError);
  cfg.alpha = 0.35;
  cfg.x0 = Vector::Zero(2);
  EXPECT_THROW(cfg.validate(b.coefficients), ConfigError);
}

TEST(SolveSlowFast, PureFbmDriverTelescopes) {
  CoefficientSet c = zero_set();
  c.g1 = [](double, const Vector&) { return scalar(1.0); };
  const SystemConfig cfg = small_config(0.1);
  const NoiseSet noise = make_noise(c.dims, cfg, {1, 2, 3});
  const SlowFastSolution sol = solve_slow_fast(c, cfg, noise.w1, noise.w2, noise.bh);
  for (std::size_t k = 0; k < cfg.macro_grid().size(); ++k) {
    EXPECT_NEAR(sol.slow.values()(k, 0), 1.0 + noise.bh.values()(k, 0), 1e-13);
  }
  const SolutionPath ubar = solve_averaged([](double, const Vector& x) { return Vector(Vector::Zero(x.size())); },
                                           c, cfg, noise.w1, noise.bh);
  for (std::size_t k = 0; k < cfg.macro_grid().size(); ++k) {
    EXPECT_NEAR(ubar.values()(k, 0), 1.0 + noise.bh.values()(k, 0), 1e-13);
  }
}

TEST(SolveSlowFast, LinearDecayWithinStep) {
  CoefficientSet c = zero_set();
  c.b1 = [](double, const Vector& x, const Vector&) { return Vector(-x); };
  const SystemConfig cfg = small_config(0.1, 200);
  const NoiseSet noise = make_noise(c.dims, cfg, {4, 5, 6});
  const SlowFastSolution sol = solve_slow_fast(c, cfg, noise.w1, noise.w2, noise.bh);
  const SolutionPath ubar =
      solve_averaged([](double, const Vector& x) { return Vector(-x); }, c, cfg, noise.w1, noise.bh);
  const double h = cfg.macro_grid().step();
  for (std::size_t k = 0; k < cfg.macro_grid().size(); ++k) {
    const double exact = std::exp(-cfg.macro_grid().at(k));
    EXPECT_LT(std::abs(sol.slow.values()(k, 0) - exact), h);
    EXPECT_LT(std::abs(ubar.values()(k, 0) - exact), h);
  }
}

TEST(SolveSlowFast, SelfConvergenceOnLinearOu) {
  const Benchmark b = load_benchmark("linear-ou");
  SystemConfig cfg = small_config(0.05, 128);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const SelfConvergence sc = self_convergence(b.coefficients, cfg, replicate_seeds(11, s));
    ASSERT_FALSE(sc.blown_up);
    EXPECT_GT(sc.estimate, 0.0);
    EXPECT_LT(sc.discrepancy, 3.0 * sc.estimate);
  }
}

TEST(SolveAveraged, SelfConvergenceOnLinearOu) {
  const Benchmark b = load_benchmark("linear-ou");
  const SystemConfig cfg = small_config(0.05, 128);
  SystemConfig mid = cfg, fine = cfg;
  mid.macro_steps *= 2;
  fine.macro_steps *= 4;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const NoiseSet noise = make_noise(b.coefficients.dims, fine, replicate_seeds(12, s));
    const auto solve = [&](const SystemConfig& c, std::size_t f) {
      return solve_averaged(*b.closed_form, b.coefficients, c, noise.w1.coarsened(f), noise.bh.coarsened(f));
    };
    const SolutionPath u1 = solve(cfg, 4), u2 = solve(mid, 2), u4 = solve(fine, 1);
    double disc = 0.0, est = 0.0;
    for (std::size_t k = 0; k < cfg.macro_grid().size(); ++k) {
      disc = std::max(disc, std::abs(u1.values()(k, 0) - u4.values()(4 * k, 0)));
      est = std::max(est, std::abs(u1.values()(k, 0) - u2.values()(2 * k, 0)));
    }
    EXPECT_LT(disc, 3.0 * est);
  }
}

TEST(SolveSlowFast, MicroStepAboveEpsilonIsRejected) {
  const Benchmark b = load_benchmark("linear-ou");
  const SystemConfig cfg = small_config(0.001, 8);
  const NoiseSet noise = make_noise(b.coefficients.dims, small_config(0.1, 8), {1, 2, 3});
  // W2 on a grid far coarser than eps.
  const BmPath coarse_w2 = sample_bm(cfg.macro_grid(), 1, 2);
  EXPECT_THROW(solve_slow_fast(b.coefficients, cfg, noise.w1, coarse_w2, noise.bh), ConfigError);
}

TEST(SolveSlowFast, NoiseDimensionMismatchIsRejected) {
  const Benchmark b = load_benchmark("linear-ou");
  const SystemConfig cfg = small_config(0.1, 8);
  const NoiseSet noise = make_noise(b.coefficients.dims, cfg, {1, 2, 3});
  const BmPath w1_wide = sample_bm(cfg.macro_grid(), 2, 1);
  EXPECT_THROW(solve_slow_fast(b.coefficients, cfg, w1_wide, noise.w2, noise.bh), ConfigError);
}

TEST(SolveSlowFast, BlowUpIsFlagged) {
  CoefficientSet c = zero_set();
  c.b1 = [](double, const Vector& x, const Vector&) { return Vector(x.array().square().matrix()); };
  SystemConfig cfg = small_config(0.1, 64);
  cfg.x0 = Vector::Constant(1, 50.0);
  const NoiseSet noise = make_noise(c.dims, cfg, {1, 2, 3});
  const SlowFastSolution sol = solve_slow_fast(c, cfg, noise.w1, noise.w2, noise.bh);
  ASSERT_TRUE(sol.blown_up());
  const std::size_t idx = sol.slow.blowup()->index;
  EXPECT_FALSE(sol.slow.blowup()->advice.empty());
  EXPECT_TRUE(std::isnan(sol.slow.values()(idx, 0)));
  EXPECT_TRUE(std::isfinite(sol.slow.values()(idx - 1, 0)));
}

TEST(SolveSlowFast, FrozenFastVariableMakesEpsilonIrrelevant) {
  const Benchmark b = load_benchmark("frozen-constant");
  const SystemConfig c1 = small_config(0.5, 64);
  const NoiseSet noise = make_noise(b.coefficients.dims, c1, {7, 8, 9});
  const SlowFastSolution ref = solve_slow_fast(b.coefficients, c1, noise.w1, noise.w2, noise.bh);
  for (double eps : {0.1, 0.01, 0.001}) {
    const SystemConfig c = small_config(eps, 64);
    const BmPath w2 = sample_bm(c.micro_grid(), 1, 8);
    const SlowFastSolution sol = solve_slow_fast(b.coefficients, c, noise.w1, w2, noise.bh);
    EXPECT_TRUE(sol.slow.values() == ref.slow.values()) << eps;
    EXPECT_TRUE((sol.fast.values().array() == 0.0).all());
  }
}

TEST(SolveFrozenFast, OrnsteinUhlenbeckLaw) {
  CoefficientSet c = zero_set();
  c.b2 = [](double, const Vector& x, const Vector& v) { return Vector(x - v); };
  c.f2 = [](double, const Vector&, const Vector&) { return scalar(std::sqrt(2.0)); };
  const double x = 1.5, y = -0.5;
  const TimeGrid grid(1.0, 100);
  std::vector<double> finals(10000);
  for (std::size_t r = 0; r < finals.size(); ++r) {
    const SolutionPath p = solve_frozen_fast(c, 0.0, Vector::Constant(1, x), Vector::Constant(1, y), grid,
                                             sample_bm(grid, 1, 40000 + r));
    finals[r] = p.values()(100, 0);
  }
  const MeanError m = mean_error(finals);
  EXPECT_LT(std::abs(m.mean - (x + (y - x) * std::exp(-1.0))), 3.0 * m.std_error);
  std::vector<double> sq(finals.size());
  for (std::size_t r = 0; r < finals.size(); ++r) sq[r] = std::pow(finals[r] - m.mean, 2);
  const MeanError v = mean_error(sq);
  EXPECT_LT(std::abs(v.mean - (1.0 - std::exp(-2.0))), 3.0 * v.std_error);
}

TEST(SolveFrozenFast, CubicGradientFlowDecreases) {
  CoefficientSet c = zero_set();
  c.b2 = [](double, const Vector&, const Vector& v) { return Vector(-v.array().cube().matrix()); };
  const TimeGrid grid(5.0, 500);
  const SolutionPath p =
      solve_frozen_fast(c, 0.0, Vector::Zero(1), Vector::Constant(1, 2.0), grid, sample_bm(grid, 1, 1));
  for (std::size_t k = 1; k < grid.size(); ++k) {
    EXPECT_LT(std::abs(p.values()(k, 0)), std::abs(p.values()(k - 1, 0)));
    EXPECT_GT(p.values()(k, 0), 0.0);
  }
}

TEST(SolveFrozenFast, EquilibriumStaysPut) {
  CoefficientSet c = zero_set();
  c.b2 = [](double, const Vector&, const Vector& v) { return Vector(-v); };
  const TimeGrid grid(1.0, 50);
  const SolutionPath p =
      solve_frozen_fast(c, 0.0, Vector::Zero(1), Vector::Zero(1), grid, sample_bm(grid, 1, 3));
  EXPECT_TRUE(p.values().isZero(0.0));
}

TEST(SharedNoise, ProvenanceIsEnforced) {
  const Benchmark b = load_benchmark("linear-ou");
  const SystemConfig cfg = small_config(0.1, 32);
  const NoiseSet n1 = make_noise(b.coefficients.dims, cfg, {1, 2, 3});
  const NoiseSet n2 = make_noise(b.coefficients.dims, cfg, {1, 2, 4});
  const SlowFastSolution sol = solve_slow_fast(b.coefficients, cfg, n1.w1, n1.w2, n1.bh);
  const SolutionPath good = solve_averaged(*b.closed_form, b.coefficients, cfg, n1.w1, n1.bh);
  const SolutionPath bad = solve_averaged(*b.closed_form, b.coefficients, cfg, n2.w1, n2.bh);
  EXPECT_NO_THROW(require_shared_noise(sol.slow, good));
  EXPECT_THROW(require_shared_noise(sol.slow, bad), std::logic_error);
}

TEST(StoppingTime, Examples) {
  const std::vector<double> zero(4, 0.0);
  EXPECT_FALSE(stopping_time_tau(zero, zero, zero, 1.0).has_value());
  const std::vector<double> u{0.1, 0.3, 0.5, 0.7}, ub{0.1, 0.2, 0.4, 0.5}, lam{0.0, 0.1, 0.2, 0.3};
  EXPECT_EQ(stopping_time_tau(u, ub, lam, 1.0), std::optional<std::size_t>(2));
  EXPECT_THROW(stopping_time_tau(u, ub, std::vector<double>{1.0}, 1.0), std::invalid_argument);
}

TEST(StoppingTime, MonotoneInLevel) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(50), b(50), c(50);
    double acc = 0.0;
    for (std::size_t k = 0; k < 50; ++k) {
      acc += u(rng);
      a[k] = acc;
      b[k] = 0.5 * acc;
      c[k] = u(rng);
    }
    std::size_t last = 0;
    for (double level : {1.0, 5.0, 10.0, 30.0, 60.0}) {
      const auto tau = stopping_time_tau(a, b, c, level);
      const std::size_t idx = tau.value_or(50);
      EXPECT_GE(idx, last);
      last = idx;
    }
  }
}

TEST(APriori, MomentsDoNotGrowAsEpsilonShrinks) {
  const Benchmark b = load_benchmark("linear-ou");
  std::vector<double> norms, fast;
  for (double eps : {0.1, 0.05, 0.02}) {
    SystemConfig cfg = small_config(eps, 128);
    std::vector<double> n2, v2;
    for (std::size_t r = 0; r < 200; ++r) {
      const NoiseSet noise = make_noise(b.coefficients.dims, cfg, replicate_seeds(31, r));
      const SlowFastSolution sol = solve_slow_fast(b.coefficients, cfg, noise.w1, noise.w2, noise.bh);
      const double s = w_alpha_infty_norm(sol.slow.as_function(), AlphaExponent(cfg.alpha)).supremum;
      n2.push_back(s * s);
      v2.push_back(std::pow(sol.fast.values()(128, 0), 2));
    }
    norms.push_back(mean_error(n2).mean);
    fast.push_back(mean_error(v2).mean);
  }
  const auto spread = [](const std::vector<double>& xs) {
    return *std::max_element(xs.begin(), xs.end()) / *std::min_element(xs.begin(), xs.end());
  };
  EXPECT_LT(spread(norms), 1.3);
  EXPECT_LT(spread(fast), 1.3);
}

TEST(APriori, TimeIncrementsScaleLinearly) {
  const Benchmark b = load_benchmark("linear-ou");
  const SystemConfig cfg = small_config(0.05, 256);
  std::vector<std::vector<double>> sums(5);
  for (std::size_t r = 0; r < 200; ++r) {
    const NoiseSet noise = make_noise(b.coefficients.dims, cfg, replicate_seeds(32, r));
    const SlowFastSolution sol = solve_slow_fast(b.coefficients, cfg, noise.w1, noise.w2, noise.bh);
    for (std::size_t j = 0; j < 5; ++j) {
      const std::size_t lag = std::size_t{4} << j;
      sums[j].push_back(std::pow(sol.slow.values()(128 + lag, 0) - sol.slow.values()(128, 0), 2));
    }
  }
  std::vector<double> lags, msq;
  for (std::size_t j = 0; j < 5; ++j) {
    lags.push_back(static_cast<double>(std::size_t{4} << j) * cfg.macro_grid().step());
    msq.push_back(mean_error(sums[j]).mean);
  }
  EXPECT_GE(log_log_fit(lags, msq).slope, 0.9);
}
