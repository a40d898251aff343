#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "slowfast/fractional.hpp"
#include "slowfast/noise.hpp"
#include "slowfast/stats.hpp"

using namespace slowfast;

namespace {

// Monte-Carlo estimate of E[X_a X_b] over replicate paths (component 0).
template <typename Sampler>
MeanError product_moment(Sampler&& sample, std::size_t reps, std::size_t a, std::size_t b) {
  std::vector<double> xs(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const Matrix v = sample(r);
    xs[r] = v(a, 0) * v(b, 0);
  }
  return mean_error(xs);
}

}  // namespace

TEST(TimeGrid, EndpointsAndSpacing) {
  const TimeGrid g(0.3, 7);
  EXPECT_EQ(g.size(), 8u);
  EXPECT_EQ(g.at(0), 0.0);
  EXPECT_EQ(g.at(7), 0.3);
  const auto pts = g.points();
  for (std::size_t k = 1; k < pts.size(); ++k) EXPECT_GT(pts[k], pts[k - 1]);
  EXPECT_DOUBLE_EQ(g.step(), 0.3 / 7.0);
}

TEST(TimeGrid, RejectsEmptyAndBadHorizon) {
  EXPECT_THROW(TimeGrid(1.0, 0), std::invalid_argument);
  EXPECT_THROW(TimeGrid(0.0, 4), std::invalid_argument);
  EXPECT_THROW(TimeGrid(-1.0, 4), std::invalid_argument);
  EXPECT_THROW(TimeGrid(1.0, 6).coarsened(4), std::invalid_argument);
  EXPECT_EQ(TimeGrid(1.0, 8).coarsened(4), TimeGrid(1.0, 2));
  EXPECT_EQ(TimeGrid(1.0, 2).refined(4), TimeGrid(1.0, 8));
}

TEST(HurstParameter, Range) {
  EXPECT_NO_THROW(HurstParameter(0.75));
  EXPECT_TRUE(HurstParameter(0.5).degenerate());
  EXPECT_FALSE(HurstParameter(0.6).degenerate());
  EXPECT_THROW(HurstParameter(0.49), std::domain_error);
  EXPECT_THROW(HurstParameter(1.0), std::domain_error);
}

TEST(CovarianceRH, Examples) {
  const HurstParameter h(0.75);
  EXPECT_DOUBLE_EQ(covariance_rh(1.0, 1.0, h), 1.0);
  EXPECT_NEAR(covariance_rh(1.0, 2.0, h), std::sqrt(2.0), 1e-15);
  EXPECT_THROW(covariance_rh(-0.1, 1.0, h), std::domain_error);
}

TEST(CovarianceRH, BrownianCaseIsMin) {
  const HurstParameter h(0.5);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double s = u(rng), t = u(rng);
    EXPECT_NEAR(covariance_rh(s, t, h), std::min(s, t), 1e-14);
  }
}

TEST(CovarianceRH, SymmetryAndDiagonal) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 5.0), hd(0.5, 0.99);
  for (int i = 0; i < 500; ++i) {
    const HurstParameter h(hd(rng));
    const double s = u(rng), t = u(rng);
    EXPECT_EQ(covariance_rh(s, t, h), covariance_rh(t, s, h));
    EXPECT_NEAR(covariance_rh(t, t, h), std::pow(t, 2.0 * h.value()), 1e-12 * (1.0 + t * t));
  }
}

TEST(SampleBm, TerminalVarianceAndIndependentIncrements) {
  const TimeGrid grid(1.0, 2);
  constexpr std::size_t reps = 10000;
  std::vector<double> sq(reps), cross(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const BmPath p = sample_bm(grid, 1, 1000 + r);
    const double a = p.values()(1, 0), b = p.values()(2, 0) - a;
    sq[r] = p.values()(2, 0) * p.values()(2, 0);
    cross[r] = a * b;
  }
  const MeanError var = mean_error(sq);
  EXPECT_LT(std::abs(var.mean - 1.0), 3.0 * var.std_error);
  const MeanError cov = mean_error(cross);
  EXPECT_LT(std::abs(cov.mean), 3.0 * cov.std_error);
}

TEST(SampleBm, DeterministicAndStartsAtZero) {
  const TimeGrid grid(2.0, 64);
  const BmPath a = sample_bm(grid, 3, 17), b = sample_bm(grid, 3, 17), c = sample_bm(grid, 3, 18);
  EXPECT_TRUE(a.values() == b.values());
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_NE(a.digest(), c.digest());
  EXPECT_TRUE(a.values().row(0).isZero(0.0));
}

TEST(SampleBm, IncrementStreamMatchesPath) {
  const TimeGrid grid(1.0, 50);
  const BmPath p = sample_bm(grid, 2, 99);
  BmIncrementStream stream(2, grid.step(), 99);
  Vector dw(2);
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    stream.next(dw);
    // The path is a running sum; its differences agree to roundoff.
    EXPECT_NEAR(dw[0], p.increment(k)[0], 1e-14);
    EXPECT_NEAR(dw[1], p.increment(k)[1], 1e-14);
  }
}

TEST(SampleBm, CoarseningSubsamples) {
  const TimeGrid grid(1.0, 64);
  const BmPath p = sample_bm(grid, 1, 4);
  const BmPath c = p.coarsened(4);
  EXPECT_EQ(c.grid(), TimeGrid(1.0, 16));
  for (std::size_t k = 0; k < c.grid().size(); ++k) EXPECT_EQ(c.values()(k, 0), p.values()(4 * k, 0));
  EXPECT_NE(c.digest(), p.digest());
  EXPECT_EQ(c.digest(), p.coarsened(4).digest());
}

TEST(Circulant, EigenvaluesNonnegativeAcrossHurst) {
  for (double h : {0.5, 0.6, 0.75, 0.9, 0.99}) {
    for (std::size_t n : {1u, 2u, 17u, 256u, 4096u}) {
      const auto lambda = circulant_eigenvalues(n, HurstParameter(h));
      ASSERT_EQ(lambda.size(), 2 * n);
      double mx = 0.0, mn = 0.0;
      for (double l : lambda) {
        mx = std::max(mx, l);
        mn = std::min(mn, l);
      }
      EXPECT_GE(mn, -1e-12 * mx) << "H=" << h << " n=" << n;
    }
  }
}

TEST(SampleFbm, BrownianModeMatchesMin) {
  const TimeGrid grid(1.0, 8);
  const HurstParameter h(0.5);
  const CirculantFbmSampler sampler(grid, h);
  const auto sample = [&](std::size_t r) { return sampler.sample(1, 500 + r).values(); };
  for (auto [a, b] : {std::pair{2u, 5u}, std::pair{8u, 8u}, std::pair{3u, 7u}}) {
    const MeanError m = product_moment(sample, 10000, a, b);
    EXPECT_LT(std::abs(m.mean - std::min(grid.at(a), grid.at(b))), 3.0 * m.std_error) << a << "," << b;
  }
}

TEST(SampleFbm, VarianceAndCovarianceAtHalfThreeQuarters) {
  const TimeGrid grid(2.0, 2);
  const HurstParameter h(0.75);
  const CirculantFbmSampler sampler(grid, h);
  const auto sample = [&](std::size_t r) { return sampler.sample(1, 77 + r).values(); };
  const MeanError var = product_moment(sample, 10000, 1, 1);
  EXPECT_LT(std::abs(var.mean - 1.0), 3.0 * var.std_error);
  const MeanError cov = product_moment(sample, 10000, 1, 2);
  EXPECT_LT(std::abs(cov.mean - std::sqrt(2.0)), 3.0 * cov.std_error);
}

TEST(SampleFbm, IncrementExponentIsTwoH) {
  const TimeGrid grid(1.0, 256);
  const HurstParameter h(0.75);
  const CirculantFbmSampler sampler(grid, h);
  std::vector<double> lags, msq;
  std::vector<std::vector<double>> sums(8);
  constexpr std::size_t reps = 2000;
  for (std::size_t r = 0; r < reps; ++r) {
    const Matrix v = sampler.sample(1, 9000 + r).values();
    for (std::size_t j = 0; j < 8; ++j) {
      const std::size_t lag = std::size_t{1} << j;
      double s = 0.0;
      for (std::size_t k = 0; k + lag < grid.size(); k += lag) s += std::pow(v(k + lag, 0) - v(k, 0), 2);
      sums[j].push_back(s / static_cast<double>((grid.n_steps()) / lag));
    }
  }
  for (std::size_t j = 0; j < 8; ++j) {
    lags.push_back(static_cast<double>(std::size_t{1} << j) * grid.step());
    msq.push_back(mean_error(sums[j]).mean);
  }
  EXPECT_NEAR(log_log_fit(lags, msq).slope, 1.5, 0.05);
}

TEST(SampleFbm, CirculantAgreesWithCholeskyOracle) {
  const TimeGrid grid(1.0, 6);
  const HurstParameter h(0.8);
  const CirculantFbmSampler circ(grid, h);
  const CholeskyFbmSampler chol(grid, h);
  constexpr std::size_t reps = 20000;
  for (auto [a, b] : {std::pair{1u, 6u}, std::pair{3u, 4u}, std::pair{6u, 6u}}) {
    const MeanError mc = product_moment([&](std::size_t r) { return circ.sample(1, r).values(); }, reps, a, b);
    const MeanError mk = product_moment([&](std::size_t r) { return chol.sample(1, r + reps).values(); }, reps, a, b);
    const double exact = covariance_rh(grid.at(a), grid.at(b), h);
    EXPECT_LT(std::abs(mc.mean - exact), 3.0 * mc.std_error);
    EXPECT_LT(std::abs(mk.mean - exact), 3.0 * mk.std_error);
  }
}

TEST(SampleFbm, ComponentsAreIndependent) {
  const TimeGrid grid(1.0, 4);
  const CirculantFbmSampler sampler(grid, HurstParameter(0.7));
  std::vector<double> xs(10000);
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const FbmPath p = sampler.sample(2, 31 + r);
    xs[r] = p.values()(4, 0) * p.values()(4, 1);
  }
  const MeanError m = mean_error(xs);
  EXPECT_LT(std::abs(m.mean), 3.0 * m.std_error);
}

TEST(SampleFbm, DeterministicPerMethod) {
  const TimeGrid grid(1.0, 32);
  const HurstParameter h(0.75);
  for (FbmMethod method : {FbmMethod::circulant_embedding, FbmMethod::cholesky}) {
    const FbmPath a = sample_fbm(grid, h, 2, 5, method), b = sample_fbm(grid, h, 2, 5, method);
    EXPECT_TRUE(a.values() == b.values());
    EXPECT_EQ(a.digest(), b.digest());
    EXPECT_TRUE(a.values().row(0).isZero(0.0));
    EXPECT_EQ(a.method(), method);
  }
  EXPECT_NE(sample_fbm(grid, h, 1, 5, FbmMethod::cholesky).digest(),
            sample_fbm(grid, h, 1, 5, FbmMethod::circulant_embedding).digest());
}

TEST(SampleFbm, CholeskyLimit) {
  EXPECT_THROW(CholeskyFbmSampler(TimeGrid(1.0, CholeskyFbmSampler::kMaxSteps + 1), HurstParameter(0.75)),
               std::invalid_argument);
}

TEST(SampleFbm, HolderExponentOfFinePath) {
  const FbmPath p = sample_fbm(TimeGrid(1.0, 1u << 14), HurstParameter(0.75), 1, 2024);
  const double est = estimate_holder_exponent(SampledFunction(p));
  EXPECT_GT(est, 0.75 - 0.15);
  EXPECT_LT(est, 0.75 + 0.05);
}
