#include "slowfast/noise.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace slowfast {

namespace {

enum class NoiseKind : std::uint64_t { brownian = 1, fractional = 2 };

std::uint64_t noise_digest(NoiseKind kind, const TimeGrid& grid, std::size_t dim, std::uint64_t seed,
                           double hurst, FbmMethod method) {
  std::uint64_t h = static_cast<std::uint64_t>(kind);
  h = hash_combine(h, seed);
  h = hash_combine(h, grid.n_steps());
  h = hash_combine(h, hash_double(grid.horizon()));
  h = hash_combine(h, dim);
  h = hash_combine(h, hash_double(hurst));
  h = hash_combine(h, static_cast<std::uint64_t>(method));
  return h;
}

// The FFTW planner is not reentrant; execution on private arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

ComplexBuffer alloc_complex(std::size_t n) {
  auto* p = fftw_alloc_complex(n);
  if (p == nullptr) throw std::bad_alloc();
  return ComplexBuffer(p);
}

// Forward DFT of `in` into `out`, both of length n.
void forward_dft(std::size_t n, fftw_complex* in, fftw_complex* out) {
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

double fgn_autocovariance(std::size_t lag, double two_h) {
  const double k = static_cast<double>(lag);
  if (lag == 0) return 1.0;
  return 0.5 * (std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) + std::pow(k - 1.0, two_h));
}

}  // namespace

TimeGrid::TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
  if (n_steps == 0) throw std::invalid_argument("TimeGrid: n_steps must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("TimeGrid: horizon must be positive and finite");
  }
}

double TimeGrid::at(std::size_t k) const noexcept {
  if (k >= n_steps_) return horizon_;
  return horizon_ * static_cast<double>(k) / static_cast<double>(n_steps_);
}

std::vector<double> TimeGrid::points() const {
  std::vector<double> pts(size());
  for (std::size_t k = 0; k < pts.size(); ++k) pts[k] = at(k);
  return pts;
}

TimeGrid TimeGrid::refined(std::size_t factor) const {
  if (factor == 0) throw std::invalid_argument("TimeGrid::refined: factor must be positive");
  return TimeGrid(horizon_, n_steps_ * factor);
}

TimeGrid TimeGrid::coarsened(std::size_t factor) const {
  if (factor == 0 || n_steps_ % factor != 0) {
    throw std::invalid_argument("TimeGrid::coarsened: factor must divide n_steps");
  }
  return TimeGrid(horizon_, n_steps_ / factor);
}

HurstParameter::HurstParameter(double h) : h_(h) {
  if (!(h >= 0.5 && h < 1.0)) {
    std::ostringstream msg;
    msg << "HurstParameter: H=" << h << " outside [1/2, 1)";
    throw std::domain_error(msg.str());
  }
}

double covariance_rh(double s, double t, HurstParameter hurst) {
  if (s < 0.0 || t < 0.0) throw std::domain_error("covariance_rh: negative time");
  const double two_h = 2.0 * hurst.value();
  return 0.5 * (std::pow(s, two_h) + std::pow(t, two_h) - std::pow(std::abs(t - s), two_h));
}

std::string_view to_string(FbmMethod method) {
  switch (method) {
    case FbmMethod::circulant_embedding:
      return "circulant-embedding";
    case FbmMethod::cholesky:
      return "cholesky";
  }
  return "unknown";
}

NoisePath::NoisePath(TimeGrid grid, Matrix values, std::uint64_t seed, std::uint64_t digest)
    : grid_(std::move(grid)), values_(std::move(values)), seed_(seed), digest_(digest) {
  if (static_cast<std::size_t>(values_.rows()) != grid_.size()) {
    throw std::invalid_argument("NoisePath: row count must equal grid size");
  }
  if (values_.cols() < 1) throw std::invalid_argument("NoisePath: dimension must be positive");
}

Matrix NoisePath::subsample(std::size_t factor) const {
  const TimeGrid coarse = grid_.coarsened(factor);
  Matrix out(coarse.size(), values_.cols());
  for (std::size_t k = 0; k < coarse.size(); ++k) out.row(k) = values_.row(k * factor);
  return out;
}

BmPath::BmPath(TimeGrid grid, Matrix values, std::uint64_t seed)
    : NoisePath(grid, values, seed,
                noise_digest(NoiseKind::brownian, grid, static_cast<std::size_t>(values.cols()), seed, 0.5,
                             FbmMethod::circulant_embedding)) {}

BmPath BmPath::coarsened(std::size_t factor) const {
  return BmPath(grid().coarsened(factor), subsample(factor), seed(), hash_combine(digest(), factor));
}

FbmPath::FbmPath(TimeGrid grid, HurstParameter hurst, Matrix values, std::uint64_t seed, FbmMethod method)
    : NoisePath(grid, values, seed,
                noise_digest(NoiseKind::fractional, grid, static_cast<std::size_t>(values.cols()), seed,
                             hurst.value(), method)),
      hurst_(hurst),
      method_(method) {}

FbmPath FbmPath::coarsened(std::size_t factor) const {
  return FbmPath(grid().coarsened(factor), hurst_, subsample(factor), seed(), method_,
                 hash_combine(digest(), factor));
}

BmIncrementStream::BmIncrementStream(std::size_t dim, double step, std::uint64_t seed)
    : scale_(std::sqrt(step)) {
  if (dim == 0) throw std::invalid_argument("BmIncrementStream: dim must be positive");
  streams_.reserve(dim);
  for (std::size_t c = 0; c < dim; ++c) streams_.emplace_back(derive_seed(seed, c));
}

void BmIncrementStream::next(Vector& out) {
  out.resize(static_cast<Eigen::Index>(streams_.size()));
  for (std::size_t c = 0; c < streams_.size(); ++c) out[c] = scale_ * streams_[c]();
}

BmPath sample_bm(const TimeGrid& grid, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("sample_bm: dim must be positive");
  const double scale = std::sqrt(grid.step());
  Matrix values = Matrix::Zero(grid.size(), dim);
  for (std::size_t c = 0; c < dim; ++c) {
    NormalStream normal(derive_seed(seed, c));
    for (std::size_t k = 0; k < grid.n_steps(); ++k) values(k + 1, c) = values(k, c) + scale * normal();
  }
  return BmPath(grid, std::move(values), seed);
}

std::vector<double> circulant_eigenvalues(std::size_t n_steps, HurstParameter hurst) {
  const std::size_t m = 2 * n_steps;
  const double two_h = 2.0 * hurst.value();
  ComplexBuffer in = alloc_complex(m);
  ComplexBuffer out = alloc_complex(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t lag = j <= n_steps ? j : m - j;
    in[j][0] = fgn_autocovariance(lag, two_h);
    in[j][1] = 0.0;
  }
  forward_dft(m, in.get(), out.get());
  std::vector<double> eig(m);
  for (std::size_t j = 0; j < m; ++j) eig[j] = out[j][0];
  return eig;
}

CirculantFbmSampler::CirculantFbmSampler(const TimeGrid& grid, HurstParameter hurst)
    : grid_(grid), hurst_(hurst) {
  const std::vector<double> eig = circulant_eigenvalues(grid.n_steps(), hurst);
  const double max_eig = *std::max_element(eig.begin(), eig.end());
  const double min_eig = *std::min_element(eig.begin(), eig.end());
  min_relative_eigenvalue_ = min_eig / max_eig;
  valid_ = min_relative_eigenvalue_ >= -kClipTolerance;
  const double m = static_cast<double>(eig.size());
  sqrt_weights_.resize(eig.size());
  for (std::size_t j = 0; j < eig.size(); ++j) sqrt_weights_[j] = std::sqrt(std::max(eig[j], 0.0) / m);
}

FbmPath CirculantFbmSampler::sample(std::size_t dim, std::uint64_t seed) const {
  if (dim == 0) throw std::invalid_argument("sample_fbm: dim must be positive");
  if (!valid_) throw std::runtime_error("CirculantFbmSampler: embedding is not nonnegative definite");
  const std::size_t n = grid_.n_steps();
  const std::size_t m = sqrt_weights_.size();
  const double scale = std::pow(grid_.step(), hurst_.value());
  ComplexBuffer in = alloc_complex(m);
  ComplexBuffer out = alloc_complex(m);
  Matrix values = Matrix::Zero(grid_.size(), dim);
  for (std::size_t c = 0; c < dim; ++c) {
    NormalStream normal(derive_seed(seed, c));
    for (std::size_t j = 0; j < m; ++j) {
      const double re = normal();
      const double im = normal();
      in[j][0] = sqrt_weights_[j] * re;
      in[j][1] = sqrt_weights_[j] * im;
    }
    forward_dft(m, in.get(), out.get());
    for (std::size_t k = 0; k < n; ++k) values(k + 1, c) = values(k, c) + scale * out[k][0];
  }
  return FbmPath(grid_, hurst_, std::move(values), seed, FbmMethod::circulant_embedding);
}

CholeskyFbmSampler::CholeskyFbmSampler(const TimeGrid& grid, HurstParameter hurst) : grid_(grid), hurst_(hurst) {
  const std::size_t n = grid.n_steps();
  if (n > kMaxSteps) {
    std::ostringstream msg;
    msg << "CholeskyFbmSampler: n_steps=" << n << " exceeds limit " << kMaxSteps;
    throw std::invalid_argument(msg.str());
  }
  Matrix cov(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      cov(i, j) = covariance_rh(grid.at(i + 1), grid.at(j + 1), hurst);
      cov(j, i) = cov(i, j);
    }
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "CholeskyFbmSampler: covariance not positive definite (n_steps=" << n << ", H=" << hurst.value()
        << ", T=" << grid.horizon() << ")";
    throw std::runtime_error(msg.str());
  }
  lower_ = llt.matrixL();
}

FbmPath CholeskyFbmSampler::sample(std::size_t dim, std::uint64_t seed) const {
  if (dim == 0) throw std::invalid_argument("sample_fbm: dim must be positive");
  const std::size_t n = grid_.n_steps();
  Matrix values = Matrix::Zero(grid_.size(), dim);
  Vector z(n);
  for (std::size_t c = 0; c < dim; ++c) {
    NormalStream normal(derive_seed(seed, c));
    for (std::size_t k = 0; k < n; ++k) z[k] = normal();
    values.col(c).tail(n) = lower_.triangularView<Eigen::Lower>() * z;
  }
  return FbmPath(grid_, hurst_, std::move(values), seed, FbmMethod::cholesky);
}

FbmPath sample_fbm(const TimeGrid& grid, HurstParameter hurst, std::size_t dim, std::uint64_t seed,
                   FbmMethod method) {
  if (method == FbmMethod::circulant_embedding) {
    CirculantFbmSampler sampler(grid, hurst);
    if (sampler.valid()) return sampler.sample(dim, seed);
    std::clog << "sample_fbm: circulant embedding has relative eigenvalue " << sampler.min_relative_eigenvalue()
              << "; falling back to cholesky\n";
  }
  return CholeskyFbmSampler(grid, hurst).sample(dim, seed);
}

}  // namespace slowfast
