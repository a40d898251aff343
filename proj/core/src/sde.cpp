#include "slowfast/sde.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "slowfast/seeding.hpp"

namespace slowfast {

namespace {

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols) {
    std::ostringstream msg;
    msg << "CoefficientSet: " << name << " returned " << m.rows() << "x" << m.cols() << ", expected " << rows << "x"
        << cols;
    throw ConfigError(msg.str());
  }
  if (!m.allFinite()) throw ConfigError(std::string("CoefficientSet: ") + name + " is not finite on the test lattice");
}

void require_length(const Vector& v, std::size_t len, const char* name) {
  require_shape(Matrix(v), len, 1, name);
}

std::string blowup_advice(double last_norm) {
  std::ostringstream msg;
  msg << "state exceeded the blow-up guard; last finite norm " << last_norm
      << "; consider truncate_coefficients with a level near " << std::max(1.0, std::ceil(last_norm));
  return msg.str();
}

bool exceeds(const Vector& v, double guard) { return !v.allFinite() || v.cwiseAbs().maxCoeff() > guard; }

void check_noise_dims(const CoefficientSet& c, const BmPath* w1, const BmPath* w2, const FbmPath* bh) {
  if (w1 && w1->dim() != c.dims.d2) throw ConfigError("W1 dimension does not match d2");
  if (w2 && w2->dim() != c.dims.d3) throw ConfigError("W2 dimension does not match d3");
  if (bh && bh->dim() != c.dims.d1) throw ConfigError("B^H dimension does not match d1");
}

}  // namespace

void CoefficientSet::validate() const {
  if (!b1 || !f1 || !g1 || !b2 || !f2) throw ConfigError("CoefficientSet: all five coefficients must be set");
  const double probes[] = {-2.0, 0.0, 1.5};
  for (double t : {0.0, 0.5}) {
    for (double px : probes) {
      for (double py : probes) {
        const Vector x = Vector::Constant(static_cast<Eigen::Index>(dims.n), px);
        const Vector y = Vector::Constant(static_cast<Eigen::Index>(dims.m), py);
        require_length(b1(t, x, y), dims.n, "b1");
        require_shape(f1(t, x), dims.n, dims.d2, "f1");
        require_shape(g1(t, x), dims.n, dims.d1, "g1");
        require_length(b2(t, x, y), dims.m, "b2");
        require_shape(f2(t, x, y), dims.m, dims.d3, "f2");
      }
    }
  }
}

Vector project_to_ball(const Vector& x, double radius) {
  const double norm = x.norm();
  if (norm <= radius) return x;
  return x * (radius / norm);
}

CoefficientSet truncate_coefficients(const CoefficientSet& c, double level) {
  if (!(level > 0.0)) throw std::invalid_argument("truncate_coefficients: level must be positive");
  CoefficientSet out = c;
  out.b1 = [b1 = c.b1, level](double t, const Vector& x, const Vector& y) {
    return b1(t, project_to_ball(x, level), project_to_ball(y, level));
  };
  out.b2 = [b2 = c.b2, level](double t, const Vector& x, const Vector& y) {
    return b2(t, project_to_ball(x, level), project_to_ball(y, level));
  };
  out.f1 = [f1 = c.f1, level](double t, const Vector& x) { return f1(t, project_to_ball(x, level)); };
  out.g1 = [g1 = c.g1, level](double t, const Vector& x) { return g1(t, project_to_ball(x, level)); };
  return out;
}

std::size_t SystemConfig::micro_factor() const {
  const double h = horizon / static_cast<double>(macro_steps);
  const double needed = std::ceil(stability_factor * h / epsilon);
  const std::size_t k = needed > 1.0 ? static_cast<std::size_t>(needed) : 1;
  return std::max<std::size_t>({k, micro_substeps_per_macro, 1});
}

void SystemConfig::validate(const CoefficientSet& c) const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("SystemConfig: epsilon must lie in (0, 1]");
  if (!(horizon > 0.0)) throw ConfigError("SystemConfig: horizon must be positive");
  if (macro_steps == 0) throw ConfigError("SystemConfig: macro_steps must be positive");
  if (!(stability_factor > 0.0)) throw ConfigError("SystemConfig: stability_factor must be positive");
  if (static_cast<std::size_t>(x0.size()) != c.dims.n) throw ConfigError("SystemConfig: x0 has wrong dimension");
  if (static_cast<std::size_t>(y0.size()) != c.dims.m) throw ConfigError("SystemConfig: y0 has wrong dimension");
  HurstParameter h(hurst);
  double upper = 0.5;
  if (c.meta.beta) upper = std::min(upper, *c.meta.beta);
  if (c.meta.gamma) upper = std::min(upper, *c.meta.gamma / 2.0);
  if (!(alpha > 1.0 - h.value() && alpha < upper)) {
    std::ostringstream msg;
    msg << "SystemConfig: alpha=" << alpha << " outside the admissible window (" << 1.0 - h.value() << ", " << upper
        << ")";
    throw ConfigError(msg.str());
  }
}

std::uint64_t SystemConfig::digest() const {
  std::uint64_t h = hash_double(epsilon);
  h = hash_combine(h, hash_double(horizon));
  for (Eigen::Index i = 0; i < x0.size(); ++i) h = hash_combine(h, hash_double(x0[i]));
  for (Eigen::Index i = 0; i < y0.size(); ++i) h = hash_combine(h, hash_double(y0[i]));
  h = hash_combine(h, hash_double(alpha));
  h = hash_combine(h, hash_double(hurst));
  h = hash_combine(h, macro_steps);
  h = hash_combine(h, micro_substeps_per_macro);
  h = hash_combine(h, hash_double(stability_factor));
  return h;
}

SolutionPath::SolutionPath(TimeGrid grid, Matrix values, PathRole role, Provenance provenance,
                           std::optional<BlowupInfo> blowup)
    : grid_(std::move(grid)),
      values_(std::move(values)),
      role_(role),
      provenance_(provenance),
      blowup_(std::move(blowup)) {
  if (static_cast<std::size_t>(values_.rows()) != grid_.size()) {
    throw std::invalid_argument("SolutionPath: row count must equal grid size");
  }
}

Vector fast_step(const CoefficientSet& c, double t, const Vector& x, const Vector& v, double h, double eps,
                 const Vector& dw) {
  return v + (h / eps) * c.b2(t, x, v) + (c.f2(t, x, v) * dw) / std::sqrt(eps);
}

SlowFastSolution solve_slow_fast(const CoefficientSet& c, const SystemConfig& cfg, const BmPath& w1,
                                 const BmPath& w2, const FbmPath& bh) {
  cfg.validate(c);
  check_noise_dims(c, &w1, &w2, &bh);
  const TimeGrid macro = cfg.macro_grid();
  if (!(w1.grid() == macro) || !(bh.grid() == macro)) {
    throw ConfigError("solve_slow_fast: W1 and B^H must live on the macro grid");
  }
  if (w2.grid().horizon() != macro.horizon() || w2.grid().n_steps() % macro.n_steps() != 0) {
    throw ConfigError("solve_slow_fast: W2 grid must refine the macro grid");
  }
  const std::size_t micro = w2.grid().n_steps() / macro.n_steps();
  const double h = macro.step();
  const double h_micro = w2.grid().step();
  if (h_micro > cfg.epsilon) {
    std::ostringstream msg;
    msg << "solve_slow_fast: micro step " << h_micro << " exceeds epsilon " << cfg.epsilon;
    throw ConfigError(msg.str());
  }

  const std::size_t rows = macro.size();
  Matrix u(rows, c.dims.n);
  Matrix v(rows, c.dims.m);
  u.row(0) = cfg.x0.transpose();
  v.row(0) = cfg.y0.transpose();
  Vector uk = cfg.x0;
  Vector vk = cfg.y0;
  Vector drift_mean(c.dims.n);
  std::optional<BlowupInfo> blowup;

  for (std::size_t k = 0; k < macro.n_steps() && !blowup; ++k) {
    const double tk = macro.at(k);
    drift_mean.setZero();
    // Running mean: exact when b1 is constant along the substeps.
    for (std::size_t j = 0; j < micro; ++j) {
      const std::size_t idx = k * micro + j;
      const double tj = w2.grid().at(idx);
      drift_mean += (c.b1(tj, uk, vk) - drift_mean) / static_cast<double>(j + 1);
      vk = fast_step(c, tj, uk, vk, h_micro, cfg.epsilon, w2.increment(idx));
    }
    Vector next = uk + h * drift_mean + c.f1(tk, uk) * w1.increment(k) + c.g1(tk, uk) * bh.increment(k);
    if (exceeds(next, cfg.blowup_guard) || exceeds(vk, cfg.blowup_guard)) {
      blowup = BlowupInfo{k + 1, blowup_advice(std::max(uk.norm(), v.row(k).norm()))};
      u.bottomRows(rows - k - 1).setConstant(std::numeric_limits<double>::quiet_NaN());
      v.bottomRows(rows - k - 1).setConstant(std::numeric_limits<double>::quiet_NaN());
      break;
    }
    uk = std::move(next);
    u.row(k + 1) = uk.transpose();
    v.row(k + 1) = vk.transpose();
  }

  const Provenance prov{w1.digest(), w2.digest(), bh.digest(), cfg.digest()};
  return SlowFastSolution{SolutionPath(macro, std::move(u), PathRole::slow, prov, blowup),
                          SolutionPath(macro, std::move(v), PathRole::fast, prov, blowup)};
}

SolutionPath solve_frozen_fast(const CoefficientSet& c, double s, const Vector& x, const Vector& y,
                               const TimeGrid& grid, const BmPath& w2) {
  check_noise_dims(c, nullptr, &w2, nullptr);
  if (!(w2.grid() == grid)) throw ConfigError("solve_frozen_fast: W2 must live on the solver grid");
  if (static_cast<std::size_t>(x.size()) != c.dims.n || static_cast<std::size_t>(y.size()) != c.dims.m) {
    throw ConfigError("solve_frozen_fast: state dimension mismatch");
  }
  if (c.meta.beta1 && *c.meta.beta1 > 0.0 && grid.step() > 0.1 / *c.meta.beta1) {
    std::clog << "solve_frozen_fast: step " << grid.step() << " is coarse relative to the relaxation time 1/beta1 = "
              << 1.0 / *c.meta.beta1 << "\n";
  }
  constexpr double kGuard = 1e10;
  const double h = grid.step();
  Matrix values(grid.size(), c.dims.m);
  values.row(0) = y.transpose();
  Vector vk = y;
  std::optional<BlowupInfo> blowup;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    Vector next = fast_step(c, s, x, vk, h, 1.0, w2.increment(k));
    if (exceeds(next, kGuard)) {
      blowup = BlowupInfo{k + 1, blowup_advice(vk.norm())};
      values.bottomRows(grid.size() - k - 1).setConstant(std::numeric_limits<double>::quiet_NaN());
      break;
    }
    vk = std::move(next);
    values.row(k + 1) = vk.transpose();
  }
  return SolutionPath(grid, std::move(values), PathRole::fast, Provenance{0, w2.digest(), 0, 0}, blowup);
}

SolutionPath solve_averaged(const AveragedDrift& drift, const CoefficientSet& c, const SystemConfig& cfg,
                            const BmPath& w1, const FbmPath& bh) {
  cfg.validate(c);
  check_noise_dims(c, &w1, nullptr, &bh);
  const TimeGrid macro = cfg.macro_grid();
  if (!(w1.grid() == macro) || !(bh.grid() == macro)) {
    throw ConfigError("solve_averaged: W1 and B^H must live on the macro grid");
  }
  const double h = macro.step();
  const std::size_t rows = macro.size();
  Matrix u(rows, c.dims.n);
  u.row(0) = cfg.x0.transpose();
  Vector uk = cfg.x0;
  std::optional<BlowupInfo> blowup;
  for (std::size_t k = 0; k < macro.n_steps(); ++k) {
    const double tk = macro.at(k);
    Vector next = uk + h * drift(tk, uk) + c.f1(tk, uk) * w1.increment(k) + c.g1(tk, uk) * bh.increment(k);
    if (exceeds(next, cfg.blowup_guard)) {
      blowup = BlowupInfo{k + 1, blowup_advice(uk.norm())};
      u.bottomRows(rows - k - 1).setConstant(std::numeric_limits<double>::quiet_NaN());
      break;
    }
    uk = std::move(next);
    u.row(k + 1) = uk.transpose();
  }
  const Provenance prov{w1.digest(), 0, bh.digest(), cfg.digest()};
  return SolutionPath(macro, std::move(u), PathRole::averaged, prov, blowup);
}

void require_shared_noise(const SolutionPath& a, const SolutionPath& b) {
  if (a.provenance().w1 != b.provenance().w1 || a.provenance().bh != b.provenance().bh) {
    throw std::logic_error("strong-error comparison requires identical W1 and B^H realisations");
  }
}

std::optional<std::size_t> stopping_time_tau(std::span<const double> u_norm, std::span<const double> ubar_norm,
                                             std::span<const double> lambda_path, double level) {
  if (u_norm.size() != ubar_norm.size() || u_norm.size() != lambda_path.size()) {
    throw std::invalid_argument("stopping_time_tau: length mismatch");
  }
  for (std::size_t k = 0; k < u_norm.size(); ++k) {
    if (u_norm[k] + ubar_norm[k] + lambda_path[k] >= level) return k;
  }
  return std::nullopt;
}

NoiseSet make_noise(const Dimensions& dims, const SystemConfig& cfg, const NoiseSeeds& seeds) {
  const TimeGrid macro = cfg.macro_grid();
  return NoiseSet{sample_bm(macro, dims.d2, seeds.w1), sample_bm(cfg.micro_grid(), dims.d3, seeds.w2),
                  sample_fbm(macro, HurstParameter(cfg.hurst), dims.d1, seeds.bh)};
}

SelfConvergence self_convergence(const CoefficientSet& c, const SystemConfig& cfg, const NoiseSeeds& seeds) {
  SystemConfig fine = cfg;
  fine.macro_steps = cfg.macro_steps * 4;
  fine.micro_substeps_per_macro = cfg.micro_factor();
  SystemConfig mid = cfg;
  mid.macro_steps = cfg.macro_steps * 2;
  mid.micro_substeps_per_macro = cfg.micro_factor();
  SystemConfig coarse = cfg;
  coarse.micro_substeps_per_macro = cfg.micro_factor();

  const NoiseSet noise = make_noise(c.dims, fine, seeds);
  const SlowFastSolution s4 = solve_slow_fast(c, fine, noise.w1, noise.w2, noise.bh);
  const SlowFastSolution s2 =
      solve_slow_fast(c, mid, noise.w1.coarsened(2), noise.w2.coarsened(2), noise.bh.coarsened(2));
  const SlowFastSolution s1 =
      solve_slow_fast(c, coarse, noise.w1.coarsened(4), noise.w2.coarsened(4), noise.bh.coarsened(4));

  SelfConvergence out;
  out.blown_up = s1.blown_up() || s2.blown_up() || s4.blown_up();
  if (out.blown_up) return out;
  for (std::size_t k = 0; k < cfg.macro_grid().size(); ++k) {
    const auto coarse_row = s1.slow.values().row(k);
    out.discrepancy = std::max(out.discrepancy, (coarse_row - s4.slow.values().row(4 * k)).norm());
    out.estimate = std::max(out.estimate, (coarse_row - s2.slow.values().row(2 * k)).norm());
  }
  return out;
}

namespace {

// Uniform point of the dyadic lattice 2^-8 Z within [-radius, radius].
class DyadicSampler {
 public:
  DyadicSampler(std::uint64_t seed, double radius)
      : engine_(seed), index_(-static_cast<long>(radius * 256.0), static_cast<long>(radius * 256.0)) {}

  Vector draw(std::size_t dim) {
    Vector v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(index_(engine_)) / 256.0;
    return v;
  }
  double time() { return static_cast<double>(std::abs(index_(engine_))) / 256.0; }

 private:
  std::mt19937_64 engine_;
  std::uniform_int_distribution<long> index_;
};

}  // namespace

LatticeCheck check_strict_monotonicity(const CoefficientSet& c, double beta1, std::size_t samples,
                                       std::uint64_t seed, double radius) {
  DyadicSampler sampler(seed, radius);
  LatticeCheck out;
  out.samples = samples;
  out.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = sampler.time();
    const Vector x = sampler.draw(c.dims.n);
    const Vector y1 = sampler.draw(c.dims.m);
    const Vector y2 = sampler.draw(c.dims.m);
    const Vector dy = y1 - y2;
    const double lhs =
        2.0 * dy.dot(c.b2(t, x, y1) - c.b2(t, x, y2)) + (c.f2(t, x, y1) - c.f2(t, x, y2)).squaredNorm();
    const double rhs = -beta1 * dy.squaredNorm();
    out.worst_margin = std::max(out.worst_margin, lhs - rhs);
    if (lhs > rhs) ++out.violations;
  }
  return out;
}

LatticeCheck check_strict_coercivity(const CoefficientSet& c, double beta_p, double constant, std::size_t samples,
                                     std::uint64_t seed, double radius) {
  DyadicSampler sampler(seed, radius);
  LatticeCheck out;
  out.samples = samples;
  out.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = sampler.time();
    const Vector x = sampler.draw(c.dims.n);
    const Vector y = sampler.draw(c.dims.m);
    const double lhs = 2.0 * y.dot(c.b2(t, x, y)) + c.f2(t, x, y).squaredNorm();
    const double rhs = -beta_p * y.squaredNorm() + constant * (1.0 + x.squaredNorm());
    out.worst_margin = std::max(out.worst_margin, lhs - rhs);
    if (lhs > rhs) ++out.violations;
  }
  return out;
}

}  // namespace slowfast
