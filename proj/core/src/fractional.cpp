#include "slowfast/fractional.hpp"

#include "slowfast/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace slowfast {

namespace {

// int_{u0}^{u1} u^{a-1} du
double power_moment(double u0, double u1, double a) {
  if (u0 == 0.0) {
    if (a <= 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(u1, a) / a;
  }
  const double log_ratio = std::log1p((u1 - u0) / u0);
  if (a == 0.0) return log_ratio;
  return std::pow(u0, a) * std::expm1(a * log_ratio) / a;
}

// Hat-function weights on the cells [(l-1)h, l h] of a uniform grid:
// int phi(u) u^{-k} du = near[l] * phi((l-1)h) + far[l] * phi(l h).
// For l = 1 and k >= 1 the near weight diverges; callers only reach it with
// a vanishing near value, so it is stored as zero.
struct KernelTable {
  double step = 0.0;
  double k = 0.0;
  std::vector<double> near;
  std::vector<double> far;

  KernelTable(double h, std::size_t lags, double exponent) : step(h), k(exponent), near(lags + 1), far(lags + 1) {
    for (std::size_t l = 1; l <= lags; ++l) {
      const double u0 = static_cast<double>(l - 1) * h;
      const double u1 = static_cast<double>(l) * h;
      const double p2 = power_moment(u0, u1, 2.0 - k);
      if (l == 1) {
        far[l] = p2 / h;
        near[l] = k < 1.0 ? power_moment(0.0, u1, 1.0 - k) - far[l] : 0.0;
      } else {
        const double p1 = power_moment(u0, u1, 1.0 - k);
        far[l] = (p2 - u0 * p1) / h;
        near[l] = p1 - far[l];
      }
    }
  }

  double near_distance(std::size_t lag) const { return static_cast<double>(lag - 1) * step; }
};

// Row-major copy of the path so cell loops touch contiguous memory.
struct Rows {
  std::size_t points = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  explicit Rows(const Matrix& m)
      : points(static_cast<std::size_t>(m.rows())), dim(static_cast<std::size_t>(m.cols())), data(points * dim) {
    for (std::size_t i = 0; i < points; ++i)
      for (std::size_t c = 0; c < dim; ++c) data[i * dim + c] = m(i, c);
  }
  const double* row(std::size_t i) const { return data.data() + i * dim; }
};

double euclid(const double* v, std::size_t dim) {
  if (dim == 1) return std::abs(v[0]);
  double s = 0.0;
  for (std::size_t c = 0; c < dim; ++c) s += v[c] * v[c];
  return std::sqrt(s);
}

// int |D(u)| u^{-k} over cell `lag`, D linear from d0 (near) to d1 (far).
// Exact for scalar paths (split at the sign change). For vector paths the
// modulus is interpolated through the point of closest approach to zero,
// which bounds the true integral from above.
double modulus_cell(const KernelTable& kt, std::size_t lag, const double* d0, const double* d1, std::size_t dim) {
  const double u0 = kt.near_distance(lag);
  const double h = kt.step;
  if (dim == 1) {
    const double a = d0[0];
    const double b = d1[0];
    if ((a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0)) {
      const double lambda = a / (a - b);
      const double split = u0 + lambda * h;
      return detail::linear_kernel_integral(u0, split, std::abs(a), 0.0, kt.k) +
             detail::linear_kernel_integral(split, u0 + h, 0.0, std::abs(b), kt.k);
    }
    return kt.near[lag] * std::abs(a) + kt.far[lag] * std::abs(b);
  }
  const double na = euclid(d0, dim);
  const double nb = euclid(d1, dim);
  double den = 0.0, dot = 0.0;
  for (std::size_t c = 0; c < dim; ++c) {
    const double dd = d1[c] - d0[c];
    den += dd * dd;
    dot += d0[c] * dd;
  }
  if (den > 0.0) {
    const double lambda = -dot / den;
    if (lambda > 0.0 && lambda < 1.0) {
      double mm = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double v = d0[c] + lambda * (d1[c] - d0[c]);
        mm += v * v;
      }
      const double m = std::sqrt(mm);
      const double split = u0 + lambda * h;
      return detail::linear_kernel_integral(u0, split, na, m, kt.k) +
             detail::linear_kernel_integral(split, u0 + h, m, nb, kt.k);
    }
  }
  return kt.near[lag] * na + kt.far[lag] * nb;
}

void require_alpha_below_half(AlphaExponent alpha, const char* who) {
  if (!(alpha.value() < 0.5)) {
    std::ostringstream msg;
    msg << who << ": alpha=" << alpha.value() << " must lie in (0, 1/2)";
    throw std::domain_error(msg.str());
  }
}

// Difference integrals int_0^{t_i} |f(t_i) - f(s)| (t_i - s)^{-alpha-1} ds and
// the contribution of the last cell before each t_i.
struct DifferenceProfile {
  std::vector<double> integral;
  std::vector<double> last_cell;
};

DifferenceProfile difference_profile(const SampledFunction& f, double alpha) {
  const Rows rows(f.values());
  const std::size_t n = f.grid().n_steps();
  const std::size_t dim = rows.dim;
  const KernelTable kt(f.grid().step(), n, alpha + 1.0);
  DifferenceProfile out{std::vector<double>(n + 1, 0.0), std::vector<double>(n + 1, 0.0)};
  std::vector<double> d0(dim), d1(dim);
  for (std::size_t i = 1; i <= n; ++i) {
    const double* fi = rows.row(i);
    double sum = 0.0;
    for (std::size_t j = i; j-- > 0;) {
      const std::size_t lag = i - j;
      const double* near = rows.row(j + 1);
      const double* far = rows.row(j);
      for (std::size_t c = 0; c < dim; ++c) {
        d0[c] = fi[c] - near[c];
        d1[c] = fi[c] - far[c];
      }
      const double cell = modulus_cell(kt, lag, d0.data(), d1.data(), dim);
      if (lag == 1) out.last_cell[i] = cell;
      sum += cell;
    }
    out.integral[i] = sum;
  }
  return out;
}

}  // namespace

namespace detail {

double linear_kernel_integral(double u0, double u1, double phi0, double phi1, double k) {
  if (!(u1 > u0)) return 0.0;
  const double h = u1 - u0;
  const double p2 = power_moment(u0, u1, 2.0 - k);
  if (u0 == 0.0 && k >= 1.0) {
    if (phi0 != 0.0) return std::numeric_limits<double>::infinity();
    return phi1 * p2 / h;
  }
  const double p1 = power_moment(u0, u1, 1.0 - k);
  const double far = (p2 - u0 * p1) / h;
  return phi0 * (p1 - far) + phi1 * far;
}

}  // namespace detail

SampledFunction::SampledFunction(TimeGrid grid, Matrix values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.rows()) != grid_.size()) {
    throw std::invalid_argument("SampledFunction: row count must equal grid size");
  }
  if (values_.cols() < 1) throw std::invalid_argument("SampledFunction: dimension must be positive");
  if (!values_.allFinite()) throw std::invalid_argument("SampledFunction: values must be finite");
}

SampledFunction SampledFunction::subsampled(std::size_t factor) const {
  const TimeGrid coarse = grid_.coarsened(factor);
  Matrix out(coarse.size(), values_.cols());
  for (std::size_t k = 0; k < coarse.size(); ++k) out.row(k) = values_.row(k * factor);
  return SampledFunction(coarse, std::move(out));
}

AlphaExponent::AlphaExponent(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    std::ostringstream msg;
    msg << "AlphaExponent: alpha=" << alpha << " outside (0, 1); the singular kernel is not integrable";
    throw std::domain_error(msg.str());
  }
}

NormReport w_alpha_infty_norm(const SampledFunction& f, AlphaExponent alpha) {
  const DifferenceProfile prof = difference_profile(f, alpha.value());
  NormReport report;
  report.pointwise.resize(f.grid().size());
  for (std::size_t i = 0; i < report.pointwise.size(); ++i) {
    report.pointwise[i] = f.values().row(i).norm() + prof.integral[i];
    if (report.pointwise[i] > report.supremum) {
      report.supremum = report.pointwise[i];
      report.argmax = i;
    }
  }
  report.singular_tail_estimate = prof.last_cell[report.argmax];
  return report;
}

double w_alpha_1_norm(const SampledFunction& f, AlphaExponent alpha) {
  const Rows rows(f.values());
  const std::size_t n = f.grid().n_steps();
  const double h = f.grid().step();
  const KernelTable kt(h, n, alpha.value());
  double weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) weighted += modulus_cell(kt, j + 1, rows.row(j), rows.row(j + 1), rows.dim);

  const DifferenceProfile prof = difference_profile(f, alpha.value());
  double outer = 0.0;
  for (std::size_t i = 0; i < n; ++i) outer += 0.5 * h * (prof.integral[i] + prof.integral[i + 1]);
  return weighted + outer;
}

namespace {

struct PairSweep {
  double w_1ma = 0.0;
  double max_bracket = 0.0;
  std::vector<double> bracket_by_t;  // max over s < t_k of |bracket(s, t_k)|
};

// One pass over all grid pairs: the W^{1-alpha,infty} functional and the
// unnormalised Weyl bracket
//   (g(s) - g(t)) / (t - s)^{1-alpha} + (1 - alpha) int_s^t (g(s) - g(y)) / (y - s)^{2-alpha} dy.
PairSweep sweep_pairs(const SampledFunction& g, double alpha, bool want_bracket) {
  const Rows rows(g.values());
  const std::size_t n = g.grid().n_steps();
  const std::size_t dim = rows.dim;
  const double h = g.grid().step();
  const KernelTable kt(h, n, 2.0 - alpha);
  std::vector<double> lag_power(n + 1, 0.0);
  for (std::size_t l = 1; l <= n; ++l) lag_power[l] = std::pow(static_cast<double>(l) * h, 1.0 - alpha);

  PairSweep out;
  out.bracket_by_t.assign(n + 1, 0.0);
  std::vector<double> d0(dim), d1(dim), signed_sum(dim), bracket(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double* gi = rows.row(i);
    double abs_sum = 0.0;
    std::fill(signed_sum.begin(), signed_sum.end(), 0.0);
    for (std::size_t j = i; j < n; ++j) {
      const std::size_t lag = j - i + 1;
      const double* near = rows.row(j);
      const double* far = rows.row(j + 1);
      for (std::size_t c = 0; c < dim; ++c) {
        d0[c] = near[c] - gi[c];
        d1[c] = far[c] - gi[c];
      }
      abs_sum += modulus_cell(kt, lag, d0.data(), d1.data(), dim);
      const double value = euclid(d1.data(), dim) / lag_power[lag] + abs_sum;
      out.w_1ma = std::max(out.w_1ma, value);
      if (want_bracket) {
        for (std::size_t c = 0; c < dim; ++c) {
          signed_sum[c] += kt.near[lag] * d0[c] + kt.far[lag] * d1[c];
          bracket[c] = d1[c] / lag_power[lag] + (1.0 - alpha) * signed_sum[c];
        }
        const double mag = euclid(bracket.data(), dim);
        out.bracket_by_t[j + 1] = std::max(out.bracket_by_t[j + 1], mag);
        out.max_bracket = std::max(out.max_bracket, mag);
      }
    }
  }
  return out;
}

}  // namespace

double w_1ma_norm(const SampledFunction& g, AlphaExponent alpha) {
  require_alpha_below_half(alpha, "w_1ma_norm");
  return sweep_pairs(g, alpha.value(), false).w_1ma;
}

WeylReport weyl_lambda_alpha(const SampledFunction& g, AlphaExponent alpha) {
  require_alpha_below_half(alpha, "weyl_lambda_alpha");
  const double a = alpha.value();
  const PairSweep sweep = sweep_pairs(g, a, true);
  const double gamma_product = std::tgamma(a) * std::tgamma(1.0 - a);
  WeylReport report;
  report.w_1ma = sweep.w_1ma;
  report.lambda = sweep.max_bracket / gamma_product;
  report.bound = sweep.w_1ma / gamma_product;
  report.running_lambda.resize(sweep.bracket_by_t.size());
  double running = 0.0;
  for (std::size_t k = 0; k < sweep.bracket_by_t.size(); ++k) {
    running = std::max(running, sweep.bracket_by_t[k]);
    report.running_lambda[k] = running / gamma_product;
  }
  if (report.lambda > report.bound) {
    std::ostringstream msg;
    msg << "weyl_lambda_alpha: Lambda=" << report.lambda << " exceeds bound " << report.bound;
    throw std::logic_error(msg.str());
  }
  return report;
}

SampledFunction young_integral(const SampledFunction& f, const SampledFunction& g) {
  if (!(f.grid() == g.grid())) throw std::invalid_argument("young_integral: f and g must share a grid");
  const bool inner = f.dim() == g.dim();
  if (!inner && f.dim() != 1) {
    throw std::invalid_argument("young_integral: f must be scalar or match the dimension of g");
  }
  const double hf = estimate_holder_exponent(f);
  const double hg = estimate_holder_exponent(g);
  if (hf + hg <= 1.0) {
    std::clog << "young_integral: estimated Hoelder exponents " << hf << " + " << hg
              << " do not exceed 1; Riemann sums may not converge\n";
  }
  const std::size_t n = g.grid().n_steps();
  const Matrix& fv = f.values();
  const Matrix& gv = g.values();
  const Eigen::Index out_dim = inner ? 1 : static_cast<Eigen::Index>(g.dim());
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n + 1), out_dim);
  for (std::size_t j = 0; j < n; ++j) {
    const auto dg = gv.row(j + 1) - gv.row(j);
    if (inner) {
      out(j + 1, 0) = out(j, 0) + fv.row(j).dot(dg);
    } else {
      out.row(j + 1) = out.row(j) + fv(j, 0) * dg;
    }
  }
  return SampledFunction(g.grid(), std::move(out));
}

RefinedYoungIntegral young_integral_refined(const SampledFunction& f, const SampledFunction& g,
                                            std::size_t coarsest_steps) {
  if (!(f.grid() == g.grid())) throw std::invalid_argument("young_integral_refined: grid mismatch");
  const std::size_t n = g.grid().n_steps();
  if (coarsest_steps == 0 || n % coarsest_steps != 0 || !std::has_single_bit(n / coarsest_steps)) {
    throw std::invalid_argument("young_integral_refined: n_steps / coarsest_steps must be a power of two");
  }
  RefinedYoungIntegral out;
  for (std::size_t factor = n / coarsest_steps; factor >= 1; factor /= 2) {
    const SampledFunction fs = f.subsampled(factor);
    const SampledFunction gs = g.subsampled(factor);
    const SampledFunction integral = young_integral(fs, gs);
    out.resolutions.push_back(gs.grid().n_steps());
    out.estimates.push_back(integral.values()(integral.values().rows() - 1, 0));
  }
  const std::size_t levels = out.estimates.size();
  out.finest = out.estimates.back();
  out.extrapolated = out.finest;
  if (levels >= 2) out.last_increment = std::abs(out.finest - out.estimates[levels - 2]);
  if (levels >= 3) {
    const double s0 = out.estimates[levels - 3];
    const double s1 = out.estimates[levels - 2];
    const double s2 = out.estimates[levels - 1];
    const double denom = s2 - 2.0 * s1 + s0;
    if (std::abs(denom) > 1e-300) out.extrapolated = s2 - (s2 - s1) * (s2 - s1) / denom;
  }
  return out;
}

GrrReport grr_check(const SampledFunction& f, double p, double theta) {
  if (!(p >= 1.0)) throw std::invalid_argument("grr_check: p must be >= 1");
  if (!(theta * p > 1.0)) throw std::invalid_argument("grr_check: theta * p must exceed 1");
  const Rows rows(f.values());
  const std::size_t n = f.grid().n_steps();
  const std::size_t dim = rows.dim;
  const double h = f.grid().step();
  const double q = p * (1.0 - theta);

  GrrReport report;
  if (!(q > 0.0)) {
    report.flagged = true;
    report.double_integral = std::numeric_limits<double>::infinity();
    report.note = "theta >= 1: double integral diverges on the diagonal";
    return report;
  }

  std::vector<double> centre(n * dim), tmp(dim);
  double diagonal = 0.0;
  const double diag_weight = 2.0 * std::pow(h, q + 1.0) / (q * (q + 1.0));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t c = 0; c < dim; ++c) {
      centre[a * dim + c] = 0.5 * (rows.row(a)[c] + rows.row(a + 1)[c]);
      tmp[c] = (rows.row(a + 1)[c] - rows.row(a)[c]) / h;
    }
    diagonal += std::pow(euclid(tmp.data(), dim), p) * diag_weight;
  }
  // Exact double integral of |x - y|^{q-1} over two cells at lag l.
  std::vector<double> lag_weight(n, 0.0);
  for (std::size_t l = 1; l < n; ++l) {
    const double lo = static_cast<double>(l - 1) * h;
    const double mid = static_cast<double>(l) * h;
    const double hi = static_cast<double>(l + 1) * h;
    lag_weight[l] = detail::linear_kernel_integral(lo, mid, 0.0, h, 1.0 - q) +
                    detail::linear_kernel_integral(mid, hi, h, 0.0, 1.0 - q);
  }
  double off = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      for (std::size_t c = 0; c < dim; ++c) tmp[c] = centre[b * dim + c] - centre[a * dim + c];
      const double quotient = euclid(tmp.data(), dim) / (static_cast<double>(b - a) * h);
      off += std::pow(quotient, p) * lag_weight[b - a];
    }
  }
  report.double_integral = diagonal + 2.0 * off;

  const double holder = estimate_holder_exponent(f);
  if (!std::isfinite(report.double_integral)) {
    report.flagged = true;
    report.note = "double integral is not finite";
    return report;
  }
  if (theta >= holder) {
    report.flagged = true;
    std::ostringstream note;
    note << "theta=" << theta << " is not below the estimated Hoelder exponent " << holder
         << "; the continuum double integral may diverge";
    report.note = note.str();
  }
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = i + 1; j <= n; ++j) {
      for (std::size_t c = 0; c < dim; ++c) tmp[c] = rows.row(j)[c] - rows.row(i)[c];
      const double num = std::pow(euclid(tmp.data(), dim), p);
      if (num == 0.0) continue;
      const double den = std::pow(static_cast<double>(j - i) * h, theta * p - 1.0) * report.double_integral;
      const double ratio = den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
      report.ratio = std::max(report.ratio, ratio);
    }
  }
  if (!std::isfinite(report.ratio)) {
    report.flagged = true;
    report.note = "nonzero increment with vanishing double integral";
  }
  return report;
}

double estimate_holder_exponent(const SampledFunction& f) {
  const Rows rows(f.values());
  const std::size_t n = f.grid().n_steps();
  const double h = f.grid().step();
  // Keep at least 64 windows per lag so the maximum is taken over many increments.
  std::size_t max_lag = std::max<std::size_t>(n / 64, 1);
  if (max_lag < 4) max_lag = std::max<std::size_t>(n / 2, 1);
  std::vector<double> lags, maxima;
  std::vector<double> tmp(rows.dim);
  for (std::size_t lag = 1; lag <= max_lag; lag *= 2) {
    double m = 0.0;
    for (std::size_t i = 0; i + lag <= n; ++i) {
      for (std::size_t c = 0; c < rows.dim; ++c) tmp[c] = rows.row(i + lag)[c] - rows.row(i)[c];
      m = std::max(m, euclid(tmp.data(), rows.dim));
    }
    lags.push_back(static_cast<double>(lag) * h);
    maxima.push_back(m);
  }
  std::size_t positive = 0;
  for (double m : maxima) positive += m > 0.0 ? 1 : 0;
  if (positive < 2) return 1.0;
  return log_log_fit(lags, maxima).slope;
}

}  // namespace slowfast
