#include "slowfast/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "slowfast/parallel.hpp"
#include "slowfast/seeding.hpp"

namespace slowfast {

namespace {

std::size_t steps_for(double duration, double step, const char* who) {
  if (!(step > 0.0)) throw std::invalid_argument(std::string(who) + ": step must be positive");
  if (!(duration > 0.0)) throw std::invalid_argument(std::string(who) + ": duration must be positive");
  const double n = std::round(duration / step);
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

void check_frozen_args(const CoefficientSet& c, const Vector& x, const char* who) {
  if (static_cast<std::size_t>(x.size()) != c.dims.n) {
    throw std::invalid_argument(std::string(who) + ": x has the wrong dimension");
  }
}

bool out_of_guard(const Vector& v, double guard) { return !v.allFinite() || v.cwiseAbs().maxCoeff() > guard; }

[[noreturn]] void throw_blowup(const char* who, std::size_t step, const std::vector<Vector>& recorded, std::size_t dim) {
  Matrix rows(recorded.size(), dim);
  for (std::size_t i = 0; i < recorded.size(); ++i) rows.row(i) = recorded[i].transpose();
  std::ostringstream msg;
  msg << who << ": frozen trajectory left the blow-up guard at step " << step;
  throw FrozenBlowup(msg.str(), step, std::move(rows));
}

MeanError series_stats(const std::vector<double>& xs) {
  MeanError out = mean_error(xs);
  out.std_error = batch_means_error(xs);
  return out;
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(Matrix samples, double burn_in, double s, Vector x, std::uint64_t seed,
                                   std::size_t stride, double step)
    : samples_(std::move(samples)),
      burn_in_(burn_in),
      s_(s),
      x_(std::move(x)),
      seed_(seed),
      stride_(stride),
      step_(step) {
  if (samples_.rows() < 1) throw std::invalid_argument("EmpiricalMeasure: needs at least one sample");
  if (!samples_.allFinite()) throw std::invalid_argument("EmpiricalMeasure: samples must be finite");
}

MeanError EmpiricalMeasure::moment(std::size_t component, int p) const {
  std::vector<double> xs(count());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = std::pow(samples_(i, component), p);
  return series_stats(xs);
}

MeanError EmpiricalMeasure::variance(std::size_t component) const {
  const MeanError m1 = moment(component, 1);
  std::vector<double> xs(count());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = samples_(i, component) - m1.mean;
    xs[i] = d * d;
  }
  MeanError out = series_stats(xs);
  if (xs.size() > 1) out.mean *= static_cast<double>(xs.size()) / static_cast<double>(xs.size() - 1);
  return out;
}

std::size_t thinning_stride(const AssumptionMetadata& meta, double step) {
  if (meta.beta1 && *meta.beta1 > 0.0) {
    const double k = std::ceil((1.0 / *meta.beta1) / step);
    return std::max<std::size_t>(1, static_cast<std::size_t>(k));
  }
  return 10;
}

EmpiricalMeasure estimate_invariant_measure(const CoefficientSet& c, double s, const Vector& x, double total_time,
                                            std::uint64_t seed, const FrozenRunOptions& opts) {
  check_frozen_args(c, x, "estimate_invariant_measure");
  if (!(opts.burn_in_fraction >= 0.0 && opts.burn_in_fraction < 1.0)) {
    throw std::invalid_argument("estimate_invariant_measure: burn_in_fraction must lie in [0, 1)");
  }
  const std::size_t n = steps_for(total_time, opts.step, "estimate_invariant_measure");
  const auto burn = static_cast<std::size_t>(std::floor(opts.burn_in_fraction * static_cast<double>(n)));
  const std::size_t stride = thinning_stride(c.meta, opts.step);

  BmIncrementStream noise(c.dims.d3, opts.step, seed);
  Vector dw(c.dims.d3);
  Vector v = Vector::Zero(static_cast<Eigen::Index>(c.dims.m));
  std::vector<Vector> kept;
  for (std::size_t k = 1; k <= n; ++k) {
    noise.next(dw);
    v = fast_step(c, s, x, v, opts.step, 1.0, dw);
    if (out_of_guard(v, opts.guard)) throw_blowup("estimate_invariant_measure", k, kept, c.dims.m);
    if (k > burn && (k - burn) % stride == 0) kept.push_back(v);
  }
  if (kept.empty()) kept.push_back(v);
  Matrix samples(kept.size(), c.dims.m);
  for (std::size_t i = 0; i < kept.size(); ++i) samples.row(i) = kept[i].transpose();
  return EmpiricalMeasure(std::move(samples), static_cast<double>(burn) * opts.step, s, x, seed, stride, opts.step);
}

DriftEstimate averaged_drift(const CoefficientSet& c, double s, const Vector& x, double lambda, std::uint64_t seed,
                             const FrozenRunOptions& opts) {
  check_frozen_args(c, x, "averaged_drift");
  const std::size_t n = steps_for(lambda, opts.step, "averaged_drift");
  BmIncrementStream noise(c.dims.d3, opts.step, seed);
  Vector dw(c.dims.d3);
  Vector v = Vector::Zero(static_cast<Eigen::Index>(c.dims.m));
  std::vector<std::vector<double>> series(c.dims.n, std::vector<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const Vector b = c.b1(s, x, v);
    for (std::size_t i = 0; i < c.dims.n; ++i) series[i][k] = b[static_cast<Eigen::Index>(i)];
    noise.next(dw);
    v = fast_step(c, s, x, v, opts.step, 1.0, dw);
    if (out_of_guard(v, opts.guard)) throw_blowup("averaged_drift", k + 1, {v}, c.dims.m);
  }
  DriftEstimate out{Vector(c.dims.n), Vector(c.dims.n)};
  for (std::size_t i = 0; i < c.dims.n; ++i) {
    const MeanError me = series_stats(series[i]);
    out.value[static_cast<Eigen::Index>(i)] = me.mean;
    out.std_error[static_cast<Eigen::Index>(i)] = me.std_error;
  }
  return out;
}

DriftEstimate averaged_drift_ensemble(const CoefficientSet& c, double s, const Vector& x, double horizon,
                                      std::size_t paths, std::uint64_t seed, const FrozenRunOptions& opts) {
  check_frozen_args(c, x, "averaged_drift_ensemble");
  if (paths < 2) throw std::invalid_argument("averaged_drift_ensemble: needs at least two paths");
  const std::size_t n = steps_for(horizon, opts.step, "averaged_drift_ensemble");
  std::vector<Vector> finals(paths);
  parallel_for(paths, [&](std::size_t p) {
    BmIncrementStream noise(c.dims.d3, opts.step, derive_seed(seed, p));
    Vector dw(c.dims.d3);
    Vector v = Vector::Zero(static_cast<Eigen::Index>(c.dims.m));
    for (std::size_t k = 0; k < n; ++k) {
      noise.next(dw);
      v = fast_step(c, s, x, v, opts.step, 1.0, dw);
      if (out_of_guard(v, opts.guard)) throw_blowup("averaged_drift_ensemble", k + 1, {v}, c.dims.m);
    }
    finals[p] = c.b1(s, x, v);
  });
  DriftEstimate out{Vector(c.dims.n), Vector(c.dims.n)};
  std::vector<double> xs(paths);
  for (std::size_t i = 0; i < c.dims.n; ++i) {
    for (std::size_t p = 0; p < paths; ++p) xs[p] = finals[p][static_cast<Eigen::Index>(i)];
    const MeanError me = mean_error(xs);
    out.value[static_cast<Eigen::Index>(i)] = me.mean;
    out.std_error[static_cast<Eigen::Index>(i)] = me.std_error;
  }
  return out;
}

namespace {

void check_axis(const std::vector<double>& axis, const char* name) {
  if (axis.empty()) throw std::invalid_argument(std::string("DriftTable: empty ") + name + " lattice");
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i])) throw std::invalid_argument(std::string("DriftTable: non-finite ") + name + " node");
    if (i > 0 && !(axis[i] > axis[i - 1])) {
      throw std::invalid_argument(std::string("DriftTable: ") + name + " lattice must be strictly increasing");
    }
  }
}

// Cell index and weight of the upper node along one axis.
std::pair<std::size_t, double> locate(const std::vector<double>& axis, double q, const char* name) {
  if (axis.size() == 1) {
    if (q != axis.front()) {
      std::ostringstream msg;
      msg << "DriftTable: " << name << " = " << q << " is outside the single-node lattice {" << axis.front() << "}";
      throw std::out_of_range(msg.str());
    }
    return {0, 0.0};
  }
  if (!(q >= axis.front() && q <= axis.back())) {
    std::ostringstream msg;
    msg << "DriftTable: " << name << " = " << q << " is outside [" << axis.front() << ", " << axis.back() << "]";
    throw std::out_of_range(msg.str());
  }
  auto it = std::upper_bound(axis.begin(), axis.end(), q);
  std::size_t hi = static_cast<std::size_t>(it - axis.begin());
  if (hi == axis.size()) hi = axis.size() - 1;
  const std::size_t lo = hi - 1;
  return {lo, (q - axis[lo]) / (axis[hi] - axis[lo])};
}

}  // namespace

DriftTable::DriftTable(std::vector<double> s_lattice, std::vector<std::vector<double>> x_lattice, Matrix values,
                       Matrix std_errors)
    : s_(std::move(s_lattice)), x_(std::move(x_lattice)), values_(std::move(values)), std_errors_(std::move(std_errors)) {
  check_axis(s_, "s");
  if (x_.empty()) throw std::invalid_argument("DriftTable: x lattice needs one axis per slow coordinate");
  std::size_t nodes = s_.size();
  for (const auto& axis : x_) {
    check_axis(axis, "x");
    nodes *= axis.size();
  }
  if (static_cast<std::size_t>(values_.rows()) != nodes) {
    throw std::invalid_argument("DriftTable: value count does not match the lattice");
  }
  if (!values_.allFinite()) throw std::invalid_argument("DriftTable: values must be finite");
  if (std_errors_.rows() != values_.rows() || std_errors_.cols() != values_.cols()) {
    throw std::invalid_argument("DriftTable: std_errors shape must match values");
  }
}

std::pair<double, Vector> DriftTable::node(std::size_t index) const {
  Vector x(static_cast<Eigen::Index>(x_.size()));
  for (std::size_t a = x_.size(); a-- > 0;) {
    x[static_cast<Eigen::Index>(a)] = x_[a][index % x_[a].size()];
    index /= x_[a].size();
  }
  return {s_[index], x};
}

double DriftTable::max_std_error() const { return std_errors_.size() ? std_errors_.maxCoeff() : 0.0; }

Vector DriftTable::operator()(double s, const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != x_.size()) {
    throw std::invalid_argument("DriftTable: query has the wrong dimension");
  }
  const std::size_t axes = x_.size() + 1;
  std::vector<std::size_t> lo(axes), size(axes);
  std::vector<double> w(axes);
  std::tie(lo[0], w[0]) = locate(s_, s, "s");
  size[0] = s_.size();
  for (std::size_t a = 0; a < x_.size(); ++a) {
    std::tie(lo[a + 1], w[a + 1]) = locate(x_[a], x[static_cast<Eigen::Index>(a)], "x");
    size[a + 1] = x_[a].size();
  }
  Vector out = Vector::Zero(values_.cols());
  for (std::size_t corner = 0; corner < (std::size_t{1} << axes); ++corner) {
    double weight = 1.0;
    std::size_t index = 0;
    bool skip = false;
    for (std::size_t a = 0; a < axes; ++a) {
      const bool upper = (corner >> a) & 1U;
      if (upper && size[a] == 1) {
        skip = true;
        break;
      }
      weight *= upper ? w[a] : 1.0 - w[a];
      index = index * size[a] + lo[a] + (upper ? 1 : 0);
    }
    if (skip || weight == 0.0) continue;
    out += weight * values_.row(static_cast<Eigen::Index>(index)).transpose();
  }
  return out;
}

AveragedDrift DriftTable::as_function() const {
  return [table = *this](double t, const Vector& x) { return table(t, x); };
}

DriftTable build_drift_table(const CoefficientSet& c, std::vector<double> s_lattice,
                             std::vector<std::vector<double>> x_lattice, double lambda, std::uint64_t seed,
                             const FrozenRunOptions& opts) {
  if (!(lambda > 0.0)) throw std::invalid_argument("build_drift_table: lambda must be positive");
  if (x_lattice.size() != c.dims.n) throw std::invalid_argument("build_drift_table: need one x axis per slow coordinate");
  // Validate the lattice before spending time on estimates.
  std::size_t nodes = s_lattice.size();
  for (const auto& axis : x_lattice) nodes *= axis.size();
  DriftTable shape(s_lattice, x_lattice, Matrix::Zero(nodes, c.dims.n), Matrix::Zero(nodes, c.dims.n));

  Matrix values(nodes, c.dims.n);
  Matrix errors(nodes, c.dims.n);
  parallel_for(nodes, [&](std::size_t i) {
    const auto [s, x] = shape.node(i);
    const DriftEstimate est = averaged_drift(c, s, x, lambda, derive_seed(seed, i), opts);
    values.row(static_cast<Eigen::Index>(i)) = est.value.transpose();
    errors.row(static_cast<Eigen::Index>(i)) = est.std_error.transpose();
  });
  return DriftTable(std::move(s_lattice), std::move(x_lattice), std::move(values), std::move(errors));
}

ContractionReport contraction_check(const CoefficientSet& c, double s, const Vector& x, const Vector& y1,
                                    const Vector& y2, double horizon, std::size_t reps, std::uint64_t seed,
                                    const ContractionOptions& opts) {
  check_frozen_args(c, x, "contraction_check");
  if (static_cast<std::size_t>(y1.size()) != c.dims.m || static_cast<std::size_t>(y2.size()) != c.dims.m) {
    throw std::invalid_argument("contraction_check: initial states have the wrong dimension");
  }
  if (reps == 0) throw std::invalid_argument("contraction_check: reps must be positive");
  if (opts.record_every == 0) throw std::invalid_argument("contraction_check: record_every must be positive");
  const std::size_t n = steps_for(horizon, opts.step, "contraction_check");
  const std::size_t records = n / opts.record_every + 1;

  ContractionReport out;
  out.times.resize(records);
  for (std::size_t r = 0; r < records; ++r) out.times[r] = static_cast<double>(r * opts.record_every) * opts.step;

  std::vector<std::vector<double>> gaps(reps, std::vector<double>(records));
  parallel_for(reps, [&](std::size_t rep) {
    BmIncrementStream noise(c.dims.d3, opts.step, derive_seed(seed, rep));
    Vector dw(c.dims.d3);
    Vector a = y1;
    Vector b = y2;
    gaps[rep][0] = (a - b).squaredNorm();
    for (std::size_t k = 1; k <= (records - 1) * opts.record_every; ++k) {
      noise.next(dw);
      a = fast_step(c, s, x, a, opts.step, 1.0, dw);
      b = fast_step(c, s, x, b, opts.step, 1.0, dw);
      if (k % opts.record_every == 0) gaps[rep][k / opts.record_every] = (a - b).squaredNorm();
    }
  });

  out.mean_sq_gap.assign(records, 0.0);
  for (std::size_t rep = 0; rep < reps; ++rep) {
    for (std::size_t r = 0; r < records; ++r) out.mean_sq_gap[r] += gaps[rep][r];
  }
  for (double& g : out.mean_sq_gap) g /= static_cast<double>(reps);

  if (out.mean_sq_gap.front() == 0.0) {
    out.degenerate = true;
    out.slope = -std::numeric_limits<double>::infinity();
    if (c.meta.beta1) out.meets_beta1 = true;
    return out;
  }
  std::vector<double> t, logs;
  for (std::size_t r = 0; r < records; ++r) {
    const double g = out.mean_sq_gap[r];
    if (g > 0.0 && std::isfinite(g)) {
      t.push_back(out.times[r]);
      logs.push_back(std::log(g));
    }
  }
  if (t.size() < 2) throw std::runtime_error("contraction_check: fewer than two positive gap records to fit");
  const LinearFit fit = least_squares(t, logs);
  out.slope = fit.slope;
  out.slope_error = fit.slope_error;
  if (c.meta.beta1) out.meets_beta1 = out.slope <= -*c.meta.beta1 + opts.tolerance;
  return out;
}

}  // namespace slowfast
