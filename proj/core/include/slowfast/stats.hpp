#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace slowfast {

struct MeanError {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

MeanError mean_error(std::span<const double> xs);
double sample_variance(std::span<const double> xs);

// Standard error of the mean of a correlated series by non-overlapping batch
// means. Falls back to the iid estimate when there are too few samples.
double batch_means_error(std::span<const double> xs, std::size_t batches = 20);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_error = 0.0;
  std::size_t count = 0;
};

LinearFit least_squares(std::span<const double> x, std::span<const double> y);

// Slope of log(y) against log(x); entries with nonpositive y are dropped.
LinearFit log_log_fit(std::span<const double> x, std::span<const double> y);

}  // namespace slowfast
