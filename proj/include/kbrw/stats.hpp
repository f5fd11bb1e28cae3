#pragma once

#include <cstddef>
#include <span>

namespace kbrw {

struct Interval {
  double low = 0.0;
  double high = 0.0;
  bool contains(double x) const { return low <= x && x <= high; }
};

/// Wilson score interval for a binomial proportion, z = 1.96 by default.
Interval wilson_interval(std::size_t successes, std::size_t trials,
                         double z = 1.959963984540054);

struct SampleSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double stderr_mean() const;
  /// mean +/- k standard errors
  Interval band(double k) const;
};

/// Two-pass summary; summation follows index order so the result is
/// reproducible bit for bit.
SampleSummary summarize(std::span<const double> values);

}  // namespace kbrw
