#include "kbrw/stats.hpp"

#include <algorithm>
#include <cmath>

namespace kbrw {

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // Endpoints are clamped to the degenerate values exactly so the interval
  // always contains p even after rounding.
  double low = successes == 0 ? 0.0 : std::min(p, centre - half);
  double high = successes == trials ? 1.0 : std::max(p, centre + half);
  return {std::max(0.0, low), std::min(1.0, high)};
}

double SampleSummary::stderr_mean() const {
  return count == 0 ? 0.0 : std::sqrt(variance / static_cast<double>(count));
}

Interval SampleSummary::band(double k) const {
  const double half = k * stderr_mean();
  return {mean - half, mean + half};
}

SampleSummary summarize(std::span<const double> values) {
  SampleSummary s;
  s.count = values.size();
  if (s.count == 0) return s;
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(s.count);
  if (s.count > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.variance = sq / static_cast<double>(s.count - 1);
  }
  return s;
}

}  // namespace kbrw
