#pragma once

#include <functional>

namespace kbrw {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int evaluations = 0;
};

/// Adaptive Simpson rule with Richardson correction. The absolute tolerance
/// is split between halves on every subdivision; max_depth bounds the
/// recursion.
QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  double abs_tol = 1e-10, int max_depth = 50);

}  // namespace kbrw
