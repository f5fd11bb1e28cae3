#include "kbrw/quadrature.hpp"

#include <cmath>

namespace kbrw {
namespace {

struct Simpson {
  const std::function<double(double)>& f;
  int evaluations = 0;
  double error = 0.0;
  int min_accept_depth = 0;

  double eval(double x) {
    ++evaluations;
    return f(x);
  }

  double recurse(double a, double fa, double b, double fb, double m, double fm, double whole, double tol,
                 int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = eval(lm);
    const double frm = eval(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || (depth <= min_accept_depth && std::abs(delta) <= 15.0 * tol)) {
      error += std::abs(delta) / 15.0;
      return left + right + delta / 15.0;
    }
    return recurse(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           recurse(m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
  }
};

}  // namespace

QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b, double abs_tol,
                                  int max_depth) {
  Simpson s{f};
  // A few forced bisections keep a lucky three-point agreement from ending
  // the recursion on the first panel.
  s.min_accept_depth = max_depth - 4;
  const double fa = s.eval(a);
  const double fb = s.eval(b);
  const double m = 0.5 * (a + b);
  const double fm = s.eval(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  QuadratureResult r;
  r.value = s.recurse(a, fa, b, fb, m, fm, whole, abs_tol, max_depth);
  r.error_estimate = s.error;
  r.evaluations = s.evaluations;
  return r;
}

}  // namespace kbrw
