#include "kbrw/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace kbrw {

CgfEvaluator::CgfEvaluator(const OffspringLaw& law) : law_(validated(law)) {
  log_mean_children_ = std::log(mean_children(law_));
  if (has_gaussian_step(law_)) {
    const auto& g = std::get<GaussianStep>(std::get<ProductLaw>(law_).step);
    gaussian_ = true;
    gauss_mean_ = g.mean;
    gauss_var_ = g.stddev * g.stddev;
  } else {
    intensity_ = intensity_atoms(law_);
  }
}

PsiValue CgfEvaluator::operator()(double t) const {
  if (!(t > 0.0) || !(t < zeta_)) {
    std::ostringstream os;
    os << "psi evaluated outside (0, zeta): t = " << t;
    throw DomainError(os.str());
  }
  if (gaussian_) {
    return {log_mean_children_ + gauss_mean_ * t + 0.5 * gauss_var_ * t * t, gauss_mean_ + gauss_var_ * t,
            gauss_var_};
  }
  // Log-sum-exp with the largest exponent factored out keeps large t finite.
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& a : intensity_) top = std::max(top, t * a.value);
  double mass = 0.0;
  double first = 0.0;
  for (const auto& a : intensity_) {
    const double w = a.prob * std::exp(t * a.value - top);
    mass += w;
    first += w * a.value;
  }
  const double mean = first / mass;
  double var = 0.0;
  for (const auto& a : intensity_) {
    const double w = a.prob * std::exp(t * a.value - top);
    var += w * (a.value - mean) * (a.value - mean);
  }
  return {top + std::log(mass), mean, var / mass};
}

PsiValue psi_eval(const CgfEvaluator& ev, double t) { return ev(t); }

namespace {

CriticalProfile fill_profile(const CgfEvaluator& ev, double t, int iterations) {
  const PsiValue v = ev(t);
  CriticalProfile p;
  p.t_star = t;
  p.psi_tstar = v.psi;
  p.psi1_tstar = v.psi1;
  p.psi2_tstar = v.psi2;
  p.gamma = v.psi / t;
  p.sigma2 = t * t * v.psi2;
  p.beta_U = std::numbers::pi * std::sqrt(t * v.psi2) / std::numbers::sqrt2;
  p.beta_V = std::numbers::pi * std::sqrt(p.sigma2) / std::numbers::sqrt2;
  p.residual = t * v.psi1 - v.psi;
  p.iterations = iterations;
  return p;
}

}  // namespace

CriticalProfile solve_tstar(const CgfEvaluator& ev) {
  const auto& top_atoms = ev.intensity();
  if (!top_atoms.empty()) {
    // Bounded support: h(t) -> -log E[#children at the top], so a root
    // exists iff that expectation is below one.
    const double top_mass = top_atoms.back().prob;
    if (top_mass >= 1.0) {
      std::ostringstream os;
      os << "no critical point: expected number of children at the maximal displacement "
         << top_atoms.back().value << " is " << top_mass
         << " >= 1, so maximal labels percolate and survival does not vanish";
      throw NoCriticalPoint(os.str());
    }
  }
  auto h = [&ev](double t) {
    const PsiValue v = ev(t);
    return std::pair{t * v.psi1 - v.psi, t * v.psi2};
  };

  double lo = 1e-6;
  if (h(lo).first >= 0.0) throw DomainTooNarrow("h(t) already non-negative at the lower bracket 1e-6");
  double hi = 2.0 * lo;
  int doublings = 0;
  while (h(hi).first < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200 || !(hi < ev.zeta() - 1e-9))
      throw DomainTooNarrow("bracketing for t* reached the edge of the domain");
  }

  // Newton steps, falling back to bisection when they leave the bracket.
  double t = 0.5 * (lo + hi);
  int it = 0;
  for (; it < 500; ++it) {
    const auto [value, slope] = h(t);
    if (std::abs(value) < 1e-13) break;
    if (value < 0.0)
      lo = t;
    else
      hi = t;
    double next = slope > 0.0 ? t - value / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == t || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * t) {
      t = next;
      break;
    }
    t = next;
  }
  return fill_profile(ev, t, it);
}

CriticalProfile solve_tstar(const OffspringLaw& law) { return solve_tstar(CgfEvaluator(law)); }

double gamma_bs_residual(double p, double gamma) {
  auto xlogx_over = [](double x, double q) { return x == 0.0 ? 0.0 : x * std::log(x / q); };
  return xlogx_over(gamma, p) + xlogx_over(1.0 - gamma, 1.0 - p) - std::numbers::ln2;
}

double gamma_bs_solve(double p) {
  if (!(p > 0.0 && p < 0.5)) throw DomainError("gamma_bs_solve needs p in (0, 1/2)");
  double lo = p;
  double hi = 1.0;
  // Residual is -log 2 at gamma = p and log(1/(2p)) > 0 at gamma = 1.
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (gamma_bs_residual(p, mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return std::abs(gamma_bs_residual(p, lo)) < std::abs(gamma_bs_residual(p, hi)) ? lo : hi;
}

double beta_bs(double p) {
  if (!(p > 0.0 && p < 0.5)) throw DomainError("beta_bs needs p in (0, 1/2)");
  return solve_tstar(OffspringLaw{BinaryBernoulli{p}}).beta_U;
}

double beta_bs_via_gamma_derivative(double p0, double h) {
  const double dgamma = (gamma_bs_solve(p0 + h) - gamma_bs_solve(p0 - h)) / (2.0 * h);
  return std::numbers::pi / 4.0 * std::sqrt(dgamma / (1.0 - 2.0 * p0)) * std::log(1.0 / (4.0 * p0));
}

double special_p0() { return (2.0 - std::numbers::sqrt3) / 4.0; }

double aldous_rate(double p0) {
  if (std::abs(16.0 * p0 * (1.0 - p0) - 1.0) > 1e-9)
    throw DomainError("aldous_rate needs 16 p0 (1 - p0) = 1");
  return std::numbers::pi * std::log(1.0 / (4.0 * p0)) / (4.0 * std::sqrt(1.0 - 2.0 * p0));
}

}  // namespace kbrw
