#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "kbrw/models.hpp"

namespace kbrw {

/// The law has no t* with psi(t*) = t* psi'(t*): the maximal-displacement
/// labels percolate and the barrier survival probability does not vanish.
class NoCriticalPoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainTooNarrow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct PsiValue {
  double psi = 0.0;
  double psi1 = 0.0;
  double psi2 = 0.0;
};

/// Log-Laplace transform of the first generation,
/// psi(t) = log E sum_{|x|=1} e^{t U(x)}, with its first two derivatives.
class CgfEvaluator {
 public:
  explicit CgfEvaluator(const OffspringLaw& law);

  /// Closed-form psi, psi', psi'' at t in (0, zeta). Throws DomainError
  /// outside.
  PsiValue operator()(double t) const;

  /// Upper end of the domain; +inf for every supported family.
  double zeta() const { return zeta_; }
  double log_mean_children() const { return log_mean_children_; }
  const OffspringLaw& law() const { return law_; }
  const std::vector<Atom>& intensity() const { return intensity_; }

 private:
  OffspringLaw law_;
  std::vector<Atom> intensity_;  // finite-support families
  bool gaussian_ = false;
  double gauss_mean_ = 0.0;
  double gauss_var_ = 0.0;
  double log_mean_children_ = 0.0;
  double zeta_ = std::numeric_limits<double>::infinity();
};

PsiValue psi_eval(const CgfEvaluator& ev, double t);

struct CriticalProfile {
  double t_star = 0.0;
  double gamma = 0.0;       // psi(t*)/t*, the speed of the rightmost particle
  double psi_tstar = 0.0;
  double psi1_tstar = 0.0;
  double psi2_tstar = 0.0;
  double sigma2 = 0.0;      // (t*)^2 psi''(t*)
  double beta_V = 0.0;      // pi sigma / sqrt 2
  double beta_U = 0.0;      // pi sqrt(t* psi''(t*)) / sqrt 2
  double residual = 0.0;    // t* psi'(t*) - psi(t*)
  int iterations = 0;
};

/// Solves t psi'(t) = psi(t). h(t) = t psi' - psi increases from
/// -log E[Z], so the root is unique when it exists. Throws NoCriticalPoint
/// when E[#children at the top of the support] >= 1.
CriticalProfile solve_tstar(const CgfEvaluator& ev);
CriticalProfile solve_tstar(const OffspringLaw& law);

/// gamma solving gamma log(gamma/p) + (1-gamma) log((1-gamma)/(1-p)) = log 2
/// on (p, 1), by bisection. p must lie in (0, 1/2).
double gamma_bs_solve(double p);

/// Left side of the rate equation above minus log 2.
double gamma_bs_residual(double p, double gamma);

/// beta_U of BinaryBernoulli{p}.
double beta_bs(double p);

/// Alternative form of beta_bs at the special point p0:
/// (pi/4) sqrt(gamma'(p0)/(1-2 p0)) log(1/(4 p0)), with gamma' taken by a
/// central difference of gamma_bs_solve with step h.
double beta_bs_via_gamma_derivative(double p0, double h = 1e-6);

/// The p0 in (0, 1/2) with 16 p0 (1 - p0) = 1, i.e. (2 - sqrt 3)/4.
double special_p0();

/// pi log(1/(4 p0)) / (4 sqrt(1 - 2 p0)); requires 16 p0 (1-p0) = 1 within
/// 1e-9.
double aldous_rate(double p0);

}  // namespace kbrw
