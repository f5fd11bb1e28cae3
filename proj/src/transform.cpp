#include "kbrw/transform.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kbrw {

VLaw make_vlaw(const OffspringLaw& law, const CriticalProfile& profile) {
  VLaw v;
  v.base = validated(law);
  v.profile = profile;
  v.t_star = profile.t_star;
  v.psi_tstar = profile.psi_tstar;

  const double ts = v.t_star;
  const double ps = v.psi_tstar;
  if (has_gaussian_step(v.base)) {
    const auto& g = std::get<GaussianStep>(std::get<ProductLaw>(v.base).step);
    const double ez = mean_children(v.base);
    const double s2 = g.stddev * g.stddev;
    // E[e^{a Y}] and E[Y e^{a Y}] for Y ~ N(mu, s2).
    auto mgf = [&](double a) { return std::exp(a * g.mean + 0.5 * s2 * a * a); };
    v.mass_identity = ez * mgf(ts) * std::exp(-ps);
    v.centering_identity = ez * std::exp(-ps) * mgf(ts) * (ps - ts * (g.mean + s2 * ts));
    v.moment_delta1 = ez * std::exp(-(1.0 + v.delta1) * ps) * mgf((1.0 + v.delta1) * ts);
    v.moment_delta2 = ez * std::exp(v.delta2 * ps) * mgf(-v.delta2 * ts);
  } else {
    for (const auto& a : intensity_atoms(v.base)) {
      const double inc = v.v_increment(a.value);
      const double w = a.prob * std::exp(-inc);
      v.mass_identity += w;
      v.centering_identity += w * inc;
      v.moment_delta1 += a.prob * std::exp(-(1.0 + v.delta1) * inc);
      v.moment_delta2 += a.prob * std::exp(v.delta2 * inc);
    }
  }
  if (std::abs(v.mass_identity - 1.0) > 1e-12 || std::abs(v.centering_identity) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "profile inconsistent with law: E sum e^{-V} = " << v.mass_identity
       << ", E sum V e^{-V} = " << v.centering_identity;
    throw std::logic_error(os.str());
  }
  return v;
}

VLaw make_vlaw(const OffspringLaw& law) { return make_vlaw(law, solve_tstar(law)); }

double barrier_map(double eps_U, const CriticalProfile& profile) {
  if (!(eps_U >= 0.0)) throw DomainError("barrier_map needs eps_U >= 0");
  return profile.t_star * eps_U;
}

double barrier_unmap(double eps_V, const CriticalProfile& profile) { return eps_V / profile.t_star; }

}  // namespace kbrw
