#pragma once

#include "kbrw/analysis.hpp"

namespace kbrw {

/// Boundary-case coordinates V(x) = -t* U(x) + psi(t*) |x|, so that
/// E sum e^{-V} = 1 and E sum V e^{-V} = 0 on the first generation.
struct VLaw {
  OffspringLaw base;
  CriticalProfile profile;
  double t_star = 0.0;
  double psi_tstar = 0.0;

  double mass_identity = 0.0;      // E sum e^{-V}, should be 1
  double centering_identity = 0.0; // E sum V e^{-V}, should be 0
  double delta1 = 1.0;             // witness for E sum e^{-(1+delta1) V} < inf
  double delta2 = 1.0;             // witness for E sum e^{delta2 V} < inf
  double moment_delta1 = 0.0;
  double moment_delta2 = 0.0;

  /// V-increment of a child displaced by u.
  double v_increment(double u) const { return psi_tstar - t_star * u; }
  /// V at generation j for accumulated displacement sum u_sum.
  double v_position(double u_sum, int generation) const {
    return psi_tstar * generation - t_star * u_sum;
  }
};

/// Builds the V-law and certifies both first-generation identities to 1e-12
/// in closed form. Throws std::logic_error when the profile does not belong
/// to the law.
VLaw make_vlaw(const OffspringLaw& law, const CriticalProfile& profile);
VLaw make_vlaw(const OffspringLaw& law);

/// U-barrier slope gamma - eps_U corresponds to V-barrier slope t* eps_U.
double barrier_map(double eps_U, const CriticalProfile& profile);
double barrier_unmap(double eps_V, const CriticalProfile& profile);

}  // namespace kbrw
