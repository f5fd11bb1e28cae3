#pragma once

#include <optional>
#include <vector>

#include "kbrw/simulate.hpp"
#include "kbrw/transform.hpp"

namespace kbrw {

struct IntAtom {
  long value = 0;
  double prob = 0.0;
};

/// Integer-lattice view of a finite-support law together with the
/// boundary-case constants needed to place V-barriers on it.
struct LatticeLaw {
  bool product = true;
  std::vector<CountProb> offspring;  // pgf coefficients (product form)
  std::vector<IntAtom> steps;        // U-step pmf (product form)
  struct Family {
    std::vector<long> displacements;
    double prob;
  };
  std::vector<Family> families;  // explicit point process
  long min_step = 0;
  long max_step = 0;
  double t_star = 0.0;
  double psi_tstar = 0.0;

  /// Throws ValidationError for Gaussian or non-integer displacements.
  static LatticeLaw from(const VLaw& vlaw);

  /// Smallest admitted U-sum at generation j under a V-barrier of the given
  /// slope (ceil of the real threshold, consistent with barrier_admits).
  long lowest_admitted(double v_slope, int j) const;
};

/// P{exists |x| = n with every ancestor x_i (1 <= i <= n) on the admitted
/// side of the barrier}, by backward recursion over generations on the
/// lattice of U-sums. Exact up to rounding.
double exact_path_survival(const LatticeLaw& law, const BarrierSpec& barrier, int n);

/// Generation-n survival of the underlying Galton-Watson process.
double gw_survival_to(const LatticeLaw& law, int n);

struct CorridorProbability {
  double prob = 0.0;
  double log_prob = 0.0;  // -inf when the corridor is empty somewhere
};

/// P{lower[i-1] <= S_i <= upper[i-1] for 1 <= i <= n} for the integer walk
/// S_0 = 0 with the given step pmf; optionally also S_n in [window.first,
/// window.second]. Forward recursion with per-step renormalisation, so
/// log_prob stays accurate far below the double range.
CorridorProbability exact_corridor_walk(const std::vector<IntAtom>& step, const std::vector<long>& lower,
                                        const std::vector<long>& upper,
                                        std::optional<std::pair<long, long>> window = std::nullopt);

struct ConvergedRho {
  int n_used = 0;
  double rho = 0.0;
  double rho_half = 0.0;
};

/// Doubles n from n_start until |rho(n) - rho(n/2)| / rho(n) < rel_tol.
/// Throws std::runtime_error when n would exceed n_max.
ConvergedRho converged_rho(const LatticeLaw& law, double v_slope, int n_start = 100, double rel_tol = 0.01,
                           int n_max = 1 << 16);

/// Converts real-valued atoms to IntAtoms; throws ValidationError unless
/// every value is an integer.
std::vector<IntAtom> to_int_atoms(const std::vector<Atom>& atoms);

}  // namespace kbrw
