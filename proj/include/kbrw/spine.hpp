#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbrw/stats.hpp"
#include "kbrw/transform.hpp"

namespace kbrw {

/// Law of one spine step (S_1, nu_0): the e^{-v}-tilted V-increment of a
/// uniformly weighted child together with the size of its family.
class SpineLaw {
 public:
  /// Exact tilted distributions. Product families factorise into a
  /// size-biased child count and an independent tilted step; ExplicitFinite
  /// laws are tilted outcome by outcome.
  explicit SpineLaw(const VLaw& vlaw);

  const VLaw& vlaw() const { return vlaw_; }
  bool factorised() const { return factorised_; }
  bool gaussian() const { return gaussian_; }

  /// Tilted step atoms (value of S_1, probability); empty for Gaussian.
  const std::vector<Atom>& step_atoms() const { return step_atoms_; }
  /// Size-biased pmf k P(Z=k) / E[Z] (marginal of nu_0).
  const std::vector<CountProb>& nu_pmf() const { return nu_pmf_; }
  /// Tilted U-step probabilities matching step_atoms() (U = (psi* - S)/t*).
  std::vector<Atom> tilted_u_atoms() const;

  double mean() const { return mean_; }
  double second_moment() const { return second_moment_; }
  /// Gaussian parameters of S_1 for Gaussian steps.
  double gaussian_mean() const { return g_mean_; }
  double gaussian_stddev() const { return g_sd_; }

  /// E[e^{u S_1}] in closed form.
  double exponential_moment(double u) const;

  /// P{nu_0 > r}.
  double nu_tail(long long r) const;

  /// Law of S_1 conditioned on nu_0 <= r, as atoms (finite-support laws).
  std::vector<Atom> step_atoms_given_nu_at_most(long long r) const;

  struct Step {
    double increment;
    int nu;
  };
  Step sample(Stream& rng) const;

 private:
  VLaw vlaw_;
  bool factorised_ = true;
  bool gaussian_ = false;
  std::vector<Atom> step_atoms_;
  std::vector<double> step_u_;
  std::vector<double> step_cdf_;
  std::vector<CountProb> nu_pmf_;
  std::vector<double> nu_cdf_;
  double g_mean_ = 0.0;
  double g_sd_ = 0.0;
  double mean_ = 0.0;
  double second_moment_ = 0.0;

  // Outcome-level tilting for ExplicitFinite.
  struct TiltedOutcome {
    std::vector<double> increments;
    std::vector<double> child_cdf;
    int size;
  };
  std::vector<TiltedOutcome> outcomes_;
  std::vector<double> outcome_cdf_;
  std::vector<double> outcome_weights_;
  std::vector<double> outcome_probs_;
};

SpineLaw make_spine(const VLaw& vlaw);

struct SpinePoint {
  double position;  // S_i
  int nu;           // nu_{i-1}
};

/// S_1..S_n with the family sizes along the spine.
std::vector<SpinePoint> sample_spine_path(const SpineLaw& sp, int n, Stream& rng);

/// Bounded test functionals of a path (V(x_1..x_n), nu(x_0..x_{n-1})).
struct PathFunctional {
  enum class Kind {
    one,       // F = 1
    corridor,  // F = 1{S_i <= slope * i for all i}
    exp_end,   // F = exp(lambda * clamp(S_n, -bound, bound))
  };
  Kind kind = Kind::one;
  double slope = 0.0;
  double lambda = 0.0;
  double bound = 1.0;
  /// Bivariate form: multiply by 1{nu_{i-1} <= nu_bound for all i}.
  std::optional<int> nu_bound;

  double operator()(std::span<const double> positions, std::span<const int> nus) const;
  std::string name() const;

  static PathFunctional constant_one() { return {}; }
  static PathFunctional corridor_below(double slope) { return {Kind::corridor, slope, 0.0, 1.0, {}}; }
  static PathFunctional clamped_exponential(double lambda, double bound) {
    return {Kind::exp_end, 0.0, lambda, bound, {}};
  }
  PathFunctional with_nu_bound(int r) const {
    PathFunctional f = *this;
    f.nu_bound = r;
    return f;
  }
};

/// Parses "one", "corridor:<slope>", "exp:<lambda>:<bound>", optionally
/// suffixed by "|nu<=<r>".
PathFunctional parse_functional(const std::string& id);

struct CheckReport {
  SampleSummary tree;   // E sum_{|x|=n} e^{-V(x)} F(path), direct simulation
  SampleSummary spine;  // E F(S_1..S_n), spine sampling
  Interval tree_band;   // 3 standard errors
  Interval spine_band;
  bool vacuous = false;
  bool pass = false;
};

struct CheckOptions {
  int n = 4;
  std::size_t replicates = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::size_t node_cap = 1 << 22;  // per replicate, for the direct tree side
};

/// Two independent Monte Carlo estimates of the many-to-one identity; pass
/// when the 3-standard-error bands overlap.
CheckReport many_to_one_check(const SpineLaw& sp, const PathFunctional& f, const CheckOptions& opt);

/// One direct-tree replicate: sum over generation n of e^{-V(x)} F(path).
double tree_functional_sample(const VLaw& vlaw, const OffspringSampler& sampler, const PathFunctional& f,
                              int n, Stream& rng, std::size_t node_cap);

}  // namespace kbrw
