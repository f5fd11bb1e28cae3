#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "kbrw/rng.hpp"

namespace kbrw {

/// Raised when a law or a parameter set breaks a model assumption. The
/// message names the violated assumption.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Atom {
  double value = 0.0;
  double prob = 0.0;
};

struct DiscreteStep {
  std::vector<Atom> atoms;
};

struct GaussianStep {
  double mean = 0.0;
  double stddev = 1.0;
};

using StepLaw = std::variant<DiscreteStep, GaussianStep>;

/// Two children, each displaced by an independent Bernoulli(p).
struct BinaryBernoulli {
  double p = 0.5;
};

struct CountProb {
  int count = 0;
  double prob = 0.0;
};

/// Child count Z ~ offspring_pmf, displacements i.i.d. ~ step and
/// independent of Z.
struct ProductLaw {
  std::vector<CountProb> offspring_pmf;
  StepLaw step;
};

struct Outcome {
  std::vector<double> displacements;
  double prob = 0.0;
};

/// Finite point process: one outcome is drawn atomically per parent.
struct ExplicitFinite {
  std::vector<Outcome> outcomes;
};

using OffspringLaw = std::variant<BinaryBernoulli, ProductLaw, ExplicitFinite>;

/// One sampled family: the U-increments of the children.
struct Realization {
  std::vector<double> displacements;
};

struct ValidationReport {
  bool accepted = false;
  std::string violated;         // empty when accepted
  double mean_children = 0.0;   // E[Z]
  double second_moment = 0.0;   // E[Z^2], finite for every supported family
  bool exponential_moments_finite = false;
  double delta_plus = 0.0;      // witnesses for the two-sided exponential moment
  double delta_minus = 0.0;
  double moment_plus = 0.0;     // E sum e^{delta_plus U}
  double moment_minus = 0.0;    // E sum e^{-delta_minus U}
};

/// Checks supercriticality, finite moments and non-degenerate displacement.
/// Never throws.
ValidationReport validate(const OffspringLaw& law);

/// Returns a copy with probabilities renormalised to sum to exactly one
/// (after the 1e-12 check) and zero-probability entries dropped. Throws
/// ValidationError if validate() rejects the law.
OffspringLaw validated(const OffspringLaw& law);

/// Exact first-moment intensity of a finite-support law: E sum_{|x|=1}
/// delta_{U(x)} as (position, weight) pairs. Empty for Gaussian steps.
std::vector<Atom> intensity_atoms(const OffspringLaw& law);

/// E[Z]
double mean_children(const OffspringLaw& law);

/// Child-count pmf; for ExplicitFinite it is aggregated over outcomes.
std::vector<CountProb> child_count_pmf(const OffspringLaw& law);

/// True when every displacement is an integer and the support is finite.
bool is_integer_lattice(const OffspringLaw& law);

bool has_gaussian_step(const OffspringLaw& law);

std::string law_name(const OffspringLaw& law);

struct NamedLaw {
  std::string name;
  OffspringLaw law;
};

/// Reference laws shipped with the library: binary Bernoulli at p = 0.3 and
/// at p0 = (2 - sqrt 3)/4, a product law with integer steps, a product law
/// with Gaussian steps, and an explicit point process.
std::vector<NamedLaw> library_laws();

/// Precomputed sampler for a validated law. Immutable and shareable; each
/// caller brings its own Stream.
class OffspringSampler {
 public:
  explicit OffspringSampler(const OffspringLaw& law);

  /// Overwrites `out` with a fresh family.
  void sample(Stream& rng, std::vector<double>& out) const;

  Realization sample(Stream& rng) const;

  /// Same as sample() but also reports which ExplicitFinite outcome was drawn
  /// (always 0 for product families).
  std::size_t sample_indexed(Stream& rng, std::vector<double>& out) const;

  const OffspringLaw& law() const { return law_; }

 private:
  double draw_step(Stream& rng) const;

  OffspringLaw law_;
  std::vector<double> count_cdf_;
  std::vector<int> counts_;
  std::vector<double> step_cdf_;
  std::vector<double> step_values_;
  std::optional<GaussianStep> gaussian_;
  double bernoulli_p_ = -1.0;
};

/// Inverse-CDF lookup over a cumulative table whose last entry is 1.
std::size_t pick_index(const std::vector<double>& cdf, double u);

}  // namespace kbrw
