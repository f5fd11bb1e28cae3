#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kbrw/oracle.hpp"
#include "kbrw/spine.hpp"

namespace kbrw {

/// Two boundary curves g1 < g2 on [0,1], stored as samples on a uniform
/// grid and linearly interpolated, plus the diffusion scale sigma.
class CorridorSpec {
 public:
  static constexpr int kSamples = 1024;

  CorridorSpec(const std::function<double(double)>& g1, const std::function<double(double)>& g2,
               double sigma = 1.0);
  /// Samples on a uniform grid of [0,1] (at least two points each, equal
  /// length).
  CorridorSpec(std::vector<double> g1_samples, std::vector<double> g2_samples, double sigma = 1.0);

  static CorridorSpec constant(double lower, double upper, double sigma = 1.0);
  static CorridorSpec linear(double lower0, double lower_slope, double upper0, double upper_slope,
                             double sigma = 1.0);

  double lower(double t) const { return interpolate(g1_, t); }
  double upper(double t) const { return interpolate(g2_, t); }
  double sigma() const { return sigma_; }
  CorridorSpec with_sigma(double sigma) const;

 private:
  static double interpolate(const std::vector<double>& samples, double t);
  void check() const;

  std::vector<double> g1_;
  std::vector<double> g2_;
  double sigma_;
};

/// -(pi^2 sigma^2 / 2) * int_0^1 dt / (g2 - g1)^2, adaptive Simpson to 1e-10.
double corridor_constant(const CorridorSpec& spec);

/// P{a <= W_t <= b for t in [0,1]; c <= W_1 <= d} for standard Brownian
/// motion, from the eigenfunction series with each sine integrated in closed
/// form. Terms are summed until their bound drops below 1e-14.
double ito_mckean_f(double a, double b, double c, double d);

/// Triangular array X^{(n)} for corridor experiments.
struct ArraySpec {
  enum class Family {
    lattice,            // fixed integer step law
    spine_conditioned,  // spine step given nu_0 <= r_n, r_n = floor(exp(n^{1/4}))
  };
  Family family = Family::lattice;
  std::vector<IntAtom> lattice_step;
  std::optional<SpineLaw> spine;
  double a_exponent = 1.0 / 3.0;

  static ArraySpec lattice(std::vector<IntAtom> step);
  static ArraySpec spine_conditioned(const SpineLaw& sp);
  /// Steps -1, 0, +1 with probability 1/3 each.
  static ArraySpec lazy_walk();

  double a_n(int n) const;
  static long long r_n(int n);
  /// Limiting variance sigma^2 of the family.
  double limit_variance() const;
  bool lattice_valued() const;
  std::string name() const;
};

/// Moment witnesses of the array at one n: E|X|^3 (eta = 1), the mean, the
/// ratio |E X| n / a_n that must vanish, the variance and P{nu_0 > r_n}.
struct ArrayWitness {
  int n = 0;
  double abs_moment = 0.0;
  double mean = 0.0;
  double mean_ratio = 0.0;
  double variance = 0.0;
  double nu_tail = 0.0;
};

ArrayWitness array_witness(const ArraySpec& arr, int n);

struct ExperimentRow {
  int n = 0;
  double a_n = 0.0;
  double prob = 0.0;
  double log_prob = 0.0;
  double scaled_log_prob = 0.0;  // (a_n^2 / n) log P
  double target = 0.0;
  double gap = 0.0;              // |scaled_log_prob - target|
  std::optional<double> endpoint_prob;
  std::optional<double> endpoint_scaled_log_prob;
  std::string method;            // "dp" or "mc"
  ArrayWitness witness;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  double target = 0.0;
  double endpoint_b = 0.0;
  bool conditions_ok = true;
  std::vector<std::string> warnings;
};

struct ExperimentOptions {
  bool endpoint_variant = false;
  /// Endpoint slack b > 0; defaults to (g2(1) - g1(1)) / 4.
  std::optional<double> endpoint_b;
  std::size_t mc_replicates = 1000000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

/// Corridor probabilities P{E_n} along n_list (exact DP for lattice
/// families, Monte Carlo otherwise) and their scaled logs next to the limit
/// constant computed with the family's limiting variance.
ExperimentResult triangular_experiment(const ArraySpec& arr, const CorridorSpec& spec, const std::vector<int>& n_list,
                                       const ExperimentOptions& opt = {});

/// Inward-rounded lattice corridor for the scaled walk S_i / a_n.
void lattice_corridor(const CorridorSpec& spec, int n, double a_n, std::vector<long>& lower,
                      std::vector<long>& upper);

}  // namespace kbrw
