#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "kbrw/stats.hpp"
#include "kbrw/transform.hpp"

namespace kbrw {

/// Linear killing line. U_lower kills when U(x_j) < (gamma - slope) j;
/// V_upper kills when V(x_j) > slope j.
struct BarrierSpec {
  enum class Coordinate { U_lower, V_upper };
  Coordinate coordinate = Coordinate::V_upper;
  double slope = 0.0;

  static BarrierSpec in_V(double slope) { return {Coordinate::V_upper, slope}; }
  static BarrierSpec in_U(double slope) { return {Coordinate::U_lower, slope}; }
  /// Equivalent V-coordinate barrier.
  BarrierSpec to_V(const CriticalProfile& profile) const;
};

/// True when a particle at V-position v in generation j lies on or below the
/// line slope * j. Comparisons carry a relative slack of 1e-9 so that
/// positions reconstructed from lattice sums agree with the exact oracle.
bool barrier_admits(double slope, double v, int generation);

inline constexpr std::size_t kNoEscapeCap = std::numeric_limits<std::size_t>::max();
inline constexpr std::size_t kDefaultEscapeCap = 10000;

struct KilledRun {
  bool survived = false;
  bool cap_hit = false;
  std::vector<std::size_t> pop_trace;  // live particles per generation, from 0
};

/// Breadth-first killed branching random walk to depth n. Reaching
/// escape_cap live particles counts as survival (one-sided bias).
KilledRun run_killed_brw(const VLaw& vlaw, const OffspringSampler& sampler, const BarrierSpec& barrier, int n,
                         std::size_t escape_cap, Stream& rng);

struct SurvivalEstimate {
  int n = 0;
  double slope = 0.0;
  std::size_t replicates = 0;
  std::size_t survivors = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t cap_hits = 0;
};

struct McOptions {
  std::size_t replicates = 100000;
  std::size_t escape_cap = kDefaultEscapeCap;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

/// Monte Carlo estimate of rho(slope, n) with a Wilson 95% interval. Each
/// replicate owns the stream (seed, replicate index).
SurvivalEstimate estimate_rho(const VLaw& vlaw, double v_slope, int n, const McOptions& opt);

struct MKappa {
  double M = 0.0;
  double kappa_hat = 0.0;
  /// empirical P{max_{|x|<=j} V(x) <= M j}, j = 0..j_max
  std::vector<double> max_below;
  /// empirical P{Z_j > 0, max_{|x|<=j} V(x) <= M j}
  std::vector<double> alive_and_below;
  double grid_step = 0.0;
};

/// Smallest grid M with P{max_{|x|<=j} V <= M j} - 3 stderr >= 1/2 for all
/// 1 <= j <= j_max, together with the matching kappa estimate.
MKappa estimate_M_kappa(const VLaw& vlaw, int j_max, const McOptions& opt);

struct GwEmbedParams {
  int n = 0;
  double eps = 0.0;
  double alpha = 0.5;
  int L = 0;
  double M = 0.0;

  /// Throws ValidationError unless 0 < alpha < 1, n > L >= 1, eps >= 0 and
  /// (1 - alpha) eps L >= M (n - L).
  void check() const;
};

/// Generation-indexed family tree: parent links and V-positions.
struct FamilyTree {
  struct Node {
    int parent;
    double u;  // accumulated displacement
    double v;
  };
  std::vector<std::vector<Node>> levels;  // levels[0] holds the root
};

/// Samples a tree to `depth`. When `prune_slope` is finite, nodes at levels
/// 1..prune_until that lie above prune_slope * level are dropped with their
/// subtrees.
FamilyTree sample_tree(const VLaw& vlaw, const OffspringSampler& sampler, int depth, Stream& rng,
                       std::size_t node_cap, double prune_slope = std::numeric_limits<double>::infinity(),
                       int prune_until = 0);

/// #G_{n,eps}: particles x at level n with V(x_i) <= alpha eps i for i <= L
/// whose level-L ancestor has no descendant up to level n with
/// V(z) - V(x_L) > (1 - alpha) eps L.
std::size_t count_G(const FamilyTree& tree, const GwEmbedParams& params);

struct GwHistogram {
  std::map<std::size_t, std::size_t> counts;  // #G -> replicates
  std::size_t replicates = 0;
  std::size_t nonempty() const;
  double nonempty_fraction() const;
};

/// First generation of the embedded Galton-Watson tree, sampled i.i.d.
GwHistogram simulate_G(const VLaw& vlaw, const GwEmbedParams& params, const McOptions& opt,
                       std::size_t node_cap = 1 << 22);

}  // namespace kbrw
