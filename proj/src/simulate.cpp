#include "kbrw/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kbrw/parallel.hpp"

namespace kbrw {

BarrierSpec BarrierSpec::to_V(const CriticalProfile& profile) const {
  if (coordinate == Coordinate::V_upper) return *this;
  return in_V(profile.t_star * slope);
}

bool barrier_admits(double slope, double v, int generation) {
  if (std::isinf(slope) && slope > 0.0) return true;
  const double line = slope * generation;
  return v <= line + 1e-9 * (1.0 + std::abs(v) + std::abs(line));
}

KilledRun run_killed_brw(const VLaw& vlaw, const OffspringSampler& sampler, const BarrierSpec& barrier, int n,
                         std::size_t escape_cap, Stream& rng) {
  if (barrier.coordinate != BarrierSpec::Coordinate::V_upper)
    throw std::invalid_argument("run_killed_brw expects a V-coordinate barrier");
  if (escape_cap < 1) throw std::invalid_argument("escape_cap must be at least 1");
  KilledRun run;
  std::vector<double> current{0.0};  // accumulated U of live particles
  std::vector<double> next;
  std::vector<double> family;
  run.pop_trace.push_back(1);
  for (int j = 1; j <= n; ++j) {
    next.clear();
    for (double u : current) {
      sampler.sample(rng, family);
      for (double d : family) {
        const double child = u + d;
        if (barrier_admits(barrier.slope, vlaw.v_position(child, j), j)) next.push_back(child);
      }
    }
    current.swap(next);
    run.pop_trace.push_back(current.size());
    if (current.empty()) return run;
    if (current.size() >= escape_cap && j < n) {
      run.survived = true;
      run.cap_hit = true;
      return run;
    }
  }
  run.survived = !current.empty();
  return run;
}

SurvivalEstimate estimate_rho(const VLaw& vlaw, double v_slope, int n, const McOptions& opt) {
  if (opt.replicates < 100) throw std::invalid_argument("estimate_rho needs at least 100 replicates");
  if (n < 1) throw std::invalid_argument("estimate_rho needs n >= 1");
  const OffspringSampler sampler(vlaw.base);
  const BarrierSpec barrier = BarrierSpec::in_V(v_slope);
  std::vector<unsigned char> survived(opt.replicates, 0);
  std::vector<unsigned char> capped(opt.replicates, 0);
  parallel_for(opt.replicates, opt.threads, [&](std::size_t i) {
    Stream rng = make_stream(opt.seed, i);
    const auto run = run_killed_brw(vlaw, sampler, barrier, n, opt.escape_cap, rng);
    survived[i] = run.survived;
    capped[i] = run.cap_hit;
  });
  SurvivalEstimate e;
  e.n = n;
  e.slope = v_slope;
  e.replicates = opt.replicates;
  e.survivors = static_cast<std::size_t>(std::count(survived.begin(), survived.end(), 1));
  e.cap_hits = static_cast<std::size_t>(std::count(capped.begin(), capped.end(), 1));
  e.p_hat = static_cast<double>(e.survivors) / static_cast<double>(e.replicates);
  const Interval ci = wilson_interval(e.survivors, e.replicates);
  e.ci_low = ci.low;
  e.ci_high = ci.high;
  return e;
}

FamilyTree sample_tree(const VLaw& vlaw, const OffspringSampler& sampler, int depth, Stream& rng,
                       std::size_t node_cap, double prune_slope, int prune_until) {
  FamilyTree tree;
  tree.levels.push_back({{-1, 0.0, 0.0}});
  std::vector<double> family;
  std::size_t nodes = 1;
  for (int j = 1; j <= depth; ++j) {
    const auto& parents = tree.levels.back();
    std::vector<FamilyTree::Node> level;
    for (std::size_t p = 0; p < parents.size(); ++p) {
      sampler.sample(rng, family);
      for (double d : family) {
        const double u = parents[p].u + d;
        const double v = vlaw.v_position(u, j);
        if (j <= prune_until && !barrier_admits(prune_slope, v, j)) continue;
        level.push_back({static_cast<int>(p), u, v});
      }
    }
    nodes += level.size();
    if (nodes > node_cap) throw std::runtime_error("tree sampling exceeded the node cap");
    tree.levels.push_back(std::move(level));
  }
  return tree;
}

void GwEmbedParams::check() const {
  std::ostringstream os;
  if (!(alpha > 0.0 && alpha < 1.0)) os << "alpha must lie in (0,1); ";
  if (!(L >= 1 && n > L)) os << "need n > L >= 1; ";
  if (!(eps >= 0.0)) os << "eps must be non-negative; ";
  if (!((1.0 - alpha) * eps * L >= M * (n - L) - 1e-12))
    os << "(1 - alpha) eps L >= M (n - L) fails: " << (1.0 - alpha) * eps * L << " < " << M * (n - L) << "; ";
  if (!os.str().empty()) throw ValidationError(os.str());
}

std::size_t count_G(const FamilyTree& tree, const GwEmbedParams& params) {
  const int n = params.n;
  const int L = params.L;
  if (static_cast<int>(tree.levels.size()) <= n) throw std::invalid_argument("tree shallower than n");
  const double head_slope = params.alpha * params.eps;
  const double tail_room = (1.0 - params.alpha) * params.eps * L;

  // ok[i] at level j: the path to node i respects the head constraint.
  std::vector<char> ok{1};
  for (int j = 1; j <= L; ++j) {
    const auto& level = tree.levels[static_cast<std::size_t>(j)];
    std::vector<char> next(level.size());
    for (std::size_t i = 0; i < level.size(); ++i)
      next[i] = ok[static_cast<std::size_t>(level[i].parent)] && barrier_admits(head_slope, level[i].v, j);
    ok.swap(next);
  }
  const auto& anchors = tree.levels[static_cast<std::size_t>(L)];
  std::vector<double> max_rise(anchors.size(), -std::numeric_limits<double>::infinity());
  std::vector<int> anchor;
  for (std::size_t i = 0; i < anchors.size(); ++i) anchor.push_back(static_cast<int>(i));
  for (int j = L + 1; j <= n; ++j) {
    const auto& level = tree.levels[static_cast<std::size_t>(j)];
    std::vector<int> next(level.size());
    for (std::size_t i = 0; i < level.size(); ++i) {
      const int a = anchor[static_cast<std::size_t>(level[i].parent)];
      next[i] = a;
      max_rise[static_cast<std::size_t>(a)] =
          std::max(max_rise[static_cast<std::size_t>(a)], level[i].v - anchors[static_cast<std::size_t>(a)].v);
    }
    anchor.swap(next);
  }
  std::size_t count = 0;
  for (int a : anchor) {
    const auto ua = static_cast<std::size_t>(a);
    if (ok[ua] && barrier_admits(tail_room, max_rise[ua], 1)) ++count;
  }
  return count;
}

std::size_t GwHistogram::nonempty() const {
  std::size_t total = 0;
  for (const auto& [k, c] : counts)
    if (k > 0) total += c;
  return total;
}

double GwHistogram::nonempty_fraction() const {
  return replicates == 0 ? 0.0 : static_cast<double>(nonempty()) / static_cast<double>(replicates);
}

GwHistogram simulate_G(const VLaw& vlaw, const GwEmbedParams& params, const McOptions& opt, std::size_t node_cap) {
  params.check();
  const OffspringSampler sampler(vlaw.base);
  std::vector<std::size_t> sizes(opt.replicates);
  parallel_for(opt.replicates, opt.threads, [&](std::size_t i) {
    Stream rng = make_stream(opt.seed, i);
    const FamilyTree tree =
        sample_tree(vlaw, sampler, params.n, rng, node_cap, params.alpha * params.eps, params.L);
    sizes[i] = count_G(tree, params);
  });
  GwHistogram h;
  h.replicates = opt.replicates;
  for (std::size_t s : sizes) ++h.counts[s];
  return h;
}

MKappa estimate_M_kappa(const VLaw& vlaw, int j_max, const McOptions& opt) {
  if (j_max < 10) throw std::invalid_argument("estimate_M_kappa needs j_max >= 10");
  const OffspringSampler sampler(vlaw.base);
  const std::size_t N = opt.replicates;
  const auto J = static_cast<std::size_t>(j_max);
  // running max of V over generations <= j, per replicate, and survival.
  std::vector<double> running_max(N * (J + 1));
  std::vector<char> alive(N * (J + 1));
  parallel_for(N, opt.threads, [&](std::size_t r) {
    Stream rng = make_stream(opt.seed, r);
    const FamilyTree tree = sample_tree(vlaw, sampler, j_max, rng, std::size_t{1} << 24);
    double m = 0.0;
    for (std::size_t j = 0; j <= J; ++j) {
      for (const auto& node : tree.levels[j]) m = std::max(m, node.v);
      running_max[r * (J + 1) + j] = m;
      alive[r * (J + 1) + j] = !tree.levels[j].empty();
    }
  });

  // Grid spacing: 1/64 of the largest one-step V-increment scale.
  double scale = 0.0;
  if (has_gaussian_step(vlaw.base)) {
    const auto& g = std::get<GaussianStep>(std::get<ProductLaw>(vlaw.base).step);
    scale = std::abs(vlaw.v_increment(g.mean)) + 6.0 * vlaw.t_star * g.stddev;
  } else {
    for (const auto& a : intensity_atoms(vlaw.base)) scale = std::max(scale, std::abs(vlaw.v_increment(a.value)));
  }
  MKappa out;
  out.grid_step = scale / 64.0;
  const double n = static_cast<double>(N);
  for (int k = 0; k <= 64 * 16; ++k) {
    const double M = k * out.grid_step;
    std::vector<double> below(J + 1), both(J + 1);
    bool good = true;
    for (std::size_t j = 0; j <= J && good; ++j) {
      std::size_t hits = 0, hits_alive = 0;
      for (std::size_t r = 0; r < N; ++r) {
        const bool ok = barrier_admits(M, running_max[r * (J + 1) + j], static_cast<int>(j));
        hits += ok;
        hits_alive += ok && alive[r * (J + 1) + j];
      }
      below[j] = hits / n;
      both[j] = hits_alive / n;
      const double se = std::sqrt(below[j] * (1.0 - below[j]) / n);
      if (below[j] - 3.0 * se < 0.5) good = false;
    }
    if (!good) continue;
    out.M = M;
    out.max_below = below;
    out.alive_and_below = both;
    out.kappa_hat = *std::min_element(both.begin(), both.end());
    return out;
  }
  throw std::runtime_error("estimate_M_kappa: no grid value of M satisfies the median condition");
}

}  // namespace kbrw
