#include "kbrw/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kbrw {

std::vector<IntAtom> to_int_atoms(const std::vector<Atom>& atoms) {
  std::vector<IntAtom> out;
  for (const auto& a : atoms) {
    const double r = std::round(a.value);
    if (std::abs(a.value - r) > 1e-12) throw ValidationError("displacement law is not integer valued");
    if (a.prob > 0.0) out.push_back({static_cast<long>(r), a.prob});
  }
  return out;
}

LatticeLaw LatticeLaw::from(const VLaw& vlaw) {
  if (!is_integer_lattice(vlaw.base)) throw ValidationError("exact oracle needs integer displacements with finite support");
  LatticeLaw l;
  l.t_star = vlaw.t_star;
  l.psi_tstar = vlaw.psi_tstar;
  const auto& law = vlaw.base;
  if (const auto* e = std::get_if<ExplicitFinite>(&law)) {
    l.product = false;
    for (const auto& o : e->outcomes) {
      Family f;
      f.prob = o.prob;
      for (double u : o.displacements) f.displacements.push_back(std::lround(u));
      l.families.push_back(std::move(f));
    }
  } else {
    l.offspring = child_count_pmf(law);
    if (const auto* b = std::get_if<BinaryBernoulli>(&law)) {
      l.steps = {{0, 1.0 - b->p}, {1, b->p}};
    } else {
      l.steps = to_int_atoms(std::get<DiscreteStep>(std::get<ProductLaw>(law).step).atoms);
    }
  }
  const auto atoms = intensity_atoms(law);
  l.min_step = std::lround(atoms.front().value);
  l.max_step = std::lround(atoms.back().value);
  return l;
}

long LatticeLaw::lowest_admitted(double v_slope, int j) const {
  if (std::isinf(v_slope) && v_slope > 0.0) return std::numeric_limits<long>::min() / 4;
  auto admitted = [&](long s) { return barrier_admits(v_slope, psi_tstar * j - t_star * static_cast<double>(s), j); };
  long s = static_cast<long>(std::ceil((psi_tstar - v_slope) * j / t_star));
  while (admitted(s - 1)) --s;
  while (!admitted(s)) ++s;
  return s;
}

namespace {

// 1 - prod_c (1 - a_c) without cancellation for small a_c.
struct SurvivalCombiner {
  const LatticeLaw& law;

  // Product form: 1 - G(1 - m).
  double from_mean(double m) const {
    if (m <= 0.0) return 0.0;
    double r = 0.0;
    const double l1 = std::log1p(-std::min(m, 1.0));
    for (const auto& c : law.offspring) {
      if (c.count == 0) continue;
      r += c.prob * (m >= 1.0 ? 1.0 : -std::expm1(c.count * l1));
    }
    return r;
  }
};

double survival_dp(const LatticeLaw& law, double v_slope, int n) {
  if (n < 0) throw std::invalid_argument("depth must be non-negative");
  if (n == 0) return 1.0;
  const bool free = std::isinf(v_slope) && v_slope > 0.0;
  // Window of U-sums at generation j: [lo(j), j * max_step].
  auto lo = [&](int j) {
    const long natural = static_cast<long>(j) * law.min_step;
    return free ? natural : std::max(natural, law.lowest_admitted(v_slope, j));
  };
  auto hi = [&](int j) { return static_cast<long>(j) * law.max_step; };

  // next[s - lo(j+1)] = R_{j+1}(s) for admitted s.
  long next_lo = lo(n);
  std::vector<double> next(static_cast<std::size_t>(std::max(0L, hi(n) - next_lo + 1)), 1.0);
  auto child_value = [&](long s) {
    if (s < next_lo) return 0.0;
    const long k = s - next_lo;
    if (k >= static_cast<long>(next.size())) return 0.0;
    return next[static_cast<std::size_t>(k)];
  };
  const SurvivalCombiner combine{law};
  for (int j = n - 1; j >= 0; --j) {
    const long cur_lo = j == 0 ? 0 : lo(j);
    const long cur_hi = j == 0 ? 0 : hi(j);
    std::vector<double> cur(static_cast<std::size_t>(std::max(0L, cur_hi - cur_lo + 1)), 0.0);
    for (long s = cur_lo; s <= cur_hi; ++s) {
      double r = 0.0;
      if (law.product) {
        double m = 0.0;
        for (const auto& a : law.steps) m += a.prob * child_value(s + a.value);
        r = combine.from_mean(m);
      } else {
        for (const auto& f : law.families) {
          double log_none = 0.0;
          for (long u : f.displacements) {
            const double a = child_value(s + u);
            if (a >= 1.0) {
              log_none = -std::numeric_limits<double>::infinity();
              break;
            }
            log_none += std::log1p(-a);
          }
          r += f.prob * -std::expm1(log_none);
        }
      }
      cur[static_cast<std::size_t>(s - cur_lo)] = r;
    }
    next.swap(cur);
    next_lo = cur_lo;
  }
  return next.empty() ? 0.0 : next[0];
}

}  // namespace

double exact_path_survival(const LatticeLaw& law, const BarrierSpec& barrier, int n) {
  double slope = barrier.slope;
  if (barrier.coordinate == BarrierSpec::Coordinate::U_lower) slope = law.t_star * barrier.slope;
  return survival_dp(law, slope, n);
}

double gw_survival_to(const LatticeLaw& law, int n) {
  return survival_dp(law, std::numeric_limits<double>::infinity(), n);
}

CorridorProbability exact_corridor_walk(const std::vector<IntAtom>& step, const std::vector<long>& lower,
                                        const std::vector<long>& upper,
                                        std::optional<std::pair<long, long>> window) {
  if (lower.size() != upper.size()) throw std::invalid_argument("corridor arrays differ in length");
  const double neg_inf = -std::numeric_limits<double>::infinity();
  CorridorProbability out;
  std::vector<double> dist{1.0};
  long base = 0;  // position of dist[0]
  double log_scale = 0.0;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const long lo = lower[i];
    const long hi = upper[i];
    if (lo > hi) return {0.0, neg_inf};
    std::vector<double> nd(static_cast<std::size_t>(hi - lo + 1), 0.0);
    for (std::size_t k = 0; k < dist.size(); ++k) {
      const double mass = dist[k];
      if (mass == 0.0) continue;
      const long pos = base + static_cast<long>(k);
      for (const auto& a : step) {
        const long to = pos + a.value;
        if (to < lo || to > hi) continue;
        nd[static_cast<std::size_t>(to - lo)] += mass * a.prob;
      }
    }
    double total = 0.0;
    for (double v : nd) total += v;
    if (total == 0.0) return {0.0, neg_inf};
    for (double& v : nd) v /= total;
    log_scale += std::log(total);
    dist.swap(nd);
    base = lo;
  }
  double kept = 1.0;
  if (window) {
    kept = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
      const long pos = base + static_cast<long>(k);
      if (pos >= window->first && pos <= window->second) kept += dist[k];
    }
    if (kept == 0.0) return {0.0, neg_inf};
  }
  out.log_prob = log_scale + std::log(kept);
  out.prob = std::exp(out.log_prob);
  return out;
}

ConvergedRho converged_rho(const LatticeLaw& law, double v_slope, int n_start, double rel_tol, int n_max) {
  if (n_start < 2) throw std::invalid_argument("converged_rho needs n_start >= 2");
  ConvergedRho c;
  double previous = exact_path_survival(law, BarrierSpec::in_V(v_slope), n_start / 2);
  for (int n = n_start; n <= n_max; n *= 2) {
    const double rho = exact_path_survival(law, BarrierSpec::in_V(v_slope), n);
    if (rho > 0.0 && std::abs(rho - previous) / rho < rel_tol) {
      c.n_used = n;
      c.rho = rho;
      c.rho_half = previous;
      return c;
    }
    previous = rho;
  }
  throw std::runtime_error("converged_rho: no convergence before n_max");
}

}  // namespace kbrw
