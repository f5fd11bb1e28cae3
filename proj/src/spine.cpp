#include "kbrw/spine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "kbrw/parallel.hpp"

namespace kbrw {
namespace {

std::vector<double> cdf_of(const std::vector<double>& weights) {
  std::vector<double> cdf(weights.size());
  double total = 0.0;
  for (double w : weights) total += w;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) cdf[i] = (acc += weights[i]) / total;
  if (!cdf.empty()) cdf.back() = 1.0;
  return cdf;
}

void add_atom(std::vector<Atom>& atoms, std::vector<double>* u_values, double value, double u, double w) {
  for (std::size_t i = 0; i < atoms.size(); ++i)
    if (atoms[i].value == value) {
      atoms[i].prob += w;
      return;
    }
  atoms.push_back({value, w});
  if (u_values) u_values->push_back(u);
}

}  // namespace

SpineLaw::SpineLaw(const VLaw& vlaw) : vlaw_(vlaw) {
  const auto& law = vlaw_.base;
  if (const auto* e = std::get_if<ExplicitFinite>(&law)) {
    factorised_ = false;
    for (const auto& o : e->outcomes) {
      TiltedOutcome t;
      t.size = static_cast<int>(o.displacements.size());
      std::vector<double> child_w;
      double total = 0.0;
      for (double u : o.displacements) {
        const double inc = vlaw_.v_increment(u);
        t.increments.push_back(inc);
        child_w.push_back(std::exp(-inc));
        total += child_w.back();
        add_atom(step_atoms_, &step_u_, inc, u, o.prob * std::exp(-inc));
      }
      t.child_cdf = cdf_of(child_w);
      outcome_weights_.push_back(o.prob * total);
      outcome_probs_.push_back(o.prob);
      outcomes_.push_back(std::move(t));
      const double w = o.prob * total;
      auto it = std::find_if(nu_pmf_.begin(), nu_pmf_.end(),
                             [&](const CountProb& c) { return c.count == outcomes_.back().size; });
      if (it == nu_pmf_.end())
        nu_pmf_.push_back({outcomes_.back().size, w});
      else
        it->prob += w;
    }
    outcome_cdf_ = cdf_of(outcome_weights_);
    double total = 0.0;
    for (double w : outcome_weights_) total += w;
    for (auto& c : nu_pmf_) c.prob /= total;
    for (auto& a : step_atoms_) a.prob /= total;
  } else {
    const double ez = mean_children(law);
    for (const auto& c : child_count_pmf(law))
      if (c.count > 0 && c.prob > 0.0) nu_pmf_.push_back({c.count, c.count * c.prob / ez});
    if (has_gaussian_step(law)) {
      gaussian_ = true;
      const auto& g = std::get<GaussianStep>(std::get<ProductLaw>(law).step);
      const double s2 = g.stddev * g.stddev;
      // Tilting N(mu, s2) by e^{t* y} shifts the mean to mu + s2 t*.
      g_mean_ = vlaw_.psi_tstar - vlaw_.t_star * (g.mean + s2 * vlaw_.t_star);
      g_sd_ = vlaw_.t_star * g.stddev;
    } else {
      double total = 0.0;
      for (const auto& a : intensity_atoms(law)) {
        const double inc = vlaw_.v_increment(a.value);
        add_atom(step_atoms_, &step_u_, inc, a.value, a.prob * std::exp(-inc));
        total += a.prob * std::exp(-inc);
      }
      // total is E sum e^{-V} = 1 up to rounding; renormalise exactly.
      for (auto& a : step_atoms_) a.prob /= total;
    }
  }
  std::sort(nu_pmf_.begin(), nu_pmf_.end(), [](const CountProb& a, const CountProb& b) { return a.count < b.count; });
  std::vector<double> nu_w;
  for (const auto& c : nu_pmf_) nu_w.push_back(c.prob);
  nu_cdf_ = cdf_of(nu_w);

  if (gaussian_) {
    mean_ = g_mean_;
    second_moment_ = g_sd_ * g_sd_ + g_mean_ * g_mean_;
  } else {
    std::vector<double> w;
    for (const auto& a : step_atoms_) {
      w.push_back(a.prob);
      mean_ += a.prob * a.value;
      second_moment_ += a.prob * a.value * a.value;
    }
    step_cdf_ = cdf_of(w);
  }
}

SpineLaw make_spine(const VLaw& vlaw) { return SpineLaw(vlaw); }

std::vector<Atom> SpineLaw::tilted_u_atoms() const {
  std::vector<Atom> out;
  for (std::size_t i = 0; i < step_atoms_.size(); ++i) out.push_back({step_u_[i], step_atoms_[i].prob});
  return out;
}

double SpineLaw::exponential_moment(double u) const {
  if (gaussian_) return std::exp(u * g_mean_ + 0.5 * u * u * g_sd_ * g_sd_);
  double m = 0.0;
  for (const auto& a : step_atoms_) m += a.prob * std::exp(u * a.value);
  return m;
}

double SpineLaw::nu_tail(long long r) const {
  double tail = 0.0;
  for (const auto& c : nu_pmf_)
    if (c.count > r) tail += c.prob;
  return tail;
}

std::vector<Atom> SpineLaw::step_atoms_given_nu_at_most(long long r) const {
  if (gaussian_) throw std::logic_error("conditioned step atoms need a finite-support law");
  if (nu_tail(r) >= 1.0) throw std::domain_error("nu_0 <= r has probability zero");
  if (factorised_) return step_atoms_;
  std::vector<Atom> atoms;
  double total = 0.0;
  for (std::size_t k = 0; k < outcomes_.size(); ++k) {
    if (outcomes_[k].size > r) continue;
    for (double inc : outcomes_[k].increments) {
      const double w = outcome_probs_[k] * std::exp(-inc);
      add_atom(atoms, nullptr, inc, 0.0, w);
      total += w;
    }
  }
  for (auto& a : atoms) a.prob /= total;
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
  return atoms;
}

SpineLaw::Step SpineLaw::sample(Stream& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (!factorised_) {
    const auto& o = outcomes_[pick_index(outcome_cdf_, unit(rng))];
    return {o.increments[pick_index(o.child_cdf, unit(rng))], o.size};
  }
  const int nu = nu_pmf_[pick_index(nu_cdf_, unit(rng))].count;
  if (gaussian_) {
    std::normal_distribution<double> normal(g_mean_, g_sd_);
    return {normal(rng), nu};
  }
  return {step_atoms_[pick_index(step_cdf_, unit(rng))].value, nu};
}

std::vector<SpinePoint> sample_spine_path(const SpineLaw& sp, int n, Stream& rng) {
  if (n < 1) throw std::invalid_argument("sample_spine_path needs n >= 1");
  std::vector<SpinePoint> path;
  path.reserve(static_cast<std::size_t>(n));
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto step = sp.sample(rng);
    s += step.increment;
    path.push_back({s, step.nu});
  }
  return path;
}

double PathFunctional::operator()(std::span<const double> positions, std::span<const int> nus) const {
  if (nu_bound)
    for (int nu : nus)
      if (nu > *nu_bound) return 0.0;
  switch (kind) {
    case Kind::one:
      return 1.0;
    case Kind::corridor:
      for (std::size_t i = 0; i < positions.size(); ++i)
        if (positions[i] > slope * static_cast<double>(i + 1)) return 0.0;
      return 1.0;
    case Kind::exp_end: {
      const double end = positions.empty() ? 0.0 : positions.back();
      return std::exp(lambda * std::clamp(end, -bound, bound));
    }
  }
  return 0.0;
}

std::string PathFunctional::name() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::one:
      os << "one";
      break;
    case Kind::corridor:
      os << "corridor:" << slope;
      break;
    case Kind::exp_end:
      os << "exp:" << lambda << ":" << bound;
      break;
  }
  if (nu_bound) os << "|nu<=" << *nu_bound;
  return os.str();
}

PathFunctional parse_functional(const std::string& id) {
  std::string head = id;
  std::optional<int> nu;
  if (auto bar = id.find('|'); bar != std::string::npos) {
    head = id.substr(0, bar);
    const std::string tail = id.substr(bar + 1);
    if (tail.rfind("nu<=", 0) != 0) throw std::invalid_argument("unknown functional suffix: " + tail);
    nu = std::stoi(tail.substr(4));
  }
  PathFunctional f;
  auto fields = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i)
      if (i == s.size() || s[i] == ':') {
        out.push_back(s.substr(start, i - start));
        start = i + 1;
      }
    return out;
  };
  const auto parts = fields(head);
  if (parts[0] == "one" && parts.size() == 1) {
    f = PathFunctional::constant_one();
  } else if (parts[0] == "corridor" && parts.size() == 2) {
    f = PathFunctional::corridor_below(std::stod(parts[1]));
  } else if (parts[0] == "exp" && parts.size() == 3) {
    f = PathFunctional::clamped_exponential(std::stod(parts[1]), std::stod(parts[2]));
  } else {
    throw std::invalid_argument("unknown functional: " + id);
  }
  f.nu_bound = nu;
  return f;
}

double tree_functional_sample(const VLaw& vlaw, const OffspringSampler& sampler, const PathFunctional& f,
                              int n, Stream& rng, std::size_t node_cap) {
  std::vector<double> positions(static_cast<std::size_t>(n));
  std::vector<int> nus(static_cast<std::size_t>(n));
  std::size_t nodes = 0;
  double total = 0.0;
  // Depth-first: children of a node are sampled in one go, then visited in
  // order, so the draw sequence is fixed by the stream.
  std::function<void(int, double)> visit = [&](int depth, double v) {
    if (depth == n) {
      total += std::exp(-v) * f(positions, nus);
      return;
    }
    std::vector<double> family;
    sampler.sample(rng, family);
    nodes += family.size();
    if (nodes > node_cap) throw std::runtime_error("direct tree simulation exceeded the node cap");
    for (double u : family) {
      const double child = v + vlaw.v_increment(u);
      positions[static_cast<std::size_t>(depth)] = child;
      nus[static_cast<std::size_t>(depth)] = static_cast<int>(family.size());
      visit(depth + 1, child);
    }
  };
  visit(0, 0.0);
  return total;
}

CheckReport many_to_one_check(const SpineLaw& sp, const PathFunctional& f, const CheckOptions& opt) {
  if (opt.n < 1) throw std::invalid_argument("many_to_one_check needs n >= 1");
  if (opt.replicates < 2) throw std::invalid_argument("many_to_one_check needs at least two replicates");
  const OffspringSampler sampler(sp.vlaw().base);
  std::vector<double> tree(opt.replicates);
  std::vector<double> spine(opt.replicates);
  // Tree and spine replicates use disjoint stream families.
  parallel_for(opt.replicates, opt.threads, [&](std::size_t i) {
    Stream rng = make_stream(opt.seed, 2 * i);
    tree[i] = tree_functional_sample(sp.vlaw(), sampler, f, opt.n, rng, opt.node_cap);
    Stream srng = make_stream(opt.seed, 2 * i + 1);
    const auto path = sample_spine_path(sp, opt.n, srng);
    std::vector<double> pos;
    std::vector<int> nus;
    for (const auto& p : path) {
      pos.push_back(p.position);
      nus.push_back(p.nu);
    }
    spine[i] = f(pos, nus);
  });
  CheckReport r;
  r.tree = summarize(tree);
  r.spine = summarize(spine);
  r.tree_band = r.tree.band(3.0);
  r.spine_band = r.spine.band(3.0);
  r.vacuous = r.tree.variance == 0.0 && r.spine.variance == 0.0;
  r.pass = r.tree_band.low <= r.spine_band.high && r.spine_band.low <= r.tree_band.high;
  return r;
}

}  // namespace kbrw
