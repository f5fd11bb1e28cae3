#include "kbrw/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace kbrw {
namespace {

constexpr double kSumTolerance = 1e-12;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

bool sums_to_one(double total) { return std::abs(total - 1.0) <= kSumTolerance; }

std::string check_step(const StepLaw& step) {
  if (const auto* g = std::get_if<GaussianStep>(&step)) {
    if (!std::isfinite(g->mean) || !(g->stddev > 0.0) || !std::isfinite(g->stddev))
      return "Gaussian step needs a finite mean and stddev > 0";
    return {};
  }
  const auto& d = std::get<DiscreteStep>(step);
  double total = 0.0;
  std::set<double> support;
  for (const auto& a : d.atoms) {
    if (!std::isfinite(a.value) || !(a.prob >= 0.0)) return "step atom is not finite or has negative mass";
    total += a.prob;
    if (a.prob > 0.0) support.insert(a.value);
  }
  if (!sums_to_one(total)) return "step probabilities do not sum to 1";
  if (support.size() < 2) return "step law is deterministic (needs two atoms for strict convexity of psi)";
  return {};
}

double step_mgf(const StepLaw& step, double t) {
  return std::visit(overloaded{
                        [t](const DiscreteStep& d) {
                          double m = 0.0;
                          for (const auto& a : d.atoms) m += a.prob * std::exp(t * a.value);
                          return m;
                        },
                        [t](const GaussianStep& g) {
                          return std::exp(g.mean * t + 0.5 * g.stddev * g.stddev * t * t);
                        }},
                    step);
}

StepLaw normalized(const StepLaw& step) {
  if (std::holds_alternative<GaussianStep>(step)) return step;
  DiscreteStep d;
  double total = 0.0;
  for (const auto& a : std::get<DiscreteStep>(step).atoms)
    if (a.prob > 0.0) {
      d.atoms.push_back(a);
      total += a.prob;
    }
  for (auto& a : d.atoms) a.prob /= total;
  return d;
}

}  // namespace

std::vector<CountProb> child_count_pmf(const OffspringLaw& law) {
  return std::visit(overloaded{
                        [](const BinaryBernoulli&) { return std::vector<CountProb>{{2, 1.0}}; },
                        [](const ProductLaw& l) { return l.offspring_pmf; },
                        [](const ExplicitFinite& l) {
                          std::vector<CountProb> pmf;
                          for (const auto& o : l.outcomes) {
                            const int k = static_cast<int>(o.displacements.size());
                            auto it = std::find_if(pmf.begin(), pmf.end(),
                                                   [k](const CountProb& c) { return c.count == k; });
                            if (it == pmf.end())
                              pmf.push_back({k, o.prob});
                            else
                              it->prob += o.prob;
                          }
                          std::sort(pmf.begin(), pmf.end(),
                                    [](const CountProb& a, const CountProb& b) { return a.count < b.count; });
                          return pmf;
                        }},
                    law);
}

double mean_children(const OffspringLaw& law) {
  double m = 0.0;
  for (const auto& c : child_count_pmf(law)) m += c.count * c.prob;
  return m;
}

std::vector<Atom> intensity_atoms(const OffspringLaw& law) {
  std::vector<Atom> out;
  auto add = [&out](double value, double weight) {
    if (weight <= 0.0) return;
    auto it = std::find_if(out.begin(), out.end(), [value](const Atom& a) { return a.value == value; });
    if (it == out.end())
      out.push_back({value, weight});
    else
      it->prob += weight;
  };
  std::visit(overloaded{
                 [&](const BinaryBernoulli& l) {
                   add(0.0, 2.0 * (1.0 - l.p));
                   add(1.0, 2.0 * l.p);
                 },
                 [&](const ProductLaw& l) {
                   if (!std::holds_alternative<DiscreteStep>(l.step)) return;
                   const double ez = mean_children(l);
                   for (const auto& a : std::get<DiscreteStep>(l.step).atoms) add(a.value, ez * a.prob);
                 },
                 [&](const ExplicitFinite& l) {
                   for (const auto& o : l.outcomes)
                     for (double u : o.displacements) add(u, o.prob);
                 }},
             law);
  std::sort(out.begin(), out.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
  return out;
}

bool has_gaussian_step(const OffspringLaw& law) {
  const auto* p = std::get_if<ProductLaw>(&law);
  return p != nullptr && std::holds_alternative<GaussianStep>(p->step);
}

bool is_integer_lattice(const OffspringLaw& law) {
  if (has_gaussian_step(law)) return false;
  for (const auto& a : intensity_atoms(law))
    if (std::abs(a.value - std::round(a.value)) > 1e-12) return false;
  return true;
}

std::string law_name(const OffspringLaw& law) {
  return std::visit(overloaded{[](const BinaryBernoulli&) { return std::string("binary_bernoulli"); },
                               [](const ProductLaw&) { return std::string("product"); },
                               [](const ExplicitFinite&) { return std::string("explicit"); }},
                    law);
}

ValidationReport validate(const OffspringLaw& law) {
  ValidationReport r;
  auto reject = [&r](std::string why) {
    r.accepted = false;
    r.violated = std::move(why);
    return r;
  };

  // Shape checks first, then the model assumptions.
  if (const auto* b = std::get_if<BinaryBernoulli>(&law)) {
    if (!(b->p > 0.0 && b->p < 1.0)) return reject("Bernoulli parameter must lie in (0,1)");
  } else if (const auto* p = std::get_if<ProductLaw>(&law)) {
    double total = 0.0;
    for (const auto& c : p->offspring_pmf) {
      if (c.count < 0 || !(c.prob >= 0.0)) return reject("offspring pmf has a negative count or mass");
      total += c.prob;
    }
    if (!sums_to_one(total)) return reject("offspring probabilities do not sum to 1");
    if (auto why = check_step(p->step); !why.empty()) return reject(why);
  } else {
    const auto& e = std::get<ExplicitFinite>(law);
    double total = 0.0;
    std::set<double> support;
    for (const auto& o : e.outcomes) {
      if (!(o.prob >= 0.0)) return reject("outcome has negative mass");
      total += o.prob;
      for (double u : o.displacements) {
        if (!std::isfinite(u)) return reject("displacement is not finite");
        if (o.prob > 0.0) support.insert(u);
      }
    }
    if (!sums_to_one(total)) return reject("outcome probabilities do not sum to 1");
    r.mean_children = mean_children(law);
    if (r.mean_children > 1.0 && support.size() < 2)
      return reject("displacements are deterministic (psi is affine, no critical point)");
  }

  const auto pmf = child_count_pmf(law);
  r.mean_children = 0.0;
  r.second_moment = 0.0;
  for (const auto& c : pmf) {
    r.mean_children += c.count * c.prob;
    r.second_moment += static_cast<double>(c.count) * c.count * c.prob;
  }
  if (!(r.mean_children > 1.0)) {
    std::ostringstream os;
    os << "supercriticality E[Z] > 1 fails (E[Z] = " << r.mean_children << ")";
    return reject(os.str());
  }

  // Two-sided exponential moments of the first generation. Every supported
  // family has them for all deltas; delta = 1 is reported as the witness.
  r.delta_plus = r.delta_minus = 1.0;
  if (const auto* p = std::get_if<ProductLaw>(&law); p && std::holds_alternative<GaussianStep>(p->step)) {
    r.moment_plus = r.mean_children * step_mgf(p->step, 1.0);
    r.moment_minus = r.mean_children * step_mgf(p->step, -1.0);
  } else {
    for (const auto& a : intensity_atoms(law)) {
      r.moment_plus += a.prob * std::exp(a.value);
      r.moment_minus += a.prob * std::exp(-a.value);
    }
  }
  r.exponential_moments_finite = std::isfinite(r.moment_plus) && std::isfinite(r.moment_minus);
  if (!r.exponential_moments_finite) return reject("exponential moment condition fails");
  r.accepted = true;
  return r;
}

OffspringLaw validated(const OffspringLaw& law) {
  const auto report = validate(law);
  if (!report.accepted) throw ValidationError(report.violated);
  return std::visit(overloaded{
                        [](const BinaryBernoulli& l) -> OffspringLaw { return l; },
                        [](const ProductLaw& l) -> OffspringLaw {
                          ProductLaw out;
                          double total = 0.0;
                          for (const auto& c : l.offspring_pmf)
                            if (c.prob > 0.0) {
                              out.offspring_pmf.push_back(c);
                              total += c.prob;
                            }
                          for (auto& c : out.offspring_pmf) c.prob /= total;
                          out.step = normalized(l.step);
                          return out;
                        },
                        [](const ExplicitFinite& l) -> OffspringLaw {
                          ExplicitFinite out;
                          double total = 0.0;
                          for (const auto& o : l.outcomes)
                            if (o.prob > 0.0) {
                              out.outcomes.push_back(o);
                              total += o.prob;
                            }
                          for (auto& o : out.outcomes) o.prob /= total;
                          return out;
                        }},
                    law);
}

std::size_t pick_index(const std::vector<double>& cdf, double u) {
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) return cdf.size() - 1;
  return static_cast<std::size_t>(it - cdf.begin());
}

namespace {
std::vector<double> cumulative(const std::vector<double>& probs) {
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) cdf[i] = (acc += probs[i]);
  if (!cdf.empty()) cdf.back() = 1.0;
  return cdf;
}
}  // namespace

OffspringSampler::OffspringSampler(const OffspringLaw& law) : law_(validated(law)) {
  if (const auto* b = std::get_if<BinaryBernoulli>(&law_)) {
    bernoulli_p_ = b->p;
  } else if (const auto* p = std::get_if<ProductLaw>(&law_)) {
    std::vector<double> probs;
    for (const auto& c : p->offspring_pmf) {
      counts_.push_back(c.count);
      probs.push_back(c.prob);
    }
    count_cdf_ = cumulative(probs);
    if (const auto* g = std::get_if<GaussianStep>(&p->step)) {
      gaussian_ = *g;
    } else {
      std::vector<double> sp;
      for (const auto& a : std::get<DiscreteStep>(p->step).atoms) {
        step_values_.push_back(a.value);
        sp.push_back(a.prob);
      }
      step_cdf_ = cumulative(sp);
    }
  } else {
    std::vector<double> probs;
    for (const auto& o : std::get<ExplicitFinite>(law_).outcomes) probs.push_back(o.prob);
    count_cdf_ = cumulative(probs);
  }
}

double OffspringSampler::draw_step(Stream& rng) const {
  if (gaussian_) {
    std::normal_distribution<double> normal(gaussian_->mean, gaussian_->stddev);
    return normal(rng);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return step_values_[pick_index(step_cdf_, unit(rng))];
}

std::size_t OffspringSampler::sample_indexed(Stream& rng, std::vector<double>& out) const {
  out.clear();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (bernoulli_p_ >= 0.0) {
    out.push_back(unit(rng) < bernoulli_p_ ? 1.0 : 0.0);
    out.push_back(unit(rng) < bernoulli_p_ ? 1.0 : 0.0);
    return 0;
  }
  if (const auto* e = std::get_if<ExplicitFinite>(&law_)) {
    const std::size_t k = pick_index(count_cdf_, unit(rng));
    out = e->outcomes[k].displacements;
    return k;
  }
  const int z = counts_[pick_index(count_cdf_, unit(rng))];
  for (int i = 0; i < z; ++i) out.push_back(draw_step(rng));
  return 0;
}

void OffspringSampler::sample(Stream& rng, std::vector<double>& out) const { sample_indexed(rng, out); }

Realization OffspringSampler::sample(Stream& rng) const {
  Realization r;
  sample(rng, r.displacements);
  return r;
}

std::vector<NamedLaw> library_laws() {
  const double p0 = (2.0 - std::sqrt(3.0)) / 4.0;
  return {
      {"binary_p0.3", BinaryBernoulli{0.3}},
      {"binary_p0", BinaryBernoulli{p0}},
      {"product_lattice", ProductLaw{{{0, 0.2}, {2, 0.3}, {3, 0.5}}, DiscreteStep{{{-1, 0.3}, {0, 0.4}, {1, 0.3}}}}},
      {"product_gaussian", ProductLaw{{{1, 0.5}, {3, 0.5}}, GaussianStep{0.0, 1.0}}},
      {"explicit", ExplicitFinite{{{{0, 1}, 0.4}, {{0, 0, 1}, 0.3}, {{-1, 0, 0}, 0.2}, {{2}, 0.1}}}},
  };
}

}  // namespace kbrw
