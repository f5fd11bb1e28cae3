#include "kbrw/mogulskii.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "kbrw/parallel.hpp"
#include "kbrw/quadrature.hpp"

namespace kbrw {

CorridorSpec::CorridorSpec(const std::function<double(double)>& g1, const std::function<double(double)>& g2,
                           double sigma)
    : sigma_(sigma) {
  g1_.resize(kSamples);
  g2_.resize(kSamples);
  for (int k = 0; k < kSamples; ++k) {
    const double t = static_cast<double>(k) / (kSamples - 1);
    g1_[static_cast<std::size_t>(k)] = g1(t);
    g2_[static_cast<std::size_t>(k)] = g2(t);
  }
  check();
}

CorridorSpec::CorridorSpec(std::vector<double> g1_samples, std::vector<double> g2_samples, double sigma)
    : g1_(std::move(g1_samples)), g2_(std::move(g2_samples)), sigma_(sigma) {
  check();
}

CorridorSpec CorridorSpec::constant(double lower, double upper, double sigma) {
  return CorridorSpec([lower](double) { return lower; }, [upper](double) { return upper; }, sigma);
}

CorridorSpec CorridorSpec::linear(double lower0, double lower_slope, double upper0, double upper_slope,
                                  double sigma) {
  return CorridorSpec([=](double t) { return lower0 + lower_slope * t; },
                      [=](double t) { return upper0 + upper_slope * t; }, sigma);
}

CorridorSpec CorridorSpec::with_sigma(double sigma) const {
  CorridorSpec c = *this;
  c.sigma_ = sigma;
  c.check();
  return c;
}

void CorridorSpec::check() const {
  if (g1_.size() < 2 || g1_.size() != g2_.size())
    throw ValidationError("corridor needs at least two samples per boundary, equal in number");
  if (!(sigma_ > 0.0)) throw ValidationError("corridor sigma must be positive");
  if (!(g1_.front() < 0.0 && 0.0 < g2_.front())) throw ValidationError("corridor must satisfy g1(0) < 0 < g2(0)");
  for (std::size_t k = 0; k < g1_.size(); ++k)
    if (!(g2_[k] - g1_[k] > 0.0) || !std::isfinite(g1_[k]) || !std::isfinite(g2_[k]))
      throw ValidationError("corridor pinches: g2 - g1 must stay positive");
}

double CorridorSpec::interpolate(const std::vector<double>& samples, double t) {
  const double x = std::clamp(t, 0.0, 1.0) * static_cast<double>(samples.size() - 1);
  const auto k = std::min(static_cast<std::size_t>(x), samples.size() - 2);
  const double frac = x - static_cast<double>(k);
  return samples[k] + frac * (samples[k + 1] - samples[k]);
}

double corridor_constant(const CorridorSpec& spec) {
  const auto integral = adaptive_simpson(
      [&spec](double t) {
        const double w = spec.upper(t) - spec.lower(t);
        return 1.0 / (w * w);
      },
      0.0, 1.0, 1e-10);
  const double s2 = spec.sigma() * spec.sigma();
  return -0.5 * std::numbers::pi * std::numbers::pi * s2 * integral.value;
}

double ito_mckean_f(double a, double b, double c, double d) {
  if (!(a < 0.0 && 0.0 < b && a <= c && c <= d && d <= b))
    throw DomainError("ito_mckean_f needs a < 0 < b and a <= c <= d <= b");
  if (c == d) return 0.0;
  const double w = b - a;
  const double pi = std::numbers::pi;
  double total = 0.0;
  for (long n = 1;; ++n) {
    const double k = static_cast<double>(n) * pi / w;
    const double decay = std::exp(-0.5 * k * k);
    const double bound = 4.0 / (static_cast<double>(n) * pi) * decay;
    // cos(k (c-a)) - cos(k (d-a)) = 2 sin(k (c+d-2a)/2) sin(k (d-c)/2)
    const double window = 2.0 * std::sin(0.5 * k * (c + d - 2.0 * a)) * std::sin(0.5 * k * (d - c));
    total += (2.0 / w) * decay * std::sin(k * std::abs(a)) * window / k;
    if (bound < 1e-14) break;
  }
  return std::clamp(total, 0.0, 1.0);
}

ArraySpec ArraySpec::lattice(std::vector<IntAtom> step) {
  ArraySpec a;
  a.family = Family::lattice;
  a.lattice_step = std::move(step);
  return a;
}

ArraySpec ArraySpec::spine_conditioned(const SpineLaw& sp) {
  ArraySpec a;
  a.family = Family::spine_conditioned;
  a.spine = sp;
  return a;
}

ArraySpec ArraySpec::lazy_walk() { return lattice({{-1, 1.0 / 3.0}, {0, 1.0 / 3.0}, {1, 1.0 / 3.0}}); }

double ArraySpec::a_n(int n) const { return std::pow(static_cast<double>(n), a_exponent); }

long long ArraySpec::r_n(int n) { return static_cast<long long>(std::floor(std::exp(std::pow(n, 0.25)))); }

bool ArraySpec::lattice_valued() const {
  if (family == Family::lattice) return true;
  return !spine->gaussian() && is_integer_lattice(spine->vlaw().base);
}

std::string ArraySpec::name() const { return family == Family::lattice ? "lattice" : "spine_conditioned"; }

namespace {

// Law of X^{(n)} as atoms; for the Gaussian spine the moments are closed form.
std::vector<Atom> step_atoms_at(const ArraySpec& arr, int n) {
  if (arr.family == ArraySpec::Family::lattice) {
    std::vector<Atom> out;
    for (const auto& a : arr.lattice_step) out.push_back({static_cast<double>(a.value), a.prob});
    return out;
  }
  return arr.spine->step_atoms_given_nu_at_most(ArraySpec::r_n(n));
}

}  // namespace

double ArraySpec::limit_variance() const {
  if (family == Family::spine_conditioned) return spine->vlaw().profile.sigma2;
  double m = 0.0, m2 = 0.0;
  for (const auto& a : lattice_step) {
    m += a.prob * a.value;
    m2 += a.prob * static_cast<double>(a.value) * a.value;
  }
  return m2 - m * m;
}

ArrayWitness array_witness(const ArraySpec& arr, int n) {
  ArrayWitness w;
  w.n = n;
  if (arr.family == ArraySpec::Family::spine_conditioned) w.nu_tail = arr.spine->nu_tail(ArraySpec::r_n(n));
  if (arr.family == ArraySpec::Family::spine_conditioned && arr.spine->gaussian()) {
    // Gaussian steps only occur in product families, where conditioning on
    // nu_0 leaves the step law unchanged.
    const double mu = arr.spine->gaussian_mean();
    const double sd = arr.spine->gaussian_stddev();
    w.mean = mu;
    w.variance = sd * sd;
    // E|X|^3 for N(mu, sd^2) is bounded by 4 (|mu|^3 + 2 sqrt(2/pi) sd^3).
    w.abs_moment = 4.0 * (std::pow(std::abs(mu), 3) + 2.0 * std::sqrt(2.0 / std::numbers::pi) * sd * sd * sd);
  } else {
    double m = 0.0, m2 = 0.0, m3 = 0.0;
    for (const auto& a : step_atoms_at(arr, n)) {
      m += a.prob * a.value;
      m2 += a.prob * a.value * a.value;
      m3 += a.prob * std::pow(std::abs(a.value), 3);
    }
    w.mean = m;
    w.variance = m2 - m * m;
    w.abs_moment = m3;
  }
  w.mean_ratio = std::abs(w.mean) * n / arr.a_n(n);
  return w;
}

void lattice_corridor(const CorridorSpec& spec, int n, double a_n, std::vector<long>& lower,
                      std::vector<long>& upper) {
  lower.resize(static_cast<std::size_t>(n));
  upper.resize(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    lower[static_cast<std::size_t>(i - 1)] = static_cast<long>(std::ceil(a_n * spec.lower(t) - 1e-9));
    upper[static_cast<std::size_t>(i - 1)] = static_cast<long>(std::floor(a_n * spec.upper(t) + 1e-9));
  }
}

namespace {

struct CorridorRun {
  CorridorProbability full;
  std::optional<CorridorProbability> endpoint;
  std::string method;
};

CorridorRun run_lattice(const ArraySpec& arr, const CorridorSpec& spec, int n, double endpoint_level,
                        bool endpoint) {
  const double a = arr.a_n(n);
  std::vector<long> lower, upper;
  CorridorRun run;
  run.method = "dp";
  if (arr.family == ArraySpec::Family::lattice) {
    lattice_corridor(spec, n, a, lower, upper);
    run.full = exact_corridor_walk(arr.lattice_step, lower, upper);
    if (endpoint) {
      const long lo = static_cast<long>(std::ceil(a * endpoint_level - 1e-9));
      run.endpoint = exact_corridor_walk(arr.lattice_step, lower, upper,
                                         std::pair{lo, std::numeric_limits<long>::max()});
    }
    return run;
  }
  // Spine family on a U-lattice: S_i = psi* i - t* K_i with K_i an integer
  // walk, so the corridor on S_i becomes a corridor on K_i.
  const auto& v = arr.spine->vlaw();
  std::vector<IntAtom> ksteps;
  for (const auto& atom : arr.spine->step_atoms_given_nu_at_most(ArraySpec::r_n(n))) {
    const double u = (v.psi_tstar - atom.value) / v.t_star;
    ksteps.push_back({std::lround(u), atom.prob});
  }
  lower.resize(static_cast<std::size_t>(n));
  upper.resize(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double drift = v.psi_tstar * i;
    lower[static_cast<std::size_t>(i - 1)] = static_cast<long>(std::ceil((drift - a * spec.upper(t)) / v.t_star - 1e-9));
    upper[static_cast<std::size_t>(i - 1)] = static_cast<long>(std::floor((drift - a * spec.lower(t)) / v.t_star + 1e-9));
  }
  run.full = exact_corridor_walk(ksteps, lower, upper);
  if (endpoint) {
    const long hi = static_cast<long>(std::floor((v.psi_tstar * n - a * endpoint_level) / v.t_star + 1e-9));
    run.endpoint = exact_corridor_walk(ksteps, lower, upper, std::pair{std::numeric_limits<long>::min(), hi});
  }
  return run;
}

CorridorRun run_monte_carlo(const ArraySpec& arr, const CorridorSpec& spec, int n, double endpoint_level,
                            bool endpoint, const ExperimentOptions& opt) {
  const double a = arr.a_n(n);
  const SpineLaw& sp = *arr.spine;
  const long long r = ArraySpec::r_n(n);
  std::vector<unsigned char> inside(opt.mc_replicates), ends(opt.mc_replicates);
  parallel_for(opt.mc_replicates, opt.threads, [&](std::size_t k) {
    Stream rng = make_stream(opt.seed, k);
    double s = 0.0;
    bool ok = true;
    for (int i = 1; i <= n && ok; ++i) {
      SpineLaw::Step step = sp.sample(rng);
      while (step.nu > r) step = sp.sample(rng);  // rejection for nu_0 <= r_n
      s += step.increment;
      const double t = static_cast<double>(i) / n;
      ok = spec.lower(t) * a <= s && s <= spec.upper(t) * a;
    }
    inside[k] = ok;
    ends[k] = ok && s >= endpoint_level * a;
  });
  auto to_prob = [&](const std::vector<unsigned char>& hits) {
    const double p = static_cast<double>(std::count(hits.begin(), hits.end(), 1)) / opt.mc_replicates;
    return CorridorProbability{p, p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity()};
  };
  CorridorRun run;
  run.method = "mc";
  run.full = to_prob(inside);
  if (endpoint) run.endpoint = to_prob(ends);
  return run;
}

}  // namespace

ExperimentResult triangular_experiment(const ArraySpec& arr, const CorridorSpec& spec, const std::vector<int>& n_list,
                                       const ExperimentOptions& opt) {
  if (arr.family == ArraySpec::Family::spine_conditioned && !arr.spine)
    throw std::invalid_argument("spine family needs a spine law");
  for (std::size_t k = 0; k < n_list.size(); ++k)
    if (n_list[k] < 1 || (k > 0 && n_list[k] <= n_list[k - 1]))
      throw std::invalid_argument("n_list must be positive and increasing");

  ExperimentResult res;
  const double sigma2 = arr.limit_variance();
  res.target = corridor_constant(spec.with_sigma(std::sqrt(sigma2)));
  res.endpoint_b = opt.endpoint_b.value_or((spec.upper(1.0) - spec.lower(1.0)) / 4.0);
  if (opt.endpoint_variant && !(res.endpoint_b > 0.0)) throw std::invalid_argument("endpoint b must be positive");
  const double endpoint_level = spec.upper(1.0) - res.endpoint_b;

  for (int n : n_list) {
    ExperimentRow row;
    row.n = n;
    row.a_n = arr.a_n(n);
    row.witness = array_witness(arr, n);
    const CorridorRun run = arr.lattice_valued()
                                ? run_lattice(arr, spec, n, endpoint_level, opt.endpoint_variant)
                                : run_monte_carlo(arr, spec, n, endpoint_level, opt.endpoint_variant, opt);
    const double scale = row.a_n * row.a_n / n;
    row.method = run.method;
    row.prob = run.full.prob;
    row.log_prob = run.full.log_prob;
    row.scaled_log_prob = scale * run.full.log_prob;
    row.target = res.target;
    row.gap = std::abs(row.scaled_log_prob - res.target);
    if (run.endpoint) {
      row.endpoint_prob = run.endpoint->prob;
      row.endpoint_scaled_log_prob = scale * run.endpoint->log_prob;
    }
    res.rows.push_back(row);
  }

  // Moment conditions: bounded third moment, vanishing mean ratio, variance
  // converging to a positive limit.
  auto warn = [&res](const std::string& msg) {
    res.conditions_ok = false;
    res.warnings.push_back(msg);
  };
  for (const auto& row : res.rows) {
    const auto& w = row.witness;
    std::ostringstream os;
    os.precision(6);
    if (!std::isfinite(w.abs_moment)) {
      os << "n=" << w.n << ": third absolute moment is not finite";
      warn(os.str());
    } else if (!(w.variance > 0.0)) {
      os << "n=" << w.n << ": variance is not positive";
      warn(os.str());
    }
  }
  if (res.rows.size() >= 2) {
    const auto& first = res.rows.front().witness;
    const auto& last = res.rows.back().witness;
    if (last.mean_ratio > 1e-12 && last.mean_ratio >= first.mean_ratio)
      warn("mean of X^(n) is not o(a_n / n) along n_list");
    if (std::abs(last.variance - sigma2) > std::abs(first.variance - sigma2) + 1e-12)
      warn("variance of X^(n) does not approach its limit along n_list");
  } else if (!res.rows.empty() && res.rows.front().witness.mean_ratio > 1e-12) {
    warn("mean of X^(n) is non-zero");
  }
  return res;
}

}  // namespace kbrw
