#include "kbrw/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>
#include <tuple>

#include "kbrw/analysis.hpp"
#include "kbrw/mogulskii.hpp"
#include "kbrw/oracle.hpp"
#include "kbrw/rng.hpp"
#include "kbrw/simulate.hpp"
#include "kbrw/spine.hpp"
#include "kbrw/transform.hpp"

namespace kbrw {

using nlohmann::json;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

using Clock = std::chrono::steady_clock;

constexpr const char* kSchema = "kbrw-csv/1";

class Deadline {
 public:
  explicit Deadline(long long ms) : start_(Clock::now()), limit_ms_(ms) {}
  void check() const {
    if (limit_ms_ > 0 && elapsed_ms() > limit_ms_) throw BudgetExceeded("runtime budget exceeded");
  }
  long long elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start_).count();
  }

 private:
  Clock::time_point start_;
  long long limit_ms_;
};

class Csv {
 public:
  Csv(const std::string& command, const ExperimentConfig& cfg, std::optional<std::uint64_t> seed) {
    os_ << "# " << kSchema << " command=" << command << " config_hash=" << config_hash(cfg.raw);
    if (seed) os_ << " seed=" << *seed;
    os_ << '\n';
  }
  void header(std::initializer_list<std::string> cols) { row(std::vector<std::string>(cols)); }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }
  void comment(const std::string& text) { os_ << "# " << text << '\n'; }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

std::string num(double x) { return format_number(x); }
template <class I>
std::string integer(I x) {
  return std::to_string(x);
}

const OffspringLaw& need_law(const ExperimentConfig& cfg) {
  if (!cfg.law) throw ValidationError("config has no 'law' section");
  return *cfg.law;
}

std::uint64_t need_seed(const ExperimentConfig& cfg, const RunFlags& flags) {
  if (flags.seed) return *flags.seed;
  if (cfg.seed) return *cfg.seed;
  throw ValidationError("a seed is mandatory for stochastic commands (config 'seed' or --seed)");
}

unsigned threads_of(const ExperimentConfig& cfg, const RunFlags& flags) {
  return flags.threads ? *flags.threads : cfg.threads;
}

std::size_t escape_cap_of(const ExperimentConfig& cfg, const RunFlags& flags, const json& section) {
  if (flags.escape_cap) return *flags.escape_cap;
  if (section.contains("escape_cap")) {
    const auto& v = section.at("escape_cap");
    if (v.is_string() && v.get<std::string>() == "inf") return kNoEscapeCap;
    return v.get<std::size_t>();
  }
  if (cfg.escape_cap) return *cfg.escape_cap;
  return kDefaultEscapeCap;
}

const json& section(const ExperimentConfig& cfg, const char* name) {
  static const json empty = json::object();
  return cfg.raw.contains(name) ? cfg.raw.at(name) : empty;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

template <class T>
std::vector<T> need_list(const json& j, const char* key, const char* where) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).empty())
    throw ValidationError(std::string(where) + ": '" + key + "' must be a non-empty array");
  return j.at(key).get<std::vector<T>>();
}

// Row seed derived from the base seed and a row key, so rows stay
// independent of the order in which they are produced.
std::uint64_t row_seed(std::uint64_t seed, double slope, int n) {
  std::uint64_t bits = 0;
  static_assert(sizeof bits == sizeof slope);
  std::memcpy(&bits, &slope, sizeof bits);
  return mix64(seed ^ mix64(bits ^ mix64(static_cast<std::uint64_t>(n))));
}

std::string runtime_cell(const RunFlags& flags, Clock::time_point start) {
  if (!flags.timing) return "0";
  return integer(std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
}

bool is_special_p0(double p) { return std::abs(16.0 * p * (1.0 - p) - 1.0) <= 1e-9; }

}  // namespace

CommandOutput cmd_analyze(const ExperimentConfig& cfg, const RunFlags&) {
  const OffspringLaw law = validated(need_law(cfg));
  const auto report = validate(law);
  const CriticalProfile prof = solve_tstar(law);
  const VLaw v = make_vlaw(law, prof);
  Csv csv("analyze", cfg, std::nullopt);
  csv.header({"quantity", "value"});
  auto put = [&csv](const std::string& k, double x) { csv.row({k, num(x)}); };
  csv.row({"law", law_name(law)});
  put("mean_children", report.mean_children);
  put("t_star", prof.t_star);
  put("gamma", prof.gamma);
  put("psi_tstar", prof.psi_tstar);
  put("psi1_tstar", prof.psi1_tstar);
  put("psi2_tstar", prof.psi2_tstar);
  put("sigma2", prof.sigma2);
  put("beta_U", prof.beta_U);
  put("beta_V", prof.beta_V);
  put("root_residual", prof.residual);
  put("identity_sum_exp", v.mass_identity);
  put("identity_sum_v_exp", v.centering_identity);
  put("delta1", v.delta1);
  put("moment_delta1", v.moment_delta1);
  put("delta2", v.delta2);
  put("moment_delta2", v.moment_delta2);
  if (const auto* b = std::get_if<BinaryBernoulli>(&law)) {
    put("p", b->p);
    if (b->p < 0.5) {
      const double g = gamma_bs_solve(b->p);
      put("gamma_bs", g);
      put("gamma_bs_residual", gamma_bs_residual(b->p, g));
      put("gamma_bs_minus_gamma", g - prof.gamma);
      put("beta_bs", beta_bs(b->p));
      if (is_special_p0(b->p)) {
        put("beta_bs_via_gamma_derivative", beta_bs_via_gamma_derivative(b->p));
        put("aldous_rate", aldous_rate(b->p));
      }
    }
  }
  return {csv.str(), {}};
}

CommandOutput cmd_survival(const ExperimentConfig& cfg, const RunFlags& flags) {
  const OffspringLaw law = validated(need_law(cfg));
  const json& sec = section(cfg, "survival");
  const std::uint64_t seed = need_seed(cfg, flags);
  const auto slopes = need_list<double>(sec, "slopes", "survival");
  const auto depths = need_list<int>(sec, "depths", "survival");
  const std::string coord = get_or<std::string>(sec, "coordinate", "V");
  if (coord != "V" && coord != "U") throw ValidationError("survival: coordinate must be 'V' or 'U'");
  const auto replicates = get_or<std::size_t>(sec, "replicates", 100000);
  const bool want_oracle = get_or<bool>(sec, "oracle", true);
  const std::size_t cap = escape_cap_of(cfg, flags, sec);
  const Deadline deadline(flags.max_runtime_ms);

  const VLaw v = make_vlaw(law);
  CommandOutput out;
  std::optional<LatticeLaw> lattice;
  if (want_oracle) {
    if (is_integer_lattice(law))
      lattice = LatticeLaw::from(v);
    else
      out.warnings.push_back("oracle column omitted: law is not integer-lattice valued");
  }

  using Key = std::tuple<std::string, double, int>;
  std::map<Key, std::vector<std::string>> rows;
  for (double slope : slopes) {
    if (!(slope >= 0.0)) throw ValidationError("survival: slopes must be non-negative");
    const double v_slope = coord == "U" ? barrier_map(slope, v.profile) : slope;
    for (int n : depths) {
      if (n < 1) throw ValidationError("survival: depths must be positive");
      auto start = Clock::now();
      McOptions opt;
      opt.replicates = replicates;
      opt.escape_cap = cap;
      opt.seed = row_seed(seed, slope, n);
      opt.threads = threads_of(cfg, flags);
      const SurvivalEstimate e = estimate_rho(v, v_slope, n, opt);
      rows[{"mc", slope, n}] = {"mc", coord, num(slope), integer(n), num(e.p_hat), num(e.ci_low), num(e.ci_high),
                                integer(e.replicates), integer(seed), integer(e.cap_hits),
                                runtime_cell(flags, start)};
      deadline.check();
      if (lattice) {
        start = Clock::now();
        const double rho = exact_path_survival(*lattice, BarrierSpec::in_V(v_slope), n);
        rows[{"oracle", slope, n}] = {"oracle", coord, num(slope), integer(n), num(rho), num(rho), num(rho),
                                      "0", integer(seed), "0", runtime_cell(flags, start)};
        deadline.check();
      }
    }
  }
  Csv csv("survival", cfg, seed);
  csv.header({"method", "coordinate", "slope", "n", "estimate", "ci_low", "ci_high", "replicates", "seed", "cap_hits",
              "runtime_ms"});
  for (const auto& [key, cells] : rows) csv.row(cells);
  out.csv = csv.str();
  return out;
}

CommandOutput cmd_pemantle(const ExperimentConfig& cfg, const RunFlags& flags) {
  const OffspringLaw law = validated(need_law(cfg));
  const auto* b = std::get_if<BinaryBernoulli>(&law);
  if (!b) throw ValidationError("pemantle: needs a binary_bernoulli law");
  if (!(b->p < 0.5))
    throw NoCriticalPoint("pemantle: p >= 1/2, the critical equation has no solution (1-labels percolate)");
  const json& sec = section(cfg, "pemantle");
  const auto eps_list = need_list<double>(sec, "eps_u", "pemantle");
  const int n_start = get_or<int>(sec, "n_start", 100);
  const double rel_tol = get_or<double>(sec, "rel_tol", 0.01);
  const int n_max = get_or<int>(sec, "n_max", 1 << 16);
  const Deadline deadline(flags.max_runtime_ms);

  const VLaw v = make_vlaw(law);
  const LatticeLaw lattice = LatticeLaw::from(v);
  const double beta = beta_bs(b->p);
  std::vector<double> sorted = eps_list;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  Csv csv("pemantle", cfg, std::nullopt);
  csv.header({"eps_U", "eps_V", "n_used", "rho_oracle", "sqrt_eps_times_log_rho", "beta_target"});
  for (double eps : sorted) {
    if (!(eps > 0.0)) throw ValidationError("pemantle: eps_u values must be positive");
    const double eps_v = barrier_map(eps, v.profile);
    ConvergedRho c;
    try {
      c = converged_rho(lattice, eps_v, n_start, rel_tol, n_max);
    } catch (const std::runtime_error& e) {
      throw BudgetExceeded(std::string("pemantle: ") + e.what());
    }
    csv.row({num(eps), num(eps_v), integer(c.n_used), num(c.rho), num(std::sqrt(eps) * std::log(c.rho)), num(-beta)});
    deadline.check();
  }
  if (is_special_p0(b->p)) csv.comment("aldous_rate=" + num(aldous_rate(b->p)));
  return {csv.str(), {}};
}

namespace {

CorridorSpec parse_corridor(const json& j) {
  const double sigma = get_or<double>(j, "sigma", 1.0);
  const auto type = get_or<std::string>(j, "type", "constant");
  if (type == "constant") return CorridorSpec::constant(get_or<double>(j, "lower", -1.0), get_or<double>(j, "upper", 1.0), sigma);
  if (type == "linear") {
    const auto lo = need_list<double>(j, "lower", "corridor");
    const auto hi = need_list<double>(j, "upper", "corridor");
    if (lo.size() != 2 || hi.size() != 2) throw ValidationError("corridor: linear bounds are [intercept, slope]");
    return CorridorSpec::linear(lo[0], lo[1], hi[0], hi[1], sigma);
  }
  if (type == "samples")
    return CorridorSpec(need_list<double>(j, "lower", "corridor"), need_list<double>(j, "upper", "corridor"), sigma);
  throw ValidationError("corridor: unknown type '" + type + "'");
}

ArraySpec parse_family(const json& j, const ExperimentConfig& cfg) {
  const auto type = get_or<std::string>(j, "type", "lazy");
  ArraySpec arr;
  if (type == "lazy") {
    arr = ArraySpec::lazy_walk();
  } else if (type == "lattice") {
    std::vector<IntAtom> atoms;
    double mass = 0.0;
    for (const auto& a : need_list<json>(j, "atoms", "family")) {
      const double value = a.at(0).get<double>();
      if (std::abs(value - std::round(value)) > 1e-12) throw ValidationError("family: lattice atoms must be integers");
      atoms.push_back({std::lround(value), a.at(1).get<double>()});
      mass += atoms.back().prob;
    }
    if (std::abs(mass - 1.0) > 1e-12) throw ValidationError("family: atom probabilities must sum to 1");
    arr = ArraySpec::lattice(atoms);
  } else if (type == "spine") {
    arr = ArraySpec::spine_conditioned(make_spine(make_vlaw(validated(need_law(cfg)))));
  } else {
    throw ValidationError("family: unknown type '" + type + "'");
  }
  arr.a_exponent = get_or<double>(j, "a_exponent", 1.0 / 3.0);
  if (!(arr.a_exponent > 0.0 && arr.a_exponent < 0.5))
    throw ValidationError("family: a_n = n^e needs 0 < e < 1/2 (a_n -> inf, a_n^2/n -> 0)");
  return arr;
}

}  // namespace

CommandOutput cmd_mogulskii(const ExperimentConfig& cfg, const RunFlags& flags) {
  const json& sec = section(cfg, "mogulskii");
  const ArraySpec arr = parse_family(get_or<json>(sec, "family", json::object()), cfg);
  const CorridorSpec corridor = parse_corridor(get_or<json>(sec, "corridor", json::object()));
  const auto n_list = need_list<int>(sec, "n_list", "mogulskii");
  ExperimentOptions opt;
  opt.endpoint_variant = sec.contains("endpoint_b") || get_or<bool>(sec, "endpoint", false);
  if (sec.contains("endpoint_b")) opt.endpoint_b = sec.at("endpoint_b").get<double>();
  opt.mc_replicates = get_or<std::size_t>(sec, "mc_replicates", 1000000);
  opt.threads = threads_of(cfg, flags);
  std::optional<std::uint64_t> seed;
  if (!arr.lattice_valued()) {
    seed = need_seed(cfg, flags);
    opt.seed = *seed;
  }
  const Deadline deadline(flags.max_runtime_ms);
  const ExperimentResult res = triangular_experiment(arr, corridor, n_list, opt);
  deadline.check();

  Csv csv("mogulskii", cfg, seed);
  if (opt.endpoint_variant)
    csv.header({"n", "a_n", "prob", "scaled_log_prob", "target_constant", "gap", "endpoint_prob",
                "endpoint_scaled_log_prob", "check"});
  else
    csv.header({"n", "a_n", "prob", "scaled_log_prob", "target_constant", "gap", "check"});
  CommandOutput out;
  for (const auto& row : res.rows) {
    const auto& w = row.witness;
    const bool row_ok = std::isfinite(w.abs_moment) && w.variance > 0.0;
    std::vector<std::string> cells{integer(row.n), num(row.a_n), num(row.prob), num(row.scaled_log_prob),
                                   num(row.target), num(row.gap)};
    if (opt.endpoint_variant) {
      cells.push_back(num(*row.endpoint_prob));
      cells.push_back(num(*row.endpoint_scaled_log_prob));
    }
    cells.push_back(row_ok ? "ok" : "invariant_failure");
    csv.row(cells);
  }
  for (const auto& row : res.rows) {
    const auto& w = row.witness;
    csv.comment("witness n=" + integer(w.n) + " abs_moment3=" + num(w.abs_moment) + " mean=" + num(w.mean) +
                " mean_ratio=" + num(w.mean_ratio) + " variance=" + num(w.variance) + " nu_tail=" + num(w.nu_tail));
  }
  for (const auto& msg : res.warnings) {
    csv.comment("warning: " + msg);
    out.warnings.push_back(msg);
  }
  out.csv = csv.str();
  return out;
}

CommandOutput cmd_escape_sweep(const ExperimentConfig& cfg, const RunFlags& flags) {
  const OffspringLaw law = validated(need_law(cfg));
  const json& sec = section(cfg, "escape_sweep");
  const std::uint64_t seed = need_seed(cfg, flags);
  const auto caps = need_list<std::size_t>(sec, "caps", "escape_sweep");
  const auto slopes = need_list<double>(sec, "slopes", "escape_sweep");
  const auto depths = need_list<int>(sec, "depths", "escape_sweep");
  const auto replicates = get_or<std::size_t>(sec, "replicates", 10000);
  const Deadline deadline(flags.max_runtime_ms);
  const VLaw v = make_vlaw(law);
  std::optional<LatticeLaw> lattice;
  if (is_integer_lattice(law)) lattice = LatticeLaw::from(v);

  Csv csv("escape-sweep", cfg, seed);
  csv.header({"escape_cap", "slope", "n", "estimate", "ci_low", "ci_high", "cap_hits", "oracle"});
  std::vector<std::size_t> sorted_caps = caps;
  std::sort(sorted_caps.begin(), sorted_caps.end());
  for (double slope : slopes)
    for (int n : depths) {
      const std::string oracle = lattice ? num(exact_path_survival(*lattice, BarrierSpec::in_V(slope), n)) : "";
      for (std::size_t cap : sorted_caps) {
        McOptions opt;
        opt.replicates = replicates;
        opt.escape_cap = std::max<std::size_t>(cap, 1);
        // Same row seed for every cap: the sweep isolates the cap effect.
        opt.seed = row_seed(seed, slope, n);
        opt.threads = threads_of(cfg, flags);
        const auto e = estimate_rho(v, slope, n, opt);
        csv.row({integer(cap), num(slope), integer(n), num(e.p_hat), num(e.ci_low), num(e.ci_high),
                 integer(e.cap_hits), oracle});
        deadline.check();
      }
    }
  return {csv.str(), {}};
}

CommandOutput cmd_spine_check(const ExperimentConfig& cfg, const RunFlags& flags) {
  const OffspringLaw law = validated(need_law(cfg));
  const json& sec = section(cfg, "spine_check");
  CheckOptions opt;
  opt.seed = need_seed(cfg, flags);
  opt.n = get_or<int>(sec, "n", 4);
  opt.replicates = get_or<std::size_t>(sec, "replicates", 100000);
  opt.threads = threads_of(cfg, flags);
  const auto functionals = sec.contains("functionals") ? sec.at("functionals").get<std::vector<std::string>>()
                                                       : std::vector<std::string>{"one"};
  const Deadline deadline(flags.max_runtime_ms);
  const SpineLaw sp = make_spine(make_vlaw(law));
  Csv csv("spine-check", cfg, opt.seed);
  csv.header({"functional", "n", "tree_mean", "tree_stderr", "spine_mean", "spine_stderr", "verdict"});
  for (const auto& id : functionals) {
    PathFunctional f;
    try {
      f = parse_functional(id);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
    const CheckReport r = many_to_one_check(sp, f, opt);
    csv.row({f.name(), integer(opt.n), num(r.tree.mean), num(r.tree.stderr_mean()), num(r.spine.mean),
             num(r.spine.stderr_mean()), r.vacuous ? "vacuous" : (r.pass ? "pass" : "fail")});
    deadline.check();
  }
  return {csv.str(), {}};
}

CommandOutput cmd_gw_embed(const ExperimentConfig& cfg, const RunFlags& flags) {
  const OffspringLaw law = validated(need_law(cfg));
  const json& sec = section(cfg, "gw_embed");
  const std::uint64_t seed = need_seed(cfg, flags);
  const VLaw v = make_vlaw(law);
  McOptions opt;
  opt.seed = seed;
  opt.threads = threads_of(cfg, flags);
  opt.replicates = get_or<std::size_t>(sec, "replicates", 10000);
  const Deadline deadline(flags.max_runtime_ms);

  GwEmbedParams params;
  params.n = get_or<int>(sec, "n", 12);
  params.alpha = get_or<double>(sec, "alpha", 0.5);
  params.L = get_or<int>(sec, "L", params.n - 1);
  std::optional<MKappa> mk;
  if (sec.contains("M")) {
    params.M = sec.at("M").get<double>();
  } else {
    McOptions mopt = opt;
    mopt.seed = mix64(seed ^ 0x4d4b4150ULL);
    mopt.replicates = get_or<std::size_t>(sec, "m_replicates", 2000);
    mk = estimate_M_kappa(v, get_or<int>(sec, "j_max", 10), mopt);
    params.M = mk->M;
  }
  // Smallest eps meeting the embedding inequality unless one is given.
  params.eps = sec.contains("eps") ? sec.at("eps").get<double>()
                                   : params.M * (params.n - params.L) / ((1.0 - params.alpha) * params.L);
  params.check();
  deadline.check();
  const GwHistogram h = simulate_G(v, params, opt);
  deadline.check();

  Csv csv("gw-embed", cfg, seed);
  csv.comment("n=" + integer(params.n) + " L=" + integer(params.L) + " alpha=" + num(params.alpha) +
              " eps=" + num(params.eps) + " M=" + num(params.M) +
              (mk ? " kappa_hat=" + num(mk->kappa_hat) : std::string()));
  const Interval ci = wilson_interval(h.nonempty(), h.replicates);
  std::string oracle;
  if (is_integer_lattice(law))
    oracle = num(exact_path_survival(LatticeLaw::from(v), BarrierSpec::in_V(params.alpha * params.eps), params.n));
  csv.comment("p_nonempty=" + num(h.nonempty_fraction()) + " ci_low=" + num(ci.low) + " ci_high=" + num(ci.high) +
              (oracle.empty() ? std::string() : " rho_alpha_eps_n=" + oracle));
  csv.header({"count", "replicates"});
  for (const auto& [k, c] : h.counts) csv.row({integer(k), integer(c)});
  return {csv.str(), {}};
}

int run_command(const std::string& name, const ExperimentConfig& cfg, const RunFlags& flags, CommandOutput& out,
                std::string& errors) {
  try {
    if (name == "analyze")
      out = cmd_analyze(cfg, flags);
    else if (name == "survival")
      out = cmd_survival(cfg, flags);
    else if (name == "pemantle")
      out = cmd_pemantle(cfg, flags);
    else if (name == "mogulskii")
      out = cmd_mogulskii(cfg, flags);
    else if (name == "escape-sweep")
      out = cmd_escape_sweep(cfg, flags);
    else if (name == "spine-check")
      out = cmd_spine_check(cfg, flags);
    else if (name == "gw-embed")
      out = cmd_gw_embed(cfg, flags);
    else
      throw ValidationError("unknown command '" + name + "'");
    return exit_code::ok;
  } catch (const ValidationError& e) {
    errors = std::string("validation failure: ") + e.what();
    return exit_code::validation;
  } catch (const NoCriticalPoint& e) {
    errors = std::string("percolation: ") + e.what();
    return exit_code::no_critical_point;
  } catch (const BudgetExceeded& e) {
    errors = e.what();
    return exit_code::budget;
  } catch (const nlohmann::json::exception& e) {
    errors = std::string("validation failure: config field has the wrong type: ") + e.what();
    return exit_code::validation;
  }
}

}  // namespace kbrw
