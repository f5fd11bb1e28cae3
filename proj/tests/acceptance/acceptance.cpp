// Acceptance criteria 1-11. One PASS/FAIL line per criterion; the exit
// status is non-zero when any criterion fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "../oracles.hpp"
#include "kbrw/analysis.hpp"
#include "kbrw/mogulskii.hpp"
#include "kbrw/oracle.hpp"
#include "kbrw/simulate.hpp"
#include "kbrw/spine.hpp"
#include "kbrw/transform.hpp"

using namespace kbrw;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s criterion %2d: %s | %s | %.2fs (budget %.0fs%s)\n", pass ? "PASS" : "FAIL", id, title,
              o.detail.c_str(), secs, budget_s, in_time ? "" : ", exceeded");
  std::fflush(stdout);
}

const double p0 = (2.0 - std::sqrt(3.0)) / 4.0;

Outcome closed_forms() {
  const auto prof = solve_tstar(BinaryBernoulli{p0});
  const double dg = std::abs(prof.gamma - 0.5);
  const double dt = std::abs(prof.t_star - std::log(7 + 4 * std::sqrt(3.0)));
  const double dp = std::abs(prof.psi2_tstar - 0.25);
  return {dg < 1e-9 && dt < 1e-9 && dp < 1e-9, fmt("|gamma-1/2|=%.1e |t*-log(7+4r3)|=%.1e |psi''-1/4|=%.1e", dg, dt, dp)};
}

Outcome beta_cross_check() {
  const double a = beta_bs(p0), b = beta_bs_via_gamma_derivative(p0);
  const double rel = std::abs(a - b) / a;
  return {rel < 1e-4, fmt("beta=%.9f alt=%.9f rel=%.1e", a, b, rel)};
}

Outcome identity_gate() {
  double worst = 0.0;
  for (const auto& [name, law] : library_laws()) {
    const VLaw v = make_vlaw(law);
    worst = std::max({worst, std::abs(v.mass_identity - 1.0), std::abs(v.centering_identity)});
  }
  return {worst < 1e-12, fmt("%zu laws, worst deviation %.1e", library_laws().size(), worst)};
}

Outcome many_to_one() {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  const auto f = PathFunctional::corridor_below(0.5);
  const double exact = testing::first_moment_functional(v, f, 4);
  CheckOptions opt;
  opt.n = 4;
  opt.replicates = 100000;
  opt.seed = 20240401;
  const auto r = many_to_one_check(make_spine(v), f, opt);
  const bool ok = r.spine_band.contains(exact) && r.tree_band.contains(exact);
  return {ok, fmt("exact=%.6f spine=[%.6f,%.6f] tree=[%.6f,%.6f]", exact, r.spine_band.low, r.spine_band.high,
                  r.tree_band.low, r.tree_band.high)};
}

Outcome oracle_agreement() {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  const LatticeLaw lat = LatticeLaw::from(v);
  int ok = 0, total = 0;
  double worst = 0.0;
  for (int n : {6, 10, 12})
    for (double s : {0.05, 0.1, 0.2}) {
      McOptions opt;
      opt.replicates = 100000;
      opt.escape_cap = kNoEscapeCap;
      opt.seed = 31337;
      const auto e = estimate_rho(v, s, n, opt);
      const double exact = exact_path_survival(lat, BarrierSpec::in_V(s), n);
      const double se = std::sqrt(e.p_hat * (1 - e.p_hat) / e.replicates);
      const double z = std::abs(e.p_hat - exact) / se;
      worst = std::max(worst, z);
      ok += z <= 3.0;
      ++total;
    }
  return {ok == total, fmt("%d/%d cells within 3 stderr, worst |z|=%.2f", ok, total, worst)};
}

Outcome desk_scale_theorem() {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  const LatticeLaw lat = LatticeLaw::from(v);
  std::vector<double> x, y;
  std::string ns;
  for (double eps : {0.05, 0.04, 0.03, 0.02}) {
    const auto c = converged_rho(lat, eps);
    x.push_back(1.0 / std::sqrt(eps));
    y.push_back(std::log(c.rho));
    ns += std::to_string(c.n_used) + " ";
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / x.size(), my += y[i] / y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  const double slope = sxy / sxx;
  const double target = -v.profile.beta_V;
  const double rel = std::abs(slope - target) / std::abs(target);
  return {slope < 0 && rel <= 0.25, fmt("slope=%.4f target=%.4f rel=%.1f%% n_used=%s", slope, target, 100 * rel, ns.c_str())};
}

Outcome lemma_direction() {
  const LatticeLaw lat = LatticeLaw::from(make_vlaw(BinaryBernoulli{0.3}));
  std::vector<double> vals;
  std::string s;
  for (int n : {250, 500, 1000, 2000}) {
    const double b = std::pow(n, -2.0 / 3.0);
    vals.push_back(std::pow(n, -1.0 / 3.0) * std::log(exact_path_survival(lat, BarrierSpec::in_V(b), n)));
    s += fmt("%.5f ", vals.back());
  }
  bool inc = true;
  for (std::size_t i = 1; i < vals.size(); ++i) inc = inc && vals[i] > vals[i - 1];
  return {inc, "values " + s + (inc ? "increasing" : "not increasing")};
}

Outcome gw_embedding() {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  McOptions mopt;
  mopt.replicates = 2000;
  mopt.seed = 77;
  const auto mk = estimate_M_kappa(v, 10, mopt);
  GwEmbedParams g;
  g.n = 12;
  g.L = 11;
  g.alpha = 0.5;
  g.M = mk.M;
  g.eps = g.M * (g.n - g.L) / ((1.0 - g.alpha) * g.L);
  g.check();
  McOptions opt;
  opt.replicates = 10000;
  opt.seed = 78;
  const auto h = simulate_G(v, g, opt);
  const double p = h.nonempty_fraction();
  const double se = std::sqrt(p * (1 - p) / h.replicates);
  const double rho = exact_path_survival(LatticeLaw::from(v), BarrierSpec::in_V(g.alpha * g.eps), g.n);
  return {p >= 0.5 * rho - 3 * se,
          fmt("M=%.4f eps=%.4f P(G nonempty)=%.4f (se %.4f) half rho=%.4f", g.M, g.eps, p, se, 0.5 * rho)};
}

Outcome mogulskii_closed_forms() {
  const double c8 = std::abs(corridor_constant(CorridorSpec::constant(-1, 1)) + pi * pi / 8);
  const double c16 = std::abs(corridor_constant(CorridorSpec::constant(-std::sqrt(2.0), std::sqrt(2.0))) + pi * pi / 16);
  double add = 0.0;
  for (double m : {-0.5, 0.0, 0.25, 0.8})
    add = std::max(add, std::abs(ito_mckean_f(-1, 1, -1, m) + ito_mckean_f(-1, 1, m, 1) - ito_mckean_f(-1, 1, -1, 1)));
  const double f = ito_mckean_f(-1, 1, -1, 1);
  const auto mc = testing::brownian_corridor_mc(-1, 1, -1, 1, 1000000, 200, 4242);
  const double z = std::abs(mc.mean - f) / mc.stderr_mean;
  return {c8 < 1e-10 && c16 < 1e-10 && add < 1e-12 && z <= 3.0,
          fmt("|c+pi2/8|=%.1e |c+pi2/16|=%.1e additivity=%.1e f=%.6f mc=%.6f z=%.2f", c8, c16, add, f, mc.mean, z)};
}

Outcome mogulskii_convergence() {
  const auto res = triangular_experiment(ArraySpec::lazy_walk(), CorridorSpec::constant(-1, 1), {1000, 10000, 100000});
  const auto& r = res.rows;
  const bool shrinking = r[1].gap < r[0].gap && r[2].gap < r[1].gap;
  const double rel = r[2].gap / std::abs(res.target);
  return {shrinking && rel <= 0.2, fmt("target=%.5f gaps %.4f %.4f %.4f, final %.1f%%", res.target, r[0].gap, r[1].gap,
                                       r[2].gap, 100 * rel)};
}

std::string run_to_string(const std::string& args) {
  const auto out = std::filesystem::temp_directory_path() / "kbrw_acceptance.out";
  const std::string cmd = std::string(KBRW_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) throw std::runtime_error("command failed: " + args);
  std::ifstream f(out, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const std::string dir = KBRW_CONFIG_DIR;
  const std::vector<std::pair<std::string, std::string>> runs{
      {"survival", "p03.json"},    {"spine-check", "p03.json"},          {"gw-embed", "p03.json"},
      {"escape-sweep", "p03.json"}, {"mogulskii", "mogulskii_gaussian.json"}};
  int same = 0;
  for (const auto& [cmd, cfg] : runs) {
    const std::string args = cmd + " --config " + dir + "/" + cfg;
    const auto a = run_to_string(args);
    const auto b = run_to_string(args);
    const auto c = run_to_string(args + " --threads 2");
    same += !a.empty() && a == b && a == c;
  }
  return {same == static_cast<int>(runs.size()), fmt("%d/%zu commands byte-identical (reruns and thread counts)", same, runs.size())};
}

}  // namespace

int main() {
  criterion(1, "critical constants at p0", 1, closed_forms);
  criterion(2, "beta_bs cross-check", 1, beta_cross_check);
  criterion(3, "boundary-case identity gate", 1, identity_gate);
  criterion(4, "many-to-one exact value in both MC bands", 30, many_to_one);
  criterion(5, "oracle vs Monte Carlo survival", 120, oracle_agreement);
  criterion(6, "log rho against eps^-1/2 regression", 300, desk_scale_theorem);
  criterion(7, "n^-1/3 log rho(n^-2/3, n) increasing", 120, lemma_direction);
  criterion(8, "embedded GW non-emptiness bound", 120, gw_embedding);
  criterion(9, "corridor closed forms", 60, mogulskii_closed_forms);
  criterion(10, "lazy walk corridor convergence", 180, mogulskii_convergence);
  criterion(11, "determinism of stochastic commands", 60, determinism);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
