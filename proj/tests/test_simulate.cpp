#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kbrw/oracle.hpp"
#include "kbrw/simulate.hpp"
#include "oracles.hpp"

using namespace kbrw;

namespace {
McOptions mc(std::size_t reps, std::uint64_t seed, std::size_t cap = kNoEscapeCap) {
  McOptions o;
  o.replicates = reps;
  o.seed = seed;
  o.escape_cap = cap;
  return o;
}

bool within(const SurvivalEstimate& e, double exact, double k = 3.0) {
  const double se = std::sqrt(std::max(exact * (1 - exact), 1e-12) / e.replicates);
  return std::abs(e.p_hat - exact) <= k * se;
}
}  // namespace

TEST_CASE("barrier admission") {
  CHECK(barrier_admits(0.1, 0.5, 5));
  CHECK(barrier_admits(0.1, 0.5 + 1e-12, 5));
  CHECK_FALSE(barrier_admits(0.1, 0.51, 5));
  CHECK(barrier_admits(std::numeric_limits<double>::infinity(), 1e300, 1));
}

TEST_CASE("U barrier converts to the V barrier") {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  const auto b = BarrierSpec::in_U(0.02).to_V(v.profile);
  CHECK(b.coordinate == BarrierSpec::Coordinate::V_upper);
  CHECK(b.slope == doctest::Approx(0.02 * v.t_star));
}

TEST_CASE("Monte Carlo survival agrees with tree enumeration") {
  const OffspringLaw explicit_law = ExplicitFinite{{{{0, 1}, 0.4}, {{0, 0, 1}, 0.3}, {{-1, 0, 0}, 0.2}, {{2}, 0.1}}};
  for (const OffspringLaw& law : {OffspringLaw{BinaryBernoulli{0.3}}, explicit_law}) {
    const VLaw v = make_vlaw(law);
    for (double slope : {0.05, 0.3}) {
      const double exact = testing::tree_survival(v, slope, 6);
      const auto e = estimate_rho(v, slope, 6, mc(40000, 77));
      INFO(law_name(law), " slope=", slope, " exact=", exact, " mc=", e.p_hat);
      CHECK(within(e, exact));
      CHECK(e.cap_hits == 0);
      CHECK(e.ci_low <= e.p_hat);
      CHECK(e.p_hat <= e.ci_high);
    }
  }
}

TEST_CASE("survival is monotone in n and slope") {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  std::vector<std::vector<SurvivalEstimate>> grid;
  for (double slope : {0.05, 0.2}) {
    grid.emplace_back();
    for (int n : {4, 8, 12}) grid.back().push_back(estimate_rho(v, slope, n, mc(20000, 5)));
  }
  auto se = [](const SurvivalEstimate& a, const SurvivalEstimate& b) {
    return 3.0 * std::sqrt(a.p_hat * (1 - a.p_hat) / a.replicates + b.p_hat * (1 - b.p_hat) / b.replicates);
  };
  for (const auto& row : grid)
    for (std::size_t i = 1; i < row.size(); ++i) CHECK(row[i].p_hat <= row[i - 1].p_hat + se(row[i], row[i - 1]));
  for (std::size_t i = 0; i < grid[0].size(); ++i) CHECK(grid[0][i].p_hat <= grid[1][i].p_hat + se(grid[0][i], grid[1][i]));
}

TEST_CASE("escape cap biases upward only") {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  const auto exact = estimate_rho(v, 0.3, 10, mc(5000, 8));
  const auto capped = estimate_rho(v, 0.3, 10, mc(5000, 8, 4));
  CHECK(capped.cap_hits > 0);
  CHECK(capped.survivors >= exact.survivors);
}

TEST_CASE("estimates are reproducible across thread counts") {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  auto o = mc(3000, 42);
  o.threads = 1;
  const auto a = estimate_rho(v, 0.1, 10, o);
  o.threads = 4;
  const auto b = estimate_rho(v, 0.1, 10, o);
  CHECK(a.survivors == b.survivors);
  CHECK_THROWS(estimate_rho(v, 0.1, 10, mc(10, 1)));
}

TEST_CASE("killed run traces the population") {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  const OffspringSampler s(v.base);
  Stream rng = make_stream(1, 1);
  const auto run = run_killed_brw(v, s, BarrierSpec::in_V(std::numeric_limits<double>::infinity()), 5, kNoEscapeCap, rng);
  CHECK(run.survived);
  REQUIRE(run.pop_trace.size() == 6);
  for (std::size_t j = 0; j < run.pop_trace.size(); ++j) CHECK(run.pop_trace[j] == (std::size_t{1} << j));
}

TEST_CASE("G counting matches the definition") {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  const OffspringSampler s(v.base);
  GwEmbedParams g;
  g.n = 9;
  g.L = 6;
  g.alpha = 0.5;
  g.M = 0.3;
  g.eps = 2.0;
  g.check();
  std::size_t nonzero = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    Stream rng = make_stream(99, i);
    const FamilyTree t = sample_tree(v, s, g.n, rng, 1 << 20);
    const auto c = count_G(t, g);
    CHECK(c == testing::brute_count_G(t, g));
    nonzero += c > 0;
  }
  CHECK(nonzero > 0);
}

TEST_CASE("pruned trees keep only admitted heads") {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  const OffspringSampler s(v.base);
  for (std::uint64_t i = 0; i < 50; ++i) {
    Stream rng = make_stream(7, i);
    const FamilyTree t = sample_tree(v, s, 10, rng, 1 << 20, 0.75, 8);
    for (int j = 1; j <= 8; ++j)
      for (const auto& node : t.levels[static_cast<std::size_t>(j)]) CHECK(barrier_admits(0.75, node.v, j));
  }
}

TEST_CASE("embedding parameters are checked") {
  CHECK_THROWS_AS((GwEmbedParams{12, 0.1, 0.5, 11, 2.0}.check()), ValidationError);
  CHECK_THROWS_AS((GwEmbedParams{12, 1.0, 1.5, 11, 0.1}.check()), ValidationError);
  CHECK_THROWS_AS((GwEmbedParams{12, 1.0, 0.5, 12, 0.1}.check()), ValidationError);
  CHECK_NOTHROW((GwEmbedParams{12, 1.0, 0.5, 11, 0.1}.check()));
}

TEST_CASE("M and kappa") {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  const auto mk = estimate_M_kappa(v, 10, mc(1000, 4));
  CHECK(mk.M > 0.0);
  CHECK(mk.M <= v.psi_tstar + 1e-12);
  CHECK(mk.kappa_hat > 0.0);
  CHECK(mk.kappa_hat <= 1.0);
  for (double p : mk.max_below) CHECK(p >= 0.5);
}
