#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kbrw/oracle.hpp"
#include "oracles.hpp"

using namespace kbrw;

TEST_CASE("exact survival matches tree enumeration") {
  for (const auto& [name, law] : library_laws()) {
    if (!is_integer_lattice(law)) continue;
    const VLaw v = make_vlaw(law);
    const LatticeLaw lat = LatticeLaw::from(v);
    for (double slope : {0.0, 0.05, 0.2, 0.7})
      for (int n : {1, 3, 5}) {
        INFO(name, " slope=", slope, " n=", n);
        CHECK(exact_path_survival(lat, BarrierSpec::in_V(slope), n) ==
              doctest::Approx(testing::tree_survival(v, slope, n)).epsilon(1e-12));
      }
  }
}

TEST_CASE("U and V barriers agree") {
  const VLaw v = make_vlaw(BinaryBernoulli{0.3});
  const LatticeLaw lat = LatticeLaw::from(v);
  const double eps = 0.03;
  CHECK(exact_path_survival(lat, BarrierSpec::in_U(eps), 40) ==
        doctest::Approx(exact_path_survival(lat, BarrierSpec::in_V(barrier_map(eps, v.profile)), 40)).epsilon(1e-12));
}

TEST_CASE("survival is monotone and bounded by Galton-Watson survival") {
  const ProductLaw law{{{0, 0.2}, {2, 0.3}, {3, 0.5}}, DiscreteStep{{{-1, 0.3}, {0, 0.4}, {1, 0.3}}}};
  const LatticeLaw lat = LatticeLaw::from(make_vlaw(law));
  double prev = 1.0;
  for (int n = 1; n <= 30; ++n) {
    const double r = exact_path_survival(lat, BarrierSpec::in_V(0.1), n);
    CHECK(r <= prev + 1e-15);
    CHECK(r <= gw_survival_to(lat, n) + 1e-15);
    prev = r;
  }
  CHECK(exact_path_survival(lat, BarrierSpec::in_V(0.05), 20) <= exact_path_survival(lat, BarrierSpec::in_V(0.1), 20));
  // extinction probability of the GW process: q = 0.2 + 0.3 q^2 + 0.5 q^3
  double q = 0.0;
  for (int i = 0; i < 2000; ++i) q = 0.2 + 0.3 * q * q + 0.5 * q * q * q;
  CHECK(gw_survival_to(lat, 2000) == doctest::Approx(1.0 - q).epsilon(1e-9));
  CHECK(gw_survival_to(LatticeLaw::from(make_vlaw(BinaryBernoulli{0.3})), 50) == 1.0);
}

TEST_CASE("corridor walk matches brute force over 3^12 paths") {
  const std::vector<IntAtom> step{{-1, 1.0 / 3}, {0, 1.0 / 3}, {1, 1.0 / 3}};
  const std::vector<std::pair<long, double>> brute_step{{-1, 1.0 / 3}, {0, 1.0 / 3}, {1, 1.0 / 3}};
  std::vector<long> lo(12), hi(12);
  for (int i = 0; i < 12; ++i) {
    lo[static_cast<std::size_t>(i)] = -2 + i / 4;
    hi[static_cast<std::size_t>(i)] = 2 + (i % 3 == 0);
  }
  const auto r = exact_corridor_walk(step, lo, hi);
  const double b = testing::brute_corridor(brute_step, lo, hi);
  CHECK(r.prob == doctest::Approx(b).epsilon(1e-13));
  CHECK(r.log_prob == doctest::Approx(std::log(b)).epsilon(1e-13));
  // skewed step and an endpoint window
  const std::vector<IntAtom> skew{{-1, 0.2}, {0, 0.5}, {2, 0.3}};
  const std::vector<std::pair<long, double>> bskew{{-1, 0.2}, {0, 0.5}, {2, 0.3}};
  auto lo2 = lo, hi2 = hi;
  lo2.back() = hi2.back() = 1;
  CHECK(exact_corridor_walk(skew, lo, hi, std::pair{1L, 1L}).prob ==
        doctest::Approx(testing::brute_corridor(bskew, lo2, hi2)).epsilon(1e-13));
}

TEST_CASE("corridor walk keeps log precision far below underflow") {
  const std::vector<IntAtom> step{{-1, 0.5}, {1, 0.5}};
  const int n = 20000;
  std::vector<long> lo(n, -1), hi(n, 1);
  // simple walk in {-1,0,1}: odd steps are at +-1, even steps return to 0
  const auto r = exact_corridor_walk(step, lo, hi);
  CHECK(r.prob == 0.0);
  CHECK(r.log_prob == doctest::Approx((n / 2) * std::log(0.5)).epsilon(1e-12));
  std::vector<long> empty_lo(3, 2), empty_hi(3, 1);
  CHECK(exact_corridor_walk(step, empty_lo, empty_hi).log_prob == -std::numeric_limits<double>::infinity());
}

TEST_CASE("converged rho doubles until stable") {
  const LatticeLaw lat = LatticeLaw::from(make_vlaw(BinaryBernoulli{0.3}));
  const auto c = converged_rho(lat, 0.05);
  CHECK(c.n_used == 1600);
  CHECK(std::abs(c.rho - c.rho_half) < 0.01 * c.rho);
  CHECK(std::log(c.rho) == doctest::Approx(-9.384).epsilon(1e-3));
  CHECK_THROWS(converged_rho(lat, 0.01, 100, 0.01, 400));
}

TEST_CASE("lattice conversion") {
  CHECK_THROWS_AS(LatticeLaw::from(make_vlaw(ProductLaw{{{1, 0.5}, {3, 0.5}}, GaussianStep{0.0, 1.0}})), ValidationError);
  CHECK_THROWS_AS(to_int_atoms({{0.5, 1.0}}), ValidationError);
  const auto a = to_int_atoms({{-2.0, 0.25}, {3.0, 0.75}});
  REQUIRE(a.size() == 2);
  CHECK(a[0].value == -2);
  CHECK(a[1].value == 3);
  const LatticeLaw lat = LatticeLaw::from(make_vlaw(BinaryBernoulli{0.3}));
  // lowest admitted U-sum: smallest k with psi* j - t* k <= slope j
  for (int j : {1, 5, 17}) {
    const long k = lat.lowest_admitted(0.1, j);
    CHECK(barrier_admits(0.1, lat.psi_tstar * j - lat.t_star * k, j));
    CHECK_FALSE(barrier_admits(0.1, lat.psi_tstar * j - lat.t_star * (k - 1), j));
  }
}
