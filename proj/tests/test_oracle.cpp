#include <doctest.h>

#include <bit>
#include <cmath>
#include <numbers>

#include "tmc/error.hpp"
#include "tmc/ising_tn.hpp"
#include "tmc/oracle.hpp"
#include "tmc/rng.hpp"
#include "tmc/sampler.hpp"

using namespace tmc;

TEST_CASE("partition function by hand on the L=1 ring") {
  const LatticeGeometry g = build_lattice(1);
  const double beta = 0.8;
  for (std::uint64_t i = 0; i < 16; ++i) {
    const BondConfig x = bonds_from_index(4, i);
    const double sign = std::popcount(i) % 2 ? -1.0 : 1.0;
    const double z = std::pow(2.0 * std::cosh(beta), 4) + sign * std::pow(2.0 * std::sinh(beta), 4);
    CHECK(exact_logz(g, x, beta) == doctest::Approx(std::log(z)).epsilon(1e-14));
  }
  CHECK(exact_logz(g, BondConfig(4, 1), 0.0) == doctest::Approx(4.0 * std::numbers::ln2).epsilon(1e-15));
}

TEST_CASE("enumeration bounds") {
  CHECK_THROWS_AS(exact_logz(build_lattice(4), BondConfig(64, 1), 1.0), Error);
  try {
    exact_wavefunction(build_lattice(3), 1.0);
    FAIL("expected too-large");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::too_large);
  }
}

TEST_CASE("gauge-transformed bonds give the same exact log Z") {
  const LatticeGeometry g = build_lattice(3);
  RngStream rng(9, 0);
  for (int t = 0; t < 5; ++t) {
    BondConfig x(g.num_bonds());
    for (int b = 0; b < x.size(); ++b) x.set(b, rng.sign());
    std::vector<std::int8_t> s(g.num_spins());
    for (auto& v : s) v = rng.sign();
    const BondConfig y = gauge_transform(g, x, s);
    CHECK(exact_logz(g, y, 0.9) == doctest::Approx(exact_logz(g, x, 0.9)).epsilon(1e-12));
  }
}

TEST_CASE("exact log Z equals the contraction at chi=16") {
  RngStream rng(10, 0);
  for (int L : {1, 2, 3}) {
    const LatticeGeometry g = build_lattice(L);
    for (int t = 0; t < 10; ++t) {
      BondConfig x(g.num_bonds());
      for (int b = 0; b < x.size(); ++b) x.set(b, rng.sign());
      const double e = exact_logz(g, x, 1.1);
      const double c = contract_logz(build_network(g, x, 1.1), 16);
      CHECK(std::abs(c - e) <= 1e-10 * std::abs(e));
    }
  }
}

TEST_CASE("wavefunction is normalised") {
  const LatticeGeometry g = build_lattice(2);
  const ExactWavefunction psi = exact_wavefunction(g, params_from_p(0.2).beta);
  double norm = 0.0;
  for (double a : psi.amplitude) {
    CHECK(a > 0.0);
    norm += a * a;
  }
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Renyi entropy limits") {
  const LatticeGeometry g = build_lattice(2);
  const BondMask none(g.num_bonds(), 0);
  const BondMask all(g.num_bonds(), 1);
  const BondMask half = half_region(g);
  CHECK(exact_renyi2(g, half, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(exact_renyi2(g, half, 0.5)) < 1e-12);
  CHECK(exact_renyi2(g, none, 0.2) == 0.0);
  CHECK(exact_renyi2(g, all, 0.2) == 0.0);
  const double s = exact_renyi2(g, half, 0.15);
  CHECK(s > 0.0);
  // complementary regions of a pure state have equal entropy
  BondMask rest(g.num_bonds());
  for (int b = 0; b < g.num_bonds(); ++b) rest[b] = !half[b];
  CHECK(exact_renyi2(g, rest, 0.15) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("swap-estimator average equals the Gram-matrix purity") {
  const LatticeGeometry g1 = build_lattice(1);
  for (double p : {0.05, 0.2, 0.35}) {
    const ExactWavefunction psi = exact_wavefunction(g1, params_from_p(p).beta);
    BondMask a(4, 0);
    a[0] = a[2] = 1;
    CHECK(std::abs(exact_renyi2_swap_average(psi, a) - exact_renyi2(psi, a)) <= 1e-10);
  }
  // the four-fold sum at L=2 has 2^32 terms, so cover every split of the L=1 ring instead
  const ExactWavefunction psi = exact_wavefunction(g1, params_from_p(0.12).beta);
  for (std::uint64_t m = 1; m < 15; ++m) {
    BondMask a(4, 0);
    for (int b = 0; b < 4; ++b) a[b] = (m >> b) & 1;
    CHECK(std::abs(exact_renyi2_swap_average(psi, a) - exact_renyi2(psi, a)) <= 1e-10);
  }
}

TEST_CASE("anyon oracle limits and loop-order independence") {
  const LatticeGeometry g1 = build_lattice(1);
  CHECK(exact_t_l(g1, anyon_path(g1, 1), 0.5) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(exact_t_l(g1, anyon_path(g1, 0), 0.15) == doctest::Approx(1.0).epsilon(1e-14));

  const ExactWavefunction psi1 = exact_wavefunction(g1, params_from_p(0.15).beta);
  const double forward = exact_t_l(psi1, anyon_path(g1, 1));
  const double reordered = exact_t_l_reordered(psi1, anyon_path(g1, 1));
  CHECK(std::abs(forward - reordered) <= 1e-12);
  CHECK(forward == doctest::Approx(0.9707481599261468).epsilon(1e-12));

  const LatticeGeometry g2 = build_lattice(2);
  const ExactWavefunction psi2 = exact_wavefunction(g2, params_from_p(0.15).beta);
  for (int len : {1, 2}) {
    const AnyonPath path = anyon_path(g2, len);
    CHECK(std::abs(exact_t_l(psi2, path) - exact_t_l_reordered(psi2, path)) <= 1e-12);
  }
}

TEST_CASE("gauge-limit entropy matches the exact entropy at low temperature") {
  const LatticeGeometry g = build_lattice(2);
  const ExactWavefunction psi = exact_wavefunction(g, params_from_temperature(0.08).beta);
  const BondMask half = half_region(g);
  CHECK(exact_renyi2(psi, half) == doctest::Approx(gauge_limit_entropy(g, half)).epsilon(1e-6));
  BondMask corner(g.num_bonds(), 0);
  for (int b : g.cell_face(0, 0)) corner[b] = 1;
  CHECK(exact_renyi2(psi, corner) == doctest::Approx(gauge_limit_entropy(g, corner)).epsilon(1e-6));
  CHECK(gauge_limit_entropy(g, BondMask(g.num_bonds(), 0)) == 0.0);
}

TEST_CASE("golden fixture export") {
  const LatticeGeometry g = build_lattice(2);
  const nlohmann::json j = oracle_fixture(g, 0.15, 3, 4);
  CHECK(j.at("L") == 2);
  CHECK(j.at("configs").size() == 4);
  const auto& first = j.at("configs")[0];
  const double lz = first.at("log_z").get<double>();
  BondConfig x(g.num_bonds());
  const std::string bonds = first.at("bonds").get<std::string>();
  for (int b = 0; b < x.size(); ++b) x.set(b, bonds[b] == '-' ? -1 : 1);
  CHECK(lz == doctest::Approx(exact_logz(g, x, params_from_p(0.15).beta)).epsilon(1e-14));
}
