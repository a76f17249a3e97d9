#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tmc/error.hpp"
#include "tmc/ising_tn.hpp"
#include "tmc/oracle.hpp"
#include "tmc/rng.hpp"

using namespace tmc;

namespace {

BondConfig random_bonds(const LatticeGeometry& g, RngStream& rng) {
  BondConfig x(g.num_bonds());
  for (int b = 0; b < x.size(); ++b) x.set(b, rng.sign());
  return x;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("zero coupling gives unit tensors") {
  const LatticeGeometry g = build_lattice(3);
  RngStream rng(1, 0);
  const TensorGrid grid = build_network(g, random_bonds(g, rng), 0.0);
  for (const NodeTensor& t : grid.tensors)
    for (double v : t) CHECK(v == 1.0);
}

TEST_CASE("corner tensor entries") {
  const LatticeGeometry g = build_lattice(1);
  BondConfig x(g.num_bonds(), 1);
  const TensorGrid grid = build_network(g, x, 1.0);
  // node (0,0) owns the r-d bond only
  const NodeTensor& t = grid.tensors[g.node_index(0, 0)];
  CHECK(t[tensor_index(0, 0, 0, 0)] == doctest::Approx(std::exp(1.0)));
  CHECK(t[tensor_index(0, 1, 0, 0)] == doctest::Approx(std::exp(-1.0)));
  CHECK(t[tensor_index(0, 0, 1, 0)] == doctest::Approx(std::exp(-1.0)));
  CHECK(t[tensor_index(0, 1, 1, 0)] == doctest::Approx(std::exp(1.0)));

  x.set(g.node(g.node_index(0, 0)).bonds[0], -1);
  const TensorGrid anti = build_network(g, x, 1.0);
  CHECK(anti.tensors[0][tensor_index(0, 0, 0, 0)] == doctest::Approx(std::exp(-1.0)));
  CHECK(anti.tensors[0][tensor_index(0, 1, 0, 0)] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("mismatched configuration") {
  const LatticeGeometry g = build_lattice(2);
  try {
    build_network(g, BondConfig(5), 1.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_mismatch);
  }
  CHECK_THROWS_AS(build_network(g, BondConfig(g.num_bonds()), -1.0), Error);
}

TEST_CASE("independent spins at beta = 0") {
  const LatticeGeometry g = build_lattice(2);
  RngStream rng(2, 0);
  const TensorGrid grid = build_network(g, random_bonds(g, rng), 0.0);
  CHECK(contract_logz(grid, 8) == 12.0 * std::numbers::ln2);
  CHECK(contract_logz_rows(grid) == 12.0 * std::numbers::ln2);
}

TEST_CASE("single plaquette matches enumeration and the ring formula") {
  const LatticeGeometry g = build_lattice(1);
  const BondConfig x(g.num_bonds(), 1);
  const TensorGrid grid = build_network(g, x, 1.0);
  const double exact = exact_logz(g, x, 1.0);
  const double ring = std::log(std::pow(2.0 * std::cosh(1.0), 4) + std::pow(2.0 * std::sinh(1.0), 4));
  CHECK(rel(exact, ring) < 1e-14);
  CHECK(rel(contract_logz(grid, 8), exact) < 1e-12);
  CHECK(rel(contract_logz_rows(grid), exact) < 1e-12);
}

TEST_CASE("L=3 random bonds against enumeration") {
  const LatticeGeometry g = build_lattice(3);
  RngStream rng(3, 0);
  for (int k = 0; k < 5; ++k) {
    const BondConfig x = random_bonds(g, rng);
    const TensorGrid grid = build_network(g, x, 1.05);
    const double exact = exact_logz(g, x, 1.05);
    CHECK(rel(contract_logz(grid, 8), exact) < 1e-10);
    CHECK(rel(contract_logz_rows(grid), exact) < 1e-10);
  }
}

TEST_CASE("flipped contraction") {
  const LatticeGeometry g = build_lattice(2);
  RngStream rng(4, 0);
  const BondConfig x = random_bonds(g, rng);
  const TensorGrid grid = build_network(g, x, 0.9);

  SUBCASE("no flips") {
    CHECK(contract_logz_flipped(grid, {}, 8) == contract_logz(grid, 8));
  }
  SUBCASE("zero coupling") {
    const TensorGrid free = build_network(g, x, 0.0);
    const std::vector<int> flips{0, 3, 7};
    CHECK(contract_logz_flipped(free, flips, 8) == 12.0 * std::numbers::ln2);
  }
  SUBCASE("single flip against enumeration, input untouched") {
    const std::vector<int> flips{5};
    const auto before = grid.tensors;
    BondConfig y = x;
    y.flip(5);
    CHECK(rel(contract_logz_flipped(grid, flips, 8), exact_logz(g, y, 0.9)) < 1e-10);
    CHECK(grid.tensors == before);
    CHECK(grid.bonds == x);
  }
  SUBCASE("unknown bond") {
    const std::vector<int> flips{999};
    try {
      contract_logz_flipped(grid, flips, 8);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::config_mismatch);
    }
  }
}

TEST_CASE("gauge invariance") {
  const LatticeGeometry g = build_lattice(3);
  RngStream rng(5, 0);
  for (int k = 0; k < 20; ++k) {
    const BondConfig x = random_bonds(g, rng);
    std::vector<std::int8_t> sigma(static_cast<std::size_t>(g.num_spins()));
    for (auto& s : sigma) s = rng.sign();
    const BondConfig y = gauge_transform(g, x, sigma);
    const double a = contract_logz(build_network(g, x, 1.05), 8);
    const double b = contract_logz(build_network(g, y, 1.05), 8);
    CHECK(rel(b, a) < 1e-10);
  }
}

TEST_CASE("global sign flip is a gauge transformation") {
  // The lattice is bipartite, so alternating site signs flip every bond.
  const LatticeGeometry g = build_lattice(3);
  RngStream rng(6, 0);
  const BondConfig x = random_bonds(g, rng);
  BondConfig neg = x;
  for (int b = 0; b < neg.size(); ++b) neg.flip(b);
  const double a = contract_logz(build_network(g, x, 0.8), 8);
  const double b = contract_logz(build_network(g, neg, 0.8), 8);
  CHECK(rel(b, a) < 1e-10);
}

TEST_CASE("accuracy improves with bond dimension") {
  const LatticeGeometry g = build_lattice(3);
  RngStream rng(7, 0);
  for (int k = 0; k < 5; ++k) {
    const BondConfig x = random_bonds(g, rng);
    const TensorGrid grid = build_network(g, x, 1.0);
    const double exact = exact_logz(g, x, 1.0);
    double prev = std::numeric_limits<double>::infinity();
    for (int chi : {1, 2, 4, 8}) {
      const double err = std::abs(contract_logz(grid, chi) - exact);
      CHECK(err <= prev + 1e-12);
      prev = err;
    }
    CHECK(prev < 1e-10 * std::abs(exact));
  }
}

TEST_CASE("boundary state respects the bond-dimension cap") {
  const LatticeGeometry g = build_lattice(7);
  RngStream rng(8, 0);
  const TensorGrid grid = build_network(g, random_bonds(g, rng), 1.1);
  for (int chi : {2, 3, 8}) {
    BoundaryMps mps(g.grid_width());
    for (int row = 0; row < g.size(); ++row) {
      mps.absorb_row(grid, row);
      mps.compress(chi, row);
      CHECK(mps.max_bond_dimension() <= chi);
      CHECK(mps.all_finite());
      CHECK(std::isfinite(mps.log_scale()));
    }
  }
}

TEST_CASE("truncation observer sees normalised spectra") {
  const LatticeGeometry g = build_lattice(4);
  RngStream rng(9, 0);
  const TensorGrid grid = build_network(g, random_bonds(g, rng), 1.0);
  int records = 0;
  contract_logz(grid, 2, [&](const TruncationRecord& r) {
    ++records;
    double s = 0.0;
    for (double v : r.singular_values) s += v * v;
    CHECK(s == doctest::Approx(1.0));
    CHECK(r.kept <= 2);
  });
  CHECK(records == g.size() * g.size());  // L sites-1 bonds per compressed row, L rows
}

TEST_CASE("boundary MPS agrees with the dense row transfer when untruncated") {
  for (int L : {4, 5, 6}) {
    const LatticeGeometry g = build_lattice(L);
    RngStream rng(10, static_cast<std::uint64_t>(L));
    for (double beta : {0.3, 1.0, 4.0}) {
      const TensorGrid grid = build_network(g, random_bonds(g, rng), beta);
      CHECK(boundary_mps_is_exact(L, 8));
      CAPTURE(L);
      CAPTURE(beta);
      // Deep in the ordered phase the signed SVD factors lose a few digits
      // against the all-positive dense sums.
      CHECK(rel(contract_logz(grid, 8), contract_logz_rows(grid)) < (beta < 2.0 ? 1e-12 : 1e-8));
    }
  }
  CHECK_FALSE(boundary_mps_is_exact(7, 8));
  CHECK(boundary_mps_is_exact(7, 16));
}

TEST_CASE("chi = 8 on a larger lattice stays close to the exact contraction") {
  const LatticeGeometry g = build_lattice(10);
  RngStream rng(11, 0);
  const TensorGrid grid = build_network(g, random_bonds(g, rng), 1.05);
  const double exact = contract_logz(grid, 32);
  CHECK(rel(contract_logz_rows(grid), exact) < 1e-12);
  CHECK(rel(contract_logz(grid, 8), exact) < 1e-6);
}

TEST_CASE("evaluator engines agree") {
  const LatticeGeometry g = build_lattice(5);
  RngStream rng(12, 0);
  const BondConfig x = random_bonds(g, rng);
  const LogPartitionFunction mps(g, 1.2, 8, ContractionEngine::boundary_mps);
  const LogPartitionFunction rows(g, 1.2, 8, ContractionEngine::exact_rows);
  const LogPartitionFunction automatic(g, 1.2, 8);
  CHECK(automatic.engine() == ContractionEngine::exact_rows);
  CHECK(LogPartitionFunction(build_lattice(10), 1.0, 8).engine() == ContractionEngine::boundary_mps);
  CHECK(rel(mps(x), rows(x)) < 1e-12);
  CHECK(automatic(x) == rows(x));
}

TEST_CASE("row environments evaluate local changes exactly") {
  const LatticeGeometry g = build_lattice(4);
  const LogPartitionFunction lz(g, 0.9);
  RngStream rng(14, 0);
  BondConfig x = random_bonds(g, rng);
  RowEnvironment env(lz, x);
  CHECK(rel(env.log_z(), lz(x)) < 1e-13);

  for (int t = 0; t < 60; ++t) {
    BondConfig y = env.bonds();
    const int b = static_cast<int>(rng.index(static_cast<std::uint64_t>(g.num_bonds())));
    y.flip(b);
    const int row = g.node(g.bond(b).node).row;
    const double value = env.log_z_if(y, row, row);
    CHECK(rel(value, lz(y)) < 1e-12);
    if (t % 3 != 0) env.commit(y, row, row);
  }
  CHECK(rel(env.log_z(), lz(env.bonds())) < 1e-12);
  CHECK_THROWS_AS(env.log_z_if(env.bonds(), 3, 2), Error);
  CHECK_THROWS_AS(env.log_z_if(env.bonds(), 0, g.size() + 1), Error);
}

TEST_CASE("row environments follow gauge flips without recontracting") {
  const LatticeGeometry g = build_lattice(3);
  const LogPartitionFunction lz(g, 1.1);
  RngStream rng(15, 0);
  const BondConfig x = random_bonds(g, rng);
  RowEnvironment env(lz, x);
  env.log_z();
  for (int v = 0; v < g.num_spins(); ++v) {
    std::vector<std::int8_t> s(g.num_spins(), 1);
    s[v] = -1;
    const BondConfig y = gauge_transform(g, env.bonds(), s);
    env.gauge_flip(y, v);
    // environments of the flipped configuration are reused for a neighbouring change
    BondConfig z = y;
    const int b = g.spin_bonds(v).front();
    z.flip(b);
    const int row = g.node(g.bond(b).node).row;
    RowEnvironment fresh(lz, y);
    CHECK(env.log_z_if(z, row, row) == fresh.log_z_if(z, row, row));
  }
}

TEST_CASE("row environment values do not depend on evaluation history") {
  const LatticeGeometry g = build_lattice(4);
  const LogPartitionFunction lz(g, 0.7);
  RngStream rng(16, 0);
  RowEnvironment walked(lz, random_bonds(g, rng));
  for (int t = 0; t < 40; ++t) {
    BondConfig y = walked.bonds();
    const int b = static_cast<int>(rng.index(static_cast<std::uint64_t>(g.num_bonds())));
    y.flip(b);
    const int row = g.node(g.bond(b).node).row;
    walked.log_z_if(y, row, row);
    walked.commit(y, row, row);
  }
  RowEnvironment fresh(lz, walked.bonds());
  for (int row = 0; row <= g.size(); ++row) {
    BondConfig y = walked.bonds();
    y.flip(g.node(g.node_index(row, 0)).bonds.front());
    CHECK(walked.log_z_if(y, row, row) == fresh.log_z_if(y, row, row));
  }
}
