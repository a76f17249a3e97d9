#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "tmc/error.hpp"
#include "tmc/lattice.hpp"

using namespace tmc;

namespace {

// Two bonds are neighbours on the dual lattice when they bound a common face:
// the diamond around a tensor node or the diamond inside a grid cell.
bool share_face(const LatticeGeometry& g, int a, int b) {
  if (g.bond(a).node == g.bond(b).node) return true;
  for (int r = 0; r < g.size(); ++r)
    for (int c = 0; c < g.size(); ++c) {
      const auto face = g.cell_face(r, c);
      if (std::count(face.begin(), face.end(), a) && std::count(face.begin(), face.end(), b)) return true;
    }
  return false;
}

int cell_components(const std::set<std::pair<int, int>>& cells) {
  std::set<std::pair<int, int>> seen;
  int comps = 0;
  for (const auto& start : cells) {
    if (seen.count(start)) continue;
    ++comps;
    std::vector<std::pair<int, int>> stack{start};
    seen.insert(start);
    while (!stack.empty()) {
      auto [r, c] = stack.back();
      stack.pop_back();
      for (auto [dr, dc] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        std::pair<int, int> n{r + dr, c + dc};
        if (cells.count(n) && !seen.count(n)) {
          seen.insert(n);
          stack.push_back(n);
        }
      }
    }
  }
  return comps;
}

}  // namespace

TEST_CASE("tensor grid for L=5 has 36 nodes") {
  const LatticeGeometry g = build_lattice(5);
  CHECK(g.num_nodes() == 36);
}

TEST_CASE("L=1 is a single plaquette") {
  const LatticeGeometry g = build_lattice(1);
  CHECK(g.num_nodes() == 4);
  CHECK(g.num_spins() == 4);
  CHECK(g.num_bonds() == 4);
  for (const TensorNode& n : g.nodes()) CHECK(n.bonds.size() == 1);
  // The four bonds close a ring: every spin is in exactly two bonds.
  for (int s = 0; s < g.num_spins(); ++s) CHECK(g.spin_bonds(s).size() == 2);
}

TEST_CASE("invalid sizes are rejected") {
  CHECK_THROWS_AS(build_lattice(0), Error);
  CHECK_THROWS_AS(build_lattice(-3), Error);
  try {
    build_lattice(0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_size);
  }
}

TEST_CASE("counting invariants and bond ownership") {
  for (int L = 1; L <= 9; ++L) {
    CAPTURE(L);
    const LatticeGeometry g = build_lattice(L);
    CHECK(g.num_nodes() == (L + 1) * (L + 1));
    CHECK(g.num_spins() == 2 * L * (L + 1));
    CHECK(g.num_bonds() == 4 * L * L);
    std::size_t owned = 0;
    for (const TensorNode& n : g.nodes()) {
      owned += n.bonds.size();
      const bool row_edge = n.row == 0 || n.row == L;
      const bool col_edge = n.col == 0 || n.col == L;
      const std::size_t expected = row_edge && col_edge ? 1 : (row_edge || col_edge ? 2 : 4);
      CHECK(n.bonds.size() == expected);
      for (int b : n.bonds) CHECK(g.bond(b).node == g.node_index(n.row, n.col));
    }
    CHECK(owned == static_cast<std::size_t>(g.num_bonds()));
    // Each spin is the leg shared by exactly two nodes and both legs agree.
    for (int s = 0; s < g.num_spins(); ++s) {
      const Spin& sp = g.spin(s);
      int hits = 0;
      for (int node : sp.nodes)
        for (int leg : g.node(node).legs) hits += leg == s;
      CHECK(hits == 2);
    }
  }
}

TEST_CASE("cell faces are closed four-cycles") {
  const LatticeGeometry g = build_lattice(3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const auto face = g.cell_face(r, c);
      std::map<int, int> degree;
      for (int b : face) {
        REQUIRE(b >= 0);
        degree[g.bond(b).spin_a]++;
        degree[g.bond(b).spin_b]++;
      }
      CHECK(degree.size() == 4);
      for (auto [spin, d] : degree) CHECK(d == 2);
    }
}

TEST_CASE("Levin-Wen regions on L=5") {
  const LatticeGeometry g = build_lattice(5);
  const RegionPartition part = levin_wen_regions(g);
  REQUIRE(part.labels.size() == static_cast<std::size_t>(g.num_bonds()));

  SUBCASE("disjoint labels covering every bond") {
    std::size_t total = 0;
    for (RegionLabel l : {RegionLabel::A, RegionLabel::B, RegionLabel::C, RegionLabel::rest}) {
      const auto bonds = part.bonds_of(l);
      CHECK_FALSE(bonds.empty());
      total += bonds.size();
    }
    CHECK(total == static_cast<std::size_t>(g.num_bonds()));
  }

  SUBCASE("A and B do not touch") {
    std::set<int> a_nodes, b_nodes;
    for (int b : part.bonds_of(RegionLabel::A)) a_nodes.insert(g.bond(b).node);
    for (int b : part.bonds_of(RegionLabel::B)) b_nodes.insert(g.bond(b).node);
    for (int na : a_nodes)
      for (int nb : b_nodes) {
        const auto& x = g.node(na);
        const auto& y = g.node(nb);
        CHECK(std::abs(x.row - y.row) + std::abs(x.col - y.col) > 1);
      }
  }

  SUBCASE("complement is the hole plus the exterior ring") {
    std::set<std::pair<int, int>> rest;
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c)
        if (RegionPartition::cell_label(r, c) == RegionLabel::rest) rest.insert({r, c});
    CHECK(rest.size() == 17);
    CHECK(cell_components(rest) == 2);
    CHECK(rest.count({2, 2}) == 1);
  }

  SUBCASE("complement bonds split into two node-connected pieces") {
    std::set<std::pair<int, int>> nodes;
    for (int b : part.bonds_of(RegionLabel::rest)) {
      const auto& n = g.node(g.bond(b).node);
      nodes.insert({n.row, n.col});
    }
    CHECK(cell_components(nodes) == 2);
  }

  SUBCASE("deterministic") {
    const RegionPartition again = levin_wen_regions(g);
    CHECK(again.labels == part.labels);
  }
}

TEST_CASE("border nodes belong to the lower cell") {
  CHECK(cell_of_coordinate(0, 2) == 0);
  CHECK(cell_of_coordinate(2, 2) == 0);
  CHECK(cell_of_coordinate(3, 2) == 1);
  CHECK(cell_of_coordinate(10, 2) == 4);
  const LatticeGeometry g = build_lattice(10);
  const RegionPartition part = levin_wen_regions(g);
  for (int b = 0; b < g.num_bonds(); ++b) {
    CHECK(part.bond_cell_row[b] >= 0);
    CHECK(part.bond_cell_row[b] < 5);
  }
}

TEST_CASE("Levin-Wen needs L divisible by 5") {
  const LatticeGeometry g = build_lattice(7);
  try {
    levin_wen_regions(g);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unsupported_partition);
  }
}

TEST_CASE("anyon paths") {
  const LatticeGeometry g = build_lattice(5);

  SUBCASE("length 2 crosses two neighbouring bonds") {
    const AnyonPath p = anyon_path(g, 2);
    REQUIRE(p.bonds.size() == 2);
    CHECK(p.bonds[0] != p.bonds[1]);
    CHECK(share_face(g, p.bonds[0], p.bonds[1]));
    // starts at the boundary: the first bond belongs to the corner node
    CHECK(g.bond(p.bonds[0]).node == g.node_index(0, 0));
  }

  SUBCASE("empty path") { CHECK(anyon_path(g, 0).bonds.empty()); }

  SUBCASE("too long") {
    try {
      anyon_path(g, 6);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::path_too_long);
    }
  }

  SUBCASE("straight segment at full length") {
    for (int L : {1, 4, 6, 9}) {
      const LatticeGeometry h = build_lattice(L);
      const AnyonPath p = anyon_path(h, L);
      REQUIRE(static_cast<int>(p.bonds.size()) == L);
      std::set<int> unique(p.bonds.begin(), p.bonds.end());
      CHECK(unique.size() == p.bonds.size());
      for (std::size_t i = 0; i + 1 < p.bonds.size(); ++i) CHECK(share_face(h, p.bonds[i], p.bonds[i + 1]));
      // consecutive bonds are opposite edges of their face, never sharing a spin
      for (std::size_t i = 0; i + 1 < p.bonds.size(); ++i) {
        const Bond& x = h.bond(p.bonds[i]);
        const Bond& y = h.bond(p.bonds[i + 1]);
        CHECK(x.spin_a != y.spin_a);
        CHECK(x.spin_a != y.spin_b);
        CHECK(x.spin_b != y.spin_a);
        CHECK(x.spin_b != y.spin_b);
      }
    }
  }

  SUBCASE("default length scales with L") {
    CHECK(default_anyon_path(build_lattice(4)).length == 2);
    CHECK(default_anyon_path(build_lattice(8)).length == 4);
    CHECK(default_anyon_path(build_lattice(16)).length == 8);
  }
}

TEST_CASE("geometry JSON export") {
  const LatticeGeometry g = build_lattice(5);
  const auto j = geometry_to_json(g);
  CHECK(j["L"] == 5);
  CHECK(j["tensor_nodes"].size() == 36);
  CHECK(j["spins"].size() == 60);
  CHECK(j["bonds"].size() == 100);
  CHECK(j["region_labels"].size() == 100);
  CHECK(geometry_to_json(build_lattice(3)).contains("region_labels") == false);
}
