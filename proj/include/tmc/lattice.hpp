#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace tmc {

// Legs of a tensor node, in the fixed order used for every index computation.
enum Leg : int { up = 0, right = 1, down = 2, left = 3 };

struct TensorNode {
  int row = 0;
  int col = 0;
  std::array<int, 4> legs{-1, -1, -1, -1};  // spin id per leg, -1 if the leg is absent
  std::vector<int> bonds;                   // owned bond ids
};

// A spin lives on the leg shared by two neighbouring tensor nodes.
struct Spin {
  bool horizontal = true;
  int row = 0;
  int col = 0;
  std::array<int, 2> nodes{-1, -1};  // left/top node first
};

// A bond couples two cyclically adjacent legs of its owning node.
struct Bond {
  int node = -1;
  Leg leg_a = up;
  Leg leg_b = right;
  int spin_a = -1;
  int spin_b = -1;
};

/**
 * Tilted square lattice with open boundaries, embedded in an (L+1)x(L+1)
 * grid of tensor nodes. Spins sit on the grid legs; every node owns the
 * bonds between consecutive legs (u-r, r-d, d-l, l-u) that both exist, so
 * each Ising bond belongs to exactly one tensor.
 *
 * Indexing is row-major over nodes. Horizontal spins come first
 * (row 0..L, col 0..L-1), then vertical spins (row 0..L-1, col 0..L).
 */
class LatticeGeometry {
 public:
  explicit LatticeGeometry(int L);

  int size() const { return L_; }
  int grid_width() const { return L_ + 1; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_spins() const { return static_cast<int>(spins_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }

  int node_index(int row, int col) const { return row * (L_ + 1) + col; }
  int horizontal_spin(int row, int col) const { return row * L_ + col; }
  int vertical_spin(int row, int col) const { return (L_ + 1) * L_ + row * (L_ + 1) + col; }

  const TensorNode& node(int id) const { return nodes_[id]; }
  const Spin& spin(int id) const { return spins_[id]; }
  const Bond& bond(int id) const { return bonds_[id]; }
  const std::vector<TensorNode>& nodes() const { return nodes_; }
  const std::vector<Spin>& spins() const { return spins_; }
  const std::vector<Bond>& bonds() const { return bonds_; }

  // Bonds incident to a spin (at most four).
  const std::vector<int>& spin_bonds(int spin) const { return spin_bonds_[spin]; }

  // Bond of `node` joining legs a and b (in either order), or -1.
  int find_bond(int node, Leg a, Leg b) const;

  // Bonds bounding the grid cell whose top-left node is (row, col). These
  // four bonds form the cell face of the Ising lattice.
  std::vector<int> cell_face(int row, int col) const;

 private:
  int L_;
  std::vector<TensorNode> nodes_;
  std::vector<Spin> spins_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<int>> spin_bonds_;
};

LatticeGeometry build_lattice(int L);

enum class RegionLabel : std::uint8_t { A = 0, B = 1, C = 2, rest = 3 };

// Unions of Levin-Wen regions used by the entropy campaigns.
enum class RegionSet { AC, BC, C, ABC };

std::string to_string(RegionLabel label);
std::string to_string(RegionSet set);
RegionSet region_set_from_string(const std::string& name);

using BondMask = std::vector<std::uint8_t>;

/// Levin-Wen partition of the bonds on a 5x5 grid of cells.
struct RegionPartition {
  int cells_per_side = 5;
  int cell_span = 1;                 // L / 5
  std::vector<RegionLabel> labels;   // per bond
  std::vector<int> bond_cell_row;
  std::vector<int> bond_cell_col;

  std::vector<int> bonds_of(RegionLabel label) const;
  BondMask mask(RegionSet set) const;
  static RegionLabel cell_label(int cell_row, int cell_col);
};

// Cell index along one axis for a node coordinate, with nodes on a cell
// border assigned to the lower cell.
int cell_of_coordinate(int coordinate, int span);

RegionPartition levin_wen_regions(const LatticeGeometry& geometry);

// First half of the bonds in canonical order.
BondMask half_region(const LatticeGeometry& geometry);

BondMask mask_from_bonds(const LatticeGeometry& geometry, const std::vector<int>& bonds);

struct AnyonPath {
  std::vector<int> bonds;  // ordered from the boundary inwards
  int length = 0;
};

/**
 * Straight dual-lattice segment anchored at the top-left corner. It enters
 * the lattice through the corner bond and runs along the grid diagonal,
 * alternately crossing the cell face and the node face, so consecutive bonds
 * are opposite edges of a shared face.
 */
AnyonPath anyon_path(const LatticeGeometry& geometry, int length);
AnyonPath default_anyon_path(const LatticeGeometry& geometry);

nlohmann::json geometry_to_json(const LatticeGeometry& geometry);

}  // namespace tmc
