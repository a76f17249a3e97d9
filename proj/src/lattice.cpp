#include "tmc/lattice.hpp"

#include <algorithm>

#include "tmc/error.hpp"

namespace tmc {

LatticeGeometry::LatticeGeometry(int L) : L_(L) {
  if (L < 1) throw Error(ErrorCode::invalid_size, "lattice size must be >= 1, got " + std::to_string(L));

  const int w = L + 1;
  spins_.resize(static_cast<std::size_t>(2 * L * (L + 1)));
  nodes_.resize(static_cast<std::size_t>(w * w));

  for (int r = 0; r < w; ++r)
    for (int c = 0; c < L; ++c) {
      Spin& s = spins_[horizontal_spin(r, c)];
      s.horizontal = true;
      s.row = r;
      s.col = c;
      s.nodes = {node_index(r, c), node_index(r, c + 1)};
    }
  for (int r = 0; r < L; ++r)
    for (int c = 0; c < w; ++c) {
      Spin& s = spins_[vertical_spin(r, c)];
      s.horizontal = false;
      s.row = r;
      s.col = c;
      s.nodes = {node_index(r, c), node_index(r + 1, c)};
    }

  static constexpr std::array<std::array<Leg, 2>, 4> kPairs{{{up, right}, {right, down}, {down, left}, {left, up}}};

  for (int r = 0; r < w; ++r) {
    for (int c = 0; c < w; ++c) {
      TensorNode& n = nodes_[node_index(r, c)];
      n.row = r;
      n.col = c;
      if (r > 0) n.legs[up] = vertical_spin(r - 1, c);
      if (c < L) n.legs[right] = horizontal_spin(r, c);
      if (r < L) n.legs[down] = vertical_spin(r, c);
      if (c > 0) n.legs[left] = horizontal_spin(r, c - 1);
      for (const auto& [a, b] : kPairs) {
        if (n.legs[a] < 0 || n.legs[b] < 0) continue;
        n.bonds.push_back(static_cast<int>(bonds_.size()));
        bonds_.push_back(Bond{node_index(r, c), a, b, n.legs[a], n.legs[b]});
      }
    }
  }

  spin_bonds_.resize(spins_.size());
  for (int b = 0; b < num_bonds(); ++b) {
    spin_bonds_[bonds_[b].spin_a].push_back(b);
    spin_bonds_[bonds_[b].spin_b].push_back(b);
  }
}

int LatticeGeometry::find_bond(int node, Leg a, Leg b) const {
  for (int id : nodes_[node].bonds) {
    const Bond& bd = bonds_[id];
    if ((bd.leg_a == a && bd.leg_b == b) || (bd.leg_a == b && bd.leg_b == a)) return id;
  }
  return -1;
}

std::vector<int> LatticeGeometry::cell_face(int row, int col) const {
  if (row < 0 || col < 0 || row >= L_ || col >= L_)
    throw Error(ErrorCode::invalid_parameter, "cell outside the grid");
  return {find_bond(node_index(row, col), right, down), find_bond(node_index(row, col + 1), down, left),
          find_bond(node_index(row + 1, col + 1), left, up), find_bond(node_index(row + 1, col), up, right)};
}

LatticeGeometry build_lattice(int L) { return LatticeGeometry(L); }

std::string to_string(RegionLabel label) {
  switch (label) {
    case RegionLabel::A: return "A";
    case RegionLabel::B: return "B";
    case RegionLabel::C: return "C";
    case RegionLabel::rest: return "rest";
  }
  return "?";
}

std::string to_string(RegionSet set) {
  switch (set) {
    case RegionSet::AC: return "AC";
    case RegionSet::BC: return "BC";
    case RegionSet::C: return "C";
    case RegionSet::ABC: return "ABC";
  }
  return "?";
}

RegionSet region_set_from_string(const std::string& name) {
  if (name == "AC") return RegionSet::AC;
  if (name == "BC") return RegionSet::BC;
  if (name == "C") return RegionSet::C;
  if (name == "ABC") return RegionSet::ABC;
  throw Error(ErrorCode::usage, "unknown region '" + name + "' (expected AC, BC, C or ABC)");
}

int cell_of_coordinate(int coordinate, int span) { return coordinate == 0 ? 0 : (coordinate - 1) / span; }

RegionLabel RegionPartition::cell_label(int cell_row, int cell_col) {
  if (cell_row == 1 && cell_col >= 1 && cell_col <= 3) return RegionLabel::A;
  if (cell_row == 3 && cell_col >= 1 && cell_col <= 3) return RegionLabel::B;
  if (cell_row == 2 && (cell_col == 1 || cell_col == 3)) return RegionLabel::C;
  return RegionLabel::rest;
}

std::vector<int> RegionPartition::bonds_of(RegionLabel label) const {
  std::vector<int> out;
  for (int b = 0; b < static_cast<int>(labels.size()); ++b)
    if (labels[b] == label) out.push_back(b);
  return out;
}

BondMask RegionPartition::mask(RegionSet set) const {
  BondMask m(labels.size(), 0);
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const RegionLabel l = labels[b];
    switch (set) {
      case RegionSet::AC: m[b] = l == RegionLabel::A || l == RegionLabel::C; break;
      case RegionSet::BC: m[b] = l == RegionLabel::B || l == RegionLabel::C; break;
      case RegionSet::C: m[b] = l == RegionLabel::C; break;
      case RegionSet::ABC: m[b] = l != RegionLabel::rest; break;
    }
  }
  return m;
}

RegionPartition levin_wen_regions(const LatticeGeometry& geometry) {
  const int L = geometry.size();
  if (L % 5 != 0)
    throw Error(ErrorCode::unsupported_partition, "Levin-Wen regions need L to be a multiple of 5, got " + std::to_string(L));

  RegionPartition part;
  part.cell_span = L / 5;
  part.labels.resize(geometry.num_bonds());
  part.bond_cell_row.resize(geometry.num_bonds());
  part.bond_cell_col.resize(geometry.num_bonds());
  for (int b = 0; b < geometry.num_bonds(); ++b) {
    const TensorNode& n = geometry.node(geometry.bond(b).node);
    const int cr = cell_of_coordinate(n.row, part.cell_span);
    const int cc = cell_of_coordinate(n.col, part.cell_span);
    part.bond_cell_row[b] = cr;
    part.bond_cell_col[b] = cc;
    part.labels[b] = RegionPartition::cell_label(cr, cc);
  }
  return part;
}

BondMask half_region(const LatticeGeometry& geometry) {
  BondMask m(geometry.num_bonds(), 0);
  std::fill(m.begin(), m.begin() + geometry.num_bonds() / 2, 1);
  return m;
}

BondMask mask_from_bonds(const LatticeGeometry& geometry, const std::vector<int>& bonds) {
  BondMask m(geometry.num_bonds(), 0);
  for (int b : bonds) {
    if (b < 0 || b >= geometry.num_bonds())
      throw Error(ErrorCode::config_mismatch, "bond id " + std::to_string(b) + " out of range");
    m[b] = 1;
  }
  return m;
}

AnyonPath anyon_path(const LatticeGeometry& geometry, int length) {
  const int L = geometry.size();
  if (length < 0) throw Error(ErrorCode::invalid_parameter, "path length must be nonnegative");
  if (length > L)
    throw Error(ErrorCode::path_too_long,
                "path length " + std::to_string(length) + " exceeds L=" + std::to_string(L));
  AnyonPath path;
  path.length = length;
  for (int i = 0; i < length; ++i) {
    // Even steps leave node (m,m) through its r-d bond into cell (m,m);
    // odd steps enter node (m,m) through its l-u bond.
    const int m = (i + 1) / 2;
    const int node = geometry.node_index(m, m);
    path.bonds.push_back(i % 2 == 0 ? geometry.find_bond(node, right, down) : geometry.find_bond(node, left, up));
  }
  return path;
}

AnyonPath default_anyon_path(const LatticeGeometry& geometry) { return anyon_path(geometry, geometry.size() / 2); }

nlohmann::json geometry_to_json(const LatticeGeometry& geometry) {
  using nlohmann::json;
  static const char* kLegNames[4] = {"u", "r", "d", "l"};
  json j;
  j["L"] = geometry.size();
  json nodes = json::array();
  for (const TensorNode& n : geometry.nodes()) {
    json legs = json::object();
    for (int k = 0; k < 4; ++k)
      if (n.legs[k] >= 0) legs[kLegNames[k]] = n.legs[k];
    nodes.push_back({{"row", n.row}, {"col", n.col}, {"legs", legs}, {"bonds", n.bonds}});
  }
  j["tensor_nodes"] = nodes;
  json spins = json::array();
  for (const Spin& s : geometry.spins())
    spins.push_back({{"orientation", s.horizontal ? "h" : "v"}, {"row", s.row}, {"col", s.col}, {"nodes", s.nodes}});
  j["spins"] = spins;
  json bonds = json::array();
  for (const Bond& b : geometry.bonds())
    bonds.push_back({{"node", b.node},
                     {"legs", {kLegNames[b.leg_a], kLegNames[b.leg_b]}},
                     {"spins", {b.spin_a, b.spin_b}}});
  j["bonds"] = bonds;
  if (geometry.size() % 5 == 0) {
    const RegionPartition part = levin_wen_regions(geometry);
    json labels = json::array();
    for (RegionLabel l : part.labels) labels.push_back(to_string(l));
    j["region_labels"] = labels;
  }
  return j;
}

}  // namespace tmc
