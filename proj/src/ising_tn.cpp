#include "tmc/ising_tn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tmc/error.hpp"

namespace tmc {

namespace {

double independent_spins_logz(const LatticeGeometry& geometry) {
  return static_cast<double>(geometry.num_spins()) * std::numbers::ln2;
}

void check_bonds(const LatticeGeometry& geometry, const BondConfig& bonds) {
  if (bonds.size() != geometry.num_bonds())
    throw Error(ErrorCode::config_mismatch, "bond configuration has " + std::to_string(bonds.size()) +
                                                " entries, lattice has " + std::to_string(geometry.num_bonds()));
}

NodeTensor node_tensor(const LatticeGeometry& geometry, const TensorNode& node, const BondConfig& bonds,
                       const std::array<double, 9>& weights) {
  std::array<int, 16> exponent{};
  for (int b : node.bonds) {
    const Bond& bond = geometry.bond(b);
    const int x = bonds[b];
    for (int idx = 0; idx < 16; ++idx) exponent[idx] += ((((idx >> bond.leg_a) ^ (idx >> bond.leg_b)) & 1) ? -x : x);
  }
  NodeTensor t;
  for (int idx = 0; idx < 16; ++idx) t[idx] = weights[exponent[idx] + 4];
  return t;
}

std::array<double, 9> boltzmann_table(double beta) {
  std::array<double, 9> w{};
  for (int k = -4; k <= 4; ++k) w[k + 4] = std::exp(beta * k);
  return w;
}

}  // namespace

BondConfig splice(const BondConfig& inside, const BondConfig& outside, const BondMask& region) {
  if (inside.size() != outside.size() || static_cast<int>(region.size()) != inside.size())
    throw Error(ErrorCode::config_mismatch, "splice operands differ in length");
  BondConfig out = outside;
  for (int b = 0; b < out.size(); ++b)
    if (region[b]) out.set(b, inside[b]);
  return out;
}

BondConfig gauge_transform(const LatticeGeometry& geometry, const BondConfig& bonds,
                           std::span<const std::int8_t> site_signs) {
  check_bonds(geometry, bonds);
  if (static_cast<int>(site_signs.size()) != geometry.num_spins())
    throw Error(ErrorCode::config_mismatch, "gauge needs one sign per spin");
  BondConfig out = bonds;
  for (int b = 0; b < geometry.num_bonds(); ++b) {
    const Bond& bd = geometry.bond(b);
    out.set(b, static_cast<std::int8_t>(bonds[b] * site_signs[bd.spin_a] * site_signs[bd.spin_b]));
  }
  return out;
}

TensorGrid build_network(const LatticeGeometry& geometry, const BondConfig& bonds, double beta) {
  check_bonds(geometry, bonds);
  if (!std::isfinite(beta) || beta < 0.0)
    throw Error(ErrorCode::invalid_parameter, "inverse temperature must be finite and nonnegative");
  const auto weights = boltzmann_table(beta);
  TensorGrid grid;
  grid.geometry = &geometry;
  grid.beta = beta;
  grid.bonds = bonds;
  grid.tensors.reserve(geometry.nodes().size());
  for (const TensorNode& node : geometry.nodes()) grid.tensors.push_back(node_tensor(geometry, node, bonds, weights));
  return grid;
}

// ---------------------------------------------------------------------------
// Boundary MPS

BoundaryMps::BoundaryMps(int num_sites)
    : cores_(static_cast<std::size_t>(num_sites), std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Ones(1, 1)}) {}

void BoundaryMps::absorb_row(const TensorGrid& grid, int row) {
  const int L = grid.geometry->size();
  const int n = num_sites();
  const int d_out = row < L ? 2 : 1;
  for (int c = 0; c < n; ++c) {
    const NodeTensor& t = grid.tensors[grid.geometry->node_index(row, c)];
    const auto& a = cores_[c];
    const int d_in = static_cast<int>(a.size());
    const int hl = c > 0 ? 2 : 1;
    const int hr = c < n - 1 ? 2 : 1;
    const Eigen::Index dl = a[0].rows();
    const Eigen::Index dr = a[0].cols();
    std::vector<Eigen::MatrixXd> b(static_cast<std::size_t>(d_out), Eigen::MatrixXd::Zero(dl * hl, dr * hr));
    for (int d = 0; d < d_out; ++d)
      for (int u = 0; u < d_in; ++u)
        for (int l = 0; l < hl; ++l)
          for (int r = 0; r < hr; ++r) {
            const double w = t[tensor_index(u, r, d, l)];
            for (Eigen::Index ar = 0; ar < dr; ++ar)
              for (Eigen::Index al = 0; al < dl; ++al) b[d](al * hl + l, ar * hr + r) += w * a[u](al, ar);
          }
    cores_[c] = std::move(b);
  }
}

void BoundaryMps::compress(int chi, int row, const TruncationObserver& observer) {
  if (chi < 1) throw Error(ErrorCode::invalid_parameter, "bond dimension must be >= 1");
  const int n = num_sites();

  for (int k = 0; k + 1 < n; ++k) {
    auto& a = cores_[k];
    const int d = static_cast<int>(a.size());
    const Eigen::Index dl = a[0].rows();
    const Eigen::Index dr = a[0].cols();
    Eigen::MatrixXd m(d * dl, dr);
    for (int s = 0; s < d; ++s) m.block(s * dl, 0, dl, dr) = a[s];
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    const Eigen::Index kd = std::min<Eigen::Index>(d * dl, dr);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d * dl, kd);
    Eigen::MatrixXd r = qr.matrixQR().topRows(kd).triangularView<Eigen::Upper>();
    const double nr = r.norm();
    if (!(nr > 0.0) || !std::isfinite(nr))
      throw Error(ErrorCode::numerical_overflow, "degenerate boundary state in QR sweep");
    r /= nr;
    log_scale_ += std::log(nr);
    for (int s = 0; s < d; ++s) a[s] = q.block(s * dl, 0, dl, kd);
    for (auto& next : cores_[k + 1]) next = r * next;
  }

  for (int k = n - 1; k >= 1; --k) {
    auto& a = cores_[k];
    const int d = static_cast<int>(a.size());
    const Eigen::Index dl = a[0].rows();
    const Eigen::Index dr = a[0].cols();
    Eigen::MatrixXd m(dl, d * dr);
    for (int s = 0; s < d; ++s) m.block(0, s * dr, dl, dr) = a[s];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv.size() == 0 || !(sv(0) > 0.0) || !std::isfinite(sv(0)))
      throw Error(ErrorCode::numerical_overflow, "degenerate boundary state in SVD sweep");
    Eigen::Index keep = 0;
    while (keep < sv.size() && keep < chi && sv(keep) > sv(0) * 1e-14) ++keep;
    const double kept_norm = sv.head(keep).norm();
    if (observer) {
      TruncationRecord rec;
      rec.row = row;
      rec.bond = k - 1;
      rec.kept = static_cast<int>(keep);
      const double total = sv.norm();
      for (Eigen::Index i = 0; i < sv.size(); ++i) rec.singular_values.push_back(sv(i) / total);
      observer(rec);
    }
    log_scale_ += std::log(kept_norm);
    const Eigen::MatrixXd vt = svd.matrixV().leftCols(keep).transpose();
    for (int s = 0; s < d; ++s) a[s] = vt.block(0, s * dr, keep, dr);
    const Eigen::MatrixXd us = svd.matrixU().leftCols(keep) * (sv.head(keep) / kept_norm).asDiagonal();
    for (auto& prev : cores_[k - 1]) prev = prev * us;
  }

  double n0 = 0.0;
  for (const auto& m : cores_[0]) n0 += m.squaredNorm();
  n0 = std::sqrt(n0);
  if (!(n0 > 0.0) || !std::isfinite(n0)) throw Error(ErrorCode::numerical_overflow, "degenerate boundary state");
  for (auto& m : cores_[0]) m /= n0;
  log_scale_ += std::log(n0);
}

double BoundaryMps::log_scalar() const {
  Eigen::MatrixXd v = Eigen::MatrixXd::Ones(1, 1);
  double log_acc = log_scale_;
  for (const auto& core : cores_) {
    if (core.size() != 1) throw Error(ErrorCode::invalid_parameter, "boundary state still has open legs");
    v = v * core[0];
    const double nv = v.cwiseAbs().maxCoeff();
    if (!(nv > 0.0) || !std::isfinite(nv)) throw Error(ErrorCode::numerical_overflow, "contraction lost all weight");
    v /= nv;
    log_acc += std::log(nv);
  }
  const double value = v(0, 0);
  if (!(value > 0.0) || !std::isfinite(value))
    throw Error(ErrorCode::numerical_overflow, "contraction produced a non-positive partition function");
  return log_acc + std::log(value);
}

int BoundaryMps::bond_dimension(int bond) const { return static_cast<int>(cores_[bond][0].cols()); }

int BoundaryMps::max_bond_dimension() const {
  int m = 1;
  for (int k = 0; k + 1 < num_sites(); ++k) m = std::max(m, bond_dimension(k));
  return m;
}

bool BoundaryMps::all_finite() const {
  if (!std::isfinite(log_scale_)) return false;
  for (const auto& core : cores_)
    for (const auto& m : core)
      if (!m.allFinite()) return false;
  return true;
}

double contract_logz(const TensorGrid& grid, int chi, const TruncationObserver& observer) {
  if (chi < 1) throw Error(ErrorCode::invalid_parameter, "bond dimension must be >= 1");
  const LatticeGeometry& geometry = *grid.geometry;
  if (grid.beta == 0.0) return independent_spins_logz(geometry);
  const int L = geometry.size();
  BoundaryMps mps(L + 1);
  for (int row = 0; row <= L; ++row) {
    mps.absorb_row(grid, row);
    if (row < L) mps.compress(chi, row, observer);
  }
  const double logz = mps.log_scalar();
  if (!std::isfinite(logz)) throw Error(ErrorCode::numerical_overflow, "non-finite log Z");
  return logz;
}

double contract_logz_flipped(const TensorGrid& grid, std::span<const int> flips, int chi) {
  const LatticeGeometry& geometry = *grid.geometry;
  BondConfig bonds = grid.bonds;
  for (int b : flips) {
    if (b < 0 || b >= geometry.num_bonds())
      throw Error(ErrorCode::config_mismatch, "unknown bond id " + std::to_string(b));
    bonds.flip(b);
  }
  if (grid.beta == 0.0) return independent_spins_logz(geometry);
  TensorGrid flipped = grid;
  flipped.bonds = bonds;
  const auto weights = boltzmann_table(grid.beta);
  for (int b : flips) {
    const int node = geometry.bond(b).node;
    flipped.tensors[node] = node_tensor(geometry, geometry.node(node), bonds, weights);
  }
  return contract_logz(flipped, chi);
}

// ---------------------------------------------------------------------------
// Dense row transfer

namespace {

// Pushes phi (size 2 * dim, second half zero) through one row of nodes and
// divides out the largest entry, returning its log. Going down the open legs
// are the up legs of `row` on entry; going up they are its down legs.
template <class TensorOf>
double absorb_dense_row(double* phi, std::size_t dim, int L, int row, bool downward, TensorOf&& tensor_of) {
  const int top_legs = row > 0 ? 2 : 1;
  const int bottom_legs = row < L ? 2 : 1;
  const int v_in = downward ? top_legs : bottom_legs;
  const int v_out = downward ? bottom_legs : top_legs;
  double* p0 = phi;
  double* p1 = phi + dim;
  for (int c = 0; c <= L; ++c) {
    const NodeTensor t = tensor_of(row, c);
    const int h_in = c > 0 ? 2 : 1;
    const int h_out = c < L ? 2 : 1;
    // m[out][in] with out = (ho, o) and in = (h, i), legs outside the lattice zeroed
    double m[4][4];
    for (int ho = 0; ho < 2; ++ho)
      for (int o = 0; o < 2; ++o)
        for (int h = 0; h < 2; ++h)
          for (int i = 0; i < 2; ++i) {
            const bool valid = ho < h_out && o < v_out && h < h_in && i < v_in;
            const int idx = downward ? tensor_index(i, ho, o, h) : tensor_index(o, ho, i, h);
            m[ho * 2 + o][h * 2 + i] = valid ? t[idx] : 0.0;
          }
    const std::size_t bit = std::size_t{1} << c;
    for (std::size_t hi = 0; hi < dim; hi += 2 * bit)
      for (std::size_t lo = 0; lo < bit; ++lo) {
        const std::size_t i0 = hi + lo;
        const std::size_t i1 = i0 + bit;
        const double v[4] = {p0[i0], p0[i1], p1[i0], p1[i1]};
        p0[i0] = m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2] + m[0][3] * v[3];
        p0[i1] = m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2] + m[1][3] * v[3];
        p1[i0] = m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2] + m[2][3] * v[3];
        p1[i1] = m[3][0] * v[0] + m[3][1] * v[1] + m[3][2] * v[2] + m[3][3] * v[3];
      }
  }
  double mx = 0.0;
  for (std::size_t i = 0; i < dim; ++i) mx = std::max(mx, p0[i]);
  if (!(mx > 0.0) || !std::isfinite(mx)) throw Error(ErrorCode::numerical_overflow, "row transfer lost all weight");
  for (std::size_t i = 0; i < dim; ++i) p0[i] /= mx;
  return std::log(mx);
}

std::size_t dense_dimension(const LatticeGeometry& geometry) {
  const int w = geometry.size() + 1;
  if (w > 22) throw Error(ErrorCode::too_large, "dense row transfer limited to 22 columns");
  return std::size_t{1} << w;
}

// Dense transfer over full rows of vertical legs; tensor_of(row, col) supplies each node.
template <class TensorOf>
double row_transfer(const LatticeGeometry& geometry, TensorOf&& tensor_of) {
  const int L = geometry.size();
  const std::size_t dim = dense_dimension(geometry);
  std::vector<double> phi(2 * dim, 0.0);
  phi[0] = 1.0;
  double log_scale = 0.0;
  for (int row = 0; row <= L; ++row) log_scale += absorb_dense_row(phi.data(), dim, L, row, true, tensor_of);
  return log_scale + std::log(phi[0]);
}

}  // namespace

double contract_logz_rows(const TensorGrid& grid) {
  const LatticeGeometry& geometry = *grid.geometry;
  if (grid.beta == 0.0) return independent_spins_logz(geometry);
  return row_transfer(geometry, [&](int row, int col) { return grid.tensors[geometry.node_index(row, col)]; });
}

bool boundary_mps_is_exact(int L, int chi) {
  const int half = (L + 1) / 2;
  if (half >= 30) return false;
  return chi >= (1 << half);
}

ContractionEngine engine_from_string(const std::string& name) {
  if (name == "mps" || name == "boundary_mps") return ContractionEngine::boundary_mps;
  if (name == "rows" || name == "exact_rows") return ContractionEngine::exact_rows;
  if (name == "auto" || name == "automatic") return ContractionEngine::automatic;
  throw Error(ErrorCode::usage, "unknown contraction engine '" + name + "'");
}

std::string to_string(ContractionEngine engine) {
  switch (engine) {
    case ContractionEngine::boundary_mps: return "mps";
    case ContractionEngine::exact_rows: return "rows";
    case ContractionEngine::automatic: return "auto";
  }
  return "?";
}

LogPartitionFunction::LogPartitionFunction(const LatticeGeometry& geometry, double beta, int chi,
                                           ContractionEngine engine)
    : geometry_(&geometry), beta_(beta), chi_(chi), engine_(engine) {
  if (!std::isfinite(beta) || beta < 0.0)
    throw Error(ErrorCode::invalid_parameter, "inverse temperature must be finite and nonnegative");
  weights_ = boltzmann_table(beta);
  if (chi < 1) throw Error(ErrorCode::invalid_parameter, "bond dimension must be >= 1");
  if (engine_ == ContractionEngine::automatic)
    engine_ = boundary_mps_is_exact(geometry.size(), chi) && geometry.size() + 1 <= 16 ? ContractionEngine::exact_rows
                                                                                        : ContractionEngine::boundary_mps;
}

double LogPartitionFunction::operator()(const BondConfig& bonds) const {
  check_bonds(*geometry_, bonds);
  if (beta_ == 0.0) return independent_spins_logz(*geometry_);
  if (engine_ == ContractionEngine::exact_rows) {
    const LatticeGeometry& g = *geometry_;
    return row_transfer(g, [&](int row, int col) { return node_tensor(g, g.node(g.node_index(row, col)), bonds, weights_); });
  }
  return contract_logz(build_network(*geometry_, bonds, beta_), chi_);
}

double LogPartitionFunction::spliced(const BondConfig& inside, const BondConfig& outside, const BondMask& region) const {
  return (*this)(splice(inside, outside, region));
}

}  // namespace tmc

namespace tmc {

RowEnvironment::RowEnvironment(const LogPartitionFunction& log_z, BondConfig bonds)
    : log_z_(&log_z), bonds_(std::move(bonds)) {
  const LatticeGeometry& g = log_z.geometry();
  check_bonds(g, bonds_);
  rows_ = g.size() + 1;
  dim_ = dense_dimension(g);
  tops_.assign(static_cast<std::size_t>(rows_ + 1) * dim_, 0.0);
  bottoms_.assign(static_cast<std::size_t>(rows_ + 1) * dim_, 0.0);
  scratch_.assign(2 * dim_, 0.0);
  top_scale_.assign(static_cast<std::size_t>(rows_ + 1), 0.0);
  bottom_scale_.assign(static_cast<std::size_t>(rows_ + 1), 0.0);
  tops_[0] = 1.0;
  bottoms_[static_cast<std::size_t>(rows_) * dim_] = 1.0;
  top_valid_ = 0;
  bottom_valid_ = rows_;
}

const double* RowEnvironment::top(int k) {
  const LatticeGeometry& g = log_z_->geometry();
  const auto& w = log_z_->weights();
  while (top_valid_ < k) {
    const int row = top_valid_;
    std::copy_n(tops_.begin() + static_cast<std::ptrdiff_t>(row * dim_), dim_, scratch_.begin());
    std::fill(scratch_.begin() + static_cast<std::ptrdiff_t>(dim_), scratch_.end(), 0.0);
    const double s = absorb_dense_row(scratch_.data(), dim_, g.size(), row, true, [&](int r, int c) {
      return node_tensor(g, g.node(g.node_index(r, c)), bonds_, w);
    });
    std::copy_n(scratch_.begin(), dim_, tops_.begin() + static_cast<std::ptrdiff_t>((row + 1) * dim_));
    top_scale_[row + 1] = top_scale_[row] + s;
    ++top_valid_;
  }
  return tops_.data() + k * dim_;
}

const double* RowEnvironment::bottom(int k) {
  const LatticeGeometry& g = log_z_->geometry();
  const auto& w = log_z_->weights();
  while (bottom_valid_ > k) {
    const int row = bottom_valid_ - 1;
    std::copy_n(bottoms_.begin() + static_cast<std::ptrdiff_t>((row + 1) * dim_), dim_, scratch_.begin());
    std::fill(scratch_.begin() + static_cast<std::ptrdiff_t>(dim_), scratch_.end(), 0.0);
    const double s = absorb_dense_row(scratch_.data(), dim_, g.size(), row, false, [&](int r, int c) {
      return node_tensor(g, g.node(g.node_index(r, c)), bonds_, w);
    });
    std::copy_n(scratch_.begin(), dim_, bottoms_.begin() + static_cast<std::ptrdiff_t>(row * dim_));
    bottom_scale_[row] = bottom_scale_[row + 1] + s;
    --bottom_valid_;
  }
  return bottoms_.data() + k * dim_;
}

double RowEnvironment::log_z() {
  if (log_z_->beta() == 0.0) return independent_spins_logz(log_z_->geometry());
  const double* t = top(rows_);
  return top_scale_[rows_] + std::log(t[0]);
}

double RowEnvironment::log_z_if(const BondConfig& candidate, int first, int last) {
  const LatticeGeometry& g = log_z_->geometry();
  check_bonds(g, candidate);
  if (first < 0 || last < first || last >= rows_) throw Error(ErrorCode::invalid_parameter, "row range out of bounds");
  if (log_z_->beta() == 0.0) return independent_spins_logz(g);
  const double* b = bottom(last + 1);
  const double* t = top(first);
  std::copy_n(t, dim_, scratch_.begin());
  std::fill(scratch_.begin() + static_cast<std::ptrdiff_t>(dim_), scratch_.end(), 0.0);
  double log_scale = top_scale_[first] + bottom_scale_[last + 1];
  const auto& w = log_z_->weights();
  for (int row = first; row <= last; ++row)
    log_scale += absorb_dense_row(scratch_.data(), dim_, g.size(), row, true, [&](int r, int c) {
      return node_tensor(g, g.node(g.node_index(r, c)), candidate, w);
    });
  double dot = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) dot += scratch_[i] * b[i];
  if (!(dot > 0.0) || !std::isfinite(dot))
    throw Error(ErrorCode::numerical_overflow, "contraction produced a non-positive partition function");
  return log_scale + std::log(dot);
}

void RowEnvironment::commit(BondConfig candidate, int first, int last) {
  check_bonds(log_z_->geometry(), candidate);
  bonds_ = std::move(candidate);
  top_valid_ = std::min(top_valid_, first);
  bottom_valid_ = std::max(bottom_valid_, last + 1);
}

void RowEnvironment::gauge_flip(BondConfig candidate, int spin) {
  const LatticeGeometry& g = log_z_->geometry();
  check_bonds(g, candidate);
  bonds_ = std::move(candidate);
  const Spin& sp = g.spin(spin);
  // A horizontal leg is summed inside its row; a vertical leg is open only
  // between its two rows, where the flip relabels that leg's index.
  if (sp.horizontal) return;
  const int k = sp.row + 1;
  const std::size_t bit = std::size_t{1} << sp.col;
  auto relabel = [&](std::vector<double>& env) {
    double* v = env.data() + static_cast<std::size_t>(k) * dim_;
    for (std::size_t i = 0; i < dim_; ++i)
      if (!(i & bit)) std::swap(v[i], v[i | bit]);
  };
  if (k <= top_valid_) relabel(tops_);
  if (k >= bottom_valid_) relabel(bottoms_);
}

}  // namespace tmc
