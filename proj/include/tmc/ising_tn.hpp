#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tmc/lattice.hpp"

namespace tmc {

// Bond signs x_e in {+1,-1}, indexed by bond id.
class BondConfig {
 public:
  BondConfig() = default;
  explicit BondConfig(int num_bonds, std::int8_t value = 1) : signs_(static_cast<std::size_t>(num_bonds), value) {}
  explicit BondConfig(std::vector<std::int8_t> signs) : signs_(std::move(signs)) {}

  int size() const { return static_cast<int>(signs_.size()); }
  std::int8_t operator[](int b) const { return signs_[static_cast<std::size_t>(b)]; }
  void set(int b, std::int8_t v) { signs_[static_cast<std::size_t>(b)] = v; }
  void flip(int b) { signs_[static_cast<std::size_t>(b)] = static_cast<std::int8_t>(-signs_[static_cast<std::size_t>(b)]); }
  const std::vector<std::int8_t>& signs() const { return signs_; }

  bool operator==(const BondConfig&) const = default;

 private:
  std::vector<std::int8_t> signs_;
};

// Takes bonds inside `region` from `inside` and the rest from `outside`.
BondConfig splice(const BondConfig& inside, const BondConfig& outside, const BondMask& region);

// x_e -> x_e * prod_{v in e} sigma_v
BondConfig gauge_transform(const LatticeGeometry& geometry, const BondConfig& bonds,
                           std::span<const std::int8_t> site_signs);

// Enumerates tensor entries as u + 2r + 4d + 8l with leg value 0 <=> spin +1.
// Absent legs only ever take value 0.
using NodeTensor = std::array<double, 16>;

constexpr int tensor_index(int u, int r, int d, int l) { return u | (r << 1) | (d << 2) | (l << 3); }

struct TensorGrid {
  const LatticeGeometry* geometry = nullptr;
  double beta = 0.0;
  BondConfig bonds;
  std::vector<NodeTensor> tensors;
};

TensorGrid build_network(const LatticeGeometry& geometry, const BondConfig& bonds, double beta);

struct TruncationRecord {
  int row = 0;
  int bond = 0;  // virtual bond between site `bond` and `bond + 1`
  int kept = 0;
  std::vector<double> singular_values;  // before truncation, normalised to unit norm
};

using TruncationObserver = std::function<void(const TruncationRecord&)>;

/**
 * Boundary state of a partially contracted tensor grid. Site c holds one
 * Dl x Dr matrix per value of its open (downward) leg. Norms are divided out
 * after every operation and collected in log_scale, so the represented
 * vector is exp(log_scale) times the stored cores.
 */
class BoundaryMps {
 public:
  // Boundary state above the first row: a product of trivial legs.
  explicit BoundaryMps(int num_sites);

  void absorb_row(const TensorGrid& grid, int row);

  // Left-canonical QR sweep followed by a right-to-left truncated SVD sweep.
  void compress(int chi, int row = 0, const TruncationObserver& observer = {});

  // Full contraction of a state whose open legs are all trivial.
  double log_scalar() const;

  int num_sites() const { return static_cast<int>(cores_.size()); }
  int bond_dimension(int bond) const;  // between site bond and bond+1
  int max_bond_dimension() const;
  double log_scale() const { return log_scale_; }
  bool all_finite() const;

 private:
  std::vector<std::vector<Eigen::MatrixXd>> cores_;
  double log_scale_ = 0.0;
};

// log Z by boundary-MPS contraction, top row to bottom, truncating to chi.
double contract_logz(const TensorGrid& grid, int chi, const TruncationObserver& observer = {});

// Same contraction for the configuration with `flips` negated; `grid` is not modified.
double contract_logz_flipped(const TensorGrid& grid, std::span<const int> flips, int chi);

// Exact row-transfer contraction with a dense boundary vector of size 2^(L+1).
double contract_logz_rows(const TensorGrid& grid);

// True when chi is at least the largest Schmidt rank a boundary state of
// L+1 two-level legs can have, so boundary-MPS truncation never discards weight.
bool boundary_mps_is_exact(int L, int chi);

enum class ContractionEngine { boundary_mps, exact_rows, automatic };

ContractionEngine engine_from_string(const std::string& name);
std::string to_string(ContractionEngine engine);

/// log Z[x](beta) evaluator bound to one lattice and temperature.
class LogPartitionFunction {
 public:
  LogPartitionFunction(const LatticeGeometry& geometry, double beta, int chi = 8,
                       ContractionEngine engine = ContractionEngine::automatic);

  double operator()(const BondConfig& bonds) const;
  double spliced(const BondConfig& inside, const BondConfig& outside, const BondMask& region) const;

  const LatticeGeometry& geometry() const { return *geometry_; }
  double beta() const { return beta_; }
  int chi() const { return chi_; }
  ContractionEngine engine() const { return engine_; }
  const std::array<double, 9>& weights() const { return weights_; }

 private:
  const LatticeGeometry* geometry_;
  double beta_;
  int chi_;
  ContractionEngine engine_;
  std::array<double, 9> weights_{};  // exp(beta k), k = -4..4
};

/**
 * Dense contractions of one configuration above and below every row, for
 * evaluating changes confined to a few adjacent rows. Environments are
 * rebuilt lazily and each depends only on the bonds of the rows it covers,
 * so values do not depend on the order of earlier evaluations.
 */
class RowEnvironment {
 public:
  RowEnvironment(const LogPartitionFunction& log_z, BondConfig bonds);

  const BondConfig& bonds() const { return bonds_; }
  double log_z();

  // log Z of `candidate`, which may differ from bonds() only on rows first..last.
  double log_z_if(const BondConfig& candidate, int first, int last);
  void commit(BondConfig candidate, int first, int last);

  // `candidate` is bonds() gauge-transformed at `spin`; log Z is unchanged.
  void gauge_flip(BondConfig candidate, int spin);

 private:
  const double* top(int k);     // rows 0..k-1 contracted, open legs below row k-1
  const double* bottom(int k);  // rows k..L contracted, open legs above row k

  const LogPartitionFunction* log_z_;
  BondConfig bonds_;
  int rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> tops_, bottoms_, scratch_;
  std::vector<double> top_scale_, bottom_scale_;
  int top_valid_ = 0;     // tops 0..top_valid_ are current
  int bottom_valid_ = 0;  // bottoms bottom_valid_..rows_ are current
};

}  // namespace tmc
