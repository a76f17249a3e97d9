#include "tmc/oracle.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "tmc/error.hpp"
#include "tmc/rng.hpp"
#include "tmc/stats.hpp"

namespace tmc {

namespace {

double beta_from_p(double p) {
  if (!(p > 0.0 && p <= 0.5)) throw Error(ErrorCode::invalid_parameter, "oracle needs p in (0, 0.5]");
  return p == 0.5 ? 0.0 : std::atanh(1.0 - 2.0 * p);
}

void require_enumerable_bonds(const LatticeGeometry& geometry) {
  if (geometry.num_bonds() > kMaxEnumeratedBonds)
    throw Error(ErrorCode::too_large, "exact wavefunction limited to " + std::to_string(kMaxEnumeratedBonds) +
                                          " bonds, lattice has " + std::to_string(geometry.num_bonds()));
}

struct BitSplit {
  std::vector<int> inside;
  std::vector<int> outside;
};

BitSplit split_bits(const BondMask& region) {
  BitSplit s;
  for (int b = 0; b < static_cast<int>(region.size()); ++b) (region[b] ? s.inside : s.outside).push_back(b);
  return s;
}

std::uint64_t gather(std::uint64_t index, const std::vector<int>& bits) {
  std::uint64_t out = 0;
  for (std::size_t k = 0; k < bits.size(); ++k) out |= ((index >> bits[k]) & 1u) << k;
  return out;
}

std::uint64_t region_bits(const BondMask& region) {
  std::uint64_t m = 0;
  for (std::size_t b = 0; b < region.size(); ++b)
    if (region[b]) m |= std::uint64_t{1} << b;
  return m;
}

}  // namespace

double exact_logz(const LatticeGeometry& geometry, const BondConfig& bonds, double beta) {
  const int nv = geometry.num_spins();
  const int ne = geometry.num_bonds();
  if (nv > kMaxEnumeratedSpins)
    throw Error(ErrorCode::too_large, "spin enumeration limited to " + std::to_string(kMaxEnumeratedSpins) + " spins");
  if (bonds.size() != ne) throw Error(ErrorCode::config_mismatch, "bond configuration does not match the lattice");

  std::vector<std::int8_t> s(static_cast<std::size_t>(nv), 1);
  std::vector<std::uint64_t> hist(static_cast<std::size_t>(2 * ne + 1), 0);
  int energy = 0;
  for (int b = 0; b < ne; ++b) energy += bonds[b];
  hist[energy + ne] += 1;
  const std::uint64_t count = std::uint64_t{1} << nv;
  for (std::uint64_t g = 1; g < count; ++g) {
    const int i = std::countr_zero(g);
    int local = 0;
    for (int b : geometry.spin_bonds(i)) {
      const Bond& bd = geometry.bond(b);
      const int other = bd.spin_a == i ? bd.spin_b : bd.spin_a;
      local += bonds[b] * s[other];
    }
    energy -= 2 * s[i] * local;
    s[i] = static_cast<std::int8_t>(-s[i]);
    hist[energy + ne] += 1;
  }

  std::vector<double> terms;
  for (int e = -ne; e <= ne; ++e)
    if (hist[e + ne] > 0) terms.push_back(std::log(static_cast<double>(hist[e + ne])) + beta * e);
  return log_sum_exp(terms);
}

BondConfig bonds_from_index(int num_bonds, std::uint64_t index) {
  BondConfig x(num_bonds);
  for (int b = 0; b < num_bonds; ++b)
    if ((index >> b) & 1u) x.set(b, -1);
  return x;
}

ExactWavefunction exact_wavefunction(const LatticeGeometry& geometry, double beta) {
  require_enumerable_bonds(geometry);
  const int ne = geometry.num_bonds();
  const std::uint64_t count = std::uint64_t{1} << ne;
  ExactWavefunction psi;
  psi.geometry = &geometry;
  psi.beta = beta;
  psi.log_z.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) psi.log_z[i] = exact_logz(geometry, bonds_from_index(ne, i), beta);
  psi.log_norm = log_sum_exp(psi.log_z);
  psi.amplitude.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) psi.amplitude[i] = std::exp(0.5 * (psi.log_z[i] - psi.log_norm));
  return psi;
}

double exact_renyi2(const ExactWavefunction& psi, const BondMask& region) {
  const LatticeGeometry& geometry = *psi.geometry;
  if (static_cast<int>(region.size()) != geometry.num_bonds())
    throw Error(ErrorCode::config_mismatch, "region mask does not match the lattice");
  const BitSplit split = split_bits(region);
  if (split.inside.empty() || split.outside.empty()) return 0.0;

  const Eigen::Index rows = Eigen::Index{1} << split.inside.size();
  const Eigen::Index cols = Eigen::Index{1} << split.outside.size();
  Eigen::MatrixXd m(rows, cols);
  for (std::uint64_t i = 0; i < psi.amplitude.size(); ++i)
    m(static_cast<Eigen::Index>(gather(i, split.inside)), static_cast<Eigen::Index>(gather(i, split.outside))) =
        psi.amplitude[i];
  const Eigen::MatrixXd gram = rows <= cols ? Eigen::MatrixXd(m * m.transpose()) : Eigen::MatrixXd(m.transpose() * m);
  return 0.0 - std::log(gram.squaredNorm());
}

double exact_renyi2(const LatticeGeometry& geometry, const BondMask& region, double p) {
  const ExactWavefunction psi = exact_wavefunction(geometry, beta_from_p(p));
  return exact_renyi2(psi, region);
}

double exact_renyi2_swap_average(const ExactWavefunction& psi, const BondMask& region) {
  const std::uint64_t a = region_bits(region);
  const std::uint64_t count = psi.amplitude.size();
  const std::uint64_t b = (count - 1) & ~a;
  const std::vector<double>& amp = psi.amplitude;
  // pi(x) pi(x') sqrt(Z(x'_A x_B) Z(x_A x'_B) / (Z(x) Z(x'))) in amplitude form.
  long double total = 0.0L;
  for (std::uint64_t x = 0; x < count; ++x) {
    const double ax = amp[x];
    double row = 0.0;
    for (std::uint64_t y = 0; y < count; ++y) row += amp[y] * amp[(y & a) | (x & b)] * amp[(x & a) | (y & b)];
    total += static_cast<long double>(ax * row);
  }
  return 0.0 - std::log(static_cast<double>(total));
}

double exact_t_l(const ExactWavefunction& psi, const AnyonPath& path) {
  std::uint64_t flip = 0;
  for (int b : path.bonds) flip |= std::uint64_t{1} << b;
  if (flip == 0) return 1.0;
  double total = 0.0;
  for (std::uint64_t i = 0; i < psi.amplitude.size(); ++i) total += psi.amplitude[i] * psi.amplitude[i ^ flip];
  return total;
}

double exact_t_l_reordered(const ExactWavefunction& psi, const AnyonPath& path) {
  std::uint64_t flip = 0;
  for (int b : path.bonds) flip |= std::uint64_t{1} << b;
  if (flip == 0) return 1.0;
  std::vector<double> terms;
  terms.reserve(psi.log_z.size());
  for (std::uint64_t j = psi.log_z.size(); j-- > 0;) terms.push_back(0.5 * (psi.log_z[j ^ flip] + psi.log_z[j]));
  return std::exp(log_sum_exp(terms) - psi.log_norm);
}

double exact_t_l(const LatticeGeometry& geometry, const AnyonPath& path, double p) {
  require_enumerable_bonds(geometry);
  if (path.bonds.empty()) return 1.0;
  const double beta = beta_from_p(p);
  if (beta == 0.0) return 1.0;
  return exact_t_l(exact_wavefunction(geometry, beta), path);
}

double gauge_limit_entropy(const LatticeGeometry& geometry, const BondMask& region) {
  const int nv = geometry.num_spins();
  auto components = [&](bool side) {
    std::vector<int> parent(static_cast<std::size_t>(nv));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    int comps = nv;
    for (int b = 0; b < geometry.num_bonds(); ++b) {
      if (static_cast<bool>(region[b]) != side) continue;
      const int ra = find(geometry.bond(b).spin_a);
      const int rb = find(geometry.bond(b).spin_b);
      if (ra != rb) {
        parent[ra] = rb;
        --comps;
      }
    }
    return comps;
  };
  return static_cast<double>(nv + 1 - components(true) - components(false)) * std::numbers::ln2;
}

nlohmann::json oracle_fixture(const LatticeGeometry& geometry, double p, std::uint64_t seed, int n_configs) {
  nlohmann::json j;
  const double beta = beta_from_p(p);
  j["L"] = geometry.size();
  j["p"] = p;
  j["beta"] = beta;
  nlohmann::json configs = nlohmann::json::array();
  RngStream rng(seed, 0);
  for (int k = 0; k < n_configs; ++k) {
    BondConfig x(geometry.num_bonds());
    for (int b = 0; b < x.size(); ++b) x.set(b, rng.sign());
    std::string signs;
    for (int b = 0; b < x.size(); ++b) signs += x[b] > 0 ? '+' : '-';
    configs.push_back({{"bonds", signs}, {"log_z", exact_logz(geometry, x, beta)}});
  }
  j["configs"] = configs;
  if (geometry.num_bonds() <= kMaxEnumeratedBonds) {
    const ExactWavefunction psi = exact_wavefunction(geometry, beta);
    j["s2_half"] = exact_renyi2(psi, half_region(geometry));
    const AnyonPath path = default_anyon_path(geometry);
    j["t_l"] = {{"length", path.length}, {"value", exact_t_l(psi, path)}};
  }
  return j;
}

}  // namespace tmc
