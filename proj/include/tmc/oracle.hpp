#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "tmc/ising_tn.hpp"
#include "tmc/lattice.hpp"

namespace tmc {

inline constexpr int kMaxEnumeratedSpins = 26;
inline constexpr int kMaxEnumeratedBonds = 20;

// Brute-force log Z by Gray-code enumeration of all 2^N_v spin states,
// accumulating an integer energy histogram.
double exact_logz(const LatticeGeometry& geometry, const BondConfig& bonds, double beta);

// Bond configuration for an enumeration index: bit b set <=> x_b = -1.
BondConfig bonds_from_index(int num_bonds, std::uint64_t index);

/**
 * |psi(beta)> over all 2^N_e bond configurations. log_z[i] is the exact
 * log Z of configuration i; amplitude[i] = sqrt(Z_i / sum Z).
 */
struct ExactWavefunction {
  const LatticeGeometry* geometry = nullptr;
  double beta = 0.0;
  std::vector<double> log_z;
  std::vector<double> amplitude;
  double log_norm = 0.0;  // log sum_i Z_i
};

ExactWavefunction exact_wavefunction(const LatticeGeometry& geometry, double beta);

// Renyi-2 entropy from the Gram matrix of psi reshaped to (x_A, x_B).
double exact_renyi2(const LatticeGeometry& geometry, const BondMask& region, double p);
double exact_renyi2(const ExactWavefunction& psi, const BondMask& region);

// Same quantity from the four-fold sum of the swap estimator over the exact
// joint distribution. Cost 2^(2 N_e).
double exact_renyi2_swap_average(const ExactWavefunction& psi, const BondMask& region);

double exact_t_l(const LatticeGeometry& geometry, const AnyonPath& path, double p);
double exact_t_l(const ExactWavefunction& psi, const AnyonPath& path);
// Accumulates over the flipped configuration in descending order instead.
double exact_t_l_reordered(const ExactWavefunction& psi, const AnyonPath& path);

// Renyi entropy (any index) at beta = infinity, where psi is the uniform
// superposition over pure-gauge configurations:
// S = (N_v + 1 - c(G_A) - c(G_B)) ln 2, with c the number of connected
// components of the spin graph restricted to the bonds of each side.
double gauge_limit_entropy(const LatticeGeometry& geometry, const BondMask& region);

// Golden values for the test fixtures of one small lattice.
nlohmann::json oracle_fixture(const LatticeGeometry& geometry, double p, std::uint64_t seed, int n_configs);

}  // namespace tmc
