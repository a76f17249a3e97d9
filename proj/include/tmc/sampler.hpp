#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tmc/ising_tn.hpp"
#include "tmc/lattice.hpp"
#include "tmc/rng.hpp"

namespace tmc {

// Point on the Nishimori line, tanh(beta) = 1 - 2p. p is the primary knob.
struct NishimoriParams {
  double p = 0.5;
  double beta = 0.0;
  double temperature = 0.0;  // +inf at p = 0.5
  bool zero_temperature = false;
};

NishimoriParams params_from_p(double p);
NishimoriParams params_from_temperature(double temperature);

// One draw of the binomial-plus-gauge sampler: x_e = eta_e * prod_{v in e} sigma_v.
struct GaugeDraw {
  std::vector<std::int8_t> eta;    // per bond
  std::vector<std::int8_t> sigma;  // per spin
  BondConfig x;
};

BondConfig compose_bonds(const LatticeGeometry& geometry, const std::vector<std::int8_t>& eta,
                         const std::vector<std::int8_t>& sigma);

GaugeDraw sample_nishimori_draw(const LatticeGeometry& geometry, const NishimoriParams& params, RngStream& rng);

// Bond configuration distributed proportionally to Z[x](beta).
BondConfig sample_nishimori(const LatticeGeometry& geometry, const NishimoriParams& params, RngStream& rng);

struct Replica {
  std::vector<std::int8_t> eta;
  std::vector<std::int8_t> sigma;
  BondConfig x;
  double log_z = 0.0;
};

/**
 * Replica pair (x, x') for one bipartition. Region bonds (A) are the masked
 * ones; the rest is B. Cached values:
 *   replicas[i].log_z    log Z of each replica
 *   log_z_swapped[0]     log Z(x'_A, x_B)
 *   log_z_swapped[1]     log Z(x_A, x'_B)
 */
struct ReplicaState {
  std::array<Replica, 2> replicas;
  BondMask region;
  std::array<double, 2> log_z_swapped{0.0, 0.0};

  // log of sqrt(Z(x'_A,x_B) Z(x_A,x'_B) / (Z(x_A,x_B) Z(x'_A,x'_B)))
  double swap_log_ratio() const;
};

ReplicaState make_replica_state(Replica first, Replica second, BondMask region, const LogPartitionFunction& log_z);
ReplicaState sample_replica_state(const LatticeGeometry& geometry, const BondMask& region,
                                  const NishimoriParams& params, RngStream& rng, const LogPartitionFunction& log_z);
void refresh_caches(ReplicaState& state, const LogPartitionFunction& log_z);

// log g(x, x', lambda) = lambda * swap_log_ratio
double log_g(const ReplicaState& state, double lambda);

enum class ProposalKind {
  full_resample,  // fresh binomial + gauge draw for the whole replica
  local,          // flip one sigma_v or redraw one eta_e
  row_sweep,      // local moves visited row by row, see LocalSweep
};

ProposalKind proposal_from_string(const std::string& name);
std::string to_string(ProposalKind kind);

struct UpdateOutcome {
  bool accepted = false;
  double acceptance_probability = 1.0;
  int contractions = 0;
};

/**
 * One Metropolis step on replica `which` targeting Z(x) Z(x') g(x, x', lambda).
 * Proposals are reversible with respect to the Nishimori measure on (eta,
 * sigma), so the acceptance probability is min(1, g_new / g_old).
 */
UpdateOutcome metropolis_update(ReplicaState& state, double lambda, const NishimoriParams& params, RngStream& rng,
                                int which, const LogPartitionFunction& log_z,
                                ProposalKind kind = ProposalKind::full_resample);

/**
 * Row-by-row schedule for local moves. Row r owns the bonds of its nodes,
 * its horizontal spins and the vertical spins below it; the cursor runs down
 * the grid and back, spending one update per owned variable on each row.
 * With the exact row engine it keeps environments for x, x' and both swapped
 * configurations, so a move costs one or two row transfers.
 *
 * The sweep must see every change of the replica state; call reset() after
 * modifying the state by other means.
 */
class LocalSweep {
 public:
  struct Cursor {
    int row = 0;
    int direction = 1;
    int used = 0;  // updates spent on the current row

    bool operator==(const Cursor&) const = default;
  };

  LocalSweep(const ReplicaState& state, const LogPartitionFunction& log_z);

  void reset(const ReplicaState& state);
  const Cursor& cursor() const { return cursor_; }
  void set_cursor(const Cursor& cursor);
  bool cached() const { return !envs_.empty(); }

 private:
  friend UpdateOutcome metropolis_update(ReplicaState&, double, const NishimoriParams&, RngStream&, int,
                                         const LogPartitionFunction&, LocalSweep&);
  void advance();

  const LogPartitionFunction* log_z_;
  std::vector<std::vector<int>> row_spins_, row_bonds_;
  std::vector<RowEnvironment> envs_;  // x, x', Z(x'_A, x_B), Z(x_A, x'_B)
  Cursor cursor_;
};

// One local move on replica `which` at the sweep's current row.
UpdateOutcome metropolis_update(ReplicaState& state, double lambda, const NishimoriParams& params, RngStream& rng,
                                int which, const LogPartitionFunction& log_z, LocalSweep& sweep);

}  // namespace tmc
