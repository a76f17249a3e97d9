#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tmc/ising_tn.hpp"
#include "tmc/lattice.hpp"
#include "tmc/rng.hpp"
#include "tmc/sampler.hpp"

namespace tmc {

inline constexpr int kDefaultSchedule = 100000;
inline constexpr int kCheckpointSchema = 1;
inline constexpr const char* kCheckpointMagic = "tmc-jarzynski-checkpoint";

struct TrajectoryOptions {
  int n_steps = kDefaultSchedule;
  int updates_per_step = 1;
  int chi = 8;
  ContractionEngine engine = ContractionEngine::automatic;
  ProposalKind proposal = ProposalKind::local;
  bool record_series = false;
  // Diagnostic: x' mirrors x for the whole trajectory, so every swap is trivial.
  bool mirror_replicas = false;
  int checkpoint_interval = 0;  // steps between checkpoints, 0 disables
  std::filesystem::path checkpoint_path;
};

struct WorkRecord {
  std::int64_t id = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  int n_steps = 0;
  double work = 0.0;
  std::vector<double> series;  // per-step dW when recorded
  double acceptance_rate = 0.0;
  double wall_seconds = 0.0;
};

nlohmann::json to_json(const WorkRecord& record);
WorkRecord work_record_from_json(const nlohmann::json& j);

/**
 * Forward nonequilibrium switch from Q(0) to Q(1) for one bipartition.
 *
 * The replicas start from two independent Nishimori draws, which is the exact
 * equilibrium of Q(0). Step k measures dW = (1/n) * u(x, x') at the current
 * configuration, then performs `updates_per_step` Metropolis updates at
 * lambda_{k+1} = (k+1)/n, alternating the replica being updated.
 *
 * The runner can stop after any number of steps and continue from its last
 * checkpoint in a fresh process.
 */
class TrajectoryRunner {
 public:
  TrajectoryRunner(const LatticeGeometry& geometry, BondMask region, const NishimoriParams& params,
                   TrajectoryOptions options, std::int64_t id, RngStream rng);

  // Advances at most max_steps schedule steps; returns true once finished.
  bool advance(int max_steps);
  bool finished() const { return step_ == options_.n_steps; }
  int step() const { return step_; }
  bool resumed() const { return resumed_; }
  double work() const { return work_; }
  const ReplicaState& state() const { return state_; }

  WorkRecord record() const;
  void write_checkpoint() const;

 private:
  void restore(const nlohmann::json& j);

  const LatticeGeometry* geometry_;
  NishimoriParams params_;
  TrajectoryOptions options_;
  std::int64_t id_;
  RngStream rng_;
  LogPartitionFunction log_z_;
  ReplicaState state_;
  std::optional<LocalSweep> sweep_;
  int step_ = 0;
  long long updates_ = 0;
  long long accepted_ = 0;
  double work_ = 0.0;
  std::vector<double> series_;
  double wall_seconds_ = 0.0;
  bool resumed_ = false;
};

WorkRecord run_trajectory(const LatticeGeometry& geometry, const BondMask& region, const NishimoriParams& params,
                          const TrajectoryOptions& options, RngStream rng, std::int64_t id = 0);

struct RunMeta {
  int L = 0;
  double p = 0.5;
  double T = 0.0;
  int n_steps = 0;
  int chi = 0;

  bool operator==(const RunMeta&) const = default;
};

struct EntropyEstimate {
  double s2 = 0.0;
  double error = 0.0;
  int n_trajectories = 0;
  std::string region;
  RunMeta meta;
  double mean_work = 0.0;
};

// S2 = -ln <e^W> with a delete-one jackknife error.
EntropyEstimate estimate_entropy(std::span<const double> works);
EntropyEstimate estimate_entropy(std::span<const WorkRecord> records);

// S2 <= -mean(W) + sigma_factor * error (convexity of exp).
bool jensen_bound_holds(const EntropyEstimate& estimate, double sigma_factor = 3.0);

}  // namespace tmc
