#include "tmc/sampler.hpp"

#include <cmath>
#include <limits>

#include "tmc/error.hpp"

namespace tmc {

NishimoriParams params_from_p(double p) {
  if (!(p >= 0.0 && p <= 0.5))
    throw Error(ErrorCode::invalid_parameter, "flip probability must lie in [0, 0.5], got " + std::to_string(p));
  NishimoriParams np;
  np.p = p;
  if (p == 0.0) {
    np.beta = std::numeric_limits<double>::infinity();
    np.temperature = 0.0;
    np.zero_temperature = true;
  } else if (p == 0.5) {
    np.beta = 0.0;
    np.temperature = std::numeric_limits<double>::infinity();
  } else {
    np.beta = std::atanh(1.0 - 2.0 * p);
    np.temperature = 1.0 / np.beta;
  }
  return np;
}

NishimoriParams params_from_temperature(double temperature) {
  if (!(temperature > 0.0))
    throw Error(ErrorCode::invalid_parameter, "temperature must be positive, got " + std::to_string(temperature));
  if (std::isinf(temperature)) return params_from_p(0.5);
  NishimoriParams np;
  np.beta = 1.0 / temperature;
  np.temperature = temperature;
  np.p = 0.5 * (1.0 - std::tanh(np.beta));
  return np;
}

BondConfig compose_bonds(const LatticeGeometry& geometry, const std::vector<std::int8_t>& eta,
                         const std::vector<std::int8_t>& sigma) {
  BondConfig x(geometry.num_bonds());
  for (int b = 0; b < geometry.num_bonds(); ++b) {
    const Bond& bd = geometry.bond(b);
    x.set(b, static_cast<std::int8_t>(eta[b] * sigma[bd.spin_a] * sigma[bd.spin_b]));
  }
  return x;
}

GaugeDraw sample_nishimori_draw(const LatticeGeometry& geometry, const NishimoriParams& params, RngStream& rng) {
  GaugeDraw d;
  d.eta.resize(static_cast<std::size_t>(geometry.num_bonds()));
  d.sigma.resize(static_cast<std::size_t>(geometry.num_spins()));
  for (auto& e : d.eta) e = rng.bernoulli(params.p) ? std::int8_t{-1} : std::int8_t{1};
  for (auto& s : d.sigma) s = rng.sign();
  d.x = compose_bonds(geometry, d.eta, d.sigma);
  return d;
}

BondConfig sample_nishimori(const LatticeGeometry& geometry, const NishimoriParams& params, RngStream& rng) {
  return sample_nishimori_draw(geometry, params, rng).x;
}

double ReplicaState::swap_log_ratio() const {
  return 0.5 * (log_z_swapped[0] + log_z_swapped[1] - replicas[0].log_z - replicas[1].log_z);
}

void refresh_caches(ReplicaState& state, const LogPartitionFunction& log_z) {
  const BondConfig& x = state.replicas[0].x;
  const BondConfig& y = state.replicas[1].x;
  state.replicas[0].log_z = log_z(x);
  state.replicas[1].log_z = log_z(y);
  state.log_z_swapped[0] = log_z.spliced(y, x, state.region);
  state.log_z_swapped[1] = log_z.spliced(x, y, state.region);
}

ReplicaState make_replica_state(Replica first, Replica second, BondMask region, const LogPartitionFunction& log_z) {
  if (static_cast<int>(region.size()) != log_z.geometry().num_bonds())
    throw Error(ErrorCode::config_mismatch, "region mask does not match the lattice");
  ReplicaState s;
  s.replicas = {std::move(first), std::move(second)};
  s.region = std::move(region);
  refresh_caches(s, log_z);
  return s;
}

ReplicaState sample_replica_state(const LatticeGeometry& geometry, const BondMask& region,
                                  const NishimoriParams& params, RngStream& rng, const LogPartitionFunction& log_z) {
  std::array<Replica, 2> r;
  for (auto& rep : r) {
    GaugeDraw d = sample_nishimori_draw(geometry, params, rng);
    rep.eta = std::move(d.eta);
    rep.sigma = std::move(d.sigma);
    rep.x = std::move(d.x);
  }
  return make_replica_state(std::move(r[0]), std::move(r[1]), region, log_z);
}

double log_g(const ReplicaState& state, double lambda) {
  if (lambda == 0.0) return 0.0;
  return lambda * state.swap_log_ratio();
}

ProposalKind proposal_from_string(const std::string& name) {
  if (name == "full" || name == "full_resample") return ProposalKind::full_resample;
  if (name == "local") return ProposalKind::local;
  if (name == "sweep" || name == "row_sweep") return ProposalKind::row_sweep;
  throw Error(ErrorCode::usage, "unknown proposal kind '" + name + "' (expected full, local or sweep)");
}

std::string to_string(ProposalKind kind) {
  switch (kind) {
    case ProposalKind::full_resample: return "full";
    case ProposalKind::local: return "local";
    case ProposalKind::row_sweep: return "sweep";
  }
  return "?";
}

UpdateOutcome metropolis_update(ReplicaState& state, double lambda, const NishimoriParams& params, RngStream& rng,
                                int which, const LogPartitionFunction& log_z, ProposalKind kind) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::invalid_parameter, "lambda must lie in [0, 1]");
  if (which != 0 && which != 1) throw Error(ErrorCode::invalid_parameter, "replica index must be 0 or 1");
  if (kind == ProposalKind::row_sweep) throw Error(ErrorCode::usage, "row sweep updates need a LocalSweep");
  const LatticeGeometry& geometry = log_z.geometry();
  const Replica& current = state.replicas[which];
  const Replica& other = state.replicas[1 - which];

  Replica proposal;
  bool gauge_only = false;
  // Swapped caches that the proposal can change: [0] holds this replica's
  // outside bonds when which == 0, [1] holds its inside bonds.
  std::array<bool, 2> touched{true, true};
  if (kind == ProposalKind::full_resample) {
    GaugeDraw d = sample_nishimori_draw(geometry, params, rng);
    proposal.eta = std::move(d.eta);
    proposal.sigma = std::move(d.sigma);
    proposal.x = std::move(d.x);
  } else {
    proposal = current;
    bool inside = false;
    bool outside = false;
    if (rng.uniform() < 0.5) {
      const int v = static_cast<int>(rng.index(static_cast<std::uint64_t>(geometry.num_spins())));
      proposal.sigma[v] = static_cast<std::int8_t>(-proposal.sigma[v]);
      for (int b : geometry.spin_bonds(v)) {
        proposal.x.flip(b);
        (state.region[b] ? inside : outside) = true;
      }
      gauge_only = true;
      // A gauge flip confined to one side is a gauge flip of both swapped configurations too.
      if (!(inside && outside)) inside = outside = false;
    } else {
      const int b = static_cast<int>(rng.index(static_cast<std::uint64_t>(geometry.num_bonds())));
      const std::int8_t e = rng.bernoulli(params.p) ? std::int8_t{-1} : std::int8_t{1};
      if (e == proposal.eta[b]) return UpdateOutcome{true, 1.0, 0};  // redraw reproduced the current state
      proposal.eta[b] = e;
      proposal.x.flip(b);
      (state.region[b] ? inside : outside) = true;
    }
    touched[which == 0 ? 1 : 0] = inside;
    touched[which == 0 ? 0 : 1] = outside;
  }

  UpdateOutcome out;
  // Z is gauge invariant, so a sigma flip leaves log Z of the replica unchanged.
  if (gauge_only) {
    proposal.log_z = current.log_z;
  } else {
    proposal.log_z = log_z(proposal.x);
    ++out.contractions;
  }
  // Swapped configurations with the proposal in slot `which`.
  const BondConfig& x0 = which == 0 ? proposal.x : other.x;
  const BondConfig& x1 = which == 0 ? other.x : proposal.x;
  std::array<double, 2> swapped = state.log_z_swapped;
  if (touched[0]) {
    swapped[0] = log_z.spliced(x1, x0, state.region);
    ++out.contractions;
  }
  if (touched[1]) {
    swapped[1] = log_z.spliced(x0, x1, state.region);
    ++out.contractions;
  }

  const double lz0 = which == 0 ? proposal.log_z : other.log_z;
  const double lz1 = which == 0 ? other.log_z : proposal.log_z;
  const double new_ratio = 0.5 * (swapped[0] + swapped[1] - lz0 - lz1);
  const double delta = lambda * (new_ratio - state.swap_log_ratio());

  out.acceptance_probability = delta >= 0.0 ? 1.0 : std::exp(delta);
  out.accepted = delta >= 0.0 || rng.uniform() < out.acceptance_probability;
  if (out.accepted) {
    state.replicas[which] = std::move(proposal);
    state.log_z_swapped = swapped;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Row sweep

LocalSweep::LocalSweep(const ReplicaState& state, const LogPartitionFunction& log_z) : log_z_(&log_z) {
  const LatticeGeometry& g = log_z.geometry();
  const int rows = g.size() + 1;
  row_spins_.resize(static_cast<std::size_t>(rows));
  row_bonds_.resize(static_cast<std::size_t>(rows));
  for (int v = 0; v < g.num_spins(); ++v) row_spins_[g.spin(v).row].push_back(v);
  for (int b = 0; b < g.num_bonds(); ++b) row_bonds_[g.node(g.bond(b).node).row].push_back(b);
  reset(state);
}

void LocalSweep::reset(const ReplicaState& state) {
  envs_.clear();
  if (log_z_->engine() != ContractionEngine::exact_rows) return;
  const BondConfig& x0 = state.replicas[0].x;
  const BondConfig& x1 = state.replicas[1].x;
  envs_.reserve(4);
  envs_.emplace_back(*log_z_, x0);
  envs_.emplace_back(*log_z_, x1);
  envs_.emplace_back(*log_z_, splice(x1, x0, state.region));
  envs_.emplace_back(*log_z_, splice(x0, x1, state.region));
}

void LocalSweep::set_cursor(const Cursor& cursor) {
  const int rows = static_cast<int>(row_spins_.size());
  const int owned = cursor.row >= 0 && cursor.row < rows
                        ? static_cast<int>(row_spins_[cursor.row].size() + row_bonds_[cursor.row].size())
                        : 0;
  if (owned == 0 || (cursor.direction != 1 && cursor.direction != -1) || cursor.used < 0 || cursor.used >= owned)
    throw Error(ErrorCode::invalid_parameter, "sweep cursor out of range");
  cursor_ = cursor;
}

void LocalSweep::advance() {
  const int rows = static_cast<int>(row_spins_.size());
  const auto owned = row_spins_[cursor_.row].size() + row_bonds_[cursor_.row].size();
  if (static_cast<std::size_t>(++cursor_.used) < owned) return;
  cursor_.used = 0;
  if (rows == 1) return;
  if (cursor_.row + cursor_.direction < 0 || cursor_.row + cursor_.direction >= rows) cursor_.direction = -cursor_.direction;
  cursor_.row += cursor_.direction;
}

UpdateOutcome metropolis_update(ReplicaState& state, double lambda, const NishimoriParams& params, RngStream& rng,
                                int which, const LogPartitionFunction& log_z, LocalSweep& sweep) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::invalid_parameter, "lambda must lie in [0, 1]");
  if (which != 0 && which != 1) throw Error(ErrorCode::invalid_parameter, "replica index must be 0 or 1");
  if (sweep.log_z_ != &log_z) throw Error(ErrorCode::invalid_parameter, "sweep belongs to another evaluator");
  const LatticeGeometry& geometry = log_z.geometry();
  const std::vector<int>& spins = sweep.row_spins_[sweep.cursor_.row];
  const std::vector<int>& bonds = sweep.row_bonds_[sweep.cursor_.row];
  sweep.advance();

  const Replica& current = state.replicas[which];
  const Replica& other = state.replicas[1 - which];
  Replica proposal = current;
  std::vector<int> flipped;
  int spin = -1;
  int first = 0;
  int last = 0;
  if (rng.uniform() < 0.5) {
    spin = spins[rng.index(spins.size())];
    proposal.sigma[spin] = static_cast<std::int8_t>(-proposal.sigma[spin]);
    for (int b : geometry.spin_bonds(spin)) flipped.push_back(b);
    const Spin& sp = geometry.spin(spin);
    first = sp.row;
    last = sp.horizontal ? sp.row : sp.row + 1;
  } else {
    const int b = bonds[rng.index(bonds.size())];
    const std::int8_t e = rng.bernoulli(params.p) ? std::int8_t{-1} : std::int8_t{1};
    if (e == proposal.eta[b]) return UpdateOutcome{true, 1.0, 0};
    proposal.eta[b] = e;
    flipped.push_back(b);
    first = last = geometry.node(geometry.bond(b).node).row;
  }
  for (int b : flipped) proposal.x.flip(b);

  const BondConfig& x0 = which == 0 ? proposal.x : other.x;
  const BondConfig& x1 = which == 0 ? other.x : proposal.x;
  // Configurations affected by the move: this replica, then both swaps.
  // Each swap takes this replica's bonds on one side of the region.
  std::array<BondConfig, 3> candidate{proposal.x, splice(x1, x0, state.region), splice(x0, x1, state.region)};
  const std::array<int, 3> env_index{which, 2, 3};
  const std::array<int, 3> side{-1, which == 0 ? 0 : 1, which == 0 ? 1 : 0};  // region value taken from this replica

  enum class Change { none, gauge, general };
  std::array<Change, 3> change{};
  for (int k = 0; k < 3; ++k) {
    int own = 0;
    for (int b : flipped)
      if (side[k] < 0 || state.region[b] == side[k]) ++own;
    if (own == 0)
      change[k] = Change::none;
    else if (own == static_cast<int>(flipped.size()) && spin >= 0)
      change[k] = Change::gauge;
    else
      change[k] = Change::general;
  }

  UpdateOutcome out;
  std::array<double, 3> value{current.log_z, state.log_z_swapped[0], state.log_z_swapped[1]};
  for (int k = 0; k < 3; ++k) {
    if (change[k] != Change::general) continue;
    value[k] = sweep.cached() ? sweep.envs_[env_index[k]].log_z_if(candidate[k], first, last) : log_z(candidate[k]);
    ++out.contractions;
  }
  proposal.log_z = value[0];
  const double lz0 = which == 0 ? proposal.log_z : other.log_z;
  const double lz1 = which == 0 ? other.log_z : proposal.log_z;
  const double new_ratio = 0.5 * (value[1] + value[2] - lz0 - lz1);
  const double delta = lambda * (new_ratio - state.swap_log_ratio());

  out.acceptance_probability = delta >= 0.0 ? 1.0 : std::exp(delta);
  out.accepted = delta >= 0.0 || rng.uniform() < out.acceptance_probability;
  if (out.accepted) {
    if (sweep.cached())
      for (int k = 0; k < 3; ++k) {
        RowEnvironment& env = sweep.envs_[env_index[k]];
        if (change[k] == Change::gauge)
          env.gauge_flip(std::move(candidate[k]), spin);
        else if (change[k] == Change::general)
          env.commit(std::move(candidate[k]), first, last);
      }
    state.replicas[which] = std::move(proposal);
    state.log_z_swapped = {value[1], value[2]};
  }
  return out;
}

}  // namespace tmc
