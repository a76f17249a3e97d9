#include "tmc/jarzynski.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "tmc/error.hpp"
#include "tmc/stats.hpp"

namespace tmc {

namespace {

std::string encode_signs(const std::vector<std::int8_t>& v) {
  std::string s(v.size(), '+');
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] < 0) s[i] = '-';
  return s;
}

std::vector<std::int8_t> decode_signs(const std::string& s, std::size_t expected) {
  if (s.size() != expected) throw Error(ErrorCode::checkpoint_schema, "sign vector has wrong length");
  std::vector<std::int8_t> v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '+' && s[i] != '-') throw Error(ErrorCode::checkpoint_schema, "corrupt sign vector");
    v[i] = s[i] == '-' ? std::int8_t{-1} : std::int8_t{1};
  }
  return v;
}

}  // namespace

nlohmann::json to_json(const WorkRecord& r) {
  nlohmann::json j{{"id", r.id},         {"seed", r.seed},
                   {"stream", r.stream}, {"n_steps", r.n_steps},
                   {"W", r.work},        {"acceptance_rate", r.acceptance_rate},
                   {"wall_seconds", r.wall_seconds}};
  if (!r.series.empty()) j["series"] = r.series;
  return j;
}

WorkRecord work_record_from_json(const nlohmann::json& j) {
  WorkRecord r;
  r.id = j.at("id").get<std::int64_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.stream = j.value("stream", std::uint64_t{0});
  r.n_steps = j.at("n_steps").get<int>();
  r.work = j.at("W").get<double>();
  r.acceptance_rate = j.value("acceptance_rate", 0.0);
  r.wall_seconds = j.value("wall_seconds", 0.0);
  if (j.contains("series")) r.series = j["series"].get<std::vector<double>>();
  return r;
}

TrajectoryRunner::TrajectoryRunner(const LatticeGeometry& geometry, BondMask region, const NishimoriParams& params,
                                   TrajectoryOptions options, std::int64_t id, RngStream rng)
    : geometry_(&geometry),
      params_(params),
      options_(std::move(options)),
      id_(id),
      rng_(std::move(rng)),
      log_z_(geometry, params.beta, options_.chi, options_.engine) {
  if (options_.n_steps < 1) throw Error(ErrorCode::invalid_parameter, "n_steps must be >= 1");
  if (options_.updates_per_step < 0) throw Error(ErrorCode::invalid_parameter, "updates_per_step must be >= 0");
  if (static_cast<int>(region.size()) != geometry.num_bonds())
    throw Error(ErrorCode::config_mismatch, "region mask does not match the lattice");

  if (!options_.checkpoint_path.empty() && std::filesystem::exists(options_.checkpoint_path)) {
    std::ifstream in(options_.checkpoint_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::checkpoint_schema, "unreadable checkpoint " + options_.checkpoint_path.string());
    }
    state_.region = std::move(region);
    restore(j);
    resumed_ = true;
    return;
  }

  if (options_.mirror_replicas) {
    GaugeDraw d = sample_nishimori_draw(geometry, params_, rng_);
    Replica r{std::move(d.eta), std::move(d.sigma), std::move(d.x), 0.0};
    state_ = make_replica_state(r, r, std::move(region), log_z_);
  } else {
    state_ = sample_replica_state(geometry, region, params_, rng_, log_z_);
  }
  if (options_.proposal == ProposalKind::row_sweep) sweep_.emplace(state_, log_z_);
}

bool TrajectoryRunner::advance(int max_steps) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = options_.n_steps;
  const double dl = 1.0 / static_cast<double>(n);
  for (int s = 0; s < max_steps && step_ < n; ++s) {
    const double dw = dl * state_.swap_log_ratio();
    work_ += dw;
    if (options_.record_series) series_.push_back(dw);
    const double lambda = static_cast<double>(step_ + 1) / static_cast<double>(n);
    for (int j = 0; j < options_.updates_per_step; ++j) {
      const int which = options_.mirror_replicas ? 0 : static_cast<int>(updates_ % 2);
      const UpdateOutcome out = sweep_ ? metropolis_update(state_, lambda, params_, rng_, which, log_z_, *sweep_)
                                       : metropolis_update(state_, lambda, params_, rng_, which, log_z_, options_.proposal);
      ++updates_;
      accepted_ += out.accepted ? 1 : 0;
      if (options_.mirror_replicas) {
        state_.replicas[1] = state_.replicas[0];
        state_.log_z_swapped = {state_.replicas[0].log_z, state_.replicas[0].log_z};
        if (sweep_) sweep_->reset(state_);
      }
    }
    ++step_;
    if (!std::isfinite(work_)) throw Error(ErrorCode::numerical_overflow, "accumulated work is not finite");
    if (options_.checkpoint_interval > 0 && step_ % options_.checkpoint_interval == 0 && step_ < n &&
        !options_.checkpoint_path.empty())
      write_checkpoint();
  }
  wall_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return finished();
}

WorkRecord TrajectoryRunner::record() const {
  WorkRecord r;
  r.id = id_;
  r.seed = rng_.seed();
  r.stream = rng_.stream();
  r.n_steps = options_.n_steps;
  r.work = work_;
  r.series = series_;
  r.acceptance_rate = updates_ > 0 ? static_cast<double>(accepted_) / static_cast<double>(updates_) : 1.0;
  r.wall_seconds = wall_seconds_;
  return r;
}

void TrajectoryRunner::write_checkpoint() const {
  nlohmann::json j;
  j["magic"] = kCheckpointMagic;
  j["schema_version"] = kCheckpointSchema;
  j["id"] = id_;
  j["seed"] = rng_.seed();
  j["stream"] = rng_.stream();
  j["n_steps"] = options_.n_steps;
  j["updates_per_step"] = options_.updates_per_step;
  j["proposal"] = to_string(options_.proposal);
  j["step"] = step_;
  j["lambda"] = static_cast<double>(step_) / static_cast<double>(options_.n_steps);
  j["W"] = work_;
  j["updates"] = updates_;
  j["accepted"] = accepted_;
  j["wall_seconds"] = wall_seconds_;
  j["rng_state"] = rng_.state();
  nlohmann::json reps = nlohmann::json::array();
  for (const Replica& r : state_.replicas) reps.push_back({{"eta", encode_signs(r.eta)}, {"sigma", encode_signs(r.sigma)}});
  j["replicas"] = reps;
  j["log_z"] = {state_.replicas[0].log_z, state_.replicas[1].log_z, state_.log_z_swapped[0], state_.log_z_swapped[1]};
  if (sweep_) {
    const LocalSweep::Cursor& c = sweep_->cursor();
    j["cursor"] = {c.row, c.direction, c.used};
  }
  if (options_.record_series) j["series"] = series_;

  const std::filesystem::path tmp = options_.checkpoint_path.string() + ".tmp";
  if (options_.checkpoint_path.has_parent_path()) std::filesystem::create_directories(options_.checkpoint_path.parent_path());
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCode::io, "cannot write checkpoint " + tmp.string());
    out << j.dump();
  }
  std::filesystem::rename(tmp, options_.checkpoint_path);
}

void TrajectoryRunner::restore(const nlohmann::json& j) {
  if (j.value("magic", std::string{}) != kCheckpointMagic)
    throw Error(ErrorCode::checkpoint_schema, "not a trajectory checkpoint: " + options_.checkpoint_path.string());
  const int version = j.value("schema_version", -1);
  if (version != kCheckpointSchema)
    throw Error(ErrorCode::checkpoint_schema, "checkpoint schema version " + std::to_string(version) +
                                                  " is not supported (expected " + std::to_string(kCheckpointSchema) + ")");
  if (j.at("id").get<std::int64_t>() != id_ || j.at("seed").get<std::uint64_t>() != rng_.seed() ||
      j.at("stream").get<std::uint64_t>() != rng_.stream() || j.at("n_steps").get<int>() != options_.n_steps ||
      j.at("updates_per_step").get<int>() != options_.updates_per_step ||
      j.at("proposal").get<std::string>() != to_string(options_.proposal))
    throw Error(ErrorCode::checkpoint_schema, "checkpoint belongs to a different trajectory configuration");

  step_ = j.at("step").get<int>();
  work_ = j.at("W").get<double>();
  updates_ = j.at("updates").get<long long>();
  accepted_ = j.at("accepted").get<long long>();
  wall_seconds_ = j.value("wall_seconds", 0.0);
  rng_.restore(j.at("rng_state").get<std::string>());
  if (j.contains("series")) series_ = j["series"].get<std::vector<double>>();

  const auto& reps = j.at("replicas");
  if (reps.size() != 2) throw Error(ErrorCode::checkpoint_schema, "checkpoint must hold two replicas");
  std::array<Replica, 2> r;
  for (int i = 0; i < 2; ++i) {
    r[i].eta = decode_signs(reps[i].at("eta").get<std::string>(), static_cast<std::size_t>(geometry_->num_bonds()));
    r[i].sigma = decode_signs(reps[i].at("sigma").get<std::string>(), static_cast<std::size_t>(geometry_->num_spins()));
    r[i].x = compose_bonds(*geometry_, r[i].eta, r[i].sigma);
  }
  BondMask region = std::move(state_.region);
  state_ = make_replica_state(std::move(r[0]), std::move(r[1]), std::move(region), log_z_);
  // Cached values are restored verbatim so a resumed run repeats the uninterrupted one bit for bit.
  const auto cached = j.at("log_z").get<std::vector<double>>();
  if (cached.size() != 4) throw Error(ErrorCode::checkpoint_schema, "checkpoint must hold four cached log Z values");
  state_.replicas[0].log_z = cached[0];
  state_.replicas[1].log_z = cached[1];
  state_.log_z_swapped = {cached[2], cached[3]};
  if (options_.proposal == ProposalKind::row_sweep) {
    sweep_.emplace(state_, log_z_);
    const auto c = j.at("cursor").get<std::vector<int>>();
    if (c.size() != 3) throw Error(ErrorCode::checkpoint_schema, "corrupt sweep cursor");
    try {
      sweep_->set_cursor({c[0], c[1], c[2]});
    } catch (const Error&) {
      throw Error(ErrorCode::checkpoint_schema, "sweep cursor does not fit the lattice");
    }
  }
}

WorkRecord run_trajectory(const LatticeGeometry& geometry, const BondMask& region, const NishimoriParams& params,
                          const TrajectoryOptions& options, RngStream rng, std::int64_t id) {
  TrajectoryRunner runner(geometry, region, params, options, id, std::move(rng));
  runner.advance(options.n_steps);
  return runner.record();
}

EntropyEstimate estimate_entropy(std::span<const double> works) {
  if (works.size() < 2) throw Error(ErrorCode::insufficient_samples, "entropy estimate needs at least two trajectories");
  for (double w : works)
    if (!std::isfinite(w)) throw Error(ErrorCode::numerical_overflow, "non-finite work value");
  EntropyEstimate e;
  e.n_trajectories = static_cast<int>(works.size());
  e.s2 = 0.0 - log_mean_exp(works);
  std::vector<double> loo = log_mean_exp_leave_one_out(works);
  for (double& v : loo) v = 0.0 - v;
  e.error = jackknife_error(loo);
  double mean = 0.0;
  for (double w : works) mean += w;
  e.mean_work = mean / static_cast<double>(works.size());
  return e;
}

EntropyEstimate estimate_entropy(std::span<const WorkRecord> records) {
  std::vector<double> works;
  works.reserve(records.size());
  for (const WorkRecord& r : records) works.push_back(r.work);
  return estimate_entropy(std::span<const double>(works));
}

bool jensen_bound_holds(const EntropyEstimate& estimate, double sigma_factor) {
  return estimate.s2 <= -estimate.mean_work + sigma_factor * estimate.error;
}

}  // namespace tmc
