#include "tmc/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "tmc/error.hpp"
#include "tmc/observables.hpp"
#include "tmc/oracle.hpp"
#include "tmc/stats.hpp"

#ifndef TMC_GIT_DESCRIBE
#define TMC_GIT_DESCRIBE "unknown"
#endif

namespace tmc {

std::string code_version() { return TMC_GIT_DESCRIBE; }

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

[[noreturn]] void bad_field(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::usage, "config field '" + field + "': " + what);
}

template <class T>
T read_field(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad_field(key, "wrong type (" + std::string(j.at(key).type_name()) + ")");
  }
}

std::pair<double, double> read_range(const json& j, const std::string& key, std::pair<double, double> fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = read_field<std::vector<double>>(j, key, {});
  if (v.size() != 2) bad_field(key, "expected [low, high]");
  return {v[0], v[1]};
}

const std::array<RegionSet, 4> kAllRegions{RegionSet::AC, RegionSet::BC, RegionSet::C, RegionSet::ABC};

std::vector<RegionSet> campaign_regions(const CampaignConfig& c) {
  if (c.mode == CampaignMode::tee || c.regions.empty()) return {kAllRegions.begin(), kAllRegions.end()};
  return c.regions;
}

json comparable(const CampaignConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  j.erase("parallelism");
  j.erase("checkpoint_interval");
  return j;
}

void write_atomically(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorCode::io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- campaign layout ------------------------------------------------------

// One estimate: an entropy ensemble for a region, or the anyon sample set.
struct Series {
  std::string name;  // file stem, e.g. L5_T0.25_AC
  std::string observable;
  int L = 0;
  double grid_value = 0.0;  // T or p as configured
  NishimoriParams params;
  std::optional<RegionSet> region;  // empty for the anyon series
  int n_tasks = 0;
  std::map<int, json> records;  // finished tasks by index
};

struct Task {
  int series = 0;
  int index = 0;
};

struct Layout {
  std::map<int, std::unique_ptr<LatticeGeometry>> geometries;
  std::vector<Series> series;
};

bool temperature_grid(const CampaignConfig& c) { return !c.T.empty(); }

Layout plan(const CampaignConfig& c) {
  Layout lay;
  const auto points = grid_points(c);
  const std::vector<double>& values = temperature_grid(c) ? c.T : c.p;
  const char axis = temperature_grid(c) ? 'T' : 'p';
  for (int L : c.L) {
    lay.geometries.emplace(L, std::make_unique<LatticeGeometry>(L));
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::string stem = "L" + std::to_string(L) + "_" + axis + number(values[i]);
      if (c.mode == CampaignMode::anyon) {
        Series s;
        s.name = stem + "_anyon";
        s.observable = "T_l";
        s.L = L;
        s.grid_value = values[i];
        s.params = points[i];
        s.n_tasks = (c.n_samples + c.chunk_size - 1) / c.chunk_size;
        lay.series.push_back(std::move(s));
        continue;
      }
      for (RegionSet r : campaign_regions(c)) {
        Series s;
        s.name = stem + "_" + to_string(r);
        s.observable = "S2_" + to_string(r);
        s.L = L;
        s.grid_value = values[i];
        s.params = points[i];
        s.region = r;
        s.n_tasks = c.n_trajectories;
        lay.series.push_back(std::move(s));
      }
    }
  }
  return lay;
}

fs::path records_path(const fs::path& out, const Series& s) { return out / "work" / (s.name + ".jsonl"); }
fs::path checkpoint_path(const fs::path& out, const Series& s, int index) {
  return out / "checkpoints" / s.name / ("traj_" + std::to_string(index) + ".json");
}

std::uint64_t series_stream(const CampaignConfig& c, const Series& s, int index) {
  const std::uint64_t p_bits = std::bit_cast<std::uint64_t>(s.params.p);
  if (s.region)
    return stream_id({1, static_cast<std::uint64_t>(s.L), p_bits, static_cast<std::uint64_t>(*s.region),
                      static_cast<std::uint64_t>(index)});
  return stream_id({2, static_cast<std::uint64_t>(s.L), p_bits, static_cast<std::uint64_t>(c.path_length),
                    static_cast<std::uint64_t>(index)});
}

// Reads finished tasks; a torn last line from an interrupted write is dropped.
void load_records(const fs::path& path, Series& s) {
  if (!fs::exists(path)) return;
  const std::string text = slurp(path);
  std::size_t pos = 0;
  std::size_t good = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // no newline: torn write
    const std::string line = text.substr(pos, nl - pos);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw Error(ErrorCode::io, "corrupt record in " + path.string());
    }
    const int index = j.at("task").get<int>();
    if (index < 0 || index >= s.n_tasks) throw Error(ErrorCode::io, "record index out of range in " + path.string());
    s.records[index] = std::move(j);
    pos = nl + 1;
    good = pos;
  }
  if (good < text.size()) fs::resize_file(path, good);
}

// ---- worker pool ----------------------------------------------------------

struct Finished {
  int series = 0;
  int index = 0;
  json record;
};

class Pool {
 public:
  Pool(const CampaignConfig& c, Layout& lay, fs::path out) : c_(c), lay_(lay), out_(std::move(out)) {}

  // Returns the number of tasks finished; false in `complete` when the budget ran out.
  int run(std::vector<Task> tasks, bool& complete, std::ostream& log) {
    tasks_ = std::move(tasks);
    budget_ = c_.step_budget;
    int threads = c_.parallelism > 0 ? c_.parallelism : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(tasks_.size())));
    active_ = threads;
    std::vector<std::thread> workers;
    for (int t = 0; t < threads; ++t) workers.emplace_back([this] { work(); });

    // Single writer: only this thread touches the record files.
    int written = 0;
    try {
      written = write_results(log);
    } catch (...) {
      stop_ = true;
      for (auto& w : workers) w.join();
      throw;
    }
    for (auto& w : workers) w.join();
    if (failure_) std::rethrow_exception(failure_);
    complete = !out_of_budget_;
    return written;
  }

 private:
  int write_results(std::ostream& log) {
    int written = 0;
    std::map<int, std::ofstream> files;
    for (;;) {
      std::unique_lock lock(mutex_);
      ready_.wait(lock, [&] { return !done_.empty() || active_ == 0; });
      if (done_.empty() && active_ == 0) break;
      Finished f = std::move(done_.front());
      done_.pop_front();
      lock.unlock();
      const Series& s = lay_.series[f.series];
      auto it = files.find(f.series);
      if (it == files.end()) {
        const fs::path path = records_path(out_, s);
        fs::create_directories(path.parent_path());
        it = files.emplace(f.series, std::ofstream(path, std::ios::app | std::ios::binary)).first;
        if (!it->second) throw Error(ErrorCode::io, "cannot append to " + path.string());
      }
      it->second << f.record.dump() << '\n';
      it->second.flush();
      if (s.region) fs::remove(checkpoint_path(out_, s, f.index));
      lay_.series[f.series].records[f.index] = std::move(f.record);
      ++written;
      if (written % 10 == 0 || written == static_cast<int>(tasks_.size()))
        log << "  " << written << "/" << tasks_.size() << " tasks written\n" << std::flush;
    }
    return written;
  }

  bool take_budget(long long amount) {
    if (budget_ < 0) return true;
    std::lock_guard lock(budget_mutex_);
    if (budget_ < amount) {
      out_of_budget_ = true;
      budget_ = 0;
      return false;
    }
    budget_ -= amount;
    return true;
  }

  void work() {
    for (;;) {
      const std::size_t k = next_.fetch_add(1);
      if (k >= tasks_.size() || stop_) break;
      try {
        std::optional<json> rec = execute(tasks_[k]);
        if (!rec) continue;
        std::lock_guard lock(mutex_);
        done_.push_back({tasks_[k].series, tasks_[k].index, std::move(*rec)});
        ready_.notify_one();
      } catch (...) {
        std::lock_guard lock(mutex_);
        if (!failure_) failure_ = std::current_exception();
        stop_ = true;
        break;
      }
    }
    std::lock_guard lock(mutex_);
    --active_;
    ready_.notify_one();
  }

  std::optional<json> execute(const Task& t) {
    const Series& s = lay_.series[t.series];
    const LatticeGeometry& g = *lay_.geometries.at(s.L);
    RngStream rng(c_.seed, series_stream(c_, s, t.index));
    if (!s.region) {
      const int first = t.index * c_.chunk_size;
      const int n = std::min(c_.chunk_size, c_.n_samples - first);
      if (!take_budget(n)) return std::nullopt;
      const AnyonPath path = c_.path_length > 0 ? anyon_path(g, c_.path_length) : default_anyon_path(g);
      const auto samples = anyon_samples(g, path, s.params, n, c_.chi, rng, c_.engine);
      return json{{"task", t.index}, {"seed", c_.seed}, {"stream", rng.stream()}, {"samples", samples}};
    }
    TrajectoryOptions o;
    o.n_steps = c_.n_steps;
    o.updates_per_step = c_.updates_per_step;
    o.chi = c_.chi;
    o.engine = c_.engine;
    o.proposal = c_.proposal;
    o.checkpoint_interval = c_.checkpoint_interval;
    o.checkpoint_path = checkpoint_path(out_, s, t.index);
    const BondMask mask = levin_wen_regions(g).mask(*s.region);
    TrajectoryRunner runner(g, mask, s.params, o, t.index, std::move(rng));
    const int slice = c_.checkpoint_interval > 0 ? c_.checkpoint_interval : c_.n_steps;
    while (!runner.finished()) {
      if (stop_) return std::nullopt;
      const int steps = std::min(slice - runner.step() % slice, c_.n_steps - runner.step());
      if (!take_budget(steps)) {
        if (runner.step() > 0) runner.write_checkpoint();
        return std::nullopt;
      }
      runner.advance(steps);
    }
    json j = to_json(runner.record());
    j["task"] = t.index;
    return j;
  }

  const CampaignConfig& c_;
  Layout& lay_;
  fs::path out_;
  std::vector<Task> tasks_;
  std::atomic<std::size_t> next_{0};
  std::atomic<bool> stop_{false};
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<Finished> done_;
  int active_ = 0;
  std::exception_ptr failure_;
  std::mutex budget_mutex_;
  long long budget_ = -1;
  bool out_of_budget_ = false;
};

// ---- aggregation ----------------------------------------------------------

ResultRow base_row(const CampaignConfig& c, const Series& s) {
  ResultRow r;
  r.observable = s.observable;
  r.L = s.L;
  r.T = s.params.temperature;
  r.p = s.params.p;
  r.chi = c.chi;
  r.seed = c.seed;
  r.code_version = code_version();
  return r;
}

EntropyEstimate entropy_of(const CampaignConfig& c, const Series& s) {
  std::vector<double> works;
  for (const auto& [index, j] : s.records) works.push_back(j.at("W").get<double>());
  EntropyEstimate e = estimate_entropy(std::span<const double>(works));
  e.region = to_string(*s.region);
  e.meta = RunMeta{s.L, s.params.p, s.params.temperature, c.n_steps, c.chi};
  return e;
}

void aggregate(const CampaignConfig& c, const Layout& lay, CampaignSummary& out) {
  // (L, grid value) -> entropy per region, for the TEE combination
  std::map<std::pair<int, double>, std::map<RegionSet, std::pair<EntropyEstimate, const Series*>>> by_point;
  for (const Series& s : lay.series) {
    if (static_cast<int>(s.records.size()) != s.n_tasks) continue;
    ResultRow r = base_row(c, s);
    if (s.region) {
      const EntropyEstimate e = entropy_of(c, s);
      r.value = e.s2;
      r.error = e.error;
      r.n_steps = c.n_steps;
      r.n_trajectories = e.n_trajectories;
      out.jensen.push_back({s.observable, s.L, s.params.temperature, jensen_bound_holds(e)});
      by_point[{s.L, s.grid_value}][*s.region] = {e, &s};
    } else {
      std::vector<double> samples;
      for (const auto& [index, j] : s.records)
        for (double v : j.at("samples")) samples.push_back(v);
      const MeanError me = mean_and_sem(samples);
      r.value = me.mean;
      r.error = me.error;
      r.n_steps = 0;
      r.n_trajectories = static_cast<int>(samples.size());
    }
    out.rows.push_back(r);
  }
  if (c.mode != CampaignMode::tee) return;
  for (const auto& [key, parts] : by_point) {
    if (parts.size() != 4) continue;
    const TeeResult t = compute_tee(parts.at(RegionSet::AC).first, parts.at(RegionSet::BC).first,
                                    parts.at(RegionSet::C).first, parts.at(RegionSet::ABC).first);
    const Series& s = *parts.begin()->second.second;
    for (auto [name, value, error] : {std::tuple{"qcmi", t.qcmi, t.qcmi_error}, std::tuple{"gamma", t.gamma, t.gamma_error}}) {
      ResultRow r = base_row(c, s);
      r.observable = name;
      r.value = value;
      r.error = error;
      r.n_steps = c.n_steps;
      r.n_trajectories = c.n_trajectories;
      out.rows.push_back(r);
    }
  }
}

json manifest_json(const CampaignConfig& c, const Layout& lay, const CampaignSummary& summary) {
  json series = json::array();
  for (const Series& s : lay.series) {
    double wall = 0.0;
    for (const auto& [index, j] : s.records) wall += j.value("wall_seconds", 0.0);
    series.push_back({{"name", s.name},
                      {"observable", s.observable},
                      {"L", s.L},
                      {"T", s.params.temperature},
                      {"p", s.params.p},
                      {"tasks", s.n_tasks},
                      {"finished", s.records.size()},
                      {"wall_seconds", wall}});
  }
  return json{{"schema_version", kManifestSchema},
              {"code_version", code_version()},
              {"config", to_json(c)},
              {"seed", c.seed},
              {"stream_scheme", "stream_id(kind, L, bits(p), region or path length, task index)"},
              {"status", summary.complete ? "complete" : "incomplete"},
              {"series", series}};
}

void check_manifest(const fs::path& path, const CampaignConfig& c) {
  json m;
  try {
    m = json::parse(slurp(path));
  } catch (const json::exception&) {
    throw Error(ErrorCode::checkpoint_schema, "unreadable manifest " + path.string());
  }
  const int version = m.value("schema_version", -1);
  if (version != kManifestSchema)
    throw Error(ErrorCode::checkpoint_schema, "manifest schema version " + std::to_string(version) +
                                                  " is not supported (expected " + std::to_string(kManifestSchema) + ")");
  if (comparable(config_from_json(m.at("config"))) != comparable(c))
    throw Error(ErrorCode::usage, "output directory " + path.parent_path().string() +
                                      " holds a campaign with a different configuration");
}

std::string run_status_line(const CampaignSummary& s) {
  std::ostringstream os;
  os << s.tasks_run << " tasks run, " << s.tasks_reused << " reused";
  if (!s.complete) os << "; incomplete, resume to continue";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

CampaignMode mode_from_string(const std::string& name) {
  if (name == "s2") return CampaignMode::s2;
  if (name == "tee") return CampaignMode::tee;
  if (name == "anyon") return CampaignMode::anyon;
  if (name == "collapse") return CampaignMode::collapse;
  if (name == "oracle-check" || name == "oracle_check") return CampaignMode::oracle_check;
  throw Error(ErrorCode::usage, "unknown mode '" + name + "' (expected s2, tee, anyon, collapse or oracle-check)");
}

std::string to_string(CampaignMode mode) {
  switch (mode) {
    case CampaignMode::s2: return "s2";
    case CampaignMode::tee: return "tee";
    case CampaignMode::anyon: return "anyon";
    case CampaignMode::collapse: return "collapse";
    case CampaignMode::oracle_check: return "oracle-check";
  }
  return "?";
}

CampaignConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::usage, "config must be a JSON object");
  static const std::set<std::string> known{
      "mode",     "L",          "p",          "T",       "chi",         "engine",      "n_steps",
      "updates_per_step",       "proposal",   "n_trajectories",           "regions",     "checkpoint_interval",
      "n_samples", "chunk_size", "path_length", "input",  "observable",  "eta_range",   "nu_range",
      "Tc",       "degree",     "bootstrap_repeats",     "seed",        "output_dir",  "parallelism"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) bad_field(key, "unknown key");

  CampaignConfig c;
  auto wrap = [](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::usage && std::string(e.what()).find("config field") != std::string::npos) throw;
      bad_field(key, e.what());
    }
  };
  wrap("mode", [&] { c.mode = mode_from_string(read_field<std::string>(j, "mode", to_string(c.mode))); });
  c.L = read_field(j, "L", c.L);
  c.p = read_field(j, "p", c.p);
  c.T = read_field(j, "T", j.contains("p") ? std::vector<double>{} : c.T);
  c.chi = read_field(j, "chi", c.chi);
  wrap("engine", [&] { c.engine = engine_from_string(read_field<std::string>(j, "engine", to_string(c.engine))); });
  c.n_steps = read_field(j, "n_steps", c.n_steps);
  c.updates_per_step = read_field(j, "updates_per_step", c.updates_per_step);
  wrap("proposal",
       [&] { c.proposal = proposal_from_string(read_field<std::string>(j, "proposal", to_string(c.proposal))); });
  c.n_trajectories = read_field(j, "n_trajectories", c.n_trajectories);
  const auto regions = read_field<std::vector<std::string>>(j, "regions", {});
  for (std::size_t i = 0; i < regions.size(); ++i)
    wrap("regions[" + std::to_string(i) + "]", [&] { c.regions.push_back(region_set_from_string(regions[i])); });
  c.checkpoint_interval = read_field(j, "checkpoint_interval", c.checkpoint_interval);
  c.n_samples = read_field(j, "n_samples", c.n_samples);
  c.chunk_size = read_field(j, "chunk_size", c.chunk_size);
  c.path_length = read_field(j, "path_length", c.path_length);
  c.input = read_field<std::string>(j, "input", c.input.string());
  c.observable = read_field(j, "observable", c.observable);
  c.eta_range = read_range(j, "eta_range", c.eta_range);
  c.nu_range = read_range(j, "nu_range", c.nu_range);
  if (j.contains("Tc") && !j.at("Tc").is_null()) c.fixed_Tc = read_field<double>(j, "Tc", 0.0);
  c.degree = read_field(j, "degree", c.degree);
  c.bootstrap_repeats = read_field(j, "bootstrap_repeats", c.bootstrap_repeats);
  c.seed = read_field(j, "seed", c.seed);
  c.output_dir = read_field<std::string>(j, "output_dir", c.output_dir.string());
  c.parallelism = read_field(j, "parallelism", c.parallelism);
  validate(c);
  return c;
}

json to_json(const CampaignConfig& c) {
  json regions = json::array();
  for (RegionSet r : c.regions) regions.push_back(to_string(r));
  json j{{"mode", to_string(c.mode)},
         {"L", c.L},
         {"chi", c.chi},
         {"engine", to_string(c.engine)},
         {"n_steps", c.n_steps},
         {"updates_per_step", c.updates_per_step},
         {"proposal", to_string(c.proposal)},
         {"n_trajectories", c.n_trajectories},
         {"regions", regions},
         {"checkpoint_interval", c.checkpoint_interval},
         {"n_samples", c.n_samples},
         {"chunk_size", c.chunk_size},
         {"path_length", c.path_length},
         {"input", c.input.string()},
         {"observable", c.observable},
         {"eta_range", {c.eta_range.first, c.eta_range.second}},
         {"nu_range", {c.nu_range.first, c.nu_range.second}},
         {"Tc", c.fixed_Tc ? json(*c.fixed_Tc) : json(nullptr)},
         {"degree", c.degree},
         {"bootstrap_repeats", c.bootstrap_repeats},
         {"seed", c.seed},
         {"output_dir", c.output_dir.string()},
         {"parallelism", c.parallelism}};
  if (!c.p.empty()) j["p"] = c.p;
  if (!c.T.empty()) j["T"] = c.T;
  return j;
}

void validate(const CampaignConfig& c) {
  const bool grid_mode = c.mode == CampaignMode::s2 || c.mode == CampaignMode::tee || c.mode == CampaignMode::anyon;
  if (!c.p.empty() && !c.T.empty()) bad_field("p", "p and T grids are mutually exclusive");
  if (grid_mode && c.p.empty() && c.T.empty()) bad_field("T", "one of the p or T grids is required");
  for (std::size_t i = 0; i < c.p.size(); ++i)
    if (!(c.p[i] > 0.0 && c.p[i] <= 0.5)) bad_field("p[" + std::to_string(i) + "]", "must lie in (0, 0.5]");
  for (std::size_t i = 0; i < c.T.size(); ++i)
    if (!(c.T[i] > 0.0) || !std::isfinite(c.T[i])) bad_field("T[" + std::to_string(i) + "]", "must be positive and finite");
  if ((grid_mode || c.mode == CampaignMode::oracle_check) && c.L.empty()) bad_field("L", "at least one size is required");
  for (std::size_t i = 0; i < c.L.size(); ++i) {
    const std::string f = "L[" + std::to_string(i) + "]";
    if (c.L[i] < 1) bad_field(f, "must be >= 1");
    if ((c.mode == CampaignMode::s2 || c.mode == CampaignMode::tee) && c.L[i] % 5 != 0)
      bad_field(f, "entropy regions need a multiple of 5");
    if (c.mode == CampaignMode::oracle_check && c.L[i] > 3) bad_field(f, "oracle checks enumerate, L must be <= 3");
    if (c.mode == CampaignMode::anyon && c.path_length > c.L[i]) bad_field("path_length", "longer than L");
  }
  if (c.chi < 1) bad_field("chi", "must be >= 1");
  if (c.n_steps < 1) bad_field("n_steps", "must be >= 1");
  if (c.updates_per_step < 1) bad_field("updates_per_step", "must be >= 1");
  if (c.n_trajectories < 2) bad_field("n_trajectories", "must be >= 2");
  if (c.checkpoint_interval < 0) bad_field("checkpoint_interval", "must be >= 0");
  if (c.n_samples < 2) bad_field("n_samples", "must be >= 2");
  if (c.chunk_size < 1) bad_field("chunk_size", "must be >= 1");
  if (c.path_length < 0) bad_field("path_length", "must be >= 0");
  if (c.mode == CampaignMode::collapse && c.input.empty()) bad_field("input", "collapse needs a results CSV");
  if (!(c.eta_range.first <= c.eta_range.second)) bad_field("eta_range", "low exceeds high");
  if (!(c.nu_range.first > 0.0 && c.nu_range.first < c.nu_range.second)) bad_field("nu_range", "need 0 < low < high");
  if (c.degree < 1) bad_field("degree", "must be >= 1");
  if (c.bootstrap_repeats < 2) bad_field("bootstrap_repeats", "must be >= 2");
  if (c.parallelism < 0) bad_field("parallelism", "must be >= 0");
  if (c.output_dir.empty()) bad_field("output_dir", "must not be empty");
}

std::vector<NishimoriParams> grid_points(const CampaignConfig& c) {
  std::vector<NishimoriParams> out;
  for (double T : c.T) out.push_back(params_from_temperature(T));
  for (double p : c.p) out.push_back(params_from_p(p));
  return out;
}

fs::path resolve_output_dir(const fs::path& dir) {
  const char* root = std::getenv(kOutputRootVariable);
  if (root && *root && dir.is_relative()) return fs::path(root) / dir;
  return dir;
}

// ---------------------------------------------------------------------------
// Result table

std::string format_results(std::vector<ResultRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.observable, a.L, a.T, a.p) < std::tie(b.observable, b.L, b.T, b.p);
  });
  std::ostringstream os;
  os << kResultHeader << '\n';
  for (const ResultRow& r : rows)
    os << r.observable << ',' << r.L << ',' << number(r.T) << ',' << number(r.p) << ',' << number(r.value) << ','
       << number(r.error) << ',' << r.n_steps << ',' << r.n_trajectories << ',' << r.chi << ',' << r.seed << ','
       << r.code_version << '\n';
  return os.str();
}

std::vector<ResultRow> parse_results(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kResultHeader)
    throw Error(ErrorCode::io, "results table must start with the header '" + std::string(kResultHeader) + "'");
  std::vector<ResultRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw Error(ErrorCode::io, "line " + std::to_string(lineno) + ": expected 11 columns");
    try {
      ResultRow r;
      r.observable = f[0];
      r.L = std::stoi(f[1]);
      r.T = std::stod(f[2]);
      r.p = std::stod(f[3]);
      r.value = std::stod(f[4]);
      r.error = std::stod(f[5]);
      r.n_steps = std::stoi(f[6]);
      r.n_trajectories = std::stoi(f[7]);
      r.chi = std::stoi(f[8]);
      r.seed = std::stoull(f[9]);
      r.code_version = f[10];
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw Error(ErrorCode::io, "line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

std::vector<ResultRow> read_results(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::io, "cannot read " + csv.string());
  return parse_results(in);
}

ScalingSeries series_from_results(const std::vector<ResultRow>& rows, const std::string& observable) {
  ScalingSeries s;
  s.observable = observable;
  for (const ResultRow& r : rows)
    if (r.observable == observable) s.points.push_back({r.L, r.T, r.value, r.error});
  std::sort(s.points.begin(), s.points.end(),
            [](const ScalingPoint& a, const ScalingPoint& b) { return std::tie(a.L, a.T) < std::tie(b.L, b.T); });
  return s;
}

// ---------------------------------------------------------------------------
// Execution

CampaignSummary run_campaign(const CampaignConfig& c, std::ostream& log) {
  validate(c);
  CampaignSummary summary;
  if (c.mode == CampaignMode::oracle_check) {
    summary.failures = oracle_check(c.L, c.seed, log);
    summary.exit_status = summary.failures.empty() ? exit_ok : exit_check_failed;
    return summary;
  }
  if (c.mode == CampaignMode::collapse) {
    summary.analysis = analyze_results(c, log);
    return summary;
  }

  const fs::path out = resolve_output_dir(c.output_dir);
  fs::create_directories(out);
  const fs::path manifest = out / "manifest.json";
  if (fs::exists(manifest)) check_manifest(manifest, c);

  Layout lay = plan(c);
  std::vector<Task> pending;
  for (int i = 0; i < static_cast<int>(lay.series.size()); ++i) {
    Series& s = lay.series[i];
    load_records(records_path(out, s), s);
    summary.tasks_reused += static_cast<int>(s.records.size());
    for (int k = 0; k < s.n_tasks; ++k)
      if (!s.records.count(k)) pending.push_back({i, k});
  }
  log << to_string(c.mode) << ": " << lay.series.size() << " series, " << pending.size() << " tasks pending, "
      << summary.tasks_reused << " already done\n";

  const fs::path csv = out / "results.csv";
  if (pending.empty() && fs::exists(manifest) && fs::exists(csv)) {
    aggregate(c, lay, summary);
    if (slurp(csv) == format_results(summary.rows)) {
      log << "nothing to do\n";
      for (const JensenCheck& jc : summary.jensen)
        if (!jc.holds) summary.exit_status = exit_check_failed;
      return summary;
    }
    summary.rows.clear();
    summary.jensen.clear();
  }

  write_atomically(manifest, manifest_json(c, lay, summary).dump(2) + "\n");
  if (!pending.empty()) {
    Pool pool(c, lay, out);
    summary.tasks_run = pool.run(std::move(pending), summary.complete, log);
  }

  aggregate(c, lay, summary);
  write_atomically(csv, format_results(summary.rows));
  write_atomically(manifest, manifest_json(c, lay, summary).dump(2) + "\n");
  log << run_status_line(summary) << "\n";
  for (const JensenCheck& jc : summary.jensen)
    if (!jc.holds) {
      log << "Jensen bound violated for " << jc.observable << " at L=" << jc.L << " T=" << jc.T << "\n";
      summary.exit_status = exit_check_failed;
    }
  if (!summary.complete && summary.exit_status == exit_ok) summary.exit_status = exit_incomplete;
  return summary;
}

CampaignSummary resume_campaign(const fs::path& dir, std::ostream& log, int parallelism, long long step_budget) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) throw Error(ErrorCode::io, "no manifest in " + dir.string());
  json m;
  try {
    m = json::parse(slurp(manifest));
  } catch (const json::exception&) {
    throw Error(ErrorCode::checkpoint_schema, "unreadable manifest " + manifest.string());
  }
  if (m.value("schema_version", -1) != kManifestSchema)
    throw Error(ErrorCode::checkpoint_schema, "manifest schema version " + std::to_string(m.value("schema_version", -1)) +
                                                  " is not supported (expected " + std::to_string(kManifestSchema) + ")");
  CampaignConfig c = config_from_json(m.at("config"));
  c.output_dir = dir;
  c.parallelism = parallelism;
  c.step_budget = step_budget;
  return run_campaign(c, log);
}

// ---------------------------------------------------------------------------
// Analysis and reporting

json analyze_results(const CampaignConfig& c, std::ostream& log) {
  const std::vector<ResultRow> rows = read_results(c.input);
  const ScalingSeries series = series_from_results(rows, c.observable);
  if (series.points.empty()) throw Error(ErrorCode::insufficient_data, "no rows for observable " + c.observable);
  RngStream rng(c.seed, stream_id({3}));
  json report{{"observable", c.observable}, {"input", c.input.string()}, {"code_version", code_version()}};
  CollapseOptions opts;
  opts.degree = c.degree;
  opts.nu_range = c.nu_range;
  CollapseFit fit;

  if (c.observable == "gamma") {
    fit = tee_collapse(series, c.nu_range, rng, c.fixed_Tc, opts);
    report["collapse"] = to_json(fit);
    log << "gamma collapse: nu~ = " << fit.nu << ", Tc = " << fit.Tc << ", chi2 = " << fit.chi2 << "\n";
  } else {
    const double eta = 0.5 * (c.eta_range.first + c.eta_range.second);
    const auto pairs = doubling_pairs(series);
    if (!pairs.empty()) {
      try {
        const auto crossings = find_crossings(series, eta, pairs);
        report["crossings"] = to_json(crossings);
        report["crossing_drift_slope"] = crossing_drift_slope(crossings);
        for (const Crossing& x : crossings)
          log << "crossing L=" << x.L_small << "/" << x.L_large << ": T* = " << x.T << ", y* = " << x.y << "\n";
      } catch (const Error& e) {
        report["crossings_error"] = e.what();
        log << e.what() << "\n";
      }
    }
    if (c.fixed_Tc) opts.fixed_Tc = c.fixed_Tc;
    BootstrapOptions b;
    b.n_repeats = c.bootstrap_repeats;
    b.collapse = opts;
    fit = bootstrap_collapse(series, c.eta_range, rng, b);
    report["collapse"] = to_json(fit);
    log << c.observable << " collapse: Tc = " << fit.Tc << " +- " << fit.Tc_dist.std << ", nu = " << fit.nu << " +- "
        << fit.nu_dist.std << ", eta = " << fit.eta << " +- " << fit.eta_dist.std << " (" << fit.n_failed << " of "
        << fit.n_repeats << " repeats failed)\n";
  }

  // per-point residuals against the fitted polynomial are in the rescaled table
  const fs::path out = resolve_output_dir(c.output_dir);
  std::ostringstream table;
  table << "L,T,mu,y,error\n";
  for (const auto& r : rescaled_points(series, fit))
    table << static_cast<int>(r[0]) << ',' << number(r[1]) << ',' << number(r[2]) << ',' << number(r[3]) << ','
          << number(r[4]) << '\n';
  write_atomically(out / "collapse.csv", table.str());
  write_atomically(out / "analysis.json", report.dump(2) + "\n");
  return report;
}

void print_report(const std::vector<ResultRow>& rows, std::ostream& out) {
  std::map<std::string, std::map<std::pair<int, double>, const ResultRow*>> table;
  for (const ResultRow& r : rows) table[r.observable][{r.L, r.T}] = &r;
  auto cell = [&](const std::string& obs, int L, double T) {
    std::ostringstream os;
    const auto it = table.find(obs);
    if (it == table.end() || !it->second.count({L, T})) return std::string("-");
    const ResultRow& r = *it->second.at({L, T});
    os << std::fixed << std::setprecision(4) << r.value << " +- " << r.error;
    return os.str();
  };
  // Display only; the CSV keeps every digit.
  auto temperature = [](double T) {
    std::ostringstream os;
    os << std::setprecision(6) << T;
    return os.str();
  };
  std::set<std::pair<int, double>> points;
  for (const ResultRow& r : rows) points.insert({r.L, r.T});
  const bool entropy = table.count("S2_AC") || table.count("S2_BC") || table.count("S2_C") || table.count("S2_ABC");
  if (entropy) {
    out << "L   T        S2_AC                S2_BC                S2_C                 S2_ABC               gamma\n";
    for (auto [L, T] : points)
      out << std::left << std::setw(4) << L << std::setw(9) << temperature(T) << std::setw(21) << cell("S2_AC", L, T)
          << std::setw(21) << cell("S2_BC", L, T) << std::setw(21) << cell("S2_C", L, T) << std::setw(21)
          << cell("S2_ABC", L, T) << cell("gamma", L, T) << "\n";
  }
  if (table.count("T_l")) {
    out << "L   T        <T_l>\n";
    for (auto [L, T] : points)
      if (table["T_l"].count({L, T}))
        out << std::left << std::setw(4) << L << std::setw(9) << temperature(T) << cell("T_l", L, T) << "\n";
  }
  if (table.count("gamma")) out << "gamma in units of ln2 is gamma / " << number(std::numbers::ln2) << "\n";
}

std::vector<std::string> oracle_check(const std::vector<int>& sizes, std::uint64_t seed, std::ostream& log) {
  std::vector<std::string> failures;
  auto report = [&](bool ok, const std::string& line) {
    log << (ok ? "PASS " : "FAIL ") << line << "\n";
    if (!ok) failures.push_back(line);
  };
  for (int L : sizes) {
    if (L > 3) throw Error(ErrorCode::too_large, "oracle checks need L <= 3");
    const LatticeGeometry g(L);
    RngStream rng(seed, stream_id({4, static_cast<std::uint64_t>(L)}));
    for (double beta : {std::atanh(0.7), 1.05}) {
      double worst = 0.0;
      for (int t = 0; t < 20; ++t) {
        BondConfig x(g.num_bonds());
        for (int b = 0; b < x.size(); ++b) x.set(b, rng.sign());
        const double e = exact_logz(g, x, beta);
        const double m = contract_logz(build_network(g, x, beta), 8);
        worst = std::max(worst, std::abs(m - e) / std::abs(e));
      }
      std::ostringstream os;
      os << "L=" << L << " beta=" << number(beta) << " contraction vs enumeration, max rel err " << worst;
      report(worst <= 1e-10, os.str());
    }
    {
      const double beta = 0.9;
      double worst = 0.0;
      for (int t = 0; t < 20; ++t) {
        BondConfig x(g.num_bonds());
        for (int b = 0; b < x.size(); ++b) x.set(b, rng.sign());
        std::vector<std::int8_t> s(static_cast<std::size_t>(g.num_spins()));
        for (auto& v : s) v = rng.sign();
        const double a = contract_logz(build_network(g, x, beta), 8);
        const double b = contract_logz(build_network(g, gauge_transform(g, x, s), beta), 8);
        worst = std::max(worst, std::abs(a - b) / std::abs(a));
      }
      std::ostringstream os;
      os << "L=" << L << " gauge invariance, max rel err " << worst;
      report(worst <= 1e-10, os.str());
    }
    if (g.num_bonds() > kMaxEnumeratedBonds) continue;
    const double p = 0.15;
    const NishimoriParams params = params_from_p(p);
    {
      const AnyonPath path = default_anyon_path(g);
      const double exact = exact_t_l(g, path, p);
      const AnyonResult mc = measure_anyon(g, path, params, 10000, 8, rng);
      std::ostringstream os;
      os << "L=" << L << " p=" << p << " <T_l> " << mc.value << " +- " << mc.error << " vs exact " << exact;
      report(std::abs(mc.value - exact) <= 3.0 * mc.error + 1e-12, os.str());
    }
    {
      const BondMask region = half_region(g);
      const double exact = exact_renyi2(g, region, p);
      TrajectoryOptions o;
      o.n_steps = 10000;
      std::vector<WorkRecord> recs;
      for (int m = 0; m < 200; ++m)
        recs.push_back(run_trajectory(g, region, params, o, RngStream(seed, stream_id({5, static_cast<std::uint64_t>(L),
                                                                                          static_cast<std::uint64_t>(m)})),
                                      m));
      const EntropyEstimate e = estimate_entropy(std::span<const WorkRecord>(recs));
      std::ostringstream os;
      os << "L=" << L << " p=" << p << " S2 " << e.s2 << " +- " << e.error << " vs exact " << exact;
      report(std::abs(e.s2 - exact) <= std::max(3.0 * e.error, 0.02), os.str());
    }
  }
  return failures;
}

}  // namespace tmc
