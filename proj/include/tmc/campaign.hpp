#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tmc/analysis.hpp"
#include "tmc/ising_tn.hpp"
#include "tmc/jarzynski.hpp"
#include "tmc/lattice.hpp"
#include "tmc/sampler.hpp"

namespace tmc {

inline constexpr int kManifestSchema = 1;
inline constexpr const char* kOutputRootVariable = "TMC_OUTPUT_ROOT";

std::string code_version();

enum class CampaignMode { s2, tee, anyon, collapse, oracle_check };

CampaignMode mode_from_string(const std::string& name);
std::string to_string(CampaignMode mode);

struct CampaignConfig {
  CampaignMode mode = CampaignMode::tee;
  std::vector<int> L;
  // Exactly one grid is used; the other follows from tanh(1/T) = 1 - 2p.
  // A config that names only p drops the default temperatures.
  std::vector<double> p;
  std::vector<double> T{0.25, 0.5, 0.75, 1.0, 1.25};
  int chi = 8;
  ContractionEngine engine = ContractionEngine::automatic;

  // entropy campaigns
  int n_steps = kDefaultSchedule;
  int updates_per_step = 4;
  ProposalKind proposal = ProposalKind::row_sweep;
  int n_trajectories = 100;
  std::vector<RegionSet> regions;  // s2 only; tee always runs all four
  int checkpoint_interval = 5000;

  // anyon campaigns
  int n_samples = 10000;
  int chunk_size = 1000;
  int path_length = 0;  // 0 selects the default path

  // collapse
  std::filesystem::path input;  // results CSV to analyse
  std::string observable = "T_l";
  std::pair<double, double> eta_range{0.14, 0.18};
  std::pair<double, double> nu_range{0.3, 6.0};
  std::optional<double> fixed_Tc;
  int degree = 4;
  int bootstrap_repeats = 10000;

  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "tmc_out";
  int parallelism = 0;  // 0: hardware concurrency
  // Work allowed in this invocation, in trajectory steps plus anyon samples;
  // -1 is unlimited. Unfinished trajectories leave a checkpoint behind.
  long long step_budget = -1;
};

/**
 * Reads a config document; unknown keys and out-of-range values raise a
 * usage error naming the offending field, e.g. "T[2]".
 */
CampaignConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CampaignConfig& config);
void validate(const CampaignConfig& config);

// Grid points in config order.
std::vector<NishimoriParams> grid_points(const CampaignConfig& config);

// Output directory with the environment override applied to relative paths.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

// ---- result table ---------------------------------------------------------

struct ResultRow {
  std::string observable;  // S2_AC, ..., gamma, qcmi, T_l
  int L = 0;
  double T = 0.0;
  double p = 0.0;
  double value = 0.0;
  double error = 0.0;
  int n_steps = 0;         // 0 for i.i.d. estimates
  int n_trajectories = 0;  // trajectories, or samples for T_l
  int chi = 0;
  std::uint64_t seed = 0;
  std::string code_version;
};

inline constexpr const char* kResultHeader = "observable,L,T,p,value,error,n_steps,n_trajectories,chi,seed,code_version";

// Rows sorted by (observable, L, T); numbers in shortest round-trip form.
std::string format_results(std::vector<ResultRow> rows);
std::vector<ResultRow> parse_results(std::istream& in);
std::vector<ResultRow> read_results(const std::filesystem::path& csv);

ScalingSeries series_from_results(const std::vector<ResultRow>& rows, const std::string& observable);

// ---- execution ------------------------------------------------------------

struct JensenCheck {
  std::string observable;
  int L = 0;
  double T = 0.0;
  bool holds = true;
};

struct CampaignSummary {
  int exit_status = 0;
  int tasks_run = 0;      // trajectories or sample chunks executed now
  int tasks_reused = 0;   // found complete in the output directory
  bool complete = true;
  std::vector<ResultRow> rows;
  std::vector<JensenCheck> jensen;
  std::vector<std::string> failures;  // oracle-check and analysis diagnostics
  nlohmann::json analysis;            // collapse report
};

enum ExitStatus : int { exit_ok = 0, exit_error = 1, exit_usage = 2, exit_schema = 3, exit_check_failed = 4, exit_incomplete = 5 };

/**
 * Runs the configured mode over the (L, T) grid. Entropy trajectories and
 * anyon sample chunks are independent tasks drawn by a worker pool; one
 * writer appends finished tasks to per-point JSONL files, so an interrupted
 * campaign resumes where it stopped and a finished one is a no-op. Results
 * go to results.csv and manifest.json in the output directory.
 *
 * `log` receives progress lines. Library errors propagate as tmc::Error.
 */
CampaignSummary run_campaign(const CampaignConfig& config, std::ostream& log);

// Re-runs the campaign recorded in `dir`/manifest.json.
CampaignSummary resume_campaign(const std::filesystem::path& dir, std::ostream& log, int parallelism = 0,
                                long long step_budget = -1);

// Crossings and bootstrap collapse of one observable in a results CSV; writes
// analysis.json and collapse.csv next to the output.
nlohmann::json analyze_results(const CampaignConfig& config, std::ostream& log);

// Human-readable tables of a results CSV (gamma and S2 by T, T_l by T).
void print_report(const std::vector<ResultRow>& rows, std::ostream& out);

// Oracle-versus-engine comparisons on small lattices; one line per check.
std::vector<std::string> oracle_check(const std::vector<int>& sizes, std::uint64_t seed, std::ostream& log);

}  // namespace tmc
