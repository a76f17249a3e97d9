#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "tmc/campaign.hpp"
#include "tmc/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_of(const tmc::Error& e) {
  switch (e.code()) {
    case tmc::ErrorCode::usage: return tmc::exit_usage;
    case tmc::ErrorCode::checkpoint_schema: return tmc::exit_schema;
    default: return tmc::exit_error;
  }
}

json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tmc::Error(tmc::ErrorCode::usage, "cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw tmc::Error(tmc::ErrorCode::usage, "config file " + path + " is not valid JSON: " + e.what());
  }
}

// Command-line values layered over the config document; flags win.
struct Overrides {
  std::string config_path;
  std::string mode;
  std::vector<int> L;
  std::vector<double> p, T;
  std::vector<std::string> regions;
  std::vector<double> eta_range, nu_range;
  std::map<std::string, int> ints;
  std::map<std::string, std::string> strings;
  std::optional<double> Tc;
  std::optional<std::uint64_t> seed;
  long long step_budget = -1;

  void add_grid_options(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "JSON config document")->check(CLI::ExistingFile);
    cmd->add_option("--L", L, "system sizes")->delimiter(',');
    cmd->add_option("--p", p, "flip probabilities")->delimiter(',');
    cmd->add_option("--T", T, "temperatures")->delimiter(',');
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--chi", ints["chi"], "boundary bond dimension");
    cmd->add_option("--engine", strings["engine"], "contraction engine: auto, mps or rows");
    cmd->add_option("-o,--output", strings["output_dir"], "output directory (relative paths honour TMC_OUTPUT_ROOT)");
    cmd->add_option("-j,--parallel", ints["parallelism"], "worker threads, 0 for all cores");
  }

  void add_run_options(CLI::App* cmd) {
    add_grid_options(cmd);
    cmd->add_option("--mode", mode, "s2, tee, anyon, collapse or oracle-check");
    cmd->add_option("--n-steps", ints["n_steps"], "Jarzynski schedule length");
    cmd->add_option("--updates-per-step", ints["updates_per_step"], "Metropolis updates per schedule step");
    cmd->add_option("--proposal", strings["proposal"], "full, local or sweep");
    cmd->add_option("--trajectories", ints["n_trajectories"], "trajectories per region and grid point");
    cmd->add_option("--regions", regions, "regions for s2 mode (AC, BC, C, ABC)")->delimiter(',');
    cmd->add_option("--checkpoint-interval", ints["checkpoint_interval"], "steps between trajectory checkpoints");
    cmd->add_option("--samples", ints["n_samples"], "anyon samples per grid point");
    cmd->add_option("--chunk-size", ints["chunk_size"], "anyon samples per task");
    cmd->add_option("--path-length", ints["path_length"], "anyon path length, 0 for L/2");
    cmd->add_option("--step-budget", step_budget, "stop after this much work and leave checkpoints");
    add_analysis_options(cmd);
  }

  void add_analysis_options(CLI::App* cmd) {
    cmd->add_option("--input", strings["input"], "results CSV to analyse");
    cmd->add_option("--observable", strings["observable"], "T_l or gamma");
    cmd->add_option("--eta-range", eta_range, "low,high")->delimiter(',')->expected(2);
    cmd->add_option("--nu-range", nu_range, "low,high")->delimiter(',')->expected(2);
    cmd->add_option("--Tc", Tc, "fix the critical temperature");
    cmd->add_option("--degree", ints["degree"], "collapse polynomial degree");
    cmd->add_option("--bootstrap", ints["bootstrap_repeats"], "bootstrap repeats");
  }

  json apply(CLI::App* cmd) const {
    json j = config_path.empty() ? json::object() : read_config_file(config_path);
    if (!j.is_object()) throw tmc::Error(tmc::ErrorCode::usage, "config must be a JSON object");
    if (!mode.empty()) j["mode"] = mode;
    if (!L.empty()) j["L"] = L;
    // A grid given on the command line replaces the configured one; both at once is an error.
    if (!p.empty() || !T.empty()) {
      j.erase("p");
      j.erase("T");
      if (!p.empty()) j["p"] = p;
      if (!T.empty()) j["T"] = T;
    }
    if (!regions.empty()) j["regions"] = regions;
    if (!eta_range.empty()) j["eta_range"] = eta_range;
    if (!nu_range.empty()) j["nu_range"] = nu_range;
    if (Tc) j["Tc"] = *Tc;
    if (seed) j["seed"] = *seed;
    for (const auto& [key, value] : ints) {
      const std::string flag = "--" + flag_name(key);
      if (cmd->get_option_no_throw(flag) && cmd->count(flag)) j[key] = value;
    }
    for (const auto& [key, value] : strings)
      if (!value.empty()) j[key] = value;
    return j;
  }

  static std::string flag_name(const std::string& key) {
    static const std::map<std::string, std::string> names{{"n_trajectories", "trajectories"},
                                                          {"n_samples", "samples"},
                                                          {"bootstrap_repeats", "bootstrap"},
                                                          {"parallelism", "parallel"}};
    if (auto it = names.find(key); it != names.end()) return it->second;
    std::string f = key;
    for (char& ch : f)
      if (ch == '_') ch = '-';
    return f;
  }
};

int finish(const tmc::CampaignSummary& s) {
  for (const std::string& f : s.failures) std::cerr << "failed: " << f << "\n";
  return s.exit_status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo estimates of Renyi entropies, topological entanglement entropy and anyon order "
               "parameters for tensor-network states of the random-bond Ising model"};
  app.require_subcommand(1);

  Overrides run_args;
  auto* run = app.add_subcommand("run", "run a campaign from a config document and flags");
  run_args.add_run_options(run);

  Overrides analyze_args;
  auto* analyze = app.add_subcommand("analyze", "crossings and data collapse of a results CSV");
  analyze_args.add_analysis_options(analyze);
  analyze->add_option("-c,--config", analyze_args.config_path, "JSON config document")->check(CLI::ExistingFile);
  analyze->add_option("-o,--output", analyze_args.strings["output_dir"], "directory for analysis.json and collapse.csv");
  analyze->add_option("--seed", analyze_args.seed, "bootstrap seed");

  std::vector<int> oracle_sizes{1, 2};
  std::uint64_t oracle_seed = 1;
  auto* oracle = app.add_subcommand("oracle-check", "compare engines against exact enumeration on small lattices");
  oracle->add_option("--L", oracle_sizes, "sizes, at most 3")->delimiter(',');
  oracle->add_option("--seed", oracle_seed, "seed");

  std::string resume_dir;
  int resume_parallel = 0;
  long long resume_budget = -1;
  auto* resume = app.add_subcommand("resume", "continue the campaign stored in an output directory");
  resume->add_option("dir", resume_dir, "campaign output directory")->required();
  resume->add_option("-j,--parallel", resume_parallel, "worker threads, 0 for all cores");
  resume->add_option("--step-budget", resume_budget, "stop after this much work and leave checkpoints");

  std::string report_path;
  auto* report = app.add_subcommand("report", "print the result tables of a campaign");
  report->add_option("path", report_path, "output directory or results CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tmc::exit_usage;
  }

  try {
    if (run->parsed()) {
      tmc::CampaignConfig config = tmc::config_from_json(run_args.apply(run));
      config.step_budget = run_args.step_budget;
      return finish(tmc::run_campaign(config, std::cout));
    }
    if (analyze->parsed()) {
      json j = analyze_args.apply(analyze);
      j["mode"] = "collapse";
      tmc::CampaignConfig config = tmc::config_from_json(j);
      return finish(tmc::run_campaign(config, std::cout));
    }
    if (oracle->parsed()) {
      tmc::CampaignConfig config;
      config.mode = tmc::CampaignMode::oracle_check;
      config.L = oracle_sizes;
      config.seed = oracle_seed;
      return finish(tmc::run_campaign(config, std::cout));
    }
    if (resume->parsed())
      return finish(tmc::resume_campaign(resume_dir, std::cout, resume_parallel, resume_budget));
    if (report->parsed()) {
      fs::path csv = report_path;
      if (fs::is_directory(csv)) csv /= "results.csv";
      tmc::print_report(tmc::read_results(csv), std::cout);
      return tmc::exit_ok;
    }
  } catch (const tmc::Error& e) {
    std::cerr << "tmc: " << e.what() << "\n";
    return exit_code_of(e);
  } catch (const std::exception& e) {
    std::cerr << "tmc: " << e.what() << "\n";
    return tmc::exit_error;
  }
  return tmc::exit_ok;
}
