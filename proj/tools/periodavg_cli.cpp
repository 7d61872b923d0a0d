// Command-line front end. Talks to the library only through the C API.
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "periodavg/periodavg.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfigError = 2;

int report(pavg_status status) {
  std::fprintf(stderr, "error: %s\n", pavg_last_error());
  return status == PAVG_ERR_CONFIG || status == PAVG_ERR_USAGE ? kExitConfigError : kExitRunFailure;
}

int cmd_validate(const std::string& config_path) {
  pavg_experiment* exp = nullptr;
  pavg_status st = pavg_experiment_load(config_path.c_str(), &exp);
  if (st != PAVG_OK) return report(st);
  std::printf("%s: ok (%zu runs)\n", config_path.c_str(), pavg_experiment_run_count(exp));
  pavg_experiment_free(exp);
  return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& output_dir, std::size_t parallel_runs) {
  pavg_experiment* exp = nullptr;
  pavg_status st = pavg_experiment_load(config_path.c_str(), &exp);
  if (st != PAVG_OK) return report(st);
  pavg_experiment_set_output_dir(exp, output_dir.c_str());

  pavg_summary* summary = nullptr;
  st = pavg_experiment_run(exp, parallel_runs, &summary);
  int code = kExitOk;
  if (summary) {
    std::fputs(pavg_summary_table(summary), stdout);
    std::fputs(pavg_summary_failures(summary), stderr);
  }
  if (st != PAVG_OK) {
    code = report(st);
  } else {
    std::printf("outputs in %s\n", pavg_experiment_output_dir(exp));
  }
  pavg_summary_free(summary);
  pavg_experiment_free(exp);
  return code;
}

int cmd_summarize(const std::string& dir) {
  pavg_summary* summary = nullptr;
  pavg_status st = pavg_summarize_dir(dir.c_str(), &summary);
  if (st != PAVG_OK) return report(st);
  std::fputs(pavg_summary_table(summary), stdout);
  pavg_summary_free(summary);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-worker SGD simulator with periodic model averaging"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pavg_version());

  std::string config_path;
  std::string output_dir;
  std::size_t parallel_runs = 1;
  std::string summary_dir;

  auto* run = app.add_subcommand("run", "Run every (strategy, seed) pair in a config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--output-dir", output_dir, "Output directory (overrides PERIODAVG_OUTPUT_DIR and the config)");
  run->add_option("--parallel-runs", parallel_runs, "Runs executed concurrently")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Parse and check a config");
  validate->add_option("config", config_path, "Experiment config (JSON)")->required();

  auto* summarize = app.add_subcommand("summarize", "Rebuild the summary table from run CSVs");
  summarize->add_option("dir", summary_dir, "Directory holding <strategy>_seed<seed>.csv files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfigError;
  }

  if (*run) return cmd_run(config_path, output_dir, parallel_runs);
  if (*validate) return cmd_validate(config_path);
  return cmd_summarize(summary_dir);
}
