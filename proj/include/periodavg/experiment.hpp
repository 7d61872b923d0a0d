#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "periodavg/cluster.hpp"
#include "periodavg/data.hpp"
#include "periodavg/metrics.hpp"
#include "periodavg/model.hpp"
#include "periodavg/optim.hpp"
#include "periodavg/sync.hpp"

namespace pavg {

/// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutputDirEnv = "PERIODAVG_OUTPUT_DIR";

struct DatasetConfig {
  bool synthetic = true;
  SyntheticSpec synthetic_spec;
  /// Synthetic only: rows generated after the training rows and held out.
  std::size_t eval_samples = 0;
  std::string csv_path;
  std::string eval_csv_path;  // optional
  CsvSchema csv_schema;
};

struct StrategyConfig {
  std::string name;
  SyncStrategy strategy;
};

struct ExperimentConfig {
  ModelSpec model;
  DatasetConfig dataset;
  std::size_t n_workers = 1;
  std::size_t per_worker_batch = 1;
  int epochs = 1;
  std::vector<std::uint64_t> seeds;
  LrSchedule schedule;
  double momentum = 0.9;
  std::vector<StrategyConfig> strategies;
  CostModel cost;
  long eval_every = 100;
  std::string output_dir = "output";
  std::size_t worker_threads = 1;
};

/// Parses and validates a JSON experiment file. Unknown keys, missing
/// required keys and out-of-range values raise ConfigError naming the key.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& json_text);

/// Builds (train, eval) datasets. model.input_dim is checked against them.
std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& config);

RunPlan make_plan(const ExperimentConfig& config, const StrategyConfig& strategy, std::uint64_t seed);

/// Per-run figures derived only from the run's metrics rows.
struct RunSummary {
  std::string strategy;
  std::uint64_t seed = 0;
  long iterations = 0;
  double final_train_loss = 0.0;
  double best_eval_accuracy = 0.0;
  long sync_count = 0;
  long bytes = 0;
  double comm_time = 0.0;
  bool failed = false;
  std::string error;
};

RunSummary summarize_records(const std::string& strategy, std::uint64_t seed,
                             std::span<const MetricsRecord> records);

/// Seed-aggregated row per strategy (medians, plus loss spread).
struct SummaryRow {
  std::string strategy;
  std::size_t runs = 0;
  long iterations = 0;
  double final_train_loss = 0.0;  // median
  Spread final_train_loss_spread;
  double best_eval_accuracy = 0.0;  // median
  double sync_count = 0.0;          // median
  double effective_period = 0.0;    // iterations / sync_count
  double bytes = 0.0;               // median, per worker
  double comm_time = 0.0;           // median
};

/// Groups runs by strategy in `order`; failed runs are skipped.
std::vector<SummaryRow> aggregate(std::span<const RunSummary> runs, std::span<const std::string> order);

/// Plain-text table, reals to 4 significant digits.
std::string format_summary(std::span<const SummaryRow> rows);
void write_summary_csv(std::span<const SummaryRow> rows, const std::string& path);

struct RunOptions {
  std::string output_dir;  // empty: use the config value
  std::size_t parallel_runs = 1;
};

struct ExperimentResult {
  std::string output_dir;
  std::vector<RunSummary> runs;
  std::vector<SummaryRow> rows;
  bool any_failed = false;
};

/// One run per (strategy, seed). Writes <strategy>_seed<seed>.csv for each
/// run and summary.csv; a failed run leaves <strategy>_seed<seed>.failed.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Rebuilds summary rows from the per-run CSVs in `dir` (strategies in
/// lexicographic order).
std::vector<SummaryRow> summarize_dir(const std::string& dir);

/// Output directory after applying --output-dir, then the environment
/// variable, then the config value.
std::string resolve_output_dir(const ExperimentConfig& config, const std::string& cli_override);

}  // namespace pavg
