#include "periodavg/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <regex>
#include <sstream>

#include "periodavg/errors.hpp"
#include "worker_pool.hpp"

namespace pavg {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Dataset slice_rows(const Dataset& src, std::size_t begin, std::size_t end) {
  Dataset out;
  out.task = src.task;
  out.num_classes = src.num_classes;
  out.true_weights = src.true_weights;
  out.table.input_dim = src.table.input_dim;
  for (std::size_t i = begin; i < end; ++i) {
    const auto row = src.table.row(i);
    out.table.append_row(row, src.table.targets[i]);
  }
  return out;
}

void check_model_fits(const ModelSpec& model, const Dataset& train) {
  if (train.input_dim() != model.input_dim) {
    throw ConfigError("dataset has " + std::to_string(train.input_dim()) + " features but the model expects " +
                      std::to_string(model.input_dim));
  }
  const bool classification = train.task == TaskKind::kClassification;
  if (classification != is_classifier(model)) throw ConfigError("'model.kind' does not match the dataset task");
  if (model.kind == ModelKind::kLogisticRegression && train.num_classes > 2) {
    throw ConfigError("logistic_regression needs binary labels, dataset has " + std::to_string(train.num_classes) +
                      " classes");
  }
  if (model.kind == ModelKind::kMlp && train.num_classes > model.num_classes) {
    throw ConfigError("dataset has " + std::to_string(train.num_classes) + " classes but 'model.num_classes' is " +
                      std::to_string(model.num_classes));
  }
}

std::string run_stem(const std::string& strategy, std::uint64_t seed) {
  return strategy + "_seed" + std::to_string(seed);
}

std::string fmt4(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double median_of(std::vector<double> v) { return v.empty() ? kNaN : median(v); }

}  // namespace

std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& config) {
  Dataset train;
  Dataset eval;
  try {
    if (config.dataset.synthetic) {
      SyntheticSpec spec = config.dataset.synthetic_spec;
      const std::size_t n_train = spec.n_samples;
      spec.n_samples += config.dataset.eval_samples;
      Dataset all = gen_synthetic(spec);
      if (config.dataset.eval_samples == 0) {
        train = std::move(all);
        eval = slice_rows(train, 0, 0);
      } else {
        train = slice_rows(all, 0, n_train);
        eval = slice_rows(all, n_train, all.size());
      }
    } else {
      train = load_csv(config.dataset.csv_path, config.dataset.csv_schema);
      if (!config.dataset.eval_csv_path.empty()) {
        eval = load_csv(config.dataset.eval_csv_path, config.dataset.csv_schema);
      } else {
        eval = slice_rows(train, 0, 0);
      }
    }
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }

  ModelSpec model = config.model;
  if (!config.dataset.synthetic && model.input_dim == 0) model.input_dim = train.input_dim();
  check_model_fits(model, train);
  if (eval.size() > 0 && eval.input_dim() != train.input_dim()) {
    throw ConfigError("eval dataset has a different feature count from the training dataset");
  }
  if (config.n_workers * config.per_worker_batch > train.size()) {
    throw ConfigError("dataset has " + std::to_string(train.size()) + " rows, fewer than one global batch of " +
                      std::to_string(config.n_workers * config.per_worker_batch));
  }
  return {std::move(train), std::move(eval)};
}

RunPlan make_plan(const ExperimentConfig& config, const StrategyConfig& strategy, std::uint64_t seed) {
  RunPlan plan;
  plan.n_workers = config.n_workers;
  plan.per_worker_batch = config.per_worker_batch;
  plan.epochs = config.epochs;
  plan.strategy = strategy.strategy;
  plan.schedule = config.schedule;
  plan.momentum = config.momentum;
  plan.model = config.model;
  plan.eval_every = config.eval_every;
  plan.seed = seed;
  plan.cost = config.cost;
  plan.cost.n = static_cast<int>(config.n_workers);
  plan.threads = config.worker_threads;
  return plan;
}

RunSummary summarize_records(const std::string& strategy, std::uint64_t seed,
                             std::span<const MetricsRecord> records) {
  RunSummary s;
  s.strategy = strategy;
  s.seed = seed;
  s.iterations = static_cast<long>(records.size());
  s.final_train_loss = kNaN;
  s.best_eval_accuracy = kNaN;
  for (const auto& r : records) {
    if (!std::isnan(r.train_loss)) s.final_train_loss = r.train_loss;
    if (!std::isnan(r.eval_accuracy) && !(r.eval_accuracy <= s.best_eval_accuracy)) {
      s.best_eval_accuracy = r.eval_accuracy;
    }
  }
  if (!records.empty()) {
    s.sync_count = records.back().sync_count_cum;
    s.bytes = records.back().bytes_cum;
    s.comm_time = records.back().comm_time_modeled_cum;
  }
  return s;
}

std::vector<SummaryRow> aggregate(std::span<const RunSummary> runs, std::span<const std::string> order) {
  std::vector<SummaryRow> rows;
  for (const auto& name : order) {
    SummaryRow row;
    row.strategy = name;
    std::vector<double> iters, loss, acc, syncs, bytes, time;
    for (const auto& r : runs) {
      if (r.strategy != name || r.failed) continue;
      ++row.runs;
      iters.push_back(static_cast<double>(r.iterations));
      loss.push_back(r.final_train_loss);
      if (!std::isnan(r.best_eval_accuracy)) acc.push_back(r.best_eval_accuracy);
      syncs.push_back(static_cast<double>(r.sync_count));
      bytes.push_back(static_cast<double>(r.bytes));
      time.push_back(r.comm_time);
    }
    if (row.runs == 0) {
      row.final_train_loss = row.best_eval_accuracy = row.sync_count = kNaN;
      row.effective_period = row.bytes = row.comm_time = kNaN;
      row.final_train_loss_spread = Spread{kNaN, kNaN, kNaN};
    } else {
      row.iterations = static_cast<long>(median(iters));
      row.final_train_loss = median(loss);
      row.final_train_loss_spread = spread(loss);
      row.best_eval_accuracy = median_of(acc);
      row.sync_count = median(syncs);
      row.effective_period = row.sync_count > 0 ? static_cast<double>(row.iterations) / row.sync_count : kNaN;
      row.bytes = median(bytes);
      row.comm_time = median(time);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_summary(std::span<const SummaryRow> rows) {
  const std::vector<std::string> header = {"strategy", "runs",       "iters", "final_loss", "loss_min",  "loss_max",
                                           "best_acc", "syncs",      "eff_p", "bytes",      "comm_time"};
  std::vector<std::vector<std::string>> table = {header};
  for (const auto& r : rows) {
    table.push_back({r.strategy, std::to_string(r.runs), std::to_string(r.iterations), fmt4(r.final_train_loss),
                     fmt4(r.final_train_loss_spread.min), fmt4(r.final_train_loss_spread.max),
                     fmt4(r.best_eval_accuracy), fmt4(r.sync_count), fmt4(r.effective_period), fmt4(r.bytes),
                     fmt4(r.comm_time)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : table) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream out;
  for (const auto& line : table) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c == 0) {
        out << line[c] << std::string(width[c] - line[c].size(), ' ');
      } else {
        out << "  " << std::string(width[c] - line[c].size(), ' ') << line[c];
      }
    }
    out << '\n';
  }
  return out.str();
}

void write_summary_csv(std::span<const SummaryRow> rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "strategy,runs,iterations,final_train_loss_median,final_train_loss_min,final_train_loss_max,"
         "best_eval_accuracy_median,sync_count_median,effective_period,bytes_median,comm_time_median\n";
  for (const auto& r : rows) {
    out << r.strategy << ',' << r.runs << ',' << r.iterations << ',' << format_real(r.final_train_loss) << ','
        << format_real(r.final_train_loss_spread.min) << ',' << format_real(r.final_train_loss_spread.max) << ','
        << format_real(r.best_eval_accuracy) << ',' << format_real(r.sync_count) << ','
        << format_real(r.effective_period) << ',' << format_real(r.bytes) << ',' << format_real(r.comm_time)
        << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentResult result;
  result.output_dir = options.output_dir.empty() ? config.output_dir : options.output_dir;
  const auto [train, eval] = build_datasets(config);

  std::error_code ec;
  fs::create_directories(result.output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + result.output_dir + "': " + ec.message());

  struct Job {
    const StrategyConfig* strategy;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& st : config.strategies) {
    for (auto seed : config.seeds) jobs.push_back({&st, seed});
  }
  result.runs.resize(jobs.size());

  const fs::path dir(result.output_dir);
  detail::WorkerPool pool(std::max<std::size_t>(1, std::min(options.parallel_runs, jobs.size())));
  pool.parallel_for(jobs.size(), [&](std::size_t i) {
    const Job& job = jobs[i];
    const std::string stem = run_stem(job.strategy->name, job.seed);
    const fs::path csv = dir / (stem + ".csv");
    const fs::path failed = dir / (stem + ".failed");
    std::error_code ignored;
    fs::remove(failed, ignored);
    try {
      RunPlan plan = make_plan(config, *job.strategy, job.seed);
      if (plan.model.input_dim == 0) plan.model.input_dim = train.input_dim();
      const RunResult r = run(plan, train, eval);
      write_metrics_csv(r.records, csv.string());
      result.runs[i] = summarize_records(job.strategy->name, job.seed, r.records);
    } catch (const Error& e) {
      fs::remove(csv, ignored);
      RunSummary s;
      s.strategy = job.strategy->name;
      s.seed = job.seed;
      s.failed = true;
      s.error = e.what();
      result.runs[i] = s;
      std::ofstream marker(failed, std::ios::binary);
      marker << e.what() << '\n';
    }
  });

  std::vector<std::string> order;
  for (const auto& st : config.strategies) order.push_back(st.name);
  result.rows = aggregate(result.runs, order);
  write_summary_csv(result.rows, (dir / "summary.csv").string());
  result.any_failed = std::any_of(result.runs.begin(), result.runs.end(), [](const RunSummary& s) { return s.failed; });
  return result;
}

std::vector<SummaryRow> summarize_dir(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("'" + dir + "' is not a directory");
  static const std::regex run_re(R"((.+)_seed([0-9]+)\.csv)");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path().filename().string());
  }
  std::sort(files.begin(), files.end());
  std::vector<RunSummary> runs;
  std::vector<std::string> order;
  for (const auto& name : files) {
    std::smatch m;
    if (!std::regex_match(name, m, run_re)) continue;
    const std::string strategy = m[1];
    const std::uint64_t seed = std::stoull(m[2]);
    const auto records = read_metrics_csv((fs::path(dir) / name).string());
    runs.push_back(summarize_records(strategy, seed, records));
    if (std::find(order.begin(), order.end(), strategy) == order.end()) order.push_back(strategy);
  }
  if (runs.empty()) throw IoError("no run CSVs found in '" + dir + "'");
  std::sort(order.begin(), order.end());
  return aggregate(runs, order);
}

std::string resolve_output_dir(const ExperimentConfig& config, const std::string& cli_override) {
  if (!cli_override.empty()) return cli_override;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return config.output_dir;
}

}  // namespace pavg
