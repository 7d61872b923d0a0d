#include "periodavg/periodavg.h"

#include <cmath>
#include <exception>
#include <limits>
#include <new>
#include <string>

#include "periodavg/errors.hpp"
#include "periodavg/experiment.hpp"

struct pavg_experiment {
  pavg::ExperimentConfig config;
  std::string output_override;
  std::string resolved;
};

struct pavg_summary {
  std::vector<pavg::SummaryRow> rows;
  std::string table;
  std::string failures;
};

namespace {

thread_local std::string g_last_error;

pavg_status fail(pavg_status status, const char* message) {
  g_last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
pavg_status guarded(F&& body) {
  try {
    return body();
  } catch (const pavg::Error& e) {
    return fail(static_cast<pavg_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(PAVG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PAVG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PAVG_ERR_INTERNAL, "unknown error");
  }
}

double row_value(const pavg_summary* s, size_t row, double pavg::SummaryRow::*field) {
  if (!s || row >= s->rows.size()) return std::numeric_limits<double>::quiet_NaN();
  return s->rows[row].*field;
}

}  // namespace

extern "C" {

const char* pavg_last_error(void) { return g_last_error.c_str(); }

const char* pavg_version(void) { return "0.1.0"; }

pavg_status pavg_experiment_load(const char* config_path, pavg_experiment** out) {
  if (!config_path || !out) return fail(PAVG_ERR_USAGE, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto* exp = new pavg_experiment{pavg::parse_config(config_path), {}, {}};
    *out = exp;
    return PAVG_OK;
  });
}

pavg_status pavg_experiment_parse(const char* json_text, pavg_experiment** out) {
  if (!json_text || !out) return fail(PAVG_ERR_USAGE, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new pavg_experiment{pavg::parse_config_text(json_text), {}, {}};
    return PAVG_OK;
  });
}

void pavg_experiment_free(pavg_experiment* exp) { delete exp; }

pavg_status pavg_experiment_set_output_dir(pavg_experiment* exp, const char* dir) {
  if (!exp) return fail(PAVG_ERR_USAGE, "null experiment");
  exp->output_override = dir ? dir : "";
  return PAVG_OK;
}

const char* pavg_experiment_output_dir(const pavg_experiment* exp) {
  if (!exp) return "";
  auto* mut = const_cast<pavg_experiment*>(exp);
  mut->resolved = pavg::resolve_output_dir(exp->config, exp->output_override);
  return mut->resolved.c_str();
}

pavg_status pavg_experiment_check(pavg_experiment* exp) {
  if (!exp) return fail(PAVG_ERR_USAGE, "null experiment");
  return guarded([&] {
    pavg::build_datasets(exp->config);
    return PAVG_OK;
  });
}

size_t pavg_experiment_run_count(const pavg_experiment* exp) {
  if (!exp) return 0;
  return exp->config.strategies.size() * exp->config.seeds.size();
}

pavg_status pavg_experiment_run(pavg_experiment* exp, size_t parallel_runs, pavg_summary** out) {
  if (!exp || !out) return fail(PAVG_ERR_USAGE, "null argument");
  *out = nullptr;
  return guarded([&] {
    pavg::RunOptions options;
    options.output_dir = pavg_experiment_output_dir(exp);
    options.parallel_runs = parallel_runs == 0 ? 1 : parallel_runs;
    const pavg::ExperimentResult result = pavg::run_experiment(exp->config, options);
    auto* s = new pavg_summary{result.rows, pavg::format_summary(result.rows), {}};
    for (const auto& r : result.runs) {
      if (r.failed) s->failures += r.strategy + " seed " + std::to_string(r.seed) + ": " + r.error + "\n";
    }
    *out = s;
    if (result.any_failed) return fail(PAVG_ERR_RUN_FAILED, "one or more runs failed");
    return PAVG_OK;
  });
}

pavg_status pavg_summarize_dir(const char* dir, pavg_summary** out) {
  if (!dir || !out) return fail(PAVG_ERR_USAGE, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto rows = pavg::summarize_dir(dir);
    std::string table = pavg::format_summary(rows);
    *out = new pavg_summary{std::move(rows), std::move(table), {}};
    return PAVG_OK;
  });
}

size_t pavg_summary_rows(const pavg_summary* s) { return s ? s->rows.size() : 0; }

const char* pavg_summary_strategy(const pavg_summary* s, size_t row) {
  if (!s || row >= s->rows.size()) return nullptr;
  return s->rows[row].strategy.c_str();
}

double pavg_summary_final_loss(const pavg_summary* s, size_t row) {
  return row_value(s, row, &pavg::SummaryRow::final_train_loss);
}

double pavg_summary_sync_count(const pavg_summary* s, size_t row) {
  return row_value(s, row, &pavg::SummaryRow::sync_count);
}

double pavg_summary_comm_time(const pavg_summary* s, size_t row) {
  return row_value(s, row, &pavg::SummaryRow::comm_time);
}

const char* pavg_summary_table(const pavg_summary* s) { return s ? s->table.c_str() : ""; }

const char* pavg_summary_failures(const pavg_summary* s) { return s ? s->failures.c_str() : ""; }

void pavg_summary_free(pavg_summary* s) { delete s; }

}  // extern "C"
