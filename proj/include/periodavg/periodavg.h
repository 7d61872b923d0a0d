#ifndef PERIODAVG_PERIODAVG_H
#define PERIODAVG_PERIODAVG_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define PAVG_API __attribute__((visibility("default")))
#else
#define PAVG_API
#endif

typedef enum pavg_status {
  PAVG_OK = 0,
  PAVG_ERR_DIMENSION = 1,
  PAVG_ERR_USAGE = 2,
  PAVG_ERR_NUMERIC = 3,
  PAVG_ERR_CONFIG = 4,
  PAVG_ERR_IO = 5,
  PAVG_ERR_FORMAT = 6,
  /* At least one run in the experiment failed; the others completed. */
  PAVG_ERR_RUN_FAILED = 7,
  PAVG_ERR_INTERNAL = 8
} pavg_status;

typedef struct pavg_experiment pavg_experiment;
typedef struct pavg_summary pavg_summary;

/* Message for the last non-OK status returned on this thread. */
PAVG_API const char* pavg_last_error(void);
PAVG_API const char* pavg_version(void);

PAVG_API pavg_status pavg_experiment_load(const char* config_path, pavg_experiment** out);
PAVG_API pavg_status pavg_experiment_parse(const char* json_text, pavg_experiment** out);
PAVG_API void pavg_experiment_free(pavg_experiment* exp);

/* NULL or "" clears the override. */
PAVG_API pavg_status pavg_experiment_set_output_dir(pavg_experiment* exp, const char* dir);
/* Effective directory: explicit override, then PERIODAVG_OUTPUT_DIR, then the config. */
PAVG_API const char* pavg_experiment_output_dir(const pavg_experiment* exp);
/* Loads the datasets and checks them against the model without training. */
PAVG_API pavg_status pavg_experiment_check(pavg_experiment* exp);
PAVG_API size_t pavg_experiment_run_count(const pavg_experiment* exp);

/* Runs every (strategy, seed) pair. On PAVG_ERR_RUN_FAILED *out still
   receives the summary of the runs that completed. */
PAVG_API pavg_status pavg_experiment_run(pavg_experiment* exp, size_t parallel_runs, pavg_summary** out);

/* Aggregates the run CSVs found in a directory. */
PAVG_API pavg_status pavg_summarize_dir(const char* dir, pavg_summary** out);

PAVG_API size_t pavg_summary_rows(const pavg_summary* s);
PAVG_API const char* pavg_summary_strategy(const pavg_summary* s, size_t row);
PAVG_API double pavg_summary_final_loss(const pavg_summary* s, size_t row);
PAVG_API double pavg_summary_sync_count(const pavg_summary* s, size_t row);
PAVG_API double pavg_summary_comm_time(const pavg_summary* s, size_t row);
/* Plain-text table, owned by the summary. */
PAVG_API const char* pavg_summary_table(const pavg_summary* s);
/* Newline-separated "strategy seed: message" lines for failed runs. */
PAVG_API const char* pavg_summary_failures(const pavg_summary* s);
PAVG_API void pavg_summary_free(pavg_summary* s);

#ifdef __cplusplus
}
#endif

#endif
