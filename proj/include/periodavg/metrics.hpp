#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "periodavg/numkit.hpp"
#include "periodavg/sync.hpp"

namespace pavg {

/// One row per iteration. train_loss, eval_accuracy and grad_sq_norm are
/// NaN on iterations without an evaluation; s_k is NaN off sync.
struct MetricsRecord {
  long k = 0;
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double eval_accuracy = 0.0;
  double var_wk = 0.0;
  double s_k = 0.0;
  int period = 1;
  long sync_count_cum = 0;
  long bytes_cum = 0;
  double comm_time_modeled_cum = 0.0;
  double grad_sq_norm = 0.0;
};

/// Column names in file order.
const std::vector<std::string>& metrics_csv_header();

/// Ring-allreduce timing parameters.
struct CostModel {
  int n = 1;
  double bandwidth_bytes_per_s = 1.25e9;
  double latency_s = 5e-6;
  std::size_t bytes_per_scalar = 4;
};

void validate(const CostModel& model);

/// 2(n-1)*latency + 2((n-1)/n)*bytes/bandwidth; 0 for a single node.
double allreduce_time(const CostModel& model, std::size_t payload_bytes);

/// Running totals of synchronization traffic for one run.
class CommAccount {
 public:
  void record(const SyncEvent& event);

  long sync_count() const noexcept { return sync_count_; }
  long bytes() const noexcept { return bytes_; }
  long scalar_allreduces() const noexcept { return scalar_count_; }

  /// Modeled time as count x per-event time, so equal event streams give
  /// bit-identical totals.
  double modeled_time(const CostModel& model) const;

 private:
  long sync_count_ = 0;
  long bytes_ = 0;
  long scalar_count_ = 0;
  std::map<std::size_t, long> payload_counts_;
};

double variance_of_workers(std::span<const ParamVector* const> workers);
double variance_of_workers(std::span<const ParamVector> workers);

struct VtPoint {
  std::size_t t = 0;
  long sync_k = 0;    // iteration of the synchronization closing the window
  double v_t = 0.0;
};

/// Mean of var_wk over each inter-sync window. Window t covers the records
/// after the previous sync up to and including sync t; records after the
/// last sync are not reported.
std::vector<VtPoint> vt_series(std::span<const MetricsRecord> records, std::span<const long> sync_iterations);

/// sum(lr * g^2) / sum(lr) over the records that carry a gradient norm.
double weighted_grad_norm_metric(std::span<const MetricsRecord> records);
double weighted_grad_norm_metric(std::span<const double> lrs, std::span<const double> grad_sq_norms);

void write_metrics_csv(std::span<const MetricsRecord> records, const std::string& path);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

/// Formats a real with 17 significant digits; NaN becomes an empty string.
std::string format_real(double value);

}  // namespace pavg
