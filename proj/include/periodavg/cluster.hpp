#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "periodavg/data.hpp"
#include "periodavg/metrics.hpp"
#include "periodavg/model.hpp"
#include "periodavg/optim.hpp"
#include "periodavg/sync.hpp"

namespace pavg {

/// RngStream ids reserved next to the worker ids (0..n-1).
inline constexpr std::uint64_t kInitStreamId = 0xFFFF'0000'0000'0001ull;
inline constexpr std::uint64_t kSamplerStreamId = 0xFFFF'0000'0000'0002ull;

struct RunPlan {
  std::size_t n_workers = 1;
  std::size_t per_worker_batch = 1;
  int epochs = 1;
  SyncStrategy strategy = FullSync{};
  LrSchedule schedule;
  double momentum = 0.0;
  ModelSpec model;
  long eval_every = 1;
  std::uint64_t seed = 0;
  /// Node count is taken from n_workers.
  CostModel cost;
  /// Threads used for the per-worker gradient pass. Results do not depend on it.
  std::size_t threads = 1;
  /// When > 0, stop after this many iterations even if epochs remain.
  long max_iterations = 0;
};

/// Iterations per epoch under drop-last batching, floor(N / (n*m)).
long iterations_per_epoch(const RunPlan& plan, std::size_t dataset_size);
/// Total iteration count K for the plan.
long total_iterations(const RunPlan& plan, std::size_t dataset_size);

struct RunResult {
  std::vector<MetricsRecord> records;
  std::vector<SyncEvent> events;
  std::vector<WorkerState> workers;
  ParamVector initial_params;
  long iterations = 0;
  long iters_per_epoch = 0;
  /// Mini-batch gradient evaluations made by workers (evaluation excluded).
  long grad_calls = 0;

  ParamVector averaged_params() const;
};

/// Simulates n workers for K iterations: each fetches a disjoint mini-batch,
/// computes its gradient and local step, then the strategy synchronizes.
/// Training loss, gradient norm and eval accuracy are measured on the
/// averaged parameters every `eval_every` iterations and at the last one.
/// Throws NumericError naming the iteration if training diverges.
RunResult run(const RunPlan& plan, const Dataset& train, const Dataset& eval);

/// Single-worker mini-batch SGD on the concatenation (in worker order) of
/// the batches `run` would hand to the plan's n workers.
RunResult run_serial_reference(const RunPlan& plan, const Dataset& train, const Dataset& eval);

}  // namespace pavg
