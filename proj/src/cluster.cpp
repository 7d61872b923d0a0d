#include "periodavg/cluster.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "periodavg/errors.hpp"
#include "worker_pool.hpp"

namespace pavg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_plan(const RunPlan& plan, const Dataset& train, const Dataset& eval) {
  if (plan.n_workers == 0) throw UsageError("n_workers must be >= 1");
  if (plan.per_worker_batch == 0) throw UsageError("per_worker_batch must be >= 1");
  if (plan.epochs < 0) throw UsageError("epochs must be >= 0");
  if (plan.eval_every < 1) throw UsageError("eval_every must be >= 1");
  if (plan.n_workers * plan.per_worker_batch > train.size()) {
    throw UsageError("dataset has " + std::to_string(train.size()) + " rows, fewer than one global batch of " +
                     std::to_string(plan.n_workers * plan.per_worker_batch));
  }
  if (train.input_dim() != plan.model.input_dim) throw DimensionError("dataset input_dim does not match model");
  if (eval.size() > 0 && eval.input_dim() != plan.model.input_dim) {
    throw DimensionError("eval dataset input_dim does not match model");
  }
  validate(plan.model);
  validate(plan.schedule);
  validate(plan.strategy);
}

struct Evaluation {
  double train_loss = kNaN;
  double grad_sq_norm = kNaN;
  double eval_accuracy = kNaN;
};

Evaluation evaluate(const RunPlan& plan, const ParamVector& w, const Dataset& train, const Dataset& eval) {
  Evaluation out;
  ParamVector g;
  out.train_loss = loss_and_grad(plan.model, w, train.table, g);
  out.grad_sq_norm = sq_l2_norm(g);
  if (is_classifier(plan.model) && eval.size() > 0) out.eval_accuracy = accuracy(plan.model, w, eval.table);
  return out;
}

std::vector<const ParamVector*> param_ptrs(const std::vector<WorkerState>& workers) {
  std::vector<const ParamVector*> ptrs;
  ptrs.reserve(workers.size());
  for (const auto& w : workers) ptrs.push_back(&w.params);
  return ptrs;
}

// Shared driver for `run` and `run_serial_reference`. In reference mode a
// single worker trains on the concatenation of the n per-worker batches.
RunResult simulate(const RunPlan& plan, const Dataset& train, const Dataset& eval, bool serial_reference) {
  check_plan(plan, train, eval);

  RunResult result;
  result.iters_per_epoch = iterations_per_epoch(plan, train.size());
  result.iterations = total_iterations(plan, train.size());

  const std::size_t dim = param_dim(plan.model);
  RngStream init_rng(plan.seed, kInitStreamId);
  result.initial_params = init_params(plan.model, init_rng);

  const std::size_t workers_simulated = serial_reference ? 1 : plan.n_workers;
  const SyncStrategy strategy = serial_reference ? SyncStrategy{FullSync{}} : plan.strategy;
  result.workers.reserve(workers_simulated);
  for (std::size_t i = 0; i < workers_simulated; ++i) {
    result.workers.push_back(WorkerState{static_cast<int>(i), result.initial_params,
                                         make_momentum(dim, plan.momentum), RngStream(plan.seed, i)});
  }

  CostModel cost = plan.cost;
  cost.n = static_cast<int>(workers_simulated);
  validate(cost);

  std::unique_ptr<AdaptiveControllerState> controller;
  if (const auto* adaptive = std::get_if<AdaptivePeriod>(&strategy)) {
    controller = std::make_unique<AdaptiveControllerState>(make_controller(*adaptive));
  }

  Sampler sampler(train.size(), RngStream(plan.seed, kSamplerStreamId));
  detail::WorkerPool pool(serial_reference ? 1 : plan.threads);
  CommAccount comm;
  std::vector<ParamVector> grads(workers_simulated);
  result.records.reserve(static_cast<std::size_t>(result.iterations));

  for (long k = 0; k < result.iterations; ++k) {
    const int epoch = static_cast<int>(k / result.iters_per_epoch);
    const double lr = lr_at(plan.schedule, epoch);
    const StepClock clock{k, epoch, result.iters_per_epoch, result.iterations};

    std::vector<Batch> batches = sampler.next_global_batch(train, plan.n_workers, plan.per_worker_batch);
    if (serial_reference) {
      Batch joined = concat(batches);
      batches.clear();
      batches.push_back(std::move(joined));
    }

    try {
      pool.parallel_for(workers_simulated, [&](std::size_t i) {
        loss_and_grad(plan.model, result.workers[i].params, batches[i], grads[i]);
      });
    } catch (const NumericError& e) {
      throw NumericError("training diverged at iteration " + std::to_string(k) + ": " + e.what());
    }
    result.grad_calls += static_cast<long>(workers_simulated);

    const SyncOutcome outcome =
        apply_sync(strategy, controller.get(), result.workers, grads, clock, lr, cost.bytes_per_scalar);
    if (outcome.event) {
      comm.record(*outcome.event);
      result.events.push_back(*outcome.event);
    }

    MetricsRecord rec;
    rec.k = k;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.var_wk = outcome.variance_before_sync;
    rec.s_k = outcome.event ? outcome.event->s_k : kNaN;
    rec.period = outcome.period;
    rec.sync_count_cum = comm.sync_count();
    rec.bytes_cum = comm.bytes();
    rec.comm_time_modeled_cum = comm.modeled_time(cost);
    rec.train_loss = kNaN;
    rec.eval_accuracy = kNaN;
    rec.grad_sq_norm = kNaN;

    if ((k + 1) % plan.eval_every == 0 || k + 1 == result.iterations) {
      const auto ptrs = param_ptrs(result.workers);
      const ParamVector averaged = mean_vectors(std::span<const ParamVector* const>(ptrs));
      Evaluation ev;
      try {
        ev = evaluate(plan, averaged, train, eval);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at iteration " + std::to_string(k) + ": " + e.what());
      }
      rec.train_loss = ev.train_loss;
      rec.grad_sq_norm = ev.grad_sq_norm;
      rec.eval_accuracy = ev.eval_accuracy;
    }
    result.records.push_back(rec);
  }
  return result;
}

}  // namespace

long iterations_per_epoch(const RunPlan& plan, std::size_t dataset_size) {
  const std::size_t global = plan.n_workers * plan.per_worker_batch;
  if (global == 0) throw UsageError("global batch size must be positive");
  return static_cast<long>(dataset_size / global);
}

long total_iterations(const RunPlan& plan, std::size_t dataset_size) {
  const long k = static_cast<long>(plan.epochs) * iterations_per_epoch(plan, dataset_size);
  return plan.max_iterations > 0 ? std::min(k, plan.max_iterations) : k;
}

ParamVector RunResult::averaged_params() const {
  if (workers.empty()) return initial_params;
  const auto ptrs = param_ptrs(workers);
  return mean_vectors(std::span<const ParamVector* const>(ptrs));
}

RunResult run(const RunPlan& plan, const Dataset& train, const Dataset& eval) {
  return simulate(plan, train, eval, false);
}

RunResult run_serial_reference(const RunPlan& plan, const Dataset& train, const Dataset& eval) {
  return simulate(plan, train, eval, true);
}

}  // namespace pavg
