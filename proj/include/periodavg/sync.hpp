#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "periodavg/numkit.hpp"
#include "periodavg/optim.hpp"

namespace pavg {

// ---------------------------------------------------------------------------
// Strategies

/// Average parameters after every local update.
struct FullSync {};

/// Average after every `p` local updates.
struct ConstantPeriod {
  int p = 1;
};

/// Period adapted online so that the pre-averaging variance S_k tracks
/// lr * C2, with C2 estimated during the first `ks_fraction` of training.
struct AdaptivePeriod {
  int p_init = 4;
  double ks_fraction = 0.25;
  double band_low = 0.7;
  double band_high = 1.3;
  /// Epochs at the start of training that average every iteration.
  int warmup_epochs_p1 = 1;

  /// Sampling-phase length in iterations for a run of `total_iterations`.
  long ks_iterations(long total_iterations) const;
};

struct PeriodSegment {
  int start_epoch = 0;
  int p = 1;
};

/// Constant period within each epoch segment. The first segment starts at 0.
struct PiecewiseConstant {
  std::vector<PeriodSegment> segments;
};

/// Every iteration, exchange stochastically quantized gradients instead of
/// averaging parameters.
struct Quantized {
  int bits = 8;
};

using SyncStrategy = std::variant<FullSync, ConstantPeriod, AdaptivePeriod, PiecewiseConstant, Quantized>;

/// Short kind name: full_sync, constant_period, adaptive_period,
/// piecewise_constant or quantized.
std::string strategy_kind(const SyncStrategy& strategy);
void validate(const SyncStrategy& strategy);

// ---------------------------------------------------------------------------
// Adaptive controller

enum class AdaptivePhase { kSampling, kAdapting };

struct AdaptiveControllerState {
  int cnt = 0;  // iterations since the last averaging
  int p = 1;
  double c2_sum = 0.0;
  long c2_count = 0;
  double c2 = 0.0;
  AdaptivePhase phase = AdaptivePhase::kSampling;
};

AdaptiveControllerState make_controller(const AdaptivePeriod& config);

/// Controller update at a synchronization with variance `s_k` and
/// learning rate `lr`. While k < ks the ratio s_k/lr is folded into the
/// running mean C2 and p is left alone; afterwards p moves by one step when
/// s_k leaves [band_low*lr*C2, band_high*lr*C2], never below 1. cnt is
/// reset in both phases.
AdaptiveControllerState adapt_period(AdaptiveControllerState state, double s_k, double lr, long k, long ks,
                                     double band_low, double band_high);

// ---------------------------------------------------------------------------
// Sync decisions

/// Position of an iteration within the run.
struct StepClock {
  long k = 0;
  int epoch = 0;
  long iters_per_epoch = 1;
  long total_iterations = 1;
};

/// Whether parameters are averaged at the end of iteration `clock.k`.
/// AdaptivePeriod requires a controller.
bool should_sync(const SyncStrategy& strategy, const AdaptiveControllerState* controller, const StepClock& clock);

/// Averaging period in effect during iteration `clock.k`.
int current_period(const SyncStrategy& strategy, const AdaptiveControllerState* controller, const StepClock& clock);

/// Elementwise mean of worker parameters (ascending worker order).
ParamVector average_params(std::span<const ParamVector* const> workers);
ParamVector average_params(std::span<const ParamVector> workers);

/// (1/n) sum_j ||mean - w_j||^2 over the given parameter vectors.
double compute_sk(std::span<const ParamVector* const> workers);
double compute_sk(std::span<const ParamVector> workers);

// ---------------------------------------------------------------------------
// Quantization

/// Stochastically rounded gradient: component j is levels[j] * scale / s
/// with s = 2^(bits-1) - 1.
struct QuantizedGrad {
  double scale = 0.0;
  int bits = 8;
  std::vector<std::int8_t> levels;

  int max_level() const noexcept { return (1 << (bits - 1)) - 1; }
  /// Bytes needed for the packed levels, ceil(d * bits / 8).
  std::size_t component_payload_bytes() const noexcept;
  /// Packed levels plus the scale scalar.
  std::size_t payload_bytes(std::size_t bytes_per_scalar) const noexcept;
};

QuantizedGrad quantize(const ParamVector& g, int bits, RngStream& rng);
ParamVector dequantize(const QuantizedGrad& q);

// ---------------------------------------------------------------------------
// Orchestrated step

struct WorkerState {
  int id = 0;
  ParamVector params;
  MomentumState momentum;
  RngStream rng;
};

struct SyncEvent {
  long k = 0;
  double s_k = 0.0;  // variance after the local update, before averaging
  int period_before = 1;
  int period_after = 1;
  std::size_t bytes_per_worker = 0;
  /// Size of the main allreduce payload.
  std::size_t payload_bytes = 0;
  /// Whether a one-scalar allreduce (the S_k exchange, or the quantization
  /// scale) accompanies it.
  bool scalar_allreduce = false;
};

struct SyncOutcome {
  /// Variance across workers after the local update and before averaging.
  double variance_before_sync = 0.0;
  int period = 1;
  std::optional<SyncEvent> event;
};

/// Applies one iteration's local updates and, when due, synchronization.
///
/// Averaging strategies step every worker with its own gradient and momentum,
/// then replace all parameters by their mean when should_sync fires
/// (momentum buffers are left per-worker). Quantized averages the workers'
/// dequantized gradients and applies that single update on every worker.
SyncOutcome apply_sync(const SyncStrategy& strategy, AdaptiveControllerState* controller,
                       std::span<WorkerState> workers, std::span<const ParamVector> grads, const StepClock& clock,
                       double lr, std::size_t bytes_per_scalar);

}  // namespace pavg
