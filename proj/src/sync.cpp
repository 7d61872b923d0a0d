#include "periodavg/sync.hpp"

#include <algorithm>
#include <cmath>

#include "periodavg/errors.hpp"

namespace pavg {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<const ParamVector*> param_ptrs(std::span<const WorkerState> workers) {
  std::vector<const ParamVector*> ptrs;
  ptrs.reserve(workers.size());
  for (const auto& w : workers) ptrs.push_back(&w.params);
  return ptrs;
}

std::vector<const ParamVector*> ptrs_of(std::span<const ParamVector> xs) {
  std::vector<const ParamVector*> ptrs;
  ptrs.reserve(xs.size());
  for (const auto& x : xs) ptrs.push_back(&x);
  return ptrs;
}

const PeriodSegment& active_segment(const PiecewiseConstant& strategy, int epoch) {
  const PeriodSegment* active = &strategy.segments.front();
  for (const auto& seg : strategy.segments) {
    if (seg.start_epoch <= epoch) active = &seg;
  }
  return *active;
}

bool in_warmup(const AdaptivePeriod& strategy, const StepClock& clock) {
  return clock.epoch < strategy.warmup_epochs_p1;
}

}  // namespace

long AdaptivePeriod::ks_iterations(long total_iterations) const {
  return static_cast<long>(std::floor(ks_fraction * static_cast<double>(total_iterations)));
}

std::string strategy_kind(const SyncStrategy& strategy) {
  return std::visit(Overloaded{
                        [](const FullSync&) { return std::string("full_sync"); },
                        [](const ConstantPeriod&) { return std::string("constant_period"); },
                        [](const AdaptivePeriod&) { return std::string("adaptive_period"); },
                        [](const PiecewiseConstant&) { return std::string("piecewise_constant"); },
                        [](const Quantized&) { return std::string("quantized"); },
                    },
                    strategy);
}

void validate(const SyncStrategy& strategy) {
  std::visit(Overloaded{
                 [](const FullSync&) {},
                 [](const ConstantPeriod& s) {
                   if (s.p < 1) throw ConfigError("constant period p must be >= 1");
                 },
                 [](const AdaptivePeriod& s) {
                   if (s.p_init < 1) throw ConfigError("p_init must be >= 1");
                   if (!(s.ks_fraction > 0.0 && s.ks_fraction < 1.0)) throw ConfigError("K_s_fraction must be in (0, 1)");
                   if (!(s.band_low < 1.0 && 1.0 < s.band_high) || !(s.band_low > 0.0)) {
                     throw ConfigError("adaptive band must satisfy 0 < band_low < 1 < band_high");
                   }
                   if (s.warmup_epochs_p1 < 0) throw ConfigError("warmup_epochs_p1 must be >= 0");
                 },
                 [](const PiecewiseConstant& s) {
                   if (s.segments.empty()) throw ConfigError("piecewise schedule needs at least one segment");
                   if (s.segments.front().start_epoch != 0) throw ConfigError("first piecewise segment must start at epoch 0");
                   for (std::size_t i = 0; i < s.segments.size(); ++i) {
                     if (s.segments[i].p < 1) throw ConfigError("piecewise segment period must be >= 1");
                     if (i > 0 && s.segments[i].start_epoch <= s.segments[i - 1].start_epoch) {
                       throw ConfigError("piecewise segment start epochs must be strictly ascending");
                     }
                   }
                 },
                 [](const Quantized& s) {
                   if (s.bits < 2 || s.bits > 8) throw ConfigError("quantization bits must be in [2, 8]");
                 },
             },
             strategy);
}

AdaptiveControllerState make_controller(const AdaptivePeriod& config) {
  AdaptiveControllerState state;
  state.p = config.p_init;
  return state;
}

AdaptiveControllerState adapt_period(AdaptiveControllerState state, double s_k, double lr, long k, long ks,
                                     double band_low, double band_high) {
  if (!(lr > 0.0)) throw UsageError("adapt_period: learning rate must be positive");
  if (!(s_k >= 0.0)) throw UsageError("adapt_period: S_k must be >= 0");
  state.cnt = 0;
  if (k < ks) {
    state.phase = AdaptivePhase::kSampling;
    state.c2_sum += s_k / lr;
    state.c2_count += 1;
    state.c2 = state.c2_sum / static_cast<double>(state.c2_count);
    return state;
  }
  if (state.c2_count == 0) throw ConfigError("K_s too small: no C2 samples");
  state.phase = AdaptivePhase::kAdapting;
  if (s_k < band_low * lr * state.c2) {
    state.p += 1;
  } else if (s_k > band_high * lr * state.c2) {
    state.p = std::max(1, state.p - 1);
  }
  return state;
}

bool should_sync(const SyncStrategy& strategy, const AdaptiveControllerState* controller, const StepClock& clock) {
  if (clock.k < 0) throw UsageError("should_sync: k must be >= 0");
  return std::visit(Overloaded{
                        [](const FullSync&) { return true; },
                        [&](const ConstantPeriod& s) { return (clock.k + 1) % s.p == 0; },
                        [&](const AdaptivePeriod& s) {
                          if (controller == nullptr) throw UsageError("adaptive strategy needs a controller");
                          if (in_warmup(s, clock)) return true;
                          return controller->cnt + 1 >= controller->p;
                        },
                        [&](const PiecewiseConstant& s) {
                          const PeriodSegment& seg = active_segment(s, clock.epoch);
                          const long start = static_cast<long>(seg.start_epoch) * clock.iters_per_epoch;
                          return (clock.k + 1 - start) % seg.p == 0;
                        },
                        [](const Quantized&) { return true; },
                    },
                    strategy);
}

int current_period(const SyncStrategy& strategy, const AdaptiveControllerState* controller, const StepClock& clock) {
  return std::visit(Overloaded{
                        [](const FullSync&) { return 1; },
                        [](const ConstantPeriod& s) { return s.p; },
                        [&](const AdaptivePeriod& s) {
                          if (controller == nullptr) throw UsageError("adaptive strategy needs a controller");
                          return in_warmup(s, clock) ? 1 : controller->p;
                        },
                        [&](const PiecewiseConstant& s) { return active_segment(s, clock.epoch).p; },
                        [](const Quantized&) { return 1; },
                    },
                    strategy);
}

ParamVector average_params(std::span<const ParamVector* const> workers) {
  if (workers.empty()) throw UsageError("average_params: no workers");
  return mean_vectors(workers);
}

ParamVector average_params(std::span<const ParamVector> workers) {
  const auto ptrs = ptrs_of(workers);
  return average_params(std::span<const ParamVector* const>(ptrs));
}

double compute_sk(std::span<const ParamVector* const> workers) {
  if (workers.empty()) throw UsageError("compute_sk: no workers");
  const ParamVector centre = mean_vectors(workers);
  double acc = 0.0;
  for (const ParamVector* w : workers) acc += sq_distance(centre, *w);
  return acc / static_cast<double>(workers.size());
}

double compute_sk(std::span<const ParamVector> workers) {
  const auto ptrs = ptrs_of(workers);
  return compute_sk(std::span<const ParamVector* const>(ptrs));
}

std::size_t QuantizedGrad::component_payload_bytes() const noexcept {
  return (levels.size() * static_cast<std::size_t>(bits) + 7) / 8;
}

std::size_t QuantizedGrad::payload_bytes(std::size_t bytes_per_scalar) const noexcept {
  return component_payload_bytes() + bytes_per_scalar;
}

QuantizedGrad quantize(const ParamVector& g, int bits, RngStream& rng) {
  if (bits < 2 || bits > 8) throw UsageError("quantize: bits must be in [2, 8]");
  require_finite(g, "quantize");
  QuantizedGrad q;
  q.bits = bits;
  q.levels.assign(g.size(), 0);
  for (double v : g) q.scale = std::max(q.scale, std::abs(v));
  if (q.scale == 0.0) return q;

  const int s = q.max_level();
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double x = std::abs(g[j]) / q.scale * s;
    const double base = std::floor(x);
    int level = static_cast<int>(base) + (rng.uniform() < x - base ? 1 : 0);
    level = std::min(level, s);
    q.levels[j] = static_cast<std::int8_t>(g[j] < 0.0 ? -level : level);
  }
  return q;
}

ParamVector dequantize(const QuantizedGrad& q) {
  ParamVector out(q.levels.size(), 0.0);
  if (q.scale == 0.0) return out;
  const double s = q.max_level();
  for (std::size_t j = 0; j < q.levels.size(); ++j) out[j] = q.levels[j] * q.scale / s;
  return out;
}

SyncOutcome apply_sync(const SyncStrategy& strategy, AdaptiveControllerState* controller,
                       std::span<WorkerState> workers, std::span<const ParamVector> grads, const StepClock& clock,
                       double lr, std::size_t bytes_per_scalar) {
  if (workers.empty()) throw UsageError("apply_sync: no workers");
  if (workers.size() != grads.size()) throw UsageError("apply_sync: workers and gradients are not aligned");
  const bool adaptive = std::holds_alternative<AdaptivePeriod>(strategy);
  if (adaptive && controller == nullptr) throw UsageError("adaptive strategy needs a controller");
  const std::size_t dim = workers.front().params.size();

  SyncOutcome outcome;
  outcome.period = current_period(strategy, controller, clock);

  if (const auto* quantized = std::get_if<Quantized>(&strategy)) {
    std::vector<ParamVector> decoded;
    decoded.reserve(workers.size());
    std::size_t payload = 0;
    for (std::size_t i = 0; i < workers.size(); ++i) {
      const QuantizedGrad q = quantize(grads[i], quantized->bits, workers[i].rng);
      payload = q.component_payload_bytes();
      // A single worker exchanges nothing, so its gradient is used as is.
      decoded.push_back(workers.size() == 1 ? grads[i] : dequantize(q));
    }
    const ParamVector mean_grad = mean_vectors(std::span<const ParamVector>(decoded));
    for (auto& w : workers) sgd_step(w.params, mean_grad, w.momentum, lr, clock.k);
    const auto ptrs = param_ptrs(workers);
    outcome.variance_before_sync = compute_sk(std::span<const ParamVector* const>(ptrs));
    // Levels go through the main allreduce; the scale travels as one scalar.
    outcome.event =
        SyncEvent{clock.k, outcome.variance_before_sync, 1, 1, payload + bytes_per_scalar, payload, true};
    return outcome;
  }

  for (std::size_t i = 0; i < workers.size(); ++i) {
    sgd_step(workers[i].params, grads[i], workers[i].momentum, lr, clock.k);
  }
  const auto ptrs = param_ptrs(workers);
  const std::span<const ParamVector* const> params(ptrs);
  outcome.variance_before_sync = compute_sk(params);

  const bool sync = should_sync(strategy, controller, clock);
  if (!sync) {
    if (adaptive) controller->cnt += 1;
    return outcome;
  }

  const ParamVector averaged = average_params(params);
  for (auto& w : workers) w.params = averaged;

  SyncEvent event;
  event.k = clock.k;
  event.s_k = outcome.variance_before_sync;
  event.period_before = outcome.period;
  event.period_after = outcome.period;
  event.payload_bytes = dim * bytes_per_scalar;
  event.bytes_per_worker = event.payload_bytes;

  if (const auto* ad = std::get_if<AdaptivePeriod>(&strategy)) {
    event.scalar_allreduce = true;
    event.bytes_per_worker += bytes_per_scalar;
    if (in_warmup(*ad, clock)) {
      controller->cnt = 0;
    } else {
      *controller = adapt_period(*controller, event.s_k, lr, clock.k, ad->ks_iterations(clock.total_iterations),
                                 ad->band_low, ad->band_high);
      event.period_after = controller->p;
    }
  }
  outcome.event = event;
  return outcome;
}

}  // namespace pavg
