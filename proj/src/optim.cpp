#include "periodavg/optim.hpp"

#include <cmath>
#include <string>

#include "periodavg/errors.hpp"

namespace pavg {

MomentumState make_momentum(std::size_t dim, double coefficient) {
  if (!(coefficient >= 0.0 && coefficient < 1.0)) throw UsageError("momentum coefficient must be in [0, 1)");
  return MomentumState{ParamVector(dim, 0.0), coefficient};
}

void validate(const LrSchedule& schedule) {
  if (!(schedule.base_lr > 0.0) || !std::isfinite(schedule.base_lr)) throw UsageError("base learning rate must be > 0");
  if (!(schedule.decay_factor > 0.0 && schedule.decay_factor < 1.0)) {
    throw UsageError("learning-rate decay factor must be in (0, 1)");
  }
  if (schedule.warmup_epochs < 0) throw UsageError("warmup_epochs must be >= 0");
  for (std::size_t i = 0; i < schedule.milestones.size(); ++i) {
    if (schedule.milestones[i] < 0) throw UsageError("learning-rate milestones must be >= 0");
    if (i > 0 && schedule.milestones[i] <= schedule.milestones[i - 1]) {
      throw UsageError("learning-rate milestones must be strictly ascending");
    }
  }
}

double lr_at(const LrSchedule& schedule, int epoch) {
  if (epoch < 0) throw UsageError("lr_at: epoch must be >= 0");
  if (schedule.warmup_mode == WarmupMode::kLinear && epoch < schedule.warmup_epochs) {
    return schedule.base_lr * static_cast<double>(epoch + 1) / static_cast<double>(schedule.warmup_epochs);
  }
  double lr = schedule.base_lr;
  for (int milestone : schedule.milestones) {
    if (milestone <= epoch) lr *= schedule.decay_factor;
  }
  return lr;
}

void sgd_step(ParamVector& w, const ParamVector& g, MomentumState& state, double lr, long iteration) {
  if (w.size() != g.size() || state.buffer.size() != w.size()) {
    throw DimensionError("sgd_step: parameter, gradient and momentum lengths differ");
  }
  if (!(lr > 0.0)) throw UsageError("sgd_step: learning rate must be positive");
  if (!g.all_finite()) {
    throw NumericError("non-finite gradient at iteration " + std::to_string(iteration));
  }
  const double mu = state.coefficient;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v = mu * state.buffer[i] + g[i];
    state.buffer[i] = v;
    w[i] -= lr * v;
  }
}

}  // namespace pavg
