#pragma once

#include <cstddef>
#include <vector>

#include "periodavg/numkit.hpp"

namespace pavg {

/// Heavy-ball momentum: v <- mu*v + g, w <- w - lr*v.
struct MomentumState {
  ParamVector buffer;
  double coefficient = 0.0;
};

MomentumState make_momentum(std::size_t dim, double coefficient);

enum class WarmupMode { kNone, kLinear };

/// Epoch-indexed step schedule with optional linear warmup.
struct LrSchedule {
  double base_lr = 0.1;
  std::vector<int> milestones;  // strictly ascending epochs
  double decay_factor = 0.1;
  int warmup_epochs = 0;
  WarmupMode warmup_mode = WarmupMode::kNone;
};

void validate(const LrSchedule& schedule);

/// Learning rate in effect during `epoch`. Linear warmup ramps from
/// base/warmup_epochs to base; afterwards base * decay^(#milestones <= epoch).
double lr_at(const LrSchedule& schedule, int epoch);

/// One local update. Throws NumericError (naming `iteration`) if the
/// gradient is not finite.
void sgd_step(ParamVector& w, const ParamVector& g, MomentumState& state, double lr, long iteration = -1);

}  // namespace pavg
