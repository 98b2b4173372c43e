#pragma once

#include <algorithm>

#include "g2s/common.hpp"

namespace g2s {

struct ScheduleConfig {
  double decay_factor = 0.2;
  int patience = 3;
  double min_lr = 1e-6;

  void validate() const {
    if (decay_factor <= 0.0 || decay_factor >= 1.0) {
      throw ContractError("schedule: decay factor must lie in (0, 1)");
    }
    if (patience < 1) throw ContractError("schedule: patience must be >= 1");
    if (min_lr < 0.0) throw ContractError("schedule: min_lr must be nonnegative");
  }
};

struct LrScheduleState {
  double best_f1 = -1.0;
  int since_improvement = 0;
  double lr = 5e-4;
};

// Reduce-on-plateau: a strict improvement resets the counter; after
// `patience` epochs without one the rate decays once and the counter resets.
// Returns true when the rate was decayed.
inline bool update_lr_on_plateau(LrScheduleState& state, double val_f1,
                                 const ScheduleConfig& cfg) {
  cfg.validate();
  if (val_f1 < 0.0 || val_f1 > 1.0) {
    throw ContractError("schedule: validation F1 must lie in [0, 1]");
  }
  if (val_f1 > state.best_f1) {
    state.best_f1 = val_f1;
    state.since_improvement = 0;
    return false;
  }
  state.since_improvement += 1;
  if (state.since_improvement >= cfg.patience) {
    state.lr = std::max(state.lr * cfg.decay_factor, cfg.min_lr);
    state.since_improvement = 0;
    return true;
  }
  return false;
}

}  // namespace g2s
