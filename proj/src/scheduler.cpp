#include "sharpnet/scheduler.hpp"

#include <algorithm>
#include <cmath>

namespace sharpnet {

const char* sharpener_mode_name(SharpenerMode mode) {
  switch (mode) {
    case SharpenerMode::Waiting: return "waiting";
    case SharpenerMode::Sharpening: return "sharpening";
    case SharpenerMode::Done: return "done";
  }
  return "?";
}

SharpenerState SharpenerState::make(int num_spiking_layers, float rate,
                                    int max_total_epochs, int initial_wait_epochs,
                                    bool uniform) {
  if (num_spiking_layers < 1)
    throw ValidationError("sharpener needs at least one spiking layer");
  if (!(rate > 0.0f && rate <= 1.0f))
    throw ValidationError("sharpening rate must lie in (0,1], got " + std::to_string(rate));
  SharpenerState s;
  s.rate = rate;
  s.layer_sharpness.assign(static_cast<size_t>(num_spiking_layers), 0.0f);
  s.max_total_epochs = max_total_epochs;
  s.initial_wait_epochs = initial_wait_epochs;
  s.uniform = uniform;
  return s;
}

bool SharpenerState::all_sharp() const {
  return std::all_of(layer_sharpness.begin(), layer_sharpness.end(),
                     [](float s) { return s >= 1.0f; });
}

double SharpenerState::epochs_of_sharpening_left() const {
  double remaining = 0.0;
  if (uniform) {
    float worst = 0.0f;
    for (float s : layer_sharpness) worst = std::max(worst, 1.0f - s);
    remaining = worst;
  } else {
    for (float s : layer_sharpness) remaining += 1.0 - s;
  }
  return remaining / rate;
}

SharpenerState adaptive_epoch_transition(SharpenerState state, double epoch_loss) {
  if (state.mode == SharpenerMode::Done) {
    state.epoch += 1;
    state.loss_history.push_back(epoch_loss);
    return state;
  }

  const bool had_previous = !state.loss_history.empty();
  const double previous = had_previous ? state.loss_history.back() : epoch_loss;
  state.loss_history.push_back(epoch_loss);
  state.epoch += 1;

  // layer completion is checked before any loss logic
  if (!state.uniform) {
    while (state.current_layer < static_cast<int>(state.layer_sharpness.size()) &&
           state.layer_sharpness[static_cast<size_t>(state.current_layer)] >= 1.0f)
      state.current_layer += 1;
  }
  if (state.all_sharp()) {
    state.mode = SharpenerMode::Done;
    return state;
  }

  // while the epoch budget is only just enough to finish, waiting is no
  // longer an option
  bool force_sharpen = false;
  if (state.max_total_epochs > 0) {
    const double remaining_budget = state.max_total_epochs - state.epoch;
    force_sharpen = remaining_budget <= state.epochs_of_sharpening_left() + 1.0;
  }

  if (state.epoch < state.initial_wait_epochs && !force_sharpen) {
    state.mode = SharpenerMode::Waiting;
    state.epochs_since_improvement = 0;
    return state;
  }

  switch (state.mode) {
    case SharpenerMode::Sharpening: {
      if (!force_sharpen && had_previous &&
          epoch_loss > (1.0 + state.halt_threshold) * previous) {
        state.mode = SharpenerMode::Waiting;
        state.epochs_since_improvement = 0;
      }
      break;
    }
    case SharpenerMode::Waiting: {
      const bool improved =
          had_previous && epoch_loss <= (1.0 - state.improvement_threshold) * previous;
      if (improved)
        state.epochs_since_improvement = 0;
      else
        state.epochs_since_improvement += 1;
      if (force_sharpen || state.epochs_since_improvement >= state.resume_patience) {
        state.mode = SharpenerMode::Sharpening;
        state.epochs_since_improvement = 0;
      }
      break;
    }
    case SharpenerMode::Done:
      break;
  }
  return state;
}

std::vector<float> batch_increment(SharpenerState& state, int batches_per_epoch) {
  std::vector<float> delta(state.layer_sharpness.size(), 0.0f);
  if (state.mode != SharpenerMode::Sharpening) return delta;
  if (batches_per_epoch < 1)
    throw ValidationError("batches_per_epoch must be >= 1");
  const float step = state.rate / static_cast<float>(batches_per_epoch);

  if (state.uniform) {
    for (size_t k = 0; k < state.layer_sharpness.size(); ++k) {
      const float applied = std::min(step, 1.0f - state.layer_sharpness[k]);
      if (applied > 0.0f) {
        state.layer_sharpness[k] += applied;
        delta[k] = applied;
      }
    }
  } else {
    const size_t k = static_cast<size_t>(state.current_layer);
    if (k < state.layer_sharpness.size()) {
      const float applied = std::min(step, 1.0f - state.layer_sharpness[k]);
      if (applied > 0.0f) {
        state.layer_sharpness[k] += applied;
        delta[k] = applied;
      }
      // a completed layer hands off immediately so no batches are wasted
      while (state.current_layer < static_cast<int>(state.layer_sharpness.size()) &&
             state.layer_sharpness[static_cast<size_t>(state.current_layer)] >= 1.0f)
        state.current_layer += 1;
    }
  }
  return delta;
}

std::vector<float> ProgrammedSchedule::targets(int num_layers, int epoch, int batch,
                                               int batches_per_epoch) const {
  if (start_epoch < 0 || duration_per_layer < 1)
    throw ValidationError("programmed schedule needs start_epoch >= 0 and duration_per_layer >= 1");
  if (batches_per_epoch < 1) throw ValidationError("batches_per_epoch must be >= 1");
  std::vector<float> t(static_cast<size_t>(num_layers), 0.0f);
  const double now = epoch + static_cast<double>(batch) / batches_per_epoch;
  for (int k = 0; k < num_layers; ++k) {
    const double ramp_start = start_epoch + static_cast<double>(k) * duration_per_layer;
    const double s = (now - ramp_start) / duration_per_layer;
    t[static_cast<size_t>(k)] = static_cast<float>(std::clamp(s, 0.0, 1.0));
  }
  return t;
}

} // namespace sharpnet
