#pragma once

#include <string>
#include <vector>

#include "sharpnet/error.hpp"

namespace sharpnet {

enum class SharpenerMode { Waiting, Sharpening, Done };

const char* sharpener_mode_name(SharpenerMode mode);

/// Pure state machine driving sharpness over training. Layers sharpen
/// bottom-up, one at a time; the controller watches the training loss to
/// decide when to sharpen and when to pause. Replaying a recorded loss
/// sequence reproduces the identical trajectory.
struct SharpenerState {
  SharpenerMode mode = SharpenerMode::Waiting;
  int current_layer = 0;                // index into spiking layers, bottom-up
  float rate = 0.25f;                   // sharpness per layer per epoch, (0,1]
  std::vector<float> layer_sharpness;   // authoritative per-layer s values
  std::vector<double> loss_history;     // end-of-epoch training losses
  float halt_threshold = 0.10f;         // fractional loss rise that pauses sharpening
  float improvement_threshold = 0.01f;  // fractional drop that counts as improvement
  int resume_patience = 2;              // stagnant epochs before sharpening resumes
  int initial_wait_epochs = 0;          // epochs of plain training before any sharpening
  int max_total_epochs = 0;             // 0 = uncapped; otherwise forces completion
  bool uniform = false;                 // sharpen all layers together instead of bottom-up
  int epoch = 0;                        // epochs completed
  int epochs_since_improvement = 0;

  static SharpenerState make(int num_spiking_layers, float rate, int max_total_epochs,
                             int initial_wait_epochs, bool uniform = false);

  bool all_sharp() const;
  /// Epochs of sharpening still required to bring every layer to s=1.
  double epochs_of_sharpening_left() const;
};

/// End-of-epoch transition. Applies the halt / resume rules, advances the
/// current layer when it reached s=1, and enforces the max_total_epochs cap
/// by refusing to wait when the remaining budget is only enough to finish
/// sharpening. Call exactly once per epoch; a Done state is a no-op.
SharpenerState adaptive_epoch_transition(SharpenerState state, double epoch_loss);

/// End-of-batch increment while in sharpening mode: rate / batches_per_epoch
/// added to the current layer (all layers when uniform), clamped at 1.
/// Returns the per-layer delta actually applied; zero everywhere when the
/// mode is not Sharpening.
std::vector<float> batch_increment(SharpenerState& state, int batches_per_epoch);

/// Pre-programmed bottom-up schedule: after start_epoch, layer k ramps
/// linearly from 0 to 1 during epochs [start + k*duration, start + (k+1)*duration),
/// interpolated per batch.
struct ProgrammedSchedule {
  int start_epoch = 0;
  int duration_per_layer = 1;

  std::vector<float> targets(int num_layers, int epoch, int batch,
                             int batches_per_epoch) const;
};

} // namespace sharpnet
