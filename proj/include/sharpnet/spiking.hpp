#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sharpnet/data.hpp"
#include "sharpnet/deploy.hpp"

namespace sharpnet {

/// Binary activation pattern of one layer.
struct SpikeVector {
  int width = 0;
  std::vector<uint8_t> fired; // entries in {0,1}

  int count_fired() const;
};

/// Synaptic-event accounting for one inference pass.
struct OpStats {
  struct LayerStats {
    std::string kind;
    int64_t neurons = 0;    // outputs of the layer
    int64_t fired = 0;      // outputs that spiked
    int64_t events = 0;     // weight accumulations triggered by nonzero inputs
  };
  std::vector<LayerStats> per_layer;

  int64_t total_events() const;
  int64_t total_neurons() const;
  int64_t total_fired() const;
  void add(const OpStats& other);
  void write_csv(const std::string& path) const;
};

enum class EvalPath {
  EventDriven, // accumulate only the weight rows of fired inputs
  DenseMatrix, // full multiply against the {0,1} activation vector
};

struct InferResult {
  int predicted = 0;
  SpikeVector output;
  OpStats stats;
  std::vector<float> output_preactivations; // final layer, before threshold
};

/// Single-timestep inference. The first layer consumes the real-valued
/// input; all subsequent communication is binary. Both paths accumulate
/// inputs in ascending index order, so their pre-activations are
/// bit-identical. Stateless and reentrant.
InferResult infer(const SpikingModel& model, const std::vector<float>& input,
                  EvalPath path = EvalPath::EventDriven);

struct EvalResult {
  double accuracy = 0.0;
  int correct = 0;
  int total = 0;
  OpStats stats;
  std::vector<int> predictions;
};

EvalResult batch_evaluate(const SpikingModel& model, const Dataset& data,
                          EvalPath path = EvalPath::EventDriven);

} // namespace sharpnet
