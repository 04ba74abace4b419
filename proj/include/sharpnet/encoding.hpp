#pragma once

#include <set>
#include <vector>

#include "sharpnet/tensor.hpp"

namespace sharpnet {

/// Redundant output code: n output neurons per class, laid out as
/// contiguous blocks [class*n, (class+1)*n).
struct NHotCode {
  int num_classes = 0;
  int n = 1;

  NHotCode() = default;
  NHotCode(int classes, int redundancy) : num_classes(classes), n(redundancy) {
    if (classes < 1 || redundancy < 1)
      throw ValidationError("n-hot code needs num_classes >= 1 and n >= 1");
  }

  int width() const { return num_classes * n; }
  int class_of(int neuron) const { return neuron / n; }
};

/// Sum each class block: [batch, n*C] -> [batch, C]. The summing layer has
/// no trainable parameters; during training its output feeds the softmax
/// cross-entropy loss.
Tensor population_logits(const Tensor& activations, const NHotCode& code);

/// Gradient of population_logits: broadcast each class gradient back over
/// its block, returning d loss / d activations of shape [batch, n*C].
Tensor population_logits_backward(const Tensor& upstream, const NHotCode& code);

/// Argmax of per-class sums; ties go to the lowest class index. Equivalent
/// to softmax-then-argmax since softmax preserves the maximum.
std::vector<int> decode_prediction(const Tensor& activations, const NHotCode& code);

class Network;
struct Dataset;

/// Classes whose entire n-block never fires across the dataset. Expects a
/// fully sharpened network (binary output activations).
std::set<int> dead_output_classes(const Network& net, const Dataset& data);

} // namespace sharpnet
