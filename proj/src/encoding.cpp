#include "sharpnet/encoding.hpp"

#include <algorithm>

#include "sharpnet/data.hpp"
#include "sharpnet/network.hpp"

namespace sharpnet {

namespace {

void check_width(const Tensor& activations, const NHotCode& code) {
  if (activations.rank() != 2)
    throw DimensionError("population code expects rank-2 activations, got " + activations.shape_str());
  if (activations.dim(1) != code.width())
    throw DimensionError("activation width " + std::to_string(activations.dim(1)) +
                         " does not match n-hot width " + std::to_string(code.width()) + " (" +
                         std::to_string(code.num_classes) + " classes x n=" + std::to_string(code.n) + ")");
}

} // namespace

Tensor population_logits(const Tensor& activations, const NHotCode& code) {
  check_width(activations, code);
  const int batch = activations.dim(0);
  Tensor out({batch, code.num_classes});
  const float* a = activations.data();
  float* y = out.data();
  for (int i = 0; i < batch; ++i) {
    const float* row = a + static_cast<size_t>(i) * code.width();
    float* dst = y + static_cast<size_t>(i) * code.num_classes;
    for (int c = 0; c < code.num_classes; ++c) {
      float sum = 0.0f;
      for (int j = 0; j < code.n; ++j) sum += row[c * code.n + j];
      dst[c] = sum;
    }
  }
  return out;
}

Tensor population_logits_backward(const Tensor& upstream, const NHotCode& code) {
  if (upstream.rank() != 2 || upstream.dim(1) != code.num_classes)
    throw DimensionError("population upstream shape " + upstream.shape_str() + " does not match [batch x classes]");
  const int batch = upstream.dim(0);
  Tensor grad({batch, code.width()});
  float* g = grad.data();
  const float* up = upstream.data();
  for (int i = 0; i < batch; ++i) {
    const float* src = up + static_cast<size_t>(i) * code.num_classes;
    float* dst = g + static_cast<size_t>(i) * code.width();
    for (int c = 0; c < code.num_classes; ++c)
      for (int j = 0; j < code.n; ++j) dst[c * code.n + j] = src[c];
  }
  return grad;
}

std::vector<int> decode_prediction(const Tensor& activations, const NHotCode& code) {
  check_width(activations, code);
  const int batch = activations.dim(0);
  std::vector<int> pred(static_cast<size_t>(batch));
  const float* a = activations.data();
  for (int i = 0; i < batch; ++i) {
    const float* row = a + static_cast<size_t>(i) * code.width();
    int best_class = 0;
    float best_sum = 0.0f;
    for (int c = 0; c < code.num_classes; ++c) {
      float sum = 0.0f;
      for (int j = 0; j < code.n; ++j) sum += row[c * code.n + j];
      if (c == 0 || sum > best_sum) {
        best_sum = sum;
        best_class = c;
      }
    }
    pred[static_cast<size_t>(i)] = best_class;
  }
  return pred;
}

std::set<int> dead_output_classes(const Network& net, const Dataset& data) {
  const NHotCode& code = net.nhot();
  // the layer feeding the population sums carries the output activations
  int output_layer = static_cast<int>(net.layers().size()) - 1;
  if (net.layers().back().spec.kind == LayerKind::SoftmaxDecode) --output_layer;

  std::vector<bool> ever_fired(static_cast<size_t>(code.width()), false);
  const int batch_size = 256;
  for (int start = 0; start < data.count(); start += batch_size) {
    const int n = std::min(batch_size, data.count() - start);
    ForwardResult fr = net.infer(data.batch_images(start, n));
    const Tensor& acts = fr.activations[static_cast<size_t>(output_layer)];
    const float* a = acts.data();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < code.width(); ++j)
        if (a[static_cast<size_t>(i) * code.width() + j] > 0.0f)
          ever_fired[static_cast<size_t>(j)] = true;
  }

  std::set<int> dead;
  for (int c = 0; c < code.num_classes; ++c) {
    bool alive = false;
    for (int j = c * code.n; j < (c + 1) * code.n; ++j)
      if (ever_fired[static_cast<size_t>(j)]) alive = true;
    if (!alive) dead.insert(c);
  }
  return dead;
}

} // namespace sharpnet
