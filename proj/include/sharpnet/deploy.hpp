#pragma once

#include <string>
#include <vector>

#include "sharpnet/encoding.hpp"
#include "sharpnet/network.hpp"

namespace sharpnet {

/// Signed fixed-point format Qm.n: m integer bits including the sign bit,
/// n fraction bits. Representable range [-2^(m-1), 2^(m-1) - 2^-n] on a
/// grid of step 2^-n.
struct QFormat {
  int integer_bits = 4;
  int fraction_bits = 16;

  QFormat() = default;
  QFormat(int m, int n);

  static QFormat parse(const std::string& text); // "Q4.8"
  std::string name() const;

  double step() const;
  double min_value() const;
  double max_value() const;

  /// Round-to-nearest multiple of the step (ties away from zero),
  /// saturating at the range bounds. Idempotent.
  float quantize(float x) const;
};

struct QuantizationReport {
  struct Row {
    std::string tensor;
    int64_t count = 0;
    int64_t saturated = 0;
    float min_before = 0.0f, max_before = 0.0f;
  };
  std::vector<Row> rows;
  std::string format;

  int64_t total_saturated() const;
  void write_csv(const std::string& path) const;
};

/// Merges every batch-norm layer into the dense/conv layer immediately
/// before it and removes it: w' = w * (gamma / (sigma + eps)),
/// b' = (gamma / (sigma + eps)) * (b - mu) + beta. Uses the moving
/// statistics, so the network should be done training. Output is
/// unchanged up to float rounding.
Network fold_batchnorm(const Network& net);

/// Rounds every weight and bias onto the fixed-point grid. Activations and
/// arithmetic stay float32; the quantized values are exactly representable.
Network quantize_weights(const Network& net, const QFormat& q,
                         QuantizationReport* report = nullptr);

/// Framework-free description of a fully binarized network: each neuron
/// fires iff sum(w * input) + b >= threshold (0.5). Immutable once built.
struct SpikingModel {
  struct Layer {
    enum class Kind { Dense, Conv, MaxPool, Flatten } kind = Kind::Dense;
    // dense
    int in = 0, out = 0;
    // conv / maxpool geometry
    int in_h = 0, in_w = 0, cin = 0;
    int kernel_h = 0, kernel_w = 0, cout = 0;
    int pool_h = 0, pool_w = 0;
    int stride_h = 1, stride_w = 1;
    Padding padding = Padding::Same;
    int out_h = 0, out_w = 0;

    Tensor weights, bias;

    int64_t input_size() const;
    int64_t output_size() const;
  };

  int version = 1;
  std::vector<int> input_shape;
  std::string input_description = "real-valued inputs scaled to [0,1]";
  float threshold = 0.5f;
  NHotCode nhot;
  std::vector<Layer> layers;

  void save(const std::string& path) const;
  static SpikingModel load(const std::string& path);
};

/// Requires every spiking layer at s=1 and no residual batch-norm layers.
SpikingModel export_spiking(const Network& net);

} // namespace sharpnet
