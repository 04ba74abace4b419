#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sharpnet/brelu.hpp"
#include "sharpnet/encoding.hpp"
#include "sharpnet/tensor.hpp"

namespace sharpnet {

enum class LayerKind {
  Dense,
  Conv2d,
  MaxPool,
  Flatten,
  BatchNorm,
  SpikingBrelu,
  SoftmaxDecode,
};

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int units = 0;                    // dense
  int kernel_h = 0, kernel_w = 0;   // conv2d
  int filters = 0;                  // conv2d
  int pool_h = 0, pool_w = 0;       // maxpool
  int stride_h = 1, stride_w = 1;   // conv2d / maxpool
  Padding padding = Padding::Same;  // conv2d
  float bn_epsilon = 1e-3f;         // batchnorm
  float bn_momentum = 0.99f;        // batchnorm
  bool trainable = true;

  static LayerSpec dense(int units);
  static LayerSpec conv2d(int kernel, int filters, int stride = 1,
                          Padding padding = Padding::Same);
  static LayerSpec maxpool(int pool, int stride = 0); // stride 0 = pool
  static LayerSpec flatten();
  static LayerSpec batchnorm(float epsilon = 1e-3f, float momentum = 0.99f);
  static LayerSpec spiking_brelu();
  static LayerSpec softmax_decode();
};

/// Batch normalization state: y = gamma * (x - mu) / (sigma + epsilon) + beta_shift,
/// where sigma is the standard deviation (batch stats in train mode, moving
/// averages in inference mode).
struct BatchNormParams {
  Tensor gamma, beta_shift, moving_mu, moving_sigma;
  float epsilon = 1e-3f;
  float momentum = 0.99f;
};

struct Layer {
  LayerSpec spec;
  std::vector<int> input_shape;   // per-sample
  std::vector<int> output_shape;  // per-sample
  Tensor weights, bias;           // dense / conv2d
  BatchNormParams bn;             // batchnorm
  float sharpness = 0.0f;         // spiking_brelu, in [0,1]
};

enum class Mode { Train, Inference };

struct ForwardResult {
  Mode mode = Mode::Inference;
  bool forced_spiking = false;
  Tensor input;                    // the batch the pass consumed
  std::vector<Tensor> activations; // output of every layer, in order

  struct BnCache {
    std::vector<float> mean, sigma, denom; // per feature, train mode
  };
  std::vector<BnCache> bn_cache; // indexed by layer

  const Tensor& output() const { return activations.back(); }
};

struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
};

/// Sequential network. Exclusively owned while training; safe to share
/// read-only for inference afterwards (inference mutates nothing, train-mode
/// forward only updates batch-norm moving averages).
class Network {
public:
  Network() = default;

  /// Validates the whole shape chain eagerly and initializes parameters
  /// (He-uniform weights, zero biases, identity batch norm).
  static Network build(std::vector<int> input_shape, std::vector<LayerSpec> specs,
                       NHotCode nhot, uint64_t seed);

  /// Runs every layer and returns all activations. Train mode uses batch
  /// statistics in batch-norm layers and updates their moving averages;
  /// inference mode reads the moving averages and mutates nothing.
  /// forced_spiking evaluates every spiking layer at s=1 without touching
  /// the stored sharpness.
  ForwardResult forward(const Tensor& batch, Mode mode, bool forced_spiking = false);

  /// Inference-mode forward usable on a shared, immutable network.
  ForwardResult infer(const Tensor& batch, bool forced_spiking = false) const;

  /// Accumulates parameter gradients from a train-mode forward result.
  /// loss_grad is d loss / d network output.
  void backward(ForwardResult& fr, const Tensor& loss_grad);

  void zero_grads();
  std::vector<ParamRef> trainable_parameters();

  const std::vector<int>& input_shape() const { return input_shape_; }
  const NHotCode& nhot() const { return nhot_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// Raw indices of spiking_brelu layers in bottom-up order.
  const std::vector<int>& spiking_layers() const { return spiking_layers_; }
  int num_spiking_layers() const { return static_cast<int>(spiking_layers_.size()); }

  /// s for the k-th spiking layer (bottom-up).
  float sharpness_of(int spiking_index) const;
  std::vector<float> sharpness_values() const;
  bool fully_sharpened() const;

  /// Sets sharpness of the layer at raw index layer_index. The layer must be
  /// a spiking_brelu and s must not decrease.
  void set_layer_sharpness(int layer_index, float s);

  void save(const std::string& path) const;
  static Network load(const std::string& path);

private:
  ForwardResult run_forward(const Tensor& batch, Mode mode, bool forced_spiking,
                            bool update_moving_stats) const;

  std::vector<int> input_shape_;
  NHotCode nhot_;
  std::vector<Layer> layers_;
  std::vector<int> spiking_layers_;
};

} // namespace sharpnet
