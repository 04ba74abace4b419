#include "sharpnet/network.hpp"

#include <cmath>
#include <numeric>

#include "container.hpp"
#include "sharpnet/rng.hpp"

namespace sharpnet {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::SpikingBrelu: return "spiking_brelu";
    case LayerKind::SoftmaxDecode: return "softmax_decode";
  }
  return "?";
}

LayerSpec LayerSpec::dense(int units) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::conv2d(int kernel, int filters, int stride, Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::Conv2d;
  s.kernel_h = s.kernel_w = kernel;
  s.filters = filters;
  s.stride_h = s.stride_w = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::maxpool(int pool, int stride) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool;
  s.pool_h = s.pool_w = pool;
  s.stride_h = s.stride_w = stride > 0 ? stride : pool;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  return s;
}

LayerSpec LayerSpec::batchnorm(float epsilon, float momentum) {
  LayerSpec s;
  s.kind = LayerKind::BatchNorm;
  s.bn_epsilon = epsilon;
  s.bn_momentum = momentum;
  return s;
}

LayerSpec LayerSpec::spiking_brelu() {
  LayerSpec s;
  s.kind = LayerKind::SpikingBrelu;
  return s;
}

LayerSpec LayerSpec::softmax_decode() {
  LayerSpec s;
  s.kind = LayerKind::SoftmaxDecode;
  return s;
}

namespace {

[[noreturn]] void build_error(int index, const LayerSpec& spec, const std::string& what) {
  throw DimensionError("layer " + std::to_string(index) + " (" + layer_kind_name(spec.kind) + "): " + what);
}

int64_t flat_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

} // namespace

Network Network::build(std::vector<int> input_shape, std::vector<LayerSpec> specs,
                       NHotCode nhot, uint64_t seed) {
  if (input_shape.empty()) throw DimensionError("network input shape must not be empty");
  for (int d : input_shape)
    if (d <= 0) throw DimensionError("network input shape has non-positive dimension");

  Network net;
  net.input_shape_ = std::move(input_shape);
  net.nhot_ = nhot;
  Rng rng(seed);

  std::vector<int> shape = net.input_shape_;
  for (size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& spec = specs[i];
    const int idx = static_cast<int>(i);
    Layer layer;
    layer.spec = spec;
    layer.input_shape = shape;

    switch (spec.kind) {
      case LayerKind::Dense: {
        if (shape.size() != 1)
          build_error(idx, spec, "expects flat input, got " + Tensor::shape_str(shape) +
                                     " (insert a flatten layer)");
        if (spec.units < 1) build_error(idx, spec, "needs units >= 1");
        const int in = shape[0];
        layer.weights = Tensor({in, spec.units});
        const float limit = std::sqrt(6.0f / static_cast<float>(in));
        for (auto& w : layer.weights.values()) w = rng.uniform(-limit, limit);
        layer.bias = Tensor({spec.units});
        shape = {spec.units};
        break;
      }
      case LayerKind::Conv2d: {
        if (shape.size() != 3)
          build_error(idx, spec, "expects HWC input, got " + Tensor::shape_str(shape));
        if (spec.kernel_h < 1 || spec.kernel_w < 1 || spec.filters < 1)
          build_error(idx, spec, "needs positive kernel size and filter count");
        const int cin = shape[2];
        ConvGeometry g;
        try {
          g = conv_geometry(shape[0], shape[1], spec.kernel_h, spec.kernel_w,
                            spec.stride_h, spec.stride_w, spec.padding);
        } catch (const Error& e) {
          build_error(idx, spec, e.what());
        }
        layer.weights = Tensor({spec.kernel_h, spec.kernel_w, cin, spec.filters});
        const float limit = std::sqrt(6.0f / static_cast<float>(spec.kernel_h * spec.kernel_w * cin));
        for (auto& w : layer.weights.values()) w = rng.uniform(-limit, limit);
        layer.bias = Tensor({spec.filters});
        shape = {g.out_h, g.out_w, spec.filters};
        break;
      }
      case LayerKind::MaxPool: {
        if (shape.size() != 3)
          build_error(idx, spec, "expects HWC input, got " + Tensor::shape_str(shape));
        if (spec.pool_h < 1 || spec.pool_w < 1) build_error(idx, spec, "needs positive pool size");
        if (spec.pool_h > shape[0] || spec.pool_w > shape[1])
          build_error(idx, spec, "pool " + std::to_string(spec.pool_h) + "x" + std::to_string(spec.pool_w) +
                                     " larger than input " + Tensor::shape_str(shape));
        shape = {(shape[0] - spec.pool_h) / spec.stride_h + 1,
                 (shape[1] - spec.pool_w) / spec.stride_w + 1, shape[2]};
        break;
      }
      case LayerKind::Flatten: {
        shape = {static_cast<int>(flat_size(shape))};
        break;
      }
      case LayerKind::BatchNorm: {
        if (spec.bn_epsilon <= 0.0f) build_error(idx, spec, "epsilon must be > 0");
        const int features = shape.back();
        layer.bn.gamma = Tensor::full({features}, 1.0f);
        layer.bn.beta_shift = Tensor({features});
        layer.bn.moving_mu = Tensor({features});
        layer.bn.moving_sigma = Tensor::full({features}, 1.0f);
        layer.bn.epsilon = spec.bn_epsilon;
        layer.bn.momentum = spec.bn_momentum;
        break;
      }
      case LayerKind::SpikingBrelu: {
        layer.sharpness = 0.0f;
        break;
      }
      case LayerKind::SoftmaxDecode: {
        if (i + 1 != specs.size())
          build_error(idx, spec, "must be the final layer");
        if (shape.size() != 1 || shape[0] != nhot.width())
          build_error(idx, spec, "expects flat input of width " + std::to_string(nhot.width()) +
                                     " (" + std::to_string(nhot.num_classes) + " classes x n=" +
                                     std::to_string(nhot.n) + "), got " + Tensor::shape_str(shape));
        shape = {nhot.num_classes};
        break;
      }
    }

    layer.output_shape = shape;
    if (spec.kind == LayerKind::SpikingBrelu)
      net.spiking_layers_.push_back(idx);
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

// ---- forward ----------------------------------------------------------------

namespace {

std::vector<int> with_batch(int batch, const std::vector<int>& per_sample) {
  std::vector<int> s;
  s.reserve(per_sample.size() + 1);
  s.push_back(batch);
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

void add_bias_rows(Tensor& t, const Tensor& bias) {
  const int width = bias.dim(0);
  const int64_t rows = t.size() / width;
  float* p = t.data();
  const float* b = bias.data();
  for (int64_t r = 0; r < rows; ++r, p += width)
    for (int j = 0; j < width; ++j) p[j] += b[j];
}

} // namespace

ForwardResult Network::run_forward(const Tensor& batch, Mode mode,
                                   bool forced_spiking, bool /*unused*/) const {
  if (batch.rank() != static_cast<int>(input_shape_.size()) + 1)
    throw DimensionError("batch rank " + std::to_string(batch.rank()) + " does not match input shape " +
                         Tensor::shape_str(input_shape_) + " plus batch dimension");
  for (size_t d = 0; d < input_shape_.size(); ++d)
    if (batch.dim(static_cast<int>(d) + 1) != input_shape_[d])
      throw DimensionError("batch shape " + batch.shape_str() + " does not match network input " +
                           Tensor::shape_str(input_shape_));

  const int batch_size = batch.dim(0);
  ForwardResult fr;
  fr.mode = mode;
  fr.forced_spiking = forced_spiking;
  fr.input = batch;
  fr.activations.reserve(layers_.size());
  fr.bn_cache.resize(layers_.size());

  const Tensor* x = &fr.input;
  for (size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    Tensor y;
    switch (layer.spec.kind) {
      case LayerKind::Dense: {
        y = matmul(*x, layer.weights);
        add_bias_rows(y, layer.bias);
        break;
      }
      case LayerKind::Conv2d: {
        y = conv2d(*x, layer.weights, layer.spec.stride_h, layer.spec.stride_w, layer.spec.padding);
        add_bias_rows(y, layer.bias);
        break;
      }
      case LayerKind::MaxPool: {
        y = maxpool2d(*x, layer.spec.pool_h, layer.spec.pool_w, layer.spec.stride_h, layer.spec.stride_w);
        break;
      }
      case LayerKind::Flatten: {
        y = x->reshaped(with_batch(batch_size, layer.output_shape));
        break;
      }
      case LayerKind::BatchNorm: {
        const int features = layer.input_shape.back();
        const int64_t reduce = x->size() / features;
        y = Tensor(x->shape());
        const float* in = x->data();
        float* out = y.data();
        const float* gamma = layer.bn.gamma.data();
        const float* beta = layer.bn.beta_shift.data();

        if (mode == Mode::Train) {
          auto& cache = fr.bn_cache[i];
          cache.mean.resize(static_cast<size_t>(features));
          cache.sigma.resize(static_cast<size_t>(features));
          cache.denom.resize(static_cast<size_t>(features));
          std::vector<double> sum(static_cast<size_t>(features), 0.0);
          std::vector<double> sq(static_cast<size_t>(features), 0.0);
          for (int64_t r = 0; r < reduce; ++r) {
            const float* row = in + r * features;
            for (int j = 0; j < features; ++j) {
              sum[static_cast<size_t>(j)] += row[j];
              sq[static_cast<size_t>(j)] += static_cast<double>(row[j]) * row[j];
            }
          }
          for (int j = 0; j < features; ++j) {
            const double mu = sum[static_cast<size_t>(j)] / static_cast<double>(reduce);
            double var = sq[static_cast<size_t>(j)] / static_cast<double>(reduce) - mu * mu;
            if (var < 0.0) var = 0.0;
            const float sigma = static_cast<float>(std::sqrt(var));
            cache.mean[static_cast<size_t>(j)] = static_cast<float>(mu);
            cache.sigma[static_cast<size_t>(j)] = sigma;
            cache.denom[static_cast<size_t>(j)] = sigma + layer.bn.epsilon;
          }
          for (int64_t r = 0; r < reduce; ++r) {
            const float* row = in + r * features;
            float* dst = out + r * features;
            for (int j = 0; j < features; ++j)
              dst[j] = gamma[j] * ((row[j] - cache.mean[static_cast<size_t>(j)]) /
                                   cache.denom[static_cast<size_t>(j)]) + beta[j];
          }
        } else {
          const float* mu = layer.bn.moving_mu.data();
          const float* sg = layer.bn.moving_sigma.data();
          for (int64_t r = 0; r < reduce; ++r) {
            const float* row = in + r * features;
            float* dst = out + r * features;
            for (int j = 0; j < features; ++j)
              dst[j] = gamma[j] * ((row[j] - mu[j]) / (sg[j] + layer.bn.epsilon)) + beta[j];
          }
        }
        break;
      }
      case LayerKind::SpikingBrelu: {
        const Sharpness sh(forced_spiking ? 1.0f : layer.sharpness);
        y = brelu_forward(*x, sh);
        break;
      }
      case LayerKind::SoftmaxDecode: {
        y = population_logits(*x, nhot_);
        break;
      }
    }
    fr.activations.push_back(std::move(y));
    x = &fr.activations.back();
  }
  return fr;
}

ForwardResult Network::forward(const Tensor& batch, Mode mode, bool forced_spiking) {
  ForwardResult fr = run_forward(batch, mode, forced_spiking, true);
  if (mode == Mode::Train) {
    // moving averages are the only state a train-mode pass updates
    for (size_t i = 0; i < layers_.size(); ++i) {
      Layer& layer = layers_[i];
      if (layer.spec.kind != LayerKind::BatchNorm) continue;
      const auto& cache = fr.bn_cache[i];
      const float m = layer.bn.momentum;
      float* mu = layer.bn.moving_mu.data();
      float* sg = layer.bn.moving_sigma.data();
      for (size_t j = 0; j < cache.mean.size(); ++j) {
        mu[j] = m * mu[j] + (1.0f - m) * cache.mean[j];
        sg[j] = m * sg[j] + (1.0f - m) * cache.sigma[j];
      }
    }
  }
  return fr;
}

ForwardResult Network::infer(const Tensor& batch, bool forced_spiking) const {
  return run_forward(batch, Mode::Inference, forced_spiking, false);
}

// ---- backward ---------------------------------------------------------------

void Network::backward(ForwardResult& fr, const Tensor& loss_grad) {
  if (fr.mode != Mode::Train)
    throw StateError("backward requires a train-mode forward pass");
  if (fr.activations.size() != layers_.size())
    throw StateError("forward result does not match this network (got " +
                     std::to_string(fr.activations.size()) + " activations for " +
                     std::to_string(layers_.size()) + " layers)");
  if (loss_grad.shape() != fr.output().shape())
    throw DimensionError("loss gradient shape " + loss_grad.shape_str() +
                         " does not match network output " + fr.output().shape_str());

  Tensor current = loss_grad;
  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
    Layer& layer = layers_[static_cast<size_t>(i)];
    Tensor& input = i > 0 ? fr.activations[static_cast<size_t>(i) - 1] : fr.input;
    const bool need_input_grad = i > 0;
    const bool trainable = layer.spec.trainable;

    switch (layer.spec.kind) {
      case LayerKind::SoftmaxDecode: {
        current = population_logits_backward(current, nhot_);
        break;
      }
      case LayerKind::SpikingBrelu: {
        const Sharpness sh(fr.forced_spiking ? 1.0f : layer.sharpness);
        current = brelu_backward(input, sh, current);
        break;
      }
      case LayerKind::Flatten: {
        current = current.reshaped(input.shape());
        break;
      }
      case LayerKind::MaxPool: {
        input.drop_grad();
        input.ensure_grad();
        maxpool2d_backward(input, current, layer.spec.pool_h, layer.spec.pool_w,
                           layer.spec.stride_h, layer.spec.stride_w);
        current = Tensor(input.shape(), std::move(input.grad_values()));
        input.drop_grad();
        break;
      }
      case LayerKind::Dense: {
        if (trainable) {
          layer.weights.ensure_grad();
          layer.bias.ensure_grad();
          const int width = layer.bias.dim(0);
          float* bg = layer.bias.grad();
          const float* up = current.data();
          for (int64_t r = 0; r < current.size() / width; ++r, up += width)
            for (int j = 0; j < width; ++j) bg[j] += up[j];
        }
        input.drop_grad();
        matmul_backward(input, layer.weights, current, need_input_grad, trainable);
        if (need_input_grad) {
          current = Tensor(input.shape(), std::move(input.grad_values()));
          input.drop_grad();
        }
        break;
      }
      case LayerKind::Conv2d: {
        if (trainable) {
          layer.weights.ensure_grad();
          layer.bias.ensure_grad();
          const int width = layer.bias.dim(0);
          float* bg = layer.bias.grad();
          const float* up = current.data();
          for (int64_t r = 0; r < current.size() / width; ++r, up += width)
            for (int j = 0; j < width; ++j) bg[j] += up[j];
        }
        input.drop_grad();
        conv2d_backward(input, layer.weights, current, layer.spec.stride_h,
                        layer.spec.stride_w, layer.spec.padding, need_input_grad, trainable);
        if (need_input_grad) {
          current = Tensor(input.shape(), std::move(input.grad_values()));
          input.drop_grad();
        }
        break;
      }
      case LayerKind::BatchNorm: {
        const auto& cache = fr.bn_cache[static_cast<size_t>(i)];
        if (cache.mean.empty())
          throw StateError("batch-norm cache missing; forward result is stale");
        const int features = layer.input_shape.back();
        const int64_t reduce = input.size() / features;
        const float* x = input.data();
        const float* dy = current.data();
        const float* gamma = layer.bn.gamma.data();

        std::vector<double> s1(static_cast<size_t>(features), 0.0); // sum dxhat
        std::vector<double> s2(static_cast<size_t>(features), 0.0); // sum dxhat*(x-mu)
        std::vector<double> dgamma(static_cast<size_t>(features), 0.0);
        std::vector<double> dbeta(static_cast<size_t>(features), 0.0);
        for (int64_t r = 0; r < reduce; ++r) {
          const float* xr = x + r * features;
          const float* gr = dy + r * features;
          for (int j = 0; j < features; ++j) {
            const size_t sj = static_cast<size_t>(j);
            const double centered = static_cast<double>(xr[j]) - cache.mean[sj];
            const double dxhat = static_cast<double>(gr[j]) * gamma[j];
            s1[sj] += dxhat;
            s2[sj] += dxhat * centered;
            dbeta[sj] += gr[j];
            dgamma[sj] += static_cast<double>(gr[j]) * (centered / cache.denom[sj]);
          }
        }
        if (trainable) {
          layer.bn.gamma.ensure_grad();
          layer.bn.beta_shift.ensure_grad();
          float* gg = layer.bn.gamma.grad();
          float* gb = layer.bn.beta_shift.grad();
          for (int j = 0; j < features; ++j) {
            gg[j] += static_cast<float>(dgamma[static_cast<size_t>(j)]);
            gb[j] += static_cast<float>(dbeta[static_cast<size_t>(j)]);
          }
        }
        Tensor next(input.shape());
        float* dx = next.data();
        const double n = static_cast<double>(reduce);
        for (int64_t r = 0; r < reduce; ++r) {
          const float* xr = x + r * features;
          const float* gr = dy + r * features;
          float* dr = dx + r * features;
          for (int j = 0; j < features; ++j) {
            const size_t sj = static_cast<size_t>(j);
            const double denom = cache.denom[sj];
            const double sigma = std::max(static_cast<double>(cache.sigma[sj]), 1e-12);
            const double centered = static_cast<double>(xr[j]) - cache.mean[sj];
            const double dxhat = static_cast<double>(gr[j]) * gamma[j];
            const double v = dxhat / denom - s1[sj] / (n * denom) -
                             centered * s2[sj] / (n * sigma * denom * denom);
            dr[j] = static_cast<float>(v);
          }
        }
        current = std::move(next);
        break;
      }
    }
  }
}

void Network::zero_grads() {
  for (Layer& layer : layers_) {
    layer.weights.zero_grad();
    layer.bias.zero_grad();
    layer.bn.gamma.zero_grad();
    layer.bn.beta_shift.zero_grad();
  }
}

std::vector<ParamRef> Network::trainable_parameters() {
  std::vector<ParamRef> out;
  for (size_t i = 0; i < layers_.size(); ++i) {
    Layer& layer = layers_[i];
    if (!layer.spec.trainable) continue;
    const std::string prefix = "layer" + std::to_string(i) + ".";
    switch (layer.spec.kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2d:
        out.push_back({prefix + "weight", &layer.weights});
        out.push_back({prefix + "bias", &layer.bias});
        break;
      case LayerKind::BatchNorm:
        out.push_back({prefix + "gamma", &layer.bn.gamma});
        out.push_back({prefix + "beta", &layer.bn.beta_shift});
        break;
      default:
        break;
    }
  }
  return out;
}

// ---- sharpness ---------------------------------------------------------------

float Network::sharpness_of(int spiking_index) const {
  if (spiking_index < 0 || spiking_index >= num_spiking_layers())
    throw ValidationError("spiking layer index " + std::to_string(spiking_index) + " out of range");
  return layers_[static_cast<size_t>(spiking_layers_[static_cast<size_t>(spiking_index)])].sharpness;
}

std::vector<float> Network::sharpness_values() const {
  std::vector<float> v;
  v.reserve(spiking_layers_.size());
  for (int idx : spiking_layers_) v.push_back(layers_[static_cast<size_t>(idx)].sharpness);
  return v;
}

bool Network::fully_sharpened() const {
  for (int idx : spiking_layers_)
    if (layers_[static_cast<size_t>(idx)].sharpness < 1.0f) return false;
  return true;
}

void Network::set_layer_sharpness(int layer_index, float s) {
  if (layer_index < 0 || layer_index >= static_cast<int>(layers_.size()))
    throw ValidationError("layer index " + std::to_string(layer_index) + " out of range");
  Layer& layer = layers_[static_cast<size_t>(layer_index)];
  if (layer.spec.kind != LayerKind::SpikingBrelu)
    throw ValidationError("layer " + std::to_string(layer_index) + " is " +
                          layer_kind_name(layer.spec.kind) + ", not spiking_brelu");
  Sharpness validated(s); // range check
  if (s < layer.sharpness)
    throw MonotonicityError("sharpness of layer " + std::to_string(layer_index) +
                            " cannot decrease (current " + std::to_string(layer.sharpness) +
                            ", requested " + std::to_string(s) + ")");
  layer.sharpness = validated.s;
}

// ---- save / load --------------------------------------------------------------

namespace {

constexpr const char* kNetMagic = "SNETv1";

nlohmann::json spec_to_json(const Layer& layer) {
  const LayerSpec& s = layer.spec;
  nlohmann::json j;
  j["kind"] = layer_kind_name(s.kind);
  j["trainable"] = s.trainable;
  switch (s.kind) {
    case LayerKind::Dense:
      j["units"] = s.units;
      break;
    case LayerKind::Conv2d:
      j["kernel"] = {s.kernel_h, s.kernel_w};
      j["filters"] = s.filters;
      j["stride"] = {s.stride_h, s.stride_w};
      j["padding"] = s.padding == Padding::Same ? "same" : "valid";
      break;
    case LayerKind::MaxPool:
      j["pool"] = {s.pool_h, s.pool_w};
      j["stride"] = {s.stride_h, s.stride_w};
      break;
    case LayerKind::BatchNorm:
      j["epsilon"] = s.bn_epsilon;
      j["momentum"] = s.bn_momentum;
      break;
    case LayerKind::SpikingBrelu:
      j["sharpness"] = layer.sharpness;
      break;
    default:
      break;
  }
  return j;
}

LayerSpec spec_from_json(const nlohmann::json& j, float* sharpness) {
  const std::string kind = j.at("kind").get<std::string>();
  LayerSpec s;
  if (kind == "dense") {
    s = LayerSpec::dense(j.at("units").get<int>());
  } else if (kind == "conv2d") {
    s.kind = LayerKind::Conv2d;
    s.kernel_h = j.at("kernel")[0].get<int>();
    s.kernel_w = j.at("kernel")[1].get<int>();
    s.filters = j.at("filters").get<int>();
    s.stride_h = j.at("stride")[0].get<int>();
    s.stride_w = j.at("stride")[1].get<int>();
    s.padding = j.at("padding").get<std::string>() == "same" ? Padding::Same : Padding::Valid;
  } else if (kind == "maxpool") {
    s.kind = LayerKind::MaxPool;
    s.pool_h = j.at("pool")[0].get<int>();
    s.pool_w = j.at("pool")[1].get<int>();
    s.stride_h = j.at("stride")[0].get<int>();
    s.stride_w = j.at("stride")[1].get<int>();
  } else if (kind == "flatten") {
    s = LayerSpec::flatten();
  } else if (kind == "batchnorm") {
    s = LayerSpec::batchnorm(j.at("epsilon").get<float>(), j.at("momentum").get<float>());
  } else if (kind == "spiking_brelu") {
    s = LayerSpec::spiking_brelu();
    if (sharpness) *sharpness = j.at("sharpness").get<float>();
  } else if (kind == "softmax_decode") {
    s = LayerSpec::softmax_decode();
  } else {
    throw FormatError("unknown layer kind '" + kind + "'");
  }
  if (j.contains("trainable")) s.trainable = j.at("trainable").get<bool>();
  return s;
}

} // namespace

void Network::save(const std::string& path) const {
  nlohmann::json header;
  header["format"] = "snet";
  header["version"] = 1;
  header["input_shape"] = input_shape_;
  header["nhot"] = {{"classes", nhot_.num_classes}, {"n", nhot_.n}};
  nlohmann::json jl = nlohmann::json::array();
  for (const Layer& layer : layers_) jl.push_back(spec_to_json(layer));
  header["layers"] = std::move(jl);

  std::vector<detail::NamedTensor> tensors;
  for (size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";
    switch (layer.spec.kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2d:
        tensors.push_back({prefix + "weight", &layer.weights});
        tensors.push_back({prefix + "bias", &layer.bias});
        break;
      case LayerKind::BatchNorm:
        tensors.push_back({prefix + "gamma", &layer.bn.gamma});
        tensors.push_back({prefix + "beta", &layer.bn.beta_shift});
        tensors.push_back({prefix + "moving_mu", &layer.bn.moving_mu});
        tensors.push_back({prefix + "moving_sigma", &layer.bn.moving_sigma});
        break;
      default:
        break;
    }
  }
  detail::write_container(path, kNetMagic, std::move(header), tensors);
}

Network Network::load(const std::string& path) {
  detail::Container c = detail::read_container(path, kNetMagic);
  if (c.header.value("format", "") != "snet" || c.header.value("version", 0) != 1)
    throw FormatError(path + ": unsupported network format/version");

  const auto input_shape = c.header.at("input_shape").get<std::vector<int>>();
  NHotCode nhot(c.header.at("nhot").at("classes").get<int>(), c.header.at("nhot").at("n").get<int>());

  std::vector<LayerSpec> specs;
  std::vector<float> sharpness;
  for (const auto& jl : c.header.at("layers")) {
    float s = 0.0f;
    specs.push_back(spec_from_json(jl, &s));
    sharpness.push_back(s);
  }

  Network net = Network::build(input_shape, specs, nhot, /*seed=*/0);
  for (size_t i = 0; i < net.layers_.size(); ++i) {
    Layer& layer = net.layers_[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";
    switch (layer.spec.kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2d:
        layer.weights.values() = c.get(prefix + "weight").values();
        layer.bias.values() = c.get(prefix + "bias").values();
        break;
      case LayerKind::BatchNorm:
        layer.bn.gamma.values() = c.get(prefix + "gamma").values();
        layer.bn.beta_shift.values() = c.get(prefix + "beta").values();
        layer.bn.moving_mu.values() = c.get(prefix + "moving_mu").values();
        layer.bn.moving_sigma.values() = c.get(prefix + "moving_sigma").values();
        break;
      case LayerKind::SpikingBrelu:
        layer.sharpness = sharpness[i];
        break;
      default:
        break;
    }
  }
  return net;
}

} // namespace sharpnet
