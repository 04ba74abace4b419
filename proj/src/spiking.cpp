#include "sharpnet/spiking.hpp"

#include <cstring>
#include <fstream>

#include "sharpnet/encoding.hpp"
#include "sharpnet/kernels.hpp"

namespace sharpnet {

int SpikeVector::count_fired() const {
  int n = 0;
  for (uint8_t f : fired) n += f;
  return n;
}

int64_t OpStats::total_events() const {
  int64_t t = 0;
  for (const auto& l : per_layer) t += l.events;
  return t;
}

int64_t OpStats::total_neurons() const {
  int64_t t = 0;
  for (const auto& l : per_layer) t += l.neurons;
  return t;
}

int64_t OpStats::total_fired() const {
  int64_t t = 0;
  for (const auto& l : per_layer) t += l.fired;
  return t;
}

void OpStats::add(const OpStats& other) {
  if (per_layer.empty()) {
    per_layer = other.per_layer;
    return;
  }
  if (per_layer.size() != other.per_layer.size())
    throw ValidationError("cannot aggregate op stats across different models");
  for (size_t i = 0; i < per_layer.size(); ++i) {
    per_layer[i].neurons += other.per_layer[i].neurons;
    per_layer[i].fired += other.per_layer[i].fired;
    per_layer[i].events += other.per_layer[i].events;
  }
}

void OpStats::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "layer,kind,neurons,fired,fired_fraction,events\n";
  for (size_t i = 0; i < per_layer.size(); ++i) {
    const auto& l = per_layer[i];
    const double frac = l.neurons > 0 ? static_cast<double>(l.fired) / l.neurons : 0.0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%s,%lld,%lld,%.9g,%lld\n", i, l.kind.c_str(),
                  static_cast<long long>(l.neurons), static_cast<long long>(l.fired), frac,
                  static_cast<long long>(l.events));
    out << buf;
  }
}

namespace {

// pre[j] = sum_k x[k] * w[k, j] + b[j], k ascending — identical summation
// order to the training framework's dense layer.
void dense_preact_dense_path(const float* x, const SpikingModel::Layer& l,
                             std::vector<float>& pre, int64_t& events) {
  pre.assign(static_cast<size_t>(l.out), 0.0f);
  kernels::gemm(x, l.weights.data(), pre.data(), 1, l.in, l.out);
  for (int j = 0; j < l.out; ++j) pre[static_cast<size_t>(j)] += l.bias[j];
  for (int k = 0; k < l.in; ++k)
    if (x[k] != 0.0f) events += l.out;
}

void dense_preact_event_path(const float* x, const SpikingModel::Layer& l,
                             std::vector<float>& pre, int64_t& events,
                             std::vector<int>& scratch) {
  pre.assign(static_cast<size_t>(l.out), 0.0f);
  scratch.clear();
  bool binary = true;
  for (int k = 0; k < l.in; ++k) {
    if (x[k] == 0.0f) continue;
    if (x[k] != 1.0f) binary = false;
    scratch.push_back(k);
  }
  if (binary) {
    kernels::event_accumulate(l.weights.data(), scratch.data(),
                              static_cast<int>(scratch.size()), pre.data(), l.out);
  } else {
    // analog inputs (first layer): skip zeros, multiply the rest
    for (int k : scratch) {
      const float v = x[k];
      const float* w = l.weights.data() + static_cast<size_t>(k) * l.out;
      for (int j = 0; j < l.out; ++j) pre[static_cast<size_t>(j)] += v * w[j];
    }
  }
  events += static_cast<int64_t>(scratch.size()) * l.out;
}

// Direct convolution with the patch visited in (ky, kx, cin) order — the
// same ascending-k order as the framework's im2col GEMM.
void conv_preact(const float* x, const SpikingModel::Layer& l, bool event_path,
                 std::vector<float>& pre, int64_t& events) {
  ConvGeometry g = conv_geometry(l.in_h, l.in_w, l.kernel_h, l.kernel_w, l.stride_h,
                                 l.stride_w, l.padding);
  pre.assign(static_cast<size_t>(l.out_h) * l.out_w * l.cout, 0.0f);
  const float* kw = l.weights.data();
  float* dst = pre.data();
  for (int oy = 0; oy < l.out_h; ++oy) {
    for (int ox = 0; ox < l.out_w; ++ox, dst += l.cout) {
      const int iy0 = oy * l.stride_h - g.pad_top;
      const int ix0 = ox * l.stride_w - g.pad_left;
      for (int ky = 0; ky < l.kernel_h; ++ky) {
        const int iy = iy0 + ky;
        const bool row_ok = iy >= 0 && iy < l.in_h;
        for (int kx = 0; kx < l.kernel_w; ++kx) {
          const int ix = ix0 + kx;
          const bool ok = row_ok && ix >= 0 && ix < l.in_w;
          const float* cell = ok ? x + (static_cast<size_t>(iy) * l.in_w + ix) * l.cin : nullptr;
          for (int c = 0; c < l.cin; ++c) {
            const float v = ok ? cell[c] : 0.0f;
            const size_t q = ((static_cast<size_t>(ky) * l.kernel_w + kx) * l.cin + c);
            const float* wrow = kw + q * l.cout;
            if (event_path) {
              if (v == 0.0f) continue;
              events += l.cout;
              if (v == 1.0f) {
                for (int co = 0; co < l.cout; ++co) dst[co] += wrow[co];
              } else {
                for (int co = 0; co < l.cout; ++co) dst[co] += v * wrow[co];
              }
            } else {
              if (v != 0.0f) events += l.cout;
              for (int co = 0; co < l.cout; ++co) dst[co] += v * wrow[co];
            }
          }
        }
      }
      for (int co = 0; co < l.cout; ++co) dst[co] += l.bias[co];
    }
  }
}

} // namespace

InferResult infer(const SpikingModel& model, const std::vector<float>& input,
                  EvalPath path) {
  int64_t expected = 1;
  for (int d : model.input_shape) expected *= d;
  if (static_cast<int64_t>(input.size()) != expected)
    throw DimensionError("input size " + std::to_string(input.size()) + " does not match model input " +
                         Tensor::shape_str(model.input_shape));

  InferResult result;
  std::vector<float> current = input;
  std::vector<float> pre;
  std::vector<int> scratch;

  for (const auto& layer : model.layers) {
    OpStats::LayerStats ls;
    switch (layer.kind) {
      case SpikingModel::Layer::Kind::Dense: {
        if (static_cast<int64_t>(current.size()) != layer.in)
          throw DimensionError("layer input size mismatch in spiking model");
        ls.kind = "dense";
        ls.neurons = layer.out;
        if (path == EvalPath::EventDriven)
          dense_preact_event_path(current.data(), layer, pre, ls.events, scratch);
        else
          dense_preact_dense_path(current.data(), layer, pre, ls.events);
        current.assign(pre.size(), 0.0f);
        for (size_t j = 0; j < pre.size(); ++j)
          if (pre[j] >= model.threshold) {
            current[j] = 1.0f;
            ++ls.fired;
          }
        break;
      }
      case SpikingModel::Layer::Kind::Conv: {
        ls.kind = "conv";
        ls.neurons = layer.output_size();
        conv_preact(current.data(), layer, path == EvalPath::EventDriven, pre, ls.events);
        current.assign(pre.size(), 0.0f);
        for (size_t j = 0; j < pre.size(); ++j)
          if (pre[j] >= model.threshold) {
            current[j] = 1.0f;
            ++ls.fired;
          }
        break;
      }
      case SpikingModel::Layer::Kind::MaxPool: {
        ls.kind = "maxpool";
        std::vector<float> pooled(static_cast<size_t>(layer.out_h) * layer.out_w * layer.cin);
        for (int oy = 0; oy < layer.out_h; ++oy)
          for (int ox = 0; ox < layer.out_w; ++ox)
            for (int c = 0; c < layer.cin; ++c) {
              float best = current[(static_cast<size_t>(oy * layer.stride_h) * layer.in_w +
                                    ox * layer.stride_w) * layer.cin + c];
              for (int py = 0; py < layer.pool_h; ++py)
                for (int px = 0; px < layer.pool_w; ++px) {
                  const float v = current[(static_cast<size_t>(oy * layer.stride_h + py) * layer.in_w +
                                           (ox * layer.stride_w + px)) * layer.cin + c];
                  if (v > best) best = v;
                }
              pooled[(static_cast<size_t>(oy) * layer.out_w + ox) * layer.cin + c] = best;
            }
        current = std::move(pooled);
        ls.neurons = static_cast<int64_t>(current.size());
        for (float v : current)
          if (v != 0.0f) ++ls.fired;
        break;
      }
      case SpikingModel::Layer::Kind::Flatten: {
        ls.kind = "flatten";
        ls.neurons = static_cast<int64_t>(current.size()); // layout is already row-major
        for (float v : current)
          if (v != 0.0f) ++ls.fired;
        break;
      }
    }
    result.stats.per_layer.push_back(std::move(ls));
    if (layer.kind == SpikingModel::Layer::Kind::Dense ||
        layer.kind == SpikingModel::Layer::Kind::Conv)
      result.output_preactivations = pre;
  }

  result.output.width = static_cast<int>(current.size());
  result.output.fired.resize(current.size());
  for (size_t j = 0; j < current.size(); ++j)
    result.output.fired[j] = current[j] != 0.0f ? 1 : 0;

  Tensor acts({1, static_cast<int>(current.size())}, std::move(current));
  result.predicted = decode_prediction(acts, model.nhot)[0];
  return result;
}

EvalResult batch_evaluate(const SpikingModel& model, const Dataset& data, EvalPath path) {
  if (data.count() == 0) throw ValidationError("cannot evaluate an empty dataset");
  if (static_cast<int>(data.labels.size()) != data.count())
    throw ValidationError("dataset has " + std::to_string(data.count()) + " images but " +
                          std::to_string(data.labels.size()) + " labels");

  EvalResult result;
  result.total = data.count();
  const int64_t sample = static_cast<int64_t>(data.images.size()) / data.count();
  std::vector<float> input(static_cast<size_t>(sample));
  for (int i = 0; i < data.count(); ++i) {
    std::memcpy(input.data(), data.images.data() + i * sample,
                static_cast<size_t>(sample) * sizeof(float));
    InferResult r = infer(model, input, path);
    result.predictions.push_back(r.predicted);
    if (r.predicted == data.labels[static_cast<size_t>(i)]) ++result.correct;
    result.stats.add(r.stats);
  }
  result.accuracy = static_cast<double>(result.correct) / result.total;
  return result;
}

} // namespace sharpnet
