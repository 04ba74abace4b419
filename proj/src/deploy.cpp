#include "sharpnet/deploy.hpp"

#include <cmath>
#include <fstream>

#include "container.hpp"

namespace sharpnet {

// ---- QFormat ------------------------------------------------------------------

QFormat::QFormat(int m, int n) : integer_bits(m), fraction_bits(n) {
  if (m < 1 || n < 0)
    throw ValidationError("Q format needs integer_bits >= 1 and fraction_bits >= 0");
}

QFormat QFormat::parse(const std::string& text) {
  if (text.size() < 4 || (text[0] != 'Q' && text[0] != 'q'))
    throw ValidationError("bad Q format '" + text + "', expected e.g. Q4.8");
  const auto dot = text.find('.');
  if (dot == std::string::npos)
    throw ValidationError("bad Q format '" + text + "', expected e.g. Q4.8");
  try {
    return QFormat(std::stoi(text.substr(1, dot - 1)), std::stoi(text.substr(dot + 1)));
  } catch (const std::exception&) {
    throw ValidationError("bad Q format '" + text + "', expected e.g. Q4.8");
  }
}

std::string QFormat::name() const {
  return "Q" + std::to_string(integer_bits) + "." + std::to_string(fraction_bits);
}

double QFormat::step() const { return std::ldexp(1.0, -fraction_bits); }
double QFormat::min_value() const { return -std::ldexp(1.0, integer_bits - 1); }
double QFormat::max_value() const { return std::ldexp(1.0, integer_bits - 1) - step(); }

float QFormat::quantize(float x) const {
  const double scaled = static_cast<double>(x) * std::ldexp(1.0, fraction_bits);
  double rounded = std::round(scaled); // ties away from zero
  const double lo = min_value() * std::ldexp(1.0, fraction_bits);
  const double hi = max_value() * std::ldexp(1.0, fraction_bits);
  rounded = std::min(std::max(rounded, lo), hi);
  return static_cast<float>(rounded * step());
}

// ---- batch-norm folding ---------------------------------------------------------

Network fold_batchnorm(const Network& net) {
  std::vector<Layer> result;
  result.reserve(net.layers().size());

  for (size_t i = 0; i < net.layers().size(); ++i) {
    const Layer& layer = net.layers()[i];
    if (layer.spec.kind != LayerKind::BatchNorm) {
      result.push_back(layer);
      continue;
    }
    if (result.empty() || (result.back().spec.kind != LayerKind::Dense &&
                           result.back().spec.kind != LayerKind::Conv2d))
      throw StructureError("batchnorm at layer " + std::to_string(i) +
                           " does not directly follow a dense or conv2d layer; cannot fold");

    Layer& host = result.back();
    const int features = layer.bn.gamma.dim(0);
    const float* gamma = layer.bn.gamma.data();
    const float* beta = layer.bn.beta_shift.data();
    const float* mu = layer.bn.moving_mu.data();
    const float* sigma = layer.bn.moving_sigma.data();
    const float eps = layer.bn.epsilon;

    // w' = w * (gamma / (sigma + eps)); the feature axis is the last axis
    // of the weight tensor for both dense ([in, out]) and conv
    // ([kh, kw, cin, cout]) layers.
    float* w = host.weights.data();
    const int64_t rows = host.weights.size() / features;
    for (int64_t r = 0; r < rows; ++r, w += features)
      for (int j = 0; j < features; ++j) w[j] *= gamma[j] / (sigma[j] + eps);

    float* b = host.bias.data();
    for (int j = 0; j < features; ++j)
      b[j] = (gamma[j] / (sigma[j] + eps)) * (b[j] - mu[j]) + beta[j];
    // the batch-norm layer itself is dropped
  }

  // rebuild through the public build path so the shape chain stays validated
  std::vector<LayerSpec> specs;
  specs.reserve(result.size());
  for (const Layer& l : result) specs.push_back(l.spec);
  Network out = Network::build(net.input_shape(), specs, net.nhot(), /*seed=*/0);
  auto& out_layers = out.layers();
  for (size_t i = 0; i < result.size(); ++i) {
    out_layers[i].weights = std::move(result[i].weights);
    out_layers[i].bias = std::move(result[i].bias);
    out_layers[i].sharpness = result[i].sharpness;
  }
  return out;
}

// ---- quantization ----------------------------------------------------------------

int64_t QuantizationReport::total_saturated() const {
  int64_t total = 0;
  for (const Row& r : rows) total += r.saturated;
  return total;
}

void QuantizationReport::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "tensor,format,count,saturated,min_before,max_before\n";
  for (const Row& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%s,%lld,%lld,%.9g,%.9g\n", r.tensor.c_str(),
                  format.c_str(), static_cast<long long>(r.count),
                  static_cast<long long>(r.saturated), r.min_before, r.max_before);
    out << buf;
  }
}

Network quantize_weights(const Network& net, const QFormat& q, QuantizationReport* report) {
  Network out = net;
  if (report) {
    report->rows.clear();
    report->format = q.name();
  }
  auto& layers = out.layers();
  for (size_t i = 0; i < layers.size(); ++i) {
    Layer& layer = layers[i];
    if (layer.spec.kind != LayerKind::Dense && layer.spec.kind != LayerKind::Conv2d) continue;
    const std::string prefix = "layer" + std::to_string(i) + ".";
    for (auto [suffix, tensor] : {std::pair{"weight", &layer.weights}, std::pair{"bias", &layer.bias}}) {
      QuantizationReport::Row row;
      row.tensor = prefix + suffix;
      row.count = tensor->size();
      const double lo = q.min_value(), hi = q.max_value();
      float mn = 0.0f, mx = 0.0f;
      bool first = true;
      for (float& v : tensor->values()) {
        if (first) {
          mn = mx = v;
          first = false;
        } else {
          mn = std::min(mn, v);
          mx = std::max(mx, v);
        }
        if (static_cast<double>(v) < lo || static_cast<double>(v) > hi) ++row.saturated;
        v = q.quantize(v);
      }
      row.min_before = mn;
      row.max_before = mx;
      if (report) report->rows.push_back(std::move(row));
    }
  }
  return out;
}

// ---- spiking export ----------------------------------------------------------------

int64_t SpikingModel::Layer::input_size() const {
  switch (kind) {
    case Kind::Dense: return in;
    case Kind::Conv:
    case Kind::MaxPool:
    case Kind::Flatten: return static_cast<int64_t>(in_h) * in_w * cin;
  }
  return 0;
}

int64_t SpikingModel::Layer::output_size() const {
  switch (kind) {
    case Kind::Dense: return out;
    case Kind::Conv: return static_cast<int64_t>(out_h) * out_w * cout;
    case Kind::MaxPool: return static_cast<int64_t>(out_h) * out_w * cin;
    case Kind::Flatten: return static_cast<int64_t>(in_h) * in_w * cin;
  }
  return 0;
}

SpikingModel export_spiking(const Network& net) {
  std::vector<int> soft;
  for (int k = 0; k < net.num_spiking_layers(); ++k)
    if (net.sharpness_of(k) < 1.0f) soft.push_back(net.spiking_layers()[static_cast<size_t>(k)]);
  if (!soft.empty()) {
    std::string msg = "cannot export: spiking layer(s) not fully sharpened:";
    for (int idx : soft) msg += " " + std::to_string(idx);
    throw NotFullySharpenedError(msg, soft);
  }

  SpikingModel model;
  model.input_shape = net.input_shape();
  model.nhot = net.nhot();

  const auto& layers = net.layers();
  for (size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    SpikingModel::Layer out;
    switch (layer.spec.kind) {
      case LayerKind::BatchNorm:
        throw StructureError("cannot export: residual batchnorm at layer " + std::to_string(i) +
                             "; fold it first");
      case LayerKind::SpikingBrelu:
      case LayerKind::SoftmaxDecode:
        continue; // thresholds are implicit; decoding is carried by nhot
      case LayerKind::Dense:
        out.kind = SpikingModel::Layer::Kind::Dense;
        out.in = layer.input_shape[0];
        out.out = layer.output_shape[0];
        out.weights = layer.weights;
        out.bias = layer.bias;
        break;
      case LayerKind::Conv2d:
        out.kind = SpikingModel::Layer::Kind::Conv;
        out.in_h = layer.input_shape[0];
        out.in_w = layer.input_shape[1];
        out.cin = layer.input_shape[2];
        out.kernel_h = layer.spec.kernel_h;
        out.kernel_w = layer.spec.kernel_w;
        out.cout = layer.spec.filters;
        out.stride_h = layer.spec.stride_h;
        out.stride_w = layer.spec.stride_w;
        out.padding = layer.spec.padding;
        out.out_h = layer.output_shape[0];
        out.out_w = layer.output_shape[1];
        out.weights = layer.weights;
        out.bias = layer.bias;
        break;
      case LayerKind::MaxPool:
        out.kind = SpikingModel::Layer::Kind::MaxPool;
        out.in_h = layer.input_shape[0];
        out.in_w = layer.input_shape[1];
        out.cin = layer.input_shape[2];
        out.pool_h = layer.spec.pool_h;
        out.pool_w = layer.spec.pool_w;
        out.stride_h = layer.spec.stride_h;
        out.stride_w = layer.spec.stride_w;
        out.out_h = layer.output_shape[0];
        out.out_w = layer.output_shape[1];
        break;
      case LayerKind::Flatten:
        out.kind = SpikingModel::Layer::Kind::Flatten;
        if (layer.input_shape.size() == 3) {
          out.in_h = layer.input_shape[0];
          out.in_w = layer.input_shape[1];
          out.cin = layer.input_shape[2];
        } else {
          out.in_h = 1;
          out.in_w = 1;
          out.cin = layer.input_shape[0];
        }
        break;
    }
    model.layers.push_back(std::move(out));
  }

  if (model.layers.empty() || model.layers.back().kind != SpikingModel::Layer::Kind::Dense ||
      model.layers.back().out != model.nhot.width())
    throw StructureError("cannot export: final parameterized layer must be dense with width " +
                         std::to_string(model.nhot.width()));
  return model;
}

// ---- SpikingModel save / load ------------------------------------------------------

namespace {

constexpr const char* kSpikingMagic = "SPKMv1";

const char* spiking_kind_name(SpikingModel::Layer::Kind kind) {
  switch (kind) {
    case SpikingModel::Layer::Kind::Dense: return "dense";
    case SpikingModel::Layer::Kind::Conv: return "conv";
    case SpikingModel::Layer::Kind::MaxPool: return "maxpool";
    case SpikingModel::Layer::Kind::Flatten: return "flatten";
  }
  return "?";
}

} // namespace

void SpikingModel::save(const std::string& path) const {
  nlohmann::json header;
  header["format"] = "spiking-model";
  header["version"] = version;
  header["input_shape"] = input_shape;
  header["input"] = input_description;
  header["threshold"] = threshold;
  header["nhot"] = {{"classes", nhot.num_classes}, {"n", nhot.n}};

  nlohmann::json jl = nlohmann::json::array();
  for (const Layer& l : layers) {
    nlohmann::json j;
    j["kind"] = spiking_kind_name(l.kind);
    switch (l.kind) {
      case Layer::Kind::Dense:
        j["in"] = l.in;
        j["out"] = l.out;
        break;
      case Layer::Kind::Conv:
        j["in_hwc"] = {l.in_h, l.in_w, l.cin};
        j["kernel"] = {l.kernel_h, l.kernel_w};
        j["cout"] = l.cout;
        j["stride"] = {l.stride_h, l.stride_w};
        j["padding"] = l.padding == Padding::Same ? "same" : "valid";
        j["out_hw"] = {l.out_h, l.out_w};
        break;
      case Layer::Kind::MaxPool:
        j["in_hwc"] = {l.in_h, l.in_w, l.cin};
        j["pool"] = {l.pool_h, l.pool_w};
        j["stride"] = {l.stride_h, l.stride_w};
        j["out_hw"] = {l.out_h, l.out_w};
        break;
      case Layer::Kind::Flatten:
        j["in_hwc"] = {l.in_h, l.in_w, l.cin};
        break;
    }
    jl.push_back(std::move(j));
  }
  header["layers"] = std::move(jl);

  std::vector<detail::NamedTensor> tensors;
  for (size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.kind == Layer::Kind::Dense || l.kind == Layer::Kind::Conv) {
      tensors.push_back({"layer" + std::to_string(i) + ".weight", &l.weights});
      tensors.push_back({"layer" + std::to_string(i) + ".bias", &l.bias});
    }
  }
  detail::write_container(path, kSpikingMagic, std::move(header), tensors);
}

SpikingModel SpikingModel::load(const std::string& path) {
  detail::Container c = detail::read_container(path, kSpikingMagic);
  if (c.header.value("format", "") != "spiking-model" || c.header.value("version", 0) != 1)
    throw FormatError(path + ": unsupported spiking model format/version");

  SpikingModel model;
  model.version = 1;
  model.input_shape = c.header.at("input_shape").get<std::vector<int>>();
  model.input_description = c.header.value("input", "");
  model.threshold = c.header.at("threshold").get<float>();
  model.nhot = NHotCode(c.header.at("nhot").at("classes").get<int>(),
                        c.header.at("nhot").at("n").get<int>());

  size_t i = 0;
  for (const auto& j : c.header.at("layers")) {
    Layer l;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "dense") {
      l.kind = Layer::Kind::Dense;
      l.in = j.at("in").get<int>();
      l.out = j.at("out").get<int>();
    } else if (kind == "conv") {
      l.kind = Layer::Kind::Conv;
      l.in_h = j.at("in_hwc")[0].get<int>();
      l.in_w = j.at("in_hwc")[1].get<int>();
      l.cin = j.at("in_hwc")[2].get<int>();
      l.kernel_h = j.at("kernel")[0].get<int>();
      l.kernel_w = j.at("kernel")[1].get<int>();
      l.cout = j.at("cout").get<int>();
      l.stride_h = j.at("stride")[0].get<int>();
      l.stride_w = j.at("stride")[1].get<int>();
      l.padding = j.at("padding").get<std::string>() == "same" ? Padding::Same : Padding::Valid;
      l.out_h = j.at("out_hw")[0].get<int>();
      l.out_w = j.at("out_hw")[1].get<int>();
    } else if (kind == "maxpool") {
      l.kind = Layer::Kind::MaxPool;
      l.in_h = j.at("in_hwc")[0].get<int>();
      l.in_w = j.at("in_hwc")[1].get<int>();
      l.cin = j.at("in_hwc")[2].get<int>();
      l.pool_h = j.at("pool")[0].get<int>();
      l.pool_w = j.at("pool")[1].get<int>();
      l.stride_h = j.at("stride")[0].get<int>();
      l.stride_w = j.at("stride")[1].get<int>();
      l.out_h = j.at("out_hw")[0].get<int>();
      l.out_w = j.at("out_hw")[1].get<int>();
    } else if (kind == "flatten") {
      l.kind = Layer::Kind::Flatten;
      l.in_h = j.at("in_hwc")[0].get<int>();
      l.in_w = j.at("in_hwc")[1].get<int>();
      l.cin = j.at("in_hwc")[2].get<int>();
    } else {
      throw FormatError(path + ": unknown spiking layer kind '" + kind + "'");
    }
    if (l.kind == Layer::Kind::Dense || l.kind == Layer::Kind::Conv) {
      l.weights = c.get("layer" + std::to_string(i) + ".weight");
      l.bias = c.get("layer" + std::to_string(i) + ".bias");
    }
    model.layers.push_back(std::move(l));
    ++i;
  }
  return model;
}

} // namespace sharpnet
