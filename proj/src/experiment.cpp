#include "sharpnet/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "sharpnet/deploy.hpp"
#include "sharpnet/encoding.hpp"
#include "sharpnet/metrics.hpp"
#include "sharpnet/rng.hpp"

namespace sharpnet {

namespace {

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["train_images"] = c.train_images;
  j["train_labels"] = c.train_labels;
  j["test_images"] = c.test_images;
  j["test_labels"] = c.test_labels;
  j["train_limit"] = c.train_limit;
  j["test_limit"] = c.test_limit;
  j["preset"] = c.preset;
  j["optimizer"] = c.optimizer;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["scheduler"] = c.scheduler;
  j["rate"] = c.rate;
  j["halt_threshold"] = c.halt_threshold;
  j["improvement_threshold"] = c.improvement_threshold;
  j["resume_patience"] = c.resume_patience;
  j["initial_wait_fraction"] = c.initial_wait_fraction;
  j["programmed_start"] = c.programmed_start;
  j["programmed_duration"] = c.programmed_duration;
  j["output_dir"] = c.output_dir;
  j["save_artifacts"] = c.save_artifacts;
  return j;
}

void config_from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.train_images = j.value("train_images", c.train_images);
  c.train_labels = j.value("train_labels", c.train_labels);
  c.test_images = j.value("test_images", c.test_images);
  c.test_labels = j.value("test_labels", c.test_labels);
  c.train_limit = j.value("train_limit", c.train_limit);
  c.test_limit = j.value("test_limit", c.test_limit);
  c.preset = j.value("preset", c.preset);
  c.optimizer = j.value("optimizer", c.optimizer);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.scheduler = j.value("scheduler", c.scheduler);
  c.rate = j.value("rate", c.rate);
  c.halt_threshold = j.value("halt_threshold", c.halt_threshold);
  c.improvement_threshold = j.value("improvement_threshold", c.improvement_threshold);
  c.resume_patience = j.value("resume_patience", c.resume_patience);
  c.initial_wait_fraction = j.value("initial_wait_fraction", c.initial_wait_fraction);
  c.programmed_start = j.value("programmed_start", c.programmed_start);
  c.programmed_duration = j.value("programmed_duration", c.programmed_duration);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.save_artifacts = j.value("save_artifacts", c.save_artifacts);
}

} // namespace

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  ExperimentConfig c;
  c.apply_json(path);
  return c;
}

void ExperimentConfig::apply_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path + " is not valid JSON: " + e.what());
  }
  config_from_json(j, *this);
}

std::string ExperimentConfig::to_json() const { return config_to_json(*this).dump(2); }

// ---- presets ----------------------------------------------------------------

namespace {

struct PresetShape {
  bool conv = false;
  int units = 512;
  int hidden_layers = 2;
  int nhot = 10;
};

PresetShape parse_preset(const std::string& preset) {
  PresetShape p;
  const auto hot = preset.rfind("hot");
  const auto dash = preset.rfind('-');
  if (hot == std::string::npos || dash == std::string::npos || dash + 1 >= preset.size() ||
      hot != preset.size() - 3)
    throw ValidationError("unknown preset '" + preset + "'");
  p.nhot = std::stoi(preset.substr(dash + 1, hot - dash - 1));
  if (p.nhot < 1) throw ValidationError("preset n-hot redundancy must be >= 1");

  if (preset.rfind("conv-small-", 0) == 0) {
    p.conv = true;
    return p;
  }
  if (preset.rfind("dense-", 0) == 0) {
    const std::string body = preset.substr(6, dash - 6); // "<units>x<layers>"
    const auto x = body.find('x');
    if (x == std::string::npos) throw ValidationError("unknown preset '" + preset + "'");
    p.units = std::stoi(body.substr(0, x));
    p.hidden_layers = std::stoi(body.substr(x + 1));
    if (p.units < 1 || p.hidden_layers < 1)
      throw ValidationError("preset '" + preset + "' has invalid sizes");
    return p;
  }
  throw ValidationError("unknown preset '" + preset + "'");
}

} // namespace

Network build_preset(const ExperimentConfig& cfg, const std::vector<int>& input_shape) {
  const PresetShape p = parse_preset(cfg.preset);
  const NHotCode code(10, p.nhot);
  std::vector<LayerSpec> specs;
  if (p.conv) {
    specs.push_back(LayerSpec::conv2d(3, 16, 1, Padding::Same));
    specs.push_back(LayerSpec::batchnorm());
    specs.push_back(LayerSpec::spiking_brelu());
    specs.push_back(LayerSpec::maxpool(2));
    specs.push_back(LayerSpec::conv2d(3, 32, 1, Padding::Same));
    specs.push_back(LayerSpec::batchnorm());
    specs.push_back(LayerSpec::spiking_brelu());
    specs.push_back(LayerSpec::maxpool(2));
    specs.push_back(LayerSpec::flatten());
    for (int units : {256, 128, 64}) {
      specs.push_back(LayerSpec::dense(units));
      specs.push_back(LayerSpec::batchnorm());
      specs.push_back(LayerSpec::spiking_brelu());
    }
  } else {
    specs.push_back(LayerSpec::flatten());
    for (int l = 0; l < p.hidden_layers; ++l) {
      specs.push_back(LayerSpec::dense(p.units));
      specs.push_back(LayerSpec::batchnorm());
      specs.push_back(LayerSpec::spiking_brelu());
    }
  }
  specs.push_back(LayerSpec::dense(code.width()));
  specs.push_back(LayerSpec::batchnorm());
  specs.push_back(LayerSpec::spiking_brelu());
  specs.push_back(LayerSpec::softmax_decode());
  return Network::build(input_shape, specs, code, cfg.seed);
}

// ---- evaluation helpers --------------------------------------------------------

double framework_accuracy(const Network& net, const Dataset& data, bool forced_spiking,
                          int batch_size) {
  if (data.count() == 0) throw ValidationError("cannot evaluate an empty dataset");
  int correct = 0;
  for (int start = 0; start < data.count(); start += batch_size) {
    const int n = std::min(batch_size, data.count() - start);
    ForwardResult fr = net.infer(data.batch_images(start, n), forced_spiking);
    // decode from the layer feeding the population sums
    const Tensor& acts = fr.activations.size() >= 2 &&
                                 net.layers().back().spec.kind == LayerKind::SoftmaxDecode
                             ? fr.activations[fr.activations.size() - 2]
                             : fr.output();
    std::vector<int> pred = decode_prediction(acts, net.nhot());
    for (int i = 0; i < n; ++i)
      if (pred[static_cast<size_t>(i)] == data.labels[static_cast<size_t>(start + i)]) ++correct;
  }
  return static_cast<double>(correct) / data.count();
}

namespace {

// accuracy + per-spiking-neuron activity sums in one pass
struct EvalWithActivity {
  double accuracy = 0.0;
  ActivityProfile profile;
};

EvalWithActivity evaluate_with_activity(const Network& net, const Dataset& data,
                                        int batch_size = 256) {
  EvalWithActivity out;
  const auto& spiking = net.spiking_layers();
  std::vector<std::vector<double>> sums(spiking.size());
  for (size_t k = 0; k < spiking.size(); ++k) {
    int64_t width = 1;
    for (int d : net.layers()[static_cast<size_t>(spiking[k])].output_shape) width *= d;
    sums[k].assign(static_cast<size_t>(width), 0.0);
  }
  int correct = 0;
  for (int start = 0; start < data.count(); start += batch_size) {
    const int n = std::min(batch_size, data.count() - start);
    ForwardResult fr = net.infer(data.batch_images(start, n));
    const Tensor& acts = net.layers().back().spec.kind == LayerKind::SoftmaxDecode
                             ? fr.activations[fr.activations.size() - 2]
                             : fr.output();
    std::vector<int> pred = decode_prediction(acts, net.nhot());
    for (int i = 0; i < n; ++i)
      if (pred[static_cast<size_t>(i)] == data.labels[static_cast<size_t>(start + i)]) ++correct;
    for (size_t k = 0; k < spiking.size(); ++k) {
      const Tensor& act = fr.activations[static_cast<size_t>(spiking[k])];
      const int64_t width = static_cast<int64_t>(sums[k].size());
      const float* a = act.data();
      for (int i = 0; i < n; ++i)
        for (int64_t j = 0; j < width; ++j) sums[k][static_cast<size_t>(j)] += a[i * width + j];
    }
  }
  out.accuracy = static_cast<double>(correct) / data.count();
  for (auto& layer_sum : sums) {
    std::vector<float> means(layer_sum.size());
    for (size_t j = 0; j < layer_sum.size(); ++j)
      means[j] = static_cast<float>(layer_sum[j] / data.count());
    out.profile.layer_means.push_back(std::move(means));
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

} // namespace

// ---- the training loop ---------------------------------------------------------

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ValidationError("batch_size must be >= 1");

  Dataset train = load_idx(cfg.train_images, cfg.train_labels);
  Dataset test = load_idx(cfg.test_images, cfg.test_labels);
  if (cfg.train_limit > 0) train = train.take(cfg.train_limit);
  if (cfg.test_limit > 0) test = test.take(cfg.test_limit);

  const std::vector<int> input_shape = {train.images.dim(1), train.images.dim(2),
                                        train.images.dim(3)};
  Network net = build_preset(cfg, input_shape);

  OptimizerConfig ocfg = OptimizerConfig::defaults(optimizer_kind_from_name(cfg.optimizer));
  if (cfg.learning_rate > 0.0f) ocfg.learning_rate = cfg.learning_rate;
  Optimizer opt(ocfg);
  auto params = net.trainable_parameters();

  const int batches_per_epoch = (train.count() + cfg.batch_size - 1) / cfg.batch_size;
  const int initial_wait =
      std::max(0, static_cast<int>(std::lround(cfg.initial_wait_fraction * cfg.epochs)));

  const bool adaptive = cfg.scheduler == "adaptive" || cfg.scheduler == "uniform";
  const bool programmed = cfg.scheduler == "programmed";
  SharpenerState state;
  if (adaptive) {
    state = SharpenerState::make(net.num_spiking_layers(), cfg.rate, cfg.epochs, initial_wait,
                                 cfg.scheduler == "uniform");
    state.halt_threshold = cfg.halt_threshold;
    state.improvement_threshold = cfg.improvement_threshold;
    state.resume_patience = cfg.resume_patience;
  }
  ProgrammedSchedule prog;
  if (programmed) {
    prog.start_epoch = cfg.programmed_start >= 0 ? cfg.programmed_start : initial_wait;
    prog.duration_per_layer = cfg.programmed_duration >= 1
                                  ? cfg.programmed_duration
                                  : std::max(1, static_cast<int>(std::lround(1.0f / cfg.rate)));
  }

  fs::create_directories(cfg.output_dir);
  ExperimentResult result;
  result.metrics_csv = (fs::path(cfg.output_dir) / "metrics.csv").string();
  result.sharpening_csv = (fs::path(cfg.output_dir) / "sharpening.csv").string();

  std::ofstream metrics(result.metrics_csv, std::ios::trunc);
  if (!metrics) throw FormatError("cannot open " + result.metrics_csv + " for writing");
  metrics << "epoch,train_loss,test_accuracy,spiking_test_accuracy,gini";
  for (int k = 0; k < net.num_spiking_layers(); ++k) metrics << ",sharpness_" << k;
  metrics << "\n";

  std::ofstream telemetry(result.sharpening_csv, std::ios::trunc);
  telemetry << "epoch,batch,layer,sharpness\n";

  {
    std::ofstream cfg_out((fs::path(cfg.output_dir) / "config.json").string(), std::ios::trunc);
    cfg_out << cfg.to_json() << "\n";
  }

  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int> order(static_cast<size_t>(train.count()));
  std::iota(order.begin(), order.end(), 0);

  bool checkpoint_saved = false;
  auto save_checkpoint = [&](int epoch) {
    if (checkpoint_saved) return;
    checkpoint_saved = true;
    result.checkpoint_epoch = epoch;
    EvalWithActivity ev = evaluate_with_activity(net, test);
    result.checkpoint_test_accuracy = ev.accuracy;
    try {
      result.checkpoint_gini = network_gini(ev.profile);
    } catch (const ValidationError&) {
      result.checkpoint_gini = 0.0; // fully silent network
    }
    if (cfg.save_artifacts) {
      result.checkpoint_model = (fs::path(cfg.output_dir) / "pre_sharpening.snet").string();
      net.save(result.checkpoint_model);
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // programmed schedules sharpen on a fixed clock, independent of loss
    if (programmed && epoch >= prog.start_epoch) save_checkpoint(epoch);

    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int64_t loss_count = 0;

    for (int b = 0; b < batches_per_epoch; ++b) {
      const int start = b * cfg.batch_size;
      const int n = std::min(cfg.batch_size, train.count() - start);
      Tensor images = train.gather_images(order, start, n);
      Tensor labels = train.gather_labels(order, start, n);

      ForwardResult fr = net.forward(images, Mode::Train);
      SoftmaxXent xent = softmax_crossentropy(fr.output(), labels);
      if (std::isfinite(xent.loss)) {
        loss_sum += xent.loss * n;
        loss_count += n;
      }
      net.zero_grads();
      net.backward(fr, xent.grad);
      try {
        opt.step(params);
      } catch (const NumericError&) {
        ++result.skipped_updates; // keep going; the run must still complete
      }

      // sharpness moves at the end of every batch
      if (adaptive && state.mode == SharpenerMode::Sharpening) {
        std::vector<float> delta = batch_increment(state, batches_per_epoch);
        for (size_t k = 0; k < delta.size(); ++k) {
          if (delta[k] <= 0.0f) continue;
          net.set_layer_sharpness(net.spiking_layers()[k], state.layer_sharpness[k]);
          telemetry << epoch << ',' << b << ',' << k << ',' << fmt(state.layer_sharpness[k])
                    << "\n";
        }
      } else if (programmed) {
        std::vector<float> targets =
            prog.targets(net.num_spiking_layers(), epoch, b + 1, batches_per_epoch);
        for (size_t k = 0; k < targets.size(); ++k) {
          const float current = net.sharpness_of(static_cast<int>(k));
          if (targets[k] > current) {
            net.set_layer_sharpness(net.spiking_layers()[k], targets[k]);
            telemetry << epoch << ',' << b << ',' << k << ',' << fmt(targets[k]) << "\n";
          }
        }
      }
    }

    const double epoch_loss =
        loss_count > 0 ? loss_sum / static_cast<double>(loss_count)
                       : std::numeric_limits<double>::quiet_NaN();

    if (adaptive) {
      const double controller_loss =
          std::isfinite(epoch_loss) ? epoch_loss : 1e30; // a diverged epoch reads as a huge loss
      state = adaptive_epoch_transition(state, controller_loss);
      if (state.mode == SharpenerMode::Sharpening) save_checkpoint(epoch + 1);
    }

    EvalWithActivity ev = evaluate_with_activity(net, test);
    const double forced = framework_accuracy(net, test, /*forced_spiking=*/true);
    double g = 0.0;
    try {
      g = network_gini(ev.profile);
    } catch (const ValidationError&) {
      g = 0.0;
    }

    result.train_loss.push_back(epoch_loss);
    result.test_accuracy.push_back(ev.accuracy);
    result.spiking_accuracy.push_back(forced);
    result.gini_trace.push_back(g);

    metrics << epoch << ',' << fmt(epoch_loss) << ',' << fmt(ev.accuracy) << ',' << fmt(forced)
            << ',' << fmt(g);
    for (int k = 0; k < net.num_spiking_layers(); ++k) metrics << ',' << fmt(net.sharpness_of(k));
    metrics << "\n";

    // once everything is binary the surrogate gradients vanish and further
    // epochs cannot change the parameters
    if (net.fully_sharpened() &&
        (!adaptive || state.mode == SharpenerMode::Done)) {
      break;
    }
  }

  save_checkpoint(cfg.epochs); // runs that never sharpened still record one

  result.final_test_accuracy = result.test_accuracy.empty() ? 0.0 : result.test_accuracy.back();
  result.final_spiking_accuracy =
      result.spiking_accuracy.empty() ? 0.0 : result.spiking_accuracy.back();
  result.final_gini = result.gini_trace.empty() ? 0.0 : result.gini_trace.back();
  result.fully_sharpened = net.fully_sharpened();
  result.dead_classes = dead_output_classes(net, test);

  if (cfg.save_artifacts) {
    namespace fs = std::filesystem;
    result.final_model = (fs::path(cfg.output_dir) / "final.snet").string();
    net.save(result.final_model);
    Network folded = fold_batchnorm(net);
    result.folded_model = (fs::path(cfg.output_dir) / "folded.snet").string();
    folded.save(result.folded_model);
    if (net.fully_sharpened()) {
      SpikingModel model = export_spiking(folded);
      result.spiking_model = (fs::path(cfg.output_dir) / "model.spkm").string();
      model.save(result.spiking_model);
    }
  }
  return result;
}

} // namespace sharpnet
