// Command-line front end: dataset generation, training, the
// fold/quantize/export deployment chain, evaluation and the precision /
// optimizer sweeps.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sharpnet/datagen.hpp"
#include "sharpnet/deploy.hpp"
#include "sharpnet/experiment.hpp"
#include "sharpnet/metrics.hpp"
#include "sharpnet/spiking.hpp"

namespace fs = std::filesystem;
using namespace sharpnet;

namespace {

struct DataArgs {
  std::string data_dir;
  std::string train_images, train_labels, test_images, test_labels;

  void attach(CLI::App* cmd, bool need_train = true) {
    cmd->add_option("--data", data_dir, "directory with IDX files (canonical MNIST names)");
    if (need_train) {
      cmd->add_option("--train-images", train_images, "training images IDX file");
      cmd->add_option("--train-labels", train_labels, "training labels IDX file");
    }
    cmd->add_option("--test-images", test_images, "test images IDX file");
    cmd->add_option("--test-labels", test_labels, "test labels IDX file");
  }

  static std::string pick(const fs::path& dir, std::initializer_list<const char*> names) {
    for (const char* n : names)
      if (fs::exists(dir / n)) return (dir / n).string();
    return (dir / *names.begin()).string();
  }

  void resolve() {
    if (data_dir.empty()) return;
    const fs::path dir(data_dir);
    if (train_images.empty())
      train_images = pick(dir, {"train-images-idx3-ubyte", "train-images.idx"});
    if (train_labels.empty())
      train_labels = pick(dir, {"train-labels-idx1-ubyte", "train-labels.idx"});
    if (test_images.empty())
      test_images = pick(dir, {"t10k-images-idx3-ubyte", "test-images.idx"});
    if (test_labels.empty())
      test_labels = pick(dir, {"t10k-labels-idx1-ubyte", "test-labels.idx"});
  }

  Dataset load_test() const { return load_idx(test_images, test_labels); }
};

bool is_spiking_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::getline(in, line);
  return line == "SPKMv1";
}

void apply_config_overrides(CLI::App* cmd, ExperimentConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path, "JSON experiment config (flags override it)");
  cmd->add_option("--preset", cfg.preset, "network preset, e.g. dense-512x2-10hot");
  cmd->add_option("--optimizer", cfg.optimizer, "sgd|adam|adamax|adadelta|rmsprop");
  cmd->add_option("--lr", cfg.learning_rate, "learning rate (optimizer default if unset)");
  cmd->add_option("--epochs", cfg.epochs, "max training epochs");
  cmd->add_option("--batch", cfg.batch_size, "batch size");
  cmd->add_option("--seed", cfg.seed, "random seed (init + shuffling)");
  cmd->add_option("--scheduler", cfg.scheduler, "adaptive|uniform|programmed|none");
  cmd->add_option("--rate", cfg.rate, "sharpening rate per layer per epoch");
  cmd->add_option("--halt-threshold", cfg.halt_threshold, "loss rise fraction that pauses sharpening");
  cmd->add_option("--improvement-threshold", cfg.improvement_threshold,
                  "loss drop fraction that counts as improvement");
  cmd->add_option("--resume-patience", cfg.resume_patience, "stagnant epochs before resuming");
  cmd->add_option("--initial-wait", cfg.initial_wait_fraction,
                  "fraction of epochs to train before sharpening may start");
  cmd->add_option("--train-limit", cfg.train_limit, "cap on training samples (0 = all)");
  cmd->add_option("--out", cfg.output_dir, "output directory");
}

int cmd_train(ExperimentConfig cfg, DataArgs& data, const std::string& config_path) {
  if (!config_path.empty()) {
    ExperimentConfig from_file = ExperimentConfig::from_json_file(config_path);
    // flags already parsed into cfg win over file values only where set;
    // simplest faithful merge: file first, then re-apply non-defaults
    ExperimentConfig defaults;
    auto merged = from_file;
    if (cfg.preset != defaults.preset) merged.preset = cfg.preset;
    if (cfg.optimizer != defaults.optimizer) merged.optimizer = cfg.optimizer;
    if (cfg.learning_rate != defaults.learning_rate) merged.learning_rate = cfg.learning_rate;
    if (cfg.epochs != defaults.epochs) merged.epochs = cfg.epochs;
    if (cfg.batch_size != defaults.batch_size) merged.batch_size = cfg.batch_size;
    if (cfg.seed != defaults.seed) merged.seed = cfg.seed;
    if (cfg.scheduler != defaults.scheduler) merged.scheduler = cfg.scheduler;
    if (cfg.rate != defaults.rate) merged.rate = cfg.rate;
    if (cfg.halt_threshold != defaults.halt_threshold) merged.halt_threshold = cfg.halt_threshold;
    if (cfg.improvement_threshold != defaults.improvement_threshold)
      merged.improvement_threshold = cfg.improvement_threshold;
    if (cfg.resume_patience != defaults.resume_patience) merged.resume_patience = cfg.resume_patience;
    if (cfg.initial_wait_fraction != defaults.initial_wait_fraction)
      merged.initial_wait_fraction = cfg.initial_wait_fraction;
    if (cfg.train_limit != defaults.train_limit) merged.train_limit = cfg.train_limit;
    if (cfg.output_dir != defaults.output_dir) merged.output_dir = cfg.output_dir;
    cfg = merged;
  }
  data.resolve();
  if (!data.train_images.empty()) cfg.train_images = data.train_images;
  if (!data.train_labels.empty()) cfg.train_labels = data.train_labels;
  if (!data.test_images.empty()) cfg.test_images = data.test_images;
  if (!data.test_labels.empty()) cfg.test_labels = data.test_labels;

  ExperimentResult r = run_experiment(cfg);
  std::printf("preset %s, optimizer %s, seed %llu\n", cfg.preset.c_str(), cfg.optimizer.c_str(),
              static_cast<unsigned long long>(cfg.seed));
  std::printf("checkpoint accuracy %.4f (epoch %d), final accuracy %.4f, spiking accuracy %.4f\n",
              r.checkpoint_test_accuracy, r.checkpoint_epoch, r.final_test_accuracy,
              r.final_spiking_accuracy);
  std::printf("gini %.4f -> %.4f, fully sharpened: %s, dead classes: %zu\n", r.checkpoint_gini,
              r.final_gini, r.fully_sharpened ? "yes" : "no", r.dead_classes.size());
  std::printf("metrics: %s\n", r.metrics_csv.c_str());
  if (!r.spiking_model.empty()) std::printf("spiking export: %s\n", r.spiking_model.c_str());
  return 0;
}

int cmd_evaluate(const std::string& model_path, DataArgs& data, const std::string& mode,
                 const std::string& out_csv) {
  data.resolve();
  Dataset test = data.load_test();

  double accuracy = 0.0;
  if (mode == "spiking-runtime") {
    SpikingModel model;
    if (is_spiking_model(model_path)) {
      model = SpikingModel::load(model_path);
    } else {
      Network net = Network::load(model_path);
      model = export_spiking(fold_batchnorm(net)); // surfaces the export errors
    }
    EvalResult r = batch_evaluate(model, test);
    accuracy = r.accuracy;
    std::printf("accuracy %.6f (%d/%d)\n", r.accuracy, r.correct, r.total);
    std::printf("synaptic events %lld, fired %lld of %lld neuron evaluations\n",
                static_cast<long long>(r.stats.total_events()),
                static_cast<long long>(r.stats.total_fired()),
                static_cast<long long>(r.stats.total_neurons()));
    if (!out_csv.empty()) r.stats.write_csv(out_csv);
  } else if (mode == "framework") {
    Network net = Network::load(model_path);
    accuracy = framework_accuracy(net, test);
    std::printf("accuracy %.6f\n", accuracy);
    if (!out_csv.empty()) {
      std::ofstream out(out_csv, std::ios::trunc);
      out << "model,accuracy\n" << model_path << ',' << accuracy << "\n";
    }
  } else {
    std::fprintf(stderr, "unknown mode '%s' (framework|spiking-runtime)\n", mode.c_str());
    return 2;
  }
  return 0;
}

int cmd_sweep_precision(const std::vector<std::string>& model_paths,
                        const std::vector<std::string>& formats, DataArgs& data,
                        const std::string& out_csv) {
  data.resolve();
  Dataset test = data.load_test();
  std::ofstream out(out_csv, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + out_csv + " for writing");
  out << "model,format,mode,accuracy\n";
  for (const std::string& path : model_paths) {
    Network net = Network::load(path);
    Network folded = fold_batchnorm(net);
    for (const std::string& fname : formats) {
      const QFormat q = QFormat::parse(fname);
      Network quantized = quantize_weights(folded, q);
      if (quantized.fully_sharpened()) {
        SpikingModel model = export_spiking(quantized);
        EvalResult r = batch_evaluate(model, test);
        out << path << ',' << q.name() << ",spiking," << r.accuracy << "\n";
        std::printf("%s %s spiking %.4f\n", path.c_str(), q.name().c_str(), r.accuracy);
      } else {
        const double acc = framework_accuracy(quantized, test);
        out << path << ',' << q.name() << ",non-spiking," << acc << "\n";
        std::printf("%s %s non-spiking %.4f\n", path.c_str(), q.name().c_str(), acc);
      }
    }
  }
  return 0;
}

int cmd_sweep_optimizers(ExperimentConfig base, DataArgs& data,
                         const std::vector<std::string>& optimizers, int seeds,
                         const std::string& out_csv) {
  data.resolve();
  if (!data.train_images.empty()) base.train_images = data.train_images;
  if (!data.train_labels.empty()) base.train_labels = data.train_labels;
  if (!data.test_images.empty()) base.test_images = data.test_images;
  if (!data.test_labels.empty()) base.test_labels = data.test_labels;

  std::ofstream out(out_csv, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + out_csv + " for writing");
  out << "optimizer,learning_rate,seed,spiking_accuracy,checkpoint_accuracy\n";
  const std::string root = base.output_dir;
  for (const std::string& opt_name : optimizers) {
    std::vector<double> accs;
    for (int s = 0; s < seeds; ++s) {
      ExperimentConfig cfg = base;
      cfg.optimizer = opt_name;
      cfg.seed = base.seed + static_cast<uint64_t>(s);
      cfg.output_dir = (fs::path(root) / (opt_name + "_seed" + std::to_string(cfg.seed))).string();
      ExperimentResult r = run_experiment(cfg);
      const OptimizerConfig oc = OptimizerConfig::defaults(optimizer_kind_from_name(opt_name));
      const float lr = cfg.learning_rate > 0 ? cfg.learning_rate : oc.learning_rate;
      out << opt_name << ',' << lr << ',' << cfg.seed << ',' << r.final_spiking_accuracy << ','
          << r.checkpoint_test_accuracy << "\n";
      out.flush();
      accs.push_back(r.final_spiking_accuracy);
      std::printf("%s seed %llu: spiking %.4f\n", opt_name.c_str(),
                  static_cast<unsigned long long>(cfg.seed), r.final_spiking_accuracy);
    }
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    const double sd = accs.size() > 1 ? std::sqrt(var / (static_cast<double>(accs.size()) - 1)) : 0.0;
    std::printf("%s: mean %.4f, std %.4f over %zu seeds\n", opt_name.c_str(), mean, sd, accs.size());
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"training and deployment of binary-communication (spiking) networks"};
  app.require_subcommand(1);

  // datagen
  auto* gen = app.add_subcommand("datagen", "write a synthetic digit dataset in IDX format");
  std::string gen_out = "data";
  int gen_train = 20000, gen_test = 10000;
  uint64_t gen_seed = 7;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--train", gen_train, "training sample count");
  gen->add_option("--test", gen_test, "test sample count");
  gen->add_option("--seed", gen_seed, "generator seed");

  // train
  auto* train = app.add_subcommand("train", "run a training experiment");
  ExperimentConfig train_cfg;
  DataArgs train_data;
  std::string train_config_path;
  apply_config_overrides(train, train_cfg, train_config_path);
  train_data.attach(train);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "evaluate a model on a dataset");
  std::string eval_model, eval_mode = "framework", eval_csv;
  DataArgs eval_data;
  eval->add_option("--model", eval_model, "model file (.snet or .spkm)")->required();
  eval->add_option("--mode", eval_mode, "framework|spiking-runtime");
  eval->add_option("--csv", eval_csv, "write results/op-stats CSV here");
  eval_data.attach(eval, /*need_train=*/false);

  // fold
  auto* fold = app.add_subcommand("fold", "fold batch-norm layers into weights and biases");
  std::string fold_in, fold_out;
  fold->add_option("--model", fold_in, "input .snet")->required();
  fold->add_option("--out", fold_out, "output .snet")->required();

  // quantize
  auto* quant = app.add_subcommand("quantize", "round weights onto a fixed-point grid");
  std::string quant_in, quant_out, quant_fmt = "Q4.8", quant_report;
  quant->add_option("--model", quant_in, "input .snet")->required();
  quant->add_option("--out", quant_out, "output .snet")->required();
  quant->add_option("--format", quant_fmt, "Qm.n format, e.g. Q4.8");
  quant->add_option("--report", quant_report, "write saturation report CSV here");

  // export
  auto* exp = app.add_subcommand("export", "export a fully sharpened network");
  std::string exp_in, exp_out;
  exp->add_option("--model", exp_in, "input .snet (batch-norm already folded)")->required();
  exp->add_option("--out", exp_out, "output .spkm")->required();

  // sweep-precision
  auto* sweep_p = app.add_subcommand("sweep-precision", "accuracy across Q formats");
  std::vector<std::string> sweep_models;
  std::vector<std::string> sweep_formats = {"Q4.16", "Q4.8", "Q4.7", "Q4.6", "Q4.5"};
  std::string sweep_csv = "precision.csv";
  DataArgs sweep_data;
  sweep_p->add_option("--models", sweep_models, "trained .snet files")->required();
  sweep_p->add_option("--formats", sweep_formats, "Q formats to test");
  sweep_p->add_option("--csv", sweep_csv, "output CSV");
  sweep_data.attach(sweep_p, /*need_train=*/false);

  // sweep-optimizers
  auto* sweep_o = app.add_subcommand("sweep-optimizers", "train across optimizers and seeds");
  ExperimentConfig sweep_cfg;
  DataArgs sweep_o_data;
  std::string sweep_o_config;
  std::vector<std::string> sweep_optimizers = {"adadelta", "adamax", "adam"};
  int sweep_seeds = 5;
  std::string sweep_o_csv = "optimizers.csv";
  apply_config_overrides(sweep_o, sweep_cfg, sweep_o_config);
  sweep_o_data.attach(sweep_o);
  sweep_o->add_option("--optimizers", sweep_optimizers, "optimizer names");
  sweep_o->add_option("--seeds", sweep_seeds, "seeds per optimizer");
  sweep_o->add_option("--csv", sweep_o_csv, "output CSV");

  // stats
  auto* stats = app.add_subcommand("stats", "spiking-runtime op statistics over a dataset");
  std::string stats_model, stats_csv = "opstats.csv";
  DataArgs stats_data;
  stats->add_option("--model", stats_model, "spiking model (.spkm)")->required();
  stats->add_option("--csv", stats_csv, "output CSV");
  stats_data.attach(stats, /*need_train=*/false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      fs::create_directories(gen_out);
      const fs::path dir(gen_out);
      write_synthetic_digits((dir / "train-images-idx3-ubyte").string(),
                             (dir / "train-labels-idx1-ubyte").string(), gen_train, gen_seed);
      write_synthetic_digits((dir / "t10k-images-idx3-ubyte").string(),
                             (dir / "t10k-labels-idx1-ubyte").string(), gen_test,
                             gen_seed + 0x51ed270b7a4aa1bbULL);
      std::printf("wrote %d train and %d test samples to %s\n", gen_train, gen_test,
                  gen_out.c_str());
      return 0;
    }
    if (train->parsed()) return cmd_train(train_cfg, train_data, train_config_path);
    if (eval->parsed()) return cmd_evaluate(eval_model, eval_data, eval_mode, eval_csv);
    if (fold->parsed()) {
      Network net = Network::load(fold_in);
      fold_batchnorm(net).save(fold_out);
      std::printf("folded %s -> %s\n", fold_in.c_str(), fold_out.c_str());
      return 0;
    }
    if (quant->parsed()) {
      Network net = Network::load(quant_in);
      QuantizationReport report;
      quantize_weights(net, QFormat::parse(quant_fmt), &report).save(quant_out);
      if (!quant_report.empty()) report.write_csv(quant_report);
      std::printf("quantized %s to %s -> %s (%lld saturated)\n", quant_in.c_str(),
                  quant_fmt.c_str(), quant_out.c_str(),
                  static_cast<long long>(report.total_saturated()));
      return 0;
    }
    if (exp->parsed()) {
      Network net = Network::load(exp_in);
      export_spiking(net).save(exp_out);
      std::printf("exported %s -> %s\n", exp_in.c_str(), exp_out.c_str());
      return 0;
    }
    if (sweep_p->parsed())
      return cmd_sweep_precision(sweep_models, sweep_formats, sweep_data, sweep_csv);
    if (sweep_o->parsed()) {
      if (!sweep_o_config.empty()) sweep_cfg = ExperimentConfig::from_json_file(sweep_o_config);
      return cmd_sweep_optimizers(sweep_cfg, sweep_o_data, sweep_optimizers, sweep_seeds,
                                  sweep_o_csv);
    }
    if (stats->parsed()) {
      stats_data.resolve();
      Dataset test = stats_data.load_test();
      SpikingModel model = SpikingModel::load(stats_model);
      EvalResult r = batch_evaluate(model, test);
      r.stats.write_csv(stats_csv);
      std::printf("accuracy %.6f, events %lld, stats -> %s\n", r.accuracy,
                  static_cast<long long>(r.stats.total_events()), stats_csv.c_str());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
