#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sharpnet/data.hpp"
#include "sharpnet/network.hpp"
#include "sharpnet/optimizer.hpp"
#include "sharpnet/scheduler.hpp"

namespace sharpnet {

/// One training run, fully described. The seed fixes every source of
/// randomness (weight init, shuffling), so equal configs produce identical
/// metrics files.
struct ExperimentConfig {
  // data
  std::string train_images, train_labels;
  std::string test_images, test_labels;
  int train_limit = 0; // 0 = use everything
  int test_limit = 0;

  // model: "dense-<units>x<layers>-<n>hot" or "conv-small-<n>hot"
  std::string preset = "dense-512x2-10hot";

  // optimization
  std::string optimizer = "adadelta";
  float learning_rate = -1.0f; // < 0 = the optimizer's default
  int epochs = 40;
  int batch_size = 128;
  uint64_t seed = 1;

  // sharpening schedule: "adaptive", "uniform", "programmed" or "none"
  std::string scheduler = "adaptive";
  float rate = 0.25f;
  float halt_threshold = 0.10f;
  float improvement_threshold = 0.01f;
  int resume_patience = 2;
  float initial_wait_fraction = 0.20f; // of max epochs
  int programmed_start = -1;           // -1: derived from initial_wait_fraction
  int programmed_duration = -1;        // -1: derived from rate

  std::string output_dir = "run";
  bool save_artifacts = true;

  static ExperimentConfig from_json_file(const std::string& path);
  void apply_json(const std::string& path);
  std::string to_json() const;
};

/// Builds the preset topology (batch-norm before every spiking activation).
Network build_preset(const ExperimentConfig& cfg, const std::vector<int>& input_shape);

struct ExperimentResult {
  // per-epoch traces (aligned with the metrics CSV)
  std::vector<double> train_loss;
  std::vector<double> test_accuracy;
  std::vector<double> spiking_accuracy; // all layers forced to s=1
  std::vector<double> gini_trace;

  double final_test_accuracy = 0.0;
  double final_spiking_accuracy = 0.0;
  bool fully_sharpened = false;

  // pre-sharpening checkpoint measurements
  double checkpoint_test_accuracy = 0.0;
  double checkpoint_gini = 0.0;
  int checkpoint_epoch = -1;
  double final_gini = 0.0;

  std::set<int> dead_classes; // over the test set, final network
  int skipped_updates = 0;    // optimizer steps refused on non-finite grads

  std::string metrics_csv, sharpening_csv;
  std::string checkpoint_model, final_model, folded_model, spiking_model;
};

/// Trains per the config, writing metrics.csv (one row per epoch),
/// sharpening.csv (one row per sharpness change), the pre-sharpening
/// checkpoint, the final / folded models and the spiking export. A run
/// that fails to converge still completes and records its metrics.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Accuracy of a framework network over a dataset (inference mode).
double framework_accuracy(const Network& net, const Dataset& data,
                          bool forced_spiking = false, int batch_size = 256);

} // namespace sharpnet
