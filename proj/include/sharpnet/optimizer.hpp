#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sharpnet/network.hpp"

namespace sharpnet {

enum class OptimizerKind { Sgd, Adam, Adamax, Adadelta, Rmsprop };

OptimizerKind optimizer_kind_from_name(const std::string& name);
const char* optimizer_kind_name(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  float learning_rate = 0.01f;
  float beta1 = 0.9f;    // adam, adamax
  float beta2 = 0.999f;  // adam, adamax
  float rho = 0.95f;     // adadelta, rmsprop
  float epsilon = 1e-7f;

  /// Framework-standard defaults per kind (adadelta runs at lr=1.0 with
  /// rho=0.95, adam family at lr=1e-3, ...).
  static OptimizerConfig defaults(OptimizerKind kind);
};

/// Owns per-parameter slot buffers; exclusively bound to one parameter set.
class Optimizer {
public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {}

  /// Applies one update step to every parameter from its accumulated
  /// gradient. Throws NumericError naming the parameter if a gradient is
  /// not finite; parameters are untouched in that case.
  void step(std::span<ParamRef> params);

  int64_t step_count() const { return step_count_; }
  const OptimizerConfig& config() const { return config_; }

private:
  struct Slot {
    std::vector<float> m; // first moment / squared-grad accumulator
    std::vector<float> v; // second moment / squared-update accumulator
  };

  OptimizerConfig config_;
  std::vector<Slot> slots_;
  int64_t step_count_ = 0;
};

} // namespace sharpnet
