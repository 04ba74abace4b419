#include "sharpnet/optimizer.hpp"

#include <cmath>

namespace sharpnet {

OptimizerKind optimizer_kind_from_name(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "adamax") return OptimizerKind::Adamax;
  if (name == "adadelta") return OptimizerKind::Adadelta;
  if (name == "rmsprop") return OptimizerKind::Rmsprop;
  throw ValidationError("unknown optimizer '" + name + "'");
}

const char* optimizer_kind_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Adamax: return "adamax";
    case OptimizerKind::Adadelta: return "adadelta";
    case OptimizerKind::Rmsprop: return "rmsprop";
  }
  return "?";
}

OptimizerConfig OptimizerConfig::defaults(OptimizerKind kind) {
  OptimizerConfig c;
  c.kind = kind;
  switch (kind) {
    case OptimizerKind::Sgd:
      c.learning_rate = 0.01f;
      break;
    case OptimizerKind::Adam:
    case OptimizerKind::Adamax:
      c.learning_rate = 1e-3f;
      c.epsilon = 1e-7f;
      break;
    case OptimizerKind::Adadelta:
      c.learning_rate = 1.0f;
      c.rho = 0.95f;
      c.epsilon = 1e-6f;
      break;
    case OptimizerKind::Rmsprop:
      c.learning_rate = 1e-3f;
      c.rho = 0.9f;
      c.epsilon = 1e-7f;
      break;
  }
  return c;
}

void Optimizer::step(std::span<ParamRef> params) {
  if (slots_.empty()) {
    slots_.resize(params.size());
    for (size_t p = 0; p < params.size(); ++p) {
      const size_t n = static_cast<size_t>(params[p].tensor->size());
      switch (config_.kind) {
        case OptimizerKind::Sgd:
          break;
        case OptimizerKind::Rmsprop:
          slots_[p].m.assign(n, 0.0f);
          break;
        case OptimizerKind::Adam:
        case OptimizerKind::Adamax:
        case OptimizerKind::Adadelta:
          slots_[p].m.assign(n, 0.0f);
          slots_[p].v.assign(n, 0.0f);
          break;
      }
    }
  }
  if (slots_.size() != params.size())
    throw ValidationError("optimizer was initialized for " + std::to_string(slots_.size()) +
                          " parameters, got " + std::to_string(params.size()));

  ++step_count_;
  const float lr = config_.learning_rate;
  const float b1 = config_.beta1, b2 = config_.beta2;
  const float rho = config_.rho, eps = config_.epsilon;
  // bias corrections for the adam family
  const double b1t = std::pow(static_cast<double>(b1), static_cast<double>(step_count_));
  const double b2t = std::pow(static_cast<double>(b2), static_cast<double>(step_count_));
  const float inv_corr1 = static_cast<float>(1.0 / (1.0 - b1t));
  const float inv_corr2 = static_cast<float>(1.0 / (1.0 - b2t));

  for (size_t p = 0; p < params.size(); ++p) {
    ParamRef& ref = params[p];
    Tensor& t = *ref.tensor;
    if (!t.has_grad())
      throw StateError("parameter " + ref.name + " has no gradient; run backward first");
    if (t.grad_values().size() != static_cast<size_t>(t.size()) ||
        (slots_[p].m.size() && slots_[p].m.size() != static_cast<size_t>(t.size())))
      throw DimensionError("slot/gradient shape mismatch for parameter " + ref.name);

    const float* g = t.grad();
    const int64_t n = t.size();
    for (int64_t i = 0; i < n; ++i)
      if (!std::isfinite(g[i]))
        throw NumericError("non-finite gradient in parameter " + ref.name);

    float* w = t.data();
    Slot& slot = slots_[p];
    switch (config_.kind) {
      case OptimizerKind::Sgd: {
        for (int64_t i = 0; i < n; ++i) w[i] -= lr * g[i];
        break;
      }
      case OptimizerKind::Adam: {
        for (int64_t i = 0; i < n; ++i) {
          slot.m[i] = b1 * slot.m[i] + (1.0f - b1) * g[i];
          slot.v[i] = b2 * slot.v[i] + (1.0f - b2) * g[i] * g[i];
          const float mhat = slot.m[i] * inv_corr1;
          const float vhat = slot.v[i] * inv_corr2;
          w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        break;
      }
      case OptimizerKind::Adamax: {
        for (int64_t i = 0; i < n; ++i) {
          slot.m[i] = b1 * slot.m[i] + (1.0f - b1) * g[i];
          slot.v[i] = std::max(b2 * slot.v[i], std::fabs(g[i]));
          w[i] -= (lr * inv_corr1) * slot.m[i] / (slot.v[i] + eps);
        }
        break;
      }
      case OptimizerKind::Adadelta: {
        // m: accumulated squared gradients, v: accumulated squared updates
        for (int64_t i = 0; i < n; ++i) {
          slot.m[i] = rho * slot.m[i] + (1.0f - rho) * g[i] * g[i];
          const float update = std::sqrt(slot.v[i] + eps) / std::sqrt(slot.m[i] + eps) * g[i];
          slot.v[i] = rho * slot.v[i] + (1.0f - rho) * update * update;
          w[i] -= lr * update;
        }
        break;
      }
      case OptimizerKind::Rmsprop: {
        for (int64_t i = 0; i < n; ++i) {
          slot.m[i] = rho * slot.m[i] + (1.0f - rho) * g[i] * g[i];
          w[i] -= lr * g[i] / (std::sqrt(slot.m[i]) + eps);
        }
        break;
      }
    }
  }
}

} // namespace sharpnet
