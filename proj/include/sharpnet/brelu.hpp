#pragma once

#include "sharpnet/error.hpp"
#include "sharpnet/tensor.hpp"

namespace sharpnet {

/// Sharpness of a bounded-ReLU activation. s=0 is the standard bounded ReLU
/// on [0,1]; s=1 is a step at 0.5. alpha and beta stay symmetric about 0.5
/// so the half-spike point never moves while the slope steepens.
struct Sharpness {
  float s = 0.0f;

  Sharpness() = default;
  explicit Sharpness(float value) : s(value) {
    if (!(value >= 0.0f && value <= 1.0f))
      throw ValidationError("sharpness must lie in [0,1], got " + std::to_string(value));
  }

  float alpha() const { return 0.5f * s; }
  float beta() const { return 1.0f - 0.5f * s; }
  bool fully_sharp() const { return s >= 1.0f; }
};

/// Elementwise: 1 for x >= beta, 0 for x <= alpha, linear ramp between.
/// At s=1 this is the Heaviside step at 0.5 (x >= 0.5 spikes).
Tensor brelu_forward(const Tensor& x, Sharpness sh);

/// Elementwise surrogate gradient: 1/(beta-alpha) strictly inside
/// (alpha, beta), zero outside. At s=1 the interval is empty and the
/// gradient vanishes everywhere; no straight-through estimate is applied.
Tensor brelu_backward(const Tensor& x, Sharpness sh, const Tensor& upstream);

} // namespace sharpnet
