#include "sharpnet/brelu.hpp"

namespace sharpnet {

Tensor brelu_forward(const Tensor& x, Sharpness sh) {
  const float alpha = sh.alpha();
  const float beta = sh.beta();
  Tensor out(x.shape());
  const float* in = x.data();
  float* y = out.data();
  const int64_t n = x.size();
  if (sh.fully_sharp()) {
    for (int64_t i = 0; i < n; ++i) y[i] = in[i] >= 0.5f ? 1.0f : 0.0f;
    return out;
  }
  const float slope = 1.0f / (beta - alpha);
  for (int64_t i = 0; i < n; ++i) {
    const float v = in[i];
    if (v >= beta) {
      y[i] = 1.0f;
    } else if (v <= alpha) {
      y[i] = 0.0f;
    } else {
      y[i] = (v - alpha) * slope;
    }
  }
  return out;
}

Tensor brelu_backward(const Tensor& x, Sharpness sh, const Tensor& upstream) {
  if (x.shape() != upstream.shape())
    throw DimensionError("brelu upstream shape " + upstream.shape_str() + " does not match input " + x.shape_str());
  Tensor out(x.shape());
  if (sh.fully_sharp()) return out; // zero everywhere
  const float alpha = sh.alpha();
  const float beta = sh.beta();
  const float slope = 1.0f / (beta - alpha);
  const float* in = x.data();
  const float* up = upstream.data();
  float* g = out.data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i)
    g[i] = (in[i] > alpha && in[i] < beta) ? up[i] * slope : 0.0f;
  return out;
}

} // namespace sharpnet
