#include "sharpnet/kernels.hpp"

#include <cstring>

namespace sharpnet::kernels {

void gemm(const float* a, const float* b, float* c, int m, int k, int n,
          bool accumulate) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<size_t>(i) * n;
    if (!accumulate) std::memset(crow, 0, sizeof(float) * static_cast<size_t>(n));
    const float* arow = a + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const float av = arow[kk];
      const float* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void transpose(const float* src, float* dst, int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      dst[static_cast<size_t>(j) * rows + i] = src[static_cast<size_t>(i) * cols + j];
}

void event_accumulate(const float* w, const int* fired, int fired_count,
                      float* out, int out_dim) {
  for (int f = 0; f < fired_count; ++f) {
    const float* wrow = w + static_cast<size_t>(fired[f]) * out_dim;
    for (int j = 0; j < out_dim; ++j) out[j] += wrow[j];
  }
}

} // namespace sharpnet::kernels
