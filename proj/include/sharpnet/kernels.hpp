#pragma once

#include <cstdint>

namespace sharpnet::kernels {

// Row-major GEMM: C[m,n] = A[m,k] * B[k,n] (or += with accumulate=true).
// Every output element is accumulated over k in ascending order. The spiking
// runtime and the training framework both route dense math through this
// kernel, which is what makes exported-model inference bit-identical to
// framework inference.
void gemm(const float* a, const float* b, float* c, int m, int k, int n,
          bool accumulate = false);

// dst[cols,rows] = src[rows,cols]^T, both row-major.
void transpose(const float* src, float* dst, int rows, int cols);

// out[j] += w[j] for every fired input's weight row; rows visited in
// ascending input order. `fired` holds the indices of inputs equal to one.
void event_accumulate(const float* w, const int* fired, int fired_count,
                      float* out, int out_dim);

} // namespace sharpnet::kernels
