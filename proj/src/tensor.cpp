#include "sharpnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "sharpnet/kernels.hpp"

namespace sharpnet {

namespace {

int64_t shape_product(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + Tensor::shape_str(shape));
    n *= d;
  }
  return n;
}

} // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(shape_product(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_product(shape_) != static_cast<int64_t>(data_.size()))
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
}

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

void Tensor::ensure_grad() {
  if (grad_.empty()) grad_.assign(data_.size(), 0.0f);
}

void Tensor::zero_grad() {
  if (!grad_.empty()) std::fill(grad_.begin(), grad_.end(), 0.0f);
}

Tensor Tensor::reshaped(std::vector<int> new_shape) const {
  if (shape_product(new_shape) != size())
    throw DimensionError("cannot reshape " + shape_str() + " to " + shape_str(new_shape));
  Tensor t;
  t.shape_ = std::move(new_shape);
  t.data_ = data_;
  return t;
}

int64_t Tensor::offset(std::initializer_list<int> idx) const {
  int64_t off = 0;
  size_t i = 0;
  for (int v : idx) {
    off = off * shape_[i] + v;
    ++i;
  }
  return off;
}

std::string Tensor::shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::string Tensor::shape_str() const { return shape_str(shape_); }

// ---- matmul ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul expects rank-2 tensors, got " + a.shape_str() + " and " + b.shape_str());
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul inner dimensions differ: " + a.shape_str() + " vs " + b.shape_str());
  Tensor out({a.dim(0), b.dim(1)});
  kernels::gemm(a.data(), b.data(), out.data(), a.dim(0), a.dim(1), b.dim(1));
  return out;
}

void matmul_backward(Tensor& a, Tensor& b, const Tensor& upstream, bool grad_a,
                     bool grad_b) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (upstream.rank() != 2 || upstream.dim(0) != m || upstream.dim(1) != n)
    throw DimensionError("matmul upstream shape " + upstream.shape_str() + " does not match [" +
                         std::to_string(m) + "x" + std::to_string(n) + "]");
  if (grad_a) {
    // grad_a = upstream * b^T
    a.ensure_grad();
    std::vector<float> bt(static_cast<size_t>(k) * n);
    kernels::transpose(b.data(), bt.data(), k, n);
    kernels::gemm(upstream.data(), bt.data(), a.grad(), m, n, k, /*accumulate=*/true);
  }
  if (grad_b) {
    // grad_b = a^T * upstream
    b.ensure_grad();
    std::vector<float> at(static_cast<size_t>(m) * k);
    kernels::transpose(a.data(), at.data(), m, k);
    kernels::gemm(at.data(), upstream.data(), b.grad(), k, m, n, /*accumulate=*/true);
  }
}

// ---- conv2d ---------------------------------------------------------------

ConvGeometry conv_geometry(int in_h, int in_w, int kernel_h, int kernel_w,
                           int stride_h, int stride_w, Padding padding) {
  if (stride_h < 1 || stride_w < 1)
    throw ValidationError("conv2d stride must be >= 1");
  ConvGeometry g;
  if (padding == Padding::Same) {
    g.out_h = (in_h + stride_h - 1) / stride_h;
    g.out_w = (in_w + stride_w - 1) / stride_w;
    int pad_h = std::max(0, (g.out_h - 1) * stride_h + kernel_h - in_h);
    int pad_w = std::max(0, (g.out_w - 1) * stride_w + kernel_w - in_w);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    if (kernel_h > in_h || kernel_w > in_w)
      throw DimensionError("conv2d kernel " + std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                           " larger than input " + std::to_string(in_h) + "x" + std::to_string(in_w));
    g.out_h = (in_h - kernel_h) / stride_h + 1;
    g.out_w = (in_w - kernel_w) / stride_w + 1;
  }
  return g;
}

namespace {

void check_conv_shapes(const Tensor& input, const Tensor& kernels) {
  if (input.rank() != 4)
    throw DimensionError("conv2d input must be NHWC rank-4, got " + input.shape_str());
  if (kernels.rank() != 4)
    throw DimensionError("conv2d kernels must be [kh,kw,cin,cout] rank-4, got " + kernels.shape_str());
  if (input.dim(3) != kernels.dim(2))
    throw DimensionError("conv2d channel mismatch: input " + input.shape_str() + " has " +
                         std::to_string(input.dim(3)) + " channels, kernels " + kernels.shape_str() +
                         " expect " + std::to_string(kernels.dim(2)));
}

// col is [N*out_h*out_w, kh*kw*cin]; out-of-bounds taps are zero.
void im2col(const Tensor& input, int kernel_h, int kernel_w, int stride_h,
            int stride_w, const ConvGeometry& g, float* col) {
  const int n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const int patch = kernel_h * kernel_w * c;
  const float* x = input.data();
  size_t r = 0;
  for (int img = 0; img < n; ++img) {
    const float* xi = x + static_cast<size_t>(img) * h * w * c;
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox, ++r) {
        float* dst = col + r * patch;
        const int iy0 = oy * stride_h - g.pad_top;
        const int ix0 = ox * stride_w - g.pad_left;
        for (int ky = 0; ky < kernel_h; ++ky) {
          const int iy = iy0 + ky;
          for (int kx = 0; kx < kernel_w; ++kx) {
            const int ix = ix0 + kx;
            float* cell = dst + (static_cast<size_t>(ky) * kernel_w + kx) * c;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
              std::memset(cell, 0, sizeof(float) * static_cast<size_t>(c));
            } else {
              std::memcpy(cell, xi + (static_cast<size_t>(iy) * w + ix) * c, sizeof(float) * static_cast<size_t>(c));
            }
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, int kernel_h, int kernel_w, int stride_h,
                int stride_w, const ConvGeometry& g, int n, int h, int w, int c,
                float* grad_x) {
  const int patch = kernel_h * kernel_w * c;
  size_t r = 0;
  for (int img = 0; img < n; ++img) {
    float* gi = grad_x + static_cast<size_t>(img) * h * w * c;
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox, ++r) {
        const float* src = col + r * patch;
        const int iy0 = oy * stride_h - g.pad_top;
        const int ix0 = ox * stride_w - g.pad_left;
        for (int ky = 0; ky < kernel_h; ++ky) {
          const int iy = iy0 + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kernel_w; ++kx) {
            const int ix = ix0 + kx;
            if (ix < 0 || ix >= w) continue;
            const float* cell = src + (static_cast<size_t>(ky) * kernel_w + kx) * c;
            float* dst = gi + (static_cast<size_t>(iy) * w + ix) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += cell[ch];
          }
        }
      }
    }
  }
}

} // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride_h,
              int stride_w, Padding padding) {
  check_conv_shapes(input, kernels);
  const int n = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int kh = kernels.dim(0), kw = kernels.dim(1), cin = kernels.dim(2), cout = kernels.dim(3);
  ConvGeometry g = conv_geometry(h, w, kh, kw, stride_h, stride_w, padding);

  const int rows = n * g.out_h * g.out_w;
  const int patch = kh * kw * cin;
  std::vector<float> col(static_cast<size_t>(rows) * patch);
  im2col(input, kh, kw, stride_h, stride_w, g, col.data());

  Tensor out({n, g.out_h, g.out_w, cout});
  // kernels are already the [patch, cout] matrix in row-major order
  kernels::gemm(col.data(), kernels.data(), out.data(), rows, patch, cout);
  return out;
}

void conv2d_backward(Tensor& input, Tensor& kernels, const Tensor& upstream,
                     int stride_h, int stride_w, Padding padding,
                     bool grad_input, bool grad_kernels) {
  check_conv_shapes(input, kernels);
  const int n = input.dim(0), h = input.dim(1), w = input.dim(2), cin = input.dim(3);
  const int kh = kernels.dim(0), kw = kernels.dim(1), cout = kernels.dim(3);
  ConvGeometry g = conv_geometry(h, w, kh, kw, stride_h, stride_w, padding);
  if (upstream.rank() != 4 || upstream.dim(0) != n || upstream.dim(1) != g.out_h ||
      upstream.dim(2) != g.out_w || upstream.dim(3) != cout)
    throw DimensionError("conv2d upstream shape " + upstream.shape_str() + " does not match output geometry");

  const int rows = n * g.out_h * g.out_w;
  const int patch = kh * kw * cin;

  if (grad_kernels) {
    std::vector<float> col(static_cast<size_t>(rows) * patch);
    im2col(input, kh, kw, stride_h, stride_w, g, col.data());
    kernels.ensure_grad();
    // grad_kernels = col^T * upstream
    std::vector<float> colt(col.size());
    kernels::transpose(col.data(), colt.data(), rows, patch);
    kernels::gemm(colt.data(), upstream.data(), kernels.grad(), patch, rows, cout, /*accumulate=*/true);
  }

  if (grad_input) {
    input.ensure_grad();
    // grad_col = upstream * kernels^T, scattered back through col2im
    std::vector<float> kt(static_cast<size_t>(patch) * cout);
    kernels::transpose(kernels.data(), kt.data(), patch, cout);
    std::vector<float> grad_col(static_cast<size_t>(rows) * patch);
    kernels::gemm(upstream.data(), kt.data(), grad_col.data(), rows, cout, patch);
    col2im_add(grad_col.data(), kh, kw, stride_h, stride_w, g, n, h, w, cin, input.grad());
  }
}

// ---- maxpool2d --------------------------------------------------------------

Tensor maxpool2d(const Tensor& input, int pool_h, int pool_w, int stride_h,
                 int stride_w) {
  if (input.rank() != 4)
    throw DimensionError("maxpool2d input must be NHWC rank-4, got " + input.shape_str());
  if (stride_h < 1 || stride_w < 1) throw ValidationError("maxpool2d stride must be >= 1");
  const int n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  if (pool_h > h || pool_w > w)
    throw DimensionError("maxpool2d window " + std::to_string(pool_h) + "x" + std::to_string(pool_w) +
                         " larger than input " + std::to_string(h) + "x" + std::to_string(w));
  const int out_h = (h - pool_h) / stride_h + 1;
  const int out_w = (w - pool_w) / stride_w + 1;
  Tensor out({n, out_h, out_w, c});
  const float* x = input.data();
  float* y = out.data();
  for (int img = 0; img < n; ++img) {
    const float* xi = x + static_cast<size_t>(img) * h * w * c;
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        float* cell = y + (((static_cast<size_t>(img) * out_h + oy) * out_w) + ox) * c;
        for (int ch = 0; ch < c; ++ch) {
          float best = -std::numeric_limits<float>::infinity();
          for (int py = 0; py < pool_h; ++py) {
            for (int px = 0; px < pool_w; ++px) {
              float v = xi[((static_cast<size_t>(oy * stride_h + py) * w) + (ox * stride_w + px)) * c + ch];
              if (v > best) best = v; // first occurrence wins ties
            }
          }
          cell[ch] = best;
        }
      }
    }
  }
  return out;
}

void maxpool2d_backward(Tensor& input, const Tensor& upstream, int pool_h,
                        int pool_w, int stride_h, int stride_w) {
  const int n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const int out_h = (h - pool_h) / stride_h + 1;
  const int out_w = (w - pool_w) / stride_w + 1;
  if (upstream.rank() != 4 || upstream.dim(0) != n || upstream.dim(1) != out_h ||
      upstream.dim(2) != out_w || upstream.dim(3) != c)
    throw DimensionError("maxpool2d upstream shape " + upstream.shape_str() + " does not match output geometry");
  input.ensure_grad();
  const float* x = input.data();
  float* gx = input.grad();
  const float* gy = upstream.data();
  for (int img = 0; img < n; ++img) {
    const size_t base = static_cast<size_t>(img) * h * w * c;
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        const float* gcell = gy + (((static_cast<size_t>(img) * out_h + oy) * out_w) + ox) * c;
        for (int ch = 0; ch < c; ++ch) {
          float best = -std::numeric_limits<float>::infinity();
          size_t best_idx = 0;
          for (int py = 0; py < pool_h; ++py) {
            for (int px = 0; px < pool_w; ++px) {
              size_t idx = base + ((static_cast<size_t>(oy * stride_h + py) * w) + (ox * stride_w + px)) * c + ch;
              if (x[idx] > best) {
                best = x[idx];
                best_idx = idx;
              }
            }
          }
          gx[best_idx] += gcell[ch];
        }
      }
    }
  }
}

// ---- softmax cross-entropy ---------------------------------------------------

SoftmaxXent softmax_crossentropy(const Tensor& logits, const Tensor& labels) {
  if (logits.rank() != 2 || labels.rank() != 2)
    throw DimensionError("softmax_crossentropy expects rank-2 logits and labels");
  if (logits.shape() != labels.shape())
    throw DimensionError("softmax_crossentropy shape mismatch: " + logits.shape_str() + " vs " + labels.shape_str());
  const int batch = logits.dim(0), classes = logits.dim(1);

  SoftmaxXent result;
  result.grad = Tensor({batch, classes});
  result.probabilities = Tensor({batch, classes});
  double total = 0.0;
  for (int i = 0; i < batch; ++i) {
    const float* row = logits.data() + static_cast<size_t>(i) * classes;
    const float* y = labels.data() + static_cast<size_t>(i) * classes;
    double ysum = 0.0;
    for (int j = 0; j < classes; ++j) {
      if (y[j] < -1e-6f)
        throw ValidationError("label row " + std::to_string(i) + " has negative entry");
      ysum += y[j];
    }
    if (std::abs(ysum - 1.0) > 1e-4)
      throw ValidationError("label row " + std::to_string(i) + " sums to " + std::to_string(ysum) +
                            ", expected 1");
    double mx = row[0];
    for (int j = 1; j < classes; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0.0;
    for (int j = 0; j < classes; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
    const double logz = std::log(z);
    float* p = result.probabilities.data() + static_cast<size_t>(i) * classes;
    float* g = result.grad.data() + static_cast<size_t>(i) * classes;
    for (int j = 0; j < classes; ++j) {
      double pj = std::exp(static_cast<double>(row[j]) - mx) / z;
      p[j] = static_cast<float>(pj);
      g[j] = static_cast<float>((pj - static_cast<double>(y[j])) / batch);
      total -= static_cast<double>(y[j]) * (static_cast<double>(row[j]) - mx - logz);
    }
  }
  result.loss = total / batch;
  return result;
}

} // namespace sharpnet
