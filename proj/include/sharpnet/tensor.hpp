#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "sharpnet/error.hpp"

namespace sharpnet {

/// Dense row-major n-dimensional float32 buffer with an optional
/// gradient buffer of the same shape. Gradients accumulate additively;
/// callers zero them explicitly between steps.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<float> values);

  static Tensor full(std::vector<int> shape, float value);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  bool has_grad() const { return !grad_.empty(); }
  void ensure_grad();
  void zero_grad();
  void drop_grad() { grad_.clear(); }
  float* grad() { return grad_.data(); }
  const float* grad() const { return grad_.data(); }
  std::vector<float>& grad_values() { return grad_; }
  const std::vector<float>& grad_values() const { return grad_; }

  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  float& at(std::initializer_list<int> idx) { return data_[static_cast<size_t>(offset(idx))]; }
  float at(std::initializer_list<int> idx) const { return data_[static_cast<size_t>(offset(idx))]; }

  /// Same data, new shape (element count must match).
  Tensor reshaped(std::vector<int> new_shape) const;

  std::string shape_str() const;
  static std::string shape_str(const std::vector<int>& shape);

private:
  int64_t offset(std::initializer_list<int> idx) const;

  std::vector<int> shape_;
  std::vector<float> data_;
  std::vector<float> grad_;
};

enum class Padding { Valid, Same };

// ---- ops ------------------------------------------------------------------
// Forward functions are pure; *_backward functions accumulate into the
// operand tensors' grad buffers.

Tensor matmul(const Tensor& a, const Tensor& b);
void matmul_backward(Tensor& a, Tensor& b, const Tensor& upstream,
                     bool grad_a = true, bool grad_b = true);

struct ConvGeometry {
  int out_h = 0, out_w = 0;
  int pad_top = 0, pad_left = 0;
};
ConvGeometry conv_geometry(int in_h, int in_w, int kernel_h, int kernel_w,
                           int stride_h, int stride_w, Padding padding);

/// input NHWC, kernels [kh, kw, cin, cout]; cross-correlation (no kernel flip).
Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride_h,
              int stride_w, Padding padding);
void conv2d_backward(Tensor& input, Tensor& kernels, const Tensor& upstream,
                     int stride_h, int stride_w, Padding padding,
                     bool grad_input = true, bool grad_kernels = true);

Tensor maxpool2d(const Tensor& input, int pool_h, int pool_w, int stride_h,
                 int stride_w);
void maxpool2d_backward(Tensor& input, const Tensor& upstream, int pool_h,
                        int pool_w, int stride_h, int stride_w);

struct SoftmaxXent {
  double loss = 0.0;       // mean over the batch
  Tensor grad;             // d loss / d logits, already divided by batch size
  Tensor probabilities;    // softmax(logits), row per sample
};

/// logits [batch, classes], labels one-hot rows summing to 1.
SoftmaxXent softmax_crossentropy(const Tensor& logits, const Tensor& labels);

} // namespace sharpnet
