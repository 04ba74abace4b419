#pragma once

#include <string>
#include <vector>

#include "sharpnet/tensor.hpp"

namespace sharpnet {

/// Labelled image dataset: images in [0,1], NHWC, plus integer and one-hot
/// labels.
struct Dataset {
  Tensor images;        // [N, H, W, C]
  std::vector<int> labels;
  int num_classes = 0;

  int count() const { return images.empty() ? 0 : images.dim(0); }

  /// Copy of samples [start, start+n) as a batch tensor.
  Tensor batch_images(int start, int n) const;
  /// One-hot labels for samples [start, start+n), shape [n, num_classes].
  Tensor batch_labels(int start, int n) const;
  /// Gathered copies for an arbitrary index set (training shuffles).
  Tensor gather_images(const std::vector<int>& idx, int start, int n) const;
  Tensor gather_labels(const std::vector<int>& idx, int start, int n) const;

  /// First n samples (n <= count). Used for reduced-fraction training runs.
  Dataset take(int n) const;
};

/// Reads an IDX image/label file pair (the MNIST container format):
/// big-endian magic 0x00000803 for images and 0x00000801 for labels.
/// Pixels are scaled to [0,1]; image and label counts must agree.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 int num_classes = 0); // 0 = max label + 1, at least 10

} // namespace sharpnet
