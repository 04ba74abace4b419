#include "sharpnet/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "sharpnet/error.hpp"

namespace sharpnet {

namespace {

uint32_t read_be32(std::ifstream& in, const std::string& path, std::streamoff& offset) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (in.gcount() != 4)
    throw FormatError(path + ": truncated at byte offset " + std::to_string(offset));
  offset += 4;
  return (static_cast<uint32_t>(buf[0]) << 24) | (static_cast<uint32_t>(buf[1]) << 16) |
         (static_cast<uint32_t>(buf[2]) << 8) | static_cast<uint32_t>(buf[3]);
}

} // namespace

Tensor Dataset::batch_images(int start, int n) const {
  const int h = images.dim(1), w = images.dim(2), c = images.dim(3);
  const int64_t stride = static_cast<int64_t>(h) * w * c;
  Tensor out({n, h, w, c});
  std::memcpy(out.data(), images.data() + start * stride,
              static_cast<size_t>(n * stride) * sizeof(float));
  return out;
}

Tensor Dataset::batch_labels(int start, int n) const {
  Tensor out({n, num_classes});
  for (int i = 0; i < n; ++i)
    out.at({i, labels[static_cast<size_t>(start + i)]}) = 1.0f;
  return out;
}

Tensor Dataset::gather_images(const std::vector<int>& idx, int start, int n) const {
  const int h = images.dim(1), w = images.dim(2), c = images.dim(3);
  const int64_t stride = static_cast<int64_t>(h) * w * c;
  Tensor out({n, h, w, c});
  for (int i = 0; i < n; ++i)
    std::memcpy(out.data() + i * stride,
                images.data() + static_cast<int64_t>(idx[static_cast<size_t>(start + i)]) * stride,
                static_cast<size_t>(stride) * sizeof(float));
  return out;
}

Tensor Dataset::gather_labels(const std::vector<int>& idx, int start, int n) const {
  Tensor out({n, num_classes});
  for (int i = 0; i < n; ++i)
    out.at({i, labels[static_cast<size_t>(idx[static_cast<size_t>(start + i)])]}) = 1.0f;
  return out;
}

Dataset Dataset::take(int n) const {
  if (n >= count()) return *this;
  if (n < 1) throw ValidationError("dataset subset size must be >= 1");
  Dataset d;
  d.images = batch_images(0, n);
  d.labels.assign(labels.begin(), labels.begin() + n);
  d.num_classes = num_classes;
  return d;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 int num_classes) {
  constexpr uint32_t kImagesMagic = 0x00000803;
  constexpr uint32_t kLabelsMagic = 0x00000801;

  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("cannot open " + images_path);
  std::streamoff img_off = 0;
  const uint32_t img_magic = read_be32(img, images_path, img_off);
  if (img_magic != kImagesMagic)
    throw FormatError(images_path + ": bad IDX magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%08x", img_magic);
      return std::string(buf);
    }() + ", expected 0x00000803");
  const uint32_t n_images = read_be32(img, images_path, img_off);
  const uint32_t rows = read_be32(img, images_path, img_off);
  const uint32_t cols = read_be32(img, images_path, img_off);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("cannot open " + labels_path);
  std::streamoff lab_off = 0;
  const uint32_t lab_magic = read_be32(lab, labels_path, lab_off);
  if (lab_magic != kLabelsMagic)
    throw FormatError(labels_path + ": bad IDX magic, expected 0x00000801");
  const uint32_t n_labels = read_be32(lab, labels_path, lab_off);

  if (n_images != n_labels)
    throw ValidationError("image count " + std::to_string(n_images) + " in " + images_path +
                          " does not match label count " + std::to_string(n_labels) + " in " +
                          labels_path);

  Dataset d;
  d.images = Tensor({static_cast<int>(n_images), static_cast<int>(rows), static_cast<int>(cols), 1});
  const size_t pixels = static_cast<size_t>(rows) * cols;
  std::vector<unsigned char> buf(pixels);
  float* dst = d.images.data();
  for (uint32_t i = 0; i < n_images; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (static_cast<size_t>(img.gcount()) != pixels)
      throw FormatError(images_path + ": truncated at byte offset " +
                        std::to_string(img_off + img.gcount()));
    img_off += static_cast<std::streamoff>(pixels);
    for (size_t p = 0; p < pixels; ++p) dst[p] = static_cast<float>(buf[p]) / 255.0f;
    dst += pixels;
  }

  d.labels.resize(n_labels);
  std::vector<unsigned char> lbuf(n_labels);
  lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(n_labels));
  if (static_cast<size_t>(lab.gcount()) != n_labels)
    throw FormatError(labels_path + ": truncated at byte offset " +
                      std::to_string(lab_off + lab.gcount()));
  int max_label = 0;
  for (uint32_t i = 0; i < n_labels; ++i) {
    d.labels[i] = lbuf[i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.num_classes = num_classes > 0 ? num_classes : std::max(10, max_label + 1);
  if (max_label >= d.num_classes)
    throw ValidationError(labels_path + ": label " + std::to_string(max_label) +
                          " exceeds class count " + std::to_string(d.num_classes));
  return d;
}

} // namespace sharpnet
