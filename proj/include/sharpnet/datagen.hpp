#pragma once

#include <cstdint>
#include <string>

namespace sharpnet {

/// Writes a deterministic synthetic handwritten-digit dataset in IDX format
/// (28x28 grayscale, 10 classes). Digits are stroke glyphs randomized by
/// affine deformation, per-point jitter, stroke-width variation and pixel
/// noise. Same seed, same bytes, on any platform. Useful as an offline
/// stand-in when the real MNIST files are not available.
void write_synthetic_digits(const std::string& images_path,
                            const std::string& labels_path, int count,
                            uint64_t seed);

} // namespace sharpnet
