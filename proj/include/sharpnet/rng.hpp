#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace sharpnet {

/// PCG32-based generator. Hand-rolled distributions so that seeded runs are
/// bit-reproducible across standard libraries and platforms.
class Rng {
public:
  explicit Rng(uint64_t seed, uint64_t stream = 0x14057b7ef767814fULL) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  /// Uniform in [0, 1) with 24 bits of entropy.
  float uniform() { return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f; }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; second value of each pair is cached.
  float normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    float u1 = 1.0f - uniform(); // (0, 1]
    float u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(static_cast<double>(u1)));
    double a = 2.0 * 3.14159265358979323846 * static_cast<double>(u2);
    cached_ = static_cast<float>(r * std::sin(a));
    have_cached_ = true;
    return static_cast<float>(r * std::cos(a));
  }

  /// Uniform integer in [0, n).
  uint32_t below(uint32_t n) {
    return static_cast<uint32_t>((static_cast<uint64_t>(next_u32()) * n) >> 32);
  }

  template <class T> void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = below(static_cast<uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  uint64_t state_ = 0;
  uint64_t inc_ = 0;
  float cached_ = 0.0f;
  bool have_cached_ = false;
};

} // namespace sharpnet
