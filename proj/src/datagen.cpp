#include "sharpnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "sharpnet/error.hpp"
#include "sharpnet/rng.hpp"

namespace sharpnet {

namespace {

struct Pt {
  float x, y;
};

using Polyline = std::vector<Pt>;
using Glyph = std::vector<Polyline>;

Polyline ellipse(float cx, float cy, float rx, float ry, int segments = 12) {
  Polyline p;
  for (int i = 0; i <= segments; ++i) {
    const float a = 2.0f * 3.14159265f * static_cast<float>(i) / segments;
    p.push_back({cx + rx * std::sin(a), cy - ry * std::cos(a)});
  }
  return p;
}

// Stroke skeletons in the unit square, y pointing down. Some digits have a
// second handwriting variant.
std::vector<std::vector<Glyph>> make_glyphs() {
  std::vector<std::vector<Glyph>> g(10);
  g[0] = {{ellipse(0.50f, 0.50f, 0.22f, 0.32f)}};
  g[1] = {
      {{{0.38f, 0.28f}, {0.52f, 0.14f}, {0.52f, 0.86f}}},
      {{{0.38f, 0.28f}, {0.52f, 0.14f}, {0.52f, 0.86f}}, {{0.36f, 0.86f}, {0.68f, 0.86f}}},
  };
  g[2] = {{{{0.28f, 0.30f}, {0.32f, 0.18f}, {0.45f, 0.12f}, {0.60f, 0.14f}, {0.70f, 0.24f},
            {0.70f, 0.36f}, {0.60f, 0.50f}, {0.45f, 0.62f}, {0.32f, 0.74f}, {0.28f, 0.86f},
            {0.74f, 0.86f}}}};
  g[3] = {{{{0.30f, 0.18f}, {0.45f, 0.12f}, {0.62f, 0.16f}, {0.68f, 0.28f}, {0.62f, 0.40f},
            {0.48f, 0.46f}},
           {{0.48f, 0.46f}, {0.64f, 0.52f}, {0.72f, 0.66f}, {0.64f, 0.82f}, {0.46f, 0.88f},
            {0.30f, 0.82f}}}};
  g[4] = {{{{0.55f, 0.12f}, {0.26f, 0.56f}, {0.78f, 0.56f}}, {{0.62f, 0.30f}, {0.62f, 0.88f}}}};
  g[5] = {{{{0.70f, 0.14f}, {0.32f, 0.14f}, {0.30f, 0.46f}},
           {{0.30f, 0.46f}, {0.50f, 0.42f}, {0.66f, 0.48f}, {0.72f, 0.62f}, {0.66f, 0.78f},
            {0.48f, 0.86f}, {0.30f, 0.80f}}}};
  g[6] = {{{{0.64f, 0.12f}, {0.48f, 0.20f}, {0.36f, 0.36f}, {0.30f, 0.56f}, {0.32f, 0.72f}},
           ellipse(0.50f, 0.68f, 0.19f, 0.18f, 10)}};
  g[7] = {
      {{{0.26f, 0.14f}, {0.74f, 0.14f}, {0.42f, 0.88f}}},
      {{{0.26f, 0.14f}, {0.74f, 0.14f}, {0.42f, 0.88f}}, {{0.38f, 0.50f}, {0.64f, 0.50f}}},
  };
  g[8] = {{ellipse(0.50f, 0.30f, 0.17f, 0.17f, 10), ellipse(0.50f, 0.68f, 0.20f, 0.19f, 10)}};
  g[9] = {{ellipse(0.50f, 0.32f, 0.18f, 0.17f, 10),
           {{0.68f, 0.34f}, {0.66f, 0.60f}, {0.56f, 0.88f}}}};
  return g;
}

float dist_to_segment(float px, float py, const Pt& a, const Pt& b) {
  const float dx = b.x - a.x, dy = b.y - a.y;
  const float len2 = dx * dx + dy * dy;
  float t = len2 > 0.0f ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0f;
  t = std::clamp(t, 0.0f, 1.0f);
  const float qx = a.x + t * dx - px, qy = a.y + t * dy - py;
  return std::sqrt(qx * qx + qy * qy);
}

void write_be32(std::ofstream& out, uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

} // namespace

void write_synthetic_digits(const std::string& images_path,
                            const std::string& labels_path, int count,
                            uint64_t seed) {
  if (count < 1) throw ValidationError("synthetic dataset needs count >= 1");
  const int size = 28;
  static const std::vector<std::vector<Glyph>> glyphs = make_glyphs();

  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  if (!img) throw FormatError("cannot open " + images_path + " for writing");
  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  if (!lab) throw FormatError("cannot open " + labels_path + " for writing");

  write_be32(img, 0x00000803);
  write_be32(img, static_cast<uint32_t>(count));
  write_be32(img, static_cast<uint32_t>(size));
  write_be32(img, static_cast<uint32_t>(size));
  write_be32(lab, 0x00000801);
  write_be32(lab, static_cast<uint32_t>(count));

  Rng rng(seed);
  std::vector<unsigned char> pixels(static_cast<size_t>(size) * size);
  std::vector<std::pair<Pt, Pt>> segments;

  for (int s = 0; s < count; ++s) {
    const int digit = static_cast<int>(rng.below(10));
    const auto& variants = glyphs[static_cast<size_t>(digit)];
    const Glyph& glyph = variants[rng.below(static_cast<uint32_t>(variants.size()))];

    // random affine about the glyph center
    const float angle = rng.uniform(-0.22f, 0.22f);
    const float sx = rng.uniform(0.80f, 1.12f);
    const float sy = rng.uniform(0.80f, 1.12f);
    const float shear = rng.uniform(-0.18f, 0.18f);
    const float tx = rng.uniform(-0.07f, 0.07f);
    const float ty = rng.uniform(-0.07f, 0.07f);
    const float ca = std::cos(angle), sa = std::sin(angle);
    const float thickness = rng.uniform(0.030f, 0.060f);
    const float brightness = rng.uniform(0.78f, 1.0f);

    segments.clear();
    for (const Polyline& line : glyph) {
      Pt prev{};
      bool has_prev = false;
      for (const Pt& p : line) {
        float x = p.x - 0.5f + 0.012f * rng.normal();
        float y = p.y - 0.5f + 0.012f * rng.normal();
        x += shear * y;
        const float rx = ca * x - sa * y;
        const float ry = sa * x + ca * y;
        Pt q{0.5f + sx * rx + tx, 0.5f + sy * ry + ty};
        if (has_prev) segments.emplace_back(prev, q);
        prev = q;
        has_prev = true;
      }
    }

    const float aa = 0.035f;
    const float reach = thickness + aa;
    std::fill(pixels.begin(), pixels.end(), 0);
    for (const auto& [a, b] : segments) {
      const float lox = std::min(a.x, b.x) - reach, hix = std::max(a.x, b.x) + reach;
      const float loy = std::min(a.y, b.y) - reach, hiy = std::max(a.y, b.y) + reach;
      const int x0 = std::max(0, static_cast<int>(lox * size));
      const int x1 = std::min(size - 1, static_cast<int>(hix * size) + 1);
      const int y0 = std::max(0, static_cast<int>(loy * size));
      const int y1 = std::min(size - 1, static_cast<int>(hiy * size) + 1);
      for (int py = y0; py <= y1; ++py) {
        const float fy = (static_cast<float>(py) + 0.5f) / size;
        for (int px = x0; px <= x1; ++px) {
          const float fx = (static_cast<float>(px) + 0.5f) / size;
          const float d = dist_to_segment(fx, fy, a, b);
          const float ink = std::clamp((thickness + aa - d) / aa, 0.0f, 1.0f);
          auto& cell = pixels[static_cast<size_t>(py) * size + px];
          const float existing = static_cast<float>(cell) / 255.0f;
          const float merged = std::max(existing, ink * brightness);
          cell = static_cast<unsigned char>(std::lround(merged * 255.0f));
        }
      }
    }
    // pixel noise over the whole frame
    for (auto& cell : pixels) {
      float v = static_cast<float>(cell) / 255.0f + 0.03f * rng.normal();
      cell = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }

    img.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    const unsigned char label = static_cast<unsigned char>(digit);
    lab.write(reinterpret_cast<const char*>(&label), 1);
  }
  if (!img || !lab) throw FormatError("short write while generating dataset");
}

} // namespace sharpnet
