#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sharpnet/encoding.hpp"
#include "test_util.hpp"

using namespace sharpnet;

TEST_CASE("population sums") {
  // n=1 is the identity mapping
  NHotCode one(3, 1);
  Tensor acts({2, 3}, {1, 0, 1, 0.5f, 0.25f, 0});
  Tensor sums = population_logits(acts, one);
  CHECK(sums.values() == acts.values());

  // n=2, C=2: [1,0,1,1] -> [1,2]
  NHotCode two(2, 2);
  Tensor a2({1, 4}, {1, 0, 1, 1});
  Tensor s2 = population_logits(a2, two);
  CHECK(s2[0] == 1.0f);
  CHECK(s2[1] == 2.0f);

  Tensor wrong({1, 3});
  CHECK_THROWS_AS(population_logits(wrong, two), DimensionError);
}

TEST_CASE("population sums equal an independent per-class count") {
  Rng rng(7);
  NHotCode code(10, 4);
  Tensor acts({8, 40});
  for (auto& v : acts.values()) v = rng.below(2) ? 1.0f : 0.0f;
  Tensor sums = population_logits(acts, code);
  for (int i = 0; i < 8; ++i)
    for (int c = 0; c < 10; ++c) {
      int count = 0;
      for (int j = 0; j < 40; ++j)
        if (j / 4 == c && acts[i * 40 + j] == 1.0f) ++count;
      CHECK(sums.at({i, c}) == static_cast<float>(count));
    }
}

TEST_CASE("population gradient broadcasts over blocks") {
  NHotCode code(2, 3);
  Tensor up({1, 2}, {0.5f, -1.0f});
  Tensor g = population_logits_backward(up, code);
  for (int j = 0; j < 3; ++j) CHECK(g[j] == 0.5f);
  for (int j = 3; j < 6; ++j) CHECK(g[j] == -1.0f);
}

TEST_CASE("decode picks the block with the most activity") {
  NHotCode code(10, 4);
  Tensor acts({1, 40});
  for (int j = 12; j < 16; ++j) acts[j] = 1.0f; // class 3's block
  CHECK(decode_prediction(acts, code)[0] == 3);

  // all-zero output decodes to class 0 by tie-break
  Tensor dead({1, 40});
  CHECK(decode_prediction(dead, code)[0] == 0);
}

TEST_CASE("decode agrees with softmax argmax") {
  Rng rng(15);
  NHotCode code(10, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor acts({1, 40});
    for (auto& v : acts.values()) v = rng.below(2) ? 1.0f : 0.0f;
    const int decoded = decode_prediction(acts, code)[0];

    // softmax over class sums preserves the maximum
    Tensor sums = population_logits(acts, code);
    double best = -1.0;
    int best_class = 0;
    double z = 0.0;
    for (int c = 0; c < 10; ++c) z += std::exp(static_cast<double>(sums[c]));
    for (int c = 0; c < 10; ++c) {
      const double p = std::exp(static_cast<double>(sums[c])) / z;
      if (p > best + 1e-12) {
        best = p;
        best_class = c;
      }
    }
    CHECK(decoded == best_class);
  }
}
