#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sharpnet/brelu.hpp"
#include "test_util.hpp"

using namespace sharpnet;

namespace {
float f1(float x, float s) {
  Tensor t({1}, {x});
  return brelu_forward(t, Sharpness(s))[0];
}
float b1(float x, float s, float up) {
  Tensor t({1}, {x});
  Tensor u({1}, {up});
  return brelu_backward(t, Sharpness(s), u)[0];
}
} // namespace

TEST_CASE("sharpness parameterization") {
  Sharpness s0(0.0f);
  CHECK(s0.alpha() == 0.0f);
  CHECK(s0.beta() == 1.0f);
  Sharpness s1(1.0f);
  CHECK(s1.alpha() == 0.5f);
  CHECK(s1.beta() == 0.5f);
  // alpha + beta = 1 for any s: the endpoints stay symmetric about 0.5
  for (float s : {0.1f, 0.33f, 0.77f}) {
    Sharpness sh(s);
    CHECK(sh.alpha() + sh.beta() == doctest::Approx(1.0f));
  }
  CHECK_THROWS_AS(Sharpness(1.5f), ValidationError);
  CHECK_THROWS_AS(Sharpness(-0.1f), ValidationError);
}

TEST_CASE("forward values") {
  CHECK(f1(0.5f, 0.0f) == doctest::Approx(0.5f));
  CHECK(f1(0.6f, 1.0f) == 1.0f);
  CHECK(f1(0.4f, 1.0f) == 0.0f);
  CHECK(f1(0.5f, 1.0f) == 1.0f); // x >= beta spikes
  // s=0.5: alpha=0.25, beta=0.75
  CHECK(f1(0.5f, 0.5f) == doctest::Approx(0.5f));
  CHECK(f1(0.3f, 0.5f) == doctest::Approx(0.1f));
  // boundary handling: x = beta fires, x = alpha does not
  CHECK(f1(0.75f, 0.5f) == 1.0f);
  CHECK(f1(0.25f, 0.5f) == 0.0f);
}

TEST_CASE("backward values") {
  CHECK(b1(0.5f, 0.0f, 1.0f) == doctest::Approx(1.0f));
  CHECK(b1(0.3f, 1.0f, 1.0f) == 0.0f);
  CHECK(b1(0.7f, 1.0f, 1.0f) == 0.0f); // no straight-through estimate at s=1
  CHECK(b1(0.5f, 0.5f, 2.0f) == doctest::Approx(4.0f));
  // outside the open interval the gradient is zero
  CHECK(b1(0.8f, 0.5f, 1.0f) == 0.0f);
  CHECK(b1(0.25f, 0.5f, 1.0f) == 0.0f);
}

TEST_CASE("backward matches the exact derivative away from kinks") {
  Rng rng(9);
  Tensor x = testutil::random_tensor({40}, rng, -0.5f, 1.5f);
  const Sharpness sh(0.4f);
  Tensor up = Tensor::full({40}, 1.0f);
  Tensor g = brelu_backward(x, sh, up);
  for (int64_t i = 0; i < x.size(); ++i) {
    const float d = 1e-4f;
    if (std::fabs(x[i] - sh.alpha()) < 2 * d || std::fabs(x[i] - sh.beta()) < 2 * d) continue;
    const float fd = (f1(x[i] + d, sh.s) - f1(x[i] - d, sh.s)) / (2 * d);
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-3));
  }
}

TEST_CASE("output range and pointwise convergence to the step") {
  Rng rng(13);
  Tensor x = testutil::random_tensor({200}, rng, -2.0f, 3.0f);
  for (float s : {0.0f, 0.3f, 0.9f, 0.99f, 1.0f}) {
    Tensor y = brelu_forward(x, Sharpness(s));
    for (int64_t i = 0; i < y.size(); ++i) {
      CHECK(y[i] >= 0.0f);
      CHECK(y[i] <= 1.0f);
    }
  }
  // for fixed x != 0.5 the output approaches Heaviside(x - 0.5)
  for (float xv : {0.1f, 0.45f, 0.55f, 0.8f}) {
    const float target = xv >= 0.5f ? 1.0f : 0.0f;
    float prev_gap = 2.0f;
    for (float s : {0.9f, 0.99f, 1.0f}) {
      const float gap = std::fabs(f1(xv, s) - target);
      CHECK(gap <= prev_gap + 1e-6f);
      prev_gap = gap;
    }
    CHECK(f1(xv, 1.0f) == target);
  }
}

TEST_CASE("fully sharp outputs are exactly binary") {
  Rng rng(21);
  Tensor x = testutil::random_tensor({500}, rng, -3.0f, 3.0f);
  Tensor y = brelu_forward(x, Sharpness(1.0f));
  for (int64_t i = 0; i < y.size(); ++i) CHECK((y[i] == 0.0f || y[i] == 1.0f));
}

TEST_CASE("sharpening a fixed input monotonically hardens outputs") {
  Rng rng(33);
  Tensor x = testutil::random_tensor({300}, rng, -0.5f, 1.5f);
  int prev_soft = 1 << 30;
  for (int step = 0; step <= 100; ++step) {
    const float s = static_cast<float>(step) / 100.0f;
    Tensor y = brelu_forward(x, Sharpness(s));
    int soft = 0;
    for (int64_t i = 0; i < y.size(); ++i)
      if (y[i] > 0.0f && y[i] < 1.0f) ++soft;
    CHECK(soft <= prev_soft);
    prev_soft = soft;
  }
}
