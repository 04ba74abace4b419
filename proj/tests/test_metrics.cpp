#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sharpnet/metrics.hpp"
#include "test_util.hpp"

using namespace sharpnet;

TEST_CASE("gini of perfectly even and perfectly concentrated vectors") {
  std::vector<float> even(50, 0.7f);
  CHECK(gini(even) == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<float> one_holds_all = {1.0f, 0.0f, 0.0f, 0.0f};
  CHECK(gini(one_holds_all) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("gini rejects degenerate inputs") {
  std::vector<float> zeros(10, 0.0f);
  CHECK_THROWS_AS(gini(zeros), ValidationError);
  std::vector<float> negative = {0.5f, -0.1f};
  CHECK_THROWS_AS(gini(negative), ValidationError);
  std::vector<float> empty;
  CHECK_THROWS_AS(gini(empty), ValidationError);
}

TEST_CASE("sorted-rank formula equals the pairwise double sum") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> v(137);
    for (auto& x : v) x = rng.uniform(0.0f, 1.0f);
    const double fast = gini(v);
    const double slow = testutil::gini_double_sum(v);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-9));
  }
}

TEST_CASE("gini is scale invariant") {
  Rng rng(29);
  std::vector<float> v(200);
  for (auto& x : v) x = rng.uniform(0.0f, 2.0f);
  const double base = gini(v);
  for (float c : {0.25f, 3.0f, 117.0f}) {
    std::vector<float> scaled(v);
    for (auto& x : scaled) x *= c;
    CHECK(std::fabs(gini(scaled) - base) < 1e-12);
  }
}

TEST_CASE("gini lies in [0,1)") {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> v(30);
    for (auto& x : v) x = rng.uniform(0.0f, 1.0f) < 0.8f ? 0.0f : rng.uniform(0.0f, 5.0f);
    bool any = false;
    for (float x : v) any = any || x > 0.0f;
    if (!any) v[0] = 1.0f;
    const double g = gini(v);
    CHECK(g >= 0.0);
    CHECK(g < 1.0);
  }
}
