#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sharpnet/optimizer.hpp"
#include "test_util.hpp"

using namespace sharpnet;

namespace {

// single scalar parameter harness
struct Scalar {
  Tensor w;
  ParamRef ref;
  Scalar(float value, const char* name = "w") : w({1}, {value}), ref{name, &w} {}
  void set_grad(float g) {
    w.ensure_grad();
    w.grad()[0] = g;
  }
  float value() const { return w[0]; }
};

} // namespace

TEST_CASE("sgd step") {
  OptimizerConfig cfg = OptimizerConfig::defaults(OptimizerKind::Sgd);
  cfg.learning_rate = 0.1f;
  Optimizer opt(cfg);
  Scalar p(1.0f);
  p.set_grad(0.5f);
  ParamRef refs[] = {p.ref};
  opt.step(refs);
  CHECK(p.value() == doctest::Approx(0.95f));

  // zero gradient leaves the parameter unchanged
  p.set_grad(0.0f);
  opt.step(refs);
  CHECK(p.value() == doctest::Approx(0.95f));
}

TEST_CASE("adam first step magnitude is about lr regardless of gradient scale") {
  for (float g : {1e-3f, 1.0f, 250.0f}) {
    OptimizerConfig cfg = OptimizerConfig::defaults(OptimizerKind::Adam);
    cfg.learning_rate = 0.01f;
    Optimizer opt(cfg);
    Scalar p(0.0f);
    p.set_grad(g);
    ParamRef refs[] = {p.ref};
    opt.step(refs);
    // bias-corrected moments cancel: update ~ lr * sign(g)
    CHECK(std::fabs(p.value()) == doctest::Approx(0.01f).epsilon(1e-3));
    CHECK(p.value() < 0.0f);
  }
}

TEST_CASE("adam with zero gradients after moment decay leaves parameters still") {
  OptimizerConfig cfg = OptimizerConfig::defaults(OptimizerKind::Adam);
  Optimizer opt(cfg);
  Scalar p(1.0f);
  ParamRef refs[] = {p.ref};
  p.set_grad(0.0f);
  for (int i = 0; i < 5; ++i) opt.step(refs);
  CHECK(p.value() == doctest::Approx(1.0f));
}

TEST_CASE("non-finite gradients raise a numeric error naming the parameter") {
  Optimizer opt(OptimizerConfig::defaults(OptimizerKind::Adam));
  Scalar p(1.0f, "layer3.weight");
  p.set_grad(std::numeric_limits<float>::quiet_NaN());
  ParamRef refs[] = {p.ref};
  try {
    opt.step(refs);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("layer3.weight") != std::string::npos);
  }
  CHECK(p.value() == 1.0f); // untouched
}

TEST_CASE("every rule descends a convex quadratic") {
  // f(w) = w^2, grad = 2w
  for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::Adamax,
                             OptimizerKind::Adadelta, OptimizerKind::Rmsprop}) {
    OptimizerConfig cfg = OptimizerConfig::defaults(kind);
    cfg.learning_rate = kind == OptimizerKind::Adadelta ? 1.0f : 0.01f;
    Optimizer opt(cfg);
    Scalar p(1.0f);
    ParamRef refs[] = {p.ref};
    const float initial_loss = p.value() * p.value();
    for (int i = 0; i < 100; ++i) {
      p.set_grad(2.0f * p.value());
      opt.step(refs);
    }
    const float final_loss = p.value() * p.value();
    INFO(optimizer_kind_name(kind));
    CHECK(final_loss < initial_loss);
  }
}

TEST_CASE("identical gradient sequences give bit-identical trajectories") {
  for (OptimizerKind kind : {OptimizerKind::Adam, OptimizerKind::Adadelta}) {
    auto run = [&]() {
      Rng rng(99);
      Optimizer opt(OptimizerConfig::defaults(kind));
      Scalar p(0.5f);
      ParamRef refs[] = {p.ref};
      std::vector<float> trajectory;
      for (int i = 0; i < 50; ++i) {
        p.set_grad(rng.uniform(-1.0f, 1.0f));
        opt.step(refs);
        trajectory.push_back(p.value());
      }
      return trajectory;
    };
    CHECK(run() == run());
  }
}

TEST_CASE("step counter advances and slots match shapes") {
  Optimizer opt(OptimizerConfig::defaults(OptimizerKind::Adamax));
  Tensor w({2, 2});
  w.ensure_grad();
  ParamRef refs[] = {{"w", &w}};
  opt.step(refs);
  opt.step(refs);
  CHECK(opt.step_count() == 2);
}

TEST_CASE("optimizer kind names round-trip") {
  for (const char* name : {"sgd", "adam", "adamax", "adadelta", "rmsprop"})
    CHECK(std::string(optimizer_kind_name(optimizer_kind_from_name(name))) == name);
  CHECK_THROWS_AS(optimizer_kind_from_name("nadam"), ValidationError);
}
