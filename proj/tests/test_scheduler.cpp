#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sharpnet/scheduler.hpp"

using namespace sharpnet;

namespace {

SharpenerState fresh(int layers = 3, float rate = 0.25f, int max_epochs = 0,
                     int initial_wait = 0) {
  return SharpenerState::make(layers, rate, max_epochs, initial_wait);
}

// runs one epoch's worth of batch increments while in sharpening mode
void sharpen_epoch(SharpenerState& s, int batches = 100) {
  for (int b = 0; b < batches; ++b) batch_increment(s, batches);
}

} // namespace

TEST_CASE("loss spike halts sharpening") {
  SharpenerState s = fresh();
  s.halt_threshold = 0.25f;
  s.mode = SharpenerMode::Sharpening;
  s = adaptive_epoch_transition(s, 0.10);
  CHECK(s.mode == SharpenerMode::Sharpening);
  s = adaptive_epoch_transition(s, 0.15); // 0.15 > 1.25 * 0.10
  CHECK(s.mode == SharpenerMode::Waiting);
}

TEST_CASE("improving loss keeps the controller waiting") {
  SharpenerState s = fresh();
  s.mode = SharpenerMode::Waiting;
  s.improvement_threshold = 0.01f;
  s.resume_patience = 2;
  double loss = 1.0;
  s = adaptive_epoch_transition(s, loss);
  for (int e = 0; e < 10; ++e) {
    loss *= 0.90; // 10% improvement every epoch
    s = adaptive_epoch_transition(s, loss);
    CHECK(s.mode == SharpenerMode::Waiting);
  }
}

TEST_CASE("stagnant loss resumes sharpening after the patience runs out") {
  SharpenerState s = fresh();
  s.mode = SharpenerMode::Waiting;
  s.resume_patience = 2;
  s = adaptive_epoch_transition(s, 1.0);
  CHECK(s.mode == SharpenerMode::Waiting); // one stagnant epoch
  s = adaptive_epoch_transition(s, 1.0);
  CHECK(s.mode == SharpenerMode::Sharpening); // second one exhausts patience
}

TEST_CASE("all layers sharp means done regardless of loss") {
  SharpenerState s = fresh(2);
  s.mode = SharpenerMode::Sharpening;
  s.layer_sharpness = {1.0f, 1.0f};
  s = adaptive_epoch_transition(s, 1e9);
  CHECK(s.mode == SharpenerMode::Done);
  // done is a no-op afterwards
  SharpenerState after = adaptive_epoch_transition(s, 0.0);
  CHECK(after.mode == SharpenerMode::Done);
  CHECK(after.current_layer == s.current_layer);
}

TEST_CASE("batch increments move only the current layer and clamp at 1") {
  SharpenerState s = fresh(3, 0.25f);
  s.mode = SharpenerMode::Sharpening;
  auto delta = batch_increment(s, 100);
  CHECK(delta[0] == doctest::Approx(0.0025f));
  CHECK(delta[1] == 0.0f);
  CHECK(delta[2] == 0.0f);

  // 400 sharpening batches fully sharpen one layer at rate 0.25
  SharpenerState s2 = fresh(3, 0.25f);
  s2.mode = SharpenerMode::Sharpening;
  for (int b = 0; b < 400; ++b) batch_increment(s2, 100);
  CHECK(s2.layer_sharpness[0] == doctest::Approx(1.0f));
  CHECK(s2.layer_sharpness[1] == 0.0f);

  // clamped: s=0.999 plus 0.0025 lands exactly on 1
  SharpenerState s3 = fresh(1, 0.25f);
  s3.mode = SharpenerMode::Sharpening;
  s3.layer_sharpness[0] = 0.999f;
  batch_increment(s3, 100);
  CHECK(s3.layer_sharpness[0] == 1.0f);

  // rate 1, one batch per epoch: a layer sharpens in exactly one epoch
  SharpenerState s4 = fresh(1, 1.0f);
  s4.mode = SharpenerMode::Sharpening;
  batch_increment(s4, 1);
  CHECK(s4.layer_sharpness[0] == 1.0f);
}

TEST_CASE("increments outside sharpening mode are zero") {
  SharpenerState s = fresh();
  s.mode = SharpenerMode::Waiting;
  auto delta = batch_increment(s, 10);
  for (float d : delta) CHECK(d == 0.0f);
}

TEST_CASE("bottom-up progression: layers finish in order, one partial at a time") {
  SharpenerState s = fresh(3, 0.5f);
  s.mode = SharpenerMode::Sharpening;
  int prev_layer = 0;
  for (int epoch = 0; epoch < 10 && s.mode != SharpenerMode::Done; ++epoch) {
    sharpen_epoch(s);
    int partial = 0;
    for (float v : s.layer_sharpness)
      if (v > 0.0f && v < 1.0f) ++partial;
    CHECK(partial <= 1);
    CHECK(s.current_layer >= prev_layer); // never moves back down
    prev_layer = s.current_layer;
    s = adaptive_epoch_transition(s, 1.0); // flat loss: keeps sharpening
  }
  CHECK(s.mode == SharpenerMode::Done);
  for (float v : s.layer_sharpness) CHECK(v == 1.0f);
}

TEST_CASE("uniform mode moves every layer together") {
  SharpenerState s = SharpenerState::make(3, 0.5f, 0, 0, /*uniform=*/true);
  s.mode = SharpenerMode::Sharpening;
  auto delta = batch_increment(s, 10);
  for (float d : delta) CHECK(d == doctest::Approx(0.05f));
}

TEST_CASE("the epoch cap forces sharpening to finish") {
  // 3 layers at rate 0.25 need 12 sharpening epochs; cap at 16 with flat-zero
  // improvement pressure pushing the controller to wait forever otherwise
  SharpenerState s = fresh(3, 0.25f, /*max_epochs=*/16, /*initial_wait=*/2);
  s.resume_patience = 1000000; // never resume on its own
  double loss = 1.0;
  for (int epoch = 0; epoch < 16; ++epoch) {
    sharpen_epoch(s);
    loss *= 0.5; // always improving: the controller would happily wait
    s = adaptive_epoch_transition(s, loss);
  }
  CHECK(s.mode == SharpenerMode::Done);
}

TEST_CASE("replaying a loss sequence reproduces the identical trajectory") {
  std::vector<double> losses = {1.0, 0.8, 0.82, 0.7, 0.95, 0.6, 0.61, 0.6, 0.59, 0.5};
  auto run = [&]() {
    SharpenerState s = fresh(2, 0.5f, 20, 1);
    std::vector<std::pair<int, std::vector<float>>> trajectory;
    for (double l : losses) {
      sharpen_epoch(s);
      s = adaptive_epoch_transition(s, l);
      trajectory.emplace_back(static_cast<int>(s.mode), s.layer_sharpness);
    }
    return trajectory;
  };
  CHECK(run() == run());
}

TEST_CASE("programmed schedule ramps layers bottom-up") {
  ProgrammedSchedule prog{50, 10};
  // before the start everything is zero
  auto t = prog.targets(3, 49, 0, 100);
  for (float v : t) CHECK(v == 0.0f);
  // mid-ramp of layer 1 at epoch 65
  t = prog.targets(3, 65, 0, 100);
  CHECK(t[0] == 1.0f);
  CHECK(t[1] == doctest::Approx(0.5f));
  CHECK(t[2] == 0.0f);
  // far beyond the last ramp everything is one
  t = prog.targets(3, 200, 0, 100);
  for (float v : t) CHECK(v == 1.0f);
  // per-batch interpolation inside an epoch
  auto a = prog.targets(3, 52, 25, 100);
  CHECK(a[0] == doctest::Approx(0.225f));
}

TEST_CASE("programmed schedule is monotone over (epoch, batch)") {
  ProgrammedSchedule prog{3, 4};
  std::vector<float> prev(4, 0.0f);
  for (int epoch = 0; epoch < 25; ++epoch)
    for (int batch = 0; batch < 10; ++batch) {
      auto t = prog.targets(4, epoch, batch, 10);
      for (size_t k = 0; k < t.size(); ++k) {
        CHECK(t[k] >= prev[k] - 1e-7f);
        prev[k] = t[k];
      }
    }
}

TEST_CASE("state construction validates its arguments") {
  CHECK_THROWS_AS(SharpenerState::make(0, 0.25f, 0, 0), ValidationError);
  CHECK_THROWS_AS(SharpenerState::make(3, 0.0f, 0, 0), ValidationError);
  CHECK_THROWS_AS(SharpenerState::make(3, 1.5f, 0, 0), ValidationError);
}
