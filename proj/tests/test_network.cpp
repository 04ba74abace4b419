#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sharpnet/experiment.hpp"
#include "sharpnet/metrics.hpp"
#include "sharpnet/network.hpp"
#include "test_util.hpp"

using namespace sharpnet;
using testutil::finite_difference;
using testutil::max_relative_error;
using testutil::random_tensor;

namespace {

std::vector<LayerSpec> small_mlp_specs() {
  return {LayerSpec::flatten(), LayerSpec::dense(512), LayerSpec::spiking_brelu(),
          LayerSpec::dense(40)};
}

} // namespace

TEST_CASE("build validates the shape chain") {
  Network net = Network::build({28, 28, 1}, small_mlp_specs(), NHotCode(10, 4), 1);
  CHECK(net.layers().size() == 4);
  CHECK(net.num_spiking_layers() == 1);

  // dense directly after a conv output must fail, naming the layer
  std::vector<LayerSpec> bad = {LayerSpec::conv2d(3, 8), LayerSpec::dense(512)};
  try {
    Network::build({28, 28, 1}, bad, NHotCode(10, 4), 1);
    FAIL("expected a build error");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}

TEST_CASE("the small conv topology builds on 28x28 input") {
  ExperimentConfig cfg;
  cfg.preset = "conv-small-10hot";
  Network net = build_preset(cfg, {28, 28, 1});
  // two conv-maxpool blocks, three hidden dense layers, a 10-hot output
  int convs = 0, pools = 0, dense = 0;
  for (const auto& l : net.layers()) {
    convs += l.spec.kind == LayerKind::Conv2d;
    pools += l.spec.kind == LayerKind::MaxPool;
    dense += l.spec.kind == LayerKind::Dense;
  }
  CHECK(convs == 2);
  CHECK(pools == 2);
  CHECK(dense == 4);
  CHECK(net.nhot().n == 10);
  CHECK(net.layers().back().spec.kind == LayerKind::SoftmaxDecode);

  Tensor batch({2, 28, 28, 1});
  ForwardResult fr = net.forward(batch, Mode::Train);
  CHECK(fr.output().shape() == std::vector<int>{2, 10});
}

TEST_CASE("zero-weight zero-bias net outputs brelu(0)") {
  Network net = Network::build({4}, {LayerSpec::dense(3), LayerSpec::spiking_brelu()},
                               NHotCode(3, 1), 1);
  for (auto& w : net.layers()[0].weights.values()) w = 0.0f;
  Rng rng(2);
  Tensor batch = random_tensor({5, 4}, rng);
  ForwardResult fr = net.forward(batch, Mode::Inference);
  for (int64_t i = 0; i < fr.output().size(); ++i) CHECK(fr.output()[i] == 0.0f);
}

TEST_CASE("inference is deterministic and mutates nothing") {
  Network net = Network::build(
      {8},
      {LayerSpec::dense(6), LayerSpec::batchnorm(), LayerSpec::spiking_brelu()},
      NHotCode(3, 2), 7);
  Rng rng(3);
  Tensor batch = random_tensor({4, 8}, rng);
  const std::vector<float> mu_before = net.layers()[1].bn.moving_mu.values();
  ForwardResult a = net.infer(batch);
  ForwardResult b = net.infer(batch);
  CHECK(a.output().values() == b.output().values());
  CHECK(net.layers()[1].bn.moving_mu.values() == mu_before);
}

TEST_CASE("batch dimension mismatch raises a dimension error") {
  Network net = Network::build({8}, {LayerSpec::dense(4)}, NHotCode(2, 2), 1);
  Tensor wrong({3, 7});
  CHECK_THROWS_AS(net.forward(wrong, Mode::Train), DimensionError);
}

TEST_CASE("train-mode batch norm standardizes to (beta_shift, gamma)") {
  Network net = Network::build({16}, {LayerSpec::batchnorm(1e-6f)}, NHotCode(4, 4), 1);
  auto& bn = net.layers()[0].bn;
  for (auto& g : bn.gamma.values()) g = 2.0f;
  for (auto& b : bn.beta_shift.values()) b = 0.1f;

  Rng rng(5);
  Tensor batch = random_tensor({512, 16}, rng, -3.0f, 3.0f);
  ForwardResult fr = net.forward(batch, Mode::Train);
  const Tensor& y = fr.output();
  for (int j = 0; j < 16; ++j) {
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < 512; ++i) {
      const double v = y.at({i, j});
      mean += v;
      sq += v * v;
    }
    mean /= 512.0;
    const double stddev = std::sqrt(sq / 512.0 - mean * mean);
    CHECK(mean == doctest::Approx(0.1).epsilon(0).scale(1).epsilon(1e-3));
    CHECK(stddev == doctest::Approx(2.0).epsilon(1e-3));
  }
}

TEST_CASE("batch norm matches a scalar-loop evaluation") {
  Network net = Network::build({5}, {LayerSpec::batchnorm(1e-3f)}, NHotCode(5, 1), 1);
  auto& bn = net.layers()[0].bn;
  Rng rng(11);
  for (auto& g : bn.gamma.values()) g = rng.uniform(0.5f, 2.0f);
  for (auto& b : bn.beta_shift.values()) b = rng.uniform(-1.0f, 1.0f);

  Tensor batch = random_tensor({64, 5}, rng);
  ForwardResult fr = net.forward(batch, Mode::Train);

  for (int j = 0; j < 5; ++j) {
    double mu = 0.0;
    for (int i = 0; i < 64; ++i) mu += batch.at({i, j});
    mu /= 64.0;
    double var = 0.0;
    for (int i = 0; i < 64; ++i) {
      const double d = batch.at({i, j}) - mu;
      var += d * d;
    }
    const double sigma = std::sqrt(var / 64.0);
    for (int i = 0; i < 64; ++i) {
      const double expected =
          bn.gamma[j] * ((batch.at({i, j}) - mu) / (sigma + 1e-3)) + bn.beta_shift[j];
      CHECK(fr.output().at({i, j}) == doctest::Approx(expected).epsilon(0).scale(1).epsilon(1e-6));
    }
  }
}

TEST_CASE("inference-mode batch norm reads the moving averages") {
  Network net = Network::build({1}, {LayerSpec::batchnorm(1e-9f)}, NHotCode(1, 1), 1);
  auto& bn = net.layers()[0].bn;
  bn.gamma[0] = 2.0f;
  bn.beta_shift[0] = 0.1f;
  bn.moving_mu[0] = 0.5f;
  bn.moving_sigma[0] = 1.0f;
  Tensor x({1, 1}, {0.5f});
  ForwardResult fr = net.infer(x);
  CHECK(fr.output()[0] == doctest::Approx(0.1f)); // x equals the mean
}

TEST_CASE("train and inference outputs converge as moving averages settle") {
  Network net = Network::build(
      {6}, {LayerSpec::dense(8), LayerSpec::batchnorm(), LayerSpec::spiking_brelu()},
      NHotCode(4, 2), 3);
  Rng rng(13);
  Tensor batch = random_tensor({32, 6}, rng);
  ForwardResult train_fr;
  for (int i = 0; i < 1000; ++i) train_fr = net.forward(batch, Mode::Train);
  ForwardResult infer_fr = net.infer(batch);
  for (int64_t i = 0; i < train_fr.output().size(); ++i)
    CHECK(std::fabs(train_fr.output()[i] - infer_fr.output()[i]) <= 1e-3f);
}

TEST_CASE("single dense layer gradient equals the closed form") {
  const int n = 8, in = 5, out = 3;
  Network net = Network::build({in}, {LayerSpec::dense(out)}, NHotCode(3, 1), 17);
  Rng rng(19);
  Tensor x = random_tensor({n, in}, rng);
  Tensor y = random_tensor({n, out}, rng);

  ForwardResult fr = net.forward(x, Mode::Train);
  // mean-squared-error loss: d loss / d output = 2 (XW + b - Y) / n
  Tensor loss_grad({n, out});
  for (int64_t i = 0; i < loss_grad.size(); ++i)
    loss_grad[i] = 2.0f * (fr.output()[i] - y[i]) / static_cast<float>(n);
  net.zero_grads();
  net.backward(fr, loss_grad);

  // closed form: dW = 2 X^T (XW + b - Y) / n, in doubles
  const Tensor& w_grad = net.layers()[0].weights;
  for (int a = 0; a < in; ++a)
    for (int b = 0; b < out; ++b) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc += 2.0 * static_cast<double>(x.at({i, a})) * (fr.output().at({i, b}) - y.at({i, b})) / n;
      CHECK(w_grad.grad()[a * out + b] == doctest::Approx(acc).epsilon(0).scale(1).epsilon(1e-5));
    }
}

TEST_CASE("frozen layers receive no parameter gradients") {
  std::vector<LayerSpec> specs = {LayerSpec::dense(6), LayerSpec::spiking_brelu(),
                                  LayerSpec::dense(4)};
  specs[0].trainable = false;
  Network net = Network::build({5}, specs, NHotCode(2, 2), 23);
  Rng rng(29);
  Tensor x = random_tensor({3, 5}, rng);
  ForwardResult fr = net.forward(x, Mode::Train);
  Tensor loss_grad = Tensor::full(fr.output().shape(), 1.0f);
  net.zero_grads();
  net.backward(fr, loss_grad);

  CHECK_FALSE(net.layers()[0].weights.has_grad());
  CHECK(net.layers()[2].weights.has_grad());
  // and the frozen layer is absent from the optimizer's parameter list
  for (const auto& ref : net.trainable_parameters())
    CHECK(ref.name.find("layer0") == std::string::npos);
}

TEST_CASE("whole-network gradient check at mid sharpness") {
  // two learning layers with batch norm and s=0.5 activations
  std::vector<LayerSpec> specs = {
      LayerSpec::dense(7),  LayerSpec::batchnorm(),     LayerSpec::spiking_brelu(),
      LayerSpec::dense(6),  LayerSpec::spiking_brelu(), LayerSpec::softmax_decode()};
  Network net = Network::build({5}, specs, NHotCode(3, 2), 31);
  for (int idx : net.spiking_layers()) net.set_layer_sharpness(idx, 0.5f);

  Rng rng(37);
  Tensor x = random_tensor({6, 5}, rng);
  Tensor labels({6, 3});
  for (int i = 0; i < 6; ++i) labels.at({i, static_cast<int>(rng.below(3))}) = 1.0f;

  auto loss = [&]() {
    ForwardResult fr = net.forward(x, Mode::Train);
    return softmax_crossentropy(fr.output(), labels).loss;
  };

  ForwardResult fr = net.forward(x, Mode::Train);
  SoftmaxXent xent = softmax_crossentropy(fr.output(), labels);
  net.zero_grads();
  net.backward(fr, xent.grad);

  for (auto& ref : net.trainable_parameters()) {
    auto fd = finite_difference(*ref.tensor, loss);
    INFO(ref.name);
    CHECK(max_relative_error(ref.tensor->grad(), fd) < 1e-3);
  }
}

TEST_CASE("backward demands a train-mode forward") {
  Network net = Network::build({4}, {LayerSpec::dense(2)}, NHotCode(2, 1), 1);
  Tensor x({1, 4});
  ForwardResult fr = net.infer(x);
  Tensor g({1, 2});
  CHECK_THROWS_AS(net.backward(fr, g), StateError);
}

TEST_CASE("sharpness control") {
  Network net = Network::build(
      {4}, {LayerSpec::dense(4), LayerSpec::spiking_brelu(), LayerSpec::softmax_decode()},
      NHotCode(2, 2), 5);
  const int brelu_idx = net.spiking_layers()[0];

  net.set_layer_sharpness(brelu_idx, 0.5f);
  CHECK(net.sharpness_of(0) == 0.5f);
  net.set_layer_sharpness(brelu_idx, 0.5f); // equal is a no-op
  CHECK_THROWS_AS(net.set_layer_sharpness(brelu_idx, 0.4f), MonotonicityError);
  CHECK_THROWS_AS(net.set_layer_sharpness(0, 0.9f), ValidationError); // dense layer
  CHECK_THROWS_AS(net.set_layer_sharpness(brelu_idx, 1.5f), ValidationError);

  net.set_layer_sharpness(brelu_idx, 1.0f);
  CHECK(net.fully_sharpened());
  Rng rng(41);
  Tensor x = random_tensor({20, 4}, rng);
  ForwardResult fr = net.infer(x);
  const Tensor& spikes = fr.activations[1];
  for (int64_t i = 0; i < spikes.size(); ++i) CHECK((spikes[i] == 0.0f || spikes[i] == 1.0f));
}

TEST_CASE("forced spiking leaves stored sharpness untouched") {
  Network net = Network::build(
      {4}, {LayerSpec::dense(4), LayerSpec::spiking_brelu()}, NHotCode(2, 2), 5);
  Rng rng(43);
  Tensor x = random_tensor({10, 4}, rng);
  ForwardResult fr = net.infer(x, /*forced_spiking=*/true);
  for (int64_t i = 0; i < fr.output().size(); ++i)
    CHECK((fr.output()[i] == 0.0f || fr.output()[i] == 1.0f));
  CHECK(net.sharpness_of(0) == 0.0f);
}

TEST_CASE("save and load round-trip bit-exactly") {
  namespace fs = std::filesystem;
  Network net = Network::build(
      {6},
      {LayerSpec::dense(8), LayerSpec::batchnorm(), LayerSpec::spiking_brelu(),
       LayerSpec::dense(6), LayerSpec::spiking_brelu(), LayerSpec::softmax_decode()},
      NHotCode(3, 2), 47);
  net.set_layer_sharpness(net.spiking_layers()[0], 0.625f);

  const auto dir = fs::temp_directory_path() / "sharpnet_test";
  fs::create_directories(dir);
  const std::string path = (dir / "roundtrip.snet").string();
  net.save(path);
  Network loaded = Network::load(path);

  CHECK(loaded.sharpness_of(0) == 0.625f);
  Rng rng(53);
  Tensor x = random_tensor({4, 6}, rng);
  ForwardResult a = net.infer(x);
  ForwardResult b = loaded.infer(x);
  CHECK(a.output().values() == b.output().values());

  const std::string path2 = (dir / "roundtrip2.snet").string();
  loaded.save(path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}

TEST_CASE("activity profile, dead nodes and network gini") {
  Dataset data;
  data.images = Tensor({7, 1, 1, 3});
  Rng rng(61);
  for (auto& v : data.images.values()) v = rng.uniform(0.0f, 1.0f);
  data.labels = {0, 1, 0, 1, 0, 1, 0};
  data.num_classes = 2;

  Network flat_net = Network::build(
      {1, 1, 3},
      {LayerSpec::flatten(), LayerSpec::dense(4), LayerSpec::spiking_brelu(),
       LayerSpec::softmax_decode()},
      NHotCode(2, 2), 59);
  auto& d2 = flat_net.layers()[1];
  for (auto& w : d2.weights.values()) w = 0.0f;
  d2.bias.values() = {10.0f, 10.0f, -10.0f, 0.75f};
  flat_net.set_layer_sharpness(flat_net.spiking_layers()[0], 1.0f);

  ActivityProfile profile = activity_profile(flat_net, data);
  REQUIRE(profile.layer_means.size() == 1);
  CHECK(profile.layer_means[0][0] == 1.0f);
  CHECK(profile.layer_means[0][1] == 1.0f);
  CHECK(profile.layer_means[0][2] == 0.0f); // bias -10 never fires
  CHECK(profile.layer_means[0][3] == 1.0f);

  // fully sharpened means are rationals k / |dataset|
  for (float m : profile.layer_means[0]) {
    const float scaled = m * 7.0f;
    CHECK(std::fabs(scaled - std::round(scaled)) < 1e-6f);
  }

  auto census = dead_node_census(profile);
  CHECK(census[0] == 1);

  // dead output classes: class 1's block is neurons {2, 3}; kill both
  d2.bias.values() = {10.0f, 10.0f, -10.0f, -10.0f};
  auto dead = dead_output_classes(flat_net, data);
  CHECK(dead == std::set<int>{1});

  // healthy output: no dead classes
  d2.bias.values() = {10.0f, 10.0f, 0.75f, 0.75f};
  CHECK(dead_output_classes(flat_net, data).empty());
}
