#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "edgeguard/model.hpp"
#include "gradcheck.hpp"

using namespace edgeguard;
using namespace edgeguard::model;

namespace {

std::size_t dense_count(std::size_t in, std::size_t out) { return in * out + out; }
std::size_t lstm_count(std::size_t in, std::size_t h) { return in * 4 * h + h * 4 * h + 4 * h; }

ArchitectureDescriptor tiny(std::size_t d) {
  auto a = ArchitectureDescriptor::reference(d);
  a.ae_hidden = 6;
  a.ae_bottleneck = 4;
  a.cnn_filters1 = 3;
  a.cnn_filters2 = 4;
  a.cnn_projection = 3;
  a.lstm_hidden1 = 3;
  a.lstm_hidden2 = 2;
  a.lstm_projection = 3;
  a.fusion_hidden = 5;
  return a;
}

// Two clouds separated along the diagonal.
FeatureMatrix separable(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  FeatureMatrix m;
  m.x = Tensor2(n, 2);
  m.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double c = label ? 1.0 : -1.0;
    m.x(i, 0) = c + noise(gen);
    m.x(i, 1) = c + noise(gen);
    m.y[i] = label;
  }
  m.feature_names = {"a", "b"};
  return m;
}

}  // namespace

TEST_CASE("parameter count follows the layer shapes") {
  const std::size_t d = 53;
  const std::size_t expect = dense_count(d, 128) + dense_count(128, 64) + dense_count(64, 128) +
                             dense_count(128, d) + (3 * 1 * 64 + 64) + (3 * 64 * 128 + 128) +
                             dense_count(128, 64) + 2 * lstm_count(d, 64) + 2 * lstm_count(128, 32) +
                             dense_count(64, 64) + dense_count(192, 128) + dense_count(128, 1);
  const auto p = build(ArchitectureDescriptor::reference(d), 1);
  CHECK(p.parameter_count() == expect);
  CHECK(p.descriptor.fusion_input_dim() == 192);
}

TEST_CASE("build is deterministic") {
  const auto a = build(ArchitectureDescriptor::reference(8), 5), b = build(ArchitectureDescriptor::reference(8), 5);
  CHECK(a == b);
  CHECK_FALSE(a == build(ArchitectureDescriptor::reference(8), 6));
  const auto& lstm = a.layer("bilstm1.forward");
  const std::size_t h = lstm.hidden_size();
  for (std::size_t u = 0; u < h; ++u) CHECK(lstm.bias(0, h + u) == 1.0);
}

TEST_CASE("forward passes") {
  std::mt19937_64 gen(1);
  const auto p = build(ArchitectureDescriptor::reference(4), 2);
  const Tensor2 x = oracle::random_tensor(7, 4, gen, -3, 3);
  Rng rng(1);
  const auto out = forward_train(p, x, false, rng);
  CHECK(out.probabilities.rows() == 7);
  for (double v : out.probabilities.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(nn::mean_squared_error(out.reconstruction, x) > 0.0);

  const Tensor2 infer = forward_infer(p, x);
  for (std::size_t i = 0; i < 7; ++i) CHECK(std::abs(infer(i, 0) - out.probabilities(i, 0)) <= 1e-15);
  CHECK(forward_infer(p.without_decoder(), x) == infer);
  CHECK_FALSE(p.without_decoder().has_decoder());

  const auto big = build(ArchitectureDescriptor::reference(53), 2);
  const Tensor2 xb = oracle::random_tensor(3, 53, gen);
  Rng r2(1);
  CHECK(forward_train(big, xb, false, r2).fused.cols() == 192);
  CHECK_THROWS_AS(forward_infer(big, x), DimensionError);
}

TEST_CASE("descriptor json") {
  auto d = ArchitectureDescriptor::reference(12);
  d.cnn_filters1 = 8;
  d.hidden_activation = nn::Activation::tanh;
  CHECK(ArchitectureDescriptor::from_json(d.to_json()) == d);
  CHECK_THROWS_AS(ArchitectureDescriptor::from_json({{"ae", {{"dropout", 1.0}}}}), ParameterError);
  CHECK_THROWS_AS(ArchitectureDescriptor::from_json({{"input_dim", 0}}), ParameterError);
}

TEST_CASE("model gradients match finite differences") {
  std::mt19937_64 gen(3);
  for (auto act : {nn::Activation::relu, nn::Activation::tanh}) {
    auto d = tiny(5);
    d.hidden_activation = act;
    d.lambda_l2 = 0.01;
    const auto p = build(d, 7);
    const Tensor2 x = oracle::random_tensor(3, 5, gen);
    const std::vector<int> y{1, 0, 1};
    const auto r = oracle::model_gradcheck(p, x, y, 99);
    INFO(r.worst_buffer);
    CHECK(r.max_error < 1e-4);
  }
}

TEST_CASE("backward before forward is a state error") {
  TrainingGraph g;
  const auto p = build(tiny(3), 1);
  auto grads = p.zeros_like();
  const std::vector<int> y{1};
  CHECK_THROWS_AS(g.backward(p, y, grads), StateError);
}

TEST_CASE("training") {
  const auto data = separable(400, 1);
  const auto init = build(ArchitectureDescriptor::reference(2), 4);

  TrainConfig zero;
  zero.epochs = 0;
  const auto untouched = train(init, data, nullptr, zero);
  CHECK(untouched.params == init);
  CHECK(untouched.history.empty());

  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.seed = 11;
  cfg.adam.learning_rate = 3e-3;
  std::vector<std::size_t> seen;
  const auto result = train(init, data, &data, cfg, [&](const EpochRecord& r, const ModelParams&) { seen.push_back(r.epoch); });
  REQUIRE_FALSE(result.history.empty());
  CHECK(result.history.back().train_accuracy >= 0.99);
  CHECK(seen.front() == 1);
  CHECK(result.params.metadata.seed == 11);
  CHECK(result.params.metadata.epochs_run == result.history.size());

  TrainConfig two = cfg;
  two.epochs = 2;
  two.first_epoch = 5;
  const auto a = train(init, data, nullptr, two), b = train(init, data, nullptr, two);
  CHECK(a.params == b.params);
  CHECK(a.history.front().epoch == 5);
  CHECK(a.history.back().epoch == 6);
  CHECK_FALSE(a.history.front().to_json().contains("seconds"));
}

TEST_CASE("model container") {
  const auto dir = oracle::scratch_dir("egrd");
  auto p = build(tiny(6), 3);
  p.metadata = {42, 7};
  save(p, dir / "m.egrd");
  const auto loaded = load(dir / "m.egrd");
  CHECK(loaded == p);
  save(loaded, dir / "again.egrd");
  std::ifstream a(dir / "m.egrd", std::ios::binary), b(dir / "again.egrd", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);

  auto bytes = serialize(p);
  bytes[0] = 'X';
  CHECK_THROWS_AS(deserialize(bytes), FormatError);
  bytes = serialize(p);
  bytes[bytes.size() / 2] ^= 0x1;
  CHECK_THROWS_AS(deserialize(bytes), FormatError);
  bytes.resize(bytes.size() / 3);
  CHECK_THROWS_AS(deserialize(bytes), FormatError);

  const auto stripped = p.without_decoder();
  save(stripped, dir / "deploy.egrd");
  const auto d = load(dir / "deploy.egrd");
  CHECK_FALSE(d.has_decoder());
  std::mt19937_64 gen(1);
  const Tensor2 x = oracle::random_tensor(4, 6, gen);
  CHECK(forward_infer(d, x) == forward_infer(p, x));
}
