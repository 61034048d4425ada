#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "edgeguard/error.hpp"
#include "edgeguard/fedsim.hpp"
#include "support.hpp"

using namespace edgeguard;
using namespace edgeguard::fedsim;

namespace {

FeatureMatrix labelled(std::size_t pos, std::size_t neg, std::size_t dims, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureMatrix m;
  const std::size_t n = pos + neg;
  m.x = Tensor2(n, dims);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i < pos ? 1 : 0;
    m.y.push_back(label);
    for (std::size_t d = 0; d < dims; ++d) m.x(i, d) = noise(gen) + (label ? 1.5 : -1.5);
  }
  for (std::size_t d = 0; d < dims; ++d) m.feature_names.push_back("f" + std::to_string(d));
  // interleave classes so row order carries no label information
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  edgeguard::shuffle(order.begin(), order.end(), rng);
  return m.subset(order);
}

model::ArchitectureDescriptor small(std::size_t d) {
  auto a = model::ArchitectureDescriptor::reference(d);
  a.ae_hidden = 8;
  a.ae_bottleneck = 4;
  a.cnn_filters1 = 4;
  a.cnn_filters2 = 4;
  a.cnn_projection = 4;
  a.lstm_hidden1 = 4;
  a.lstm_hidden2 = 4;
  a.lstm_projection = 4;
  a.fusion_hidden = 8;
  return a;
}

model::ModelParams scalar_model(double v) {
  model::ModelParams p;
  auto l = nn::LayerParams::dense(1, 1);
  l.kernel(0, 0) = v;
  p.layers.push_back({"w", l});
  return p;
}

ClientUpdate update(std::size_t id, std::size_t n, double v) {
  ClientUpdate u;
  u.client_id = id;
  u.num_samples = n;
  u.params = scalar_model(v);
  return u;
}

}  // namespace

TEST_CASE("partition") {
  const auto data = labelled(600, 400, 3, 1);
  const auto one = partition(data, 1, {}, 5);
  REQUIRE(one.size() == 1);
  CHECK(one[0].data == data);

  const auto four = partition(data, 4, {}, 5);
  REQUIRE(four.size() == 4);
  std::size_t total = 0;
  for (const auto& s : four) {
    CHECK(s.data.count_label(1) >= 149);
    CHECK(s.data.count_label(1) <= 151);
    CHECK(s.data.count_label(0) >= 99);
    CHECK(s.data.count_label(0) <= 101);
    total += s.num_samples();
  }
  CHECK(total == 1000);
  CHECK(partition(data, 4, {}, 5)[2].data == four[2].data);

  const auto skew = partition(data, 4, {Scheme::label_skew, 0.1}, 3);
  const auto flat = partition(data, 4, {Scheme::label_skew, 1e6}, 3);
  double worst_skew = 0.0, worst_flat = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(skew[k].num_samples() > 0);
    const auto frac = [](const ClientShard& s) {
      return static_cast<double>(s.data.count_label(1)) / static_cast<double>(s.num_samples());
    };
    worst_skew = std::max(worst_skew, std::abs(frac(skew[k]) - 0.6));
    worst_flat = std::max(worst_flat, std::abs(frac(flat[k]) - 0.6));
  }
  CHECK(worst_flat < 0.02);
  CHECK(worst_skew > worst_flat);

  CHECK_THROWS_AS(partition(data, 1001, {}, 1), ParameterError);
  CHECK_THROWS_AS(partition(data, 2, {Scheme::label_skew, 0.0}, 1), ParameterError);
  CHECK(scheme_from_string("label-skew") == Scheme::label_skew);
  CHECK_THROWS_AS(scheme_from_string("quantity"), ConfigError);
}

TEST_CASE("aggregation") {
  const std::vector<ClientUpdate> single{update(0, 5, 1.25)};
  CHECK(aggregate(single) == single[0].params);

  const std::vector<ClientUpdate> two{update(0, 1, 2.0), update(1, 3, 4.0)};
  CHECK(aggregate(two).layer("w").kernel(0, 0) == 3.5);

  std::mt19937_64 gen(9);
  std::vector<ClientUpdate> many;
  for (std::size_t k = 0; k < 7; ++k) many.push_back(update(k, 1 + gen() % 50, static_cast<double>(gen() % 1000) / 7.0));
  const double base = aggregate(many).layer("w").kernel(0, 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(many.begin(), many.end(), gen);
    CHECK(std::abs(aggregate(many).layer("w").kernel(0, 0) - base) <= 1e-12);
  }

  std::vector<ClientUpdate> bad{update(0, 1, 1.0), update(1, 1, 1.0)};
  bad[1].params.layers[0].params.kernel = Tensor2(2, 1);
  CHECK_THROWS_AS(aggregate(bad), ProtocolError);
  CHECK_THROWS_AS(aggregate(std::vector<ClientUpdate>{}), ProtocolError);
  CHECK_THROWS_AS(aggregate(std::vector<ClientUpdate>{update(0, 0, 1.0)}), ProtocolError);
}

TEST_CASE("local updates") {
  const auto data = labelled(60, 40, 3, 2);
  const auto global = model::build(small(3), 1);
  const auto shards = partition(data, 2, {}, 4);

  model::TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.seed = 8;
  cfg.epochs = 0;
  CHECK(local_update(shards[0], global, cfg).params == global);

  cfg.epochs = 1;
  const auto a = local_update(shards[0], global, cfg), b = local_update(shards[1], global, cfg);
  CHECK_FALSE(a.params == b.params);
  CHECK(a.num_samples == shards[0].num_samples());
  const auto msg = a.to_message();
  CHECK(msg.at("num_samples") == a.num_samples);
  CHECK(msg.contains("parameters"));
  CHECK_FALSE(msg.contains("x"));
  CHECK_FALSE(msg.contains("rows"));

  // one client covering everything reproduces centralized training
  const auto whole = partition(data, 1, {}, 4);
  cfg.epochs = 2;
  const auto central = model::train(global, data, nullptr, cfg);
  CHECK(local_update(whole[0], global, cfg).params == central.params);
}

TEST_CASE("rounds") {
  const auto data = labelled(60, 40, 3, 3);
  const auto init = model::build(small(3), 2);
  model::TrainConfig train;
  train.batch_size = 16;
  train.seed = 21;

  FedConfig one;
  one.n_clients = 1;
  one.rounds = 1;
  one.local_epochs = 2;
  const auto shards1 = partition(data, 1, {}, 1);
  const auto r1 = run_rounds(shards1, init, one, train, nullptr, 5);
  model::TrainConfig local = train;
  local.epochs = 2;
  CHECK(r1.params.layers == local_update(shards1[0], init, local).params.layers);
  CHECK(local_seed(99, 0, 0) == 99);
  CHECK(local_seed(99, 1, 0) != local_seed(99, 0, 1));

  FedConfig sub;
  sub.n_clients = 4;
  sub.rounds = 2;
  sub.local_epochs = 1;
  sub.clients_per_round = 2;
  const auto shards4 = partition(data, 4, {}, 1);
  std::vector<RoundRecord> seen;
  const auto r4 = run_rounds(shards4, init, sub, train, &data, 6,
                             [&](const RoundRecord& r, const model::ModelParams&) { seen.push_back(r); });
  REQUIRE(r4.rounds.size() == 2);
  CHECK(seen.size() == 2);
  for (const auto& r : r4.rounds) {
    CHECK(r.participants.size() == 2);
    CHECK(std::set<std::size_t>(r.participants.begin(), r.participants.end()).size() == 2);
    CHECK(r.clients.size() == 2);
    CHECK(r.val_accuracy.has_value());
    CHECK_FALSE(r.degraded);
    CHECK(r.bytes_exchanged > 0);
  }
  CHECK(r4.rounds[0].round == 1);
  CHECK(r4.params.metadata.epochs_run == 2);

  FedConfig all = sub;
  all.clients_per_round = 0;
  all.rounds = 1;
  const auto failed = run_rounds(shards4, init, all, train, nullptr, 6, {},
                                 [](std::size_t, std::size_t client) { return client == 2; });
  REQUIRE(failed.rounds.size() == 1);
  CHECK(failed.rounds[0].degraded);
  CHECK(failed.rounds[0].failed == std::vector<std::size_t>{2});
  CHECK(failed.rounds[0].clients.size() == 3);
}

TEST_CASE("fed config") {
  FedConfig c;
  CHECK_NOTHROW(c.validate());
  c.clients_per_round = 9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(FedConfig::from_json({{"scheme", "label_skew"}, {"alpha", 0}}, FedConfig{}), ConfigError);
  const auto parsed = FedConfig::from_json({{"n_clients", 3}, {"rounds", 4}}, FedConfig{});
  CHECK(parsed.n_clients == 3);
  CHECK(FedConfig::from_json(parsed.to_json(), FedConfig{}).to_json() == parsed.to_json());
}
