#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "edgeguard/error.hpp"
#include "edgeguard/fedsim.hpp"
#include "edgeguard/metrics.hpp"

namespace edgeguard::fedsim {

using nlohmann::json;

std::string to_string(Scheme s) { return s == Scheme::iid ? "iid" : "label_skew"; }

Scheme scheme_from_string(const std::string& name) {
  if (name == "iid") return Scheme::iid;
  if (name == "label_skew" || name == "label-skew") return Scheme::label_skew;
  throw ConfigError("fedsim.scheme: unknown scheme '" + name + "' (want iid or label_skew)");
}

namespace {

double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Marsaglia-Tsang; shape < 1 via the U^(1/shape) boost.
double gamma_draw(Rng& rng, double shape) {
  if (shape < 1.0) {
    const double u = 1.0 - uniform01(rng);
    return gamma_draw(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - uniform01(rng);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

std::vector<double> dirichlet(Rng& rng, std::size_t n, double alpha) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& v : p) sum += (v = gamma_draw(rng, alpha));
  if (!(sum > 0.0)) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n));
    return p;
  }
  for (auto& v : p) v /= sum;
  return p;
}

// Integer counts summing to total, proportional to p, by largest remainder.
std::vector<std::size_t> apportion(const std::vector<double>& p, std::size_t total) {
  std::vector<std::size_t> counts(p.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = p[i] * static_cast<double>(total);
    counts[i] = std::min(total, static_cast<std::size_t>(std::floor(q)));
    assigned += counts[i];
    rem.emplace_back(q - static_cast<double>(counts[i]), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[rem[k % rem.size()].second];
  while (assigned > total) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  return counts;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::vector<ClientShard> partition(const FeatureMatrix& data, std::size_t n_clients,
                                   const PartitionConfig& config, std::uint64_t seed) {
  data.validate();
  if (n_clients == 0) throw ParameterError("partition: n_clients must be >= 1");
  if (n_clients > data.rows()) {
    throw ParameterError("partition: " + std::to_string(n_clients) + " clients but only " +
                         std::to_string(data.rows()) + " rows");
  }
  if (config.scheme == Scheme::label_skew && !(config.alpha > 0.0)) {
    throw ParameterError("partition: label_skew alpha must be > 0");
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> members(n_clients);
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < data.rows(); ++i) by_class[data.y[i] == 1].push_back(i);

  if (config.scheme == Scheme::iid) {
    std::size_t dealer = 0;
    for (auto& idx : by_class) {
      shuffle(idx.begin(), idx.end(), rng);
      for (auto i : idx) {
        members[dealer].push_back(i);
        dealer = (dealer + 1) % n_clients;
      }
    }
  } else {
    for (auto& idx : by_class) {
      shuffle(idx.begin(), idx.end(), rng);
      const auto counts = apportion(dirichlet(rng, n_clients, config.alpha), idx.size());
      std::size_t at = 0;
      for (std::size_t k = 0; k < n_clients; ++k) {
        members[k].insert(members[k].end(), idx.begin() + static_cast<std::ptrdiff_t>(at),
                          idx.begin() + static_cast<std::ptrdiff_t>(at + counts[k]));
        at += counts[k];
      }
    }
    // Every client needs at least one row; borrow from the largest shard.
    for (auto& m : members) {
      if (!m.empty()) continue;
      auto& donor = *std::max_element(members.begin(), members.end(),
                                      [](const auto& a, const auto& b) { return a.size() < b.size(); });
      m.push_back(donor.back());
      donor.pop_back();
    }
  }

  std::vector<ClientShard> shards(n_clients);
  for (std::size_t k = 0; k < n_clients; ++k) {
    std::sort(members[k].begin(), members[k].end());
    shards[k].client_id = k;
    shards[k].data = data.subset(members[k]);
  }
  return shards;
}

json ClientUpdate::to_message() const {
  json buffers = json::object();
  const auto names = params.buffer_names();
  const auto bufs = params.buffers();
  for (std::size_t i = 0; i < bufs.size(); ++i) {
    const auto v = bufs[i]->values();
    buffers[names[i]] = {{"rows", bufs[i]->rows()},
                         {"cols", bufs[i]->cols()},
                         {"values", std::vector<double>(v.begin(), v.end())}};
  }
  return {{"client_id", client_id}, {"num_samples", num_samples}, {"metrics", metrics}, {"parameters", buffers}};
}

ClientUpdate local_update(const ClientShard& shard, const model::ModelParams& global,
                          const model::TrainConfig& train) {
  ClientUpdate u;
  u.client_id = shard.client_id;
  u.num_samples = shard.num_samples();
  if (u.num_samples == 0) throw ParameterError("local_update: client " + std::to_string(shard.client_id) + " has no rows");
  auto result = model::train(global, shard.data, nullptr, train);
  u.params = std::move(result.params);
  u.metrics = json::object();
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    u.metrics = {{"epochs", result.history.size()},
                 {"train_loss", last.train_loss},
                 {"train_accuracy", last.train_accuracy}};
  }
  return u;
}

model::ModelParams aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ProtocolError("aggregate: no updates");
  std::vector<const ClientUpdate*> sorted;
  for (const auto& u : updates) sorted.push_back(&u);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto* a, const auto* b) { return a->client_id < b->client_id; });

  const auto& first = sorted.front()->params;
  const auto names = first.buffer_names();
  std::size_t total = 0;
  for (const auto* u : sorted) {
    if (u->num_samples == 0) throw ProtocolError("aggregate: update with zero samples");
    if (u->params.descriptor != first.descriptor || u->params.buffer_names() != names) {
      throw ProtocolError("aggregate: client " + std::to_string(u->client_id) +
                          " sent parameters for a different architecture");
    }
    const auto a = u->params.buffers();
    const auto b = first.buffers();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols()) {
        throw ProtocolError("aggregate: buffer '" + names[i] + "' shape mismatch from client " +
                            std::to_string(u->client_id));
      }
    }
    total += u->num_samples;
  }

  model::ModelParams out = first.zeros_like();
  auto dst = out.buffers();
  std::vector<std::vector<std::span<const double>>> src(dst.size());
  for (const auto* u : sorted) {
    const auto b = u->params.buffers();
    for (std::size_t i = 0; i < b.size(); ++i) src[i].push_back(b[i]->values());
  }
  std::vector<double> weights;
  for (const auto* u : sorted) {
    weights.push_back(static_cast<double>(u->num_samples) / static_cast<double>(total));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto out_v = dst[i]->values();
    for (std::size_t e = 0; e < out_v.size(); ++e) {
      double acc = 0.0;
      double lo = src[i][0][e], hi = lo;
      for (std::size_t k = 0; k < src[i].size(); ++k) {
        const double w = src[i][k][e];
        acc += weights[k] * w;
        lo = std::min(lo, w);
        hi = std::max(hi, w);
      }
      // Rounding can push a weighted mean a hair outside the input range.
      out_v[e] = std::clamp(acc, lo, hi);
    }
  }
  return out;
}

void FedConfig::validate() const {
  if (n_clients == 0) throw ConfigError("fedsim.n_clients must be >= 1");
  if (rounds == 0) throw ConfigError("fedsim.rounds must be >= 1");
  if (clients_per_round > n_clients) {
    throw ConfigError("fedsim.clients_per_round (" + std::to_string(clients_per_round) +
                      ") exceeds n_clients (" + std::to_string(n_clients) + ")");
  }
  if (partition.scheme == Scheme::label_skew && !(partition.alpha > 0.0 && std::isfinite(partition.alpha))) {
    throw ConfigError("fedsim.alpha must be > 0 for label_skew");
  }
}

json FedConfig::to_json() const {
  return {{"n_clients", n_clients},
          {"scheme", to_string(partition.scheme)},
          {"alpha", partition.alpha},
          {"rounds", rounds},
          {"clients_per_round", clients_per_round == 0 ? n_clients : clients_per_round},
          {"local_epochs", local_epochs}};
}

FedConfig FedConfig::from_json(const json& j, FedConfig c) {
  try {
    c.n_clients = j.value("n_clients", c.n_clients);
    if (j.contains("scheme")) c.partition.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    c.partition.alpha = j.value("alpha", c.partition.alpha);
    c.rounds = j.value("rounds", c.rounds);
    c.clients_per_round = j.value("clients_per_round", c.clients_per_round);
    c.local_epochs = j.value("local_epochs", c.local_epochs);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("fedsim config: ") + e.what());
  }
  if (j.contains("alpha") && !(c.partition.alpha > 0.0)) throw ConfigError("fedsim.alpha must be > 0");
  c.validate();
  return c;
}

std::uint64_t local_seed(std::uint64_t base, std::size_t round_index, std::size_t client_id) {
  return base + static_cast<std::uint64_t>(round_index) * 0x9e3779b97f4a7c15ULL +
         static_cast<std::uint64_t>(client_id) * 0xd1b54a32d192ed03ULL;
}

json RoundRecord::to_json() const {
  json cl = json::array();
  for (const auto& c : clients) {
    cl.push_back({{"client_id", c.client_id}, {"num_samples", c.num_samples}, {"metrics", c.metrics}});
  }
  return {{"round", round},
          {"participants", participants},
          {"failed", failed},
          {"degraded", degraded},
          {"clients", cl},
          {"val_loss", optional_json(val_loss)},
          {"val_accuracy", optional_json(val_accuracy)},
          {"val_precision", optional_json(val_precision)},
          {"val_recall", optional_json(val_recall)},
          {"bytes_exchanged", bytes_exchanged}};
}

FedResult run_rounds(const std::vector<ClientShard>& shards, model::ModelParams init,
                     const FedConfig& config, const model::TrainConfig& train,
                     const FeatureMatrix* val, std::uint64_t sampling_seed,
                     const RoundCallback& on_round, const FailureInjector& fail) {
  config.validate();
  if (shards.size() != config.n_clients) {
    throw ConfigError("run_rounds: " + std::to_string(shards.size()) + " shards for n_clients = " +
                      std::to_string(config.n_clients));
  }
  const std::size_t per_round = config.clients_per_round == 0 ? shards.size() : config.clients_per_round;
  const std::size_t param_bytes = init.parameter_count() * sizeof(double);
  Rng sampler(sampling_seed);

  FedResult result;
  result.params = std::move(init);
  for (std::size_t r = 0; r < config.rounds; ++r) {
    RoundRecord rec;
    rec.round = r + 1;
    std::vector<std::size_t> ids(shards.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    if (per_round < ids.size()) {
      shuffle(ids.begin(), ids.end(), sampler);
      ids.resize(per_round);
      std::sort(ids.begin(), ids.end());
    }
    rec.participants = ids;

    std::vector<ClientUpdate> updates;
    for (auto k : ids) {
      model::TrainConfig local = train;
      local.epochs = config.local_epochs;
      local.seed = local_seed(train.seed, r, k);
      local.first_epoch = r * config.local_epochs + 1;
      local.patience = 0;
      try {
        if (fail && fail(rec.round, k)) throw StateError("injected client failure");
        updates.push_back(local_update(shards[k], result.params, local));
        rec.clients.push_back({k, updates.back().num_samples, updates.back().metrics});
      } catch (const Error&) {
        rec.failed.push_back(k);
        rec.degraded = true;
      }
    }
    rec.bytes_exchanged = param_bytes * (ids.size() + updates.size());

    if (!updates.empty()) {
      auto next = aggregate(updates);
      next.metadata.seed = train.seed;
      next.metadata.epochs_run = (r + 1) * config.local_epochs;
      result.params = std::move(next);
    }
    if (val && val->rows() > 0) {
      const auto loss = model::evaluate_loss(result.params, *val);
      const auto probs = model::forward_infer(result.params, val->x);
      const auto rates = eval::metrics_from_counts(eval::confusion(val->y, probs.values(), train.threshold));
      rec.val_loss = loss.total;
      rec.val_accuracy = rates.accuracy;
      rec.val_precision = rates.precision;
      rec.val_recall = rates.recall;
    }
    result.rounds.push_back(rec);
    if (on_round) on_round(rec, result.params);
  }
  return result;
}

}  // namespace edgeguard::fedsim
