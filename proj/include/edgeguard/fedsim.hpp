#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "edgeguard/feature_matrix.hpp"
#include "edgeguard/model.hpp"

namespace edgeguard::fedsim {

enum class Scheme { iid, label_skew };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& name);

struct PartitionConfig {
  Scheme scheme = Scheme::iid;
  double alpha = 0.5;  // Dirichlet concentration for label_skew
};

struct ClientShard {
  std::size_t client_id = 0;
  FeatureMatrix data;

  std::size_t num_samples() const noexcept { return data.rows(); }
};

// iid: per-class shuffle dealt round-robin across clients. label_skew: each
// class is spread over clients by Dirichlet(alpha) proportions. Shards keep
// the source row order.
std::vector<ClientShard> partition(const FeatureMatrix& data, std::size_t n_clients,
                                   const PartitionConfig& config, std::uint64_t seed);

// What a client sends back: parameters, its sample count and training metrics.
struct ClientUpdate {
  std::size_t client_id = 0;
  std::size_t num_samples = 0;
  model::ModelParams params;
  nlohmann::json metrics;

  // Wire form; carries no feature rows.
  nlohmann::json to_message() const;
};

// Trains a copy of global on the shard. train.epochs is the local epoch count.
ClientUpdate local_update(const ClientShard& shard, const model::ModelParams& global,
                          const model::TrainConfig& train);

// Sample-weighted mean of every buffer, summed in client-id order.
model::ModelParams aggregate(std::span<const ClientUpdate> updates);

struct FedConfig {
  std::size_t n_clients = 4;
  PartitionConfig partition;
  std::size_t rounds = 10;
  std::size_t clients_per_round = 0;  // 0 = every client
  std::size_t local_epochs = 2;

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  static FedConfig from_json(const nlohmann::json& j, FedConfig base);
};

// Local seed for a client in a round; round 0 / client 0 gets the base seed.
std::uint64_t local_seed(std::uint64_t base, std::size_t round_index, std::size_t client_id);

struct ClientMetrics {
  std::size_t client_id = 0;
  std::size_t num_samples = 0;
  nlohmann::json metrics;
};

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  std::vector<std::size_t> participants;
  std::vector<std::size_t> failed;
  std::vector<ClientMetrics> clients;
  bool degraded = false;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
  std::optional<double> val_precision;
  std::optional<double> val_recall;
  std::size_t bytes_exchanged = 0;

  nlohmann::json to_json() const;
};

struct FedResult {
  model::ModelParams params;
  std::vector<RoundRecord> rounds;
};

// Hook for tests: return true to make a client fail in a given round.
using FailureInjector = std::function<bool(std::size_t round, std::size_t client_id)>;
using RoundCallback = std::function<void(const RoundRecord&, const model::ModelParams&)>;

// train supplies batch size, optimizer settings and the base seed; its epoch
// count is replaced by config.local_epochs.
FedResult run_rounds(const std::vector<ClientShard>& shards, model::ModelParams init,
                     const FedConfig& config, const model::TrainConfig& train,
                     const FeatureMatrix* val, std::uint64_t sampling_seed,
                     const RoundCallback& on_round = {}, const FailureInjector& fail = {});

}  // namespace edgeguard::fedsim
