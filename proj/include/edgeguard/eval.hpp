#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "edgeguard/feature_matrix.hpp"
#include "edgeguard/metrics.hpp"
#include "edgeguard/model.hpp"

namespace edgeguard::eval {

inline constexpr double kLatencyBudgetMs = 10.0;
inline constexpr double kReferenceMsPerSample = 0.0476;

struct LatencyOptions {
  std::vector<std::size_t> batch_sizes{1, 32, 256};
  std::size_t repetitions = 50;
  std::size_t warmup = 3;
  double budget_ms = kLatencyBudgetMs;

  void validate() const;  // repetitions < 5 or warmup < 3 -> ParameterError
};

struct LatencyStats {
  std::size_t batch_size = 0;
  std::size_t repetitions = 0;
  double mean_ms_per_sample = 0.0;
  double p50_ms_per_sample = 0.0;
  double p99_ms_per_sample = 0.0;
  double mean_ms_per_batch = 0.0;
  double first_half_mean_ms = 0.0;
  double second_half_mean_ms = 0.0;
};

struct LatencyReport {
  std::vector<LatencyStats> per_batch;
  double budget_ms = kLatencyBudgetMs;
  std::optional<bool> within_budget;  // judged on batch size 1
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

// Times the decoder-free inference path on one thread. Batches are built by
// cycling through the rows of x. Warm-up passes are excluded from the stats.
LatencyReport latency_bench(const model::ModelParams& params, const Tensor2& x,
                            const LatencyOptions& options);

struct EvalReport {
  ConfusionCounts counts;
  RateSet rates;
  RocCurve roc;
  double threshold = 0.5;
  ThresholdProfile profile;
  std::optional<LatencyReport> latency;
  nlohmann::json provenance = nlohmann::json::object();

  nlohmann::json to_json() const;
};

EvalReport evaluate(const model::ModelParams& params, const FeatureMatrix& test, double threshold,
                    const ThresholdProfile& profile);

// Two columns, fpr,tpr, under a header row.
std::string roc_csv(const RocCurve& roc);

}  // namespace edgeguard::eval
