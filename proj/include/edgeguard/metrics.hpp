#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace edgeguard::eval {

struct ConfusionCounts {
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tp = 0;

  std::uint64_t total() const noexcept { return tn + fp + fn + tp; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Prediction rule: score >= threshold is positive. threshold must lie in (0, 1).
ConfusionCounts confusion(std::span<const int> labels, std::span<const double> scores,
                          double threshold);

// Rates whose denominator is zero are std::nullopt rather than 0.
struct RateSet {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> tpr;
  std::optional<double> tnr;
  std::optional<double> fpr;
  std::optional<double> fnr;
};

RateSet metrics_from_counts(const ConfusionCounts& cm);

struct RocPoint {
  double threshold;  // +inf for the (0,0) origin
  double fpr;
  double tpr;
};

struct RocCurve {
  double auc = 0.0;
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
};

// Sweeps the distinct scores from high to low; AUC by trapezoidal integration,
// so tied positive/negative scores earn half credit.
RocCurve roc_auc(std::span<const int> labels, std::span<const double> scores);

enum class Objective { max_f1, fpr_at_most, recall_at_least };

std::string to_string(Objective objective);
Objective objective_from_string(const std::string& name);

struct ThresholdProfile {
  std::string name;
  Objective objective = Objective::max_f1;
  double bound = 0.0;  // ignored for max_f1

  void validate() const;
};

// balanced (max F1), urllc-strict (FPR <= 0.01), recall-max (recall >= 0.99).
std::vector<ThresholdProfile> default_profiles();

// Picks an operating threshold among the distinct validation scores in (0, 1).
// Ties resolve toward the higher threshold. Throws InfeasibleError listing the
// achievable (threshold, fpr, recall) frontier when no candidate meets the bound.
double select_threshold(std::span<const int> labels, std::span<const double> scores,
                        const ThresholdProfile& profile);

}  // namespace edgeguard::eval
