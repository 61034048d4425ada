#include "edgeguard/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "edgeguard/error.hpp"

namespace edgeguard::eval {
namespace {

void check_inputs(std::span<const int> labels, std::span<const double> scores, const char* what) {
  if (labels.size() != scores.size()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(labels.size()) + " labels vs " +
                         std::to_string(scores.size()) + " scores");
  }
  if (labels.empty()) throw DimensionError(std::string(what) + ": empty input");
}

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

// Cumulative counts at each distinct score, visiting thresholds high to low.
struct SweepPoint {
  double threshold;
  std::uint64_t tp;
  std::uint64_t fp;
};

std::vector<SweepPoint> sweep(std::span<const int> labels, std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<SweepPoint> out;
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] != 0) ++tp; else ++fp;
      ++i;
    }
    out.push_back({s, tp, fp});
  }
  return out;
}

}  // namespace

ConfusionCounts confusion(std::span<const int> labels, std::span<const double> scores,
                          double threshold) {
  check_inputs(labels, scores, "confusion");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ParameterError("confusion: threshold must lie in (0,1), got " + std::to_string(threshold));
  }
  ConfusionCounts cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] != 0) {
      predicted ? ++cm.tp : ++cm.fn;
    } else {
      predicted ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

RateSet metrics_from_counts(const ConfusionCounts& cm) {
  const auto n = cm.total();
  if (n == 0) throw ParameterError("metrics_from_counts: no samples");
  RateSet r;
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(n);
  r.precision = ratio(cm.tp, cm.tp + cm.fp);
  r.recall = ratio(cm.tp, cm.tp + cm.fn);
  r.tpr = r.recall;
  r.tnr = ratio(cm.tn, cm.tn + cm.fp);
  r.fpr = ratio(cm.fp, cm.tn + cm.fp);
  r.fnr = ratio(cm.fn, cm.tp + cm.fn);
  if (r.precision && r.recall) {
    const double s = *r.precision + *r.recall;
    r.f1 = s > 0.0 ? 2.0 * *r.precision * *r.recall / s : 0.0;
  }
  return r;
}

RocCurve roc_auc(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores, "roc_auc");
  const auto positives = static_cast<std::uint64_t>(
      std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; }));
  const auto negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw ParameterError("roc_auc: both classes must be present");
  }
  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  for (const auto& s : sweep(labels, scores)) {
    const RocPoint next{s.threshold, static_cast<double>(s.fp) / nn, static_cast<double>(s.tp) / np};
    const auto& prev = curve.points.back();
    curve.auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) * 0.5;
    curve.points.push_back(next);
  }
  return curve;
}

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::max_f1: return "max_f1";
    case Objective::fpr_at_most: return "fpr_at_most";
    case Objective::recall_at_least: return "recall_at_least";
  }
  return "unknown";
}

Objective objective_from_string(const std::string& name) {
  if (name == "max_f1") return Objective::max_f1;
  if (name == "fpr_at_most") return Objective::fpr_at_most;
  if (name == "recall_at_least") return Objective::recall_at_least;
  throw ParameterError("unknown threshold objective '" + name + "'");
}

void ThresholdProfile::validate() const {
  if (objective != Objective::max_f1 && !(bound >= 0.0 && bound <= 1.0)) {
    throw ParameterError("threshold profile '" + name + "': bound must lie in [0,1], got " +
                         std::to_string(bound));
  }
}

std::vector<ThresholdProfile> default_profiles() {
  return {
      {"balanced", Objective::max_f1, 0.0},
      {"urllc-strict", Objective::fpr_at_most, 0.01},
      {"recall-max", Objective::recall_at_least, 0.99},
  };
}

double select_threshold(std::span<const int> labels, std::span<const double> scores,
                        const ThresholdProfile& profile) {
  check_inputs(labels, scores, "select_threshold");
  profile.validate();
  const auto positives = static_cast<std::uint64_t>(
      std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; }));
  const auto negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw ParameterError("select_threshold: both classes must be present");
  }

  struct Candidate {
    double threshold, fpr, recall, f1;
  };
  std::vector<Candidate> candidates;
  for (const auto& s : sweep(labels, scores)) {
    if (!(s.threshold > 0.0 && s.threshold < 1.0)) continue;
    const auto fn = positives - s.tp;
    candidates.push_back({s.threshold, static_cast<double>(s.fp) / static_cast<double>(negatives),
                          static_cast<double>(s.tp) / static_cast<double>(positives),
                          2.0 * static_cast<double>(s.tp) /
                              static_cast<double>(2 * s.tp + s.fp + fn)});
  }
  if (candidates.empty()) {
    throw InfeasibleError("select_threshold: no validation score lies strictly inside (0,1)");
  }

  // Candidates are in descending threshold order, so keeping the first best
  // resolves ties toward the higher threshold.
  const Candidate* best = nullptr;
  for (const auto& c : candidates) {
    switch (profile.objective) {
      case Objective::max_f1:
        if (!best || c.f1 > best->f1) best = &c;
        break;
      case Objective::fpr_at_most:
        if (c.fpr <= profile.bound && (!best || c.recall > best->recall)) best = &c;
        break;
      case Objective::recall_at_least:
        if (c.recall >= profile.bound && (!best || c.fpr < best->fpr)) best = &c;
        break;
    }
  }
  if (best) return best->threshold;

  // Pareto frontier: thresholds where recall strictly improves as fpr grows.
  std::ostringstream msg;
  msg << "threshold profile '" << profile.name << "' (" << to_string(profile.objective) << " "
      << profile.bound << ") is infeasible; achievable frontier (threshold, fpr, recall):";
  double last_recall = -1.0;
  std::size_t listed = 0;
  for (const auto& c : candidates) {
    if (c.recall > last_recall) {
      if (listed++ < 8) msg << " (" << c.threshold << ", " << c.fpr << ", " << c.recall << ")";
      last_recall = c.recall;
    }
  }
  if (listed > 8) msg << " ... " << listed - 8 << " more";
  throw InfeasibleError(msg.str());
}

}  // namespace edgeguard::eval
