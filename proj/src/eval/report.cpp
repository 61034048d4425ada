#include <cstdio>

#include "edgeguard/error.hpp"
#include "edgeguard/eval.hpp"

namespace edgeguard::eval {

using nlohmann::json;

namespace {

json rate(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

EvalReport evaluate(const model::ModelParams& params, const FeatureMatrix& test, double threshold,
                    const ThresholdProfile& profile) {
  test.validate();
  if (test.dims() != params.descriptor.input_dim) {
    throw DimensionError("model expects " + std::to_string(params.descriptor.input_dim) +
                         " features but the evaluation matrix has " + std::to_string(test.dims()));
  }
  const Tensor2 probs = model::forward_infer(params, test.x);
  EvalReport r;
  r.threshold = threshold;
  r.profile = profile;
  r.counts = confusion(test.y, probs.values(), threshold);
  r.rates = metrics_from_counts(r.counts);
  r.roc = roc_auc(test.y, probs.values());
  return r;
}

json EvalReport::to_json() const {
  json points = json::array();
  for (const auto& p : roc.points) points.push_back({p.fpr, p.tpr});
  json j{
      {"confusion", {{"tn", counts.tn}, {"fp", counts.fp}, {"fn", counts.fn}, {"tp", counts.tp}}},
      {"metrics",
       {{"accuracy", rates.accuracy},
        {"precision", rate(rates.precision)},
        {"recall", rate(rates.recall)},
        {"f1", rate(rates.f1)},
        {"tpr", rate(rates.tpr)},
        {"tnr", rate(rates.tnr)},
        {"fpr", rate(rates.fpr)},
        {"fnr", rate(rates.fnr)},
        {"auc", roc.auc}}},
      {"threshold", threshold},
      {"profile",
       {{"name", profile.name},
        {"objective", to_string(profile.objective)},
        {"bound", profile.objective == Objective::max_f1 ? json(nullptr) : json(profile.bound)}}},
      {"roc_points", points},
      {"provenance", provenance},
  };
  j["latency"] = latency ? latency->to_json() : json(nullptr);
  return j;
}

std::string roc_csv(const RocCurve& roc) {
  std::string out = "fpr,tpr\n";
  char buf[64];
  for (const auto& p : roc.points) {
    const int n = std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.fpr, p.tpr);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace edgeguard::eval
