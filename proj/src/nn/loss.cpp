#include "edgeguard/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "edgeguard/error.hpp"

namespace edgeguard::nn {
namespace {

void check_targets(const Tensor2& probs, std::span<const int> targets, const char* what) {
  if (probs.cols() != 1 || probs.rows() != targets.size()) {
    throw DimensionError(std::string(what) + ": probabilities " + probs.shape_string() + " for " +
                         std::to_string(targets.size()) + " targets");
  }
  if (targets.empty()) throw DimensionError(std::string(what) + ": empty batch");
}

}  // namespace

double binary_cross_entropy(const Tensor2& probs, std::span<const int> targets) {
  check_targets(probs, targets, "binary_cross_entropy");
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double p = std::clamp(probs(i, 0), kProbabilityClamp, 1.0 - kProbabilityClamp);
    sum -= targets[i] != 0 ? std::log(p) : std::log1p(-p);
  }
  return sum / static_cast<double>(targets.size());
}

double mean_squared_error(const Tensor2& prediction, const Tensor2& target) {
  require_same_shape(prediction, target, "mean_squared_error");
  if (prediction.empty()) throw DimensionError("mean_squared_error: empty input");
  double sum = 0.0;
  auto a = prediction.values();
  auto b = target.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double sum_of_squares(const Tensor2& w) {
  double sum = 0.0;
  for (double v : w.values()) sum += v * v;
  return sum;
}

LossTerms composite_loss(const Tensor2& probs, std::span<const int> targets, const Tensor2& recon,
                         const Tensor2& original, const LossWeights& weights,
                         const Tensor2* l2_weights) {
  LossTerms t;
  t.bce = binary_cross_entropy(probs, targets);
  if (!recon.empty()) t.mse = mean_squared_error(recon, original);
  if (l2_weights) t.l2 = weights.l2 * sum_of_squares(*l2_weights);
  t.total = t.bce + weights.reconstruction * t.mse + t.l2;
  return t;
}

Tensor2 bce_logit_gradient(const Tensor2& probs, std::span<const int> targets) {
  check_targets(probs, targets, "bce_logit_gradient");
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  Tensor2 g(probs.rows(), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double p = probs(i, 0);
    if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) continue;
    g(i, 0) = (p - (targets[i] != 0 ? 1.0 : 0.0)) * inv_n;
  }
  return g;
}

Tensor2 mse_gradient(const Tensor2& prediction, const Tensor2& target, double scale) {
  require_same_shape(prediction, target, "mse_gradient");
  Tensor2 g(prediction.rows(), prediction.cols());
  const double factor = 2.0 * scale / static_cast<double>(prediction.size());
  auto a = prediction.values();
  auto b = target.values();
  auto o = g.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = factor * (a[i] - b[i]);
  return g;
}

}  // namespace edgeguard::nn
