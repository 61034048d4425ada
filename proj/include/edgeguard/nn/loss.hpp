#pragma once

#include <span>

#include "edgeguard/tensor.hpp"

namespace edgeguard::nn {

// Probabilities are clamped to [kProbabilityClamp, 1 - kProbabilityClamp]
// before taking logs.
inline constexpr double kProbabilityClamp = 1e-7;

struct LossWeights {
  double reconstruction = 0.1;
  double l2 = 1e-4;
};

struct LossTerms {
  double bce = 0.0;
  double mse = 0.0;
  double l2 = 0.0;  // already multiplied by its weight
  double total = 0.0;
};

// Mean binary cross-entropy over N rows. probs is [N × 1].
double binary_cross_entropy(const Tensor2& probs, std::span<const int> targets);
double mean_squared_error(const Tensor2& prediction, const Tensor2& target);
double sum_of_squares(const Tensor2& w);

// total = bce + w.reconstruction·mse + w.l2·Σ(l2_weights²). recon/original may be
// empty (no reconstruction term); l2_weights may be null.
LossTerms composite_loss(const Tensor2& probs, std::span<const int> targets, const Tensor2& recon,
                         const Tensor2& original, const LossWeights& weights,
                         const Tensor2* l2_weights);

// d(mean BCE)/d(logit) for a sigmoid output: (p - y)/N, zero where the clamp is active.
Tensor2 bce_logit_gradient(const Tensor2& probs, std::span<const int> targets);
// d(scale · mse)/d(prediction)
Tensor2 mse_gradient(const Tensor2& prediction, const Tensor2& target, double scale = 1.0);

}  // namespace edgeguard::nn
