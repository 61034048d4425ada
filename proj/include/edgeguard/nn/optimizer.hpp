#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgeguard/tensor.hpp"

namespace edgeguard::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment optimizer with bias-corrected first and second moments.
// Moment buffers are created on the first step and must stay shape-congruent
// with the parameters afterwards.
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  // Applies one update. If any gradient holds NaN/Inf the step is aborted
  // before touching parameters or moments and NumericalError names the buffer.
  void step(std::span<Tensor2* const> params, std::span<const Tensor2* const> grads,
            std::span<const std::string> names = {});

  std::uint64_t steps() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  AdamConfig config_;
  std::vector<Tensor2> first_;
  std::vector<Tensor2> second_;
  std::uint64_t step_ = 0;
};

}  // namespace edgeguard::nn
