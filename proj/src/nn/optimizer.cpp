#include "edgeguard/nn/optimizer.hpp"

#include <cmath>

#include "edgeguard/error.hpp"

namespace edgeguard::nn {

Adam::Adam(AdamConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0) || !(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
      !(config_.beta2 >= 0.0 && config_.beta2 < 1.0) || !(config_.epsilon > 0.0)) {
    throw ParameterError("Adam: invalid hyperparameters");
  }
}

void Adam::step(std::span<Tensor2* const> params, std::span<const Tensor2* const> grads,
                std::span<const std::string> names) {
  if (params.size() != grads.size()) {
    throw DimensionError("Adam::step: " + std::to_string(params.size()) + " parameter buffers, " +
                         std::to_string(grads.size()) + " gradients");
  }
  const auto label = [&](std::size_t i) {
    return i < names.size() ? names[i] : "buffer " + std::to_string(i);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], *grads[i], "Adam::step");
    if (!grads[i]->all_finite()) {
      throw NumericalError("Adam::step: non-finite gradient in " + label(i) + " at step " +
                           std::to_string(step_ + 1));
    }
  }
  if (first_.empty()) {
    for (const auto* p : params) {
      first_.emplace_back(p->rows(), p->cols());
      second_.emplace_back(p->rows(), p->cols());
    }
  } else if (first_.size() != params.size()) {
    throw DimensionError("Adam::step: parameter set changed between steps");
  }

  ++step_;
  const auto& c = config_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], first_[i], "Adam::step moments");
    auto p = params[i]->values();
    auto g = grads[i]->values();
    auto m = first_[i].values();
    auto v = second_[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace edgeguard::nn
