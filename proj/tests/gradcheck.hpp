#pragma once

#include <string>
#include <vector>

#include "edgeguard/model.hpp"
#include "support.hpp"

namespace oracle {

// Composite loss of the full model with dropout masks fixed by mask_seed.
inline double model_loss(const edgeguard::model::ModelParams& p, const edgeguard::Tensor2& x,
                         const std::vector<int>& y, std::uint64_t mask_seed) {
  edgeguard::Rng rng(mask_seed);
  const auto out = edgeguard::model::forward_train(p, x, true, rng);
  return edgeguard::nn::composite_loss(out.probabilities, y, out.reconstruction, x,
                                       p.descriptor.loss_weights(), &p.layer("fusion.dense").kernel)
      .total;
}

struct GradcheckResult {
  double max_error = 0.0;
  std::string worst_buffer;
  std::size_t checked = 0;
};

// Compares backprop against central differences. Buffers with more than
// full_below entries are sampled at every stride-th entry.
inline GradcheckResult model_gradcheck(edgeguard::model::ModelParams params, const edgeguard::Tensor2& x,
                                       const std::vector<int>& y, std::uint64_t mask_seed,
                                       std::size_t stride = 1, std::size_t full_below = 0) {
  edgeguard::model::TrainingGraph graph;
  edgeguard::Rng rng(mask_seed);
  graph.forward(params, x, true, rng);
  auto grads = params.zeros_like();
  graph.backward(params, y, grads);

  GradcheckResult r;
  const auto names = params.buffer_names();
  auto buffers = params.buffers();
  const auto analytic = std::as_const(grads).buffers();
  for (std::size_t b = 0; b < buffers.size(); ++b) {
    const std::size_t step = buffers[b]->size() > full_below ? stride : 1;
    for (std::size_t i = 0; i < buffers[b]->size(); i += step) {
      const double numeric = central_difference(*buffers[b], i, [&] { return model_loss(params, x, y, mask_seed); });
      const double err = relative_error(analytic[b]->values()[i], numeric);
      ++r.checked;
      if (err > r.max_error) {
        r.max_error = err;
        r.worst_buffer = names[b] + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

}  // namespace oracle
