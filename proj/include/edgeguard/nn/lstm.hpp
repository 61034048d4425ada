#pragma once

#include <vector>

#include "edgeguard/nn/layers.hpp"

namespace edgeguard::nn {

// One tensor [N × width] per time step.
using Sequence = std::vector<Tensor2>;

struct LstmState {
  Tensor2 h;
  Tensor2 c;
};

struct LstmStepCache {
  Tensor2 x;
  Tensor2 h_prev;
  Tensor2 c_prev;
  Tensor2 gates;   // post-activation [i | f | o | g]
  Tensor2 tanh_c;  // tanh(c')
  bool zero_initial = false;
};

// c' = f⊙c + i⊙g, h' = o⊙tanh(c'), with i, f, o logistic and g tanh.
LstmState lstm_cell_step(const Tensor2& x, const LstmState& prev, const LayerParams& p,
                         LstmStepCache* cache = nullptr);

struct LstmStepGradients {
  Tensor2 dx;
  Tensor2 dh_prev;
  Tensor2 dc_prev;
};

// dh, dc are the gradients w.r.t. the step's outputs h' and c'.
LstmStepGradients lstm_cell_backward(const Tensor2& dh, const Tensor2& dc,
                                     const LstmStepCache& cache, const LayerParams& p,
                                     GradientSet& grad);

struct LstmCache {
  std::vector<LstmStepCache> steps;  // in processing order
  bool reverse = false;
  bool ready = false;
};

// Runs from a zero state over the sequence (right-to-left when reverse) and
// returns h aligned with input positions.
Sequence lstm_forward(const Sequence& seq, const LayerParams& p, bool reverse,
                      LstmCache* cache = nullptr);
// grad_h is aligned with positions; empty entries mean zero gradient.
Sequence lstm_backward(const Sequence& grad_h, const LayerParams& p, const LstmCache& cache,
                       GradientSet& grad);

struct BiLstmCache {
  LstmCache forward;
  LstmCache backward;
  std::size_t steps = 0;
  bool return_sequences = true;
  bool ready = false;
};

// Per step output is [h_fwd | h_bwd] (width 2h). Without return_sequences the
// result holds one tensor: the forward direction's last state next to the
// backward direction's state at position 0.
Sequence bilstm_forward(const Sequence& seq, const LayerParams& fwd, const LayerParams& bwd,
                        bool return_sequences, BiLstmCache* cache = nullptr);
Sequence bilstm_backward(const Sequence& grad_output, const LayerParams& fwd,
                         const LayerParams& bwd, const BiLstmCache& cache, GradientSet& grad_fwd,
                         GradientSet& grad_bwd);

}  // namespace edgeguard::nn
