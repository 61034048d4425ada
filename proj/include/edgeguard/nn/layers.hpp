#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "edgeguard/rng.hpp"
#include "edgeguard/tensor.hpp"

namespace edgeguard::nn {

enum class LayerKind { fully_connected, conv1d, lstm_cell };
enum class Activation { linear, relu, sigmoid, tanh };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

// Weights and biases of one layer.
//   fully_connected: kernel [in × out], bias [1 × out]
//   conv1d:          kernel [k·c_in × c_out] (row k·c_in + c is tap k, channel c)
//   lstm_cell:       kernel [in × 4h] input-to-hidden, recurrent [h × 4h],
//                    bias [1 × 4h]; gate blocks ordered input, forget, output, candidate
struct LayerParams {
  LayerKind kind = LayerKind::fully_connected;
  Tensor2 kernel;
  Tensor2 recurrent;
  Tensor2 bias;

  static LayerParams dense(std::size_t in, std::size_t out);
  static LayerParams conv1d(std::size_t kernel_size, std::size_t in_channels,
                            std::size_t out_channels);
  static LayerParams lstm(std::size_t in, std::size_t hidden);

  std::size_t output_dim() const;
  std::size_t hidden_size() const;  // lstm only

  // Parameter buffers in serialization order (recurrent only for lstm cells).
  std::vector<Tensor2*> buffers();
  std::vector<const Tensor2*> buffers() const;
  std::vector<std::string> buffer_names() const;
  std::size_t parameter_count() const;

  LayerParams zeros_like() const;
  void validate() const;  // throws DimensionError on inconsistent shapes

  bool operator==(const LayerParams&) const = default;
};

// Gradient buffers for one layer, shape-congruent with its LayerParams.
using GradientSet = LayerParams;

void apply_activation(Tensor2& x, Activation act);
// grad ⊙ act'(z), expressed through the activation output.
void activation_backward(Tensor2& grad, const Tensor2& output, Activation act);

// --- fully connected -------------------------------------------------------

struct DenseCache {
  Tensor2 input;
  Tensor2 output;
  bool ready = false;
};

Tensor2 fc_forward(const Tensor2& x, const LayerParams& p, Activation act,
                   DenseCache* cache = nullptr);
// Accumulates into grad, returns dL/dx.
Tensor2 fc_backward(const Tensor2& grad_output, const LayerParams& p, Activation act,
                    const DenseCache& cache, GradientSet& grad);

// --- 1-D convolution ------------------------------------------------------

enum class Padding { same, valid };

struct ConvGeometry {
  std::size_t kernel = 3;
  std::size_t stride = 1;
  Padding padding = Padding::same;
};

std::size_t conv_output_length(std::size_t length, const ConvGeometry& g);

struct ConvCache {
  Tensor2 patches;  // [N·L_out × k·c_in]
  Tensor2 output;
  std::size_t steps_in = 0;
  std::size_t steps_out = 0;
  std::size_t in_channels = 0;
  ConvGeometry geometry;
  bool ready = false;
};

// x is a sequence batch [N·L × c_in]; returns [N·L_out × c_out].
Tensor2 conv1d_forward(const Tensor2& x, std::size_t steps, const LayerParams& p,
                       const ConvGeometry& g, Activation act, ConvCache* cache = nullptr);
Tensor2 conv1d_backward(const Tensor2& grad_output, const LayerParams& p, Activation act,
                        const ConvCache& cache, GradientSet& grad);

// --- pooling ----------------------------------------------------------------

struct PoolCache {
  std::vector<std::size_t> argmax;  // input row per output element
  std::size_t input_rows = 0;
  std::size_t channels = 0;
  bool ready = false;
};

std::size_t pooled_length(std::size_t steps, std::size_t window);

// Non-overlapping windows; a trailing partial window is kept.
Tensor2 maxpool1d(const Tensor2& x, std::size_t steps, std::size_t window,
                  PoolCache* cache = nullptr);
// Column-wise maximum over the steps of each sample: [N·L × C] -> [N × C].
Tensor2 global_maxpool(const Tensor2& x, std::size_t steps, PoolCache* cache = nullptr);
// Routes gradients back to the argmax positions of either pooling op.
Tensor2 pool_backward(const Tensor2& grad_output, const PoolCache& cache);

// --- dropout ----------------------------------------------------------------

struct DropoutMask {
  Tensor2 scale;  // 0 or 1/(1-rate) per element; empty means identity
};

// Inverted dropout. Inference (training=false) and rate 0 are the identity and
// draw nothing from rng.
Tensor2 dropout(const Tensor2& x, double rate, bool training, Rng& rng,
                DropoutMask* mask = nullptr);
Tensor2 dropout_backward(const Tensor2& grad_output, const DropoutMask& mask);

}  // namespace edgeguard::nn
