#include "edgeguard/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "edgeguard/error.hpp"
#include "edgeguard/kernels.hpp"

namespace edgeguard::nn {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::fully_connected: return "fully-connected";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::lstm_cell: return "lstm-cell";
  }
  return "unknown";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw ParameterError("unknown activation '" + name + "'");
}

LayerParams LayerParams::dense(std::size_t in, std::size_t out) {
  LayerParams p;
  p.kind = LayerKind::fully_connected;
  p.kernel = Tensor2(in, out);
  p.bias = Tensor2(1, out);
  return p;
}

LayerParams LayerParams::conv1d(std::size_t kernel_size, std::size_t in_channels,
                                std::size_t out_channels) {
  LayerParams p;
  p.kind = LayerKind::conv1d;
  p.kernel = Tensor2(kernel_size * in_channels, out_channels);
  p.bias = Tensor2(1, out_channels);
  return p;
}

LayerParams LayerParams::lstm(std::size_t in, std::size_t hidden) {
  LayerParams p;
  p.kind = LayerKind::lstm_cell;
  p.kernel = Tensor2(in, 4 * hidden);
  p.recurrent = Tensor2(hidden, 4 * hidden);
  p.bias = Tensor2(1, 4 * hidden);
  return p;
}

std::size_t LayerParams::output_dim() const {
  return kind == LayerKind::lstm_cell ? hidden_size() : kernel.cols();
}

std::size_t LayerParams::hidden_size() const { return recurrent.rows(); }

std::vector<Tensor2*> LayerParams::buffers() {
  if (kind == LayerKind::lstm_cell) return {&kernel, &recurrent, &bias};
  return {&kernel, &bias};
}

std::vector<const Tensor2*> LayerParams::buffers() const {
  if (kind == LayerKind::lstm_cell) return {&kernel, &recurrent, &bias};
  return {&kernel, &bias};
}

std::vector<std::string> LayerParams::buffer_names() const {
  if (kind == LayerKind::lstm_cell) return {"kernel", "recurrent", "bias"};
  return {"kernel", "bias"};
}

std::size_t LayerParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* b : buffers()) n += b->size();
  return n;
}

LayerParams LayerParams::zeros_like() const {
  LayerParams z;
  z.kind = kind;
  z.kernel = Tensor2(kernel.rows(), kernel.cols());
  z.recurrent = Tensor2(recurrent.rows(), recurrent.cols());
  z.bias = Tensor2(bias.rows(), bias.cols());
  return z;
}

void LayerParams::validate() const {
  const auto fail = [&](const std::string& why) {
    throw DimensionError(to_string(kind) + " params: " + why);
  };
  if (bias.rows() != 1) fail("bias must be a row vector, got " + bias.shape_string());
  switch (kind) {
    case LayerKind::fully_connected:
    case LayerKind::conv1d:
      if (bias.cols() != kernel.cols()) fail("bias width differs from kernel output width");
      if (!recurrent.empty()) fail("unexpected recurrent weights");
      break;
    case LayerKind::lstm_cell: {
      const std::size_t h = recurrent.rows();
      if (h == 0 || recurrent.cols() != 4 * h) fail("recurrent must be h x 4h");
      if (kernel.cols() != 4 * h) fail("kernel must be in x 4h");
      if (bias.cols() != 4 * h) fail("bias must be 1 x 4h");
      break;
    }
  }
}

void apply_activation(Tensor2& x, Activation act) {
  auto v = x.values();
  switch (act) {
    case Activation::linear:
      break;
    case Activation::relu:
      for (double& e : v) e = e > 0.0 ? e : 0.0;
      break;
    case Activation::sigmoid:
      for (double& e : v) e = 1.0 / (1.0 + std::exp(-e));
      break;
    case Activation::tanh:
      for (double& e : v) e = std::tanh(e);
      break;
  }
}

void activation_backward(Tensor2& grad, const Tensor2& output, Activation act) {
  require_same_shape(grad, output, "activation_backward");
  auto g = grad.values();
  auto y = output.values();
  switch (act) {
    case Activation::linear:
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!(y[i] > 0.0)) g[i] = 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
      break;
  }
}

// --- fully connected ---------------------------------------------------------

Tensor2 fc_forward(const Tensor2& x, const LayerParams& p, Activation act, DenseCache* cache) {
  if (p.kind != LayerKind::fully_connected) throw ParameterError("fc_forward: not a dense layer");
  if (x.cols() != p.kernel.rows()) {
    throw DimensionError("fc_forward: input width " + std::to_string(x.cols()) +
                         " vs kernel " + p.kernel.shape_string());
  }
  Tensor2 y;
  kernels::matmul(x, p.kernel, y);
  kernels::add_row_vector(y, p.bias);
  apply_activation(y, act);
  if (cache) {
    cache->input = x;
    cache->output = y;
    cache->ready = true;
  }
  return y;
}

Tensor2 fc_backward(const Tensor2& grad_output, const LayerParams& p, Activation act,
                    const DenseCache& cache, GradientSet& grad) {
  if (!cache.ready) throw StateError("fc_backward called before fc_forward");
  Tensor2 dz = grad_output;
  activation_backward(dz, cache.output, act);
  kernels::matmul_tn(cache.input, dz, grad.kernel, true);
  kernels::column_sums(dz, grad.bias, true);
  Tensor2 dx;
  kernels::matmul_nt(dz, p.kernel, dx);
  return dx;
}

// --- conv1d ------------------------------------------------------------------

std::size_t conv_output_length(std::size_t length, const ConvGeometry& g) {
  if (g.stride == 0 || g.kernel == 0) throw ParameterError("conv1d: kernel and stride must be >= 1");
  if (g.padding == Padding::same) return (length + g.stride - 1) / g.stride;
  if (g.kernel > length) {
    throw DimensionError("conv1d: kernel length " + std::to_string(g.kernel) +
                         " exceeds unpadded input length " + std::to_string(length));
  }
  return (length - g.kernel) / g.stride + 1;
}

namespace {

std::size_t conv_left_padding(std::size_t length, std::size_t out_length, const ConvGeometry& g) {
  if (g.padding == Padding::valid) return 0;
  const std::size_t needed = (out_length - 1) * g.stride + g.kernel;
  return needed > length ? (needed - length) / 2 : 0;
}

}  // namespace

Tensor2 conv1d_forward(const Tensor2& x, std::size_t steps, const LayerParams& p,
                       const ConvGeometry& g, Activation act, ConvCache* cache) {
  if (p.kind != LayerKind::conv1d) throw ParameterError("conv1d_forward: not a conv layer");
  if (steps == 0 || x.rows() % steps != 0) {
    throw DimensionError("conv1d_forward: " + std::to_string(x.rows()) +
                         " rows is not a whole number of length-" + std::to_string(steps) +
                         " sequences");
  }
  const std::size_t c_in = x.cols();
  if (p.kernel.rows() != g.kernel * c_in) {
    throw DimensionError("conv1d_forward: kernel " + p.kernel.shape_string() + " for " +
                         std::to_string(g.kernel) + " taps x " + std::to_string(c_in) +
                         " channels");
  }
  const std::size_t batch = x.rows() / steps;
  const std::size_t out_len = conv_output_length(steps, g);
  const std::size_t pad = conv_left_padding(steps, out_len, g);
  const std::size_t width = g.kernel * c_in;

  Tensor2 patches(batch * out_len, width);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t t = 0; t < out_len; ++t) {
      double* dst = patches.data() + (n * out_len + t) * width;
      for (std::size_t k = 0; k < g.kernel; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * g.stride + k) -
                                   static_cast<std::ptrdiff_t>(pad);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
        std::copy_n(x.data() + (n * steps + static_cast<std::size_t>(src)) * c_in, c_in,
                    dst + k * c_in);
      }
    }
  }

  Tensor2 y;
  kernels::matmul(patches, p.kernel, y);
  kernels::add_row_vector(y, p.bias);
  apply_activation(y, act);
  if (cache) {
    cache->patches = std::move(patches);
    cache->output = y;
    cache->steps_in = steps;
    cache->steps_out = out_len;
    cache->in_channels = c_in;
    cache->geometry = g;
    cache->ready = true;
  }
  return y;
}

Tensor2 conv1d_backward(const Tensor2& grad_output, const LayerParams& p, Activation act,
                        const ConvCache& cache, GradientSet& grad) {
  if (!cache.ready) throw StateError("conv1d_backward called before conv1d_forward");
  Tensor2 dz = grad_output;
  activation_backward(dz, cache.output, act);
  kernels::matmul_tn(cache.patches, dz, grad.kernel, true);
  kernels::column_sums(dz, grad.bias, true);
  Tensor2 dpatches;
  kernels::matmul_nt(dz, p.kernel, dpatches);

  const auto& g = cache.geometry;
  const std::size_t c_in = cache.in_channels;
  const std::size_t steps = cache.steps_in;
  const std::size_t out_len = cache.steps_out;
  const std::size_t batch = dz.rows() / out_len;
  const std::size_t pad = conv_left_padding(steps, out_len, g);
  const std::size_t width = g.kernel * c_in;
  Tensor2 dx(batch * steps, c_in);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const double* src_row = dpatches.data() + (n * out_len + t) * width;
      for (std::size_t k = 0; k < g.kernel; ++k) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * g.stride + k) -
                                   static_cast<std::ptrdiff_t>(pad);
        if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(steps)) continue;
        double* dst = dx.data() + (n * steps + static_cast<std::size_t>(pos)) * c_in;
        for (std::size_t c = 0; c < c_in; ++c) dst[c] += src_row[k * c_in + c];
      }
    }
  }
  return dx;
}

// --- pooling -----------------------------------------------------------------

std::size_t pooled_length(std::size_t steps, std::size_t window) {
  if (window == 0) throw ParameterError("maxpool1d: window must be >= 1");
  return (steps + window - 1) / window;
}

Tensor2 maxpool1d(const Tensor2& x, std::size_t steps, std::size_t window, PoolCache* cache) {
  const std::size_t out_len = pooled_length(steps, window);
  if (steps == 0 || x.rows() % steps != 0) {
    throw DimensionError("maxpool1d: rows not divisible by sequence length");
  }
  const std::size_t batch = x.rows() / steps;
  const std::size_t channels = x.cols();
  Tensor2 y(batch * out_len, channels);
  std::vector<std::size_t> argmax(y.size());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const std::size_t first = n * steps + t * window;
      const std::size_t last = n * steps + std::min(steps, (t + 1) * window);
      const std::size_t out_row = n * out_len + t;
      for (std::size_t c = 0; c < channels; ++c) {
        std::size_t best = first;
        for (std::size_t r = first + 1; r < last; ++r)
          if (x(r, c) > x(best, c)) best = r;
        y(out_row, c) = x(best, c);
        argmax[out_row * channels + c] = best;
      }
    }
  }
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->input_rows = x.rows();
    cache->channels = channels;
    cache->ready = true;
  }
  return y;
}

Tensor2 global_maxpool(const Tensor2& x, std::size_t steps, PoolCache* cache) {
  if (steps == 0 || x.rows() == 0) throw DimensionError("global_maxpool: empty input");
  if (x.rows() % steps != 0) {
    throw DimensionError("global_maxpool: rows not divisible by sequence length");
  }
  return maxpool1d(x, steps, steps, cache);
}

Tensor2 pool_backward(const Tensor2& grad_output, const PoolCache& cache) {
  if (!cache.ready) throw StateError("pool_backward called before forward");
  if (grad_output.size() != cache.argmax.size()) {
    throw DimensionError("pool_backward: gradient " + grad_output.shape_string() +
                         " does not match pooled output");
  }
  Tensor2 dx(cache.input_rows, cache.channels);
  const auto g = grad_output.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    dx(cache.argmax[i], i % cache.channels) += g[i];
  }
  return dx;
}

// --- dropout -----------------------------------------------------------------

Tensor2 dropout(const Tensor2& x, double rate, bool training, Rng& rng, DropoutMask* mask) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (mask) mask->scale = Tensor2();
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor2 scale(x.rows(), x.cols());
  Tensor2 y = x;
  auto s = scale.values();
  auto v = y.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    s[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
    v[i] *= s[i];
  }
  if (mask) mask->scale = std::move(scale);
  return y;
}

Tensor2 dropout_backward(const Tensor2& grad_output, const DropoutMask& mask) {
  if (mask.scale.empty()) return grad_output;
  require_same_shape(grad_output, mask.scale, "dropout_backward");
  Tensor2 dx = grad_output;
  auto d = dx.values();
  auto s = mask.scale.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= s[i];
  return dx;
}

}  // namespace edgeguard::nn
