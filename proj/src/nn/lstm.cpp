#include "edgeguard/nn/lstm.hpp"

#include <cmath>

#include "edgeguard/error.hpp"
#include "edgeguard/kernels.hpp"

namespace edgeguard::nn {
namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_cell(const Tensor2& x, const LstmState& prev, const LayerParams& p) {
  if (p.kind != LayerKind::lstm_cell) throw ParameterError("lstm: layer is not an lstm cell");
  p.validate();
  const std::size_t h = p.hidden_size();
  if (x.cols() != p.kernel.rows()) {
    throw DimensionError("lstm: input width " + std::to_string(x.cols()) + " vs kernel " +
                         p.kernel.shape_string());
  }
  if (prev.h.rows() != x.rows() || prev.h.cols() != h || prev.c.rows() != x.rows() ||
      prev.c.cols() != h) {
    throw DimensionError("lstm: state " + prev.h.shape_string() + "/" + prev.c.shape_string() +
                         " for batch " + std::to_string(x.rows()) + " hidden " +
                         std::to_string(h));
  }
}

LstmState cell_step(const Tensor2& x, const LstmState& prev, const LayerParams& p,
                    bool zero_initial, LstmStepCache* cache) {
  check_cell(x, prev, p);
  const std::size_t n = x.rows();
  const std::size_t h = p.hidden_size();
  Tensor2 gates;
  kernels::matmul(x, p.kernel, gates);
  // A zero initial state contributes exactly nothing through the recurrent kernel.
  if (!zero_initial) kernels::matmul(prev.h, p.recurrent, gates, true);
  kernels::add_row_vector(gates, p.bias);

  LstmState next{Tensor2(n, h), Tensor2(n, h)};
  Tensor2 tanh_c(n, h);
  for (std::size_t r = 0; r < n; ++r) {
    double* gr = gates.data() + r * 4 * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double i = logistic(gr[j]);
      const double f = logistic(gr[h + j]);
      const double o = logistic(gr[2 * h + j]);
      const double g = std::tanh(gr[3 * h + j]);
      gr[j] = i;
      gr[h + j] = f;
      gr[2 * h + j] = o;
      gr[3 * h + j] = g;
      const double c = f * prev.c(r, j) + i * g;
      const double tc = std::tanh(c);
      next.c(r, j) = c;
      tanh_c(r, j) = tc;
      next.h(r, j) = o * tc;
    }
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->gates = std::move(gates);
    cache->tanh_c = std::move(tanh_c);
    cache->zero_initial = zero_initial;
  }
  return next;
}

}  // namespace

LstmState lstm_cell_step(const Tensor2& x, const LstmState& prev, const LayerParams& p,
                         LstmStepCache* cache) {
  return cell_step(x, prev, p, false, cache);
}

LstmStepGradients lstm_cell_backward(const Tensor2& dh, const Tensor2& dc,
                                     const LstmStepCache& cache, const LayerParams& p,
                                     GradientSet& grad) {
  const std::size_t n = cache.gates.rows();
  const std::size_t h = p.hidden_size();
  if (dh.rows() != n || dh.cols() != h) throw DimensionError("lstm_cell_backward: dh shape");
  const bool has_dc = !dc.empty();
  if (has_dc && (dc.rows() != n || dc.cols() != h)) {
    throw DimensionError("lstm_cell_backward: dc shape");
  }

  Tensor2 dpre(n, 4 * h);
  LstmStepGradients out;
  out.dc_prev = Tensor2(n, h);
  for (std::size_t r = 0; r < n; ++r) {
    const double* gr = cache.gates.data() + r * 4 * h;
    double* dr = dpre.data() + r * 4 * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double i = gr[j], f = gr[h + j], o = gr[2 * h + j], g = gr[3 * h + j];
      const double tc = cache.tanh_c(r, j);
      const double dh_rj = dh(r, j);
      const double dct = (has_dc ? dc(r, j) : 0.0) + dh_rj * o * (1.0 - tc * tc);
      dr[j] = dct * g * i * (1.0 - i);
      dr[h + j] = dct * cache.c_prev(r, j) * f * (1.0 - f);
      dr[2 * h + j] = dh_rj * tc * o * (1.0 - o);
      dr[3 * h + j] = dct * i * (1.0 - g * g);
      out.dc_prev(r, j) = dct * f;
    }
  }
  kernels::matmul_tn(cache.x, dpre, grad.kernel, true);
  if (!cache.zero_initial) kernels::matmul_tn(cache.h_prev, dpre, grad.recurrent, true);
  kernels::column_sums(dpre, grad.bias, true);
  kernels::matmul_nt(dpre, p.kernel, out.dx);
  if (cache.zero_initial) {
    out.dh_prev = Tensor2(n, h);
  } else {
    kernels::matmul_nt(dpre, p.recurrent, out.dh_prev);
  }
  return out;
}

Sequence lstm_forward(const Sequence& seq, const LayerParams& p, bool reverse, LstmCache* cache) {
  if (seq.empty()) throw DimensionError("lstm_forward: empty sequence");
  const std::size_t steps = seq.size();
  const std::size_t n = seq.front().rows();
  const std::size_t h = p.hidden_size();
  LstmState state{Tensor2(n, h), Tensor2(n, h)};
  Sequence out(steps);
  if (cache) {
    cache->steps.assign(steps, LstmStepCache{});
    cache->reverse = reverse;
  }
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t pos = reverse ? steps - 1 - k : k;
    state = cell_step(seq[pos], state, p, k == 0, cache ? &cache->steps[k] : nullptr);
    out[pos] = state.h;
  }
  if (cache) cache->ready = true;
  return out;
}

Sequence lstm_backward(const Sequence& grad_h, const LayerParams& p, const LstmCache& cache,
                       GradientSet& grad) {
  if (!cache.ready) throw StateError("lstm_backward called before lstm_forward");
  const std::size_t steps = cache.steps.size();
  if (grad_h.size() != steps) throw DimensionError("lstm_backward: gradient length mismatch");
  const std::size_t n = cache.steps.front().x.rows();
  const std::size_t h = p.hidden_size();
  Sequence dx(steps);
  Tensor2 dh_carry(n, h);
  Tensor2 dc_carry(n, h);
  for (std::size_t k = steps; k-- > 0;) {
    const std::size_t pos = cache.reverse ? steps - 1 - k : k;
    Tensor2 dh = dh_carry;
    if (!grad_h[pos].empty()) {
      require_same_shape(dh, grad_h[pos], "lstm_backward");
      auto d = dh.values();
      auto g = grad_h[pos].values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
    auto step = lstm_cell_backward(dh, dc_carry, cache.steps[k], p, grad);
    dx[pos] = std::move(step.dx);
    dh_carry = std::move(step.dh_prev);
    dc_carry = std::move(step.dc_prev);
  }
  return dx;
}

Sequence bilstm_forward(const Sequence& seq, const LayerParams& fwd, const LayerParams& bwd,
                        bool return_sequences, BiLstmCache* cache) {
  if (seq.empty()) throw DimensionError("bilstm_forward: empty sequence");
  if (fwd.kernel.rows() != bwd.kernel.rows()) {
    throw DimensionError("bilstm_forward: direction input widths differ");
  }
  Sequence f = lstm_forward(seq, fwd, false, cache ? &cache->forward : nullptr);
  Sequence b = lstm_forward(seq, bwd, true, cache ? &cache->backward : nullptr);
  Sequence out;
  if (return_sequences) {
    out.reserve(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const Tensor2* parts[] = {&f[t], &b[t]};
      out.push_back(concat_columns(parts));
    }
  } else {
    const Tensor2* parts[] = {&f.back(), &b.front()};
    out.push_back(concat_columns(parts));
  }
  if (cache) {
    cache->steps = seq.size();
    cache->return_sequences = return_sequences;
    cache->ready = true;
  }
  return out;
}

Sequence bilstm_backward(const Sequence& grad_output, const LayerParams& fwd,
                         const LayerParams& bwd, const BiLstmCache& cache, GradientSet& grad_fwd,
                         GradientSet& grad_bwd) {
  if (!cache.ready) throw StateError("bilstm_backward called before bilstm_forward");
  const std::size_t steps = cache.steps;
  const std::size_t hf = fwd.hidden_size();
  const std::size_t hb = bwd.hidden_size();
  Sequence gf(steps), gb(steps);
  const auto split = [&](const Tensor2& g, Tensor2& to_f, Tensor2& to_b) {
    if (g.cols() != hf + hb) throw DimensionError("bilstm_backward: gradient width");
    to_f = Tensor2(g.rows(), hf);
    to_b = Tensor2(g.rows(), hb);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t j = 0; j < hf; ++j) to_f(r, j) = g(r, j);
      for (std::size_t j = 0; j < hb; ++j) to_b(r, j) = g(r, hf + j);
    }
  };
  if (cache.return_sequences) {
    if (grad_output.size() != steps) throw DimensionError("bilstm_backward: sequence length");
    for (std::size_t t = 0; t < steps; ++t) split(grad_output[t], gf[t], gb[t]);
  } else {
    if (grad_output.size() != 1) throw DimensionError("bilstm_backward: expected final state");
    split(grad_output.front(), gf[steps - 1], gb[0]);
  }
  Sequence dxf = lstm_backward(gf, fwd, cache.forward, grad_fwd);
  Sequence dxb = lstm_backward(gb, bwd, cache.backward, grad_bwd);
  for (std::size_t t = 0; t < steps; ++t) {
    auto d = dxf[t].values();
    auto e = dxb[t].values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += e[i];
  }
  return dxf;
}

}  // namespace edgeguard::nn
