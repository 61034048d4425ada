#include <algorithm>
#include <cmath>

#include "edgeguard/error.hpp"
#include "edgeguard/model.hpp"
#include "edgeguard/nn/lstm.hpp"

namespace edgeguard::model {

using nn::Activation;

struct TrainingGraph::Caches {
  bool ready = false;
  bool with_decoder = true;
  Tensor2 input;

  nn::DenseCache encoder, bottleneck, decoder_hidden, decoder_output;
  nn::DropoutMask ae_mask;

  nn::ConvCache conv1, conv2;
  nn::PoolCache pool, global_pool;
  nn::DenseCache cnn_projection;

  nn::BiLstmCache bilstm1, bilstm2;
  nn::DenseCache lstm_projection;

  nn::DenseCache fusion_dense;
  nn::DropoutMask fusion_mask;
  nn::DenseCache fusion_output;

  ForwardOutput out;
};

namespace {

void check_input(const ModelParams& params, const Tensor2& x) {
  if (x.cols() != params.descriptor.input_dim) {
    throw DimensionError("model expects " + std::to_string(params.descriptor.input_dim) +
                         " input features, got " + std::to_string(x.cols()));
  }
  if (x.rows() == 0) throw DimensionError("model: empty batch");
}

void sigmoid_in_place(Tensor2& t) {
  for (double& v : t.values()) v = 1.0 / (1.0 + std::exp(-v));
}

template <typename Cache>
Cache* maybe(TrainingGraph::Caches* c, Cache TrainingGraph::Caches::*member) {
  return c ? &(c->*member) : nullptr;
}

}  // namespace

// Shared by training, validation and inference so the three paths produce
// identical probabilities for identical inputs.
static ForwardOutput run_forward(const ModelParams& params, const Tensor2& x, bool training,
                                 Rng& rng, TrainingGraph::Caches* c, bool with_decoder) {
  using C = TrainingGraph::Caches;
  check_input(params, x);
  const auto& d = params.descriptor;
  const Activation act = d.hidden_activation;
  const std::size_t n = x.rows();

  // Autoencoder branch.
  Tensor2 h = nn::fc_forward(x, params.layer("ae.encoder"), act, maybe(c, &C::encoder));
  h = nn::dropout(h, d.ae_dropout, training, rng, maybe(c, &C::ae_mask));
  Tensor2 ae_embedding = nn::fc_forward(h, params.layer("ae.bottleneck"), act, maybe(c, &C::bottleneck));
  Tensor2 recon;
  if (with_decoder) {
    Tensor2 dh = nn::fc_forward(ae_embedding, params.layer("ae.decoder_hidden"), act,
                                maybe(c, &C::decoder_hidden));
    recon = nn::fc_forward(dh, params.layer("ae.decoder_output"), Activation::linear,
                           maybe(c, &C::decoder_output));
  }

  // CNN branch: each row becomes a length-D single-channel sequence.
  const nn::ConvGeometry geometry{d.cnn_kernel, d.cnn_stride, nn::Padding::same};
  const std::size_t steps0 = d.input_dim;
  Tensor2 seq(n * steps0, 1, std::vector<double>(x.values().begin(), x.values().end()));
  Tensor2 conv = nn::conv1d_forward(seq, steps0, params.layer("cnn.conv1"), geometry, act,
                                    maybe(c, &C::conv1));
  const std::size_t steps1 = nn::conv_output_length(steps0, geometry);
  conv = nn::maxpool1d(conv, steps1, d.cnn_pool, maybe(c, &C::pool));
  const std::size_t steps2 = nn::pooled_length(steps1, d.cnn_pool);
  conv = nn::conv1d_forward(conv, steps2, params.layer("cnn.conv2"), geometry, act,
                            maybe(c, &C::conv2));
  const std::size_t steps3 = nn::conv_output_length(steps2, geometry);
  conv = nn::global_maxpool(conv, steps3, maybe(c, &C::global_pool));
  Tensor2 cnn_embedding = nn::fc_forward(conv, params.layer("cnn.projection"), act,
                                         maybe(c, &C::cnn_projection));

  // BiLSTM branch: each row is a sequence of one step with D attributes.
  nn::Sequence s1 = nn::bilstm_forward({x}, params.layer("bilstm1.forward"),
                                       params.layer("bilstm1.backward"), true,
                                       maybe(c, &C::bilstm1));
  nn::Sequence s2 = nn::bilstm_forward(s1, params.layer("bilstm2.forward"),
                                       params.layer("bilstm2.backward"), false,
                                       maybe(c, &C::bilstm2));
  Tensor2 lstm_embedding = nn::fc_forward(s2.front(), params.layer("bilstm.projection"), act,
                                          maybe(c, &C::lstm_projection));

  // Fusion head.
  const Tensor2* parts[] = {&ae_embedding, &cnn_embedding, &lstm_embedding};
  ForwardOutput out;
  out.fused = concat_columns(parts);
  Tensor2 f = nn::fc_forward(out.fused, params.layer("fusion.dense"), act, maybe(c, &C::fusion_dense));
  f = nn::dropout(f, d.fusion_dropout, training, rng, maybe(c, &C::fusion_mask));
  out.probabilities = nn::fc_forward(f, params.layer("fusion.output"), Activation::linear,
                                     maybe(c, &C::fusion_output));
  sigmoid_in_place(out.probabilities);
  out.reconstruction = std::move(recon);
  if (c) {
    c->input = x;
    c->with_decoder = with_decoder;
    c->ready = true;
  }
  return out;
}

TrainingGraph::TrainingGraph() : caches_(std::make_unique<Caches>()) {}
TrainingGraph::~TrainingGraph() = default;
TrainingGraph::TrainingGraph(TrainingGraph&&) noexcept = default;
TrainingGraph& TrainingGraph::operator=(TrainingGraph&&) noexcept = default;

const ForwardOutput& TrainingGraph::forward(const ModelParams& params, const Tensor2& x,
                                            bool training, Rng& rng) {
  if (!params.has_decoder()) {
    throw StateError("training graph needs the decoder layers; this model was saved without them");
  }
  caches_->ready = false;
  caches_->out = run_forward(params, x, training, rng, caches_.get(), true);
  return caches_->out;
}

nn::LossTerms TrainingGraph::backward(const ModelParams& params, std::span<const int> labels,
                                      ModelParams& grads) {
  auto& c = *caches_;
  if (!c.ready) throw StateError("backward called before forward");
  const auto& d = params.descriptor;
  const Activation act = d.hidden_activation;
  for (auto* b : grads.buffers()) b->fill(0.0);

  const Tensor2& l2_weights = params.layer("fusion.dense").kernel;
  const nn::LossTerms loss = nn::composite_loss(c.out.probabilities, labels, c.out.reconstruction,
                                                c.input, d.loss_weights(), &l2_weights);

  // Fusion head.
  Tensor2 g = nn::bce_logit_gradient(c.out.probabilities, labels);
  g = nn::fc_backward(g, params.layer("fusion.output"), Activation::linear, c.fusion_output,
                      grads.layer("fusion.output"));
  g = nn::dropout_backward(g, c.fusion_mask);
  Tensor2 g_fused = nn::fc_backward(g, params.layer("fusion.dense"), act, c.fusion_dense,
                                    grads.layer("fusion.dense"));
  {
    auto gw = grads.layer("fusion.dense").kernel.values();
    auto w = l2_weights.values();
    const double k = 2.0 * d.lambda_l2;
    for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += k * w[i];
  }

  const std::size_t n = g_fused.rows();
  Tensor2 g_ae(n, d.ae_bottleneck), g_cnn(n, d.cnn_projection), g_lstm(n, d.lstm_projection);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = g_fused.row(r);
    std::size_t off = 0;
    for (Tensor2* part : {&g_ae, &g_cnn, &g_lstm}) {
      auto dst = part->row(r);
      std::copy_n(row.begin() + static_cast<std::ptrdiff_t>(off), dst.size(), dst.begin());
      off += dst.size();
    }
  }

  // Autoencoder: the bottleneck feeds both the decoder and the fusion head.
  Tensor2 g_recon = nn::mse_gradient(c.out.reconstruction, c.input, d.lambda_recon);
  g_recon = nn::fc_backward(g_recon, params.layer("ae.decoder_output"), Activation::linear,
                            c.decoder_output, grads.layer("ae.decoder_output"));
  g_recon = nn::fc_backward(g_recon, params.layer("ae.decoder_hidden"), act, c.decoder_hidden,
                            grads.layer("ae.decoder_hidden"));
  {
    auto a = g_ae.values();
    auto b = g_recon.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  }
  g = nn::fc_backward(g_ae, params.layer("ae.bottleneck"), act, c.bottleneck,
                      grads.layer("ae.bottleneck"));
  g = nn::dropout_backward(g, c.ae_mask);
  nn::fc_backward(g, params.layer("ae.encoder"), act, c.encoder, grads.layer("ae.encoder"));

  // CNN.
  g = nn::fc_backward(g_cnn, params.layer("cnn.projection"), act, c.cnn_projection,
                      grads.layer("cnn.projection"));
  g = nn::pool_backward(g, c.global_pool);
  g = nn::conv1d_backward(g, params.layer("cnn.conv2"), act, c.conv2, grads.layer("cnn.conv2"));
  g = nn::pool_backward(g, c.pool);
  nn::conv1d_backward(g, params.layer("cnn.conv1"), act, c.conv1, grads.layer("cnn.conv1"));

  // BiLSTM.
  g = nn::fc_backward(g_lstm, params.layer("bilstm.projection"), act, c.lstm_projection,
                      grads.layer("bilstm.projection"));
  nn::Sequence gs = nn::bilstm_backward({g}, params.layer("bilstm2.forward"),
                                        params.layer("bilstm2.backward"), c.bilstm2,
                                        grads.layer("bilstm2.forward"),
                                        grads.layer("bilstm2.backward"));
  nn::bilstm_backward(gs, params.layer("bilstm1.forward"), params.layer("bilstm1.backward"),
                      c.bilstm1, grads.layer("bilstm1.forward"), grads.layer("bilstm1.backward"));
  return loss;
}

ForwardOutput forward_train(const ModelParams& params, const Tensor2& x, bool training, Rng& rng) {
  if (!params.has_decoder()) throw StateError("forward_train needs the decoder layers");
  return run_forward(params, x, training, rng, nullptr, true);
}

Tensor2 forward_infer(const ModelParams& params, const Tensor2& x) {
  Rng unused(0);
  return run_forward(params, x, false, unused, nullptr, false).probabilities;
}

nn::LossTerms evaluate_loss(const ModelParams& params, const FeatureMatrix& data,
                            std::size_t batch_size) {
  if (data.rows() == 0) throw DimensionError("evaluate_loss: empty dataset");
  Rng unused(0);
  const auto& d = params.descriptor;
  const Tensor2& l2_weights = params.layer("fusion.dense").kernel;
  // Row-weighted means over batches reproduce the full-set means.
  nn::LossTerms total;
  for (std::size_t begin = 0; begin < data.rows(); begin += batch_size) {
    const std::size_t end = std::min(data.rows(), begin + batch_size);
    Tensor2 xb = data.x.slice_rows(begin, end);
    const auto out = run_forward(params, xb, false, unused, nullptr, true);
    std::span<const int> yb(data.y.data() + begin, end - begin);
    const double w = static_cast<double>(end - begin) / static_cast<double>(data.rows());
    total.bce += w * nn::binary_cross_entropy(out.probabilities, yb);
    total.mse += w * nn::mean_squared_error(out.reconstruction, xb);
  }
  total.l2 = d.lambda_l2 * nn::sum_of_squares(l2_weights);
  total.total = total.bce + d.lambda_recon * total.mse + total.l2;
  return total;
}

}  // namespace edgeguard::model
