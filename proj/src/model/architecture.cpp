#include <algorithm>
#include <cmath>

#include "edgeguard/error.hpp"
#include "edgeguard/model.hpp"

namespace edgeguard::model {

using nlohmann::json;
using nn::LayerKind;
using nn::LayerParams;

ArchitectureDescriptor ArchitectureDescriptor::reference(std::size_t input_dim) {
  ArchitectureDescriptor d;
  d.input_dim = input_dim;
  return d;
}

void ArchitectureDescriptor::validate() const {
  const auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ParameterError(std::string("architecture: ") + name + " must be >= 1");
  };
  positive(input_dim, "input_dim");
  positive(ae_hidden, "ae_hidden");
  positive(ae_bottleneck, "ae_bottleneck");
  positive(cnn_filters1, "cnn_filters1");
  positive(cnn_filters2, "cnn_filters2");
  positive(cnn_kernel, "cnn_kernel");
  positive(cnn_stride, "cnn_stride");
  positive(cnn_pool, "cnn_pool");
  positive(cnn_projection, "cnn_projection");
  positive(lstm_hidden1, "lstm_hidden1");
  positive(lstm_hidden2, "lstm_hidden2");
  positive(lstm_projection, "lstm_projection");
  positive(fusion_hidden, "fusion_hidden");
  const auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v < 1.0)) {
      throw ParameterError(std::string("architecture: ") + name + " must lie in [0,1)");
    }
  };
  rate(ae_dropout, "ae_dropout");
  rate(fusion_dropout, "fusion_dropout");
  if (!(lambda_recon >= 0.0) || !(lambda_l2 >= 0.0)) {
    throw ParameterError("architecture: loss weights must be non-negative");
  }
}

json ArchitectureDescriptor::to_json() const {
  return json{
      {"input_dim", input_dim},
      {"ae", {{"hidden", ae_hidden}, {"bottleneck", ae_bottleneck}, {"dropout", ae_dropout}}},
      {"cnn",
       {{"filters", {cnn_filters1, cnn_filters2}},
        {"kernel", cnn_kernel},
        {"stride", cnn_stride},
        {"padding", "same"},
        {"pool", cnn_pool},
        {"projection", cnn_projection}}},
      {"bilstm", {{"hidden", {lstm_hidden1, lstm_hidden2}}, {"projection", lstm_projection}}},
      {"fusion",
       {{"input", fusion_input_dim()}, {"hidden", fusion_hidden}, {"dropout", fusion_dropout}}},
      {"hidden_activation", nn::to_string(hidden_activation)},
      {"lambda_recon", lambda_recon},
      {"lambda_l2", lambda_l2},
  };
}

ArchitectureDescriptor ArchitectureDescriptor::from_json(const json& j, ArchitectureDescriptor d) {
  try {
    if (!j.is_object()) throw ParameterError("architecture: expected a JSON object");
    d.input_dim = j.value("input_dim", d.input_dim);
    if (j.contains("ae")) {
      const auto& a = j.at("ae");
      d.ae_hidden = a.value("hidden", d.ae_hidden);
      d.ae_bottleneck = a.value("bottleneck", d.ae_bottleneck);
      d.ae_dropout = a.value("dropout", d.ae_dropout);
    }
    if (j.contains("cnn")) {
      const auto& c = j.at("cnn");
      if (c.contains("filters")) {
        const auto& f = c.at("filters");
        if (!f.is_array() || f.size() != 2) throw ParameterError("architecture: cnn.filters needs 2 entries");
        d.cnn_filters1 = f[0].get<std::size_t>();
        d.cnn_filters2 = f[1].get<std::size_t>();
      }
      if (c.value("padding", std::string("same")) != "same") {
        throw ParameterError("architecture: only same padding is supported for the CNN branch");
      }
      d.cnn_kernel = c.value("kernel", d.cnn_kernel);
      d.cnn_stride = c.value("stride", d.cnn_stride);
      d.cnn_pool = c.value("pool", d.cnn_pool);
      d.cnn_projection = c.value("projection", d.cnn_projection);
    }
    if (j.contains("bilstm")) {
      const auto& b = j.at("bilstm");
      if (b.contains("hidden")) {
        const auto& h = b.at("hidden");
        if (!h.is_array() || h.size() != 2) throw ParameterError("architecture: bilstm.hidden needs 2 entries");
        d.lstm_hidden1 = h[0].get<std::size_t>();
        d.lstm_hidden2 = h[1].get<std::size_t>();
      }
      d.lstm_projection = b.value("projection", d.lstm_projection);
    }
    if (j.contains("fusion")) {
      const auto& f = j.at("fusion");
      d.fusion_hidden = f.value("hidden", d.fusion_hidden);
      d.fusion_dropout = f.value("dropout", d.fusion_dropout);
    }
    if (j.contains("hidden_activation")) {
      d.hidden_activation = nn::activation_from_string(j.at("hidden_activation").get<std::string>());
    }
    d.lambda_recon = j.value("lambda_recon", d.lambda_recon);
    d.lambda_l2 = j.value("lambda_l2", d.lambda_l2);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("architecture: ") + e.what());
  }
  d.validate();
  return d;
}

// --- ModelParams ---------------------------------------------------------------

const LayerParams& ModelParams::layer(std::string_view name) const {
  for (const auto& l : layers)
    if (l.name == name) return l.params;
  throw StateError("model has no layer '" + std::string(name) + "'");
}

LayerParams& ModelParams::layer(std::string_view name) {
  for (auto& l : layers)
    if (l.name == name) return l.params;
  throw StateError("model has no layer '" + std::string(name) + "'");
}

bool ModelParams::has_layer(std::string_view name) const {
  return std::any_of(layers.begin(), layers.end(), [&](const auto& l) { return l.name == name; });
}

bool ModelParams::has_decoder() const {
  return std::all_of(std::begin(kDecoderLayers), std::end(kDecoderLayers),
                     [&](std::string_view n) { return has_layer(n); });
}

std::vector<Tensor2*> ModelParams::buffers() {
  std::vector<Tensor2*> out;
  for (auto& l : layers)
    for (auto* b : l.params.buffers()) out.push_back(b);
  return out;
}

std::vector<const Tensor2*> ModelParams::buffers() const {
  std::vector<const Tensor2*> out;
  for (const auto& l : layers)
    for (const auto* b : l.params.buffers()) out.push_back(b);
  return out;
}

std::vector<std::string> ModelParams::buffer_names() const {
  std::vector<std::string> out;
  for (const auto& l : layers)
    for (const auto& b : l.params.buffer_names()) out.push_back(l.name + "." + b);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.params.parameter_count();
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.descriptor = descriptor;
  z.metadata = metadata;
  z.layers.reserve(layers.size());
  for (const auto& l : layers) z.layers.push_back({l.name, l.params.zeros_like()});
  return z;
}

ModelParams ModelParams::without_decoder() const {
  ModelParams out;
  out.descriptor = descriptor;
  out.metadata = metadata;
  for (const auto& l : layers) {
    const bool decoder = std::find(std::begin(kDecoderLayers), std::end(kDecoderLayers), l.name) !=
                         std::end(kDecoderLayers);
    if (!decoder) out.layers.push_back(l);
  }
  return out;
}

std::vector<NamedLayer> layer_layout(const ArchitectureDescriptor& d) {
  d.validate();
  const std::size_t k = d.cnn_kernel;
  return {
      {"ae.encoder", LayerParams::dense(d.input_dim, d.ae_hidden)},
      {"ae.bottleneck", LayerParams::dense(d.ae_hidden, d.ae_bottleneck)},
      {"ae.decoder_hidden", LayerParams::dense(d.ae_bottleneck, d.ae_hidden)},
      {"ae.decoder_output", LayerParams::dense(d.ae_hidden, d.input_dim)},
      {"cnn.conv1", LayerParams::conv1d(k, 1, d.cnn_filters1)},
      {"cnn.conv2", LayerParams::conv1d(k, d.cnn_filters1, d.cnn_filters2)},
      {"cnn.projection", LayerParams::dense(d.cnn_filters2, d.cnn_projection)},
      {"bilstm1.forward", LayerParams::lstm(d.input_dim, d.lstm_hidden1)},
      {"bilstm1.backward", LayerParams::lstm(d.input_dim, d.lstm_hidden1)},
      {"bilstm2.forward", LayerParams::lstm(2 * d.lstm_hidden1, d.lstm_hidden2)},
      {"bilstm2.backward", LayerParams::lstm(2 * d.lstm_hidden1, d.lstm_hidden2)},
      {"bilstm.projection", LayerParams::dense(2 * d.lstm_hidden2, d.lstm_projection)},
      {"fusion.dense", LayerParams::dense(d.fusion_input_dim(), d.fusion_hidden)},
      {"fusion.output", LayerParams::dense(d.fusion_hidden, 1)},
  };
}

namespace {

void fill_uniform(Tensor2& t, double limit, Rng& rng) {
  for (double& v : t.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

bool feeds_relu(const std::string& name) {
  return name != "ae.decoder_output" && name != "fusion.output";
}

}  // namespace

ModelParams build(const ArchitectureDescriptor& d, std::uint64_t seed) {
  ModelParams m;
  m.descriptor = d;
  m.metadata.seed = seed;
  m.layers = layer_layout(d);
  Rng rng(seed);
  for (auto& [name, p] : m.layers) {
    const auto fan_in = static_cast<double>(p.kernel.rows());
    if (p.kind == LayerKind::lstm_cell) {
      fill_uniform(p.kernel, std::sqrt(3.0 / fan_in), rng);
      fill_uniform(p.recurrent, std::sqrt(3.0 / static_cast<double>(p.hidden_size())), rng);
      const std::size_t h = p.hidden_size();
      for (std::size_t j = h; j < 2 * h; ++j) p.bias(0, j) = 1.0;  // forget gate
    } else {
      const bool he = d.hidden_activation == nn::Activation::relu && feeds_relu(name);
      fill_uniform(p.kernel, std::sqrt((he ? 6.0 : 3.0) / fan_in), rng);
    }
  }
  return m;
}

}  // namespace edgeguard::model
