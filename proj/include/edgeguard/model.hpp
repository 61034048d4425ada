#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "edgeguard/error.hpp"
#include "edgeguard/feature_matrix.hpp"
#include "edgeguard/nn/layers.hpp"
#include "edgeguard/nn/loss.hpp"
#include "edgeguard/nn/optimizer.hpp"
#include "edgeguard/rng.hpp"

namespace edgeguard::model {

// Tri-branch detector layout. Defaults are the reference configuration:
//   AE     D -> 128 -> dropout -> 64 (bottleneck), decoder 64 -> 128 -> D
//   CNN    (D,1) -> conv 64 -> maxpool -> conv 128 -> global maxpool -> 64
//   BiLSTM (1,D) -> BiLSTM 64 (sequences) -> BiLSTM 32 (final) -> 64
//   fusion concat(64,64,64) = 192 -> 128 (L2) -> dropout -> 1 (sigmoid)
struct ArchitectureDescriptor {
  std::size_t input_dim = 53;

  std::size_t ae_hidden = 128;
  std::size_t ae_bottleneck = 64;
  double ae_dropout = 0.2;

  std::size_t cnn_filters1 = 64;
  std::size_t cnn_filters2 = 128;
  std::size_t cnn_kernel = 3;
  std::size_t cnn_stride = 1;
  std::size_t cnn_pool = 2;
  std::size_t cnn_projection = 64;

  std::size_t lstm_hidden1 = 64;
  std::size_t lstm_hidden2 = 32;
  std::size_t lstm_projection = 64;

  std::size_t fusion_hidden = 128;
  double fusion_dropout = 0.4;

  nn::Activation hidden_activation = nn::Activation::relu;
  double lambda_recon = 0.1;
  double lambda_l2 = 1e-4;

  static ArchitectureDescriptor reference(std::size_t input_dim = 53);

  std::size_t fusion_input_dim() const noexcept {
    return ae_bottleneck + cnn_projection + lstm_projection;
  }
  nn::LossWeights loss_weights() const noexcept { return {lambda_recon, lambda_l2}; }
  void validate() const;  // throws ParameterError

  nlohmann::json to_json() const;
  // Missing keys keep their defaults, so a partial object works as an override.
  static ArchitectureDescriptor from_json(const nlohmann::json& j, ArchitectureDescriptor base);
  static ArchitectureDescriptor from_json(const nlohmann::json& j) {
    return from_json(j, ArchitectureDescriptor{});
  }

  bool operator==(const ArchitectureDescriptor&) const = default;
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  bool operator==(const TrainingMetadata&) const = default;
};

struct NamedLayer {
  std::string name;
  nn::LayerParams params;
  bool operator==(const NamedLayer&) const = default;
};

// Names of the decoder layers; absent from a stripped (deployment) model.
inline constexpr std::string_view kDecoderLayers[] = {"ae.decoder_hidden", "ae.decoder_output"};

struct ModelParams {
  ArchitectureDescriptor descriptor;
  TrainingMetadata metadata;
  std::vector<NamedLayer> layers;  // declared order

  const nn::LayerParams& layer(std::string_view name) const;
  nn::LayerParams& layer(std::string_view name);
  bool has_layer(std::string_view name) const;
  bool has_decoder() const;

  // Flattened parameter buffers in declared order, named "<layer>.<buffer>".
  std::vector<Tensor2*> buffers();
  std::vector<const Tensor2*> buffers() const;
  std::vector<std::string> buffer_names() const;
  std::size_t parameter_count() const;

  ModelParams zeros_like() const;
  ModelParams without_decoder() const;

  bool operator==(const ModelParams&) const = default;
};

// Zero-valued layers with the shapes the descriptor implies, in declared order.
std::vector<NamedLayer> layer_layout(const ArchitectureDescriptor& d);

// Fan-in scaled uniform weights (He for ReLU layers, LeCun otherwise), zero
// biases, forget-gate bias 1.
ModelParams build(const ArchitectureDescriptor& d, std::uint64_t seed);

struct ForwardOutput {
  Tensor2 probabilities;   // [N × 1]
  Tensor2 reconstruction;  // [N × D]
  Tensor2 fused;           // [N × fusion_input_dim], order AE | CNN | BiLSTM
};

// Holds the intermediates of one forward pass so gradients can be taken.
class TrainingGraph {
 public:
  TrainingGraph();
  ~TrainingGraph();
  TrainingGraph(TrainingGraph&&) noexcept;
  TrainingGraph& operator=(TrainingGraph&&) noexcept;

  const ForwardOutput& forward(const ModelParams& params, const Tensor2& x, bool training,
                               Rng& rng);
  // Gradient of the composite loss w.r.t. every parameter, written into grads
  // (which must be params.zeros_like()-shaped; it is zeroed first).
  nn::LossTerms backward(const ModelParams& params, std::span<const int> labels,
                         ModelParams& grads);

  struct Caches;

 private:
  std::unique_ptr<Caches> caches_;
};

ForwardOutput forward_train(const ModelParams& params, const Tensor2& x, bool training, Rng& rng);
// Decoder-free path; works on models saved without the decoder.
Tensor2 forward_infer(const ModelParams& params, const Tensor2& x);

// Composite loss in inference mode (dropout off), with reconstruction.
nn::LossTerms evaluate_loss(const ModelParams& params, const FeatureMatrix& data,
                            std::size_t batch_size = 1024);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  nn::AdamConfig adam;
  std::size_t patience = 5;  // 0 disables early stopping
  std::uint64_t seed = 0;
  double threshold = 0.5;
  std::size_t first_epoch = 1;  // numbering continues here when resuming
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> train_precision;
  std::optional<double> train_recall;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
  std::optional<double> val_precision;
  std::optional<double> val_recall;
  double seconds = 0.0;  // wall time; left out of to_json so history files are reproducible

  nlohmann::json to_json() const;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
  bool early_stopped = false;
};

// Raised when the loss or a gradient goes non-finite; carries the parameters
// from the end of the last completed epoch.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, ModelParams last_good)
      : NumericalError(what), last_good_(std::move(last_good)) {}
  const ModelParams& last_good() const noexcept { return last_good_; }

 private:
  ModelParams last_good_;
};

using EpochCallback = std::function<void(const EpochRecord&, const ModelParams&)>;

// Mini-batch training on the composite loss. Batches follow a per-epoch
// shuffle drawn from config.seed; dropout masks come from the same stream.
// val may be null (no validation metrics, no early stopping).
TrainResult train(ModelParams params, const FeatureMatrix& train_set, const FeatureMatrix* val,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// "EGRD" container: u32 version, descriptor JSON blob, named parameter buffers
// in declared order, trailing FNV-1a checksum of everything before it.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<unsigned char> serialize(const ModelParams& params);
ModelParams deserialize(std::span<const unsigned char> bytes, const std::string& context = "model");
void save(const ModelParams& params, const std::filesystem::path& path);
ModelParams load(const std::filesystem::path& path);

}  // namespace edgeguard::model
