#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "edgeguard/error.hpp"
#include "edgeguard/metrics.hpp"
#include "edgeguard/model.hpp"

namespace edgeguard::model {
namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

struct PassSummary {
  double loss = 0.0;
  eval::RateSet rates;
};

PassSummary validation_pass(const ModelParams& params, const FeatureMatrix& val, double threshold) {
  constexpr std::size_t kBatch = 1024;
  Rng unused(0);
  std::vector<double> scores;
  scores.reserve(val.rows());
  double bce = 0.0, mse = 0.0;
  for (std::size_t begin = 0; begin < val.rows(); begin += kBatch) {
    const std::size_t end = std::min(val.rows(), begin + kBatch);
    Tensor2 xb = val.x.slice_rows(begin, end);
    const auto out = forward_train(params, xb, false, unused);
    std::span<const int> yb(val.y.data() + begin, end - begin);
    const double w = static_cast<double>(end - begin) / static_cast<double>(val.rows());
    bce += w * nn::binary_cross_entropy(out.probabilities, yb);
    mse += w * nn::mean_squared_error(out.reconstruction, xb);
    for (double p : out.probabilities.values()) scores.push_back(p);
  }
  const auto& d = params.descriptor;
  PassSummary s;
  s.loss = bce + d.lambda_recon * mse +
           d.lambda_l2 * nn::sum_of_squares(params.layer("fusion.dense").kernel);
  s.rates = eval::metrics_from_counts(eval::confusion(val.y, scores, threshold));
  return s;
}

void check_dataset(const ModelParams& params, const FeatureMatrix& data, const char* what) {
  data.validate();
  if (data.dims() != params.descriptor.input_dim) {
    throw DimensionError(std::string(what) + " has " + std::to_string(data.dims()) +
                         " features but the model expects " +
                         std::to_string(params.descriptor.input_dim));
  }
}

}  // namespace

nlohmann::json EpochRecord::to_json() const {
  return {
      {"epoch", epoch},
      {"train_loss", train_loss},
      {"train_accuracy", train_accuracy},
      {"train_precision", optional_json(train_precision)},
      {"train_recall", optional_json(train_recall)},
      {"val_loss", optional_json(val_loss)},
      {"val_accuracy", optional_json(val_accuracy)},
      {"val_precision", optional_json(val_precision)},
      {"val_recall", optional_json(val_recall)},
      {"train_val_accuracy_gap",
       val_accuracy ? nlohmann::json(train_accuracy - *val_accuracy) : nlohmann::json(nullptr)},
  };
}

TrainResult train(ModelParams params, const FeatureMatrix& train_set, const FeatureMatrix* val,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  params.descriptor.validate();
  check_dataset(params, train_set, "training set");
  if (val) check_dataset(params, *val, "validation set");
  if (config.batch_size == 0) throw ParameterError("train: batch_size must be >= 1");
  if (!(config.threshold > 0.0 && config.threshold < 1.0)) {
    throw ParameterError("train: metric threshold must lie in (0,1)");
  }

  TrainResult result;
  if (config.epochs == 0) {
    result.params = std::move(params);
    return result;
  }
  if (train_set.rows() == 0) throw DimensionError("train: empty training set");

  Rng rng(config.seed);
  nn::Adam adam(config.adam);
  TrainingGraph graph;
  ModelParams grads = params.zeros_like();
  const auto names = params.buffer_names();
  ModelParams last_good = params;
  std::vector<std::size_t> order(train_set.rows());
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t e = 0; e < config.epochs; ++e) {
    const auto started = std::chrono::steady_clock::now();
    const std::size_t epoch = config.first_epoch + e;
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    eval::ConfusionCounts counts;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const Tensor2 xb = train_set.x.gather_rows(idx);
      std::vector<int> yb;
      yb.reserve(idx.size());
      for (auto i : idx) yb.push_back(train_set.y[i]);

      const auto& out = graph.forward(params, xb, true, rng);
      const auto loss = graph.backward(params, yb, grads);
      if (!std::isfinite(loss.total)) {
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch),
                              std::move(last_good));
      }
      try {
        adam.step(params.buffers(), grads.buffers(), names);
      } catch (const NumericalError& err) {
        throw DivergenceError(err.what(), std::move(last_good));
      }
      loss_sum += loss.total * static_cast<double>(idx.size());
      const auto c = eval::confusion(yb, out.probabilities.values(), config.threshold);
      counts.tn += c.tn;
      counts.fp += c.fp;
      counts.fn += c.fn;
      counts.tp += c.tp;
    }
    for (const auto* b : params.buffers()) {
      if (!b->all_finite()) {
        throw DivergenceError("train: non-finite parameters after epoch " + std::to_string(epoch),
                              std::move(last_good));
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.rows());
    const auto rates = eval::metrics_from_counts(counts);
    rec.train_accuracy = rates.accuracy;
    rec.train_precision = rates.precision;
    rec.train_recall = rates.recall;
    if (val && val->rows() > 0) {
      const auto v = validation_pass(params, *val, config.threshold);
      rec.val_loss = v.loss;
      rec.val_accuracy = v.rates.accuracy;
      rec.val_precision = v.rates.precision;
      rec.val_recall = v.rates.recall;
    }
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    params.metadata.seed = config.seed;
    params.metadata.epochs_run = epoch;
    last_good = params;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, params);

    if (rec.val_loss) {
      if (*rec.val_loss < best_val) {
        best_val = *rec.val_loss;
        since_best = 0;
      } else if (config.patience > 0 && ++since_best >= config.patience) {
        result.early_stopped = true;
        break;
      }
    }
  }
  result.params = std::move(params);
  return result;
}

}  // namespace edgeguard::model
