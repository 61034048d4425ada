#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <omp.h>

#include "edgeguard/error.hpp"
#include "edgeguard/eval.hpp"

namespace edgeguard::eval {
namespace {

// Nearest-rank percentile of an already sorted sample.
double nearest_rank(const std::vector<double>& sorted, double pct) {
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

class ThreadPin {
 public:
  ThreadPin() : saved_(omp_get_max_threads()) { omp_set_num_threads(1); }
  ~ThreadPin() { omp_set_num_threads(saved_); }
  ThreadPin(const ThreadPin&) = delete;
  ThreadPin& operator=(const ThreadPin&) = delete;

 private:
  int saved_;
};

}  // namespace

void LatencyOptions::validate() const {
  if (repetitions < 5) {
    throw ParameterError("latency_bench: repetitions = " + std::to_string(repetitions) +
                         "; at least 5 are needed for meaningful statistics");
  }
  if (warmup < 3) throw ParameterError("latency_bench: at least 3 warm-up passes are required");
  if (batch_sizes.empty()) throw ParameterError("latency_bench: no batch sizes given");
  for (auto b : batch_sizes)
    if (b == 0) throw ParameterError("latency_bench: batch size 0");
  if (!(budget_ms > 0.0)) throw ParameterError("latency_bench: budget must be > 0 ms");
}

LatencyReport latency_bench(const model::ModelParams& params, const Tensor2& x,
                            const LatencyOptions& options) {
  options.validate();
  if (x.rows() == 0) throw DimensionError("latency_bench: no input rows");
  if (x.cols() != params.descriptor.input_dim) {
    throw DimensionError("latency_bench: model expects " + std::to_string(params.descriptor.input_dim) +
                         " features, input has " + std::to_string(x.cols()));
  }
  ThreadPin pin;
  LatencyReport report;
  report.budget_ms = options.budget_ms;
  std::size_t cursor = 0;
  for (const auto b : options.batch_sizes) {
    std::vector<std::size_t> idx(b);
    for (auto& i : idx) i = cursor++ % x.rows();
    const Tensor2 batch = x.gather_rows(idx);

    for (std::size_t w = 0; w < options.warmup; ++w) model::forward_infer(params, batch);
    std::vector<double> per_sample;
    per_sample.reserve(options.repetitions);
    double sink = 0.0;
    for (std::size_t r = 0; r < options.repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto out = model::forward_infer(params, batch);
      const auto t1 = std::chrono::steady_clock::now();
      sink += out(0, 0);
      per_sample.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                           static_cast<double>(b));
    }
    if (!std::isfinite(sink)) throw NumericalError("latency_bench: non-finite model output");

    LatencyStats s;
    s.batch_size = b;
    s.repetitions = options.repetitions;
    const std::size_t half = per_sample.size() / 2;
    s.first_half_mean_ms = mean(std::span(per_sample).first(half));
    s.second_half_mean_ms = mean(std::span(per_sample).subspan(half));
    s.mean_ms_per_sample = mean(per_sample);
    s.mean_ms_per_batch = s.mean_ms_per_sample * static_cast<double>(b);
    std::sort(per_sample.begin(), per_sample.end());
    s.p50_ms_per_sample = nearest_rank(per_sample, 50.0);
    s.p99_ms_per_sample = nearest_rank(per_sample, 99.0);
    const double lo = std::min(s.first_half_mean_ms, s.second_half_mean_ms);
    const double hi = std::max(s.first_half_mean_ms, s.second_half_mean_ms);
    if (hi > 1.5 * lo) {
      report.warnings.push_back("batch " + std::to_string(b) +
                                ": run halves differ by more than 50% (unstable timing)");
    }
    if (b == 1) report.within_budget = s.mean_ms_per_sample < options.budget_ms;
    report.per_batch.push_back(s);
  }
  return report;
}

nlohmann::json LatencyReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : per_batch) {
    rows.push_back({{"batch_size", s.batch_size},
                    {"repetitions", s.repetitions},
                    {"mean_ms_per_sample", s.mean_ms_per_sample},
                    {"p50_ms_per_sample", s.p50_ms_per_sample},
                    {"p99_ms_per_sample", s.p99_ms_per_sample},
                    {"mean_ms_per_batch", s.mean_ms_per_batch}});
  }
  return {{"path", "decoder-free inference, 1 thread"},
          {"per_batch", rows},
          {"budget_ms", budget_ms},
          {"within_budget", within_budget ? nlohmann::json(*within_budget) : nlohmann::json(nullptr)},
          {"reference_ms_per_sample", kReferenceMsPerSample},
          {"warnings", warnings}};
}

}  // namespace edgeguard::eval
