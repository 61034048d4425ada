#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "edgeguard/eval.hpp"
#include "edgeguard/fedsim.hpp"
#include "edgeguard/pipeline.hpp"

namespace edgeguard::app {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kRuntimeError = 4 };

int exit_code_for(const std::exception& e);

struct TrainingOptions {
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  nn::AdamConfig adam;
  std::size_t patience = 5;
  double val_fraction = 0.1;
  double threshold = 0.5;
};

// Values given on the command line; each one wins over the config file.
struct Overrides {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<fs::path> model;
  std::vector<std::string> dataset;
  std::optional<std::string> profile;
  std::optional<fs::path> resume;
};

// Fully resolved run configuration. Paths are absolute.
struct RunConfig {
  std::uint64_t seed = 0;
  fs::path output_dir;
  std::vector<fs::path> csv;           // preprocess inputs
  std::optional<fs::path> schema;
  fs::path artifacts;                  // directory holding train.egfm / test.egfm
  std::optional<fs::path> model;       // evaluate / bench input
  std::optional<fs::path> resume;      // train checkpoint to continue from
  pipeline::PipelineOptions pipeline;
  nlohmann::json architecture = nlohmann::json::object();
  TrainingOptions training;
  fedsim::FedConfig fedsim;
  std::vector<eval::ThresholdProfile> profiles;
  std::string profile = "balanced";
  eval::LatencyOptions latency;
  bool latency_in_report = true;

  nlohmann::json to_json() const;
  std::string hash() const;  // FNV-1a of the canonical JSON, hex
  const eval::ThresholdProfile& active_profile() const;
};

// Merges defaults, the config file and flags. --dataset names CSV inputs for
// preprocess and the artifact directory for every other command.
RunConfig resolve_config(const std::string& command, const Overrides& overrides);

// Each command writes "<name>.config.json" into the output directory and
// throws on failure; run_command maps exceptions to exit codes.
void cmd_preprocess(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_fedsim(const RunConfig& config, std::ostream& log);
void cmd_evaluate(const RunConfig& config, std::ostream& log);
void cmd_bench(const RunConfig& config, std::ostream& log);

int run_command(const std::string& name, const Overrides& overrides, std::ostream& log,
                std::ostream& err);

// Train/validation carve of the training artifact shared by train, fedsim
// and evaluate (threshold selection).
struct TrainValSplit {
  FeatureMatrix train;
  FeatureMatrix val;
};
TrainValSplit carve_validation(const FeatureMatrix& train, double val_fraction, std::uint64_t root_seed);

}  // namespace edgeguard::app
