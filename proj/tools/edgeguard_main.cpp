#include <iostream>

#include "CLI11.hpp"

#include "edgeguard/app.hpp"
#include "edgeguard/error.hpp"

namespace {

void add_common(CLI::App* cmd, edgeguard::app::Overrides& o, std::string& config, std::uint64_t& seed,
                std::string& out) {
  cmd->add_option("--config", config, "JSON run configuration");
  cmd->add_option("--seed", seed, "root seed (overrides the config)");
  cmd->add_option("--out", out, "output directory");
  cmd->add_option("--dataset", o.dataset,
                  "CSV file(s) for preprocess; artifact directory for the other commands");
}

}  // namespace

int main(int argc, char** argv) {
  namespace app = edgeguard::app;
  CLI::App cli{"edgeguard: fused AE-CNN-BiLSTM intrusion detection toolkit"};
  cli.require_subcommand(1);

  app::Overrides o;
  std::string config, out, model, profile, resume;
  std::uint64_t seed = 0;

  std::vector<CLI::App*> workflow;
  for (const char* name : {"preprocess", "train", "fedsim", "evaluate", "bench"}) {
    auto* cmd = cli.add_subcommand(name);
    add_common(cmd, o, config, seed, out);
    workflow.push_back(cmd);
  }
  workflow[1]->add_option("--resume", resume, "checkpoint to continue training from");
  workflow[3]->add_option("--model", model, "model file (default <out>/model.egrd)");
  workflow[3]->add_option("--profile", profile, "threshold profile: balanced, urllc-strict, recall-max, ...");
  workflow[4]->add_option("--model", model, "model file (default <out>/model.egrd)");

  edgeguard::pipeline::SyntheticOptions synth;
  std::string synth_out;
  auto* gen = cli.add_subcommand("synth", "write the two-Gaussian CSV fixture");
  gen->add_option("--out", synth_out, "CSV path")->required();
  gen->add_option("--rows", synth.rows, "row count")->capture_default_str();
  gen->add_option("--dims", synth.dims, "Gaussian feature columns")->capture_default_str();
  gen->add_option("--separation", synth.separation, "distance between class means")->capture_default_str();
  gen->add_option("--positive-fraction", synth.positive_fraction, "attack share")->capture_default_str();
  gen->add_option("--categorical", synth.categorical_columns, "extra categorical columns")->capture_default_str();
  gen->add_option("--heavy-tail", synth.heavy_tail_columns, "extra lognormal columns")->capture_default_str();
  gen->add_option("--seed", synth.seed, "generator seed")->capture_default_str();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : app::kConfigError;
  }

  if (gen->parsed()) {
    try {
      edgeguard::pipeline::write_synthetic_csv(synth, synth_out);
      std::cout << "wrote " << synth.rows << " rows to " << synth_out << "\n";
      return app::kOk;
    } catch (const std::exception& e) {
      std::cerr << "edgeguard synth: " << e.what() << "\n";
      return app::exit_code_for(e);
    }
  }

  for (auto* cmd : workflow) {
    if (!cmd->parsed()) continue;
    if (!config.empty()) o.config = config;
    if (cmd->count("--seed")) o.seed = seed;
    if (!out.empty()) o.out = out;
    if (!model.empty()) o.model = model;
    if (!profile.empty()) o.profile = profile;
    if (!resume.empty()) o.resume = resume;
    return app::run_command(cmd->get_name(), o, std::cout, std::cerr);
  }
  return app::kConfigError;
}
