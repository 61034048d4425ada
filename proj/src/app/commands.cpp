#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "edgeguard/app.hpp"
#include "edgeguard/error.hpp"
#include "edgeguard/rng.hpp"

namespace edgeguard::app {

using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IngestionError("cannot write '" + path.string() + "'");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IngestionError("write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void prepare_output(const RunConfig& c, const std::string& command) {
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + c.output_dir.string() + "': " + ec.message());
  write_json(c.output_dir / (command + ".config.json"),
             {{"command", command}, {"config_hash", c.hash()}, {"config", c.to_json()}});
}

FeatureMatrix load_artifact(const RunConfig& c, const char* name) {
  const auto path = c.artifacts / name;
  if (!fs::exists(path)) {
    throw IngestionError("missing artifact '" + path.string() + "' (run preprocess first or pass --dataset)");
  }
  return load_feature_matrix(path);
}

fs::path model_path(const RunConfig& c) { return c.model.value_or(c.output_dir / "model.egrd"); }

model::ModelParams initial_model(const RunConfig& c, std::size_t dims) {
  const auto desc = model::ArchitectureDescriptor::from_json(c.architecture,
                                                             model::ArchitectureDescriptor::reference(dims));
  if (desc.input_dim != dims) {
    throw DimensionError("architecture input_dim is " + std::to_string(desc.input_dim) +
                         " but the training matrix has " + std::to_string(dims) + " features");
  }
  return model::build(desc, derive_seed(c.seed, "init"));
}

model::TrainConfig train_config(const RunConfig& c) {
  model::TrainConfig t;
  t.epochs = c.training.epochs;
  t.batch_size = c.training.batch_size;
  t.adam = c.training.adam;
  t.patience = c.training.patience;
  t.seed = derive_seed(c.seed, "train");
  t.threshold = c.training.threshold;
  return t;
}

void check_model_dims(const model::ModelParams& m, const FeatureMatrix& data, const std::string& what) {
  if (m.descriptor.input_dim != data.dims()) {
    throw DimensionError("model input_dim is " + std::to_string(m.descriptor.input_dim) + " but " + what +
                         " has " + std::to_string(data.dims()) + " features");
  }
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string fmt(const std::optional<double>& v, int digits = 4) { return v ? fmt(*v, digits) : "undefined"; }

void save_models(const model::ModelParams& params, const fs::path& dir) {
  model::save(params, dir / "model.egrd");
  model::save(params.without_decoder(), dir / "model_deploy.egrd");
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
  if (dynamic_cast<const IngestionError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e)) {
    return kDataError;
  }
  return kRuntimeError;
}

TrainValSplit carve_validation(const FeatureMatrix& train, double val_fraction, std::uint64_t root_seed) {
  const auto split = pipeline::stratified_split(train.y, 1.0 - val_fraction, derive_seed(root_seed, "val_split"));
  return {train.subset(split.train), train.subset(split.test)};
}

void cmd_preprocess(const RunConfig& c, std::ostream& log) {
  prepare_output(c, "preprocess");
  if (c.csv.empty()) throw ConfigError("preprocess: no input CSV (set dataset.csv or pass --dataset)");
  const auto schema = c.schema ? std::optional(pipeline::Schema::load(*c.schema)) : std::nullopt;
  std::vector<pipeline::RawDataset> parts;
  json sources = json::array();
  for (const auto& p : c.csv) {
    parts.push_back(pipeline::load_csv(p, schema));
    sources.push_back({{"path", p.string()},
                       {"rows", parts.back().rows()},
                       {"rejected_missing", parts.back().rejected_missing}});
    log << "loaded " << p.string() << ": " << parts.back().rows() << " rows ("
        << parts.back().rejected_missing << " rejected for missing values)\n";
  }
  const auto data = pipeline::concat(parts);
  auto result = pipeline::preprocess(data, c.pipeline, c.seed);

  save_feature_matrix(result.train, c.output_dir / "train.egfm");
  save_feature_matrix(result.test, c.output_dir / "test.egfm");
  write_json(c.output_dir / "transform.json", result.spec.to_json());
  result.audit["provenance"] = {{"sources", sources}, {"seed", c.seed}, {"config_hash", c.hash()}};
  write_json(c.output_dir / "preprocess_audit.json", result.audit);

  log << "train " << result.train.rows() << " x " << result.train.dims() << ", test " << result.test.rows()
      << " x " << result.test.dims() << "; dedup removed " << result.audit["dedup_removed"].get<std::size_t>()
      << ", SMOTE added " << result.audit["smote"]["synthesized"].get<std::size_t>() << "\n";
}

void cmd_train(const RunConfig& c, std::ostream& log) {
  prepare_output(c, "train");
  const auto full = load_artifact(c, "train.egfm");
  const auto tv = carve_validation(full, c.training.val_fraction, c.seed);

  model::ModelParams params;
  model::TrainConfig tc = train_config(c);
  const bool resuming = c.resume.has_value();
  if (resuming) {
    params = model::load(*c.resume);
    check_model_dims(params, tv.train, "the training matrix");
    const std::size_t done = params.metadata.epochs_run;
    tc.first_epoch = done + 1;
    tc.epochs = c.training.epochs > done ? c.training.epochs - done : 0;
    tc.seed = derive_seed(c.seed, "train.resume." + std::to_string(tc.first_epoch));
    log << "resuming from " << c.resume->string() << " after epoch " << done << "\n";
  } else {
    params = initial_model(c, tv.train.dims());
  }
  log << "model: " << params.parameter_count() << " parameters, input_dim " << params.descriptor.input_dim
      << ", fusion width " << params.descriptor.fusion_input_dim() << "\n";

  const auto history_path = c.output_dir / "history.jsonl";
  std::ofstream history(history_path, resuming ? std::ios::app : std::ios::trunc);
  if (!history) throw IngestionError("cannot write '" + history_path.string() + "'");
  const auto checkpoint = c.output_dir / "checkpoint.egrd";

  model::TrainResult result;
  try {
    result = model::train(std::move(params), tv.train, &tv.val, tc,
                          [&](const model::EpochRecord& rec, const model::ModelParams& p) {
                            history << rec.to_json().dump() << "\n" << std::flush;
                            model::save(p, checkpoint);
                            log << "epoch " << rec.epoch << ": loss " << fmt(rec.train_loss) << ", val_loss "
                                << fmt(rec.val_loss) << ", val_acc " << fmt(rec.val_accuracy) << " ("
                                << fmt(rec.seconds, 2) << " s)\n";
                          });
  } catch (const model::DivergenceError& e) {
    model::save(e.last_good(), checkpoint);
    log << "training diverged; last good parameters kept in " << checkpoint.string() << "\n";
    throw;
  }
  save_models(result.params, c.output_dir);
  log << "saved " << (c.output_dir / "model.egrd").string() << " after " << result.params.metadata.epochs_run
      << " epochs" << (result.early_stopped ? " (early stop)" : "") << "\n";
}

void cmd_fedsim(const RunConfig& c, std::ostream& log) {
  prepare_output(c, "fedsim");
  const auto full = load_artifact(c, "train.egfm");
  const auto tv = carve_validation(full, c.training.val_fraction, c.seed);
  auto params = initial_model(c, tv.train.dims());
  const auto shards = fedsim::partition(tv.train, c.fedsim.n_clients, c.fedsim.partition,
                                        derive_seed(c.seed, "fedsim.partition"));
  for (const auto& s : shards) {
    log << "client " << s.client_id << ": " << s.num_samples() << " rows (" << s.data.count_label(1)
        << " attack)\n";
  }
  const auto rounds_path = c.output_dir / "rounds.jsonl";
  std::ofstream rounds(rounds_path, std::ios::trunc);
  if (!rounds) throw IngestionError("cannot write '" + rounds_path.string() + "'");

  const auto result = fedsim::run_rounds(
      shards, std::move(params), c.fedsim, train_config(c), &tv.val, derive_seed(c.seed, "fedsim.sampling"),
      [&](const fedsim::RoundRecord& rec, const model::ModelParams&) {
        rounds << rec.to_json().dump() << "\n" << std::flush;
        log << "round " << rec.round << ": " << rec.participants.size() << " clients"
            << (rec.degraded ? " (degraded)" : "") << ", val_acc " << fmt(rec.val_accuracy) << "\n";
      });
  save_models(result.params, c.output_dir);
  log << "saved " << (c.output_dir / "model.egrd").string() << "\n";
}

void cmd_evaluate(const RunConfig& c, std::ostream& log) {
  prepare_output(c, "evaluate");
  const auto mpath = model_path(c);
  const auto params = model::load(mpath);
  const auto test = load_artifact(c, "test.egfm");
  check_model_dims(params, test, "the test matrix");
  const auto& profile = c.active_profile();

  double threshold = c.training.threshold;
  std::string threshold_source = "training.threshold (no train.egfm for validation)";
  if (fs::exists(c.artifacts / "train.egfm")) {
    const auto full = load_artifact(c, "train.egfm");
    const auto tv = carve_validation(full, c.training.val_fraction, c.seed);
    check_model_dims(params, tv.val, "the validation matrix");
    const auto scores = model::forward_infer(params, tv.val.x);
    threshold = eval::select_threshold(tv.val.y, scores.values(), profile);
    threshold_source = "validation carve of train.egfm";
  }

  auto report = eval::evaluate(params, test, threshold, profile);
  json provenance{{"config_hash", c.hash()},
                  {"model", mpath.string()},
                  {"model_seed", params.metadata.seed},
                  {"epochs_run", params.metadata.epochs_run},
                  {"artifacts", c.artifacts.string()},
                  {"test_rows", test.rows()},
                  {"threshold_source", threshold_source}};
  const auto audit_path = c.artifacts / "preprocess_audit.json";
  if (fs::exists(audit_path)) {
    std::ifstream in(audit_path);
    const auto audit = json::parse(in, nullptr, false);
    if (!audit.is_discarded() && audit.contains("provenance")) provenance["dataset"] = audit["provenance"];
  }
  report.provenance = provenance;
  if (c.latency_in_report) {
    eval::LatencyOptions lo;
    lo.batch_sizes = {1};
    lo.repetitions = 20;
    report.latency = eval::latency_bench(params, test.x, lo);
  }
  write_json(c.output_dir / "eval_report.json", report.to_json());
  write_text(c.output_dir / "roc.csv", eval::roc_csv(report.roc));

  const auto& r = report.rates;
  log << "profile " << profile.name << ", threshold " << fmt(threshold, 6) << "\n"
      << "AUC " << fmt(report.roc.auc) << "  precision " << fmt(r.precision) << "  recall " << fmt(r.recall)
      << "  F1 " << fmt(r.f1) << "  accuracy " << fmt(r.accuracy) << "\n"
      << "TN " << report.counts.tn << "  FP " << report.counts.fp << "  FN " << report.counts.fn << "  TP "
      << report.counts.tp << "\n";
}

void cmd_bench(const RunConfig& c, std::ostream& log) {
  prepare_output(c, "bench");
  const auto mpath = model_path(c);
  const auto params = model::load(mpath);
  Tensor2 x;
  std::string source;
  if (fs::exists(c.artifacts / "test.egfm")) {
    const auto test = load_artifact(c, "test.egfm");
    check_model_dims(params, test, "the test matrix");
    x = test.x;
    source = (c.artifacts / "test.egfm").string();
  } else {
    Rng rng(derive_seed(c.seed, "bench"));
    x = Tensor2(512, params.descriptor.input_dim);
    for (double& v : x.values()) v = 2.0 * uniform01(rng) - 1.0;
    source = "uniform random rows";
  }
  const auto report = eval::latency_bench(params, x, c.latency);
  auto j = report.to_json();
  j["model"] = mpath.string();
  j["input_rows"] = source;
  write_json(c.output_dir / "latency.json", j);
  for (const auto& s : report.per_batch) {
    log << "batch " << std::setw(4) << s.batch_size << ": mean " << fmt(s.mean_ms_per_sample) << " ms/sample, p50 "
        << fmt(s.p50_ms_per_sample) << ", p99 " << fmt(s.p99_ms_per_sample) << "\n";
  }
  if (report.within_budget) {
    log << "single-sample budget " << fmt(report.budget_ms, 1) << " ms: " << (*report.within_budget ? "PASS" : "FAIL")
        << " (reference " << eval::kReferenceMsPerSample << " ms/sample)\n";
  }
  for (const auto& w : report.warnings) log << "warning: " << w << "\n";
}

int run_command(const std::string& name, const Overrides& overrides, std::ostream& log, std::ostream& err) {
  try {
    const auto config = resolve_config(name, overrides);
    if (name == "preprocess") {
      cmd_preprocess(config, log);
    } else if (name == "train") {
      cmd_train(config, log);
    } else if (name == "fedsim") {
      cmd_fedsim(config, log);
    } else if (name == "evaluate") {
      cmd_evaluate(config, log);
    } else if (name == "bench") {
      cmd_bench(config, log);
    } else {
      throw ConfigError("unknown command '" + name + "'");
    }
    return kOk;
  } catch (const std::exception& e) {
    err << "edgeguard " << name << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace edgeguard::app
