#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "edgeguard/app.hpp"
#include "support.hpp"

using namespace edgeguard;
using namespace edgeguard::app;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

// Small architecture and data so every command finishes in well under a second.
json base_config(const fs::path& dir) {
  return {
      {"seed", 7},
      {"output_dir", (dir / "out").string()},
      {"dataset", {{"csv", (dir / "data.csv").string()}}},
      {"architecture",
       {{"ae", {{"hidden", 8}, {"bottleneck", 4}}},
        {"cnn", {{"filters", {4, 4}}, {"projection", 4}}},
        {"bilstm", {{"hidden", {4, 4}}, {"projection", 4}}},
        {"fusion", {{"hidden", 8}}}}},
      {"training", {{"epochs", 2}, {"batch_size", 32}}},
      {"eval", {{"latency", {{"repetitions", 5}, {"batch_sizes", {1, 8}}}}}},
  };
}

struct Run {
  int code;
  std::string err;
};

Run run(const std::string& cmd, const fs::path& dir, const json& config, Overrides o = {}) {
  const auto path = dir / ("config_" + cmd + ".json");
  std::ofstream(path) << config.dump(2);
  o.config = path;
  std::ostringstream log, err;
  const int code = run_command(cmd, o, log, err);
  return {code, err.str()};
}

fs::path fixture(const std::string& name, std::size_t rows = 400) {
  const auto dir = oracle::scratch_dir(name);
  pipeline::SyntheticOptions so;
  so.rows = rows;
  so.dims = 6;
  so.categorical_columns = 1;
  so.seed = 3;
  pipeline::write_synthetic_csv(so, dir / "data.csv");
  return dir;
}

}  // namespace

TEST_CASE("preprocess writes artifacts and is reproducible") {
  const auto dir = fixture("cli_pre");
  const auto cfg = base_config(dir);
  REQUIRE(run("preprocess", dir, cfg).code == 0);
  const auto out = dir / "out";
  for (const char* f : {"train.egfm", "test.egfm", "transform.json", "preprocess_audit.json", "preprocess.config.json"})
    CHECK(fs::exists(out / f));
  const auto audit = read_json(out / "preprocess_audit.json");
  const auto replay = read_json(out / "preprocess.config.json");
  CHECK(audit.at("provenance").at("config_hash") == replay.at("config_hash"));
  CHECK(replay.at("config").at("seed") == 7);

  std::vector<std::string> first;
  for (const char* f : {"train.egfm", "test.egfm", "transform.json", "preprocess_audit.json"}) first.push_back(slurp(out / f));
  REQUIRE(run("preprocess", dir, cfg).code == 0);
  std::size_t i = 0;
  for (const char* f : {"train.egfm", "test.egfm", "transform.json", "preprocess_audit.json"}) CHECK(slurp(out / f) == first[i++]);
}

TEST_CASE("config and data errors map to exit codes") {
  const auto dir = fixture("cli_err", 100);
  auto cfg = base_config(dir);
  CHECK(run("train", dir, cfg).code == kDataError);  // no artifacts yet

  auto no_seed = cfg;
  no_seed.erase("seed");
  CHECK(run("preprocess", dir, no_seed).code == kConfigError);
  Overrides seeded;
  seeded.seed = 3;
  CHECK(run("preprocess", dir, no_seed, seeded).code == kOk);

  auto unknown = cfg;
  unknown["colour"] = "blue";
  CHECK(run("preprocess", dir, unknown).code == kConfigError);

  std::ofstream(dir / "nolabel.csv") << "a,b\n1,2\n3,4\n";
  auto nolabel = cfg;
  nolabel["dataset"]["csv"] = (dir / "nolabel.csv").string();
  const auto r = run("preprocess", dir, nolabel);
  CHECK(r.code == kDataError);
  CHECK(r.err.find("'label'") != std::string::npos);

  auto missing = cfg;
  missing["dataset"]["csv"] = (dir / "absent.csv").string();
  CHECK(run("preprocess", dir, missing).code == kDataError);

  auto alpha = cfg;
  alpha["fedsim"] = {{"scheme", "label_skew"}, {"alpha", 0}};
  CHECK(run("fedsim", dir, alpha).code == kConfigError);

  auto reps = cfg;
  reps["eval"]["latency"]["repetitions"] = 2;
  CHECK(run("bench", dir, reps).code == kConfigError);

}

TEST_CASE("train, resume and zero epochs") {
  const auto dir = fixture("cli_train");
  auto cfg = base_config(dir);
  REQUIRE(run("preprocess", dir, cfg).code == 0);
  const auto out = dir / "out";

  auto zero = cfg;
  zero["training"]["epochs"] = 0;
  zero["output_dir"] = (dir / "zero").string();
  zero["dataset"]["artifacts"] = out.string();
  REQUIRE(run("train", dir, zero).code == 0);
  const auto init = model::load(dir / "zero" / "model.egrd");
  CHECK(init.metadata.epochs_run == 0);
  CHECK(read_jsonl(dir / "zero" / "history.jsonl").empty());

  REQUIRE(run("train", dir, cfg).code == 0);
  auto h = read_jsonl(out / "history.jsonl");
  REQUIRE(h.size() == 2);
  CHECK(h[0].at("epoch") == 1);
  CHECK(fs::exists(out / "model_deploy.egrd"));
  CHECK_FALSE(model::load(out / "model_deploy.egrd").has_decoder());
  const std::string model_bytes = slurp(out / "model.egrd"), history_bytes = slurp(out / "history.jsonl");

  auto longer = cfg;
  longer["training"]["epochs"] = 3;
  Overrides o;
  o.resume = out / "checkpoint.egrd";
  REQUIRE(run("train", dir, longer, o).code == 0);
  h = read_jsonl(out / "history.jsonl");
  REQUIRE(h.size() == 3);
  CHECK(h[2].at("epoch") == 3);
  CHECK(model::load(out / "model.egrd").metadata.epochs_run == 3);

  // a fresh rerun reproduces the first run exactly
  fs::remove(out / "history.jsonl");
  REQUIRE(run("train", dir, cfg).code == 0);
  CHECK(slurp(out / "model.egrd") == model_bytes);
  CHECK(slurp(out / "history.jsonl") == history_bytes);
}

TEST_CASE("single-client fedsim matches train") {
  const auto dir = fixture("cli_fed");
  auto cfg = base_config(dir);
  REQUIRE(run("preprocess", dir, cfg).code == 0);
  auto central = cfg;
  central["output_dir"] = (dir / "central").string();
  central["dataset"]["artifacts"] = (dir / "out").string();
  REQUIRE(run("train", dir, central).code == 0);

  auto fed = central;
  fed["output_dir"] = (dir / "fed").string();
  fed["fedsim"] = {{"n_clients", 1}, {"rounds", 1}, {"local_epochs", 2}};
  REQUIRE(run("fedsim", dir, fed).code == 0);
  CHECK(slurp(dir / "fed" / "model.egrd") == slurp(dir / "central" / "model.egrd"));
  CHECK(read_jsonl(dir / "fed" / "rounds.jsonl").size() == 1);
}

TEST_CASE("evaluate and bench") {
  const auto dir = fixture("cli_eval");
  auto cfg = base_config(dir);
  REQUIRE(run("preprocess", dir, cfg).code == 0);
  REQUIRE(run("train", dir, cfg).code == 0);
  REQUIRE(run("evaluate", dir, cfg).code == 0);
  const auto out = dir / "out";
  const auto report = read_json(out / "eval_report.json");
  for (const char* k : {"accuracy", "precision", "recall", "f1", "auc"}) CHECK(report.at("metrics").contains(k));
  CHECK(report.at("provenance").at("config_hash") == read_json(out / "evaluate.config.json").at("config_hash"));
  CHECK(slurp(out / "roc.csv").rfind("fpr,tpr\n", 0) == 0);

  Overrides strict;
  strict.profile = "urllc-strict";
  const auto r = run("evaluate", dir, cfg, strict);
  CHECK((r.code == kOk || r.code == kRuntimeError));
  Overrides unknown;
  unknown.profile = "nope";
  CHECK(run("evaluate", dir, cfg, unknown).code == kConfigError);

  REQUIRE(run("bench", dir, cfg).code == 0);
  const auto lat = read_json(out / "latency.json");
  CHECK(lat.at("budget_ms") == 10.0);
  CHECK(lat.contains("within_budget"));
  CHECK(lat.at("per_batch").size() == 2);

  // a model for D=6 against a 4-wide matrix
  const auto other = fixture("cli_eval_other");
  pipeline::SyntheticOptions so;
  so.rows = 200;
  so.dims = 4;
  pipeline::write_synthetic_csv(so, other / "data.csv");
  auto narrow = base_config(other);
  REQUIRE(run("preprocess", other, narrow).code == 0);
  Overrides m;
  m.model = out / "model.egrd";
  const auto mismatch = run("evaluate", other, narrow, m);
  CHECK(mismatch.code == kDataError);
  CHECK(mismatch.err.find("features") != std::string::npos);
}
