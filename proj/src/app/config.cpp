#include <cstdio>
#include <fstream>

#include "edgeguard/app.hpp"
#include "edgeguard/binary_io.hpp"
#include "edgeguard/error.hpp"

namespace edgeguard::app {

using nlohmann::json;

namespace {

const char* const kTopLevelKeys[] = {"seed", "output_dir", "dataset", "pipeline", "architecture",
                                     "training", "fedsim", "eval"};

fs::path absolute_from(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) path = base / path;
  return fs::weakly_canonical(path);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

TrainingOptions training_from_json(const json& j, TrainingOptions t) {
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.adam.learning_rate = j.value("learning_rate", t.adam.learning_rate);
  t.adam.beta1 = j.value("beta1", t.adam.beta1);
  t.adam.beta2 = j.value("beta2", t.adam.beta2);
  t.adam.epsilon = j.value("epsilon", t.adam.epsilon);
  t.patience = j.value("patience", t.patience);
  t.val_fraction = j.value("val_fraction", t.val_fraction);
  t.threshold = j.value("threshold", t.threshold);
  if (t.batch_size == 0) throw ConfigError("training.batch_size must be >= 1");
  if (!(t.adam.learning_rate > 0.0)) throw ConfigError("training.learning_rate must be > 0");
  if (!(t.adam.beta1 >= 0.0 && t.adam.beta1 < 1.0) || !(t.adam.beta2 >= 0.0 && t.adam.beta2 < 1.0)) {
    throw ConfigError("training.beta1/beta2 must lie in [0,1)");
  }
  if (!(t.adam.epsilon > 0.0)) throw ConfigError("training.epsilon must be > 0");
  if (!(t.val_fraction > 0.0 && t.val_fraction < 1.0)) throw ConfigError("training.val_fraction must lie in (0,1)");
  if (!(t.threshold > 0.0 && t.threshold < 1.0)) throw ConfigError("training.threshold must lie in (0,1)");
  return t;
}

json training_to_json(const TrainingOptions& t) {
  return {{"epochs", t.epochs},           {"batch_size", t.batch_size},
          {"learning_rate", t.adam.learning_rate}, {"beta1", t.adam.beta1},
          {"beta2", t.adam.beta2},         {"epsilon", t.adam.epsilon},
          {"patience", t.patience},        {"val_fraction", t.val_fraction},
          {"threshold", t.threshold}};
}

eval::ThresholdProfile profile_from_json(const json& j) {
  eval::ThresholdProfile p;
  p.name = j.at("name").get<std::string>();
  try {
    p.objective = eval::objective_from_string(j.at("objective").get<std::string>());
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("eval.profiles: ") + e.what());
  }
  p.bound = j.value("bound", 0.0);
  return p;
}

}  // namespace

json RunConfig::to_json() const {
  json csv_list = json::array();
  for (const auto& p : csv) csv_list.push_back(p.string());
  json profile_list = json::array();
  for (const auto& p : profiles) {
    profile_list.push_back({{"name", p.name}, {"objective", eval::to_string(p.objective)}, {"bound", p.bound}});
  }
  return {
      {"seed", seed},
      {"output_dir", output_dir.string()},
      {"dataset",
       {{"csv", csv_list},
        {"schema", schema ? json(schema->string()) : json(nullptr)},
        {"artifacts", artifacts.string()},
        {"model", model ? json(model->string()) : json(nullptr)},
        {"resume", resume ? json(resume->string()) : json(nullptr)}}},
      {"pipeline", pipeline.to_json()},
      {"architecture", architecture},
      {"training", training_to_json(training)},
      {"fedsim", fedsim.to_json()},
      {"eval",
       {{"profile", profile},
        {"profiles", profile_list},
        {"latency",
         {{"batch_sizes", latency.batch_sizes},
          {"repetitions", latency.repetitions},
          {"warmup", latency.warmup},
          {"budget_ms", latency.budget_ms}}},
        {"latency_in_report", latency_in_report}}},
  };
}

std::string RunConfig::hash() const {
  const std::string text = to_json().dump();
  const auto h = binary::fnv1a(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const eval::ThresholdProfile& RunConfig::active_profile() const {
  for (const auto& p : profiles)
    if (p.name == profile) return p;
  throw ConfigError("unknown threshold profile '" + profile + "'");
}

RunConfig resolve_config(const std::string& command, const Overrides& o) {
  RunConfig c;
  json j = json::object();
  fs::path base = fs::current_path();
  if (o.config) {
    j = read_json_file(*o.config);
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    base = fs::absolute(*o.config).parent_path();
    for (const auto& [key, value] : j.items()) {
      if (std::find(std::begin(kTopLevelKeys), std::end(kTopLevelKeys), key) == std::end(kTopLevelKeys)) {
        throw ConfigError("config: unknown key '" + key + "'");
      }
    }
  }
  const fs::path cwd = fs::current_path();

  try {
    if (o.seed) {
      c.seed = *o.seed;
    } else if (j.contains("seed")) {
      c.seed = j.at("seed").get<std::uint64_t>();
    } else {
      throw ConfigError("a root seed is required: set \"seed\" in the config or pass --seed");
    }

    c.output_dir = o.out ? absolute_from(cwd, o.out->string())
                         : absolute_from(base, j.value("output_dir", std::string("out")));

    const json ds = j.value("dataset", json::object());
    if (ds.contains("csv")) {
      const auto& v = ds.at("csv");
      if (v.is_string()) {
        c.csv.push_back(absolute_from(base, v.get<std::string>()));
      } else {
        for (const auto& p : v) c.csv.push_back(absolute_from(base, p.get<std::string>()));
      }
    }
    if (ds.contains("schema") && !ds.at("schema").is_null()) {
      c.schema = absolute_from(base, ds.at("schema").get<std::string>());
    }
    c.artifacts = ds.contains("artifacts") ? absolute_from(base, ds.at("artifacts").get<std::string>())
                                           : c.output_dir;
    if (ds.contains("model") && !ds.at("model").is_null()) {
      c.model = absolute_from(base, ds.at("model").get<std::string>());
    }
    if (!o.dataset.empty()) {
      if (command == "preprocess") {
        c.csv.clear();
        for (const auto& p : o.dataset) c.csv.push_back(absolute_from(cwd, p));
      } else {
        if (o.dataset.size() != 1) throw ConfigError("--dataset takes one artifact directory for '" + command + "'");
        c.artifacts = absolute_from(cwd, o.dataset.front());
      }
    }
    if (o.model) c.model = absolute_from(cwd, o.model->string());
    if (o.resume) c.resume = absolute_from(cwd, o.resume->string());

    c.pipeline = pipeline::PipelineOptions::from_json(j.value("pipeline", json::object()));
    c.architecture = j.value("architecture", json::object());
    try {
      model::ArchitectureDescriptor::from_json(c.architecture, model::ArchitectureDescriptor::reference(1));
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
    c.training = training_from_json(j.value("training", json::object()), c.training);
    c.fedsim = fedsim::FedConfig::from_json(j.value("fedsim", json::object()), c.fedsim);

    const json ev = j.value("eval", json::object());
    c.profiles = eval::default_profiles();
    if (ev.contains("profiles")) {
      for (const auto& p : ev.at("profiles")) {
        auto prof = profile_from_json(p);
        auto it = std::find_if(c.profiles.begin(), c.profiles.end(),
                               [&](const auto& q) { return q.name == prof.name; });
        if (it != c.profiles.end()) {
          *it = prof;
        } else {
          c.profiles.push_back(prof);
        }
      }
    }
    for (const auto& p : c.profiles) {
      try {
        p.validate();
      } catch (const ParameterError& e) {
        throw ConfigError(std::string("eval profile '") + p.name + "': " + e.what());
      }
    }
    c.profile = o.profile.value_or(ev.value("profile", c.profile));
    (void)c.active_profile();
    if (ev.contains("latency")) {
      const auto& l = ev.at("latency");
      c.latency.batch_sizes = l.value("batch_sizes", c.latency.batch_sizes);
      c.latency.repetitions = l.value("repetitions", c.latency.repetitions);
      c.latency.warmup = l.value("warmup", c.latency.warmup);
      c.latency.budget_ms = l.value("budget_ms", c.latency.budget_ms);
    }
    try {
      c.latency.validate();
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("eval.latency: ") + e.what());
    }
    c.latency_in_report = ev.value("latency_in_report", c.latency_in_report);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

}  // namespace edgeguard::app
