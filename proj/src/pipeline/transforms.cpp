#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <unordered_set>

#include "edgeguard/error.hpp"
#include "edgeguard/pipeline.hpp"
#include "edgeguard/rng.hpp"

namespace edgeguard::pipeline {

using nlohmann::json;

// --- dedup -------------------------------------------------------------------

namespace {

std::string row_key(const RawDataset& d, std::size_t r) {
  std::string key;
  key.reserve(d.numeric.size() * 8 + 16);
  for (const auto& col : d.numeric) {
    // -0.0 and 0.0 compare equal as feature values.
    const double v = col[r] == 0.0 ? 0.0 : col[r];
    const auto bits = std::bit_cast<std::uint64_t>(v);
    key.append(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  for (const auto& col : d.categorical) {
    const auto len = static_cast<std::uint32_t>(col[r].size());
    key.append(reinterpret_cast<const char*>(&len), sizeof len);
    key += col[r];
  }
  key.push_back(static_cast<char>(d.labels[r]));
  return key;
}

}  // namespace

RawDataset dedup(const RawDataset& data, std::size_t* removed) {
  data.validate();
  std::unordered_set<std::string> seen;
  seen.reserve(data.rows());
  std::vector<std::size_t> keep;
  keep.reserve(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    if (seen.insert(row_key(data, r)).second) keep.push_back(r);
  }
  if (removed) *removed = data.rows() - keep.size();
  RawDataset out = data.select(keep);
  out.rejected_missing = data.rejected_missing;
  return out;
}

// --- winsorization -----------------------------------------------------------

double percentile_linear(std::vector<double> values, double pct) {
  if (values.empty()) throw ParameterError("percentile of an empty column");
  if (!(pct >= 0.0 && pct <= 100.0)) throw ParameterError("percentile must lie in [0,100]");
  std::sort(values.begin(), values.end());
  const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return percentile_linear(std::move(values), 50.0); }

std::optional<double> winsorize_fit(std::span<const double> column, double pct) {
  if (column.empty()) throw ParameterError("winsorize_fit: empty column");
  std::vector<double> v(column.begin(), column.end());
  const double mx = *std::max_element(v.begin(), v.end());
  const double med = median(v);
  if (mx > 10.0 * med && mx > 10.0) return percentile_linear(std::move(v), pct);
  return std::nullopt;
}

void winsorize_apply(std::span<double> column, std::optional<double> cap) {
  if (!cap) return;
  for (double& v : column) v = std::min(v, *cap);
}

// --- one-hot -----------------------------------------------------------------

std::size_t CategoryVocabulary::output_width() const noexcept {
  const std::size_t total = categories.size() + (has_other ? 1 : 0);
  return total == 0 ? 0 : total - 1;
}

std::vector<std::string> CategoryVocabulary::output_names(const std::string& column) const {
  std::vector<std::string> names;
  for (std::size_t i = 1; i < categories.size(); ++i) names.push_back(column + "=" + categories[i]);
  if (has_other) names.push_back(column + "=" + kOtherCategory);
  return names;
}

std::optional<std::size_t> CategoryVocabulary::encode(const std::string& value) const {
  const auto it = std::find(categories.begin(), categories.end(), value);
  if (it == categories.begin()) return std::nullopt;
  if (it != categories.end()) return static_cast<std::size_t>(it - categories.begin()) - 1;
  if (has_other) return categories.size() - 1;
  return std::nullopt;
}

CategoryVocabulary onehot_fit(std::span<const std::string> column, std::size_t max_categories) {
  if (column.empty()) throw ParameterError("onehot_fit: empty column");
  if (max_categories < 2) throw ParameterError("onehot_fit: max_categories must be >= 2");
  std::map<std::string, std::size_t> freq;
  for (const auto& v : column) ++freq[v];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  CategoryVocabulary vocab;
  vocab.has_other = ranked.size() > max_categories;
  const std::size_t keep = vocab.has_other ? max_categories - 1 : ranked.size();
  for (std::size_t i = 0; i < keep; ++i) vocab.categories.push_back(ranked[i].first);
  return vocab;
}

// --- scaling -----------------------------------------------------------------

Standardizer scale_fit(const Tensor2& x) {
  if (x.rows() == 0) throw DimensionError("scale_fit: empty matrix");
  Standardizer s;
  s.input_width = x.cols();
  const auto n = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= n;
    double var = 0.0;
    bool constant = true;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double d = x(r, c) - mean;
      var += d * d;
      if (x(r, c) != x(0, c)) constant = false;
    }
    const double sd = std::sqrt(var / n);
    if (constant || !(sd > 0.0)) {
      s.dropped.push_back(c);
      continue;
    }
    s.kept.push_back(c);
    s.mean.push_back(mean);
    s.stddev.push_back(sd);
  }
  return s;
}

Tensor2 scale_apply(const Standardizer& s, const Tensor2& x) {
  if (x.cols() != s.input_width) {
    throw DimensionError("scale_apply: scaler fitted on " + std::to_string(s.input_width) +
                         " columns, got " + std::to_string(x.cols()));
  }
  Tensor2 out(x.rows(), s.kept.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t k = 0; k < s.kept.size(); ++k) {
      out(r, k) = (x(r, s.kept[k]) - s.mean[k]) / s.stddev[k];
    }
  }
  return out;
}

// --- options and spec --------------------------------------------------------

json PipelineOptions::to_json() const {
  return {{"percentile", percentile},
          {"percentile_method", "linear"},
          {"max_categories", max_categories},
          {"split_ratio", split_ratio},
          {"smote", smote},
          {"smote_k", smote_k}};
}

PipelineOptions PipelineOptions::from_json(const json& j, PipelineOptions o) {
  try {
    o.percentile = j.value("percentile", o.percentile);
    if (j.value("percentile_method", std::string("linear")) != "linear") {
      throw ConfigError("pipeline.percentile_method: only 'linear' is supported");
    }
    o.max_categories = j.value("max_categories", o.max_categories);
    o.split_ratio = j.value("split_ratio", o.split_ratio);
    o.smote = j.value("smote", o.smote);
    o.smote_k = j.value("smote_k", o.smote_k);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline options: ") + e.what());
  }
  if (!(o.percentile > 0.0 && o.percentile <= 100.0)) throw ConfigError("pipeline.percentile must lie in (0,100]");
  if (o.max_categories < 2) throw ConfigError("pipeline.max_categories must be >= 2");
  if (!(o.split_ratio > 0.0 && o.split_ratio < 1.0)) throw ConfigError("pipeline.split_ratio must lie in (0,1)");
  if (o.smote && o.smote_k == 0) throw ConfigError("pipeline.smote_k must be >= 1");
  return o;
}

json TransformSpec::to_json() const {
  json numeric = json::array();
  for (std::size_t i = 0; i < numeric_names.size(); ++i) {
    numeric.push_back({{"name", numeric_names[i]}, {"cap", caps[i] ? json(*caps[i]) : json(nullptr)}});
  }
  json categorical = json::array();
  for (std::size_t i = 0; i < categorical_names.size(); ++i) {
    const auto& v = vocabularies[i];
    categorical.push_back({{"name", categorical_names[i]},
                           {"categories", v.categories},
                           {"reference", v.categories.empty() ? json(nullptr) : json(v.categories[0])},
                           {"other_bucket", v.has_other}});
  }
  json columns = json::array();
  for (std::size_t k = 0; k < scaler.kept.size(); ++k) {
    columns.push_back({{"name", output_names[k]},
                       {"source_index", scaler.kept[k]},
                       {"mean", scaler.mean[k]},
                       {"stddev", scaler.stddev[k]}});
  }
  json dropped = json::array();
  for (auto c : scaler.dropped) dropped.push_back(encoded_names[c]);
  return {{"version", 1},
          {"numeric", numeric},
          {"categorical", categorical},
          {"encoded_columns", encoded_names},
          {"scaled_columns", columns},
          {"dropped_constant_columns", dropped}};
}

TransformSpec TransformSpec::from_json(const json& j) {
  TransformSpec s;
  try {
    for (const auto& n : j.at("numeric")) {
      s.numeric_names.push_back(n.at("name").get<std::string>());
      s.caps.push_back(n.at("cap").is_null() ? std::nullopt : std::optional<double>(n.at("cap").get<double>()));
    }
    for (const auto& c : j.at("categorical")) {
      s.categorical_names.push_back(c.at("name").get<std::string>());
      CategoryVocabulary v;
      v.categories = c.at("categories").get<std::vector<std::string>>();
      v.has_other = c.at("other_bucket").get<bool>();
      s.vocabularies.push_back(std::move(v));
    }
    s.encoded_names = j.at("encoded_columns").get<std::vector<std::string>>();
    s.scaler.input_width = s.encoded_names.size();
    std::vector<bool> kept(s.encoded_names.size(), false);
    for (const auto& c : j.at("scaled_columns")) {
      const auto idx = c.at("source_index").get<std::size_t>();
      if (idx >= kept.size()) throw FormatError("transform spec: source_index out of range");
      kept[idx] = true;
      s.scaler.kept.push_back(idx);
      s.scaler.mean.push_back(c.at("mean").get<double>());
      s.scaler.stddev.push_back(c.at("stddev").get<double>());
      s.output_names.push_back(c.at("name").get<std::string>());
    }
    for (std::size_t i = 0; i < kept.size(); ++i)
      if (!kept[i]) s.scaler.dropped.push_back(i);
  } catch (const json::exception& e) {
    throw FormatError(std::string("transform spec: ") + e.what());
  }
  return s;
}

// --- fit / apply -------------------------------------------------------------

TransformSpec fit_transform(const RawDataset& train, const PipelineOptions& options) {
  train.validate();
  if (train.rows() == 0) throw DimensionError("fit_transform: empty training partition");
  TransformSpec spec;
  spec.numeric_names = train.numeric_names;
  for (const auto& col : train.numeric) spec.caps.push_back(winsorize_fit(col, options.percentile));
  spec.categorical_names = train.categorical_names;
  for (const auto& col : train.categorical) {
    spec.vocabularies.push_back(onehot_fit(col, options.max_categories));
  }
  spec.encoded_names = spec.numeric_names;
  for (std::size_t i = 0; i < spec.vocabularies.size(); ++i) {
    for (auto& n : spec.vocabularies[i].output_names(spec.categorical_names[i])) {
      spec.encoded_names.push_back(std::move(n));
    }
  }
  spec.scaler = scale_fit(encode(spec, train));
  for (auto c : spec.scaler.kept) spec.output_names.push_back(spec.encoded_names[c]);
  return spec;
}

Tensor2 encode(const TransformSpec& spec, const RawDataset& data) {
  data.validate();
  if (data.numeric_names != spec.numeric_names || data.categorical_names != spec.categorical_names) {
    throw DimensionError("encode: dataset columns do not match the fitted transform");
  }
  const std::size_t n = data.rows();
  Tensor2 out(n, spec.encoded_names.size());
  for (std::size_t c = 0; c < data.numeric.size(); ++c) {
    const auto& col = data.numeric[c];
    const auto cap = spec.caps[c];
    for (std::size_t r = 0; r < n; ++r) out(r, c) = cap ? std::min(col[r], *cap) : col[r];
  }
  std::size_t offset = data.numeric.size();
  for (std::size_t c = 0; c < data.categorical.size(); ++c) {
    const auto& vocab = spec.vocabularies[c];
    const auto& col = data.categorical[c];
    for (std::size_t r = 0; r < n; ++r) {
      if (const auto hot = vocab.encode(col[r])) out(r, offset + *hot) = 1.0;
    }
    offset += vocab.output_width();
  }
  return out;
}

FeatureMatrix apply_transform(const TransformSpec& spec, const RawDataset& data) {
  FeatureMatrix m;
  m.x = scale_apply(spec.scaler, encode(spec, data));
  m.y = data.labels;
  if (!data.attack_categories.empty()) m.attack_tags = data.attack_categories;
  m.feature_names = spec.output_names;
  return m;
}

// --- split -------------------------------------------------------------------

SplitIndices stratified_split(std::span<const int> labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("stratified_split: ratio must lie in (0,1)");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ParameterError("stratified_split: label outside {0,1}");
    by_class[labels[i]].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < 2) {
      throw ParameterError("stratified_split: class " + std::to_string(c) + " has " +
                           std::to_string(by_class[c].size()) + " rows; need at least 2");
    }
  }
  // Largest remainder: floor each class quota, then hand the leftover units
  // to the largest fractional parts (lower class index on ties).
  const double total_quota = ratio * static_cast<double>(labels.size());
  const auto total_target = static_cast<std::size_t>(std::llround(total_quota));
  std::size_t target[2];
  double frac[2];
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double quota = ratio * static_cast<double>(by_class[c].size());
    target[c] = static_cast<std::size_t>(std::floor(quota));
    frac[c] = quota - static_cast<double>(target[c]);
    assigned += target[c];
  }
  std::size_t order[2] = {0, 1};
  if (frac[1] > frac[0]) std::swap(order[0], order[1]);
  for (std::size_t k = 0; assigned < total_target && k < 2; ++k, ++assigned) ++target[order[k]];

  Rng rng(seed);
  SplitIndices out;
  for (int c = 0; c < 2; ++c) {
    auto idx = by_class[c];
    shuffle(idx.begin(), idx.end(), rng);
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(target[c]));
    out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(target[c]), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace edgeguard::pipeline
