#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "edgeguard/feature_matrix.hpp"

namespace edgeguard::pipeline {

enum class ColumnRole { numeric, categorical, label, id, attack_category, ignore };

std::string to_string(ColumnRole role);
ColumnRole role_from_string(const std::string& name);

// Column name -> role. Columns absent from the schema are inferred: "label",
// "id" and "attack_cat" by name, everything else numeric when every value
// parses as a finite number, categorical otherwise.
struct Schema {
  std::vector<std::pair<std::string, ColumnRole>> roles;

  std::optional<ColumnRole> role_of(const std::string& column) const;
  static Schema from_json(const nlohmann::json& j);
  static Schema load(const std::filesystem::path& path);
};

// Typed columns of an ingested CSV. Numeric and categorical columns are stored
// column-major.
struct RawDataset {
  std::vector<std::string> numeric_names;
  std::vector<std::vector<double>> numeric;
  std::vector<std::string> categorical_names;
  std::vector<std::vector<std::string>> categorical;
  std::vector<int> labels;
  std::vector<std::string> ids;                // empty when the file has no id column
  std::vector<std::string> attack_categories;  // empty when absent; reporting only
  std::size_t rejected_missing = 0;            // rows dropped for empty fields

  std::size_t rows() const noexcept { return labels.size(); }
  RawDataset select(std::span<const std::size_t> indices) const;
  void validate() const;
};

// Comma-delimited, header row, RFC-4180 quoting. Rows with an empty field are
// skipped and counted. Errors name the 1-based data row.
RawDataset load_csv(const std::filesystem::path& path, const std::optional<Schema>& schema = {});
RawDataset parse_csv(std::string_view text, const std::optional<Schema>& schema = {},
                     const std::string& source = "<memory>");
// Row-wise concatenation; ids are prefixed with the source index when there
// is more than one source so they stay unique.
RawDataset concat(std::span<const RawDataset> parts);

// Drops rows whose features and label exactly repeat an earlier row (id and
// attack category are ignored). First occurrences keep their order.
RawDataset dedup(const RawDataset& data, std::size_t* removed = nullptr);

// Linear interpolation between order statistics at rank pct/100 · (n-1).
double percentile_linear(std::vector<double> values, double pct);
double median(std::vector<double> values);

// Cap at the pct-th percentile when max > 10·median and max > 10.
std::optional<double> winsorize_fit(std::span<const double> column, double pct = 95.0);
void winsorize_apply(std::span<double> column, std::optional<double> cap);

inline constexpr const char* kOtherCategory = "__OTHER__";

// Retained categories by descending training frequency (ties by name). The
// first entry is the dropped reference. When the column has more distinct
// values than max_categories, max_categories-1 are kept plus an OTHER bucket.
struct CategoryVocabulary {
  std::vector<std::string> categories;
  bool has_other = false;

  std::size_t output_width() const noexcept;
  std::vector<std::string> output_names(const std::string& column) const;
  // Output column hot for this value; nullopt for the reference category, and
  // for unseen values when there is no OTHER bucket.
  std::optional<std::size_t> encode(const std::string& value) const;

  bool operator==(const CategoryVocabulary&) const = default;
};

CategoryVocabulary onehot_fit(std::span<const std::string> column, std::size_t max_categories);

// Population mean/stddev per column; columns constant on the fitting data are dropped.
struct Standardizer {
  std::vector<std::size_t> kept;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<std::size_t> dropped;
  std::size_t input_width = 0;

  bool operator==(const Standardizer&) const = default;
};

Standardizer scale_fit(const Tensor2& x);
Tensor2 scale_apply(const Standardizer& s, const Tensor2& x);

struct PipelineOptions {
  double percentile = 95.0;
  std::size_t max_categories = 12;
  double split_ratio = 0.8;
  std::size_t smote_k = 5;
  bool smote = true;

  nlohmann::json to_json() const;
  static PipelineOptions from_json(const nlohmann::json& j, PipelineOptions base);
  static PipelineOptions from_json(const nlohmann::json& j) { return from_json(j, PipelineOptions{}); }
};

// Everything learned from the training partition.
struct TransformSpec {
  std::vector<std::string> numeric_names;
  std::vector<std::optional<double>> caps;
  std::vector<std::string> categorical_names;
  std::vector<CategoryVocabulary> vocabularies;
  std::vector<std::string> encoded_names;  // before constant-column removal
  Standardizer scaler;
  std::vector<std::string> output_names;

  nlohmann::json to_json() const;
  static TransformSpec from_json(const nlohmann::json& j);

  bool operator==(const TransformSpec&) const = default;
};

TransformSpec fit_transform(const RawDataset& train, const PipelineOptions& options);
// Winsorized numeric columns followed by one-hot blocks, unscaled.
Tensor2 encode(const TransformSpec& spec, const RawDataset& data);
FeatureMatrix apply_transform(const TransformSpec& spec, const RawDataset& data);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per-class split with largest-remainder rounding of class targets (ties to
// the lower class index). Index lists come back sorted.
SplitIndices stratified_split(std::span<const int> labels, double ratio, std::uint64_t seed);

struct SmoteReport {
  int minority_label = 1;
  std::size_t minority_before = 0;
  std::size_t majority = 0;
  std::size_t synthesized = 0;
  std::size_t k_used = 0;
};

// Oversamples the minority class up to the majority count. Originals come
// first; each synthetic row is x + u·(neighbor − x) with u ~ U[0,1) and the
// neighbor one of the k nearest minority rows (Euclidean).
FeatureMatrix smote(const FeatureMatrix& data, std::size_t k, std::uint64_t seed,
                    SmoteReport* report = nullptr);

struct PreprocessResult {
  FeatureMatrix train;
  FeatureMatrix test;
  TransformSpec spec;
  nlohmann::json audit;
};

// split -> dedup(train) -> fit on train -> transform both -> SMOTE(train).
PreprocessResult preprocess(const RawDataset& data, const PipelineOptions& options,
                            std::uint64_t seed);

// Two-Gaussian fixture: benign N(0, I), attack N(mu, I) with |mu| = separation.
struct SyntheticOptions {
  std::size_t rows = 10000;
  std::size_t dims = 20;
  double separation = 5.0;
  double positive_fraction = 0.45;
  std::size_t categorical_columns = 0;
  std::size_t heavy_tail_columns = 0;
  std::uint64_t seed = 1;
};

std::string synthetic_csv(const SyntheticOptions& options);
void write_synthetic_csv(const SyntheticOptions& options, const std::filesystem::path& path);

}  // namespace edgeguard::pipeline
