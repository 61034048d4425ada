#include "edgeguard/error.hpp"
#include "edgeguard/pipeline.hpp"
#include "edgeguard/rng.hpp"

namespace edgeguard::pipeline {

using nlohmann::json;

namespace {

json class_counts(std::span<const int> y) {
  std::size_t pos = 0;
  for (int v : y) pos += v == 1;
  return {{"benign", y.size() - pos}, {"attack", pos}};
}

}  // namespace

PreprocessResult preprocess(const RawDataset& data, const PipelineOptions& options, std::uint64_t seed) {
  data.validate();
  const auto split = stratified_split(data.labels, options.split_ratio, derive_seed(seed, "split"));
  std::size_t removed = 0;
  const RawDataset train_raw = dedup(data.select(split.train), &removed);
  const RawDataset test_raw = data.select(split.test);

  PreprocessResult out;
  out.spec = fit_transform(train_raw, options);
  out.train = apply_transform(out.spec, train_raw);
  out.test = apply_transform(out.spec, test_raw);
  if (out.train.dims() == 0) throw IngestionError("preprocess: every feature column is constant on the training split");

  SmoteReport smote_report;
  if (options.smote) {
    out.train = smote(out.train, options.smote_k, derive_seed(seed, "smote"), &smote_report);
  }

  std::vector<int> train_labels;
  for (auto i : split.train) train_labels.push_back(data.labels[i]);
  json capped = json::array();
  for (std::size_t i = 0; i < out.spec.numeric_names.size(); ++i) {
    if (out.spec.caps[i]) capped.push_back({{"name", out.spec.numeric_names[i]}, {"cap", *out.spec.caps[i]}});
  }
  json vocab = json::object();
  for (std::size_t i = 0; i < out.spec.categorical_names.size(); ++i) {
    const auto& v = out.spec.vocabularies[i];
    vocab[out.spec.categorical_names[i]] = {{"retained", v.categories.size()},
                                            {"other_bucket", v.has_other},
                                            {"output_columns", v.output_width()}};
  }
  json dropped = json::array();
  for (auto c : out.spec.scaler.dropped) dropped.push_back(out.spec.encoded_names[c]);

  out.audit = {
      {"rows_loaded", data.rows()},
      {"rows_rejected_missing", data.rejected_missing},
      {"split",
       {{"ratio", options.split_ratio},
        {"train", class_counts(train_labels)},
        {"test", class_counts(test_raw.labels)}}},
      {"dedup_removed", removed},
      {"rows_after_dedup", train_raw.rows()},
      {"capped_features", capped},
      {"vocabularies", vocab},
      {"dropped_constant_columns", dropped},
      {"smote",
       {{"enabled", options.smote},
        {"minority_label", smote_report.minority_label},
        {"minority_before", smote_report.minority_before},
        {"majority", smote_report.majority},
        {"synthesized", smote_report.synthesized},
        {"k_used", smote_report.k_used}}},
      {"output_dims", out.train.dims()},
      {"train_rows", out.train.rows()},
      {"test_rows", out.test.rows()},
  };
  return out;
}

}  // namespace edgeguard::pipeline
