#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edgeguard/tensor.hpp"

namespace edgeguard {

// Model-ready rows: standardized features with aligned binary labels.
struct FeatureMatrix {
  Tensor2 x;
  std::vector<int> y;
  std::optional<std::vector<std::string>> attack_tags;
  std::vector<std::string> feature_names;

  std::size_t rows() const noexcept { return x.rows(); }
  std::size_t dims() const noexcept { return x.cols(); }
  std::size_t count_label(int label) const;

  // Throws DimensionError if labels, tags or names disagree with x.
  void validate() const;
  FeatureMatrix subset(std::span<const std::size_t> indices) const;

  bool operator==(const FeatureMatrix&) const = default;
};

// Versioned little-endian container: "EGFM", u32 version, u64 rows, u64 cols,
// row-major f64 values, u8 labels, then feature names and optional tags as
// length-prefixed strings.
inline constexpr std::uint32_t kFeatureMatrixVersion = 1;

void save_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix load_feature_matrix(const std::filesystem::path& path);

}  // namespace edgeguard
