#include "edgeguard/feature_matrix.hpp"

#include <algorithm>

#include "edgeguard/binary_io.hpp"
#include "edgeguard/error.hpp"

namespace edgeguard {
namespace {

constexpr char kMagic[4] = {'E', 'G', 'F', 'M'};

}  // namespace

std::size_t FeatureMatrix::count_label(int label) const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
}

void FeatureMatrix::validate() const {
  if (y.size() != x.rows()) {
    throw DimensionError("FeatureMatrix: " + std::to_string(y.size()) + " labels for " +
                         std::to_string(x.rows()) + " rows");
  }
  if (!feature_names.empty() && feature_names.size() != x.cols()) {
    throw DimensionError("FeatureMatrix: " + std::to_string(feature_names.size()) +
                         " feature names for " + std::to_string(x.cols()) + " columns");
  }
  if (attack_tags && attack_tags->size() != x.rows()) {
    throw DimensionError("FeatureMatrix: attack tag count differs from row count");
  }
  for (int label : y) {
    if (label != 0 && label != 1) throw DimensionError("FeatureMatrix: label outside {0,1}");
  }
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.x = x.gather_rows(indices);
  out.y.reserve(indices.size());
  for (auto i : indices) out.y.push_back(y[i]);
  if (attack_tags) {
    std::vector<std::string> tags;
    tags.reserve(indices.size());
    for (auto i : indices) tags.push_back((*attack_tags)[i]);
    out.attack_tags = std::move(tags);
  }
  out.feature_names = feature_names;
  return out;
}

void save_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path) {
  m.validate();
  binary::Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kFeatureMatrixVersion);
  w.u64(m.rows());
  w.u64(m.dims());
  w.f64s(m.x.values());
  for (int label : m.y) w.u8(static_cast<std::uint8_t>(label));
  w.u32(static_cast<std::uint32_t>(m.feature_names.size()));
  for (const auto& name : m.feature_names) w.str(name);
  w.u8(m.attack_tags ? 1 : 0);
  if (m.attack_tags) {
    for (const auto& tag : *m.attack_tags) w.str(tag);
  }
  binary::write_file(path.string(), w.buffer());
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
  const auto data = binary::read_file(path.string());
  binary::Reader r(data, "feature matrix '" + path.string() + "'");
  char magic[4];
  r.bytes(magic, sizeof magic);
  if (!std::equal(magic, magic + 4, kMagic)) {
    throw FormatError("'" + path.string() + "' is not a feature matrix (bad magic)");
  }
  const auto version = r.u32();
  if (version != kFeatureMatrixVersion) {
    throw FormatError("feature matrix version " + std::to_string(version) + " unsupported (want " +
                      std::to_string(kFeatureMatrixVersion) + ")");
  }
  const auto rows = r.u64();
  const auto cols = r.u64();
  if (cols != 0 && rows > r.remaining() / (cols * sizeof(double))) {
    throw FormatError("feature matrix '" + path.string() + "': truncated payload");
  }
  FeatureMatrix m;
  m.x = Tensor2(rows, cols);
  r.f64s(m.x.values());
  m.y.resize(rows);
  for (auto& label : m.y) label = r.u8();
  const auto names = r.u32();
  m.feature_names.reserve(names);
  for (std::uint32_t i = 0; i < names; ++i) m.feature_names.push_back(r.str());
  if (r.u8() != 0) {
    std::vector<std::string> tags(rows);
    for (auto& tag : tags) tag = r.str();
    m.attack_tags = std::move(tags);
  }
  if (r.remaining() != 0) throw FormatError("feature matrix '" + path.string() + "': trailing bytes");
  m.validate();
  return m;
}

}  // namespace edgeguard
