#include <algorithm>

#include "edgeguard/binary_io.hpp"
#include "edgeguard/error.hpp"
#include "edgeguard/model.hpp"

namespace edgeguard::model {
namespace {

constexpr char kMagic[4] = {'E', 'G', 'R', 'D'};

}  // namespace

std::vector<unsigned char> serialize(const ModelParams& params) {
  nlohmann::json header{
      {"architecture", params.descriptor.to_json()},
      {"training", {{"seed", params.metadata.seed}, {"epochs_run", params.metadata.epochs_run}}},
      {"decoder_included", params.has_decoder()},
      {"parameter_count", params.parameter_count()},
  };
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.layers) {
    layers.push_back({{"name", l.name}, {"kind", nn::to_string(l.params.kind)}});
  }
  header["layers"] = std::move(layers);
  const std::string blob = header.dump();

  binary::Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kModelFormatVersion);
  w.u64(blob.size());
  w.bytes(blob.data(), blob.size());
  const auto names = params.buffer_names();
  const auto buffers = params.buffers();
  w.u32(static_cast<std::uint32_t>(buffers.size()));
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    w.str(names[i]);
    w.u64(buffers[i]->rows());
    w.u64(buffers[i]->cols());
    w.f64s(buffers[i]->values());
  }
  const auto checksum = binary::fnv1a(w.buffer());
  w.u64(checksum);
  return w.buffer();
}

ModelParams deserialize(std::span<const unsigned char> bytes, const std::string& context) {
  if (bytes.size() < sizeof kMagic + 4 + 8) throw FormatError(context + ": truncated header");
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw FormatError(context + ": bad magic bytes (not an EGRD model file)");
  }
  binary::Reader r(bytes, context);
  char magic[4];
  r.bytes(magic, 4);
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw FormatError(context + ": model format version " + std::to_string(version) +
                      " unsupported (want " + std::to_string(kModelFormatVersion) + ")");
  }
  const auto body = bytes.first(bytes.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof stored);
  if (binary::fnv1a(body) != stored) {
    throw FormatError(context + ": checksum mismatch (file truncated or corrupted)");
  }

  const auto blob_len = r.u64();
  if (blob_len > r.remaining()) throw FormatError(context + ": truncated descriptor");
  std::string blob(blob_len, '\0');
  r.bytes(blob.data(), blob_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(context + ": descriptor is not valid JSON: " + e.what());
  }

  ModelParams m;
  try {
    m.descriptor = ArchitectureDescriptor::from_json(header.at("architecture"));
    m.metadata.seed = header.at("training").at("seed").get<std::uint64_t>();
    m.metadata.epochs_run = header.at("training").at("epochs_run").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(context + ": malformed descriptor: " + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(context + ": " + e.what());
  }

  m.layers = layer_layout(m.descriptor);
  if (!header.value("decoder_included", true)) m = m.without_decoder();
  const auto names = m.buffer_names();
  auto buffers = m.buffers();
  const auto count = r.u32();
  if (count != buffers.size()) {
    throw FormatError(context + ": " + std::to_string(count) + " parameter buffers, descriptor implies " +
                      std::to_string(buffers.size()));
  }
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    const auto name = r.str();
    const auto rows = r.u64();
    const auto cols = r.u64();
    if (name != names[i] || rows != buffers[i]->rows() || cols != buffers[i]->cols()) {
      throw FormatError(context + ": buffer " + std::to_string(i) + " is '" + name + "' " +
                        std::to_string(rows) + "x" + std::to_string(cols) + ", expected '" +
                        names[i] + "' " + buffers[i]->shape_string());
    }
    r.f64s(buffers[i]->values());
  }
  if (r.remaining() != 8) throw FormatError(context + ": unexpected trailing bytes");
  return m;
}

void save(const ModelParams& params, const std::filesystem::path& path) {
  binary::write_file(path.string(), serialize(params));
}

ModelParams load(const std::filesystem::path& path) {
  return deserialize(binary::read_file(path.string()), "model '" + path.string() + "'");
}

}  // namespace edgeguard::model
