#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "edgeguard/error.hpp"
#include "edgeguard/pipeline.hpp"
#include "edgeguard/rng.hpp"

namespace edgeguard::pipeline {
namespace {

double gaussian(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void append_number(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.9g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace

std::string synthetic_csv(const SyntheticOptions& o) {
  if (o.rows < 4 || o.dims == 0) throw ParameterError("synthetic: need rows >= 4 and dims >= 1");
  if (!(o.positive_fraction > 0.0 && o.positive_fraction < 1.0)) {
    throw ParameterError("synthetic: positive_fraction must lie in (0,1)");
  }
  if (!(o.separation >= 0.0)) throw ParameterError("synthetic: separation must be >= 0");
  static const char* kProtocols[] = {"tcp", "udp", "icmp", "arp", "ospf", "sctp"};

  Rng rng(derive_seed(o.seed, "synthetic"));
  const double shift = o.separation / std::sqrt(static_cast<double>(o.dims));
  const auto positives = static_cast<std::size_t>(std::llround(o.positive_fraction * static_cast<double>(o.rows)));

  std::vector<int> labels(o.rows, 0);
  for (std::size_t i = 0; i < positives; ++i) labels[i] = 1;
  shuffle(labels.begin(), labels.end(), rng);

  std::string out;
  out.reserve(o.rows * (o.dims + o.heavy_tail_columns) * 12);
  out += "id";
  for (std::size_t j = 0; j < o.dims; ++j) out += ",f" + std::to_string(j);
  for (std::size_t j = 0; j < o.heavy_tail_columns; ++j) out += ",heavy" + std::to_string(j);
  for (std::size_t j = 0; j < o.categorical_columns; ++j) out += ",cat" + std::to_string(j);
  out += ",attack_cat,label\n";

  for (std::size_t r = 0; r < o.rows; ++r) {
    const int y = labels[r];
    out += std::to_string(r + 1);
    for (std::size_t j = 0; j < o.dims; ++j) {
      out += ',';
      append_number(out, gaussian(rng) + (y ? shift : 0.0));
    }
    // Lognormal columns: mostly small values with a long right tail.
    for (std::size_t j = 0; j < o.heavy_tail_columns; ++j) {
      out += ',';
      append_number(out, std::exp(1.5 * gaussian(rng) + (y ? 0.5 : 0.0)));
    }
    // Categorical columns with a skewed, label-independent distribution.
    for (std::size_t j = 0; j < o.categorical_columns; ++j) {
      const double u = uniform01(rng);
      const auto k = static_cast<std::size_t>(std::floor(-std::log(1.0 - u) * 1.5)) % std::size(kProtocols);
      out += ',';
      out += kProtocols[k];
    }
    out += y ? ",Synthetic," : ",Normal,";
    out += std::to_string(y);
    out += '\n';
  }
  return out;
}

void write_synthetic_csv(const SyntheticOptions& options, const std::filesystem::path& path) {
  const auto text = synthetic_csv(options);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IngestionError("cannot write '" + path.string() + "'");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IngestionError("write failed for '" + path.string() + "'");
}

}  // namespace edgeguard::pipeline
