#include <algorithm>
#include <numeric>

#include "edgeguard/error.hpp"
#include "edgeguard/pipeline.hpp"
#include "edgeguard/rng.hpp"

namespace edgeguard::pipeline {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// k nearest minority rows of minority[base] (positions into `minority`),
// distance ascending, ties by position.
std::vector<std::size_t> nearest(const Tensor2& x, const std::vector<std::size_t>& minority,
                                 std::size_t base, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(minority.size() - 1);
  const auto anchor = x.row(minority[base]);
  for (std::size_t j = 0; j < minority.size(); ++j) {
    if (j != base) d.emplace_back(squared_distance(anchor, x.row(minority[j])), j);
  }
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

}  // namespace

FeatureMatrix smote(const FeatureMatrix& data, std::size_t k, std::uint64_t seed, SmoteReport* report) {
  data.validate();
  if (k == 0) throw ParameterError("smote: k must be >= 1");
  const std::size_t pos = data.count_label(1);
  const std::size_t neg = data.rows() - pos;
  SmoteReport rep;
  rep.minority_label = pos <= neg ? 1 : 0;
  rep.minority_before = std::min(pos, neg);
  rep.majority = std::max(pos, neg);
  if (pos == neg) {
    if (report) *report = rep;
    return data;
  }
  if (rep.minority_before < 2) {
    throw ParameterError("smote: minority class has " + std::to_string(rep.minority_before) +
                         " sample(s); SMOTE needs at least 2 (lower k or disable SMOTE)");
  }
  rep.k_used = std::min(k, rep.minority_before - 1);
  rep.synthesized = rep.majority - rep.minority_before;

  std::vector<std::size_t> minority;
  for (std::size_t i = 0; i < data.rows(); ++i)
    if (data.y[i] == rep.minority_label) minority.push_back(i);

  // Draw every random number up front so neighbour search can run in any order.
  Rng rng(seed);
  std::vector<std::size_t> bases(rep.synthesized), slots(rep.synthesized);
  std::vector<double> gaps(rep.synthesized);
  for (std::size_t s = 0; s < rep.synthesized; ++s) {
    bases[s] = uniform_index(rng, minority.size());
    slots[s] = uniform_index(rng, rep.k_used);
    gaps[s] = uniform01(rng);
  }

  std::vector<char> needed(minority.size(), 0);
  for (auto b : bases) needed[b] = 1;
  std::vector<std::size_t> wanted;
  for (std::size_t b = 0; b < minority.size(); ++b)
    if (needed[b]) wanted.push_back(b);
  std::vector<std::vector<std::size_t>> neighbours(minority.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t w = 0; w < static_cast<std::ptrdiff_t>(wanted.size()); ++w) {
    const auto b = wanted[static_cast<std::size_t>(w)];
    neighbours[b] = nearest(data.x, minority, b, rep.k_used);
  }

  FeatureMatrix out;
  const std::size_t d = data.dims();
  std::vector<double> values(data.x.values().begin(), data.x.values().end());
  values.resize((data.rows() + rep.synthesized) * d);
  out.y = data.y;
  if (data.attack_tags) out.attack_tags = data.attack_tags;
  for (std::size_t s = 0; s < rep.synthesized; ++s) {
    const auto base = data.x.row(minority[bases[s]]);
    const auto nb = data.x.row(minority[neighbours[bases[s]][slots[s]]]);
    double* dst = values.data() + (data.rows() + s) * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] = base[j] + gaps[s] * (nb[j] - base[j]);
    out.y.push_back(rep.minority_label);
    if (out.attack_tags) out.attack_tags->push_back((*data.attack_tags)[minority[bases[s]]]);
  }
  out.x = Tensor2(data.rows() + rep.synthesized, d, std::move(values));
  out.feature_names = data.feature_names;
  if (report) *report = rep;
  return out;
}

}  // namespace edgeguard::pipeline
