#include "edgeguard/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "edgeguard/error.hpp"

namespace edgeguard {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Tensor2: " + std::to_string(data_.size()) + " values for shape " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(n * m);
  for (const auto& r : rows) {
    if (r.size() != m) throw DimensionError("Tensor2::from_rows: ragged rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor2(n, m, std::move(values));
}

Tensor2 Tensor2::row_vector(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Tensor2 Tensor2::column_vector(std::span<const double> values) {
  return Tensor2(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void Tensor2::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor2::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor2::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Tensor2 Tensor2::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw DimensionError("Tensor2::slice_rows out of range");
  Tensor2 out(end - begin, cols_);
  if (!out.empty()) std::memcpy(out.data(), data() + begin * cols_, out.size() * sizeof(double));
  return out;
}

Tensor2 Tensor2::gather_rows(std::span<const std::size_t> indices) const {
  Tensor2 out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw DimensionError("Tensor2::gather_rows index out of range");
    std::copy_n(data() + indices[i] * cols_, cols_, out.data() + i * cols_);
  }
  return out;
}

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

Tensor2 concat_columns(std::span<const Tensor2* const> parts) {
  if (parts.empty()) return {};
  const std::size_t n = parts.front()->rows();
  std::size_t width = 0;
  for (const auto* p : parts) {
    if (p->rows() != n) throw DimensionError("concat_columns: row counts differ");
    width += p->cols();
  }
  Tensor2 out(n, width);
  for (std::size_t r = 0; r < n; ++r) {
    double* dst = out.data() + r * width;
    for (const auto* p : parts) {
      dst = std::copy_n(p->data() + r * p->cols(), p->cols(), dst);
    }
  }
  return out;
}

}  // namespace edgeguard
