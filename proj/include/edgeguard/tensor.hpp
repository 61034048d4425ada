#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace edgeguard {

// Dense row-major matrix of doubles. Batches are rows; sequence batches stack
// the steps of each sample contiguously (sample n, step t is row n*T + t).
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2 row_vector(std::span<const double> values);
  static Tensor2 column_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  void fill(double value);
  bool all_finite() const noexcept;
  std::string shape_string() const;

  // Rows [begin, end) as a new tensor.
  Tensor2 slice_rows(std::size_t begin, std::size_t end) const;
  Tensor2 gather_rows(std::span<const std::size_t> indices) const;

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws DimensionError with `what` as context if the shapes differ.
void require_same_shape(const Tensor2& a, const Tensor2& b, const char* what);

// Horizontal concatenation of tensors with equal row counts.
Tensor2 concat_columns(std::span<const Tensor2* const> parts);

}  // namespace edgeguard
