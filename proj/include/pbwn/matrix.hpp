#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "pbwn/errors.hpp"

namespace pbwn {

/// Dense row-major matrix of doubles. The single numeric carrier for the
/// whole library: weights, activations, gradients, velocity buffers.
///
/// Value semantics throughout; operations on matrices never mutate their
/// inputs unless the name says "inplace".
class Matrix {
 public:
  /// Empty (0 x 0) placeholder, e.g. an unallocated velocity buffer.
  Matrix() = default;

  /// Zero-filled rows x cols matrix. Zero dimensions are rejected.
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    check_dims(rows, cols);
    data_.assign(rows * cols, 0.0);
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_dims(rows, cols);
    if (data_.size() != rows * cols) {
      throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                           " does not equal " + std::to_string(rows) + "x" +
                           std::to_string(cols));
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  /// Build from nested brace lists; all rows must have equal length.
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  const double* row(std::size_t i) const { return data_.data() + i * cols_; }
  double* row(std::size_t i) { return data_.data() + i * cols_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  bool operator==(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  static void check_dims(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
      throw DimensionError("Matrix: dimensions must be positive, got " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Deterministic seeded generator. The raw stream is std::mt19937_64, whose
/// output sequence is pinned bit-for-bit by the standard; uniform doubles are
/// derived with the explicit 53-bit mapping (x >> 11) * 2^-53 instead of
/// std::uniform_real_distribution, whose results vary across standard
/// libraries. Identical seed therefore gives an identical stream everywhere.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random mantissa bits.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
  }

  /// Uniform integer in [0, n). Plain modulo; the bias is O(n / 2^64) and
  /// irrelevant at dataset sizes, while the result is identical everywhere.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pbwn
