#include "pbwn/tensor.hpp"

#include <cmath>

#include "pbwn/kernels.hpp"

namespace pbwn {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r > 0 ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw DimensionError("from_rows: ragged rows (" + std::to_string(row.size()) +
                           " vs " + std::to_string(c) + " columns)");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

namespace tensor {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shapes " + a.shape_str() + " and " +
                         b.shape_str() + " differ");
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions of " + a.shape_str() + " and " +
                         b.shape_str() + " do not match");
  }
  Matrix c(a.rows(), b.cols());
  kernels::matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_transpose_a: row counts of " + a.shape_str() +
                         " and " + b.shape_str() + " do not match");
  }
  Matrix c(a.cols(), b.cols());
  kernels::matmul_transpose_a(a.data(), b.data(), c.data(), a.rows(), a.cols(),
                              b.cols());
  return c;
}

Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_transpose_b: column counts of " + a.shape_str() +
                         " and " + b.shape_str() + " do not match");
  }
  Matrix c(a.rows(), b.rows());
  kernels::matmul_transpose_b(a.data(), b.data(), c.data(), a.rows(), a.cols(),
                              b.rows());
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] + b.data()[i];
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] - b.data()[i];
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] * b.data()[i];
  return c;
}

Matrix scalar_scale(const Matrix& m, double s) {
  Matrix c(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) c.data()[i] = m.data()[i] * s;
  return c;
}

std::vector<double> row_l2_norms(const Matrix& m) {
  std::vector<double> norms(m.rows());
  kernels::row_l2_norms(m.data(), norms.data(), m.rows(), m.cols());
  return norms;
}

Matrix scale_rows(const Matrix& m, const std::vector<double>& s) {
  if (s.size() != m.rows()) {
    throw DimensionError("scale_rows: scale length " + std::to_string(s.size()) +
                         " does not match row count of " + m.shape_str());
  }
  Matrix out(m.rows(), m.cols());
  kernels::scale_rows(m.data(), s.data(), out.data(), m.rows(), m.cols());
  return out;
}

std::vector<double> column_mean(const Matrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) mean[j] += m(i, j);
  const double inv = 1.0 / static_cast<double>(m.rows());
  for (double& v : mean) v *= inv;
  return mean;
}

std::vector<double> column_variance(const Matrix& m) {
  return column_variance(m, column_mean(m));
}

std::vector<double> column_variance(const Matrix& m, const std::vector<double>& mean) {
  if (mean.size() != m.cols()) {
    throw DimensionError("column_variance: mean length " + std::to_string(mean.size()) +
                         " does not match column count of " + m.shape_str());
  }
  std::vector<double> var(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double d = m(i, j) - mean[j];
      var[j] += d * d;
    }
  }
  const double inv = 1.0 / static_cast<double>(m.rows());
  for (double& v : var) v *= inv;
  return var;
}

Matrix init_uniform_fanin(SeededRng& rng, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw DimensionError("init_uniform_fanin: dimensions must be positive, got " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.next_uniform(-bound, bound);
  }
  return m;
}

bool all_finite(const Matrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i])) return false;
  }
  return true;
}

}  // namespace tensor
}  // namespace pbwn
