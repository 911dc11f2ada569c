#pragma once

#include <vector>

#include "pbwn/matrix.hpp"

// Dense linear algebra on Matrix values. All operations are pure: inputs are
// never mutated and results are freshly allocated. Shape preconditions are
// checked and violations raise DimensionError naming both shapes.

namespace pbwn::tensor {

/// Standard matrix product, shape (a.rows, b.cols). Requires a.cols == b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

/// a^T * b without materializing the transpose. Requires a.rows == b.rows.
Matrix matmul_transpose_a(const Matrix& a, const Matrix& b);

/// a * b^T without materializing the transpose. Requires a.cols == b.cols.
Matrix matmul_transpose_b(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scalar_scale(const Matrix& m, double s);

/// Entry i is the L2 norm of row i; entries are >= 0.
std::vector<double> row_l2_norms(const Matrix& m);

/// Row i multiplied elementwise by s[i]. Requires s.size() == m.rows.
Matrix scale_rows(const Matrix& m, const std::vector<double>& s);

/// Per-column mean over rows.
std::vector<double> column_mean(const Matrix& m);

/// Per-column biased (population) variance: divide by the row count, not
/// rows - 1. This matches the per-mini-batch statistic used by batch
/// normalization, and the finite-difference tests rely on the same
/// convention.
std::vector<double> column_variance(const Matrix& m);
std::vector<double> column_variance(const Matrix& m, const std::vector<double>& mean);

/// Entries i.i.d. uniform on [-1/sqrt(cols), +1/sqrt(cols)], drawn row-major
/// from rng, so a given seed reproduces the matrix bit for bit.
Matrix init_uniform_fanin(SeededRng& rng, std::size_t rows, std::size_t cols);

/// True iff no entry is NaN or infinite.
bool all_finite(const Matrix& m);

}  // namespace pbwn::tensor
