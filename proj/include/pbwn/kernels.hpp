#pragma once

#include <cstddef>

// Raw data-parallel kernels behind the tensor operations. Two builds of the
// same contract live side by side:
//
//   pbwn::kernels          - OpenMP-parallel production path
//   pbwn::kernels::serial  - plain-loop reference kept for testing
//
// Every kernel partitions work so that each output element is accumulated by
// exactly one thread in a fixed index order. The parallel results are
// therefore bitwise identical to the serial ones for any thread count, which
// the unit tests assert and tools/bench_kernels compares for speed.

namespace pbwn::kernels {

/// c (m x n) = a (m x k) * b (k x n). c must not alias a or b.
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);

/// c (k x n) = a^T * b for a (m x k), b (m x n). c must not alias a or b.
void matmul_transpose_a(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);

/// c (m x n) = a * b^T for a (m x k), b (n x k). c must not alias a or b.
void matmul_transpose_b(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);

/// out[i] = sqrt(sum_j m[i][j]^2), one entry per row.
void row_l2_norms(const double* m, double* out, std::size_t rows, std::size_t cols);

/// out[i][j] = m[i][j] * s[i].
void scale_rows(const double* m, const double* s, double* out,
                std::size_t rows, std::size_t cols);

namespace serial {

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_transpose_a(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);
void matmul_transpose_b(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);
void row_l2_norms(const double* m, double* out, std::size_t rows, std::size_t cols);
void scale_rows(const double* m, const double* s, double* out,
                std::size_t rows, std::size_t cols);

}  // namespace serial
}  // namespace pbwn::kernels
