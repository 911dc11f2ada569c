#include "pbwn/kernels.hpp"

#include <cmath>

namespace pbwn::kernels::serial {

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = a[i * k + kk];
      const double* bk = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

void matmul_transpose_a(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < k; ++i) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      const double ari = a[r * k + i];
      const double* br = b + r * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += ari * br[j];
    }
  }
}

void matmul_transpose_b(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t r = 0; r < k; ++r) acc += ai[r] * bj[r];
      ci[j] = acc;
    }
  }
}

void row_l2_norms(const double* m, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* mi = m + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += mi[j] * mi[j];
    out[i] = std::sqrt(acc);
  }
}

void scale_rows(const double* m, const double* s, double* out,
                std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double si = s[i];
    const double* mi = m + i * cols;
    double* oi = out + i * cols;
    for (std::size_t j = 0; j < cols; ++j) oi[j] = mi[j] * si;
  }
}

}  // namespace pbwn::kernels::serial
