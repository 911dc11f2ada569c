#include "pbwn/kernels.hpp"

#include <cmath>
#include <cstdint>

namespace pbwn::kernels {

namespace {
// Below this many output elements the parallel-for is skipped; tiny inputs
// are common in unit tests and the fork/join overhead dwarfs the work.
constexpr std::int64_t kParallelCutoff = 16 * 1024;
}  // namespace

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
  const auto mi = static_cast<std::int64_t>(m);
  const auto ki = static_cast<std::int64_t>(k);
  const auto ni = static_cast<std::int64_t>(n);
  // i-k-j order: b and c are walked sequentially, and each c[i][j] still
  // accumulates in ascending k, so the sum order matches the serial kernel.
#pragma omp parallel for schedule(static) if (mi * ni >= kParallelCutoff)
  for (std::int64_t i = 0; i < mi; ++i) {
    double* ci = c + i * ni;
    for (std::int64_t j = 0; j < ni; ++j) ci[j] = 0.0;
    for (std::int64_t kk = 0; kk < ki; ++kk) {
      const double aik = a[i * ki + kk];
      const double* bk = b + kk * ni;
      for (std::int64_t j = 0; j < ni; ++j) ci[j] += aik * bk[j];
    }
  }
}

void matmul_transpose_a(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n) {
  const auto mi = static_cast<std::int64_t>(m);
  const auto ki = static_cast<std::int64_t>(k);
  const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (ki * ni >= kParallelCutoff)
  for (std::int64_t i = 0; i < ki; ++i) {
    double* ci = c + i * ni;
    for (std::int64_t j = 0; j < ni; ++j) ci[j] = 0.0;
    for (std::int64_t r = 0; r < mi; ++r) {
      const double ari = a[r * ki + i];
      const double* br = b + r * ni;
      for (std::int64_t j = 0; j < ni; ++j) ci[j] += ari * br[j];
    }
  }
}

void matmul_transpose_b(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n) {
  const auto mi = static_cast<std::int64_t>(m);
  const auto ki = static_cast<std::int64_t>(k);
  const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (mi * ni >= kParallelCutoff)
  for (std::int64_t i = 0; i < mi; ++i) {
    const double* ai = a + i * ki;
    double* ci = c + i * ni;
    for (std::int64_t j = 0; j < ni; ++j) {
      const double* bj = b + j * ki;
      double acc = 0.0;
      for (std::int64_t r = 0; r < ki; ++r) acc += ai[r] * bj[r];
      ci[j] = acc;
    }
  }
}

void row_l2_norms(const double* m, double* out, std::size_t rows, std::size_t cols) {
  const auto ri = static_cast<std::int64_t>(rows);
  const auto ci = static_cast<std::int64_t>(cols);
#pragma omp parallel for schedule(static) if (ri * ci >= kParallelCutoff)
  for (std::int64_t i = 0; i < ri; ++i) {
    const double* mi = m + i * ci;
    double acc = 0.0;
    for (std::int64_t j = 0; j < ci; ++j) acc += mi[j] * mi[j];
    out[i] = std::sqrt(acc);
  }
}

void scale_rows(const double* m, const double* s, double* out,
                std::size_t rows, std::size_t cols) {
  const auto ri = static_cast<std::int64_t>(rows);
  const auto ci = static_cast<std::int64_t>(cols);
#pragma omp parallel for schedule(static) if (ri * ci >= kParallelCutoff)
  for (std::int64_t i = 0; i < ri; ++i) {
    const double si = s[i];
    const double* mi = m + i * ci;
    double* oi = out + i * ci;
    for (std::int64_t j = 0; j < ci; ++j) oi[j] = mi[j] * si;
  }
}

}  // namespace pbwn::kernels
