// Compares the OpenMP kernels against the serial reference: wall time per
// call, speedup, and the max absolute difference (expected to be exactly 0,
// the parallel partitioning keeps every accumulation order fixed).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include <omp.h>

#include "pbwn/kernels.hpp"
#include "pbwn/matrix.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::vector<double> random_buffer(pbwn::SeededRng& rng, std::size_t n) {
  std::vector<double> buf(n);
  for (double& v : buf) v = rng.next_uniform(-1.0, 1.0);
  return buf;
}

void bench_matmul_family(pbwn::SeededRng& rng, std::size_t m, std::size_t k,
                         std::size_t n) {
  const auto a = random_buffer(rng, m * k);
  const auto b = random_buffer(rng, k * n);
  const auto bt = random_buffer(rng, n * k);
  std::vector<double> c_par(m * n), c_ser(m * n);
  std::vector<double> ta_par(k * n), ta_ser(k * n);

  const int reps = m * k * n > (1u << 24) ? 3 : 10;

  struct Row {
    const char* name;
    double par_ms, ser_ms, diff;
  };
  std::vector<Row> rows;

  rows.push_back({"matmul",
                  time_ms([&] { pbwn::kernels::matmul(a.data(), b.data(), c_par.data(), m, k, n); }, reps),
                  time_ms([&] { pbwn::kernels::serial::matmul(a.data(), b.data(), c_ser.data(), m, k, n); }, reps),
                  0.0});
  rows.back().diff = max_abs_diff(c_par, c_ser);

  rows.push_back({"matmul_transpose_a",
                  time_ms([&] { pbwn::kernels::matmul_transpose_a(a.data(), b.data(), ta_par.data(), m, k, n); }, reps),
                  time_ms([&] { pbwn::kernels::serial::matmul_transpose_a(a.data(), b.data(), ta_ser.data(), m, k, n); }, reps),
                  0.0});
  rows.back().diff = max_abs_diff(ta_par, ta_ser);

  rows.push_back({"matmul_transpose_b",
                  time_ms([&] { pbwn::kernels::matmul_transpose_b(a.data(), bt.data(), c_par.data(), m, k, n); }, reps),
                  time_ms([&] { pbwn::kernels::serial::matmul_transpose_b(a.data(), bt.data(), c_ser.data(), m, k, n); }, reps),
                  0.0});
  rows.back().diff = max_abs_diff(c_par, c_ser);

  std::printf("  %zux%zux%zu\n", m, k, n);
  for (const auto& r : rows) {
    std::printf("    %-20s omp %8.3f ms   serial %8.3f ms   speedup %5.2fx   max|diff| %g\n",
                r.name, r.par_ms, r.ser_ms, r.ser_ms / r.par_ms, r.diff);
  }
}

void bench_row_ops(pbwn::SeededRng& rng, std::size_t rows, std::size_t cols) {
  const auto m = random_buffer(rng, rows * cols);
  const auto s = random_buffer(rng, rows);
  std::vector<double> out_par(rows * cols), out_ser(rows * cols);
  std::vector<double> n_par(rows), n_ser(rows);

  const double norms_par =
      time_ms([&] { pbwn::kernels::row_l2_norms(m.data(), n_par.data(), rows, cols); }, 20);
  const double norms_ser =
      time_ms([&] { pbwn::kernels::serial::row_l2_norms(m.data(), n_ser.data(), rows, cols); }, 20);
  const double scale_par =
      time_ms([&] { pbwn::kernels::scale_rows(m.data(), s.data(), out_par.data(), rows, cols); }, 20);
  const double scale_ser =
      time_ms([&] { pbwn::kernels::serial::scale_rows(m.data(), s.data(), out_ser.data(), rows, cols); }, 20);

  std::printf("  %zux%zu\n", rows, cols);
  std::printf("    %-20s omp %8.3f ms   serial %8.3f ms   speedup %5.2fx   max|diff| %g\n",
              "row_l2_norms", norms_par, norms_ser, norms_ser / norms_par,
              max_abs_diff(n_par, n_ser));
  std::printf("    %-20s omp %8.3f ms   serial %8.3f ms   speedup %5.2fx   max|diff| %g\n",
              "scale_rows", scale_par, scale_ser, scale_ser / scale_par,
              max_abs_diff(out_par, out_ser));
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  pbwn::SeededRng rng(42);

  std::printf("matmul family:\n");
  bench_matmul_family(rng, 128, 128, 128);
  bench_matmul_family(rng, 256, 784, 256);
  bench_matmul_family(rng, 512, 512, 512);

  std::printf("row kernels:\n");
  bench_row_ops(rng, 1024, 1024);
  bench_row_ops(rng, 4096, 784);
  return 0;
}
