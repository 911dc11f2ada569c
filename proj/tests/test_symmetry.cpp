#include <doctest.h>

#include <cmath>

#include "pbwn/symmetry.hpp"

using namespace pbwn;
using symmetry::LayerCostSpec;
using symmetry::TwoLayerScalarModel;

namespace {

// Closed-form oracle for the 2x2 Hessian of the mean squared-error loss
// 0.5*(w1*w2*x - t)^2: with u = w1*w2,
//   H11 = mean(w2^2 x^2), H22 = mean(w1^2 x^2),
//   H12 = mean((2 w1 w2 x - t) x).
Matrix analytic_hessian(const TwoLayerScalarModel& m) {
  Matrix h(2, 2);
  for (const auto& [x, t] : m.data) {
    h(0, 0) += m.w2 * m.w2 * x * x;
    h(1, 1) += m.w1 * m.w1 * x * x;
    h(0, 1) += (2.0 * m.w1 * m.w2 * x - t) * x;
  }
  const double inv = 1.0 / static_cast<double>(m.data.size());
  h(0, 0) *= inv;
  h(1, 1) *= inv;
  h(0, 1) *= inv;
  h(1, 0) = h(0, 1);
  return h;
}

double analytic_condition_number(const TwoLayerScalarModel& m) {
  const Matrix h = analytic_hessian(m);
  const double mean = 0.5 * (h(0, 0) + h(1, 1));
  const double disc =
      std::sqrt(0.25 * (h(0, 0) - h(1, 1)) * (h(0, 0) - h(1, 1)) + h(0, 1) * h(0, 1));
  const double hi = std::max(std::abs(mean + disc), std::abs(mean - disc));
  const double lo = std::min(std::abs(mean + disc), std::abs(mean - disc));
  return hi / lo;
}

// Test-local central differences for the loss gradient.
std::pair<double, double> fd_gradient(const TwoLayerScalarModel& m, double h) {
  auto loss_at = [&m](double w1, double w2) {
    TwoLayerScalarModel probe = m;
    probe.w1 = w1;
    probe.w2 = w2;
    return probe.loss();
  };
  return {(loss_at(m.w1 + h, m.w2) - loss_at(m.w1 - h, m.w2)) / (2.0 * h),
          (loss_at(m.w1, m.w2 + h) - loss_at(m.w1, m.w2 - h)) / (2.0 * h)};
}

}  // namespace

TEST_CASE("scaled_model: alpha 1 changes nothing") {
  const auto base = symmetry::default_base_model();
  const auto scaled = symmetry::scaled_model(base, 1.0);
  CHECK(scaled.w1 == base.w1);
  CHECK(scaled.w2 == base.w2);
}

TEST_CASE("scaled_model: predictions are invariant for every alpha") {
  TwoLayerScalarModel m{1.3, -0.7, {{1.0, 2.0}, {-2.0, 0.5}, {0.3, -1.0}}};
  for (double alpha : {0.1, 0.5, 2.0, 10.0, 250.0}) {
    const auto scaled = symmetry::scaled_model(m, alpha);
    for (const auto& [x, t] : m.data) {
      CHECK(std::abs(scaled.predict(x) - m.predict(x)) <=
            1e-12 * std::max(1.0, std::abs(m.predict(x))));
    }
  }
}

TEST_CASE("scaled_model: alpha 2 at the unit point gives (2, 0.5)") {
  const auto scaled = symmetry::scaled_model(symmetry::default_base_model(), 2.0);
  CHECK(scaled.w1 == 2.0);
  CHECK(scaled.w2 == 0.5);
}

TEST_CASE("scaled_model: non-positive alpha is a domain error") {
  const auto base = symmetry::default_base_model();
  CHECK_THROWS_AS(symmetry::scaled_model(base, 0.0), ConfigError);
  CHECK_THROWS_AS(symmetry::scaled_model(base, -1.0), ConfigError);
}

TEST_CASE("gradient_scaling_check: alpha 1 gives unit ratios") {
  const auto ratios = symmetry::gradient_scaling_check(symmetry::default_base_model(), 1.0);
  CHECK(ratios.first == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ratios.second == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("gradient_scaling_check: alpha 10 at the default point gives (0.1, 10)") {
  const auto ratios =
      symmetry::gradient_scaling_check(symmetry::default_base_model(), 10.0);
  CHECK(std::abs(ratios.first - 0.1) <= 1e-10 * 0.1);
  CHECK(std::abs(ratios.second - 10.0) <= 1e-10 * 10.0);
}

TEST_CASE("gradient_scaling_check: ratios are (1/alpha, alpha) at generic points") {
  TwoLayerScalarModel m{0.8, 1.7, {{1.0, 2.5}, {2.0, -0.4}}};
  for (double alpha : {0.25, 3.0, 40.0}) {
    const auto ratios = symmetry::gradient_scaling_check(m, alpha);
    CHECK(std::abs(ratios.first - 1.0 / alpha) <= 1e-10 / alpha);
    CHECK(std::abs(ratios.second - alpha) <= 1e-10 * alpha);
  }
}

TEST_CASE("analytic model gradient matches central finite differences") {
  TwoLayerScalarModel m{1.2, -0.6, {{1.0, 2.0}, {0.5, -1.5}, {-2.0, 1.0}}};
  const auto [g1, g2] = m.gradient();
  const auto [f1, f2] = fd_gradient(m, 1e-6);
  CHECK(std::abs(g1 - f1) <= 1e-8);
  CHECK(std::abs(g2 - f2) <= 1e-8);
}

TEST_CASE("gradient_scaling_check: vanishing gradient is an error") {
  // w1*w2*x == t makes the residual zero, so both gradients vanish.
  TwoLayerScalarModel m{1.0, 1.0, {{1.0, 1.0}}};
  CHECK_THROWS_AS(symmetry::gradient_scaling_check(m, 2.0), NumericError);
}

TEST_CASE("hessian_condition_number: matches the closed-form oracle at a "
          "generic point") {
  TwoLayerScalarModel m{1.3, 0.7, {{1.0, 2.0}, {2.0, -1.0}}};
  const double got = symmetry::hessian_condition_number(m);
  const double want = analytic_condition_number(m);
  CHECK(std::abs(got - want) <= 1e-5 * want);
}

TEST_CASE("hessian_fd: entries match the closed form at the default point") {
  const auto base = symmetry::default_base_model();
  const Matrix fd = symmetry::hessian_fd(base);
  const Matrix want = analytic_hessian(base);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(std::abs(fd(i, j) - want(i, j)) <= 1e-6);
}

TEST_CASE("condition number grows strictly along the alpha sweep") {
  const auto base = symmetry::default_base_model();
  double previous = 0.0;
  for (double alpha : {1.0, 2.0, 5.0, 10.0}) {
    const double kappa = symmetry::hessian_condition_number(
        symmetry::scaled_model(base, alpha));
    CHECK(kappa > previous);
    previous = kappa;
  }
}

TEST_CASE("condition number at alpha 10 is at least 10x the alpha 1 value") {
  const auto base = symmetry::default_base_model();
  const double k1 = symmetry::hessian_condition_number(symmetry::scaled_model(base, 1.0));
  const double k10 =
      symmetry::hessian_condition_number(symmetry::scaled_model(base, 10.0));
  CHECK(k10 / k1 >= 10.0);
}

TEST_CASE("hessian_condition_number: singular Hessian is an error") {
  // With a single data point and w2 = 0, the (w1, w1) entry is zero and the
  // determinant vanishes.
  TwoLayerScalarModel m{1.0, 0.0, {{1.0, 0.0}}};
  CHECK_THROWS_AS(symmetry::hessian_condition_number(m), NumericError);
}

TEST_CASE("flops_linear: spot values from the cost formulas") {
  LayerCostSpec spec;
  spec.kind = LayerCostSpec::Kind::kLinear;
  spec.m = 64;
  spec.n = 100;
  spec.p = 50;
  const auto cost = symmetry::flops_linear(spec);
  CHECK(cost.base == 1920000);
  CHECK(cost.ordinary_overhead == 15000);
  CHECK(cost.riemannian_overhead == 30000);
  CHECK(cost.interval_overhead == 15000.0);

  spec.interval = 10;
  CHECK(symmetry::flops_linear(spec).interval_overhead == 1500.0);
}

TEST_CASE("flops_linear: tangent-route overhead is twice the ordinary one") {
  SeededRng rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    LayerCostSpec spec;
    spec.kind = LayerCostSpec::Kind::kLinear;
    spec.m = 1 + static_cast<std::int64_t>(rng.next_below(512));
    spec.n = 1 + static_cast<std::int64_t>(rng.next_below(512));
    spec.p = 1 + static_cast<std::int64_t>(rng.next_below(512));
    const auto cost = symmetry::flops_linear(spec);
    CHECK(cost.riemannian_overhead == 2 * cost.ordinary_overhead);
    CHECK(cost.base == 6 * spec.m * spec.n * spec.p);
  }
}

TEST_CASE("flops_conv: unit case and the worked example") {
  LayerCostSpec unit;
  unit.kind = LayerCostSpec::Kind::kConv;
  CHECK(symmetry::flops_conv(unit).base == 6);

  LayerCostSpec spec;
  spec.kind = LayerCostSpec::Kind::kConv;
  spec.m = 64;
  spec.n = 64;
  spec.p = 32;
  spec.fh = 3;
  spec.fw = 3;
  spec.h = 16;
  spec.w = 16;
  const auto cost = symmetry::flops_conv(spec);
  CHECK(cost.base == 1811939328LL);
  CHECK(cost.ordinary_overhead == 3LL * 64 * 32 * 9);
  CHECK(cost.riemannian_overhead == 2 * cost.ordinary_overhead);
  // Projection overhead is vanishing next to the convolution itself.
  CHECK(cost.interval_overhead / static_cast<double>(cost.base) < 1e-4);
}

TEST_CASE("flops: wrong kind and non-positive counts are rejected") {
  LayerCostSpec spec;
  spec.kind = LayerCostSpec::Kind::kConv;
  CHECK_THROWS_AS(symmetry::flops_linear(spec), ConfigError);
  spec.kind = LayerCostSpec::Kind::kLinear;
  CHECK_THROWS_AS(symmetry::flops_conv(spec), ConfigError);
  spec.m = 0;
  CHECK_THROWS_AS(symmetry::flops_linear(spec), ConfigError);
}

TEST_CASE("condition_table: one row per alpha, increasing in the sweep") {
  const std::string table =
      symmetry::condition_table(symmetry::default_base_model(), {1.0, 2.0, 5.0, 10.0});
  std::size_t rows = 0;
  double prev_kappa = 0.0;
  std::size_t pos = 0;
  while (pos < table.size()) {
    const std::size_t eol = table.find('\n', pos);
    REQUIRE(eol != std::string::npos);
    double alpha = 0.0, kappa = 0.0;
    REQUIRE(std::sscanf(table.c_str() + pos, "%lf %lf", &alpha, &kappa) == 2);
    CHECK(kappa > prev_kappa);
    prev_kappa = kappa;
    ++rows;
    pos = eol + 1;
  }
  CHECK(rows == 4);
}
