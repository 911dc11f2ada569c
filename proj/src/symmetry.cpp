#include "pbwn/symmetry.hpp"

#include <cmath>
#include <cstdio>

#include "pbwn/errors.hpp"

namespace pbwn::symmetry {

double TwoLayerScalarModel::loss() const {
  if (data.empty()) throw ConfigError("TwoLayerScalarModel: no data points");
  double acc = 0.0;
  for (const auto& [x, t] : data) {
    const double r = predict(x) - t;
    acc += 0.5 * r * r;
  }
  return acc / static_cast<double>(data.size());
}

std::pair<double, double> TwoLayerScalarModel::gradient() const {
  if (data.empty()) throw ConfigError("TwoLayerScalarModel: no data points");
  double g1 = 0.0, g2 = 0.0;
  for (const auto& [x, t] : data) {
    const double r = predict(x) - t;
    g1 += r * w2 * x;
    g2 += r * w1 * x;
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  return {g1 * inv, g2 * inv};
}

TwoLayerScalarModel default_base_model() {
  return TwoLayerScalarModel{1.0, 1.0, {{1.0, 2.0}}};
}

TwoLayerScalarModel scaled_model(const TwoLayerScalarModel& model, double alpha) {
  if (alpha <= 0.0) {
    throw ConfigError("scaled_model: alpha must be positive, got " +
                      std::to_string(alpha));
  }
  TwoLayerScalarModel scaled = model;
  scaled.w1 = alpha * model.w1;
  scaled.w2 = model.w2 / alpha;
  return scaled;
}

std::pair<double, double> gradient_scaling_check(const TwoLayerScalarModel& model,
                                                 double alpha) {
  const auto [g1, g2] = model.gradient();
  if (std::abs(g1) < 1e-15 || std::abs(g2) < 1e-15) {
    throw NumericError("gradient_scaling_check: gradient vanishes at the "
                       "evaluation point, ratios are indeterminate");
  }
  const auto scaled = scaled_model(model, alpha);
  const auto [s1, s2] = scaled.gradient();
  return {s1 / g1, s2 / g2};
}

Matrix hessian_fd(const TwoLayerScalarModel& model, double step) {
  auto loss_at = [&model](double w1, double w2) {
    TwoLayerScalarModel probe = model;
    probe.w1 = w1;
    probe.w2 = w2;
    return probe.loss();
  };
  const double h = step;
  const double w1 = model.w1, w2 = model.w2;
  const double center = loss_at(w1, w2);

  Matrix hess(2, 2);
  hess(0, 0) = (loss_at(w1 + h, w2) - 2.0 * center + loss_at(w1 - h, w2)) / (h * h);
  hess(1, 1) = (loss_at(w1, w2 + h) - 2.0 * center + loss_at(w1, w2 - h)) / (h * h);
  const double cross = (loss_at(w1 + h, w2 + h) - loss_at(w1 + h, w2 - h) -
                        loss_at(w1 - h, w2 + h) + loss_at(w1 - h, w2 - h)) /
                       (4.0 * h * h);
  hess(0, 1) = cross;
  hess(1, 0) = cross;

  // Symmetrize (H + H^T)/2; a no-op here given the shared cross term, kept
  // so the contract does not depend on how the off-diagonals were filled.
  const double sym = 0.5 * (hess(0, 1) + hess(1, 0));
  hess(0, 1) = sym;
  hess(1, 0) = sym;
  return hess;
}

double hessian_condition_number(const TwoLayerScalarModel& model) {
  const Matrix h = hessian_fd(model);
  // Closed-form eigenvalues of a symmetric 2x2.
  const double a = h(0, 0), b = h(0, 1), d = h(1, 1);
  const double mean = 0.5 * (a + d);
  const double disc = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
  const double l1 = mean + disc;
  const double l2 = mean - disc;
  const double hi = std::max(std::abs(l1), std::abs(l2));
  const double lo = std::min(std::abs(l1), std::abs(l2));
  if (lo < 1e-12) {
    throw NumericError("hessian_condition_number: smallest eigenvalue magnitude " +
                       std::to_string(lo) + " is below 1e-12, Hessian is singular");
  }
  return hi / lo;
}

namespace {

void require_positive(const LayerCostSpec& spec, bool conv) {
  const bool ok = spec.m >= 1 && spec.n >= 1 && spec.p >= 1 && spec.interval >= 1 &&
                  (!conv || (spec.fh >= 1 && spec.fw >= 1 && spec.h >= 1 && spec.w >= 1));
  if (!ok) throw ConfigError("LayerCostSpec: all counts must be >= 1");
}

}  // namespace

CostBreakdown flops_linear(const LayerCostSpec& spec) {
  if (spec.kind != LayerCostSpec::Kind::kLinear) {
    throw ConfigError("flops_linear: spec kind is not linear");
  }
  require_positive(spec, /*conv=*/false);
  CostBreakdown out;
  out.base = 6 * spec.m * spec.n * spec.p;
  out.ordinary_overhead = 3 * spec.n * spec.p;
  out.riemannian_overhead = 6 * spec.n * spec.p;
  out.interval_overhead =
      static_cast<double>(out.ordinary_overhead) / static_cast<double>(spec.interval);
  return out;
}

CostBreakdown flops_conv(const LayerCostSpec& spec) {
  if (spec.kind != LayerCostSpec::Kind::kConv) {
    throw ConfigError("flops_conv: spec kind is not conv");
  }
  require_positive(spec, /*conv=*/true);
  CostBreakdown out;
  out.base = 6 * spec.m * spec.n * spec.p * spec.fh * spec.fw * spec.h * spec.w;
  out.ordinary_overhead = 3 * spec.n * spec.p * spec.fh * spec.fw;
  out.riemannian_overhead = 6 * spec.n * spec.p * spec.fh * spec.fw;
  out.interval_overhead =
      static_cast<double>(out.ordinary_overhead) / static_cast<double>(spec.interval);
  return out;
}

std::string condition_table(const TwoLayerScalarModel& base,
                            const std::vector<double>& alphas) {
  std::string out;
  char line[128];
  for (double alpha : alphas) {
    const double kappa = hessian_condition_number(scaled_model(base, alpha));
    std::snprintf(line, sizeof(line), "%.9g %.9g\n", alpha, kappa);
    out += line;
  }
  return out;
}

}  // namespace pbwn::symmetry
