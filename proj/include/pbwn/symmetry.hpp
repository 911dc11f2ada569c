#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pbwn/matrix.hpp"

// Analytical diagnostics for the scaling symmetry of two-layer linear
// chains: how rescaling (w1, w2) to (a*w1, w2/a) preserves the function but
// skews gradients and curvature, plus the FLOP cost model for projection
// overhead in linear and convolution layers.

namespace pbwn::symmetry {

/// y = w2 * w1 * x with squared-error loss 0.5*(y - t)^2 averaged over the
/// data points. Small enough that every derivative has a closed form.
struct TwoLayerScalarModel {
  double w1 = 1.0;
  double w2 = 1.0;
  std::vector<std::pair<double, double>> data;  // (x, target)

  double predict(double x) const { return w2 * w1 * x; }
  double loss() const;
  /// Analytic (dL/dw1, dL/dw2).
  std::pair<double, double> gradient() const;
};

/// The canonical same-magnitude point: w1 = w2 = 1 with the single data
/// point (1, 2).
TwoLayerScalarModel default_base_model();

/// Reparameterizes to (alpha*w1, w2/alpha); predictions are unchanged.
/// Throws ConfigError for alpha <= 0.
TwoLayerScalarModel scaled_model(const TwoLayerScalarModel& model, double alpha);

/// Gradient ratios (scaled / original) for (w1, w2); the caller expects
/// (1/alpha, alpha). Throws NumericError if either original gradient is too
/// close to zero for the ratio to mean anything.
std::pair<double, double> gradient_scaling_check(const TwoLayerScalarModel& model,
                                                 double alpha);

/// |lambda_max| / |lambda_min| of the 2x2 loss Hessian at (w1, w2), computed
/// by central finite differences (step 1e-4) and symmetrized as (H + H^T)/2.
/// Throws NumericError when |lambda_min| < 1e-12.
double hessian_condition_number(const TwoLayerScalarModel& model);

/// The finite-difference Hessian itself, exposed for oracle comparisons.
Matrix hessian_fd(const TwoLayerScalarModel& model, double step = 1e-4);

struct LayerCostSpec {
  enum class Kind { kLinear, kConv };
  Kind kind = Kind::kLinear;
  std::int64_t m = 1;   // batch size
  std::int64_t n = 1;   // output features / filters
  std::int64_t p = 1;   // input features / channels
  std::int64_t fh = 1;  // filter height (conv)
  std::int64_t fw = 1;  // filter width (conv)
  std::int64_t h = 1;   // feature-map height (conv)
  std::int64_t w = 1;   // feature-map width (conv)
  std::int64_t interval = 1;  // projection interval T
};

/// FLOP counts with multiply-add weighted as 2 FLOPs: the layer's
/// forward+backward base cost, the per-iteration projection overheads for
/// the ordinary-gradient (3 n p) and tangent-gradient (6 n p) routes, and
/// the amortized overhead when projecting every T iterations (3 n p / T).
struct CostBreakdown {
  std::int64_t base = 0;
  std::int64_t ordinary_overhead = 0;
  std::int64_t riemannian_overhead = 0;
  double interval_overhead = 0.0;
};

/// base = 6 m n p. Requires kind == kLinear and positive counts.
CostBreakdown flops_linear(const LayerCostSpec& spec);

/// base = 6 m n p fh fw h w, overheads over the unrolled n x (p fh fw)
/// weight. Requires kind == kConv and positive counts.
CostBreakdown flops_conv(const LayerCostSpec& spec);

/// Two-column "alpha condition_number" text table for the given sweep,
/// one row per alpha, formatted with 9 significant digits.
std::string condition_table(const TwoLayerScalarModel& base,
                            const std::vector<double>& alphas);

}  // namespace pbwn::symmetry
