#pragma once

#include <span>
#include <vector>

#include "pbwn/matrix.hpp"
#include "pbwn/nn.hpp"

// The optimizer family: plain SGD with momentum and weight decay, plus the
// projection-based variants that keep constrained weight rows unit-norm by
// renormalizing them every T iterations.

namespace pbwn::optim {

enum class Method {
  kNormal,        // no projection
  kPbwnRiem,      // tangent-projected gradient, projection every iteration
  kPbwn,          // ordinary gradient, projection every iteration
  kPbwnInterval,  // ordinary gradient, projection every T iterations
};

struct OptimizerConfig {
  Method method = Method::kNormal;
  double learning_rate = 0.1;
  double momentum = 0.0;     // in [0, 1)
  double weight_decay = 0.0; // >= 0; the decay term is subtracted as lambda*W
  int interval = 1;          // T >= 1; consulted only by kPbwnInterval

  /// Throws ConfigError on out-of-range values and on kPbwnRiem with T > 1:
  /// the tangent-space gradient needs the base point on the manifold, which
  /// interval updating violates between projections.
  void validate() const;

  /// Iterations between projections: 1 for the per-step methods, T for
  /// kPbwnInterval. kNormal never projects.
  int effective_interval() const;
};

struct OptimizerState {
  long iteration = 0;
  std::vector<Matrix> velocity;  // one per parameter slot, lazily allocated
};

/// One descent step on a single parameter. With momentum = 0 and decay = 0
/// this is W - eta*G. With decay, the lambda*W shrinkage folds into the
/// gradient before the velocity update (as G + (lambda/eta)*W), so that the
/// momentum-free step is exactly W - lambda*W - eta*G. velocity may be null
/// only when momentum is 0.
Matrix sgd_step(const Matrix& param, const Matrix& grad, const OptimizerConfig& cfg,
                Matrix* velocity);

/// The decoupled shrinkage update W - lambda*W - eta*G.
Matrix weight_decay_step(const Matrix& param, const Matrix& grad, double eta,
                         double lambda);

struct IterationResult {
  double loss;
  double accuracy;
  bool projected;  // whether this iteration ended with a projection event
};

/// One full training iteration: forward, backward, a parameter update per
/// slot, then (for the projection methods, when the incremented iteration
/// counter is a multiple of T) row normalization of every constrained
/// weight. kPbwnRiem replaces each constrained weight's gradient with its
/// tangent-space projection before the update; that requires the weight to
/// be on the manifold and throws otherwise. Momentum buffers live in the
/// ambient space and are never touched by projection events.
IterationResult pbwn_iteration(nn::Network& net, const nn::Batch& batch,
                               const OptimizerConfig& cfg, OptimizerState& state);

/// The row-wise update w - ((l-1)/l) w - (eta/l) g with l = ||w - eta g||,
/// evaluated literally in that form. For a unit row it lands on the same
/// point as normalizing w - eta*g, which the tests cross-check; the factor
/// l acts as a row-specific decay rate and learning-rate scale. Throws
/// DegenerateRowError when l falls below the zero tolerance.
std::vector<double> adaptive_decay_step(std::span<const double> w_row,
                                        std::span<const double> g_row, double eta);

struct ProbeResult {
  double loss_before;
  double loss_after;
  double delta() const;
};

/// Normalizes every constrained weight off-schedule and reports the
/// train-mode loss on the same batch before and after, with batch
/// statistics recomputed both times and running statistics restored.
/// When require_bn_coverage is set (the default), every constrained linear
/// layer must be immediately followed by batch normalization and all
/// nonlinearities must be ReLU, otherwise ConfigError; pass false to
/// measure how much a projection disturbs a network without that coverage.
/// The weights keep their projected values on return.
ProbeResult loss_invariance_probe(nn::Network& net, const nn::Batch& batch,
                                  bool require_bn_coverage = true);

}  // namespace pbwn::optim
