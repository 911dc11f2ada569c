#include "pbwn/optim.hpp"

#include <cmath>

#include "pbwn/manifold.hpp"
#include "pbwn/tensor.hpp"

namespace pbwn::optim {

void OptimizerConfig::validate() const {
  if (learning_rate <= 0.0) {
    throw ConfigError("OptimizerConfig: learning rate must be positive");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("OptimizerConfig: momentum must be in [0, 1)");
  }
  if (weight_decay < 0.0) {
    throw ConfigError("OptimizerConfig: weight decay must be >= 0");
  }
  if (interval < 1) {
    throw ConfigError("OptimizerConfig: interval must be a positive integer");
  }
  if (method == Method::kPbwnRiem && interval > 1) {
    throw ConfigError("OptimizerConfig: the tangent-gradient method requires "
                      "projection every iteration (interval 1), got interval " +
                      std::to_string(interval));
  }
}

int OptimizerConfig::effective_interval() const {
  return method == Method::kPbwnInterval ? interval : 1;
}

Matrix sgd_step(const Matrix& param, const Matrix& grad, const OptimizerConfig& cfg,
                Matrix* velocity) {
  if (!param.same_shape(grad)) {
    throw DimensionError("sgd_step: parameter " + param.shape_str() +
                         " and gradient " + grad.shape_str() + " differ");
  }
  const double eta = cfg.learning_rate;
  const double mu = cfg.momentum;
  const double lambda = cfg.weight_decay;

  Matrix out(param.rows(), param.cols());
  if (mu == 0.0) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = grad.data()[i] + (lambda / eta) * param.data()[i];
      out.data()[i] = param.data()[i] - eta * g;
    }
    return out;
  }

  if (velocity == nullptr) {
    throw ConfigError("sgd_step: momentum needs a velocity buffer");
  }
  if (velocity->empty()) *velocity = Matrix(param.rows(), param.cols());
  if (!velocity->same_shape(param)) {
    throw DimensionError("sgd_step: velocity " + velocity->shape_str() +
                         " does not match parameter " + param.shape_str());
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.data()[i] + (lambda / eta) * param.data()[i];
    velocity->data()[i] = mu * velocity->data()[i] + g;
    out.data()[i] = param.data()[i] - eta * velocity->data()[i];
  }
  return out;
}

Matrix weight_decay_step(const Matrix& param, const Matrix& grad, double eta,
                         double lambda) {
  if (!param.same_shape(grad)) {
    throw DimensionError("weight_decay_step: parameter " + param.shape_str() +
                         " and gradient " + grad.shape_str() + " differ");
  }
  if (lambda < 0.0) {
    throw ConfigError("weight_decay_step: lambda must be >= 0");
  }
  Matrix out(param.rows(), param.cols());
  for (std::size_t i = 0; i < param.size(); ++i) {
    out.data()[i] = param.data()[i] - lambda * param.data()[i] - eta * grad.data()[i];
  }
  return out;
}

IterationResult pbwn_iteration(nn::Network& net, const nn::Batch& batch,
                               const OptimizerConfig& cfg, OptimizerState& state) {
  cfg.validate();

  const auto result = net.forward(batch, nn::Mode::kTrain);
  const double acc = nn::accuracy(result.logits, batch.targets);
  net.backward();

  auto slots = net.params();
  if (state.velocity.size() < slots.size()) state.velocity.resize(slots.size());

  for (std::size_t s = 0; s < slots.size(); ++s) {
    auto& slot = slots[s];
    if (slot.constrained && cfg.method == Method::kPbwnRiem) {
      const auto point = manifold::ObliquePoint::from_matrix(*slot.value);
      const auto tangent = manifold::riemannian_gradient(point, *slot.grad);
      *slot.value = sgd_step(*slot.value, tangent.matrix(), cfg, &state.velocity[s]);
    } else {
      *slot.value = sgd_step(*slot.value, *slot.grad, cfg, &state.velocity[s]);
    }
  }

  state.iteration += 1;

  bool projected = false;
  if (cfg.method != Method::kNormal &&
      state.iteration % cfg.effective_interval() == 0) {
    for (auto& slot : slots) {
      if (slot.constrained) manifold::project_rows_inplace(*slot.value);
    }
    projected = true;
  }
  return {result.loss, acc, projected};
}

std::vector<double> adaptive_decay_step(std::span<const double> w_row,
                                        std::span<const double> g_row, double eta) {
  if (w_row.size() != g_row.size()) {
    throw DimensionError("adaptive_decay_step: row lengths " +
                         std::to_string(w_row.size()) + " and " +
                         std::to_string(g_row.size()) + " differ");
  }
  double sq = 0.0;
  for (std::size_t j = 0; j < w_row.size(); ++j) {
    const double stepped = w_row[j] - eta * g_row[j];
    sq += stepped * stepped;
  }
  const double lambda = std::sqrt(sq);
  if (lambda < manifold::kZeroTol) {
    throw DegenerateRowError("adaptive_decay_step: stepped row has near-zero norm", 0);
  }
  std::vector<double> out(w_row.size());
  for (std::size_t j = 0; j < w_row.size(); ++j) {
    out[j] = w_row[j] - ((lambda - 1.0) / lambda) * w_row[j] - (eta / lambda) * g_row[j];
  }
  return out;
}

double ProbeResult::delta() const { return std::abs(loss_after - loss_before); }

ProbeResult loss_invariance_probe(nn::Network& net, const nn::Batch& batch,
                                  bool require_bn_coverage) {
  auto layers = net.layer_ptrs();
  if (require_bn_coverage) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (auto* lin = dynamic_cast<nn::LinearLayer*>(layers[i])) {
        if (!lin->constrained()) continue;
        const bool covered = i + 1 < layers.size() &&
                             dynamic_cast<nn::BatchNormLayer*>(layers[i + 1]) != nullptr;
        if (!covered) {
          throw ConfigError("loss_invariance_probe: constrained linear layer " +
                            std::to_string(i) +
                            " is not immediately followed by batch normalization");
        }
      }
    }
  }

  std::vector<std::pair<nn::BatchNormLayer*, std::pair<Matrix, Matrix>>> bn_state;
  for (nn::Layer* l : layers) {
    if (auto* bn = dynamic_cast<nn::BatchNormLayer*>(l)) {
      bn_state.push_back({bn, {bn->running_mean(), bn->running_var()}});
    }
  }

  const double loss_before = net.forward(batch, nn::Mode::kTrain).loss;
  for (auto& slot : net.params()) {
    if (slot.constrained) manifold::project_rows_inplace(*slot.value);
  }
  const double loss_after = net.forward(batch, nn::Mode::kTrain).loss;

  for (auto& [bn, stats] : bn_state) {
    bn->set_running_stats(std::move(stats.first), std::move(stats.second));
  }
  net.discard_pending_backward();
  return {loss_before, loss_after};
}

}  // namespace pbwn::optim
