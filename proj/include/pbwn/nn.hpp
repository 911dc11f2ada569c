#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pbwn/matrix.hpp"

// A minimal reverse-mode differentiable network stack: linear, ReLU, batch
// normalization, and a fused softmax cross-entropy head. Activations are
// batch-major: every layer maps a (batch x features) matrix to another.

namespace pbwn::nn {

enum class Mode { kTrain, kEval };

/// One mini-batch: inputs row-per-sample plus integer class labels.
struct Batch {
  Matrix inputs;
  std::vector<int> targets;
};

/// View over one learnable parameter: its value, the gradient buffer filled
/// by backward(), and whether projection events apply to it.
struct ParamSlot {
  std::string name;
  Matrix* value = nullptr;
  Matrix* grad = nullptr;
  bool constrained = false;
};

class Layer {
 public:
  virtual ~Layer() = default;

  /// Maps activations forward. Train mode caches whatever backward needs;
  /// eval mode touches no state and may run concurrently.
  virtual Matrix forward(const Matrix& x, Mode mode) = 0;

  /// Consumes d(loss)/d(output), fills parameter gradients, and returns
  /// d(loss)/d(input). Requires a train-mode forward to have run.
  virtual Matrix backward(const Matrix& grad_out) = 0;

  virtual std::vector<ParamSlot> params() { return {}; }
};

/// y = x W^T (+ bias). The weight is (n_out x n_in): row i is neuron i's
/// incoming weight vector, which is the unit that projection normalizes.
class LinearLayer : public Layer {
 public:
  LinearLayer(Matrix weight, bool constrained);
  LinearLayer(Matrix weight, Matrix bias, bool constrained);  // bias is 1 x n_out

  Matrix forward(const Matrix& x, Mode mode) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<ParamSlot> params() override;

  const Matrix& weight() const { return weight_; }
  Matrix& weight() { return weight_; }
  bool constrained() const { return constrained_; }
  bool has_bias() const { return !bias_.empty(); }

 private:
  Matrix weight_;
  Matrix bias_;  // empty when absent
  Matrix grad_weight_;
  Matrix grad_bias_;
  Matrix cached_input_;
  bool constrained_;
};

class ReluLayer : public Layer {
 public:
  Matrix forward(const Matrix& x, Mode mode) override;
  Matrix backward(const Matrix& grad_out) override;

 private:
  Matrix cached_input_;
};

/// Per-feature standardization by mini-batch statistics (biased variance),
/// then learnable scale gamma and shift beta. Train mode folds the batch
/// statistics into running averages; eval mode normalizes with the running
/// statistics and mutates nothing.
class BatchNormLayer : public Layer {
 public:
  explicit BatchNormLayer(std::size_t features, double epsilon = 1e-5,
                          double stat_momentum = 0.9);

  Matrix forward(const Matrix& x, Mode mode) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<ParamSlot> params() override;

  double epsilon() const { return epsilon_; }
  const Matrix& running_mean() const { return running_mean_; }
  const Matrix& running_var() const { return running_var_; }
  void set_running_stats(Matrix mean, Matrix var);

 private:
  double epsilon_;
  double stat_momentum_;
  Matrix gamma_, beta_;                 // 1 x n
  Matrix running_mean_, running_var_;   // 1 x n
  Matrix grad_gamma_, grad_beta_;
  Matrix cached_xhat_;
  std::vector<double> cached_inv_std_;
};

/// Fused softmax + cross-entropy over logits, mean over the batch. Uses
/// max-subtracted log-sum-exp; if grad_logits is non-null it receives
/// (softmax - onehot) / batch_size.
double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets,
                             Matrix* grad_logits);

/// Fraction of rows whose argmax logit (lowest index on ties) equals the target.
double accuracy(const Matrix& logits, const std::vector<int>& targets);

class Network {
 public:
  struct ForwardResult {
    double loss;
    Matrix logits;
  };

  void add(std::unique_ptr<Layer> layer);

  /// Runs all layers then the cross-entropy head. Train mode additionally
  /// prepares the caches backward() consumes; with any BatchNormLayer
  /// present it requires batch size >= 2.
  ForwardResult forward(const Batch& batch, Mode mode);

  /// Exact reverse-mode gradients of the mean-batch loss for every
  /// parameter, using the caches of the latest train-mode forward. Throws
  /// ConfigError if no matching forward is pending.
  void backward();

  std::vector<ParamSlot> params();
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
  std::vector<Layer*> layer_ptrs();

  /// Drops any cached forward, so the next backward() without a fresh
  /// train-mode forward fails. Used by probes that run throwaway forwards.
  void discard_pending_backward() { backward_ready_ = false; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  Matrix pending_grad_logits_;
  bool backward_ready_ = false;
};

/// Central-difference estimate of d(loss)/d(param) for the parameter at
/// param_index in net.params() order, evaluated on the train-mode loss.
/// Batch-norm running statistics are snapshotted and restored, so the net
/// is returned in its original state.
Matrix finite_diff_gradient(Network& net, const Batch& batch,
                            std::size_t param_index, double step);

/// max_i |a_i - f_i| / max(||a||_inf, ||f||_inf, 1e-8): the largest entry
/// disagreement relative to the gradient's own scale. Normalizing by the
/// tensor scale keeps the measure meaningful on near-zero entries, where
/// entry-wise ratios only amplify finite-difference rounding noise.
double max_relative_gradient_error(const Matrix& analytic, const Matrix& fd);

/// Stacks Linear(+BatchNorm)+ReLU blocks over the given widths, ending in a
/// plain linear layer feeding the cross-entropy head. All linear layers are
/// constrained and bias-free; weights use the uniform fan-in init.
Network make_mlp(const std::vector<std::size_t>& widths, bool use_bn, SeededRng& rng,
                 double bn_epsilon = 1e-5);

/// Binary dump of all parameters: u32 tensor count, then per tensor u32
/// rows, u32 cols, and the row-major f64 payload; everything little-endian.
void save_parameters(Network& net, const std::string& path);

/// Loads a dump produced by save_parameters into a structurally identical
/// network; shape mismatches raise FormatError.
void load_parameters(Network& net, const std::string& path);

}  // namespace pbwn::nn
