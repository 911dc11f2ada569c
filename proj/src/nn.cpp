#include "pbwn/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pbwn/tensor.hpp"

namespace pbwn::nn {

namespace {

void require_cache(const Matrix& cache, const char* layer) {
  if (cache.empty()) {
    throw ConfigError(std::string(layer) +
                      "::backward: no train-mode forward is cached");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// LinearLayer

LinearLayer::LinearLayer(Matrix weight, bool constrained)
    : weight_(std::move(weight)), constrained_(constrained) {}

LinearLayer::LinearLayer(Matrix weight, Matrix bias, bool constrained)
    : weight_(std::move(weight)), bias_(std::move(bias)), constrained_(constrained) {
  if (bias_.rows() != 1 || bias_.cols() != weight_.rows()) {
    throw DimensionError("LinearLayer: bias " + bias_.shape_str() +
                         " does not match weight " + weight_.shape_str());
  }
}

Matrix LinearLayer::forward(const Matrix& x, Mode mode) {
  if (x.cols() != weight_.cols()) {
    throw DimensionError("LinearLayer: input " + x.shape_str() +
                         " does not match weight " + weight_.shape_str());
  }
  Matrix y = tensor::matmul_transpose_b(x, weight_);
  if (!bias_.empty()) {
    for (std::size_t i = 0; i < y.rows(); ++i)
      for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += bias_(0, j);
  }
  if (mode == Mode::kTrain) cached_input_ = x;
  return y;
}

Matrix LinearLayer::backward(const Matrix& grad_out) {
  require_cache(cached_input_, "LinearLayer");
  grad_weight_ = tensor::matmul_transpose_a(grad_out, cached_input_);
  if (!bias_.empty()) {
    grad_bias_ = Matrix(1, bias_.cols());
    for (std::size_t i = 0; i < grad_out.rows(); ++i)
      for (std::size_t j = 0; j < grad_out.cols(); ++j)
        grad_bias_(0, j) += grad_out(i, j);
  }
  return tensor::matmul(grad_out, weight_);
}

std::vector<ParamSlot> LinearLayer::params() {
  std::vector<ParamSlot> slots;
  slots.push_back({"linear.weight", &weight_, &grad_weight_, constrained_});
  if (!bias_.empty()) {
    slots.push_back({"linear.bias", &bias_, &grad_bias_, false});
  }
  return slots;
}

// ---------------------------------------------------------------------------
// ReluLayer

Matrix ReluLayer::forward(const Matrix& x, Mode mode) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  }
  if (mode == Mode::kTrain) cached_input_ = x;
  return y;
}

Matrix ReluLayer::backward(const Matrix& grad_out) {
  require_cache(cached_input_, "ReluLayer");
  // Sub-gradient at exactly 0 is 0, so the mask is a strict comparison.
  Matrix g(grad_out.rows(), grad_out.cols());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.data()[i] = cached_input_.data()[i] > 0.0 ? grad_out.data()[i] : 0.0;
  }
  return g;
}

// ---------------------------------------------------------------------------
// BatchNormLayer

BatchNormLayer::BatchNormLayer(std::size_t features, double epsilon,
                               double stat_momentum)
    : epsilon_(epsilon),
      stat_momentum_(stat_momentum),
      gamma_(1, features),
      beta_(1, features),
      running_mean_(1, features),
      running_var_(1, features) {
  if (epsilon <= 0.0 || stat_momentum <= 0.0 || stat_momentum >= 1.0) {
    throw ConfigError("BatchNormLayer: epsilon must be positive and the stat "
                      "momentum inside (0,1)");
  }
  for (std::size_t j = 0; j < features; ++j) {
    gamma_(0, j) = 1.0;
    running_var_(0, j) = 1.0;
  }
}

void BatchNormLayer::set_running_stats(Matrix mean, Matrix var) {
  if (!mean.same_shape(running_mean_) || !var.same_shape(running_var_)) {
    throw DimensionError("BatchNormLayer: running-stat shapes do not match");
  }
  running_mean_ = std::move(mean);
  running_var_ = std::move(var);
}

Matrix BatchNormLayer::forward(const Matrix& x, Mode mode) {
  if (x.cols() != gamma_.cols()) {
    throw DimensionError("BatchNormLayer: input " + x.shape_str() + " has " +
                         std::to_string(x.cols()) + " features, layer expects " +
                         std::to_string(gamma_.cols()));
  }
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  Matrix y(m, n);

  if (mode == Mode::kEval) {
    for (std::size_t j = 0; j < n; ++j) {
      const double inv = 1.0 / std::sqrt(running_var_(0, j) + epsilon_);
      for (std::size_t i = 0; i < m; ++i) {
        y(i, j) = gamma_(0, j) * (x(i, j) - running_mean_(0, j)) * inv + beta_(0, j);
      }
    }
    return y;
  }

  if (m < 2) {
    throw ConfigError("BatchNormLayer: train mode needs a batch of at least 2 "
                      "rows to form statistics, got " + std::to_string(m));
  }
  const auto mean = tensor::column_mean(x);
  const auto var = tensor::column_variance(x, mean);

  cached_inv_std_.resize(n);
  cached_xhat_ = Matrix(m, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double inv = 1.0 / std::sqrt(var[j] + epsilon_);
    cached_inv_std_[j] = inv;
    for (std::size_t i = 0; i < m; ++i) {
      const double xhat = (x(i, j) - mean[j]) * inv;
      cached_xhat_(i, j) = xhat;
      y(i, j) = gamma_(0, j) * xhat + beta_(0, j);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    running_mean_(0, j) = stat_momentum_ * running_mean_(0, j) +
                          (1.0 - stat_momentum_) * mean[j];
    running_var_(0, j) = stat_momentum_ * running_var_(0, j) +
                         (1.0 - stat_momentum_) * var[j];
  }
  return y;
}

Matrix BatchNormLayer::backward(const Matrix& grad_out) {
  require_cache(cached_xhat_, "BatchNormLayer");
  const std::size_t m = grad_out.rows();
  const std::size_t n = grad_out.cols();
  if (!grad_out.same_shape(cached_xhat_)) {
    throw DimensionError("BatchNormLayer: upstream gradient " + grad_out.shape_str() +
                         " does not match cached batch " + cached_xhat_.shape_str());
  }

  grad_gamma_ = Matrix(1, n);
  grad_beta_ = Matrix(1, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      grad_gamma_(0, j) += grad_out(i, j) * cached_xhat_(i, j);
      grad_beta_(0, j) += grad_out(i, j);
    }
  }

  // d(loss)/dx for standardization by biased batch statistics:
  //   dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
  // with the means taken over the batch, and dxhat = g * gamma.
  Matrix grad_in(m, n);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < n; ++j) {
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double dxhat = grad_out(i, j) * gamma_(0, j);
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * cached_xhat_(i, j);
    }
    const double mean_dxhat = sum_dxhat * inv_m;
    const double mean_dxhat_xhat = sum_dxhat_xhat * inv_m;
    for (std::size_t i = 0; i < m; ++i) {
      const double dxhat = grad_out(i, j) * gamma_(0, j);
      grad_in(i, j) = cached_inv_std_[j] *
                      (dxhat - mean_dxhat - cached_xhat_(i, j) * mean_dxhat_xhat);
    }
  }
  return grad_in;
}

std::vector<ParamSlot> BatchNormLayer::params() {
  return {{"bn.gamma", &gamma_, &grad_gamma_, false},
          {"bn.beta", &beta_, &grad_beta_, false}};
}

// ---------------------------------------------------------------------------
// Loss head

double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets,
                             Matrix* grad_logits) {
  const std::size_t m = logits.rows();
  const std::size_t k = logits.cols();
  if (targets.size() != m) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(m) + " logit rows");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= k) {
      throw ConfigError("softmax_cross_entropy: target " + std::to_string(t) +
                        " outside [0, " + std::to_string(k) + ")");
    }
  }
  if (grad_logits) *grad_logits = Matrix(m, k);

  double loss = 0.0;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    double maxv = logits(i, 0);
    for (std::size_t j = 1; j < k; ++j) maxv = std::max(maxv, logits(i, j));
    double sum_exp = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum_exp += std::exp(logits(i, j) - maxv);
    const double lse = maxv + std::log(sum_exp);
    loss += (lse - logits(i, static_cast<std::size_t>(targets[i]))) * inv_m;
    if (grad_logits) {
      for (std::size_t j = 0; j < k; ++j) {
        const double p = std::exp(logits(i, j) - lse);
        (*grad_logits)(i, j) =
            (p - (static_cast<std::size_t>(targets[i]) == j ? 1.0 : 0.0)) * inv_m;
      }
    }
  }
  return loss;
}

double accuracy(const Matrix& logits, const std::vector<int>& targets) {
  if (targets.size() != logits.rows()) {
    throw DimensionError("accuracy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(logits.rows()) + " rows");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    if (best == static_cast<std::size_t>(targets[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

// ---------------------------------------------------------------------------
// Network

void Network::add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

Network::ForwardResult Network::forward(const Batch& batch, Mode mode) {
  if (batch.inputs.rows() != batch.targets.size()) {
    throw DimensionError("Network::forward: " + std::to_string(batch.targets.size()) +
                         " targets for " + std::to_string(batch.inputs.rows()) +
                         " input rows");
  }
  Matrix x = batch.inputs;
  for (auto& layer : layers_) x = layer->forward(x, mode);

  if (mode == Mode::kTrain) {
    const double loss = softmax_cross_entropy(x, batch.targets, &pending_grad_logits_);
    backward_ready_ = true;
    return {loss, std::move(x)};
  }
  const double loss = softmax_cross_entropy(x, batch.targets, nullptr);
  return {loss, std::move(x)};
}

void Network::backward() {
  if (!backward_ready_) {
    throw ConfigError("Network::backward: no pending train-mode forward");
  }
  backward_ready_ = false;
  Matrix grad = std::move(pending_grad_logits_);
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    grad = (*it)->backward(grad);
  }
}

std::vector<ParamSlot> Network::params() {
  std::vector<ParamSlot> slots;
  for (auto& layer : layers_) {
    auto s = layer->params();
    slots.insert(slots.end(), s.begin(), s.end());
  }
  return slots;
}

std::vector<Layer*> Network::layer_ptrs() {
  std::vector<Layer*> out;
  out.reserve(layers_.size());
  for (auto& l : layers_) out.push_back(l.get());
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

Matrix finite_diff_gradient(Network& net, const Batch& batch,
                            std::size_t param_index, double step) {
  if (step <= 0.0) {
    throw ConfigError("finite_diff_gradient: step must be positive");
  }
  auto slots = net.params();
  if (param_index >= slots.size()) {
    throw ConfigError("finite_diff_gradient: parameter index " +
                      std::to_string(param_index) + " out of range (" +
                      std::to_string(slots.size()) + " parameters)");
  }

  // Train-mode forwards fold batch statistics into the running averages;
  // snapshot them so the probe leaves the network untouched.
  std::vector<std::pair<BatchNormLayer*, std::pair<Matrix, Matrix>>> bn_state;
  for (Layer* l : net.layer_ptrs()) {
    if (auto* bn = dynamic_cast<BatchNormLayer*>(l)) {
      bn_state.push_back({bn, {bn->running_mean(), bn->running_var()}});
    }
  }

  Matrix& param = *slots[param_index].value;
  Matrix grad(param.rows(), param.cols());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double original = param.data()[i];
    param.data()[i] = original + step;
    const double loss_plus = net.forward(batch, Mode::kTrain).loss;
    param.data()[i] = original - step;
    const double loss_minus = net.forward(batch, Mode::kTrain).loss;
    param.data()[i] = original;
    grad.data()[i] = (loss_plus - loss_minus) / (2.0 * step);
  }

  for (auto& [bn, stats] : bn_state) {
    bn->set_running_stats(std::move(stats.first), std::move(stats.second));
  }
  net.discard_pending_backward();
  return grad;
}

double max_relative_gradient_error(const Matrix& analytic, const Matrix& fd) {
  if (!analytic.same_shape(fd)) {
    throw DimensionError("max_relative_gradient_error: shapes " +
                         analytic.shape_str() + " and " + fd.shape_str() + " differ");
  }
  double scale = 1e-8;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    scale = std::max({scale, std::abs(analytic.data()[i]), std::abs(fd.data()[i])});
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, std::abs(analytic.data()[i] - fd.data()[i]) / scale);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Builders and serialization

Network make_mlp(const std::vector<std::size_t>& widths, bool use_bn, SeededRng& rng,
                 double bn_epsilon) {
  if (widths.size() < 2) {
    throw ConfigError("make_mlp: need at least input and output widths");
  }
  Network net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const bool last = (l + 2 == widths.size());
    Matrix w = tensor::init_uniform_fanin(rng, widths[l + 1], widths[l]);
    net.add(std::make_unique<LinearLayer>(std::move(w), /*constrained=*/true));
    if (!last) {
      if (use_bn) net.add(std::make_unique<BatchNormLayer>(widths[l + 1], bn_epsilon));
      net.add(std::make_unique<ReluLayer>());
    }
  }
  return net;
}

namespace {

void write_u32_le(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError("parameter file " + path + ": truncated header");
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64_le(std::ofstream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw FormatError("parameter file " + path + ": truncated payload");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_parameters(Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  auto slots = net.params();
  write_u32_le(out, static_cast<std::uint32_t>(slots.size()));
  for (const auto& slot : slots) {
    write_u32_le(out, static_cast<std::uint32_t>(slot.value->rows()));
    write_u32_le(out, static_cast<std::uint32_t>(slot.value->cols()));
    for (std::size_t i = 0; i < slot.value->size(); ++i) {
      write_f64_le(out, slot.value->data()[i]);
    }
  }
}

void load_parameters(Network& net, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path + " for reading");
  auto slots = net.params();
  const std::uint32_t count = read_u32_le(in, path);
  if (count != slots.size()) {
    throw FormatError("parameter file " + path + ": holds " + std::to_string(count) +
                      " tensors, network has " + std::to_string(slots.size()));
  }
  for (auto& slot : slots) {
    const std::uint32_t rows = read_u32_le(in, path);
    const std::uint32_t cols = read_u32_le(in, path);
    if (rows != slot.value->rows() || cols != slot.value->cols()) {
      throw FormatError("parameter file " + path + ": tensor is " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        ", network expects " + slot.value->shape_str());
    }
    for (std::size_t i = 0; i < slot.value->size(); ++i) {
      slot.value->data()[i] = read_f64_le(in, path);
    }
  }
}

}  // namespace pbwn::nn
