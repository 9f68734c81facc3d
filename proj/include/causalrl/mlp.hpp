#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "causalrl/rng.hpp"

namespace causalrl {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
};

// Dense MLP with rectifier hidden layers and a linear output layer.
// Rows of the input matrix are samples.
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::vector<int> dims, Rng& rng) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw std::invalid_argument("mlp: need at least input and output dims");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      const int fan_in = dims_[l], fan_out = dims_[l + 1];
      const double limit = std::sqrt(6.0 / fan_in);
      std::uniform_real_distribution<double> u(-limit, limit);
      Eigen::MatrixXd w(fan_out, fan_in);
      for (int r = 0; r < fan_out; ++r)
        for (int c = 0; c < fan_in; ++c) w(r, c) = u(rng);
      w_.push_back(std::move(w));
      b_.push_back(Eigen::VectorXd::Zero(fan_out));
    }
  }

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return w_.size(); }
  const Eigen::MatrixXd& weights(std::size_t l) const { return w_[l]; }
  const Eigen::VectorXd& biases(std::size_t l) const { return b_[l]; }

  struct Cache {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> hidden;  // post-activation per hidden layer
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const {
    if (x.cols() != input_dim()) throw std::invalid_argument("mlp: input dimension mismatch");
    if (cache) {
      cache->input = x;
      cache->hidden.clear();
    }
    Eigen::MatrixXd h = x;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      Eigen::MatrixXd z = h * w_[l].transpose();
      z.rowwise() += b_[l].transpose();
      if (l + 1 < w_.size()) {
        h = z.cwiseMax(0.0);
        if (cache) cache->hidden.push_back(h);
      } else {
        h = std::move(z);
      }
    }
    return h;
  }

  Eigen::VectorXd forward_one(const Eigen::VectorXd& x) const {
    return forward(x.transpose()).row(0).transpose();
  }

  // dout: gradient of the loss w.r.t. the linear outputs, one row per sample.
  MlpGradients backward(const Cache& cache, const Eigen::MatrixXd& dout) const {
    MlpGradients g;
    g.w.resize(w_.size());
    g.b.resize(w_.size());
    Eigen::MatrixXd delta = dout;
    for (std::size_t li = w_.size(); li-- > 0;) {
      const Eigen::MatrixXd& below =
          li == 0 ? cache.input : cache.hidden[li - 1];
      g.w[li] = delta.transpose() * below;
      g.b[li] = delta.colwise().sum().transpose();
      if (li > 0) {
        Eigen::MatrixXd back = delta * w_[li];
        // rectifier gate for the layer below
        delta = back.cwiseProduct(
            (cache.hidden[li - 1].array() > 0.0).cast<double>().matrix());
      }
    }
    return g;
  }

  bool finite() const {
    for (const auto& w : w_)
      if (!w.allFinite()) return false;
    for (const auto& b : b_)
      if (!b.allFinite()) return false;
    return true;
  }

  // Flat parameter view (weights first per layer, then its bias) used by
  // gradient checks and checkpointing.
  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < w_.size(); ++l)
      n += static_cast<std::size_t>(w_[l].size()) + b_[l].size();
    return n;
  }

  double get_param(std::size_t idx) const {
    for (std::size_t l = 0; l < w_.size(); ++l) {
      const std::size_t wn = static_cast<std::size_t>(w_[l].size());
      if (idx < wn) return w_[l].data()[idx];
      idx -= wn;
      const std::size_t bn = static_cast<std::size_t>(b_[l].size());
      if (idx < bn) return b_[l].data()[idx];
      idx -= bn;
    }
    throw std::out_of_range("mlp: parameter index");
  }

  void set_param(std::size_t idx, double value) {
    for (std::size_t l = 0; l < w_.size(); ++l) {
      const std::size_t wn = static_cast<std::size_t>(w_[l].size());
      if (idx < wn) { w_[l].data()[idx] = value; return; }
      idx -= wn;
      const std::size_t bn = static_cast<std::size_t>(b_[l].size());
      if (idx < bn) { b_[l].data()[idx] = value; return; }
      idx -= bn;
    }
    throw std::out_of_range("mlp: parameter index");
  }

  double grad_at(const MlpGradients& g, std::size_t idx) const {
    for (std::size_t l = 0; l < w_.size(); ++l) {
      const std::size_t wn = static_cast<std::size_t>(w_[l].size());
      if (idx < wn) return g.w[l].data()[idx];
      idx -= wn;
      const std::size_t bn = static_cast<std::size_t>(b_[l].size());
      if (idx < bn) return g.b[l].data()[idx];
      idx -= bn;
    }
    throw std::out_of_range("mlp: gradient index");
  }

  std::vector<Eigen::MatrixXd>& mutable_weights() { return w_; }
  std::vector<Eigen::VectorXd>& mutable_biases() { return b_; }

 private:
  std::vector<int> dims_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
};

// Per-network Adam accumulator.
class AdamState {
 public:
  explicit AdamState(const Mlp& net) {
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      mw_.push_back(Eigen::MatrixXd::Zero(net.weights(l).rows(), net.weights(l).cols()));
      vw_.push_back(Eigen::MatrixXd::Zero(net.weights(l).rows(), net.weights(l).cols()));
      mb_.push_back(Eigen::VectorXd::Zero(net.biases(l).size()));
      vb_.push_back(Eigen::VectorXd::Zero(net.biases(l).size()));
    }
  }

  long step_count() const { return steps_; }

  friend void adam_step(Mlp& net, const MlpGradients& grads, AdamState& state,
                        const AdamConfig& cfg);

 private:
  std::vector<Eigen::MatrixXd> mw_, vw_;
  std::vector<Eigen::VectorXd> mb_, vb_;
  long steps_ = 0;
};

inline void adam_step(Mlp& net, const MlpGradients& grads, AdamState& state,
                      const AdamConfig& cfg) {
  if (grads.w.size() != net.num_layers())
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  state.steps_ += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.steps_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.steps_));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& w = net.mutable_weights()[l];
    auto& b = net.mutable_biases()[l];
    if (grads.w[l].rows() != w.rows() || grads.w[l].cols() != w.cols())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    state.mw_[l] = cfg.beta1 * state.mw_[l] + (1.0 - cfg.beta1) * grads.w[l];
    state.vw_[l] = cfg.beta2 * state.vw_[l] + (1.0 - cfg.beta2) * grads.w[l].cwiseProduct(grads.w[l]);
    state.mb_[l] = cfg.beta1 * state.mb_[l] + (1.0 - cfg.beta1) * grads.b[l];
    state.vb_[l] = cfg.beta2 * state.vb_[l] + (1.0 - cfg.beta2) * grads.b[l].cwiseProduct(grads.b[l]);
    w.array() -= cfg.lr * (state.mw_[l].array() / bc1) /
                 ((state.vw_[l].array() / bc2).sqrt() + cfg.eps);
    b.array() -= cfg.lr * (state.mb_[l].array() / bc1) /
                 ((state.vb_[l].array() / bc2).sqrt() + cfg.eps);
  }
}

}  // namespace causalrl
