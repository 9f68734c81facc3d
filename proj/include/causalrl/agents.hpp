#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalrl/mask.hpp"
#include "causalrl/mlp.hpp"
#include "causalrl/rng.hpp"
#include "causalrl/state.hpp"

namespace causalrl {

enum class Algo { ppo, dqn };

inline std::string to_string(Algo a) { return a == Algo::ppo ? "ppo" : "dqn"; }

inline Algo algo_from_string(const std::string& s) {
  if (s == "ppo") return Algo::ppo;
  if (s == "dqn") return Algo::dqn;
  throw std::invalid_argument("unknown algo: " + s);
}

struct TrainConfig {
  Algo algo = Algo::ppo;
  double lr = 3e-4;
  double gamma = 0.99;
  int batch = 64;
  int hidden = 128;

  // ppo
  double clip = 0.2;
  int k_epochs = 50;
  int ppo_update_timestep = 256;
  double gae_lambda = 0.95;
  double entropy_coef = 0.01;
  double value_coef = 0.5;

  // dqn
  int replay_capacity = 100000;
  int dqn_update_timestep = 5;
  int target_sync = 100;
  double eps_greedy = 0.1;

  // exploration schedule
  double eta_causal = 0.3;  // 0.3 for ppo, 0.2 for dqn
  long random_sample_timestep = 512;
  int topk = 7;

  static TrainConfig defaults_for(Algo algo) {
    TrainConfig c;
    c.algo = algo;
    c.eta_causal = algo == Algo::ppo ? 0.3 : 0.2;
    return c;
  }

  void validate() const {
    if (lr <= 0 || gamma < 0 || gamma >= 1) throw std::invalid_argument("train: bad lr/gamma");
    if (batch < 1 || hidden < 1) throw std::invalid_argument("train: bad batch/hidden");
    if (clip <= 0 || clip >= 1) throw std::invalid_argument("train: clip must be in (0,1)");
    if (k_epochs < 1 || ppo_update_timestep < 1 || dqn_update_timestep < 1)
      throw std::invalid_argument("train: bad update cadence");
    if (gae_lambda < 0 || gae_lambda > 1) throw std::invalid_argument("train: bad gae lambda");
    if (replay_capacity < 1 || target_sync < 1) throw std::invalid_argument("train: bad dqn buffer");
    if (eps_greedy < 0 || eps_greedy > 1) throw std::invalid_argument("train: bad eps");
    if (eta_causal < 0 || eta_causal > 1) throw std::invalid_argument("train: bad eta");
    if (random_sample_timestep < 0) throw std::invalid_argument("train: bad warmup steps");
    if (topk < 1) throw std::invalid_argument("train: topk must be >= 1");
  }
};

inline int sample_uniform_allowed(const CausalMask& mask, Rng& rng) {
  const auto allowed = mask.allowed_actions();
  if (allowed.empty()) throw std::logic_error("mask allows no action");
  std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
  return allowed[pick(rng)];
}

inline int sample_from_distribution(const Eigen::VectorXd& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  for (int a = 0; a < probs.size(); ++a) {
    r -= probs(a);
    if (r <= 0.0) return a;
  }
  for (int a = static_cast<int>(probs.size()) - 1; a >= 0; --a)
    if (probs(a) > 0.0) return a;
  throw std::logic_error("empty distribution");
}

// ---------------------------------------------------------------------------
// PPO

// One rollout slot. `mask` is the support the behavior draw was confined
// to (causal mask for policy draws, active-alarm mask for exploration
// draws); the update reuses it so old and new distributions agree on
// which actions carry zero probability.
struct RolloutEntry {
  Eigen::VectorXd obs;
  Eigen::VectorXd next_obs;
  int action = 0;
  double logp_old = 0.0;
  double reward = 0.0;
  bool done = false;
  CausalMask mask;
};

struct PpoDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  bool aborted = false;
};

struct ActionChoice {
  ActionId action;
  double logp = 0.0;
  CausalMask effective_mask;
  bool exploratory = false;
};

// Behavior policy of Algorithm-style training: pure intervention
// sampling for the first random_sample_timestep environment steps, then
// an eta-mix of uniform intervention draws and the masked policy.
inline ActionChoice ppo_select_action(const Mlp& net, const Observation& obs,
                                      const CausalMask& causal_mask,
                                      const CausalMask& active_mask,
                                      const TrainConfig& cfg, long env_step, Rng& rng) {
  ActionChoice out;
  const Eigen::VectorXd obs_vec = obs.as_vector();
  const Eigen::VectorXd head = net.forward_one(obs_vec);
  const int num_actions = static_cast<int>(head.size()) - 1;
  const Eigen::VectorXd logits = head.head(num_actions);

  bool explore = env_step < cfg.random_sample_timestep;
  if (!explore && cfg.eta_causal > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    explore = u(rng) < cfg.eta_causal;
  }

  if (explore) {
    out.exploratory = true;
    out.effective_mask = active_mask;
    out.action = ActionId(sample_uniform_allowed(active_mask, rng));
  } else {
    out.effective_mask = causal_mask;
    const Eigen::VectorXd probs = masked_distribution(logits, causal_mask);
    out.action = ActionId(sample_from_distribution(probs, rng));
  }
  const Eigen::VectorXd probs = masked_distribution(logits, out.effective_mask);
  out.logp = std::log(std::max(probs(out.action.index), 1e-300));
  return out;
}

namespace detail {

struct PpoBatchResult {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  MlpGradients grads;

  double total_loss(const TrainConfig& cfg) const {
    return policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy;
  }
};

// One forward/backward pass of the clipped-surrogate objective over the
// given minibatch, with fixed advantages and value targets.
inline PpoBatchResult ppo_batch_pass(const Mlp& net, const std::vector<RolloutEntry>& rollout,
                                     const std::vector<int>& batch_index,
                                     const Eigen::VectorXd& advantages,
                                     const Eigen::VectorXd& returns, const TrainConfig& cfg) {
  const int bsize = static_cast<int>(batch_index.size());
  const int num_actions = net.output_dim() - 1;
  Eigen::MatrixXd bobs(bsize, net.input_dim());
  for (int b = 0; b < bsize; ++b) bobs.row(b) = rollout[batch_index[b]].obs.transpose();

  Mlp::Cache cache;
  const Eigen::MatrixXd out = net.forward(bobs, &cache);
  Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(bsize, net.output_dim());

  PpoBatchResult res;
  const double inv_b = 1.0 / bsize;
  for (int b = 0; b < bsize; ++b) {
    const RolloutEntry& e = rollout[batch_index[b]];
    const Eigen::VectorXd logits = out.row(b).head(num_actions).transpose();
    const Eigen::VectorXd probs = masked_distribution(logits, e.mask);
    const double p_a = std::max(probs(e.action), 1e-300);
    const double logp_new = std::log(p_a);
    const double ratio = std::exp(logp_new - e.logp_old);
    const double adv = advantages(batch_index[b]);

    const double surr1 = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double surr2 = clipped * adv;
    res.policy_loss += -std::min(surr1, surr2) * inv_b;

    // gradient of -min(surr1, surr2) wrt logp_new; a binding clip zeroes
    // the sample's policy gradient
    double dlogp = 0.0;
    if (surr1 <= surr2) dlogp = -ratio * adv;
    else if (ratio > 1.0 - cfg.clip && ratio < 1.0 + cfg.clip) dlogp = -ratio * adv;

    double ent = 0.0;
    for (int a = 0; a < num_actions; ++a)
      if (probs(a) > 0.0) ent -= probs(a) * std::log(probs(a));
    res.entropy += ent * inv_b;

    for (int a = 0; a < num_actions; ++a) {
      if (!e.mask.allow[a]) continue;
      const double onehot = a == e.action ? 1.0 : 0.0;
      double g = dlogp * (onehot - probs(a));
      if (probs(a) > 0.0)
        g -= cfg.entropy_coef * (-probs(a) * (std::log(probs(a)) + ent));
      dout(b, a) = g * inv_b;
    }

    const double v = out(b, num_actions);
    const double verr = v - returns(batch_index[b]);
    res.value_loss += verr * verr * inv_b;
    dout(b, num_actions) = cfg.value_coef * 2.0 * verr * inv_b;
  }
  res.grads = net.backward(cache, dout);
  return res;
}

struct GaeResult {
  Eigen::VectorXd advantages;      // normalized
  Eigen::VectorXd returns;
};

inline GaeResult compute_gae(const Mlp& net, const std::vector<RolloutEntry>& rollout,
                             const TrainConfig& cfg) {
  const int n = static_cast<int>(rollout.size());
  const int value_col = net.output_dim() - 1;
  Eigen::MatrixXd obs(n, net.input_dim()), next_obs(n, net.input_dim());
  for (int i = 0; i < n; ++i) {
    obs.row(i) = rollout[i].obs.transpose();
    next_obs.row(i) = rollout[i].next_obs.transpose();
  }
  const Eigen::VectorXd values = net.forward(obs).col(value_col);
  const Eigen::VectorXd next_values = net.forward(next_obs).col(value_col);

  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double gae = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    const double not_done = rollout[i].done ? 0.0 : 1.0;
    const double delta = rollout[i].reward + cfg.gamma * not_done * next_values(i) - values(i);
    gae = delta + cfg.gamma * cfg.gae_lambda * not_done * gae;
    out.advantages(i) = gae;
    out.returns(i) = gae + values(i);
  }
  const double mean = out.advantages.mean();
  const double std =
      std::sqrt((out.advantages.array() - mean).square().sum() / std::max(1, n - 1));
  out.advantages = (out.advantages.array() - mean) / (std + 1e-8);
  return out;
}

}  // namespace detail

// Clipped-surrogate update with GAE(lambda) advantages, value MSE and an
// entropy bonus, k_epochs passes over shuffled minibatches. The stored
// per-step masks define both distributions. A non-finite loss restores
// the pre-update parameters and reports the abort.
inline PpoDiagnostics ppo_update(Mlp& net, AdamState& adam,
                                 const std::vector<RolloutEntry>& rollout,
                                 const TrainConfig& cfg, Rng& rng) {
  if (rollout.empty()) throw std::invalid_argument("ppo_update: empty rollout");
  const int n = static_cast<int>(rollout.size());

  const detail::GaeResult gae = detail::compute_gae(net, rollout, cfg);

  // snapshot for abort-and-restore
  const Mlp backup = net;

  PpoDiagnostics diag;
  long batches_done = 0;
  std::vector<int> index(n);
  for (int i = 0; i < n; ++i) index[i] = i;

  AdamConfig ac;
  ac.lr = cfg.lr;
  for (int epoch = 0; epoch < cfg.k_epochs; ++epoch) {
    std::shuffle(index.begin(), index.end(), rng);
    for (int start = 0; start < n; start += cfg.batch) {
      const int bsize = std::min(cfg.batch, n - start);
      const std::vector<int> batch(index.begin() + start, index.begin() + start + bsize);
      const detail::PpoBatchResult res =
          detail::ppo_batch_pass(net, rollout, batch, gae.advantages, gae.returns, cfg);
      if (!std::isfinite(res.total_loss(cfg))) {
        net = backup;
        diag.aborted = true;
        return diag;
      }
      adam_step(net, res.grads, adam, ac);
      diag.policy_loss += res.policy_loss;
      diag.value_loss += res.value_loss;
      diag.entropy += res.entropy;
      ++batches_done;
    }
  }
  if (batches_done > 0) {
    diag.policy_loss /= batches_done;
    diag.value_loss /= batches_done;
    diag.entropy /= batches_done;
  }
  if (!net.finite()) {
    net = backup;
    diag.aborted = true;
  }
  return diag;
}

class PpoAgent {
 public:
  PpoAgent(int obs_dim, int num_actions, TrainConfig cfg, Rng& init_rng)
      : cfg_(cfg),
        net_({obs_dim, cfg.hidden, cfg.hidden, num_actions + 1}, init_rng),
        adam_(net_) {
    cfg_.validate();
  }

  const TrainConfig& config() const { return cfg_; }
  const Mlp& net() const { return net_; }
  Mlp& mutable_net() { return net_; }

  ActionChoice select(const Observation& obs, const CausalMask& causal_mask,
                      const CausalMask& active_mask, long env_step, Rng& rng) {
    return ppo_select_action(net_, obs, causal_mask, active_mask, cfg_, env_step, rng);
  }

  void record(RolloutEntry entry) { rollout_.push_back(std::move(entry)); }
  bool ready() const { return static_cast<int>(rollout_.size()) >= cfg_.ppo_update_timestep; }

  PpoDiagnostics update(Rng& rng) {
    const auto diag = ppo_update(net_, adam_, rollout_, cfg_, rng);
    rollout_.clear();
    return diag;
  }

 private:
  TrainConfig cfg_;
  Mlp net_;
  AdamState adam_;
  std::vector<RolloutEntry> rollout_;
};

// ---------------------------------------------------------------------------
// DQN

struct ReplayEntry {
  Eigen::VectorXf obs;
  Eigen::VectorXf next_obs;
  int action = 0;
  double reward = 0.0;
  bool done = false;
  std::vector<std::uint8_t> next_allow;  // action filter at the next state
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(ReplayEntry e) {
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back(std::move(e));
  }

  std::size_t size() const { return entries_.size(); }
  const ReplayEntry& operator[](std::size_t i) const { return entries_[i]; }

 private:
  std::size_t capacity_;
  std::deque<ReplayEntry> entries_;
};

inline double masked_max(const Eigen::RowVectorXd& q, const std::vector<std::uint8_t>& allow) {
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < q.size(); ++a)
    if (allow[a] && q(a) > best) best = q(a);
  if (!std::isfinite(best)) throw std::logic_error("masked_max: nothing allowed");
  return best;
}

inline ActionChoice dqn_select_action(const Mlp& net, const Observation& obs,
                                      const CausalMask& causal_mask,
                                      const CausalMask& active_mask,
                                      const TrainConfig& cfg, long env_step, Rng& rng) {
  ActionChoice out;
  bool explore = env_step < cfg.random_sample_timestep;
  if (!explore && cfg.eta_causal > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    explore = u(rng) < cfg.eta_causal;
  }
  if (explore) {
    out.exploratory = true;
    out.effective_mask = active_mask;
    out.action = ActionId(sample_uniform_allowed(active_mask, rng));
    return out;
  }

  out.effective_mask = causal_mask;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < cfg.eps_greedy) {
    out.action = ActionId(sample_uniform_allowed(causal_mask, rng));
    return out;
  }
  const Eigen::VectorXd q = net.forward_one(obs.as_vector());
  int best = -1;
  double best_q = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < q.size(); ++a) {
    if (causal_mask.allow[a] && q(a) > best_q) {
      best_q = q(a);
      best = a;
    }
  }
  out.action = ActionId(best);
  return out;
}

// TD(0) update on a uniform batch; the bootstrap max ranges over the
// actions allowed at the next state, and terminal targets are plain r.
inline void dqn_update(Mlp& net, const Mlp& target_net, const ReplayBuffer& buffer,
                       const TrainConfig& cfg, AdamState& adam, Rng& rng) {
  if (buffer.size() < static_cast<std::size_t>(cfg.batch))
    throw std::invalid_argument("dqn_update: buffer smaller than batch");
  const int obs_dim = net.input_dim();
  const int num_actions = net.output_dim();

  std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
  std::vector<std::size_t> chosen(cfg.batch);
  for (auto& c : chosen) c = pick(rng);

  Eigen::MatrixXd obs(cfg.batch, obs_dim), next_obs(cfg.batch, obs_dim);
  for (int b = 0; b < cfg.batch; ++b) {
    obs.row(b) = buffer[chosen[b]].obs.cast<double>().transpose();
    next_obs.row(b) = buffer[chosen[b]].next_obs.cast<double>().transpose();
  }

  const Eigen::MatrixXd next_q = target_net.forward(next_obs);
  Mlp::Cache cache;
  const Eigen::MatrixXd q = net.forward(obs, &cache);

  Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(cfg.batch, num_actions);
  const double inv_b = 1.0 / cfg.batch;
  for (int b = 0; b < cfg.batch; ++b) {
    const ReplayEntry& e = buffer[chosen[b]];
    double target = e.reward;
    if (!e.done) target += cfg.gamma * masked_max(next_q.row(b), e.next_allow);
    const double err = q(b, e.action) - target;
    dout(b, e.action) = 2.0 * err * inv_b;
  }

  const MlpGradients grads = net.backward(cache, dout);
  AdamConfig ac;
  ac.lr = cfg.lr;
  adam_step(net, grads, adam, ac);
}

class DqnAgent {
 public:
  DqnAgent(int obs_dim, int num_actions, TrainConfig cfg, Rng& init_rng)
      : cfg_(cfg),
        net_({obs_dim, cfg.hidden, cfg.hidden, num_actions}, init_rng),
        target_(net_),
        adam_(net_),
        replay_(static_cast<std::size_t>(cfg.replay_capacity)) {
    cfg_.validate();
  }

  const TrainConfig& config() const { return cfg_; }
  const Mlp& net() const { return net_; }
  ReplayBuffer& replay() { return replay_; }

  ActionChoice select(const Observation& obs, const CausalMask& causal_mask,
                      const CausalMask& active_mask, long env_step, Rng& rng) {
    return dqn_select_action(net_, obs, causal_mask, active_mask, cfg_, env_step, rng);
  }

  bool ready() const { return replay_.size() >= static_cast<std::size_t>(cfg_.batch); }

  void update(Rng& rng) {
    dqn_update(net_, target_, replay_, cfg_, adam_, rng);
    ++updates_;
    if (updates_ % cfg_.target_sync == 0) target_ = net_;
  }

 private:
  TrainConfig cfg_;
  Mlp net_;
  Mlp target_;
  AdamState adam_;
  ReplayBuffer replay_;
  long updates_ = 0;
};

}  // namespace causalrl
