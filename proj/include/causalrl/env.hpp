#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "causalrl/graph.hpp"
#include "causalrl/rng.hpp"
#include "causalrl/state.hpp"
#include "causalrl/topology.hpp"

namespace causalrl {

class EpisodeFinishedError : public std::logic_error {
 public:
  EpisodeFinishedError() : std::logic_error("step() called on a finished episode") {}
};

class DegenerateConfigError : public std::runtime_error {
 public:
  explicit DegenerateConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct EnvConfig {
  int num_nodes = 50;
  int num_types = 18;
  int step_max = 100;
  int max_hop = 2;
  double alpha_range[2] = {0.0001, 0.0013};
  double mu_range[2] = {0.0005, 0.0008};
  double kernel_kappa = 1.0;
  int warmup_time_range = 50;
  int root_cause_num = 50;
  int count_cap = 10;
  double boost_scale = 50.0;
  bool topology_free = false;

  int action_space() const { return num_nodes * num_types; }
  int observation_size() const { return 2 * num_nodes * num_types; }

  void validate() const {
    if (num_nodes < 1 || num_types < 1) throw std::invalid_argument("env: N and V must be >= 1");
    if (step_max < 1) throw std::invalid_argument("env: step_max must be >= 1");
    if (max_hop < 0) throw std::invalid_argument("env: max_hop must be >= 0");
    if (alpha_range[0] < 0 || alpha_range[1] < alpha_range[0])
      throw std::invalid_argument("env: bad alpha range");
    if (mu_range[0] < 0 || mu_range[1] < mu_range[0])
      throw std::invalid_argument("env: bad mu range");
    if (kernel_kappa <= 0.0 || kernel_kappa > 1.0)
      throw std::invalid_argument("env: kappa must be in (0,1]");
    if (warmup_time_range < 1) throw std::invalid_argument("env: warmup_time_range must be >= 1");
    if (root_cause_num < 1) throw std::invalid_argument("env: root_cause_num must be >= 1");
    if (count_cap < 1) throw std::invalid_argument("env: count_cap must be >= 1");
    if (boost_scale < 1.0) throw std::invalid_argument("env: boost_scale must be >= 1");
  }
};

// Excitation parameters sampled on the edges of the ground-truth graph:
// alpha[k](v', v) is the hop-k propagation intensity of edge v' -> v and
// is exactly zero wherever the edge is absent.
struct HawkesParams {
  Eigen::VectorXd mu;                  // V
  std::vector<Eigen::MatrixXd> alpha;  // (K+1) matrices, each V x V
};

struct StepResult {
  Observation next_obs;
  double reward = 0.0;
  bool done = false;
  int alarms_active = 0;
  int treated_type = -1;  // -1 when the action hit an inactive alarm
  int new_events = 0;
};

// Discrete-time fault-alarm MDP. Alarm counts evolve as a topological
// Hawkes process: counts persist until repaired, each step adds
// Poisson(lambda) fresh events per (device, type), and repair actions
// zero out one (device, type) cell.
class Environment {
 public:
  Environment(EnvConfig config, CausalGraph truth, Topology topology, Rng& rng)
      : cfg_(config), truth_(std::move(truth)) {
    cfg_.validate();
    if (truth_.num_types() != cfg_.num_types)
      throw std::invalid_argument("env: truth graph V does not match config");
    if (!truth_.is_acyclic()) throw std::invalid_argument("env: truth graph must be a DAG");
    if (cfg_.topology_free) {
      cfg_.max_hop = 1;
      topo_ = Topology::identity(cfg_.num_nodes, cfg_.max_hop);
    } else {
      if (topology.num_nodes() != cfg_.num_nodes)
        throw std::invalid_argument("env: topology N does not match config");
      if (topology.max_hop() < cfg_.max_hop)
        throw std::invalid_argument("env: topology built with fewer hops than config.max_hop");
      topo_ = std::move(topology);
    }
    sample_params(rng);
    state_.counts = Eigen::MatrixXi::Zero(cfg_.num_nodes, cfg_.num_types);
    state_.age = Eigen::MatrixXi::Zero(cfg_.num_nodes, cfg_.num_types);
    state_.t = 0;
    done_ = true;  // must reset before stepping
  }

  const EnvConfig& config() const { return cfg_; }
  const CausalGraph& truth_graph() const { return truth_; }
  const Topology& topology() const { return topo_; }
  const HawkesParams& params() const { return params_; }
  const EnvState& state() const { return state_; }
  bool done() const { return done_; }
  int t() const { return state_.t; }
  int active_alarms() const { return state_.active_pairs(); }

  // Test hook: freeze an arbitrary state (counts decide ages' validity).
  void set_state(const EnvState& s) {
    if (s.counts.rows() != cfg_.num_nodes || s.counts.cols() != cfg_.num_types)
      throw std::invalid_argument("env: state dimension mismatch");
    state_ = s;
    done_ = state_.active_pairs() == 0 || state_.t >= cfg_.step_max;
  }

  void override_params(HawkesParams p) { params_ = std::move(p); }

  std::vector<int> type_activity() const {
    std::vector<int> act(cfg_.num_types, 0);
    for (int v = 0; v < cfg_.num_types; ++v)
      for (int n = 0; n < cfg_.num_nodes; ++n)
        if (state_.counts(n, v) > 0) { ++act[v]; }
    return act;
  }

  // lambda_v(n, t) on the current counts:
  //   mu_v + sum_{v' in Pa_v} sum_{n'} sum_k alpha_{v',v,k} A_hat^k[n',n] kappa X[n',v']
  double intensity(int device, int type) const {
    if (device < 0 || device >= cfg_.num_nodes || type < 0 || type >= cfg_.num_types)
      throw std::invalid_argument("env: intensity index out of range");
    return intensity_matrix()(device, type);
  }

  Eigen::MatrixXd intensity_matrix() const {
    Eigen::MatrixXd lam = propagation_matrix(state_.counts);
    lam.rowwise() += params_.mu.transpose();
    return lam;
  }

  Observation reset(Rng& rng) {
    constexpr int kMaxRetries = 64;
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
      run_warmup(rng);
      if (state_.active_pairs() > 0) {
        state_.t = 0;
        done_ = false;
        return make_observation(state_, cfg_.step_max);
      }
    }
    throw DegenerateConfigError(
        "reset produced no active alarms after bounded retries; "
        "check mu/alpha ranges and root_cause_num");
  }

  StepResult step(ActionId action, Rng& rng) {
    if (done_) throw EpisodeFinishedError();
    if (action.index < 0 || action.index >= cfg_.action_space())
      throw std::invalid_argument("env: action index out of range");
    const int n = action.device(cfg_.num_types);
    const int v = action.type(cfg_.num_types);

    const int active_before = state_.active_pairs();

    StepResult res;
    if (state_.counts(n, v) > 0) {
      state_.counts(n, v) = 0;
      state_.age(n, v) = 0;
      res.treated_type = v;
    }

    // Fresh events from the post-intervention counts; counts persist
    // (no decay) and saturate at count_cap per cell.
    Eigen::MatrixXd lam = propagation_matrix(state_.counts);
    lam.rowwise() += params_.mu.transpose();
    res.new_events = add_poisson_events(lam, rng);

    advance_ages();

    const int active_after = state_.active_pairs();
    const double clear_frac =
        static_cast<double>(active_before - active_after) / active_before;
    const double raw = clear_frac - static_cast<double>(state_.t) / cfg_.step_max;
    res.reward = std::clamp(raw, -1.0, 1.0);

    state_.t += 1;
    done_ = (active_after == 0) || (state_.t >= cfg_.step_max);
    res.done = done_;
    res.alarms_active = active_after;
    res.next_obs = make_observation(state_, cfg_.step_max);
    return res;
  }

 private:
  void sample_params(Rng& rng) {
    std::uniform_real_distribution<double> mu_d(mu_range_lo(), mu_range_hi());
    std::uniform_real_distribution<double> alpha_d(cfg_.alpha_range[0], cfg_.alpha_range[1]);
    params_.mu.resize(cfg_.num_types);
    for (int v = 0; v < cfg_.num_types; ++v) params_.mu(v) = mu_d(rng);
    params_.alpha.assign(cfg_.max_hop + 1,
                         Eigen::MatrixXd::Zero(cfg_.num_types, cfg_.num_types));
    for (int from = 0; from < cfg_.num_types; ++from)
      for (int to = 0; to < cfg_.num_types; ++to)
        if (truth_.has_edge(from, to))
          for (int k = 0; k <= cfg_.max_hop; ++k) params_.alpha[k](from, to) = alpha_d(rng);
  }

  double mu_range_lo() const { return cfg_.mu_range[0]; }
  double mu_range_hi() const { return std::max(cfg_.mu_range[1], cfg_.mu_range[0]); }

  // kappa * sum_k (A_hat^k X) alpha_k, an N x V matrix of excitation terms.
  Eigen::MatrixXd propagation_matrix(const Eigen::MatrixXi& counts) const {
    const Eigen::MatrixXd x = counts.cast<double>();
    Eigen::MatrixXd prop = Eigen::MatrixXd::Zero(cfg_.num_nodes, cfg_.num_types);
    for (int k = 0; k <= cfg_.max_hop; ++k)
      prop.noalias() += (topo_.power(k) * x) * params_.alpha[k];
    return prop * cfg_.kernel_kappa;
  }

  int add_poisson_events(const Eigen::MatrixXd& lam, Rng& rng) {
    int total = 0;
    for (int n = 0; n < cfg_.num_nodes; ++n) {
      for (int v = 0; v < cfg_.num_types; ++v) {
        const double rate = lam(n, v);
        if (rate <= 0.0) continue;
        std::poisson_distribution<int> pois(rate);
        const int events = pois(rng);
        if (events > 0) {
          total += events;
          state_.counts(n, v) = std::min(cfg_.count_cap, state_.counts(n, v) + events);
        }
      }
    }
    return total;
  }

  void advance_ages() {
    for (int n = 0; n < cfg_.num_nodes; ++n)
      for (int v = 0; v < cfg_.num_types; ++v)
        state_.age(n, v) = state_.counts(n, v) > 0 ? state_.age(n, v) + 1 : 0;
  }

  // Episode seeding: exactly root_cause_num spontaneous root events are
  // scheduled over the warm-up window (uniform pre-step, uniform device,
  // type weighted by boost_scale * mu, uniform when all mu are zero) and
  // the cascade propagates between injections. The episode's own
  // spontaneous noise starts only after t = 0.
  void run_warmup(Rng& rng) {
    state_.counts.setZero();
    state_.age.setZero();
    state_.t = 0;

    std::vector<double> weights(cfg_.num_types);
    double total_w = 0.0;
    for (int v = 0; v < cfg_.num_types; ++v) {
      weights[v] = cfg_.boost_scale * params_.mu(v);
      total_w += weights[v];
    }
    if (total_w <= 0.0) weights.assign(cfg_.num_types, 1.0);

    std::discrete_distribution<int> type_d(weights.begin(), weights.end());
    std::uniform_int_distribution<int> device_d(0, cfg_.num_nodes - 1);
    std::uniform_int_distribution<int> when_d(0, cfg_.warmup_time_range - 1);

    std::vector<std::vector<std::pair<int, int>>> schedule(cfg_.warmup_time_range);
    for (int e = 0; e < cfg_.root_cause_num; ++e) {
      const int when = when_d(rng);
      const int device = device_d(rng);
      const int type = type_d(rng);
      schedule[when].emplace_back(device, type);
    }

    for (int tau = 0; tau < cfg_.warmup_time_range; ++tau) {
      for (auto [device, type] : schedule[tau])
        state_.counts(device, type) = std::min(cfg_.count_cap, state_.counts(device, type) + 1);
      const Eigen::MatrixXd lam = propagation_matrix(state_.counts);
      add_poisson_events(lam, rng);
      advance_ages();
    }
  }

  EnvConfig cfg_;
  CausalGraph truth_;
  Topology topo_;
  HawkesParams params_;
  EnvState state_;
  bool done_ = true;
};

}  // namespace causalrl
