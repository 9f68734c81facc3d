#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "causalrl/rng.hpp"

namespace causalrl {

// Small exact-arithmetic MDP used to verify the mask bounds numerically.
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Eigen::MatrixXd> transition;  // per state: A x S' rows summing to 1
  Eigen::MatrixXd reward;                   // S x A
  double gamma = 0.9;
  Eigen::VectorXd initial;                  // h0, sums to 1

  double r_max() const { return reward.cwiseAbs().maxCoeff(); }

  void validate() const {
    if (num_states < 1 || num_actions < 1)
      throw std::invalid_argument("mdp: empty state or action space");
    if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("mdp: gamma must be in [0,1)");
    if (static_cast<int>(transition.size()) != num_states)
      throw std::invalid_argument("mdp: transition size");
    for (const auto& rows : transition) {
      if (rows.rows() != num_actions || rows.cols() != num_states)
        throw std::invalid_argument("mdp: transition shape");
      for (int a = 0; a < num_actions; ++a)
        if (std::abs(rows.row(a).sum() - 1.0) > 1e-12)
          throw std::invalid_argument("mdp: transition row does not sum to 1");
    }
    if (reward.rows() != num_states || reward.cols() != num_actions)
      throw std::invalid_argument("mdp: reward shape");
    if (std::abs(initial.sum() - 1.0) > 1e-9)
      throw std::invalid_argument("mdp: initial distribution does not sum to 1");
  }
};

// Base policy plus a {0,1} mask; mask = 1 means the action stays
// available. The effective policy renormalizes base * mask per state.
struct MaskedTabularPolicy {
  Eigen::MatrixXd base;  // S x A, rows sum to 1
  Eigen::MatrixXi mask;  // S x A in {0,1}, each row has >= 1 one

  Eigen::MatrixXd effective() const {
    Eigen::MatrixXd out = base.cwiseProduct(mask.cast<double>());
    for (int s = 0; s < out.rows(); ++s) {
      const double z = out.row(s).sum();
      if (z <= 0.0) {
        // converged masked policies put no weight outside the mask; an
        // all-zero row means the base ignored every unmasked action, so
        // fall back to uniform over the unmasked set
        const double m = mask.row(s).sum();
        if (m <= 0.0) throw std::invalid_argument("masked policy: state with all actions masked");
        for (int a = 0; a < out.cols(); ++a) out(s, a) = mask(s, a) / m;
      } else {
        out.row(s) /= z;
      }
    }
    return out;
  }

  void validate() const {
    if (base.rows() != mask.rows() || base.cols() != mask.cols())
      throw std::invalid_argument("masked policy: shape mismatch");
    for (int s = 0; s < mask.rows(); ++s) {
      if (mask.row(s).sum() < 1)
        throw std::invalid_argument("masked policy: state with all actions masked");
      if (std::abs(base.row(s).sum() - 1.0) > 1e-9)
        throw std::invalid_argument("masked policy: base row does not sum to 1");
    }
  }
};

inline double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance: support mismatch");
  if (std::abs(p.sum() - 1.0) > 1e-9 || std::abs(q.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("tv_distance: inputs must be distributions");
  return 0.5 * (p - q).cwiseAbs().sum();
}

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double ratio() const { return rhs > 0.0 ? lhs / rhs : 0.0; }
};

// Per-state policy-distance bound: TV of the two masked policies against
// half of (mask L1 difference + count of jointly unmasked actions).
inline BoundCheck lemma1_check(const MaskedTabularPolicy& pol_true,
                               const MaskedTabularPolicy& pol_est, int state) {
  pol_true.validate();
  pol_est.validate();
  if (pol_true.base.cols() != pol_est.base.cols())
    throw std::invalid_argument("lemma1_check: action space mismatch");

  const Eigen::VectorXd p = pol_true.effective().row(state).transpose();
  const Eigen::VectorXd q = pol_est.effective().row(state).transpose();

  double mask_l1 = 0.0;
  int both_unmasked = 0;
  for (int a = 0; a < pol_true.mask.cols(); ++a) {
    mask_l1 += std::abs(pol_est.mask(state, a) - pol_true.mask(state, a));
    if (pol_true.mask(state, a) == 1 && pol_est.mask(state, a) == 1) ++both_unmasked;
  }

  BoundCheck out;
  out.lhs = tv_distance(p, q);
  out.rhs = 0.5 * (mask_l1 + both_unmasked);
  out.holds = out.lhs <= out.rhs + 1e-12;
  return out;
}

struct ValueResult {
  double value = 0.0;          // h0-weighted
  Eigen::VectorXd state_values;
  Eigen::MatrixXd occupancy;   // rho_pi(s, a), sums to 1
};

// Exact policy evaluation: direct solve of (I - gamma P_pi) V = R_pi and
// the discounted occupancy rho_pi = (1-gamma) * pi .* [(I - gamma P_pi^T)^-1 h0].
inline ValueResult exact_value(const TabularMDP& mdp, const Eigen::MatrixXd& policy) {
  mdp.validate();
  const int s_n = mdp.num_states, a_n = mdp.num_actions;
  if (policy.rows() != s_n || policy.cols() != a_n)
    throw std::invalid_argument("exact_value: policy shape mismatch");

  Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(s_n, s_n);
  Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(s_n);
  for (int s = 0; s < s_n; ++s) {
    for (int a = 0; a < a_n; ++a) {
      p_pi.row(s) += policy(s, a) * mdp.transition[s].row(a);
      r_pi(s) += policy(s, a) * mdp.reward(s, a);
    }
  }

  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(s_n, s_n) - mdp.gamma * p_pi;
  ValueResult out;
  out.state_values = lhs.partialPivLu().solve(r_pi);
  out.value = mdp.initial.dot(out.state_values);

  const Eigen::VectorXd h =
      (1.0 - mdp.gamma) *
      (Eigen::MatrixXd::Identity(s_n, s_n) - mdp.gamma * p_pi.transpose())
          .partialPivLu()
          .solve(mdp.initial);
  out.occupancy = h.asDiagonal() * policy;
  return out;
}

// Exact policy iteration over the unmasked actions only.
inline Eigen::MatrixXd masked_policy_iteration(const TabularMDP& mdp,
                                               const Eigen::MatrixXi& mask) {
  mdp.validate();
  const int s_n = mdp.num_states, a_n = mdp.num_actions;
  if (mask.rows() != s_n || mask.cols() != a_n)
    throw std::invalid_argument("policy iteration: mask shape mismatch");

  Eigen::MatrixXd policy = Eigen::MatrixXd::Zero(s_n, a_n);
  for (int s = 0; s < s_n; ++s) {
    const double m = mask.row(s).sum();
    if (m < 1) throw std::invalid_argument("policy iteration: state with all actions masked");
    for (int a = 0; a < a_n; ++a) policy(s, a) = mask(s, a) / m;
  }

  for (int iter = 0; iter < 1000; ++iter) {
    const ValueResult eval = exact_value(mdp, policy);
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(s_n, a_n);
    for (int s = 0; s < s_n; ++s) {
      int best = -1;
      double best_q = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < a_n; ++a) {
        if (!mask(s, a)) continue;
        const double q =
            mdp.reward(s, a) + mdp.gamma * mdp.transition[s].row(a).dot(eval.state_values);
        if (q > best_q + 1e-12) {
          best_q = q;
          best = a;
        }
      }
      next(s, best) = 1.0;
    }
    if (next == policy) break;
    policy = next;
  }
  return policy;
}

struct GapCheck {
  double gap = 0.0;
  double bound = 0.0;
  bool holds = false;
  double ratio() const { return bound > 0.0 ? gap / bound : 0.0; }
};

// Value-gap bound: V under the reference mask's optimal policy minus V
// under the other converged masked policy, against
// R_max/(1-gamma)^2 * max_s (mask L1 difference + jointly unmasked count).
inline GapCheck theorem3_check(const TabularMDP& mdp, const MaskedTabularPolicy& pol_true,
                               const MaskedTabularPolicy& pol_est) {
  pol_true.validate();
  pol_est.validate();
  const double v_true = exact_value(mdp, pol_true.effective()).value;
  const double v_est = exact_value(mdp, pol_est.effective()).value;

  double worst = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    double mask_l1 = 0.0;
    int both = 0;
    for (int a = 0; a < mdp.num_actions; ++a) {
      mask_l1 += std::abs(pol_est.mask(s, a) - pol_true.mask(s, a));
      if (pol_true.mask(s, a) == 1 && pol_est.mask(s, a) == 1) ++both;
    }
    worst = std::max(worst, mask_l1 + both);
  }

  GapCheck out;
  out.gap = v_true - v_est;
  out.bound = mdp.r_max() / ((1.0 - mdp.gamma) * (1.0 - mdp.gamma)) * worst;
  out.holds = out.gap <= out.bound + 1e-9;
  return out;
}

// --------------------------------------------------------------------------
// Random instance generators for the bound suites.

inline Eigen::VectorXd random_distribution(int n, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd p(n);
  for (int i = 0; i < n; ++i) p(i) = e(rng) + 1e-9;
  return p / p.sum();
}

inline Eigen::MatrixXi random_mask(int states, int actions, Rng& rng) {
  std::bernoulli_distribution keep(0.5);
  std::uniform_int_distribution<int> pick(0, actions - 1);
  Eigen::MatrixXi mask(states, actions);
  for (int s = 0; s < states; ++s) {
    int ones = 0;
    for (int a = 0; a < actions; ++a) {
      mask(s, a) = keep(rng) ? 1 : 0;
      ones += mask(s, a);
    }
    if (ones == 0) mask(s, pick(rng)) = 1;
  }
  return mask;
}

inline MaskedTabularPolicy random_masked_policy(int states, int actions, Rng& rng) {
  MaskedTabularPolicy pol;
  pol.base.resize(states, actions);
  for (int s = 0; s < states; ++s)
    pol.base.row(s) = random_distribution(actions, rng).transpose();
  pol.mask = random_mask(states, actions, rng);
  return pol;
}

inline TabularMDP random_mdp(Rng& rng, int max_states = 12, int max_actions = 6) {
  std::uniform_int_distribution<int> s_d(2, max_states), a_d(2, max_actions);
  std::uniform_real_distribution<double> g_d(0.5, 0.95), r_d(-1.0, 1.0);
  TabularMDP mdp;
  mdp.num_states = s_d(rng);
  mdp.num_actions = a_d(rng);
  mdp.gamma = g_d(rng);
  mdp.transition.resize(mdp.num_states);
  for (auto& rows : mdp.transition) {
    rows.resize(mdp.num_actions, mdp.num_states);
    for (int a = 0; a < mdp.num_actions; ++a)
      rows.row(a) = random_distribution(mdp.num_states, rng).transpose();
  }
  mdp.reward.resize(mdp.num_states, mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a) mdp.reward(s, a) = r_d(rng);
  mdp.initial = random_distribution(mdp.num_states, rng);
  return mdp;
}

struct BoundSuiteReport {
  int total = 0;
  int held = 0;
  double tightest_ratio = 0.0;  // worst-case lhs/rhs or gap/bound observed
};

inline BoundSuiteReport run_policy_distance_suite(int instances, Rng& rng) {
  BoundSuiteReport rep;
  std::uniform_int_distribution<int> s_d(1, 6), a_d(2, 8);
  for (int i = 0; i < instances; ++i) {
    const int states = s_d(rng), actions = a_d(rng);
    const auto pol_true = random_masked_policy(states, actions, rng);
    auto pol_est = random_masked_policy(states, actions, rng);
    std::uniform_int_distribution<int> state_d(0, states - 1);
    const auto check = lemma1_check(pol_true, pol_est, state_d(rng));
    rep.total += 1;
    rep.held += check.holds ? 1 : 0;
    rep.tightest_ratio = std::max(rep.tightest_ratio, check.ratio());
  }
  return rep;
}

inline BoundSuiteReport run_value_gap_suite(int instances, Rng& rng) {
  BoundSuiteReport rep;
  for (int i = 0; i < instances; ++i) {
    const TabularMDP mdp = random_mdp(rng);
    MaskedTabularPolicy pol_true, pol_est;
    pol_true.mask = random_mask(mdp.num_states, mdp.num_actions, rng);
    pol_est.mask = random_mask(mdp.num_states, mdp.num_actions, rng);
    pol_true.base = masked_policy_iteration(mdp, pol_true.mask);
    pol_est.base = masked_policy_iteration(mdp, pol_est.mask);
    const auto check = theorem3_check(mdp, pol_true, pol_est);
    rep.total += 1;
    rep.held += check.holds ? 1 : 0;
    rep.tightest_ratio = std::max(rep.tightest_ratio, check.ratio());
  }
  return rep;
}

}  // namespace causalrl
