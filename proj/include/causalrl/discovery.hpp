#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "causalrl/graph.hpp"
#include "causalrl/state.hpp"

namespace causalrl {

struct DiscoveryConfig {
  double att_threshold = 0.05;  // per-step type-activity change units
  int n_min = 20;               // treated samples needed before a pair counts
  std::optional<double> score_penalty;  // default 0.5 * ln(T) at call time
  int max_prune_passes = 10;

  double effective_penalty(std::size_t num_transitions) const {
    if (score_penalty) return *score_penalty;
    return 0.5 * std::log(static_cast<double>(std::max<std::size_t>(num_transitions, 2)));
  }
};

// Pairwise treated-sample treatment-effect estimates.
struct AttMatrix {
  Eigen::MatrixXd att;   // att(i,j): effect of repairing type i on type j
  Eigen::MatrixXi n_treated;
  std::vector<std::vector<bool>> valid;

  int num_types() const { return static_cast<int>(att.rows()); }

  bool any_valid() const {
    for (const auto& row : valid)
      for (bool b : row)
        if (b) return true;
    return false;
  }
};

// Empirical outcome model for untreated transitions: for each type j,
// the mean next-step activity stratified by the current activity of j.
// Queries fall back to the nearest non-empty stratum.
class CounterfactualModel {
 public:
  explicit CounterfactualModel(int num_types) : bins_(num_types) {}

  int num_types() const { return static_cast<int>(bins_.size()); }

  void observe(int type, int activity, double next_activity) {
    auto& [sum, count] = bins_[type][activity];
    sum += next_activity;
    count += 1;
  }

  double predict(int type, int activity) const {
    const auto& m = bins_[type];
    if (m.empty()) return static_cast<double>(activity);  // persistence fallback
    auto it = m.find(activity);
    if (it != m.end()) return it->second.first / it->second.second;
    // nearest non-empty bin; ties resolve to the lower bin
    long best_dist = std::numeric_limits<long>::max();
    const std::pair<double, long>* best = nullptr;
    for (const auto& [bin, acc] : m) {
      const long d = std::abs(static_cast<long>(bin) - activity);
      if (d < best_dist) { best_dist = d; best = &acc; }
    }
    return best->first / best->second;
  }

  bool has_bin(int type, int activity) const {
    return bins_[type].count(activity) > 0;
  }

 private:
  std::vector<std::map<int, std::pair<double, long>>> bins_;
};

inline CounterfactualModel fit_counterfactual(std::span<const Transition> buffer) {
  if (buffer.empty()) throw std::invalid_argument("fit_counterfactual: empty buffer");
  const int v = static_cast<int>(buffer.front().type_activity.size());
  CounterfactualModel model(v);
  for (const auto& tr : buffer)
    for (int j = 0; j < v; ++j)
      if (!tr.treated_types[j])
        model.observe(j, tr.type_activity[j], tr.next_type_activity[j]);
  return model;
}

inline AttMatrix estimate_att(std::span<const Transition> buffer,
                              const CounterfactualModel& cf,
                              const DiscoveryConfig& config) {
  const int v = cf.num_types();
  AttMatrix out;
  out.att = Eigen::MatrixXd::Zero(v, v);
  out.n_treated = Eigen::MatrixXi::Zero(v, v);
  out.valid.assign(v, std::vector<bool>(v, false));

  for (const auto& tr : buffer) {
    const int i = tr.treated_type();
    if (i < 0) continue;
    for (int j = 0; j < v; ++j) {
      if (j == i) continue;
      const double observed = tr.next_type_activity[j];
      const double predicted = cf.predict(j, tr.type_activity[j]);
      out.att(i, j) += observed - predicted;
      out.n_treated(i, j) += 1;
    }
  }
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < v; ++j) {
      if (i == j) continue;
      if (out.n_treated(i, j) > 0) out.att(i, j) /= out.n_treated(i, j);
      out.valid[i][j] = out.n_treated(i, j) >= config.n_min;
    }
  }
  return out;
}

namespace detail {

// Remove cycles by deleting the lowest-weight edge on each remaining
// cycle (ties: lexicographically smallest edge). Weight -1 marks edges
// carried over without fresh evidence, so they break first.
inline void break_cycles(CausalGraph& g, const Eigen::MatrixXd& weight) {
  while (true) {
    auto cyc = g.find_cycle();
    if (!cyc) return;
    int best_i = -1, best_j = -1;
    double best_w = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a + 1 < cyc->size(); ++a) {
      const int i = (*cyc)[a], j = (*cyc)[a + 1];
      const double w = weight(i, j);
      if (w < best_w || (w == best_w && std::pair(i, j) < std::pair(best_i, best_j))) {
        best_w = w;
        best_i = i;
        best_j = j;
      }
    }
    g.remove_edge(best_i, best_j);
  }
}

}  // namespace detail

// Orientation: an edge i -> j is claimed when the pair has enough
// treated samples and |att| clears the threshold. Mutual claims keep the
// larger magnitude; remaining cycles are broken weakest-edge-first.
inline CausalGraph orient(const AttMatrix& att, const DiscoveryConfig& config,
                          std::vector<std::string> type_names = {}) {
  const int v = att.num_types();
  CausalGraph g(v, std::move(type_names));
  Eigen::MatrixXd weight = Eigen::MatrixXd::Constant(v, v, -1.0);
  for (int i = 0; i < v; ++i) {
    for (int j = i + 1; j < v; ++j) {
      const bool fwd = att.valid[i][j] && std::abs(att.att(i, j)) > config.att_threshold;
      const bool bwd = att.valid[j][i] && std::abs(att.att(j, i)) > config.att_threshold;
      if (fwd && bwd) {
        // a DAG admits no mutual ancestry; the weaker signal is noise
        if (std::abs(att.att(j, i)) > std::abs(att.att(i, j))) {
          g.add_edge(j, i);
          weight(j, i) = std::abs(att.att(j, i));
        } else {
          g.add_edge(i, j);
          weight(i, j) = std::abs(att.att(i, j));
        }
      } else if (fwd) {
        g.add_edge(i, j);
        weight(i, j) = std::abs(att.att(i, j));
      } else if (bwd) {
        g.add_edge(j, i);
        weight(j, i) = std::abs(att.att(j, i));
      }
    }
  }
  detail::break_cycles(g, weight);
  return g;
}

namespace detail {

inline double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Type-level view of a transition buffer for likelihood work.
struct ActivityView {
  int num_types = 0;
  Eigen::MatrixXd act;       // T x V current activity
  Eigen::MatrixXd growth;    // T x V next-step new activity, >= 0
  std::vector<std::vector<int>> untreated_rows;  // per type

  static ActivityView from(std::span<const Transition> buffer) {
    ActivityView view;
    if (buffer.empty()) return view;
    const int v = static_cast<int>(buffer.front().type_activity.size());
    const int t = static_cast<int>(buffer.size());
    view.num_types = v;
    view.act.resize(t, v);
    view.growth.resize(t, v);
    view.untreated_rows.assign(v, {});
    for (int r = 0; r < t; ++r) {
      const auto& tr = buffer[static_cast<std::size_t>(r)];
      for (int j = 0; j < v; ++j) {
        view.act(r, j) = tr.type_activity[j];
        view.growth(r, j) =
            std::max(0, tr.next_type_activity[j] - tr.type_activity[j]);
        if (!tr.treated_types[j]) view.untreated_rows[j].push_back(r);
      }
    }
    return view;
  }
};

// Poisson rate model lambda = softplus(b + w . parent_activity) fitted
// by damped Fisher scoring with a fixed iteration budget. Returns the
// maximized log-likelihood (including the log y! term). Rows sharing a
// feature vector are collapsed into weighted groups first; with binary
// activities that reduces tens of thousands of rows to a handful.
inline double fit_poisson_loglik(const ActivityView& view, int child,
                                 const std::vector<int>& parents) {
  const auto& rows = view.untreated_rows[child];
  const long total_rows = static_cast<long>(rows.size());
  if (total_rows == 0) return 0.0;
  const int p = static_cast<int>(parents.size()) + 1;

  double lgamma_term = 0.0;
  double y_total = 0.0;
  std::map<std::vector<double>, std::pair<double, double>> groups;  // x -> (n, sum y)
  {
    std::vector<double> key(parents.size());
    for (long r = 0; r < total_rows; ++r) {
      for (std::size_t c = 0; c < parents.size(); ++c)
        key[c] = view.act(rows[r], parents[c]);
      const double y = view.growth(rows[r], child);
      auto& acc = groups[key];
      acc.first += 1.0;
      acc.second += y;
      lgamma_term += std::lgamma(y + 1.0);
      y_total += y;
    }
  }

  const int n = static_cast<int>(groups.size());
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd count(n), ysum(n);
  {
    int r = 0;
    for (const auto& [key, acc] : groups) {
      x(r, 0) = 1.0;
      for (std::size_t c = 0; c < key.size(); ++c) x(r, static_cast<int>(c) + 1) = key[c];
      count(r) = acc.first;
      ysum(r) = acc.second;
      ++r;
    }
  }

  const double mean_y = std::max(y_total / total_rows, 1e-4);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  theta(0) = mean_y > 30.0 ? mean_y : std::log(std::expm1(mean_y));

  constexpr int kIterations = 30;
  constexpr double kRidge = 1e-8;
  constexpr double kMinRate = 1e-12;

  auto nll = [&](const Eigen::VectorXd& th) {
    const Eigen::VectorXd z = x * th;
    double acc = 0.0;
    for (int r = 0; r < n; ++r) {
      const double lam = std::max(softplus(z(r)), kMinRate);
      acc += count(r) * lam - ysum(r) * std::log(lam);
    }
    return acc;
  };

  double current = nll(theta);
  for (int it = 0; it < kIterations; ++it) {
    const Eigen::VectorXd z = x * theta;
    Eigen::VectorXd resid(n), fisher_w(n);
    for (int r = 0; r < n; ++r) {
      const double lam = std::max(softplus(z(r)), kMinRate);
      const double sig = sigmoid(z(r));
      resid(r) = sig * (count(r) - ysum(r) / lam);
      fisher_w(r) = count(r) * sig * sig / lam;
    }
    const Eigen::VectorXd grad = x.transpose() * resid;
    Eigen::MatrixXd hess = x.transpose() * fisher_w.asDiagonal() * x;
    hess.diagonal().array() += kRidge;
    const Eigen::VectorXd delta = hess.ldlt().solve(grad);

    double step = 1.0;
    bool improved = false;
    for (int half = 0; half < 12; ++half) {
      const Eigen::VectorXd cand = theta - step * delta;
      const double cand_nll = nll(cand);
      if (cand_nll < current) {
        theta = cand;
        current = cand_nll;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return -current - lgamma_term;
}

// Decomposed score with memoized per-child terms; prune re-queries the
// same (child, parent set) pairs constantly as edges come off.
class ScoreCache {
 public:
  ScoreCache(std::span<const Transition> buffer, const DiscoveryConfig& config)
      : view_(ActivityView::from(buffer)),
        penalty_(config.effective_penalty(buffer.size())) {}

  double child_loglik(int child, std::vector<int> parents) {
    std::sort(parents.begin(), parents.end());
    const auto key = std::pair(child, parents);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    const double ll = fit_poisson_loglik(view_, child, parents);
    memo_.emplace(key, ll);
    return ll;
  }

  double total_score(const CausalGraph& g) {
    double score = 0.0;
    for (int j = 0; j < g.num_types(); ++j) score += child_loglik(j, g.parents(j));
    return score - penalty_ * g.edge_count();
  }

  double penalty() const { return penalty_; }

 private:
  ActivityView view_;
  double penalty_;
  std::map<std::pair<int, std::vector<int>>, double> memo_;
};

}  // namespace detail

// Penalized log-likelihood of a candidate structure on the buffer:
//   sum_j loglik(growth_j | parent activities) - penalty * |E|.
inline double score_graph(const CausalGraph& g, std::span<const Transition> buffer,
                          const DiscoveryConfig& config) {
  if (!g.is_acyclic()) throw std::invalid_argument("score_graph: graph has a cycle");
  if (buffer.empty()) throw std::invalid_argument("score_graph: empty buffer");
  if (static_cast<int>(buffer.front().type_activity.size()) != g.num_types())
    throw std::invalid_argument("score_graph: type count mismatch");
  detail::ScoreCache cache(buffer, config);
  return cache.total_score(g);
}

// Greedy backward elimination: repeatedly delete the single edge whose
// removal most improves the score, until no deletion helps or the
// removal budget (max_prune_passes * |E|) is spent. Never adds edges.
inline CausalGraph prune(const CausalGraph& ancestor_graph,
                         std::span<const Transition> buffer,
                         const DiscoveryConfig& config) {
  if (!ancestor_graph.is_acyclic()) throw std::invalid_argument("prune: graph has a cycle");
  CausalGraph g = ancestor_graph;
  if (buffer.empty() || g.edge_count() == 0) return g;

  detail::ScoreCache cache(buffer, config);
  const int budget = config.max_prune_passes * g.edge_count();
  for (int removals = 0; removals < budget; ++removals) {
    double best_gain = 0.0;
    int best_i = -1, best_j = -1;
    for (auto [i, j] : g.edges()) {
      auto parents = g.parents(j);
      const double with_edge = cache.child_loglik(j, parents);
      parents.erase(std::find(parents.begin(), parents.end(), i));
      const double without_edge = cache.child_loglik(j, parents);
      const double gain = (without_edge - with_edge) + cache.penalty();
      if (gain > best_gain) {
        best_gain = gain;
        best_i = i;
        best_j = j;
      }
    }
    if (best_i < 0) break;
    g.remove_edge(best_i, best_j);
  }
  return g;
}

// One structure-update round: estimate treatment effects from the
// buffer, orient what the evidence supports, carry the current edges on
// pairs that lack evidence, and prune what the score rejects.
inline CausalGraph update_structure(const CausalGraph& current,
                                    std::span<const Transition> buffer,
                                    const DiscoveryConfig& config) {
  if (buffer.empty()) return current;
  const auto cf = fit_counterfactual(buffer);
  if (cf.num_types() != current.num_types())
    throw std::invalid_argument("update_structure: type count mismatch");
  const auto att = estimate_att(buffer, cf, config);
  if (!att.any_valid()) return current;

  CausalGraph g = orient(att, config, current.type_names());
  const int v = g.num_types();
  Eigen::MatrixXd weight = Eigen::MatrixXd::Constant(v, v, -1.0);
  for (int i = 0; i < v; ++i)
    for (int j = 0; j < v; ++j)
      if (g.has_edge(i, j)) weight(i, j) = std::abs(att.att(i, j));
  for (auto [i, j] : current.edges()) {
    if (!att.valid[i][j] && !g.has_edge(i, j) && !g.has_edge(j, i)) g.add_edge(i, j);
  }
  detail::break_cycles(g, weight);
  return prune(g, buffer, config);
}

}  // namespace causalrl
