#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "causalrl/graph.hpp"
#include "causalrl/state.hpp"

namespace causalrl {

// Per-state action filter. allow[a] refers to the flat (device, type)
// action index; k is the TopK width it was built with.
struct CausalMask {
  std::vector<std::uint8_t> allow;
  int k = 0;

  int allowed_count() const {
    int c = 0;
    for (auto b : allow) c += b;
    return c;
  }

  std::vector<int> allowed_actions() const {
    std::vector<int> out;
    for (std::size_t a = 0; a < allow.size(); ++a)
      if (allow[a]) out.push_back(static_cast<int>(a));
    return out;
  }
};

inline std::vector<std::uint8_t> active_flags_per_type(const Observation& obs, int num_nodes,
                                                       int num_types) {
  std::vector<std::uint8_t> active(num_types, 0);
  for (int n = 0; n < num_nodes; ++n)
    for (int v = 0; v < num_types; ++v)
      if (obs.vec[static_cast<std::size_t>(n) * num_types + v] > 0.5f) active[v] = 1;
  return active;
}

// Mask over direct repairs: restrict the graph to alarm types with
// activity, keep the first min(k, #active) types of its causal order,
// and allow exactly the active (device, type) repairs of those types.
// With no alarms anywhere every action stays available.
inline CausalMask build_mask(const CausalGraph& g, const Observation& obs, int k,
                             int num_nodes) {
  if (k < 1) throw std::invalid_argument("build_mask: k must be >= 1");
  const int v = g.num_types();
  if (static_cast<int>(obs.vec.size()) != 2 * num_nodes * v)
    throw std::invalid_argument("build_mask: observation size mismatch");

  CausalMask mask;
  mask.k = k;
  mask.allow.assign(static_cast<std::size_t>(num_nodes) * v, 0);

  const auto active = active_flags_per_type(obs, num_nodes, v);
  std::vector<int> active_types;
  for (int ty = 0; ty < v; ++ty)
    if (active[ty]) active_types.push_back(ty);

  if (active_types.empty()) {
    mask.allow.assign(mask.allow.size(), 1);
    return mask;
  }

  const CausalGraph sub = g.induced_subgraph(active_types);
  const std::vector<int> order = topological_order(sub);
  const int keep = std::min<int>(k, static_cast<int>(active_types.size()));
  std::vector<std::uint8_t> selected(v, 0);
  for (int i = 0; i < keep; ++i) selected[active_types[order[i]]] = 1;

  for (int n = 0; n < num_nodes; ++n) {
    for (int ty = 0; ty < v; ++ty) {
      if (!selected[ty]) continue;
      if (obs.vec[static_cast<std::size_t>(n) * v + ty] > 0.5f)
        mask.allow[static_cast<std::size_t>(n) * v + ty] = 1;
    }
  }
  return mask;
}

// All active (device, type) repairs, no graph involved. Used for the
// pure-intervention exploration phases and as the baseline "mask".
inline CausalMask active_alarm_mask(const Observation& obs, int num_nodes, int num_types) {
  CausalMask mask;
  mask.k = 0;
  mask.allow.assign(static_cast<std::size_t>(num_nodes) * num_types, 0);
  bool any = false;
  for (std::size_t a = 0; a < mask.allow.size(); ++a) {
    if (obs.vec[a] > 0.5f) {
      mask.allow[a] = 1;
      any = true;
    }
  }
  if (!any) mask.allow.assign(mask.allow.size(), 1);
  return mask;
}

// Renormalized masked softmax: blocked actions get exactly zero, the
// rest softmax over their logits. Stable for logits up to +-1e4.
inline Eigen::VectorXd masked_distribution(const Eigen::VectorXd& logits,
                                           const CausalMask& mask) {
  if (static_cast<std::size_t>(logits.size()) != mask.allow.size())
    throw std::invalid_argument("masked_distribution: size mismatch");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < logits.size(); ++a)
    if (mask.allow[a] && logits(a) > max_logit) max_logit = logits(a);
  if (!std::isfinite(max_logit))
    throw std::invalid_argument("masked_distribution: mask allows no action");

  Eigen::VectorXd probs = Eigen::VectorXd::Zero(logits.size());
  double total = 0.0;
  for (int a = 0; a < logits.size(); ++a) {
    if (!mask.allow[a]) continue;
    const double e = std::exp(logits(a) - max_logit);
    probs(a) = e;
    total += e;
  }
  probs /= total;
  return probs;
}

}  // namespace causalrl
