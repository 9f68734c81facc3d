#pragma once

#include <stdexcept>

#include "causalrl/graph.hpp"

namespace causalrl {

// Directed-edge structure metrics. Accuracy classifies all V*(V-1)
// ordered pairs; SHD counts missing + extra edges over unordered pairs,
// a reversed edge costing 1.
struct GraphMetrics {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  int shd = 0;
};

inline GraphMetrics graph_metrics(const CausalGraph& pred, const CausalGraph& truth) {
  if (pred.num_types() != truth.num_types())
    throw std::invalid_argument("graph_metrics: dimension mismatch");
  if (pred.type_names() != truth.type_names())
    throw std::invalid_argument("graph_metrics: type orderings differ");
  const int v = pred.num_types();

  int tp = 0, fp = 0, fn = 0, mismatched = 0;
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < v; ++j) {
      if (i == j) continue;
      const bool p = pred.has_edge(i, j);
      const bool t = truth.has_edge(i, j);
      if (p && t) ++tp;
      if (p && !t) ++fp;
      if (!p && t) ++fn;
      if (p != t) ++mismatched;
    }
  }

  int shd = 0;
  for (int i = 0; i < v; ++i) {
    for (int j = i + 1; j < v; ++j) {
      const bool pf = pred.has_edge(i, j), pb = pred.has_edge(j, i);
      const bool tf = truth.has_edge(i, j), tb = truth.has_edge(j, i);
      const bool p_any = pf || pb, t_any = tf || tb;
      if (p_any != t_any) ++shd;                       // missing or extra
      else if (p_any && (pf != tf || pb != tb)) ++shd;  // reversed
    }
  }

  GraphMetrics m;
  m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  const int pairs = v * (v - 1);
  m.accuracy = pairs > 0 ? 1.0 - static_cast<double>(mismatched) / pairs : 1.0;
  m.shd = shd;
  return m;
}

}  // namespace causalrl
