#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace causalrl {

// Flat action index over (device, type) pairs: index = device * V + type.
struct ActionId {
  int index = 0;

  ActionId() = default;
  explicit ActionId(int idx) : index(idx) {}

  static ActionId from(int device, int type, int num_types) {
    return ActionId(device * num_types + type);
  }
  int device(int num_types) const { return index / num_types; }
  int type(int num_types) const { return index % num_types; }

  bool operator==(const ActionId& o) const { return index == o.index; }
};

// Observation layout: [active flags (N*V), onset ages / step_max (N*V)],
// both halves indexed by device-major flat index, all entries in [0,1].
struct Observation {
  std::vector<float> vec;

  int size() const { return static_cast<int>(vec.size()); }
  bool empty() const { return vec.empty(); }

  Eigen::VectorXd as_vector() const {
    Eigen::VectorXd x(vec.size());
    for (std::size_t i = 0; i < vec.size(); ++i) x(static_cast<int>(i)) = vec[i];
    return x;
  }
};

// Alarm counts and onset ages per (device, type); age > 0 iff count > 0.
struct EnvState {
  Eigen::MatrixXi counts;  // N x V
  Eigen::MatrixXi age;     // N x V
  int t = 0;

  int num_nodes() const { return static_cast<int>(counts.rows()); }
  int num_types() const { return static_cast<int>(counts.cols()); }

  int active_pairs() const {
    int c = 0;
    for (int n = 0; n < counts.rows(); ++n)
      for (int v = 0; v < counts.cols(); ++v)
        if (counts(n, v) > 0) ++c;
    return c;
  }
};

// One replay-buffer record. Observations may be left empty where a
// consumer only needs the type-level activity fields (the discovery
// buffer does this to keep long runs small).
struct Transition {
  Observation obs;
  ActionId action;
  double reward = 0.0;
  Observation next_obs;
  std::vector<std::uint8_t> treated_types;  // V, 1 iff that type was repaired
  std::vector<int> type_activity;           // devices active per type, before action
  std::vector<int> next_type_activity;      // same, at the next step
  bool done = false;

  int treated_type() const {
    for (std::size_t v = 0; v < treated_types.size(); ++v)
      if (treated_types[v]) return static_cast<int>(v);
    return -1;
  }
};

inline Observation make_observation(const EnvState& s, int step_max) {
  const int n = s.num_nodes(), v = s.num_types();
  Observation obs;
  obs.vec.resize(static_cast<std::size_t>(2) * n * v);
  for (int d = 0; d < n; ++d) {
    for (int ty = 0; ty < v; ++ty) {
      const int flat = d * v + ty;
      obs.vec[flat] = s.counts(d, ty) > 0 ? 1.0f : 0.0f;
      const double frac = static_cast<double>(s.age(d, ty)) / step_max;
      obs.vec[n * v + flat] = static_cast<float>(std::min(1.0, std::max(0.0, frac)));
    }
  }
  return obs;
}

}  // namespace causalrl
