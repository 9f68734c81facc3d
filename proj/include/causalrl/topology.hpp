#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "causalrl/rng.hpp"

namespace causalrl {

// Powers of the symmetrically normalized adjacency D^{-1/2} A D^{-1/2}.
// Degree-0 nodes get a zero normalization entry, which drops them from
// propagation instead of dividing by zero. Returns [I, A_hat, ..., A_hat^K].
inline std::vector<Eigen::MatrixXd> normalized_adjacency_powers(
    const Eigen::MatrixXd& adj, int max_hop) {
  const int n = static_cast<int>(adj.rows());
  if (adj.cols() != n) throw std::invalid_argument("adjacency must be square");
  if (max_hop < 0) throw std::invalid_argument("max_hop must be >= 0");
  for (int i = 0; i < n; ++i) {
    if (adj(i, i) != 0.0) throw std::invalid_argument("adjacency diagonal must be zero");
    for (int j = 0; j < n; ++j) {
      if (adj(i, j) != adj(j, i)) throw std::invalid_argument("adjacency must be symmetric");
      if (adj(i, j) != 0.0 && adj(i, j) != 1.0)
        throw std::invalid_argument("adjacency entries must be 0/1");
    }
  }
  Eigen::VectorXd dinv_sqrt(n);
  for (int i = 0; i < n; ++i) {
    const double deg = adj.row(i).sum();
    dinv_sqrt(i) = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  Eigen::MatrixXd norm = dinv_sqrt.asDiagonal() * adj * dinv_sqrt.asDiagonal();

  std::vector<Eigen::MatrixXd> powers;
  powers.reserve(max_hop + 1);
  powers.push_back(Eigen::MatrixXd::Identity(n, n));
  for (int k = 1; k <= max_hop; ++k) powers.push_back(powers.back() * norm);
  return powers;
}

// Device graph with precomputed normalized adjacency powers.
class Topology {
 public:
  Topology() = default;

  Topology(Eigen::MatrixXd adj, int max_hop)
      : adj_(std::move(adj)),
        powers_(normalized_adjacency_powers(adj_, max_hop)) {}

  // Identity propagation (used by the topology-free environment): every
  // hop matrix is I, so excitation never crosses devices.
  static Topology identity(int num_nodes, int max_hop) {
    Topology t;
    t.adj_ = Eigen::MatrixXd::Zero(num_nodes, num_nodes);
    t.powers_.assign(max_hop + 1, Eigen::MatrixXd::Identity(num_nodes, num_nodes));
    return t;
  }

  int num_nodes() const { return static_cast<int>(adj_.rows()); }
  int max_hop() const { return static_cast<int>(powers_.size()) - 1; }
  const Eigen::MatrixXd& adjacency() const { return adj_; }
  const std::vector<Eigen::MatrixXd>& norm_adj_powers() const { return powers_; }
  const Eigen::MatrixXd& power(int k) const { return powers_.at(k); }

 private:
  Eigen::MatrixXd adj_;
  std::vector<Eigen::MatrixXd> powers_;
};

// Random connected device graph: a random spanning tree plus independent
// extra edges with probability `edge_prob`.
inline Topology random_connected_topology(int num_nodes, double edge_prob, int max_hop,
                                          Rng& rng) {
  if (num_nodes < 1) throw std::invalid_argument("num_nodes must be >= 1");
  if (edge_prob < 0.0 || edge_prob > 1.0)
    throw std::invalid_argument("edge probability must be in [0,1]");
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(num_nodes, num_nodes);
  std::vector<int> perm(num_nodes);
  for (int i = 0; i < num_nodes; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int i = 1; i < num_nodes; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    const int j = pick(rng);
    adj(perm[i], perm[j]) = adj(perm[j], perm[i]) = 1.0;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < num_nodes; ++i)
    for (int j = i + 1; j < num_nodes; ++j)
      if (adj(i, j) == 0.0 && u(rng) < edge_prob) adj(i, j) = adj(j, i) = 1.0;
  return Topology(std::move(adj), max_hop);
}

inline Topology load_topology_csv(const std::string& path, int max_hop) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topology csv: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd adj(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != n)
      throw std::invalid_argument("topology csv is not square: " + path);
    for (int j = 0; j < n; ++j) adj(i, j) = rows[i][j];
  }
  return Topology(std::move(adj), max_hop);
}

inline void save_topology_csv(const Topology& topo, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write topology csv: " + path);
  const auto& a = topo.adjacency();
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) out << (j ? "," : "") << static_cast<int>(a(i, j));
    out << "\n";
  }
}

}  // namespace causalrl
