#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "causalrl/rng.hpp"

namespace causalrl {

class CyclicGraphError : public std::runtime_error {
 public:
  explicit CyclicGraphError(const std::string& what) : std::runtime_error(what) {}
};

// Directed graph over alarm types. Edges point cause -> effect.
// Construction does not force acyclicity (learned intermediates may
// transiently hold cycles); is_acyclic()/topological_order() check it.
class CausalGraph {
 public:
  CausalGraph() = default;

  explicit CausalGraph(int num_types, std::vector<std::string> type_names = {})
      : v_(num_types), adj_(static_cast<std::size_t>(num_types) * num_types, 0),
        names_(std::move(type_names)) {
    if (num_types < 0) throw std::invalid_argument("num_types must be >= 0");
    if (names_.empty()) {
      names_.reserve(v_);
      for (int i = 0; i < v_; ++i) names_.push_back("s" + std::to_string(i));
    }
    if (static_cast<int>(names_.size()) != v_)
      throw std::invalid_argument("type_names size does not match num_types");
    for (int i = 0; i < v_; ++i)
      for (int j = i + 1; j < v_; ++j)
        if (names_[i] == names_[j])
          throw std::invalid_argument("duplicate type name: " + names_[i]);
  }

  int num_types() const { return v_; }
  const std::vector<std::string>& type_names() const { return names_; }

  bool has_edge(int i, int j) const { return adj_[idx(i, j)] != 0; }

  void set_edge(int i, int j, bool present) {
    check_pair(i, j);
    if (i == j && present) throw std::invalid_argument("self-loops are not allowed");
    adj_[idx(i, j)] = present ? 1 : 0;
  }

  void add_edge(int i, int j) { set_edge(i, j, true); }
  void remove_edge(int i, int j) { set_edge(i, j, false); }

  int edge_count() const {
    int c = 0;
    for (auto b : adj_) c += b;
    return c;
  }

  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < v_; ++i)
      for (int j = 0; j < v_; ++j)
        if (has_edge(i, j)) out.emplace_back(i, j);
    return out;
  }

  std::vector<int> parents(int j) const {
    std::vector<int> out;
    for (int i = 0; i < v_; ++i)
      if (has_edge(i, j)) out.push_back(i);
    return out;
  }

  std::vector<int> children(int i) const {
    std::vector<int> out;
    for (int j = 0; j < v_; ++j)
      if (has_edge(i, j)) out.push_back(j);
    return out;
  }

  // Reflexive-free transitive closure: anc[i][j] = true iff a directed
  // path i -> ... -> j exists.
  std::vector<std::vector<bool>> ancestor_matrix() const {
    std::vector<std::vector<bool>> r(v_, std::vector<bool>(v_, false));
    for (int i = 0; i < v_; ++i)
      for (int j = 0; j < v_; ++j) r[i][j] = has_edge(i, j);
    for (int k = 0; k < v_; ++k)
      for (int i = 0; i < v_; ++i)
        if (r[i][k])
          for (int j = 0; j < v_; ++j)
            if (r[k][j]) r[i][j] = true;
    return r;
  }

  bool is_acyclic() const {
    std::vector<int> order;
    return kahn(order);
  }

  // Deterministic cycle lookup: returns one directed cycle as a node
  // sequence (first == last), or nullopt if the graph is a DAG.
  std::optional<std::vector<int>> find_cycle() const {
    std::vector<int> state(v_, 0);  // 0 unvisited, 1 on stack, 2 done
    std::vector<int> stack;
    std::optional<std::vector<int>> found;
    for (int s = 0; s < v_ && !found; ++s) {
      if (state[s] == 0) dfs_cycle(s, state, stack, found);
    }
    return found;
  }

  CausalGraph induced_subgraph(const std::vector<int>& keep) const {
    std::vector<std::string> names;
    names.reserve(keep.size());
    for (int i : keep) names.push_back(names_[i]);
    CausalGraph g(static_cast<int>(keep.size()), names);
    for (std::size_t a = 0; a < keep.size(); ++a)
      for (std::size_t b = 0; b < keep.size(); ++b)
        if (a != b && has_edge(keep[a], keep[b])) g.add_edge(static_cast<int>(a), static_cast<int>(b));
    return g;
  }

  bool operator==(const CausalGraph& o) const {
    return v_ == o.v_ && adj_ == o.adj_ && names_ == o.names_;
  }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * v_ + j; }

  void check_pair(int i, int j) const {
    if (i < 0 || j < 0 || i >= v_ || j >= v_)
      throw std::invalid_argument("type index out of range");
  }

  bool kahn(std::vector<int>& order) const {
    std::vector<int> indeg(v_, 0);
    for (int i = 0; i < v_; ++i)
      for (int j = 0; j < v_; ++j)
        if (has_edge(i, j)) ++indeg[j];
    order.clear();
    std::vector<bool> used(v_, false);
    for (int step = 0; step < v_; ++step) {
      int pick = -1;
      for (int i = 0; i < v_; ++i) {
        if (!used[i] && indeg[i] == 0) { pick = i; break; }
      }
      if (pick < 0) return false;
      used[pick] = true;
      order.push_back(pick);
      for (int j = 0; j < v_; ++j)
        if (has_edge(pick, j)) --indeg[j];
    }
    return true;
  }

  void dfs_cycle(int u, std::vector<int>& state, std::vector<int>& stack,
                 std::optional<std::vector<int>>& found) const {
    state[u] = 1;
    stack.push_back(u);
    for (int v = 0; v < v_ && !found; ++v) {
      if (!has_edge(u, v)) continue;
      if (state[v] == 1) {
        std::vector<int> cyc;
        auto it = std::find(stack.begin(), stack.end(), v);
        cyc.assign(it, stack.end());
        cyc.push_back(v);
        found = cyc;
        return;
      }
      if (state[v] == 0) dfs_cycle(v, state, stack, found);
    }
    stack.pop_back();
    state[u] = 2;
  }

  friend std::vector<int> topological_order(const CausalGraph& g);

  int v_ = 0;
  std::vector<std::uint8_t> adj_;
  std::vector<std::string> names_;
};

// Topological order with deterministic tie-break: among ready nodes the
// smallest type index goes first. Throws CyclicGraphError naming one
// cycle if the graph is not a DAG.
inline std::vector<int> topological_order(const CausalGraph& g) {
  std::vector<int> order;
  if (!g.kahn(order)) {
    auto cyc = g.find_cycle();
    std::ostringstream msg;
    msg << "graph contains a cycle:";
    if (cyc) {
      for (std::size_t i = 0; i < cyc->size(); ++i)
        msg << (i ? " -> " : " ") << g.type_names()[(*cyc)[i]];
    }
    throw CyclicGraphError(msg.str());
  }
  return order;
}

// Random DAG: edges drawn independently with probability p, directed
// along a random permutation so the result is always acyclic.
inline CausalGraph random_dag(int num_types, double edge_prob, Rng& rng,
                              std::vector<std::string> names = {}) {
  if (edge_prob < 0.0 || edge_prob > 1.0)
    throw std::invalid_argument("edge probability must be in [0,1]");
  CausalGraph g(num_types, std::move(names));
  std::vector<int> perm(num_types);
  for (int i = 0; i < num_types; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int a = 0; a < num_types; ++a)
    for (int b = a + 1; b < num_types; ++b)
      if (u(rng) < edge_prob) g.add_edge(perm[a], perm[b]);
  return g;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t b = cell.find_first_not_of(' ');
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace detail

// Graph file format, two accepted layouts:
//  - edge list: header `cause,effect`, one named edge per row; the type
//    universe is the names in first-appearance order unless an explicit
//    universe is supplied.
//  - adjacency: first header cell `adj`, remaining header cells are the
//    type names, each following row is `name,0/1,...`.
inline CausalGraph load_graph_csv(std::istream& in,
                                  const std::vector<std::string>& universe = {}) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("graph csv: empty file");
  auto header = detail::split_csv_line(line);
  if (header.empty()) throw std::invalid_argument("graph csv: empty header");

  if (header[0] == "adj") {
    std::vector<std::string> names(header.begin() + 1, header.end());
    const int v = static_cast<int>(names.size());
    CausalGraph g(v, names);
    int row = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      auto cells = detail::split_csv_line(line);
      if (static_cast<int>(cells.size()) != v + 1)
        throw std::invalid_argument("graph csv: bad adjacency row width");
      if (row >= v) throw std::invalid_argument("graph csv: too many adjacency rows");
      if (cells[0] != names[row])
        throw std::invalid_argument("graph csv: adjacency row label mismatch: " + cells[0]);
      for (int j = 0; j < v; ++j) {
        if (cells[j + 1] == "1") g.set_edge(row, j, true);
        else if (cells[j + 1] != "0")
          throw std::invalid_argument("graph csv: adjacency entries must be 0/1");
      }
      ++row;
    }
    if (row != v) throw std::invalid_argument("graph csv: missing adjacency rows");
    return g;
  }

  if (header.size() != 2 || header[0] != "cause" || header[1] != "effect")
    throw std::invalid_argument("graph csv: expected `cause,effect` or `adj,...` header");

  std::vector<std::pair<std::string, std::string>> rows;
  std::vector<std::string> names = universe;
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = static_cast<int>(i);
  auto intern = [&](const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    if (!universe.empty())
      throw std::invalid_argument("graph csv: unknown type name `" + name + "`");
    int id = static_cast<int>(names.size());
    names.push_back(name);
    index[name] = id;
    return id;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != 2) throw std::invalid_argument("graph csv: bad edge row: " + line);
    rows.emplace_back(cells[0], cells[1]);
  }
  for (auto& [c, e] : rows) { intern(c); intern(e); }
  CausalGraph g(static_cast<int>(names.size()), names);
  for (auto& [c, e] : rows) g.add_edge(index[c], index[e]);
  return g;
}

inline CausalGraph load_graph_csv(const std::string& path,
                                  const std::vector<std::string>& universe = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph csv: " + path);
  try {
    return load_graph_csv(in, universe);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(e.what()) + " [" + path + "]");
  }
}

inline void save_graph_edge_list(const CausalGraph& g, std::ostream& out) {
  out << "cause,effect\n";
  for (auto [i, j] : g.edges())
    out << g.type_names()[i] << "," << g.type_names()[j] << "\n";
}

// Adjacency layout keeps isolated types, so arbitrary graphs round-trip.
inline void save_graph_adjacency(const CausalGraph& g, std::ostream& out) {
  out << "adj";
  for (auto& n : g.type_names()) out << "," << n;
  out << "\n";
  for (int i = 0; i < g.num_types(); ++i) {
    out << g.type_names()[i];
    for (int j = 0; j < g.num_types(); ++j) out << "," << (g.has_edge(i, j) ? 1 : 0);
    out << "\n";
  }
}

inline void save_graph_adjacency(const CausalGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write graph csv: " + path);
  save_graph_adjacency(g, out);
}

// Reindex `g` onto the type ordering of `universe` (matched by name).
inline CausalGraph align_to_universe(const CausalGraph& g,
                                     const std::vector<std::string>& universe) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < universe.size(); ++i) index[universe[i]] = static_cast<int>(i);
  CausalGraph out(static_cast<int>(universe.size()), universe);
  for (auto [i, j] : g.edges()) {
    auto a = index.find(g.type_names()[i]);
    auto b = index.find(g.type_names()[j]);
    if (a == index.end() || b == index.end())
      throw std::invalid_argument("graph type name not present in target universe");
    out.add_edge(a->second, b->second);
  }
  return out;
}

}  // namespace causalrl
