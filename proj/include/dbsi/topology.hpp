#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dbsi {

// Undirected sensor-network graph. Self-pairs {i,i} are kept in the edge set
// for every node, neighborhoods include the node itself, and the adjacency
// matrix is binary symmetric. Construction verifies connectivity (ignoring
// self-loops); instances are immutable afterwards and safe to share.
class Topology {
 public:
  int node_count() const { return node_count_; }
  const std::set<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<std::vector<int>>& neighborhoods() const { return hoods_; }
  const std::vector<int>& neighborhood(int i) const { return hoods_.at(i); }
  const Eigen::MatrixXi& adjacency() const { return adjacency_; }

  bool has_edge(int i, int j) const {
    return adjacency_(i, j) != 0;
  }

  // Degree excluding the self-loop.
  int degree(int i) const {
    return static_cast<int>(hoods_.at(i).size()) - 1;
  }

  bool is_complete() const {
    const long m = node_count_;
    return static_cast<long>(edges_.size()) == m + m * (m - 1) / 2;
  }

  // Builds the structure without the connectivity check. Used internally by
  // the public constructors and by diagnostics that need to inspect a
  // disconnected edge set.
  static Topology from_edges_unchecked(int node_count,
                                       const std::vector<std::pair<int, int>>& edge_list) {
    if (node_count < 1) throw std::invalid_argument("topology: node_count must be >= 1");
    Topology t;
    t.node_count_ = node_count;
    for (int i = 0; i < node_count; ++i) t.edges_.insert({i, i});
    for (auto [a, b] : edge_list) {
      if (a < 0 || b < 0 || a >= node_count || b >= node_count)
        throw std::invalid_argument("topology: edge index out of range");
      t.edges_.insert({std::min(a, b), std::max(a, b)});
    }
    t.finalize();
    return t;
  }

 private:
  void finalize() {
    hoods_.assign(node_count_, {});
    adjacency_ = Eigen::MatrixXi::Zero(node_count_, node_count_);
    for (auto [a, b] : edges_) {
      adjacency_(a, b) = 1;
      adjacency_(b, a) = 1;
      hoods_[a].push_back(b);
      if (a != b) hoods_[b].push_back(a);
    }
    for (auto& h : hoods_) std::sort(h.begin(), h.end());
  }

  int node_count_ = 0;
  std::set<std::pair<int, int>> edges_;       // normalized (min,max), self-pairs included
  std::vector<std::vector<int>> hoods_;       // sorted ascending, includes self
  Eigen::MatrixXi adjacency_;
};

// Connected components ignoring self-loops.
inline std::vector<std::vector<int>> connected_components(const Topology& t) {
  const int m = t.node_count();
  std::vector<int> comp(m, -1);
  std::vector<std::vector<int>> out;
  for (int s = 0; s < m; ++s) {
    if (comp[s] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.push_back({});
    std::vector<int> stack{s};
    comp[s] = id;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      out[id].push_back(v);
      for (int w : t.neighborhood(v)) {
        if (w != v && comp[w] < 0) {
          comp[w] = id;
          stack.push_back(w);
        }
      }
    }
    std::sort(out[id].begin(), out[id].end());
  }
  return out;
}

inline bool is_connected(const Topology& t) {
  return connected_components(t).size() == 1;
}

namespace detail {

inline std::string format_components(const std::vector<std::vector<int>>& comps) {
  std::ostringstream os;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    os << (c ? ", " : "") << "{";
    for (std::size_t k = 0; k < comps[c].size(); ++k) os << (k ? "," : "") << comps[c][k];
    os << "}";
  }
  return os.str();
}

}  // namespace detail

// Cycle-structured graph: node i is connected to the `neighbors_per_side`
// nearest nodes on each side (mod node_count), plus the self-loop. The
// 2-node, 1-per-side case collapses to the single-edge graph and is accepted
// as a degenerate cycle.
inline Topology build_ring(int node_count, int neighbors_per_side) {
  if (node_count < 2) throw std::invalid_argument("build_ring: need at least 2 nodes");
  if (neighbors_per_side < 1)
    throw std::invalid_argument("build_ring: neighbors_per_side must be >= 1");
  const bool degenerate_pair = (node_count == 2 && neighbors_per_side == 1);
  if (2 * neighbors_per_side + 1 > node_count && !degenerate_pair)
    throw std::invalid_argument("build_ring: neighborhood exceeds network size");
  std::vector<std::pair<int, int>> edge_list;
  for (int i = 0; i < node_count; ++i)
    for (int d = 1; d <= neighbors_per_side; ++d)
      edge_list.push_back({i, (i + d) % node_count});
  return Topology::from_edges_unchecked(node_count, edge_list);
}

// Explicit edge list; self-loops are added automatically and connectivity is
// verified. Disconnected graphs are rejected with the components named.
inline Topology build_custom(int node_count, const std::vector<std::pair<int, int>>& edge_list) {
  Topology t = Topology::from_edges_unchecked(node_count, edge_list);
  auto comps = connected_components(t);
  if (comps.size() != 1)
    throw std::invalid_argument("build_custom: graph is disconnected; components: " +
                                detail::format_components(comps));
  return t;
}

inline Topology build_complete(int node_count) {
  std::vector<std::pair<int, int>> edge_list;
  for (int i = 0; i < node_count; ++i)
    for (int j = i + 1; j < node_count; ++j) edge_list.push_back({i, j});
  if (node_count == 1) return Topology::from_edges_unchecked(1, {});
  return build_custom(node_count, edge_list);
}

}  // namespace dbsi
