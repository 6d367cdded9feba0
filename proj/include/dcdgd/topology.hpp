#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dcdgd {

/// Undirected connected graph over nodes 0..n-1, no self-loops.
struct Topology {
  int n = 0;
  std::set<std::pair<int, int>> edges;  // stored with first < second

  void add_edge(int i, int j) {
    if (i == j) throw std::invalid_argument("Topology: self-loop at node " + std::to_string(i));
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw std::invalid_argument("Topology: edge endpoint out of range");
    edges.insert({std::min(i, j), std::max(i, j)});
  }

  bool has_edge(int i, int j) const {
    return edges.count({std::min(i, j), std::max(i, j)}) > 0;
  }

  std::vector<int> degrees() const {
    std::vector<int> deg(n, 0);
    for (const auto& [a, b] : edges) {
      ++deg[a];
      ++deg[b];
    }
    return deg;
  }

  /// Returns -1 when connected, otherwise the lowest-numbered unreachable node.
  int first_unreachable() const {
    if (n <= 0) return 0;
    std::vector<std::vector<int>> adj(n);
    for (const auto& [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
    for (int v = 0; v < n; ++v)
      if (!seen[v]) return v;
    return -1;
  }

  bool connected() const { return first_unreachable() < 0; }
};

inline Topology make_circle(int n) {
  Topology t;
  t.n = n;
  for (int i = 0; i < n; ++i) t.add_edge(i, (i + 1) % n);
  return t;
}

inline Topology make_complete(int n) {
  Topology t;
  t.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) t.add_edge(i, j);
  return t;
}

/// Topology file: first line `n`, then one `i j` pair per line.
inline Topology read_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topology file: " + path);
  Topology t;
  if (!(in >> t.n) || t.n < 2)
    throw std::runtime_error("topology file " + path + ": bad node count");
  int i, j;
  while (in >> i >> j) t.add_edge(i, j);
  return t;
}

inline void write_topology_file(const Topology& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write topology file: " + path);
  out << t.n << "\n";
  for (const auto& [a, b] : t.edges) out << a << " " << b << "\n";
}

}  // namespace dcdgd
