// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdlib>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

namespace kunveil {

using AdjacencyList = std::vector<std::vector<int>>;

inline std::vector<int> bfs_depths(const AdjacencyList& adj, int start) {
  std::vector<int> depth(adj.size(), -1);
  std::queue<int> q;
  depth[start] = 0;
  q.push(start);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (depth[v] < 0) {
        depth[v] = depth[u] + 1;
        q.push(v);
      }
    }
  }
  return depth;
}

inline bool all_reached(const std::vector<int>& depth) {
  for (int d : depth)
    if (d < 0) return false;
  return true;
}

inline AdjacencyList reverse_graph(const AdjacencyList& adj) {
  AdjacencyList rev(adj.size());
  for (int u = 0; u < static_cast<int>(adj.size()); ++u)
    for (int v : adj[u]) rev[v].push_back(u);
  return rev;
}

// Every vertex reachable from vertex 0 and vertex 0 reachable from every
// vertex; equivalent to strong connectivity.
inline bool strongly_connected(const AdjacencyList& adj) {
  if (adj.empty()) return false;
  if (!all_reached(bfs_depths(adj, 0))) return false;
  return all_reached(bfs_depths(reverse_graph(adj), 0));
}

// gcd of cycle lengths. Requires strong connectivity; every edge u -> v
// contributes |depth(u) + 1 - depth(v)| because BFS depths differ from true
// cycle offsets by multiples of the period.
inline int graph_period(const AdjacencyList& adj) {
  if (!strongly_connected(adj))
    throw std::invalid_argument("graph_period: graph is not strongly connected");
  const std::vector<int> depth = bfs_depths(adj, 0);
  int g = 0;
  for (int u = 0; u < static_cast<int>(adj.size()); ++u)
    for (int v : adj[u]) g = std::gcd(g, std::abs(depth[u] + 1 - depth[v]));
  return g;
}

}  // namespace kunveil
