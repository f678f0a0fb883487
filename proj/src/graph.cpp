#include "dp2g/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "dp2g/rng.hpp"

namespace dp2g {

namespace {

Graph finalize(int n, std::vector<std::pair<int, int>> edges) {
  Graph g;
  g.n = n;
  g.adjacency.assign(n, {});
  for (auto& [i, j] : edges) {
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (auto [i, j] : edges) {
    if (i == j) throw std::invalid_argument("graph: self-loop rejected");
    g.adjacency[i].push_back(j);
    g.adjacency[j].push_back(i);
  }
  g.edges = std::move(edges);
  for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
  return g;
}

std::vector<int> bfs_distances(const Graph& g, int source) {
  std::vector<int> dist(g.n, -1);
  std::queue<int> q;
  dist[source] = 0;
  q.push(source);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : g.adjacency[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
    }
  }
  return dist;
}

}  // namespace

bool Graph::is_connected() const {
  if (n == 0) return false;
  auto dist = bfs_distances(*this, 0);
  return std::all_of(dist.begin(), dist.end(), [](int d) { return d >= 0; });
}

int Graph::diameter() const {
  int diam = 0;
  for (int s = 0; s < n; ++s) {
    auto dist = bfs_distances(*this, s);
    for (int d : dist) {
      if (d < 0) throw std::runtime_error("graph: diameter undefined on disconnected graph");
      diam = std::max(diam, d);
    }
  }
  return diam;
}

Graph ring_graph(int n) {
  if (n < 2) throw std::invalid_argument("ring: need n >= 2");
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return finalize(n, std::move(edges));
}

Graph grid_graph(int rows, int cols) {
  if (rows < 1 || cols < 1 || rows * cols < 2)
    throw std::invalid_argument("grid: need rows*cols >= 2");
  std::vector<std::pair<int, int>> edges;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      int u = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(u, u + 1);
      if (r + 1 < rows) edges.emplace_back(u, u + cols);
    }
  }
  return finalize(rows * cols, std::move(edges));
}

Graph random_geometric_graph(int n, double radius, uint64_t seed) {
  if (n < 2) throw std::invalid_argument("random_geometric: need n >= 2");
  if (!(radius > 0.0) || radius > std::sqrt(2.0))
    throw std::invalid_argument("random_geometric: radius must lie in (0, sqrt(2)]");
  constexpr int kRetryBudget = 100;
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < kRetryBudget; ++attempt) {
    std::vector<double> px(n), py(n);
    for (int i = 0; i < n; ++i) {
      px[i] = unit(rng);
      py[i] = unit(rng);
    }
    std::vector<std::pair<int, int>> edges;
    const double r2 = radius * radius;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        double dx = px[i] - px[j], dy = py[i] - py[j];
        if (dx * dx + dy * dy <= r2) edges.emplace_back(i, j);
      }
    }
    Graph g = finalize(n, std::move(edges));
    if (g.is_connected()) return g;
  }
  throw std::runtime_error("random_geometric: no connected sample within retry budget");
}

Graph build_topology(const TopologySpec& spec) {
  switch (spec.kind) {
    case TopologySpec::Kind::Ring:
      return ring_graph(spec.n);
    case TopologySpec::Kind::Grid:
      if (spec.rows * spec.cols != spec.n)
        throw std::invalid_argument("grid: rows*cols must equal n");
      return grid_graph(spec.rows, spec.cols);
    case TopologySpec::Kind::RandomGeometric:
      return random_geometric_graph(spec.n, spec.radius, spec.seed);
  }
  throw std::invalid_argument("build_topology: unknown kind");
}

}  // namespace dp2g
