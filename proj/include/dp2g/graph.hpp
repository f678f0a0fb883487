#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace dp2g {

// Undirected connected communication graph. Edges are stored once with
// i < j; adjacency lists are kept sorted.
struct Graph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> adjacency;

  int degree(int i) const { return static_cast<int>(adjacency[i].size()); }
  bool is_connected() const;
  // Longest shortest-path distance in hops (BFS from every node).
  int diameter() const;
};

struct TopologySpec {
  enum class Kind { Ring, Grid, RandomGeometric };
  Kind kind = Kind::Ring;
  int n = 0;
  int rows = 0, cols = 0;   // grid only
  double radius = 0.0;      // random geometric only
  uint64_t seed = 0;        // random geometric only
};

Graph ring_graph(int n);
Graph grid_graph(int rows, int cols);
// Samples n points uniformly in the unit square and connects pairs within
// `radius`; resamples (up to 100 attempts) until the graph is connected.
Graph random_geometric_graph(int n, double radius, uint64_t seed);

Graph build_topology(const TopologySpec& spec);

}  // namespace dp2g
