#pragma once

#include <optional>
#include <vector>

#include "episodic/game_model.hpp"

namespace episodic {

// Directed graph with sorted, duplicate-free successor lists.
class DirectedGraph {
 public:
  explicit DirectedGraph(int num_vertices = 0) : adjacency_(num_vertices) {}
  // Takes arbitrary edge lists; sorts and deduplicates them. Throws
  // std::out_of_range on a successor outside [0, n).
  explicit DirectedGraph(std::vector<std::vector<int>> adjacency);

  int size() const { return static_cast<int>(adjacency_.size()); }
  const std::vector<int>& successors(int v) const { return adjacency_[v]; }
  bool has_edge(int from, int to) const;

 private:
  std::vector<std::vector<int>> adjacency_;
};

// Edge s -> s' iff p(s'|s,a) > 0 for some joint action a.
DirectedGraph build_graph(const StochasticGame& game);

// Component id per vertex (Tarjan). Ids are numbered in reverse topological
// order of the condensation.
std::vector<int> strongly_connected_components(const DirectedGraph& g, int* count = nullptr);

bool strongly_connected(const DirectedGraph& g);

struct CoprimeCycleWitness {
  int vertex = 0;
  int residue = 0;  // length of some closed walk at `vertex`, modulo M
};

// Whether some vertex lies on a closed walk whose length l satisfies
// gcd(l, M) = 1. Searches the product graph over (v, k mod M): a closed walk
// at s with length = rho (mod M) exists iff (s, rho) is reachable from (s, 0)
// by a non-empty walk. Reports the lowest such vertex and its lowest coprime
// residue.
std::optional<CoprimeCycleWitness> find_coprime_cycle(const DirectedGraph& g, int episode_length);
inline bool has_coprime_cycle(const DirectedGraph& g, int episode_length) {
  return find_coprime_cycle(g, episode_length).has_value();
}

// Graph on S x {0..M-1} (flat index s*M+m) with (s,m) -> (s', (m+1) mod M)
// whenever s -> s' in g.
DirectedGraph extended_graph(const DirectedGraph& g, int episode_length);

bool extended_strongly_connected(const DirectedGraph& g, int episode_length);
bool extended_strongly_connected(const StochasticGame& game, int episode_length);

}  // namespace episodic
