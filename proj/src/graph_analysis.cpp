#include "episodic/graph_analysis.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace episodic {

DirectedGraph::DirectedGraph(std::vector<std::vector<int>> adjacency)
    : adjacency_(std::move(adjacency)) {
  const int n = size();
  for (auto& succ : adjacency_) {
    for (int v : succ)
      if (v < 0 || v >= n) throw std::out_of_range("successor index out of range");
    std::sort(succ.begin(), succ.end());
    succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
  }
}

bool DirectedGraph::has_edge(int from, int to) const {
  return std::binary_search(adjacency_[from].begin(), adjacency_[from].end(), to);
}

DirectedGraph build_graph(const StochasticGame& game) {
  const int ns = game.num_states();
  std::vector<std::vector<int>> adj(ns);
  for (int s = 0; s < ns; ++s)
    for (int t = 0; t < ns; ++t) {
      bool edge = false;
      for (int a1 = 0; a1 < game.num_actions(0) && !edge; ++a1)
        for (int a2 = 0; a2 < game.num_actions(1) && !edge; ++a2)
          edge = game.transition(s, a1, a2, t) > 0.0;
      if (edge) adj[s].push_back(t);
    }
  return DirectedGraph(std::move(adj));
}

std::vector<int> strongly_connected_components(const DirectedGraph& g, int* count) {
  // Iterative Tarjan to keep deep extended graphs off the call stack.
  const int n = g.size();
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  std::vector<std::pair<int, std::size_t>> work;
  int next_index = 0;
  int components = 0;

  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    work.emplace_back(root, 0);
    while (!work.empty()) {
      auto& [v, child] = work.back();
      if (child == 0 && index[v] < 0) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      const auto& succ = g.successors(v);
      if (child < succ.size()) {
        const int w = succ[child++];
        if (index[w] < 0) {
          work.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = components;
        } while (w != v);
        ++components;
      }
      const int finished = v;
      work.pop_back();
      if (!work.empty()) {
        const int parent = work.back().first;
        low[parent] = std::min(low[parent], low[finished]);
      }
    }
  }
  if (count) *count = components;
  return comp;
}

bool strongly_connected(const DirectedGraph& g) {
  if (g.size() == 0) return false;
  int count = 0;
  strongly_connected_components(g, &count);
  return count == 1;
}

std::optional<CoprimeCycleWitness> find_coprime_cycle(const DirectedGraph& g, int episode_length) {
  if (episode_length < 1) throw std::invalid_argument("episode length M must be at least 1");
  const int n = g.size();
  const int M = episode_length;
  std::vector<char> seen(static_cast<std::size_t>(n) * M);
  std::vector<int> frontier;
  for (int s = 0; s < n; ++s) {
    std::fill(seen.begin(), seen.end(), 0);
    frontier.clear();
    // Seed with the one-step successors so only non-empty walks count.
    for (int t : g.successors(s)) {
      const int node = t * M + 1 % M;
      if (!seen[node]) {
        seen[node] = 1;
        frontier.push_back(node);
      }
    }
    while (!frontier.empty()) {
      const int node = frontier.back();
      frontier.pop_back();
      const int v = node / M;
      const int k = node % M;
      for (int t : g.successors(v)) {
        const int next = t * M + (k + 1) % M;
        if (!seen[next]) {
          seen[next] = 1;
          frontier.push_back(next);
        }
      }
    }
    for (int rho = 0; rho < M; ++rho)
      if (seen[static_cast<std::size_t>(s) * M + rho] && std::gcd(rho, M) == 1)
        return CoprimeCycleWitness{s, rho};
  }
  return std::nullopt;
}

DirectedGraph extended_graph(const DirectedGraph& g, int episode_length) {
  if (episode_length < 1) throw std::invalid_argument("episode length M must be at least 1");
  const int M = episode_length;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.size()) * M);
  for (int s = 0; s < g.size(); ++s)
    for (int m = 0; m < M; ++m)
      for (int t : g.successors(s)) adj[s * M + m].push_back(t * M + (m + 1) % M);
  return DirectedGraph(std::move(adj));
}

bool extended_strongly_connected(const DirectedGraph& g, int episode_length) {
  return strongly_connected(extended_graph(g, episode_length));
}

bool extended_strongly_connected(const StochasticGame& game, int episode_length) {
  return extended_strongly_connected(build_graph(game), episode_length);
}

}  // namespace episodic
