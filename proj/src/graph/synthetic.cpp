#include "sgmi/graph/synthetic.hpp"

#include <set>

#include "sgmi/core/error.hpp"
#include "sgmi/core/rng.hpp"
#include "sgmi/graph/features.hpp"

namespace sgmi::graph {
namespace {

using EdgeSet = std::set<Edge>;

void connect(EdgeSet& edges, std::size_t u, std::size_t v) {
  if (u == v) return;
  edges.insert({u, v});
  edges.insert({v, u});
}

// Random labelled tree on nodes [0, n).
void random_tree(Rng& rng, EdgeSet& edges, std::size_t n) {
  for (std::size_t i = 1; i < n; ++i) connect(edges, i, rng.index(i));
}

void cycle(EdgeSet& edges, std::size_t first, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) connect(edges, first + i, first + (i + 1) % len);
}

void clique(EdgeSet& edges, std::size_t first, std::size_t size) {
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = i + 1; j < size; ++j) connect(edges, first + i, first + j);
}

// Adds the motif for class c on fresh nodes starting at `first`; returns its node count.
std::size_t plant_motif(EdgeSet& edges, std::size_t first, std::size_t c) {
  switch (c) {
    case 0:
      cycle(edges, first, 6);
      return 6;
    case 1:
      clique(edges, first, 4);
      return 4;
    case 2:
      for (std::size_t i = 1; i <= 5; ++i) connect(edges, first, first + i);
      return 6;
    case 3:
      clique(edges, first, 5);
      return 5;
    case 4:
      // 2 x 4 ladder
      for (std::size_t i = 0; i < 4; ++i) {
        connect(edges, first + i, first + 4 + i);
        if (i + 1 < 4) {
          connect(edges, first + i, first + i + 1);
          connect(edges, first + 4 + i, first + 5 + i);
        }
      }
      return 8;
    default:
      cycle(edges, first, c + 3);
      return c + 3;
  }
}

Graph finish(Rng& rng, std::size_t n, const EdgeSet& edges) {
  const auto perm = rng.permutation(n);
  EdgeSet relabeled;
  for (const Edge& e : edges) relabeled.insert({perm[e.src], perm[e.dst]});
  Graph g;
  g.num_nodes = n;
  g.edges.assign(relabeled.begin(), relabeled.end());
  return g;
}

}  // namespace

std::vector<Graph> synthetic_dataset(std::uint64_t seed, std::size_t num_graphs, std::size_t num_classes) {
  if (num_classes == 0) throw ContractError("synthetic_dataset: num_classes must be positive");
  Rng rng(seed);
  std::vector<int> labels(num_graphs);
  for (std::size_t i = 0; i < num_graphs; ++i) labels[i] = static_cast<int>(i % num_classes);
  rng.shuffle(std::span<int>(labels));

  std::vector<Graph> graphs;
  graphs.reserve(num_graphs);
  for (std::size_t i = 0; i < num_graphs; ++i) {
    EdgeSet edges;
    const std::size_t base = 8 + rng.index(7);
    random_tree(rng, edges, base);
    if (rng.uniform() < 0.5) connect(edges, rng.index(base), rng.index(base));
    const std::size_t motif = plant_motif(edges, base, static_cast<std::size_t>(labels[i]));
    connect(edges, base, rng.index(base));
    Graph g = finish(rng, base + motif, edges);
    g.label = labels[i];
    graphs.push_back(std::move(g));
  }
  return graphs;
}

std::vector<Graph> synthetic_regression_dataset(std::uint64_t seed, std::size_t num_graphs) {
  Rng rng(seed);
  std::vector<Graph> graphs;
  graphs.reserve(num_graphs);
  for (std::size_t i = 0; i < num_graphs; ++i) {
    EdgeSet edges;
    std::size_t n = 6 + rng.index(7);
    random_tree(rng, edges, n);
    const std::size_t base = n;
    const std::size_t triangles = rng.index(4);
    const std::size_t squares = rng.index(3);
    for (std::size_t t = 0; t < triangles; ++t) {
      cycle(edges, n, 3);
      connect(edges, n, rng.index(base));
      n += 3;
    }
    for (std::size_t s = 0; s < squares; ++s) {
      cycle(edges, n, 4);
      connect(edges, n, rng.index(base));
      n += 4;
    }
    Graph g = finish(rng, n, edges);
    const double noise = 0.1 * (rng.uniform() - 0.5);
    g.targets = {static_cast<double>(triangles) + 0.5 * static_cast<double>(squares) + noise};
    graphs.push_back(std::move(g));
  }
  zscore_targets(graphs);
  return graphs;
}

}  // namespace sgmi::graph
