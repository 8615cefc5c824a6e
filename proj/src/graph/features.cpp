#include "sgmi/graph/features.hpp"

#include <algorithm>
#include <cmath>

#include "sgmi/core/error.hpp"

namespace sgmi::graph {

Tensor degree_features(const Graph& graph, std::size_t max_degree) {
  Tensor out({graph.num_nodes, max_degree + 1});
  const auto deg = graph.degrees();
  for (std::size_t v = 0; v < graph.num_nodes; ++v) out(v, std::min(deg[v], max_degree)) = 1.0;
  return out;
}

std::size_t max_degree(std::span<const Graph> graphs) {
  std::size_t m = 0;
  for (const Graph& g : graphs) {
    for (std::size_t d : g.degrees()) m = std::max(m, d);
  }
  return m;
}

std::optional<std::size_t> ensure_node_features(std::vector<Graph>& graphs, std::optional<std::size_t> clamp) {
  const bool needed = std::any_of(graphs.begin(), graphs.end(), [](const Graph& g) { return !g.node_attrs; });
  if (!needed) return std::nullopt;
  const bool mixed = std::any_of(graphs.begin(), graphs.end(), [](const Graph& g) { return g.node_attrs.has_value(); });
  if (mixed) throw ContractError("ensure_node_features: dataset mixes graphs with and without node attributes");
  const std::size_t width = clamp.value_or(max_degree(graphs));
  for (Graph& g : graphs) g.node_attrs = degree_features(g, width);
  return width;
}

void zscore_targets(std::vector<Graph>& graphs) {
  if (graphs.empty()) return;
  const std::size_t t = graphs.front().targets.size();
  for (const Graph& g : graphs) {
    if (g.targets.size() != t) throw ContractError("zscore_targets: inconsistent target widths");
  }
  const double n = static_cast<double>(graphs.size());
  for (std::size_t j = 0; j < t; ++j) {
    double mean = 0.0;
    for (const Graph& g : graphs) mean += g.targets[j];
    mean /= n;
    double var = 0.0;
    for (const Graph& g : graphs) var += (g.targets[j] - mean) * (g.targets[j] - mean);
    const double sd = std::sqrt(var / n);
    for (Graph& g : graphs) g.targets[j] = sd > 0.0 ? (g.targets[j] - mean) / sd : 0.0;
  }
}

}  // namespace sgmi::graph
