#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sgmi/graph/graph.hpp"

namespace sgmi::graph {

/// |V| x (max_degree + 1) one-hot of each node's degree, clamped at max_degree.
Tensor degree_features(const Graph& graph, std::size_t max_degree);

std::size_t max_degree(std::span<const Graph> graphs);

/// Gives every graph without node attributes a degree one-hot. Returns the
/// clamp used, or nullopt when all graphs already carried attributes.
/// Passing `clamp` reuses a width fixed elsewhere (e.g. by a checkpoint).
std::optional<std::size_t> ensure_node_features(std::vector<Graph>& graphs,
                                                std::optional<std::size_t> clamp = std::nullopt);

/// Standardizes regression targets in place to mean 0 and variance 1 per
/// target column over the given graphs.
void zscore_targets(std::vector<Graph>& graphs);

}  // namespace sgmi::graph
