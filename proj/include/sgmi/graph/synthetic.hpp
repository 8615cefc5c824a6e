#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sgmi/graph/graph.hpp"

namespace sgmi::graph {

/// Random trees with one planted, class-specific motif (cycle, clique, star,
/// ladder, ...). Labels are balanced to within one graph per class. Graphs
/// carry no node attributes; degree features are expected downstream.
std::vector<Graph> synthetic_dataset(std::uint64_t seed, std::size_t num_graphs, std::size_t num_classes);

/// Random trees with a random number of planted triangles and squares. The
/// single regression target counts the motifs (plus small noise) and is
/// z-scored over the returned set.
std::vector<Graph> synthetic_regression_dataset(std::uint64_t seed, std::size_t num_graphs);

}  // namespace sgmi::graph
