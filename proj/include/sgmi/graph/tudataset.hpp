#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "sgmi/graph/graph.hpp"

namespace sgmi::graph {

/// Loads a dataset in the public TUDataset text format from
/// `<directory>/<name>_*.txt`. Node ids become 0-based and graph-local,
/// categorical node/edge labels are one-hot encoded (after any continuous
/// attributes), class labels are remapped to [0, num_classes), and edges are
/// deduplicated and symmetrized.
Dataset load_tudataset(const std::filesystem::path& directory, const std::string& name);

// Uses the directory's final path component as the dataset name.
Dataset load_tudataset(const std::filesystem::path& directory);

/// Writes graphs in the same format. Node and edge attributes are written as
/// continuous `_node_attributes.txt` / `_edge_attributes.txt` columns, and
/// regression targets as `_graph_attributes.txt`.
void write_tudataset(const std::filesystem::path& directory, const std::string& name, std::span<const Graph> graphs);

}  // namespace sgmi::graph
