#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgmi/autodiff/tensor.hpp"

namespace sgmi::graph {

using ad::Tensor;

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// A single attributed graph with 0-indexed local node ids. Undirected graphs
/// store both directions of every edge.
struct Graph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  std::optional<Tensor> node_attrs;  // |V| x D_V
  std::optional<Tensor> edge_attrs;  // stored-edge count x D_E, aligned with edges
  std::optional<int> label;          // class id
  std::vector<double> targets;       // regression targets, empty when absent
  bool directed = false;

  // Throws IntegrityError on any violated invariant.
  void validate() const;

  std::size_t undirected_edge_count() const { return directed ? edges.size() : edges.size() / 2; }
  // Per-node count of stored edges leaving the node (the degree for undirected graphs).
  std::vector<std::size_t> degrees() const;

  friend bool operator==(const Graph&, const Graph&) = default;
};

/// Block-diagonal concatenation of graphs.
struct GraphBatch {
  std::size_t num_graphs = 0;
  std::size_t num_nodes = 0;
  std::vector<std::size_t> node_offsets;  // start row of each graph
  std::vector<std::size_t> node_counts;
  std::vector<std::size_t> graph_id;      // per node, non-decreasing
  std::vector<std::size_t> edge_offsets;  // start index of each graph's edges
  std::vector<std::size_t> src;           // shifted edge endpoints
  std::vector<std::size_t> dst;
  std::optional<Tensor> node_attrs;
  std::optional<Tensor> edge_attrs;
  std::vector<int> labels;   // -1 when a graph has no class label
  std::optional<Tensor> targets;  // num_graphs x T when every graph has targets
  std::vector<bool> directed;

  std::size_t num_edges() const { return src.size(); }
};

GraphBatch make_batch(std::span<const Graph> graphs);
GraphBatch make_batch(std::span<const Graph> graphs, std::span<const std::size_t> indices);
// Recovers graph g exactly as it was passed to make_batch.
Graph unbatch(const GraphBatch& batch, std::size_t g);

struct DatasetMeta {
  std::string name;
  std::size_t num_graphs = 0;
  std::size_t num_classes = 0;
  double avg_nodes = 0.0;
  double avg_edges = 0.0;  // undirected edges per graph
  bool has_node_attrs = false;
  bool has_edge_attrs = false;
};

DatasetMeta compute_meta(std::string name, std::span<const Graph> graphs);

struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  DatasetMeta meta;
};

}  // namespace sgmi::graph
