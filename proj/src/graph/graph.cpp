#include "sgmi/graph/graph.hpp"

#include <algorithm>
#include <set>

#include "sgmi/core/error.hpp"

namespace sgmi::graph {

void Graph::validate() const {
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const Edge& e = edges[k];
    if (e.src >= num_nodes || e.dst >= num_nodes) {
      throw IntegrityError("graph: edge " + std::to_string(k) + " (" + std::to_string(e.src) + ", " +
                           std::to_string(e.dst) + ") outside [0, " + std::to_string(num_nodes) + ")");
    }
  }
  if (node_attrs && node_attrs->rows() != num_nodes) {
    throw IntegrityError("graph: node_attrs has " + std::to_string(node_attrs->rows()) + " rows for " +
                         std::to_string(num_nodes) + " nodes");
  }
  if (edge_attrs && edge_attrs->rows() != edges.size()) {
    throw IntegrityError("graph: edge_attrs has " + std::to_string(edge_attrs->rows()) + " rows for " +
                         std::to_string(edges.size()) + " edges");
  }
  if (!directed) {
    std::multiset<Edge> forward(edges.begin(), edges.end());
    std::multiset<Edge> backward;
    for (const Edge& e : edges) backward.insert({e.dst, e.src});
    if (forward != backward) throw IntegrityError("graph: undirected graph is missing reverse edges");
  }
}

std::vector<std::size_t> Graph::degrees() const {
  std::vector<std::size_t> deg(num_nodes, 0);
  for (const Edge& e : edges) ++deg[e.src];
  return deg;
}

namespace {

std::optional<std::size_t> common_width(std::span<const Graph* const> graphs, bool node) {
  std::optional<std::size_t> width;
  bool any_missing = false;
  for (const Graph* g : graphs) {
    const auto& attrs = node ? g->node_attrs : g->edge_attrs;
    if (!attrs) {
      // A graph without edges carries no edge attribute matrix to compare.
      if (!node && g->edges.empty()) continue;
      any_missing = true;
      continue;
    }
    if (!node && attrs->rows() == 0 && attrs->cols() == 0) continue;
    if (width && *width != attrs->cols()) {
      throw ContractError(std::string("make_batch: mixed ") + (node ? "node" : "edge") + " attribute widths " +
                          std::to_string(*width) + " and " + std::to_string(attrs->cols()));
    }
    width = attrs->cols();
  }
  if (width && any_missing) {
    throw ContractError(std::string("make_batch: some graphs lack ") + (node ? "node" : "edge") + " attributes");
  }
  return width;
}

GraphBatch batch_of(std::span<const Graph* const> graphs) {
  if (graphs.empty()) throw ContractError("make_batch: empty graph list");
  const auto node_width = common_width(graphs, true);
  const auto edge_width = common_width(graphs, false);

  GraphBatch b;
  b.num_graphs = graphs.size();
  std::size_t total_edges = 0;
  bool all_targets = true;
  for (const Graph* g : graphs) {
    b.node_offsets.push_back(b.num_nodes);
    b.node_counts.push_back(g->num_nodes);
    b.edge_offsets.push_back(total_edges);
    b.num_nodes += g->num_nodes;
    total_edges += g->edges.size();
    all_targets = all_targets && !g->targets.empty() && g->targets.size() == graphs.front()->targets.size();
  }
  b.graph_id.reserve(b.num_nodes);
  b.src.reserve(total_edges);
  b.dst.reserve(total_edges);
  if (node_width) b.node_attrs = Tensor({b.num_nodes, *node_width});
  if (edge_width) b.edge_attrs = Tensor({total_edges, *edge_width});
  if (all_targets) b.targets = Tensor({b.num_graphs, graphs.front()->targets.size()});

  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const Graph& g = *graphs[gi];
    const std::size_t off = b.node_offsets[gi];
    b.graph_id.insert(b.graph_id.end(), g.num_nodes, gi);
    for (const Edge& e : g.edges) {
      b.src.push_back(e.src + off);
      b.dst.push_back(e.dst + off);
    }
    if (node_width) {
      auto src = g.node_attrs->data();
      std::copy(src.begin(), src.end(), b.node_attrs->data().begin() + static_cast<std::ptrdiff_t>(off * *node_width));
    }
    if (edge_width && g.edge_attrs) {
      auto src = g.edge_attrs->data();
      std::copy(src.begin(), src.end(),
                b.edge_attrs->data().begin() + static_cast<std::ptrdiff_t>(b.edge_offsets[gi] * *edge_width));
    }
    b.labels.push_back(g.label.value_or(-1));
    if (all_targets) std::copy(g.targets.begin(), g.targets.end(), b.targets->row(gi).begin());
    b.directed.push_back(g.directed);
  }
  return b;
}

}  // namespace

GraphBatch make_batch(std::span<const Graph> graphs) {
  std::vector<const Graph*> ptrs;
  ptrs.reserve(graphs.size());
  for (const Graph& g : graphs) ptrs.push_back(&g);
  return batch_of(ptrs);
}

GraphBatch make_batch(std::span<const Graph> graphs, std::span<const std::size_t> indices) {
  std::vector<const Graph*> ptrs;
  ptrs.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= graphs.size()) throw IndexError("make_batch: graph index " + std::to_string(i) + " out of range");
    ptrs.push_back(&graphs[i]);
  }
  return batch_of(ptrs);
}

Graph unbatch(const GraphBatch& b, std::size_t gi) {
  if (gi >= b.num_graphs) throw IndexError("unbatch: graph index " + std::to_string(gi) + " out of range");
  Graph g;
  const std::size_t off = b.node_offsets[gi];
  g.num_nodes = b.node_counts[gi];
  const std::size_t e_begin = b.edge_offsets[gi];
  const std::size_t e_end = gi + 1 < b.num_graphs ? b.edge_offsets[gi + 1] : b.num_edges();
  for (std::size_t k = e_begin; k < e_end; ++k) g.edges.push_back({b.src[k] - off, b.dst[k] - off});
  if (b.node_attrs) {
    const std::size_t w = b.node_attrs->cols();
    auto begin = b.node_attrs->data().begin() + static_cast<std::ptrdiff_t>(off * w);
    g.node_attrs = Tensor({g.num_nodes, w}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(g.num_nodes * w)));
  }
  if (b.edge_attrs) {
    const std::size_t w = b.edge_attrs->cols();
    auto begin = b.edge_attrs->data().begin() + static_cast<std::ptrdiff_t>(e_begin * w);
    g.edge_attrs = Tensor({e_end - e_begin, w}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>((e_end - e_begin) * w)));
  }
  if (b.labels[gi] >= 0) g.label = b.labels[gi];
  if (b.targets) {
    auto row = b.targets->row(gi);
    g.targets.assign(row.begin(), row.end());
  }
  g.directed = b.directed[gi];
  return g;
}

DatasetMeta compute_meta(std::string name, std::span<const Graph> graphs) {
  DatasetMeta meta;
  meta.name = std::move(name);
  meta.num_graphs = graphs.size();
  std::set<int> classes;
  double nodes = 0.0, edges = 0.0;
  meta.has_node_attrs = !graphs.empty();
  for (const Graph& g : graphs) {
    nodes += static_cast<double>(g.num_nodes);
    edges += static_cast<double>(g.undirected_edge_count());
    if (g.label) classes.insert(*g.label);
    meta.has_node_attrs = meta.has_node_attrs && g.node_attrs.has_value();
    meta.has_edge_attrs = meta.has_edge_attrs || g.edge_attrs.has_value();
  }
  meta.num_classes = classes.size();
  if (!graphs.empty()) {
    meta.avg_nodes = nodes / static_cast<double>(graphs.size());
    meta.avg_edges = edges / static_cast<double>(graphs.size());
  }
  return meta;
}

}  // namespace sgmi::graph
