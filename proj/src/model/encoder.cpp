#include "sgmi/model/encoder.hpp"

#include "sgmi/core/error.hpp"

namespace sgmi::model {

Var readout(Var x, const GraphBatch& batch, Readout kind) {
  if (x.value().rows() != batch.num_nodes) {
    throw DimensionError("readout: " + std::to_string(x.value().rows()) + " rows for " +
                         std::to_string(batch.num_nodes) + " batch nodes");
  }
  Var pooled = ad::row_sum_segments(x, batch.graph_id, batch.num_graphs);
  if (kind == Readout::Sum) return pooled;
  Tensor inv({batch.num_graphs, 1});
  for (std::size_t g = 0; g < batch.num_graphs; ++g) {
    inv[g] = batch.node_counts[g] ? 1.0 / static_cast<double>(batch.node_counts[g]) : 0.0;
  }
  return ad::mul(pooled, x.tape().constant(std::move(inv)));
}

Encoder::Encoder(ParameterStore& store, std::size_t node_in, std::size_t edge_in, EncoderConfig config, Rng& rng)
    : config_(config),
      node_in_(node_in),
      edge_in_(edge_in),
      mlp_v_(store, "encoder/mlp_v", {node_in, config.hidden, config.hidden}, rng),
      layer_conv_(store, "encoder/layer_conv", config.num_layers) {
  if (config.num_layers == 0 || config.hidden == 0) throw ContractError("encoder: layers and hidden must be >= 1");
  if (node_in == 0) throw ContractError("encoder: node attribute width must be >= 1");
  if (edge_in > 0) {
    mlp_e_.emplace(store, "encoder/mlp_e", std::vector<std::size_t>{edge_in, config.hidden, config.hidden}, rng);
    attr_conv_.emplace(store, "encoder/attribute_conv", 2);
  }
  gin_.reserve(config.num_layers);
  for (std::size_t k = 0; k < config.num_layers; ++k) {
    gin_.emplace_back(store, "encoder/gin/" + std::to_string(k),
                      std::vector<std::size_t>{config.hidden, config.hidden, config.hidden}, rng);
  }
}

Encoder::AttributeViews Encoder::embed_attributes(Tape& tape, const GraphBatch& batch) const {
  if (!batch.node_attrs) throw ContractError("encoder: batch has no node attributes");
  if (batch.node_attrs->cols() != node_in_) {
    throw ContractError("encoder: node attribute width " + std::to_string(batch.node_attrs->cols()) +
                        " does not match model input " + std::to_string(node_in_));
  }
  AttributeViews views{mlp_v_.forward(tape, tape.constant(*batch.node_attrs)), std::nullopt};
  if (!mlp_e_) return views;

  const std::size_t width = batch.edge_attrs ? batch.edge_attrs->cols() : 0;
  if (batch.num_edges() > 0 && width != edge_in_) {
    throw ContractError("encoder: edge attribute width " + std::to_string(width) + " does not match model input " +
                        std::to_string(edge_in_));
  }
  Tensor edge_attrs = batch.edge_attrs ? *batch.edge_attrs : Tensor({0, edge_in_});
  Var per_edge = mlp_e_->forward(tape, tape.constant(std::move(edge_attrs)));
  Var summed = ad::scatter_add_rows(per_edge, batch.src, batch.num_nodes);
  Tensor inv_count({batch.num_nodes, 1});
  for (std::size_t s : batch.src) inv_count[s] += 1.0;
  for (double& c : inv_count.data()) c = c > 0.0 ? 1.0 / c : 0.0;
  views.edge = ad::mul(summed, tape.constant(std::move(inv_count)));
  return views;
}

Var Encoder::attribute_conv(Tape& tape, std::span<const Var> views) const {
  if (!attr_conv_) throw ContractError("encoder: attribute-conv is disabled without edge attributes");
  return attr_conv_->forward(tape, views);
}

Var Encoder::initial_embeddings(Tape& tape, const GraphBatch& batch) const {
  AttributeViews views = embed_attributes(tape, batch);
  if (!views.edge) return views.node;
  const Var both[] = {views.node, *views.edge};
  return attribute_conv(tape, both);
}

Var Encoder::gin_forward(Tape& tape, Var x, const GraphBatch& batch, std::size_t layer) const {
  if (layer >= gin_.size()) throw ContractError("encoder: no GIN layer " + std::to_string(layer));
  if (x.value().rows() != batch.num_nodes) {
    throw DimensionError("gin_forward: " + std::to_string(x.value().rows()) + " rows for " +
                         std::to_string(batch.num_nodes) + " batch nodes");
  }
  Var messages = ad::gather_rows(x, batch.src);
  Var neighbours = ad::scatter_add_rows(messages, batch.dst, batch.num_nodes);
  return gin_[layer].forward(tape, ad::add(x, neighbours));
}

Var Encoder::layer_conv(Tape& tape, std::span<const Var> layers) const { return layer_conv_.forward(tape, layers); }

Encoder::Output Encoder::propagate(Tape& tape, Var x0, const GraphBatch& batch) const {
  std::vector<Var> layers;
  layers.reserve(gin_.size());
  Var x = x0;
  for (std::size_t k = 0; k < gin_.size(); ++k) {
    x = gin_forward(tape, x, batch, k);
    layers.push_back(x);
  }
  Var x_g = layer_conv(tape, layers);
  return {x0, x_g, readout(x_g, batch, config_.readout)};
}

Encoder::Output Encoder::encode(Tape& tape, const GraphBatch& batch) const {
  return propagate(tape, initial_embeddings(tape, batch), batch);
}

}  // namespace sgmi::model
