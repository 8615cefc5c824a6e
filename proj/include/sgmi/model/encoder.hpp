#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sgmi/graph/graph.hpp"
#include "sgmi/model/nn.hpp"

namespace sgmi::model {

using graph::GraphBatch;

enum class Readout { Sum, Mean };

struct EncoderConfig {
  std::size_t num_layers = 4;
  std::size_t hidden = 128;
  Readout readout = Readout::Sum;
};

/// Per-graph pooling of node rows (sum or mean over each graph's block).
Var readout(Var x, const GraphBatch& batch, Readout kind);

/// Node-Agg and Layer-Agg stages.
///
/// Node attributes pass through MLP_V; edge attributes (when the dataset has
/// them) pass through MLP_E and are averaged over each node's incident edges.
/// The two views are fused by attribute-conv into X0, which feeds L GIN-0
/// layers X(k) = MLP_k(X(k-1) + sum of neighbour rows). Layer-conv combines
/// X(1..L) into X_G and the readout pools X_G into h(G).
class Encoder {
 public:
  /// edge_in == 0 means the data has no edge attributes; attribute-conv is
  /// then omitted and X0 = MLP_V(X_V).
  Encoder(ParameterStore& store, std::size_t node_in, std::size_t edge_in, EncoderConfig config, Rng& rng);

  struct AttributeViews {
    Var node;                 // X_V0, |V| x d
    std::optional<Var> edge;  // X_E0, |V| x d
  };
  AttributeViews embed_attributes(Tape& tape, const GraphBatch& batch) const;

  Var attribute_conv(Tape& tape, std::span<const Var> views) const;
  // X0 from raw attributes.
  Var initial_embeddings(Tape& tape, const GraphBatch& batch) const;
  Var gin_forward(Tape& tape, Var x, const GraphBatch& batch, std::size_t layer) const;
  Var layer_conv(Tape& tape, std::span<const Var> layers) const;

  struct Output {
    Var x0;
    Var x_g;  // |V| x d
    Var h;    // num_graphs x d
  };
  // GIN layers, layer-conv and readout from a given X0.
  Output propagate(Tape& tape, Var x0, const GraphBatch& batch) const;
  Output encode(Tape& tape, const GraphBatch& batch) const;

  const EncoderConfig& config() const { return config_; }
  std::size_t node_in() const { return node_in_; }
  std::size_t edge_in() const { return edge_in_; }
  bool uses_edges() const { return mlp_e_.has_value(); }

  const Mlp& node_mlp() const { return mlp_v_; }
  const std::optional<Mlp>& edge_mlp() const { return mlp_e_; }
  const std::vector<Mlp>& gin_mlps() const { return gin_; }
  const std::optional<ChannelConv>& attribute_kernel() const { return attr_conv_; }
  const ChannelConv& layer_kernel() const { return layer_conv_; }

 private:
  EncoderConfig config_;
  std::size_t node_in_, edge_in_;
  Mlp mlp_v_;
  std::optional<Mlp> mlp_e_;
  std::optional<ChannelConv> attr_conv_;
  std::vector<Mlp> gin_;
  ChannelConv layer_conv_;
};

}  // namespace sgmi::model
