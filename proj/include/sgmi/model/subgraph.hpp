#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sgmi/model/encoder.hpp"

namespace sgmi::model {

enum class GeneratorKind { TreeSplit, MultiHead };

struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::TreeSplit;
  std::size_t depth = 2;  // Tree-split rounds T, S = 2^T
  std::size_t heads = 4;  // Multi-head S

  std::size_t num_subgraphs() const { return kind == GeneratorKind::TreeSplit ? std::size_t{1} << depth : heads; }
  std::size_t num_operators() const { return kind == GeneratorKind::TreeSplit ? (std::size_t{1} << depth) - 1 : heads; }
};

/// P = softmax_rows(X_G W): |V| x 2, column j is the probability that a node
/// falls into side j of the split.
Var basic_operator(Var x_g, Var w);

/// Soft leaf masks of a depth-T binary split tree. Internal nodes are in heap
/// order (root 0, children 2i+1 and 2i+2), one operator each; leaf i's mask
/// is the product of the chosen P column along its root-to-leaf path, so the
/// 2^T masks sum to 1 on every node.
std::vector<Var> tree_split(Tape& tape, Var x_g, std::span<Parameter* const> operators, std::size_t depth);

struct MultiHeadMasks {
  std::vector<Var> soft;                       // P^i[:, 0], |V| x 1
  std::vector<std::vector<std::uint8_t>> hard;  // soft >= 0.5
};
MultiHeadMasks multi_head(Tape& tape, Var x_g, std::span<Parameter* const> operators);

/// h(G_i): per-graph pooled mask_i[v] * X_G[v].
Var subgraph_readout(Var x_g, Var mask, const GraphBatch& batch, Readout kind);

/// Subgraph-Agg stage: S soft masks over X_G, masked readouts, and the (S,1)
/// subgraph-conv kernel producing the reconstructed embedding h~(G).
class SubgraphGenerator {
 public:
  SubgraphGenerator(ParameterStore& store, std::size_t hidden, GeneratorConfig config, Rng& rng);

  std::vector<Var> masks(Tape& tape, Var x_g) const;
  std::vector<Var> subgraph_embeddings(Tape& tape, Var x_g, const GraphBatch& batch, Readout kind) const;
  Var subgraph_conv(Tape& tape, std::span<const Var> embeddings) const;
  Var reconstruct(Tape& tape, Var x_g, const GraphBatch& batch, Readout kind) const;

  const GeneratorConfig& config() const { return config_; }
  std::span<Parameter* const> operators() const { return operators_; }
  const ChannelConv& kernel() const { return conv_; }

 private:
  GeneratorConfig config_;
  std::vector<Parameter*> operators_;
  ChannelConv conv_;
};

}  // namespace sgmi::model
