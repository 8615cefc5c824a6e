#include "sgmi/model/subgraph.hpp"

#include "sgmi/core/error.hpp"

namespace sgmi::model {

Var basic_operator(Var x_g, Var w) {
  if (w.value().rank() != 2 || w.value().cols() != 2) {
    throw DimensionError("basic_operator: W must be d x 2, got " + ad::shape_str(w.shape()));
  }
  return ad::softmax_rows(ad::matmul(x_g, w));
}

std::vector<Var> tree_split(Tape& tape, Var x_g, std::span<Parameter* const> operators, std::size_t depth) {
  if (depth == 0) throw ContractError("tree_split: depth must be >= 1");
  const std::size_t internal = (std::size_t{1} << depth) - 1;
  if (operators.size() != internal) {
    throw ContractError("tree_split: depth " + std::to_string(depth) + " needs " + std::to_string(internal) +
                        " operators, got " + std::to_string(operators.size()));
  }
  // masks[i] holds the mask of heap node i; the root has implicit full membership.
  std::vector<Var> masks(2 * internal + 1);
  for (std::size_t node = 0; node < internal; ++node) {
    Var p = basic_operator(x_g, tape.parameter(*operators[node]));
    Var left = ad::column(p, 0);
    Var right = ad::column(p, 1);
    if (node > 0) {
      left = ad::mul(masks[node], left);
      right = ad::mul(masks[node], right);
    }
    masks[2 * node + 1] = left;
    masks[2 * node + 2] = right;
  }
  return {masks.begin() + static_cast<std::ptrdiff_t>(internal), masks.end()};
}

MultiHeadMasks multi_head(Tape& tape, Var x_g, std::span<Parameter* const> operators) {
  if (operators.empty()) throw ContractError("multi_head: needs at least one head");
  MultiHeadMasks out;
  for (Parameter* w : operators) {
    Var soft = ad::column(basic_operator(x_g, tape.parameter(*w)), 0);
    std::vector<std::uint8_t> hard(soft.value().numel());
    for (std::size_t v = 0; v < hard.size(); ++v) hard[v] = soft.value()[v] >= 0.5 ? 1 : 0;
    out.soft.push_back(soft);
    out.hard.push_back(std::move(hard));
  }
  return out;
}

Var subgraph_readout(Var x_g, Var mask, const GraphBatch& batch, Readout kind) {
  if (mask.value().rows() != x_g.value().rows() || mask.value().cols() != 1) {
    throw DimensionError("subgraph_readout: mask " + ad::shape_str(mask.shape()) + " does not align with " +
                         ad::shape_str(x_g.shape()));
  }
  return readout(ad::mul(x_g, mask), batch, kind);
}

SubgraphGenerator::SubgraphGenerator(ParameterStore& store, std::size_t hidden, GeneratorConfig config, Rng& rng)
    : config_(config), conv_(store, "generator/subgraph_conv", config.num_subgraphs()) {
  if (config.kind == GeneratorKind::TreeSplit && (config.depth == 0 || config.depth > 10)) {
    throw ContractError("generator: tree-split depth must be in [1, 10]");
  }
  if (config.kind == GeneratorKind::MultiHead && config.heads == 0) {
    throw ContractError("generator: multi-head needs at least one head");
  }
  for (std::size_t i = 0; i < config.num_operators(); ++i) {
    operators_.push_back(&store.add("generator/split/" + std::to_string(i), fan_in_uniform(rng, {hidden, 2}, hidden)));
  }
}

std::vector<Var> SubgraphGenerator::masks(Tape& tape, Var x_g) const {
  if (config_.kind == GeneratorKind::TreeSplit) return tree_split(tape, x_g, operators_, config_.depth);
  return multi_head(tape, x_g, operators_).soft;
}

std::vector<Var> SubgraphGenerator::subgraph_embeddings(Tape& tape, Var x_g, const GraphBatch& batch,
                                                        Readout kind) const {
  std::vector<Var> out;
  for (Var m : masks(tape, x_g)) out.push_back(subgraph_readout(x_g, m, batch, kind));
  return out;
}

Var SubgraphGenerator::subgraph_conv(Tape& tape, std::span<const Var> embeddings) const {
  return conv_.forward(tape, embeddings);
}

Var SubgraphGenerator::reconstruct(Tape& tape, Var x_g, const GraphBatch& batch, Readout kind) const {
  const auto parts = subgraph_embeddings(tape, x_g, batch, kind);
  return subgraph_conv(tape, parts);
}

}  // namespace sgmi::model
