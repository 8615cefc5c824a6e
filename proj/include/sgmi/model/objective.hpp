#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sgmi/model/model.hpp"

namespace sgmi::model {

enum class Estimator { JSD, DV };

/// Signed components of the maximized objective: total = pos + head_neg +
/// tail_neg for the unsupervised estimate, and total = sup + lambda * (pos +
/// head_neg + tail_neg) when a supervised term is present. `sup` is the
/// negated supervised loss (log-likelihood for classification, negative mean
/// squared error for regression). DV pools head and tail negatives into one
/// term, reported as tail_neg with head_neg = 0.
struct LossReport {
  double total = 0.0;
  double pos = 0.0;
  double head_neg = 0.0;
  double tail_neg = 0.0;
  std::optional<double> sup;
};

// Dot-product discriminator.
double score(std::span<const double> h, std::span<const double> h_tilde);

/// Permutation of batch rows that shuffles nodes only within each graph's block.
std::vector<std::size_t> node_permutation(const GraphBatch& batch, std::uint64_t seed);
Var permute_nodes(Var x0, const GraphBatch& batch, std::uint64_t seed);

/// Scores of positive (h_i, h~_i), head (h^_i, h~_i) and tail (h_j, h~_i), j != i,
/// pairs. Tail pairs are ordered by i, then j.
struct PairScores {
  Var positive;  // B x 1
  Var head;      // B x 1
  Var tail;      // B(B-1) x 1
};
PairScores head_tail_scores(Var h, Var h_corrupt, Var h_tilde);

struct ObjectiveTerms {
  Var total;
  Var pos;
  Var head_neg;
  Var tail_neg;
};

/// E[-sp(-T_pos)] - E[sp(T_tail)] - E[sp(T_head)].
ObjectiveTerms jsd_objective(const PairScores& scores);
/// E[T_pos] - log E[exp(T_neg)] with head and tail negatives pooled.
ObjectiveTerms dv_objective(const PairScores& scores);

LossReport to_report(const ObjectiveTerms& terms);

struct UnsupervisedPass {
  ObjectiveTerms terms;
  Encoder::Output encoded;
  Var h_corrupt;
  Var h_tilde;
  LossReport report;
};

/// Full unsupervised forward pass: encode, reconstruct h~ from generated
/// subgraphs, re-encode node-shuffled X0 for head negatives, pair across the
/// batch for tail negatives, and apply the estimator. The result is to be
/// maximized. `seed` drives the node shuffle.
UnsupervisedPass unsupervised_objective(Tape& tape, const Model& model, const GraphBatch& batch, Estimator estimator,
                                        std::uint64_t seed);

// Mean negative log-likelihood of integer class labels under row-wise softmax.
Var cross_entropy(Var logits, std::span<const int> labels);
Var mean_squared_error(Var predictions, const Tensor& targets);

struct SemiPass {
  Var total;  // maximized
  LossReport report;
};

/// Supervised term on the first `num_labeled` graphs of `batch` plus lambda
/// times the unsupervised objective over every graph in it. With
/// `include_unsupervised == false` only the supervised term is built.
SemiPass semi_supervised_objective(Tape& tape, const Model& model, const GraphBatch& batch, std::size_t num_labeled,
                                   double lambda, Estimator estimator, std::uint64_t seed,
                                   bool include_unsupervised = true);

/// Convenience form: labeled graphs first, then unlabeled, in one batch.
SemiPass semi_supervised_loss(Tape& tape, const Model& model, std::span<const graph::Graph> labeled,
                              std::span<const graph::Graph> unlabeled, double lambda, Estimator estimator,
                              std::uint64_t seed);

}  // namespace sgmi::model
