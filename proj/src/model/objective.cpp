#include "sgmi/model/objective.hpp"

#include <algorithm>
#include <cmath>

#include "sgmi/core/error.hpp"
#include "sgmi/core/rng.hpp"

namespace sgmi::model {

double score(std::span<const double> h, std::span<const double> h_tilde) {
  if (h.size() != h_tilde.size()) {
    throw DimensionError("score: lengths " + std::to_string(h.size()) + " and " + std::to_string(h_tilde.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) s += h[k] * h_tilde[k];
  return s;
}

std::vector<std::size_t> node_permutation(const GraphBatch& batch, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> perm(batch.num_nodes);
  for (std::size_t g = 0; g < batch.num_graphs; ++g) {
    const std::size_t off = batch.node_offsets[g];
    const auto local = rng.permutation(batch.node_counts[g]);
    for (std::size_t i = 0; i < local.size(); ++i) perm[off + i] = off + local[i];
  }
  return perm;
}

Var permute_nodes(Var x0, const GraphBatch& batch, std::uint64_t seed) {
  return ad::gather_rows(x0, node_permutation(batch, seed));
}

namespace {

// Row-wise dot products of two equally shaped matrices, as a column.
Var row_dots(Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("score: shapes " + ad::shape_str(a.shape()) + " and " + ad::shape_str(b.shape()));
  }
  Tape& tape = a.tape();
  return ad::matmul(ad::mul(a, b), tape.constant(Tensor({a.value().cols(), 1}, 1.0)));
}

}  // namespace

PairScores head_tail_scores(Var h, Var h_corrupt, Var h_tilde) {
  const std::size_t b = h.value().rows();
  if (b < 2) throw ContractError("head_tail_scores: batch size must exceed 1 to form tail negatives");
  PairScores s;
  s.positive = row_dots(h, h_tilde);
  s.head = row_dots(h_corrupt, h_tilde);
  // all[j * b + i] = h_j . h~_i
  Var all = ad::reshape(ad::matmul(h, ad::transpose(h_tilde)), {b * b, 1});
  std::vector<std::size_t> off_diagonal;
  off_diagonal.reserve(b * (b - 1));
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j)
      if (i != j) off_diagonal.push_back(j * b + i);
  s.tail = ad::gather_rows(all, off_diagonal);
  return s;
}

namespace {

void require_nonempty(const PairScores& s) {
  if (s.positive.value().numel() == 0 || s.head.value().numel() == 0 || s.tail.value().numel() == 0) {
    throw ContractError("objective: empty pair set (batch size must exceed 1)");
  }
}

}  // namespace

ObjectiveTerms jsd_objective(const PairScores& s) {
  require_nonempty(s);
  ObjectiveTerms t;
  t.pos = ad::scale(ad::mean(ad::softplus(ad::scale(s.positive, -1.0))), -1.0);
  t.tail_neg = ad::scale(ad::mean(ad::softplus(s.tail)), -1.0);
  t.head_neg = ad::scale(ad::mean(ad::softplus(s.head)), -1.0);
  t.total = ad::add(ad::add(t.pos, t.tail_neg), t.head_neg);
  return t;
}

ObjectiveTerms dv_objective(const PairScores& s) {
  require_nonempty(s);
  Tape& tape = s.positive.tape();
  const Var parts[] = {s.head, s.tail};
  Var negatives = ad::stack_rows(parts);
  double shift = -INFINITY;
  for (double x : negatives.value().data()) shift = std::max(shift, x);
  // log E[e^T] = shift + log E[e^(T - shift)]
  Var shifted = ad::sub(negatives, tape.constant(Tensor::scalar(shift)));
  Var log_mean_exp = ad::add(ad::log(ad::mean(ad::exp(shifted))), tape.constant(Tensor::scalar(shift)));
  ObjectiveTerms t;
  t.pos = ad::mean(s.positive);
  t.tail_neg = ad::scale(log_mean_exp, -1.0);
  t.head_neg = tape.constant(Tensor::scalar(0.0));
  t.total = ad::add(t.pos, t.tail_neg);
  return t;
}

LossReport to_report(const ObjectiveTerms& t) {
  return {t.total.value().item(), t.pos.value().item(), t.head_neg.value().item(), t.tail_neg.value().item(),
          std::nullopt};
}

UnsupervisedPass unsupervised_objective(Tape& tape, const Model& model, const GraphBatch& batch, Estimator estimator,
                                        std::uint64_t seed) {
  if (batch.num_graphs < 2) {
    throw ContractError("unsupervised objective: batch has " + std::to_string(batch.num_graphs) +
                        " graph(s); use a batch of at least 2 to form tail negatives");
  }
  const Encoder& enc = model.encoder();
  const Readout kind = enc.config().readout;
  UnsupervisedPass out;
  out.encoded = enc.encode(tape, batch);
  out.h_tilde = model.generator().reconstruct(tape, out.encoded.x_g, batch, kind);
  out.h_corrupt = enc.propagate(tape, permute_nodes(out.encoded.x0, batch, seed), batch).h;
  const PairScores scores = head_tail_scores(out.encoded.h, out.h_corrupt, out.h_tilde);
  out.terms = estimator == Estimator::JSD ? jsd_objective(scores) : dv_objective(scores);
  out.report = to_report(out.terms);
  return out;
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  if (z.rows() != labels.size()) {
    throw DimensionError("cross_entropy: " + std::to_string(z.rows()) + " rows for " + std::to_string(labels.size()) +
                         " labels");
  }
  std::vector<std::size_t> picks;
  picks.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= z.cols()) {
      throw IndexError("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                       std::to_string(z.cols()) + ")");
    }
    picks.push_back(i * z.cols() + static_cast<std::size_t>(labels[i]));
  }
  Var flat = ad::reshape(ad::log_softmax_rows(logits), {z.numel(), 1});
  return ad::scale(ad::mean(ad::gather_rows(flat, picks)), -1.0);
}

Var mean_squared_error(Var predictions, const Tensor& targets) {
  if (predictions.value().rows() != targets.rows() || predictions.value().cols() != targets.cols()) {
    throw DimensionError("mean_squared_error: " + ad::shape_str(predictions.shape()) + " vs " +
                         ad::shape_str(targets.shape()));
  }
  Var diff = ad::sub(predictions, predictions.tape().constant(targets.reshaped(predictions.shape())));
  return ad::mean(ad::mul(diff, diff));
}

SemiPass semi_supervised_objective(Tape& tape, const Model& model, const GraphBatch& batch, std::size_t num_labeled,
                                   double lambda, Estimator estimator, std::uint64_t seed, bool include_unsupervised) {
  if (!(lambda >= 0.0)) throw ConfigError("semi-supervised: lambda must be >= 0, got " + std::to_string(lambda));
  const Mlp* head = model.head();
  if (head == nullptr) throw ContractError("semi-supervised: model has no prediction head");
  if (num_labeled == 0 || num_labeled > batch.num_graphs) {
    throw ContractError("semi-supervised: need between 1 and " + std::to_string(batch.num_graphs) + " labeled graphs");
  }

  SemiPass out;
  Encoder::Output encoded;
  std::optional<UnsupervisedPass> uns;
  if (include_unsupervised) {
    uns = unsupervised_objective(tape, model, batch, estimator, seed);
    encoded = uns->encoded;
  } else {
    encoded = model.encoder().encode(tape, batch);
  }

  std::vector<std::size_t> rows(num_labeled);
  for (std::size_t i = 0; i < num_labeled; ++i) rows[i] = i;
  Var predictions = head->forward(tape, ad::gather_rows(encoded.h, rows));
  Var sup_loss;
  if (model.config().task == TaskKind::Classification) {
    sup_loss = cross_entropy(predictions, std::span<const int>(batch.labels).first(num_labeled));
  } else {
    if (!batch.targets) throw ContractError("semi-supervised: regression batch has no targets");
    Tensor targets({num_labeled, batch.targets->cols()});
    std::copy_n(batch.targets->data().begin(), targets.numel(), targets.data().begin());
    sup_loss = mean_squared_error(predictions, targets);
  }
  Var sup = ad::scale(sup_loss, -1.0);
  out.total = sup;
  if (uns) {
    out.report = uns->report;
    out.total = ad::add(sup, ad::scale(uns->terms.total, lambda));
  }
  out.report.sup = sup.value().item();
  out.report.total = out.total.value().item();
  return out;
}

SemiPass semi_supervised_loss(Tape& tape, const Model& model, std::span<const graph::Graph> labeled,
                              std::span<const graph::Graph> unlabeled, double lambda, Estimator estimator,
                              std::uint64_t seed) {
  std::vector<graph::Graph> all(labeled.begin(), labeled.end());
  all.insert(all.end(), unlabeled.begin(), unlabeled.end());
  const GraphBatch batch = graph::make_batch(all);
  return semi_supervised_objective(tape, model, batch, labeled.size(), lambda, estimator, seed);
}

}  // namespace sgmi::model
