#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgmi/graph/graph.hpp"
#include "sgmi/model/objective.hpp"
#include "sgmi/train/linear_eval.hpp"

namespace sgmi::train {

using graph::Graph;
using model::Model;

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  model::EncoderConfig encoder;
  model::GeneratorConfig generator;
  model::Estimator estimator = model::Estimator::JSD;
  double lambda = 1e-3;  // semi-supervised weight of the unsupervised term
  std::uint64_t seed = 0;
  std::size_t eval_every = 5;  // epochs between evaluations; 0 disables
  // Repetitions used by the periodic linear evaluation during training.
  std::size_t eval_repetitions = 1;

  // Throws ConfigError; warns when the subgraph count is not 2, 4 or 8.
  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  model::LossReport loss;
};

struct EvalRecord {
  std::size_t epoch = 0;
  double mean = 0.0;  // accuracy, or validation MAE for regression
  double std = 0.0;
};

struct RunRecord {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  std::optional<std::size_t> best_epoch;
  std::optional<double> test_metric;  // semi-supervised runs
  std::string test_metric_name;
  double wall_seconds = 0.0;
  std::string config_snapshot;

  // Mean total objective of each epoch, in order.
  std::vector<double> epoch_objectives() const;
};

/// step,total,pos,head_neg,tail_neg[,sup] with %.17g values; the sup column
/// appears when any step carries a supervised term.
void write_metrics_csv(const RunRecord& record, const std::filesystem::path& path);
/// epoch,mean,std for each periodic evaluation.
void write_evals_csv(const RunRecord& record, const std::filesystem::path& path);

struct TrainResult {
  Model model;                 // after the last epoch
  std::optional<Model> best;   // at the best evaluation, when any ran
  RunRecord record;
};

/// Node features for every graph (degree one-hot where the data has none)
/// and the model configuration implied by the data and `config`.
model::ModelConfig prepare(std::vector<Graph>& graphs, const TrainConfig& config,
                           std::size_t head_outputs = 0, model::TaskKind task = model::TaskKind::Classification);

/// Fits graphs without attributes to the degree clamp stored in `model` and
/// checks feature widths. Throws DimensionError on a mismatch.
void conform(const Model& model, std::vector<Graph>& graphs);

/// h(G) for every graph, no gradient recording, in chunks of `batch_size`.
Tensor embed_dataset(const Model& model, std::span<const Graph> graphs, std::size_t batch_size = 128);
std::vector<int> labels_of(std::span<const Graph> graphs);

Model clone(const Model& model);

/// Algorithm 1: shuffled mini-batches each epoch, Adam on the negated
/// objective, periodic linear evaluation on the training graphs to keep the
/// best parameters. Writes best.ckpt and final.ckpt into `out_dir` if given.
/// Throws NumericalError naming the step when the objective is not finite.
TrainResult train_unsupervised(const TrainConfig& config, const EvalConfig& eval, std::vector<Graph> graphs,
                               const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct SemiSplits {
  std::vector<Graph> labeled;
  std::vector<Graph> unlabeled;
  std::vector<Graph> validation;
  std::vector<Graph> test;
};

/// Head outputs for every graph in the splits, no gradient recording.
Tensor predict(const Model& model, std::span<const Graph> graphs, std::size_t batch_size = 128);
double mean_absolute_error(const Tensor& predictions, std::span<const Graph> graphs);
double classification_accuracy(const Tensor& logits, std::span<const Graph> graphs);

/// Supervised loss on labeled batches plus lambda times the unsupervised
/// objective over each labeled batch joined with an unlabeled batch. Model
/// selection on the validation split; the test metric (accuracy or MAE) is
/// taken from the selected parameters. `supervised_only` drops the
/// unsupervised term but keeps batching and seeds unchanged.
TrainResult train_semisupervised(const TrainConfig& config, SemiSplits splits, model::TaskKind task,
                                 const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                 bool supervised_only = false);

}  // namespace sgmi::train
