#include "sgmi/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>

#include "sgmi/autodiff/adam.hpp"
#include "sgmi/core/error.hpp"
#include "sgmi/core/log.hpp"
#include "sgmi/core/rng.hpp"
#include "sgmi/graph/features.hpp"

namespace sgmi::train {

namespace {

// Sub-streams of the master seed.
enum Stream : std::uint64_t { kInit = 1, kShuffle = 2, kPermute = 3, kEval = 4, kShuffleUnlabeled = 5 };

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order, std::size_t batch_size,
                                                   std::size_t min_last) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < order.size(); s += batch_size) {
    const std::size_t e = std::min(order.size(), s + batch_size);
    if (e - s < min_last) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s), order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return out;
}

void check_finite(const model::LossReport& r, std::size_t epoch, std::size_t step) {
  const bool ok = std::isfinite(r.total) && std::isfinite(r.pos) && std::isfinite(r.head_neg) &&
                  std::isfinite(r.tail_neg) && (!r.sup || std::isfinite(*r.sup));
  if (!ok) {
    throw NumericalError("non-finite objective at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                         " (total=" + format_double(r.total) + ", pos=" + format_double(r.pos) +
                         ", head_neg=" + format_double(r.head_neg) + ", tail_neg=" + format_double(r.tail_neg) +
                         (r.sup ? ", sup=" + format_double(*r.sup) : std::string()) + ")");
  }
}

void check_parameters(const Model& m, std::size_t epoch, std::size_t step) {
  for (const auto& p : m.params()) {
    if (!p.value.all_finite()) {
      throw NumericalError("non-finite parameter '" + p.name + "' after epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
    }
  }
}

void write_checkpoint(const Model& m, const std::optional<std::filesystem::path>& dir, const char* name) {
  if (dir) model::save_checkpoint(m, *dir / name);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train: epochs must be positive");
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2 to form tail negatives");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be positive");
  if (encoder.num_layers == 0) throw ConfigError("encoder: layers must be positive");
  if (encoder.hidden == 0) throw ConfigError("encoder: hidden must be positive");
  if (generator.kind == model::GeneratorKind::TreeSplit) {
    if (generator.depth == 0 || generator.depth > 6) throw ConfigError("generator: depth must be in [1, 6]");
  } else if (generator.heads == 0) {
    throw ConfigError("generator: heads must be positive");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("objective: lambda must be >= 0");
  if (eval_repetitions == 0) throw ConfigError("train: eval_repetitions must be positive");
  const std::size_t s = generator.num_subgraphs();
  if (s != 2 && s != 4 && s != 8) {
    log_warning("generator: " + std::to_string(s) + " subgraphs; 2, 4 or 8 are the tested settings");
  }
}

std::vector<double> RunRecord::epoch_objectives() const {
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const auto& s : steps) {
    auto& [sum, n] = acc[s.epoch];
    sum += s.loss.total;
    ++n;
  }
  std::vector<double> out;
  for (const auto& [epoch, v] : acc) out.push_back(v.first / static_cast<double>(v.second));
  return out;
}

void write_metrics_csv(const RunRecord& record, const std::filesystem::path& path) {
  const bool sup = std::any_of(record.steps.begin(), record.steps.end(), [](const StepRecord& s) {
    return s.loss.sup.has_value();
  });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << "step,total,pos,head_neg,tail_neg" << (sup ? ",sup" : "") << '\n';
  for (const auto& s : record.steps) {
    out << s.step << ',' << format_double(s.loss.total) << ',' << format_double(s.loss.pos) << ','
        << format_double(s.loss.head_neg) << ',' << format_double(s.loss.tail_neg);
    if (sup) out << ',' << format_double(s.loss.sup.value_or(0.0));
    out << '\n';
  }
}

void write_evals_csv(const RunRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << "epoch,mean,std\n";
  for (const auto& e : record.evals) out << e.epoch << ',' << format_double(e.mean) << ',' << format_double(e.std) << '\n';
}

model::ModelConfig prepare(std::vector<Graph>& graphs, const TrainConfig& config, std::size_t head_outputs,
                           model::TaskKind task) {
  if (graphs.empty()) throw ContractError("dataset is empty");
  model::ModelConfig c;
  c.degree_clamp = graph::ensure_node_features(graphs);
  c.node_in = graphs.front().node_attrs->cols();
  const bool edges = graphs.front().edge_attrs.has_value();
  for (const Graph& g : graphs) {
    if (g.node_attrs->cols() != c.node_in) throw ContractError("dataset mixes node attribute widths");
    if (g.edge_attrs.has_value() != edges) throw ContractError("dataset mixes graphs with and without edge attributes");
  }
  c.edge_in = edges ? graphs.front().edge_attrs->cols() : 0;
  c.encoder = config.encoder;
  c.generator = config.generator;
  c.head_outputs = head_outputs;
  c.task = task;
  return c;
}

void conform(const Model& model, std::vector<Graph>& graphs) {
  const auto& c = model.config();
  const bool bare = std::any_of(graphs.begin(), graphs.end(), [](const Graph& g) { return !g.node_attrs; });
  if (bare) {
    if (!c.degree_clamp) {
      throw DimensionError("data has no node attributes but the model expects " + std::to_string(c.node_in) +
                           " attribute columns");
    }
    graph::ensure_node_features(graphs, c.degree_clamp);
  }
  for (const Graph& g : graphs) {
    if (g.node_attrs->cols() != c.node_in) {
      throw DimensionError("node feature width " + std::to_string(g.node_attrs->cols()) + ", model expects " +
                           std::to_string(c.node_in));
    }
    const std::size_t e = g.edge_attrs ? g.edge_attrs->cols() : 0;
    if (e != c.edge_in && !(c.edge_in > 0 && g.edge_attrs && g.edges.empty())) {
      throw DimensionError("edge feature width " + std::to_string(e) + ", model expects " +
                           std::to_string(c.edge_in));
    }
  }
}

Tensor embed_dataset(const Model& model, std::span<const Graph> graphs, std::size_t batch_size) {
  const std::size_t d = model.config().encoder.hidden;
  Tensor out({graphs.size(), d});
  for (std::size_t s = 0; s < graphs.size(); s += batch_size) {
    const std::size_t e = std::min(graphs.size(), s + batch_size);
    const Tensor h = model.embed(graph::make_batch(graphs.subspan(s, e - s)));
    std::copy(h.data().begin(), h.data().end(), out.row(s).begin());
  }
  return out;
}

std::vector<int> labels_of(std::span<const Graph> graphs) {
  std::vector<int> out;
  out.reserve(graphs.size());
  for (const Graph& g : graphs) out.push_back(g.label.value_or(-1));
  return out;
}

Model clone(const Model& model) { return model::model_from_records(model::model_records(model)); }

TrainResult train_unsupervised(const TrainConfig& config, const EvalConfig& eval, std::vector<Graph> graphs,
                               const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  eval.validate();
  if (graphs.size() < 2) throw ContractError("train_unsupervised: need at least 2 graphs");
  const auto start = Clock::now();
  const model::ModelConfig mc = prepare(graphs, config);
  TrainResult result{Model(mc, mix_seed(config.seed, kInit)), std::nullopt, {}};
  Model& model = result.model;

  const std::vector<int> labels = labels_of(graphs);
  const bool can_eval = config.eval_every > 0 &&
                        std::none_of(labels.begin(), labels.end(), [](int l) { return l < 0; }) &&
                        graphs.size() >= eval.folds;
  EvalConfig periodic = eval;
  periodic.repetitions = config.eval_repetitions;
  periodic.seed = mix_seed(config.seed, kEval);

  ad::AdamState adam;
  adam.lr = config.lr;
  Rng shuffle(mix_seed(config.seed, kShuffle));
  const std::uint64_t permute_seed = mix_seed(config.seed, kPermute);
  std::size_t step = 0;
  double best = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = shuffle.permutation(graphs.size());
    for (const auto& idx : make_batches(order, config.batch_size, 2)) {
      const graph::GraphBatch batch = graph::make_batch(graphs, idx);
      ad::Tape tape;
      const auto pass = model::unsupervised_objective(tape, model, batch, config.estimator, mix_seed(permute_seed, step));
      check_finite(pass.report, epoch, step);
      tape.backward(ad::scale(pass.terms.total, -1.0));
      ad::adam_step(model.params(), adam);
      check_parameters(model, epoch, step);
      result.record.steps.push_back({step, epoch, pass.report});
      ++step;
    }
    if (can_eval && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      const EvalResult r = evaluate_linear(embed_dataset(model, graphs), labels, periodic);
      result.record.evals.push_back({epoch, r.mean, r.std});
      log_info("epoch " + std::to_string(epoch) + " accuracy " + format_double(r.mean));
      if (r.mean > best) {
        best = r.mean;
        result.record.best_epoch = epoch;
        result.best = clone(model);
        write_checkpoint(model, out_dir, "best.ckpt");
      }
    }
  }
  write_checkpoint(model, out_dir, "final.ckpt");
  result.record.wall_seconds = seconds_since(start);
  return result;
}

Tensor predict(const Model& model, std::span<const Graph> graphs, std::size_t batch_size) {
  const model::Mlp* head = model.head();
  if (head == nullptr) throw ContractError("predict: model has no prediction head");
  Tensor out({graphs.size(), head->out()});
  for (std::size_t s = 0; s < graphs.size(); s += batch_size) {
    const std::size_t e = std::min(graphs.size(), s + batch_size);
    ad::Tape tape(false);
    const auto enc = model.encoder().encode(tape, graph::make_batch(graphs.subspan(s, e - s)));
    const Tensor y = head->forward(tape, enc.h).value();
    std::copy(y.data().begin(), y.data().end(), out.row(s).begin());
  }
  return out;
}

double mean_absolute_error(const Tensor& predictions, std::span<const Graph> graphs) {
  if (predictions.rows() != graphs.size()) throw DimensionError("mean_absolute_error: row count mismatch");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (graphs[i].targets.size() != predictions.cols()) throw DimensionError("mean_absolute_error: target width");
    for (std::size_t j = 0; j < predictions.cols(); ++j, ++n) total += std::abs(predictions(i, j) - graphs[i].targets[j]);
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

double classification_accuracy(const Tensor& logits, std::span<const Graph> graphs) {
  std::vector<int> predicted;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto r = logits.row(i);
    predicted.push_back(static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin()));
  }
  return accuracy(predicted, labels_of(graphs));
}

TrainResult train_semisupervised(const TrainConfig& config, SemiSplits splits, model::TaskKind task,
                                 const std::optional<std::filesystem::path>& out_dir, bool supervised_only) {
  config.validate();
  if (splits.labeled.empty()) throw ContractError("train_semisupervised: no labeled graphs");
  const auto start = Clock::now();
  const bool classify = task == model::TaskKind::Classification;

  // Features are fitted over all splits at once so every split shares one width.
  std::vector<Graph> all;
  for (auto* part : {&splits.labeled, &splits.unlabeled, &splits.validation, &splits.test})
    all.insert(all.end(), std::make_move_iterator(part->begin()), std::make_move_iterator(part->end()));
  std::size_t outputs = 0;
  for (const Graph& g : all) {
    if (classify) {
      if (g.label) outputs = std::max(outputs, static_cast<std::size_t>(*g.label) + 1);
    } else {
      outputs = std::max(outputs, g.targets.size());
    }
  }
  if (outputs == 0) throw ContractError("train_semisupervised: no labels or targets in the data");
  const model::ModelConfig mc = prepare(all, config, outputs, task);
  {
    std::size_t at = 0;
    for (auto* part : {&splits.labeled, &splits.unlabeled, &splits.validation, &splits.test}) {
      for (Graph& g : *part) g = std::move(all[at++]);
    }
  }
  for (const Graph& g : splits.labeled) {
    if (classify ? !g.label.has_value() : g.targets.size() != outputs) {
      throw ContractError("train_semisupervised: labeled split has a graph without a label or target");
    }
  }

  TrainResult result{Model(mc, mix_seed(config.seed, kInit)), std::nullopt, {}};
  Model& model = result.model;
  result.record.test_metric_name = classify ? "accuracy" : "mae";
  const bool use_unsupervised = !supervised_only;

  auto validation_metric = [&](const Model& m) {
    const Tensor y = predict(m, splits.validation);
    return classify ? classification_accuracy(y, splits.validation) : mean_absolute_error(y, splits.validation);
  };
  auto better = [&](double a, double b) { return classify ? a > b : a < b; };

  ad::AdamState adam;
  adam.lr = config.lr;
  Rng shuffle(mix_seed(config.seed, kShuffle));
  Rng shuffle_unlabeled(mix_seed(config.seed, kShuffleUnlabeled));
  const std::uint64_t permute_seed = mix_seed(config.seed, kPermute);
  std::size_t step = 0;
  std::optional<double> best;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto labeled = make_batches(shuffle.permutation(splits.labeled.size()), config.batch_size, 1);
    const auto unlabeled = make_batches(shuffle_unlabeled.permutation(splits.unlabeled.size()), config.batch_size, 1);
    for (std::size_t b = 0; b < labeled.size(); ++b) {
      std::vector<Graph> members;
      for (std::size_t i : labeled[b]) members.push_back(splits.labeled[i]);
      if (!unlabeled.empty()) {
        for (std::size_t i : unlabeled[b % unlabeled.size()]) members.push_back(splits.unlabeled[i]);
      }
      if (use_unsupervised && members.size() < 2) {
        throw ContractError("train_semisupervised: batch of 1 graph; the unsupervised term needs at least 2");
      }
      const graph::GraphBatch batch = graph::make_batch(members);
      ad::Tape tape;
      const auto pass = model::semi_supervised_objective(tape, model, batch, labeled[b].size(), config.lambda,
                                                          config.estimator, mix_seed(permute_seed, step),
                                                          use_unsupervised);
      check_finite(pass.report, epoch, step);
      tape.backward(ad::scale(pass.total, -1.0));
      ad::adam_step(model.params(), adam);
      check_parameters(model, epoch, step);
      result.record.steps.push_back({step, epoch, pass.report});
      ++step;
    }
    const bool due = config.eval_every > 0 && epoch % config.eval_every == 0;
    if (!splits.validation.empty() && (due || epoch == config.epochs)) {
      const double v = validation_metric(model);
      result.record.evals.push_back({epoch, v, 0.0});
      if (!best || better(v, *best)) {
        best = v;
        result.record.best_epoch = epoch;
        result.best = clone(model);
        write_checkpoint(model, out_dir, "best.ckpt");
      }
    }
  }
  write_checkpoint(model, out_dir, "final.ckpt");

  if (!splits.test.empty()) {
    const Model& chosen = result.best ? *result.best : model;
    const Tensor y = predict(chosen, splits.test);
    result.record.test_metric = classify ? classification_accuracy(y, splits.test) : mean_absolute_error(y, splits.test);
  }
  result.record.wall_seconds = seconds_since(start);
  return result;
}

}  // namespace sgmi::train
