#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sgmi/cli/config.hpp"
#include "sgmi/core/error.hpp"
#include "sgmi/core/log.hpp"
#include "sgmi/core/rng.hpp"
#include "sgmi/graph/features.hpp"
#include "sgmi/graph/synthetic.hpp"
#include "sgmi/graph/tudataset.hpp"
#include "sgmi/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace sgmi;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kNumericalError = 4;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
}

std::vector<int> require_labels(std::span<const graph::Graph> graphs) {
  auto labels = train::labels_of(graphs);
  for (int l : labels)
    if (l < 0) throw LoadError("dataset has graphs without class labels");
  return labels;
}

struct TrainArgs {
  std::string config, out, data;
  std::optional<std::uint64_t> seed;
  bool semi = false;
};

train::SemiSplits split(std::vector<graph::Graph> graphs, const cli::SemiSplitSizes& sizes, std::uint64_t seed) {
  const std::size_t need = sizes.labeled + sizes.validation + sizes.test;
  if (sizes.labeled == 0) throw ConfigError("data.semi_labeled must be positive");
  if (need > graphs.size()) {
    throw ConfigError("semi-supervised splits need " + std::to_string(need) + " graphs, dataset has " +
                      std::to_string(graphs.size()));
  }
  Rng rng(mix_seed(seed, 6));
  const auto order = rng.permutation(graphs.size());
  train::SemiSplits s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& g = graphs[order[i]];
    if (i < sizes.labeled) s.labeled.push_back(std::move(g));
    else if (i < sizes.labeled + sizes.validation) s.validation.push_back(std::move(g));
    else if (i < need) s.test.push_back(std::move(g));
    else s.unlabeled.push_back(std::move(g));
  }
  return s;
}

int cmd_train(const TrainArgs& a) {
  cli::RunConfig config = cli::load_config(a.config);
  if (a.seed) config.train.seed = *a.seed;
  if (!a.data.empty()) config.data_path = a.data;
  cli::validate(config);
  if (config.data_path.empty()) throw ConfigError("config: data.path is not set and no --data given");

  graph::Dataset data = graph::load_tudataset(config.data_path);
  const bool regression = !data.graphs.empty() && !data.graphs.front().targets.empty();
  std::optional<train::SemiSplits> splits;
  if (a.semi) {
    if (regression) graph::zscore_targets(data.graphs);
    else require_labels(data.graphs);
    splits = split(data.graphs, config.semi, config.train.seed);
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  const std::string snap = cli::snapshot(config);
  write_text(out / "config.ini", snap);

  nlohmann::json record;
  if (a.semi) {
    const auto task = regression ? model::TaskKind::Regression : model::TaskKind::Classification;
    auto result = train::train_semisupervised(config.train, std::move(*splits), task, out);
    result.record.config_snapshot = snap;
    train::write_metrics_csv(result.record, out / "metrics.csv");
    train::write_evals_csv(result.record, out / "evals.csv");
    const std::string metric = "test_" + result.record.test_metric_name;
    record[metric] = result.record.test_metric.value_or(0.0);
    record["best_epoch"] = result.record.best_epoch.value_or(0);
    record["wall_seconds"] = result.record.wall_seconds;
    std::cout << metric << ' ' << fmt(result.record.test_metric.value_or(0.0)) << '\n';
  } else {
    auto result = train::train_unsupervised(config.train, config.eval, data.graphs, out);
    result.record.config_snapshot = snap;
    train::write_metrics_csv(result.record, out / "metrics.csv");
    train::write_evals_csv(result.record, out / "evals.csv");
    record["best_epoch"] = result.record.best_epoch.value_or(0);
    record["wall_seconds"] = result.record.wall_seconds;
    const auto labels = train::labels_of(data.graphs);
    if (std::none_of(labels.begin(), labels.end(), [](int l) { return l < 0; }) &&
        data.graphs.size() >= config.eval.folds) {
      const model::Model& chosen = result.best ? *result.best : result.model;
      std::vector<graph::Graph> graphs = data.graphs;
      train::conform(chosen, graphs);
      const auto r = train::evaluate_linear(train::embed_dataset(chosen, graphs), labels, config.eval);
      record["accuracy"] = {{"mean", r.mean}, {"std", r.std}, {"repetitions", r.repetition_means}};
      std::cout << "accuracy " << fmt(r.mean) << ' ' << fmt(r.std) << '\n';
    }
  }
  write_text(out / "record.json", record.dump(2) + "\n");
  return kOk;
}

struct EvalArgs {
  std::string checkpoint, data, config, embeddings;
};

// Rows of d values followed by the label, as written by `export --what embeddings`.
std::pair<ad::Tensor, std::vector<int>> read_embeddings(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw LoadError(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
    }
    if (row.size() < 2) throw LoadError(path.string() + ":" + std::to_string(line_no) + ": need values and a label");
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": inconsistent column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw LoadError(path.string() + ": no rows");
  const std::size_t d = rows.front().size() - 1;
  ad::Tensor x({rows.size(), d});
  std::vector<int> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(rows[i].begin(), d, x.row(i).begin());
    labels.push_back(static_cast<int>(rows[i].back()));
  }
  return {std::move(x), std::move(labels)};
}

std::pair<model::Model, std::vector<graph::Graph>> load_model_and_data(const std::string& checkpoint,
                                                                       const std::string& data) {
  model::Model m = model::load_checkpoint(checkpoint);
  std::vector<graph::Graph> graphs = graph::load_tudataset(data).graphs;
  train::conform(m, graphs);
  return {std::move(m), std::move(graphs)};
}

int cmd_eval(const EvalArgs& a) {
  train::EvalConfig eval;
  if (!a.config.empty()) eval = cli::load_config(a.config).eval;
  eval.validate();
  const bool from_file = !a.embeddings.empty();
  if (from_file == (!a.checkpoint.empty() || !a.data.empty())) {
    throw ConfigError("eval: give either --embeddings, or both --checkpoint and --data");
  }
  if (!from_file && (a.checkpoint.empty() || a.data.empty())) {
    throw ConfigError("eval: --checkpoint and --data go together");
  }
  ad::Tensor x;
  std::vector<int> labels;
  if (from_file) {
    std::tie(x, labels) = read_embeddings(a.embeddings);
  } else {
    auto [m, graphs] = load_model_and_data(a.checkpoint, a.data);
    labels = require_labels(graphs);
    x = train::embed_dataset(m, graphs);
  }
  if (labels.size() < eval.folds) {
    throw LoadError("eval: " + std::to_string(labels.size()) + " graphs for " + std::to_string(eval.folds) + " folds");
  }
  const auto r = train::evaluate_linear(x, labels, eval);
  std::cout << "accuracy " << fmt(r.mean) << ' ' << fmt(r.std) << '\n';
  return kOk;
}

struct ExportArgs {
  std::string checkpoint, data, what, out;
};

int cmd_export(const ExportArgs& a) {
  auto [m, graphs] = load_model_and_data(a.checkpoint, a.data);
  std::ostringstream text;
  if (a.what == "embeddings") {
    const ad::Tensor h = train::embed_dataset(m, graphs);
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      for (double v : h.row(i)) text << fmt(v) << ',';
      text << graphs[i].label.value_or(-1) << '\n';
    }
  } else {
    text << "graph_id,node_id,subgraph_id,weight\n";
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      ad::Tape tape(false);
      const auto batch = graph::make_batch(std::span(graphs).subspan(g, 1));
      const auto enc = m.encoder().encode(tape, batch);
      const auto masks = m.generator().masks(tape, enc.x_g);
      for (std::size_t v = 0; v < graphs[g].num_nodes; ++v)
        for (std::size_t s = 0; s < masks.size(); ++s)
          text << g << ',' << v << ',' << s << ',' << fmt(masks[s].value()[v]) << '\n';
    }
  }
  write_text(a.out, text.str());
  return kOk;
}

struct SynthArgs {
  std::uint64_t seed = 0;
  std::size_t graphs = 200;
  std::size_t classes = 2;
  bool regression = false;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  if (a.graphs == 0) throw ConfigError("synth: --graphs must be positive");
  if (!a.regression && a.classes < 2) throw ConfigError("synth: --classes must be at least 2");
  if (!a.regression && a.classes > a.graphs) throw ConfigError("synth: more classes than graphs");
  const auto graphs =
      a.regression ? graph::synthetic_regression_dataset(a.seed, a.graphs) : graph::synthetic_dataset(a.seed, a.graphs, a.classes);
  const fs::path out(a.out);
  std::string name = out.filename().string();
  if (name.empty()) name = out.parent_path().filename().string();
  fs::create_directories(out);
  graph::write_tudataset(out, name, graphs);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph representation learning by subgraph mutual information"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log", log_level, "Log level: debug, info, warning, error, off")
      ->check(CLI::IsMember({"debug", "info", "warning", "error", "off"}));

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes checkpoints, metrics.csv and config.ini");
  train_cmd->add_option("--config", ta.config, "Run configuration (INI)")->required();
  train_cmd->add_option("--out", ta.out, "Output directory")->required();
  train_cmd->add_option("--data", ta.data, "TUDataset directory, overrides data.path");
  train_cmd->add_option("--seed", ta.seed, "Master seed, overrides train.seed");
  train_cmd->add_flag("--semi", ta.semi, "Semi-supervised training with a prediction head");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Linear evaluation; prints 'accuracy <mean> <std>'");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "Model checkpoint");
  eval_cmd->add_option("--data", ea.data, "TUDataset directory");
  eval_cmd->add_option("--config", ea.config, "Run configuration supplying the [eval] section");
  eval_cmd->add_option("--embeddings", ea.embeddings, "Embedding CSV from 'export --what embeddings'");

  ExportArgs xa;
  auto* export_cmd = app.add_subcommand("export", "Export graph embeddings or subgraph masks as CSV");
  export_cmd->add_option("--checkpoint", xa.checkpoint, "Model checkpoint")->required();
  export_cmd->add_option("--data", xa.data, "TUDataset directory")->required();
  export_cmd->add_option("--what", xa.what, "embeddings or masks")->required()->check(CLI::IsMember({"embeddings", "masks"}));
  export_cmd->add_option("--out", xa.out, "Output CSV file")->required();

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Write a planted-motif dataset in TUDataset format");
  synth_cmd->add_option("--seed", sa.seed, "Generator seed");
  synth_cmd->add_option("--graphs", sa.graphs, "Number of graphs");
  synth_cmd->add_option("--classes", sa.classes, "Number of classes");
  synth_cmd->add_flag("--regression", sa.regression, "Motif-count regression targets instead of classes");
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  const std::map<std::string, LogLevel> levels = {{"debug", LogLevel::Debug}, {"info", LogLevel::Info},
                                                  {"warning", LogLevel::Warning}, {"error", LogLevel::Error},
                                                  {"off", LogLevel::Off}};
  set_log_level(levels.at(log_level));

  try {
    if (*train_cmd) return cmd_train(ta);
    if (*eval_cmd) return cmd_eval(ea);
    if (*export_cmd) return cmd_export(xa);
    if (*synth_cmd) return cmd_synth(sa);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const LoadError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const IntegrityError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
