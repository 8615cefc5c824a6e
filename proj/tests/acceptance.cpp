// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance            all criteria
//   acceptance N [M ...]  selected criteria

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include "sgmi/core/log.hpp"
#include "sgmi/graph/features.hpp"
#include "sgmi/graph/synthetic.hpp"
#include "sgmi/graph/tudataset.hpp"
#include "sgmi/model/objective.hpp"
#include "sgmi/train/linear_eval.hpp"
#include "sgmi/train/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/tempdir.hpp"

using namespace sgmi;
using graph::Graph;
using model::Model;
using sgmi::testing::check_op;
using sgmi::testing::random_tensor;

namespace {

const std::filesystem::path kMutag = std::filesystem::path(SGMI_DATA_DIR) / "MUTAG";

// Tolerances and budgets.
constexpr int kGradInstances = 20;
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kMutagAccuracy = 0.85;
constexpr double kMutagSeconds = 20.0 * 60.0;
constexpr double kMargin = 0.02;
constexpr int kMarginSeeds = 5;
constexpr int kMarginRequired = 4;
constexpr std::size_t kMarginEpochs = 20;
constexpr double kPartitionTolerance = 1e-10;
constexpr double kReconstructionTolerance = 1e-9;
constexpr double kClosedFormTolerance = 1e-9;
constexpr double kPermutationTolerance = 1e-9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Graph> mutag_graphs() { return graph::load_tudataset(kMutag).graphs; }

model::ModelConfig default_model(std::vector<Graph>& graphs) { return train::prepare(graphs, train::TrainConfig{}); }

// ---- 1 ----

Outcome gradient_suite() {
  using ad::Var;
  using OpFn = std::function<Var(ad::Tape&, std::span<const Var>)>;
  using Maker = std::function<std::vector<ad::Tensor>(Rng&)>;
  const Maker one = [](Rng& r) { return std::vector<ad::Tensor>{random_tensor(r, 3, 4)}; };
  const Maker two = [](Rng& r) { return std::vector<ad::Tensor>{random_tensor(r, 3, 4), random_tensor(r, 3, 4)}; };
  const Maker wide = [](Rng& r) { return std::vector<ad::Tensor>{random_tensor(r, 3, 4, -4.0, 4.0)}; };
  const Maker positive = [](Rng& r) { return std::vector<ad::Tensor>{random_tensor(r, 3, 4, 0.2, 3.0)}; };
  const Maker kinked = [](Rng& r) {
    ad::Tensor t = random_tensor(r, 3, 4);
    sgmi::testing::avoid_zero(t, 1e-3);
    return std::vector<ad::Tensor>{t};
  };
  const Maker broadcast = [](Rng& r) {
    return std::vector<ad::Tensor>{random_tensor(r, 3, 4), random_tensor(r, 1, 4), random_tensor(r, 3, 1)};
  };
  const std::vector<std::tuple<std::string, OpFn, Maker>> ops = {
      {"matmul", [](auto&, auto v) { return ad::matmul(v[0], v[1]); },
       [](Rng& r) { return std::vector<ad::Tensor>{random_tensor(r, 3, 4), random_tensor(r, 4, 2)}; }},
      {"transpose", [](auto&, auto v) { return ad::transpose(v[0]); }, one},
      {"add", [](auto&, auto v) { return ad::sub(ad::add(v[0], v[1]), v[2]); }, broadcast},
      {"sub", [](auto&, auto v) { return ad::sub(v[0], v[1]); }, two},
      {"mul", [](auto&, auto v) { return ad::mul(ad::mul(v[0], v[1]), v[2]); }, broadcast},
      {"scale", [](auto&, auto v) { return ad::scale(v[0], 2.5); }, one},
      {"relu", [](auto&, auto v) { return ad::relu(v[0]); }, kinked},
      {"softplus", [](auto&, auto v) { return ad::softplus(v[0]); }, wide},
      {"log", [](auto&, auto v) { return ad::log(v[0]); }, positive},
      {"exp", [](auto&, auto v) { return ad::exp(v[0]); }, wide},
      {"softmax_rows", [](auto&, auto v) { return ad::softmax_rows(v[0]); }, wide},
      {"log_softmax_rows", [](auto&, auto v) { return ad::log_softmax_rows(v[0]); }, wide},
      {"stack_rows", [](auto&, auto v) { const Var p[] = {v[0], v[1], v[0]}; return ad::stack_rows(p); }, two},
      {"gather_rows", [](auto&, auto v) { const std::size_t i[] = {2, 0, 2, 1}; return ad::gather_rows(v[0], i); }, one},
      {"scatter_add_rows",
       [](auto&, auto v) { const std::size_t i[] = {1, 1, 3}; return ad::scatter_add_rows(v[0], i, 4); }, one},
      {"row_sum_segments",
       [](auto&, auto v) { const std::size_t s[] = {1, 0, 1}; return ad::row_sum_segments(v[0], s, 2); }, one},
      {"column", [](auto&, auto v) { return ad::column(v[0], 1); }, one},
      {"reshape", [](auto&, auto v) { return ad::reshape(v[0], {6, 2}); }, one},
      {"sum", [](auto&, auto v) { return ad::sum(v[0]); }, one},
      {"mean", [](auto&, auto v) { return ad::mean(v[0]); }, one},
  };
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  auto note = [&](const std::string& name, double e) {
    if (e > worst || worst_name.empty()) worst = std::max(worst, e), worst_name = name;
  };
  for (const auto& [name, f, make] : ops) {
    for (int s = 0; s < kGradInstances; ++s) {
      Rng rng(mix_seed(0xacc, static_cast<std::uint64_t>(s)));
      note(name, check_op(f, make(rng), static_cast<std::uint64_t>(s)).max_error);
    }
  }
  for (auto est : {model::Estimator::JSD, model::Estimator::DV}) {
    const std::string name = est == model::Estimator::JSD ? "jsd" : "dv";
    for (int s = 0; s < kGradInstances; ++s) {
      Rng rng(mix_seed(0xe57, static_cast<std::uint64_t>(s)));
      const std::size_t b = 2 + static_cast<std::size_t>(s) % 6;
      const OpFn f = [est](ad::Tape&, std::span<const Var> v) {
        const auto scores = model::head_tail_scores(v[0], v[1], v[2]);
        return (est == model::Estimator::JSD ? model::jsd_objective(scores) : model::dv_objective(scores)).total;
      };
      note(name, check_op(f, {random_tensor(rng, b, 5), random_tensor(rng, b, 5), random_tensor(rng, b, 5)},
                          static_cast<std::uint64_t>(s))
                     .max_error);
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kGradTolerance && secs < kGradSeconds,
          fmt("%zu ops + 2 estimators x %d instances, worst rel err %.2e (%s) <= %.0e, %.1fs < %.0fs", ops.size(),
              kGradInstances, worst, worst_name.c_str(), kGradTolerance, secs, kGradSeconds)};
}

// ---- 2 ----

Outcome mutag_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  auto graphs = mutag_graphs();
  train::TrainConfig config;  // 4 layers, d=128, batch 128, lr 1e-3, 100 epochs, tree-split T=2
  train::EvalConfig eval;
  auto result = train::train_unsupervised(config, eval, graphs);
  bool finite = true;
  for (const auto& s : result.record.steps) finite = finite && std::isfinite(s.loss.total);
  const Model& chosen = result.best ? *result.best : result.model;
  train::conform(chosen, graphs);
  const auto r = train::evaluate_linear(train::embed_dataset(chosen, graphs), train::labels_of(graphs), eval);
  const double secs = seconds_since(t0);
  return {finite && r.mean >= kMutagAccuracy && secs <= kMutagSeconds,
          fmt("accuracy %.4f +- %.4f >= %.2f (best epoch %zu), %.0fs <= %.0fs", r.mean, r.std, kMutagAccuracy,
              result.record.best_epoch.value_or(0), secs, kMutagSeconds)};
}

// ---- 3 ----

struct Margin {
  int wins = 0;
  std::string detail;
};

Margin margins(const std::function<std::vector<Graph>(std::uint64_t)>& load) {
  Margin m;
  for (int s = 0; s < kMarginSeeds; ++s) {
    auto graphs = load(static_cast<std::uint64_t>(s));
    train::TrainConfig config;
    config.seed = static_cast<std::uint64_t>(s);
    config.epochs = kMarginEpochs;
    train::EvalConfig eval;
    auto result = train::train_unsupervised(config, eval, graphs);
    train::conform(result.model, graphs);
    const Model untrained(result.model.config(), mix_seed(config.seed, 1));
    const Model& trained = result.best ? *result.best : result.model;
    const auto labels = train::labels_of(graphs);
    const double u = train::evaluate_linear(train::embed_dataset(untrained, graphs), labels, eval).mean;
    const double t = train::evaluate_linear(train::embed_dataset(trained, graphs), labels, eval).mean;
    m.wins += t - u >= kMargin;
    m.detail += fmt(" %+.1f", 100.0 * (t - u));
  }
  return m;
}

Outcome trained_vs_untrained() {
  const Margin mutag = margins([](std::uint64_t) { return mutag_graphs(); });
  const Margin synth = margins([](std::uint64_t s) { return graph::synthetic_dataset(s, 200, 2); });
  return {mutag.wins >= kMarginRequired && synth.wins >= kMarginRequired,
          fmt("points gained per seed, MUTAG [%s ] %d/%d, synthetic [%s ] %d/%d; need >= %.0f in %d/%d (%zu epochs)",
              mutag.detail.c_str(), mutag.wins, kMarginSeeds, synth.detail.c_str(), synth.wins, kMarginSeeds,
              100.0 * kMargin, kMarginRequired, kMarginSeeds, kMarginEpochs)};
}

// ---- 4 ----

Outcome partition_invariant() {
  auto graphs = mutag_graphs();
  const std::vector<Graph> some(graphs.begin(), graphs.begin() + 16);
  auto cfg = default_model(graphs);
  const auto batch = graph::make_batch(some);
  double worst = 0.0;
  int models = 0;
  for (std::size_t depth : {1u, 2u, 3u}) {
    cfg.generator.depth = depth;
    for (std::uint64_t s = 0; s < 100; ++s, ++models) {
      const Model m(cfg, mix_seed(0x9a, s * 4 + depth));
      ad::Tape tape(false);
      const auto out = m.encoder().encode(tape, batch);
      const auto masks = m.generator().masks(tape, out.x_g);
      for (std::size_t v = 0; v < batch.num_nodes; ++v) {
        double total = 0.0;
        for (const auto& mask : masks) total += mask.value()[v];
        worst = std::max(worst, std::abs(total - 1.0));
      }
    }
  }
  return {worst <= kPartitionTolerance,
          fmt("%d parameterizations, T in {1,2,3}, max |sum - 1| = %.2e <= %.0e", models, worst,
              kPartitionTolerance)};
}

// ---- 5 ----

Outcome reconstruction_identity() {
  auto graphs = mutag_graphs();
  auto cfg = default_model(graphs);
  const auto batch = graph::make_batch(graphs);
  double worst = 0.0, scale = 0.0;
  for (std::size_t depth : {1u, 2u, 3u}) {
    cfg.generator.depth = depth;
    const Model m(cfg, depth);
    const auto& kernel = m.generator().kernel();
    for (double& w : kernel.weights().value.data()) w = 1.0;
    kernel.bias().value[0] = 0.0;
    ad::Tape tape(false);
    const auto out = m.encoder().encode(tape, batch);
    const auto rec = m.generator().reconstruct(tape, out.x_g, batch, cfg.encoder.readout);
    for (std::size_t i = 0; i < rec.value().numel(); ++i) {
      worst = std::max(worst, std::abs(rec.value()[i] - out.h.value()[i]));
      scale = std::max(scale, std::abs(out.h.value()[i]));
    }
  }
  return {worst <= kReconstructionTolerance,
          fmt("MUTAG, T in {1,2,3}, max |h~ - h| = %.2e <= %.0e (max |h| %.1f)", worst, kReconstructionTolerance,
              scale)};
}

// ---- 6 ----

Outcome closed_form_losses() {
  auto graphs = mutag_graphs();
  Model m(default_model(graphs), 0);
  for (auto& p : m.params()) std::fill(p.value.data().begin(), p.value.data().end(), 0.0);
  const std::vector<Graph> first(graphs.begin(), graphs.begin() + 128);
  const auto batch = graph::make_batch(first);
  ad::Tape tape(false);
  const double jsd = model::unsupervised_objective(tape, m, batch, model::Estimator::JSD, 1).report.total;
  const double dv = model::unsupervised_objective(tape, m, batch, model::Estimator::DV, 1).report.total;
  const double jsd_err = std::abs(jsd + 3.0 * std::log(2.0));
  return {jsd_err <= kClosedFormTolerance && std::abs(dv) <= kClosedFormTolerance,
          fmt("JSD %.12f (|+3ln2| %.1e), DV %.1e, tolerance %.0e", jsd, jsd_err, dv, kClosedFormTolerance)};
}

// ---- 7 ----

Graph relabel(const Graph& g, Rng& rng) {
  std::vector<std::size_t> perm(g.num_nodes);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  Graph out = g;
  for (std::size_t v = 0; v < g.num_nodes; ++v)
    for (std::size_t c = 0; c < g.node_attrs->cols(); ++c) (*out.node_attrs)(perm[v], c) = (*g.node_attrs)(v, c);
  std::vector<std::size_t> order(g.edges.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  for (std::size_t e = 0; e < order.size(); ++e) {
    const auto& src = g.edges[order[e]];
    out.edges[e] = {perm[src.src], perm[src.dst]};
    if (g.edge_attrs)
      for (std::size_t c = 0; c < g.edge_attrs->cols(); ++c) (*out.edge_attrs)(e, c) = (*g.edge_attrs)(order[e], c);
  }
  return out;
}

Outcome permutation_invariance() {
  auto graphs = mutag_graphs();
  const Model m(default_model(graphs), 3);
  Rng rng(17);
  std::vector<Graph> shuffled;
  for (const Graph& g : graphs) shuffled.push_back(relabel(g, rng));
  const auto a = train::embed_dataset(m, graphs), b = train::embed_dataset(m, shuffled);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return {worst < kPermutationTolerance,
          fmt("all %zu MUTAG graphs relabeled, max coordinate change %.2e < %.0e", graphs.size(), worst,
              kPermutationTolerance)};
}

// ---- 8 ----

Outcome dataset_fidelity() {
  const auto ds = graph::load_tudataset(kMutag);
  const bool ok = ds.meta.num_graphs == 188 && std::abs(ds.meta.avg_nodes - 17.93) <= 0.01 &&
                  std::abs(ds.meta.avg_edges - 19.79) <= 0.01;
  return {ok, fmt("%zu graphs (188), avg nodes %.4f (17.93 +- 0.01), avg edges %.4f (19.79 +- 0.01)",
                  ds.meta.num_graphs, ds.meta.avg_nodes, ds.meta.avg_edges)};
}

// ---- 9 ----

train::SemiSplits regression_splits(std::uint64_t seed) {
  auto graphs = graph::synthetic_regression_dataset(seed, 300);
  train::SemiSplits s;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    auto& dest = i < 100 ? s.labeled : i < 150 ? s.validation : i < 200 ? s.test : s.unlabeled;
    dest.push_back(std::move(graphs[i]));
  }
  return s;
}

Outcome semi_supervised() {
  // Desk-scale budget: 3 layers, d=32, 30 epochs.
  train::TrainConfig config;
  config.encoder.num_layers = 3;
  config.encoder.hidden = 32;
  config.batch_size = 32;
  config.epochs = 30;
  config.eval_every = 5;

  config.lambda = 0.0;
  const auto zero = train::train_semisupervised(config, regression_splits(0), model::TaskKind::Regression);
  const auto sup =
      train::train_semisupervised(config, regression_splits(0), model::TaskKind::Regression, std::nullopt, true);
  bool identical = zero.record.steps.size() == sup.record.steps.size();
  for (std::size_t i = 0; identical && i < zero.record.steps.size(); ++i)
    identical = *zero.record.steps[i].loss.sup == *sup.record.steps[i].loss.sup;
  const auto pa = model::model_records(zero.model), pb = model::model_records(sup.model);
  for (std::size_t i = 0; identical && i < pa.size(); ++i) identical = pa[i].value == pb[i].value;

  config.lambda = 1e-3;
  const auto splits = regression_splits(1);
  double baseline = 0.0;
  for (const auto& g : splits.test) baseline += std::abs(g.targets[0]) / static_cast<double>(splits.test.size());
  const auto semi = train::train_semisupervised(config, splits, model::TaskKind::Regression);
  const double mae = semi.record.test_metric.value_or(INFINITY);
  return {identical && std::isfinite(mae) && mae < baseline,
          fmt("lambda=0 vs supervised: %s over %zu steps; lambda=1e-3 test MAE %.4f < zero-predictor %.4f",
              identical ? "bitwise identical" : "DIFFERENT", zero.record.steps.size(), mae, baseline)};
}

// ---- 10 ----

int run_cli(const std::string& args) {
  const int status = std::system((std::string("\"") + SGMI_CLI_PATH + "\" --log off " + args).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  sgmi::testing::TempDir dir("acceptance-det");
  sgmi::testing::write_file(dir / "run.ini", "[data]\npath = " + kMutag.string() +
                                                 "\n[train]\nepochs = 3\nseed = 11\neval_every = 0\n"
                                                 "[eval]\nrepetitions = 1\n");
  const std::string cfg = "\"" + (dir / "run.ini").string() + "\"";
  const int a = run_cli("train --config " + cfg + " --out \"" + (dir / "a").string() + "\" > /dev/null");
  const int b = run_cli("train --config " + cfg + " --out \"" + (dir / "b").string() + "\" > /dev/null");
  const std::string ma = sgmi::testing::read_file(dir / "a" / "metrics.csv");
  const std::string mb = sgmi::testing::read_file(dir / "b" / "metrics.csv");
  const bool same = a == 0 && b == 0 && !ma.empty() && ma == mb;
  return {same, fmt("two CLI runs on MUTAG (3 epochs, seed 11): exit %d/%d, metrics.csv %zu bytes, %s", a, b,
                    ma.size(), same ? "byte-identical" : "DIFFERENT")};
}

const std::vector<std::pair<const char*, Outcome (*)()>> kCriteria = {
    {"gradient suite", gradient_suite},
    {"MUTAG end-to-end", mutag_end_to_end},
    {"trained-vs-untrained margin", trained_vs_untrained},
    {"partition invariant", partition_invariant},
    {"reconstruction identity", reconstruction_identity},
    {"closed-form loss values", closed_form_losses},
    {"permutation invariance", permutation_invariance},
    {"dataset fidelity", dataset_fidelity},
    {"semi-supervised identity and smoke", semi_supervised},
    {"determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  set_log_level(LogLevel::Error);
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(kCriteria.size())) {
      std::fprintf(stderr, "usage: %s [criterion 1-%zu ...]\n", argv[0], kCriteria.size());
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(n));
  }
  if (selected.empty())
    for (std::size_t n = 1; n <= kCriteria.size(); ++n) selected.push_back(n);

  int failed = 0;
  for (std::size_t n : selected) {
    const auto& [name, fn] = kCriteria[n - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
