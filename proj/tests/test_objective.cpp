#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgmi/core/error.hpp"
#include "sgmi/core/log.hpp"
#include "sgmi/graph/features.hpp"
#include "sgmi/graph/synthetic.hpp"
#include "sgmi/model/objective.hpp"
#include "support/gradcheck.hpp"

using namespace sgmi;
using namespace sgmi::model;
using graph::Graph;
using sgmi::testing::check_gradients;
using sgmi::testing::random_tensor;

namespace {

struct Quiet {
  Quiet() { set_log_level(LogLevel::Error); }
} quiet;

double sp(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

double dot(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) s += a(i, c) * b(j, c);
  return s;
}

Tensor rows(std::initializer_list<std::initializer_list<double>> values) {
  Tensor t({values.size(), values.begin()->size()});
  std::size_t k = 0;
  for (const auto& r : values)
    for (double v : r) t[k++] = v;
  return t;
}

std::vector<Graph> graphs_with_features(std::uint64_t seed, std::size_t n) {
  auto graphs = graph::synthetic_dataset(seed, n, 2);
  graph::ensure_node_features(graphs);
  return graphs;
}

ModelConfig config_for(const std::vector<Graph>& graphs, std::size_t hidden) {
  ModelConfig c;
  c.node_in = graphs.front().node_attrs->cols();
  c.encoder.num_layers = 2;
  c.encoder.hidden = hidden;
  c.generator.depth = 2;
  return c;
}

}  // namespace

TEST_CASE("score is a dot product") {
  const double a[] = {1.0, -2.0, 0.5}, b[] = {4.0, 1.0, 2.0};
  CHECK(score(a, b) == 3.0);
  CHECK_THROWS_AS(score(std::span(a).first(2), b), DimensionError);
}

TEST_CASE("two-graph objective matches hand-computed terms") {
  const Tensor h = rows({{1.0, 0.0}, {0.0, 2.0}});
  const Tensor hc = rows({{0.5, 0.5}, {-1.0, 0.0}});
  const Tensor ht = rows({{1.0, 1.0}, {2.0, -1.0}});
  // pos: h0.ht0 = 1, h1.ht1 = -2. head: hc0.ht0 = 1, hc1.ht1 = -2.
  // tail (i, j): (0, 1): h1.ht0 = 2; (1, 0): h0.ht1 = 2.
  Tape tape;
  const PairScores s = head_tail_scores(tape.constant(h), tape.constant(hc), tape.constant(ht));
  CHECK(s.positive.value().data()[0] == 1.0);
  CHECK(s.positive.value().data()[1] == -2.0);
  CHECK(s.head.value().data()[1] == -2.0);
  CHECK(s.tail.value().data()[0] == 2.0);
  CHECK(s.tail.value().data()[1] == 2.0);

  const LossReport jsd = to_report(jsd_objective(s));
  const double pos = -(sp(-1.0) + sp(2.0)) / 2.0;
  const double head = -(sp(1.0) + sp(-2.0)) / 2.0;
  const double tail = -sp(2.0);
  CHECK(jsd.pos == doctest::Approx(pos).epsilon(1e-14));
  CHECK(jsd.head_neg == doctest::Approx(head).epsilon(1e-14));
  CHECK(jsd.tail_neg == doctest::Approx(tail).epsilon(1e-14));
  CHECK(jsd.total == doctest::Approx(pos + head + tail).epsilon(1e-14));

  const LossReport dv = to_report(dv_objective(s));
  const double neg = std::log((std::exp(1.0) + std::exp(-2.0) + 2.0 * std::exp(2.0)) / 4.0);
  CHECK(dv.pos == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(dv.head_neg == 0.0);
  CHECK(dv.tail_neg == doctest::Approx(-neg).epsilon(1e-14));
  CHECK(dv.total == doctest::Approx(-0.5 - neg).epsilon(1e-14));
}

TEST_CASE("tail negatives enumerate every ordered off-diagonal pair") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::size_t b = 3 + seed % 3;
    const Tensor h = random_tensor(rng, b, 4), hc = random_tensor(rng, b, 4), ht = random_tensor(rng, b, 4);
    Tape tape;
    const PairScores s = head_tail_scores(tape.constant(h), tape.constant(hc), tape.constant(ht));
    REQUIRE(s.tail.value().numel() == b * (b - 1));
    std::size_t k = 0;
    double tail_sp = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      CHECK(s.positive.value()[i] == doctest::Approx(dot(h, i, ht, i)).epsilon(1e-14));
      CHECK(s.head.value()[i] == doctest::Approx(dot(hc, i, ht, i)).epsilon(1e-14));
      for (std::size_t j = 0; j < b; ++j) {
        if (i == j) continue;
        CHECK(s.tail.value()[k++] == doctest::Approx(dot(h, j, ht, i)).epsilon(1e-14));
        tail_sp += sp(dot(h, j, ht, i));
      }
    }
    const LossReport r = to_report(jsd_objective(s));
    CHECK(r.tail_neg == doctest::Approx(-tail_sp / static_cast<double>(b * (b - 1))).epsilon(1e-13));
  }
}

TEST_CASE("batch of one cannot form tail negatives") {
  Tape tape;
  const Tensor one = rows({{1.0, 2.0}});
  CHECK_THROWS_AS(head_tail_scores(tape.constant(one), tape.constant(one), tape.constant(one)), ContractError);
  const auto graphs = graphs_with_features(0, 1);
  Model m(config_for(graphs, 4), 0);
  CHECK_THROWS_AS(unsupervised_objective(tape, m, graph::make_batch(graphs), Estimator::JSD, 0), ContractError);
}

TEST_CASE("zero-parameter model gives closed-form objectives") {
  const auto graphs = graphs_with_features(3, 6);
  Model m(config_for(graphs, 8), 1);
  for (auto& p : m.params()) std::fill(p.value.data().begin(), p.value.data().end(), 0.0);
  const auto batch = graph::make_batch(graphs);
  Tape tape(false);
  const auto jsd = unsupervised_objective(tape, m, batch, Estimator::JSD, 5).report;
  CHECK(std::abs(jsd.total + 3.0 * std::log(2.0)) <= 1e-9);
  const auto dv = unsupervised_objective(tape, m, batch, Estimator::DV, 5).report;
  CHECK(std::abs(dv.total) <= 1e-9);
}

TEST_CASE("DV stays finite for large scores") {
  Tape tape;
  const Tensor h = rows({{30.0, 0.0}, {0.0, 30.0}});
  const PairScores s = head_tail_scores(tape.constant(h), tape.constant(h), tape.constant(h));
  const LossReport dv = to_report(dv_objective(s));
  CHECK(std::isfinite(dv.total));
  // Negatives {900, 900, 0, 0}: log mean exp = 900 + log(1/2 + e^-900/2).
  CHECK(dv.tail_neg == doctest::Approx(-(900.0 - std::log(2.0))).epsilon(1e-14));
}

TEST_CASE("node permutation stays inside each graph") {
  const auto graphs = graphs_with_features(2, 7);
  const auto batch = graph::make_batch(graphs);
  const auto perm = node_permutation(batch, 9);
  REQUIRE(perm.size() == batch.num_nodes);
  auto sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(perm.size());
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);
  for (std::size_t v = 0; v < perm.size(); ++v) CHECK(batch.graph_id[perm[v]] == batch.graph_id[v]);
  CHECK(node_permutation(batch, 9) == perm);
  CHECK(node_permutation(batch, 10) != perm);
}

TEST_CASE("objective gradients match finite differences") {
  const auto graphs = graphs_with_features(7, 3);
  for (Estimator est : {Estimator::JSD, Estimator::DV}) {
    ModelConfig c = config_for(graphs, 4);
    c.encoder.readout = Readout::Mean;
    Model m(c, 23);
    Rng rng(4);
    for (double& w : m.generator().kernel().weights().value.data()) w = rng.uniform(0.5, 1.5);
    const auto batch = graph::make_batch(graphs);
    auto loss = [&](Tape& tape) { return unsupervised_objective(tape, m, batch, est, 77).terms.total; };
    const auto r = check_gradients(m.params(), loss);
    INFO("estimator " << (est == Estimator::JSD ? "jsd" : "dv") << " worst " << r.worst);
    CHECK(r.max_error < 1e-4);
  }
}

TEST_CASE("estimator gradients over random scores") {
  // Objective as a function of the three embedding matrices directly.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (Estimator est : {Estimator::JSD, Estimator::DV}) {
      Rng rng(seed);
      const std::size_t b = 2 + seed % 4;
      ParameterStore store;
      auto& h = store.add("h", random_tensor(rng, b, 3, -2.0, 2.0));
      auto& hc = store.add("hc", random_tensor(rng, b, 3, -2.0, 2.0));
      auto& ht = store.add("ht", random_tensor(rng, b, 3, -2.0, 2.0));
      auto loss = [&](Tape& tape) {
        const PairScores s = head_tail_scores(tape.parameter(h), tape.parameter(hc), tape.parameter(ht));
        return (est == Estimator::JSD ? jsd_objective(s) : dv_objective(s)).total;
      };
      CHECK(check_gradients(store, loss).max_error < 1e-4);
    }
  }
}

TEST_CASE("cross-entropy and squared error") {
  Tape tape;
  const Tensor logits = rows({{0.0, 1.0, 2.0}, {1.0, 1.0, 1.0}});
  const int labels[] = {2, 0};
  const double lse0 = std::log(1.0 + std::exp(1.0) + std::exp(2.0));
  const double expect = ((lse0 - 2.0) + std::log(3.0)) / 2.0;
  CHECK(cross_entropy(tape.constant(logits), labels).value().item() == doctest::Approx(expect).epsilon(1e-14));
  const int bad[] = {3, 0};
  CHECK_THROWS(cross_entropy(tape.constant(logits), bad));

  const Tensor pred = rows({{1.0}, {3.0}}), target = rows({{0.0}, {1.0}});
  CHECK(mean_squared_error(tape.constant(pred), target).value().item() == 2.5);
}

TEST_CASE("semi-supervised objective composition") {
  const auto graphs = graphs_with_features(5, 6);
  ModelConfig c = config_for(graphs, 8);
  c.head_outputs = 2;
  Model m(c, 3);
  const auto batch = graph::make_batch(graphs);
  Tape tape(false);
  const double lambda = 0.25;
  const SemiPass semi = semi_supervised_objective(tape, m, batch, 4, lambda, Estimator::JSD, 8);
  const SemiPass sup_only = semi_supervised_objective(tape, m, batch, 4, lambda, Estimator::JSD, 8, false);
  const auto unsup = unsupervised_objective(tape, m, batch, Estimator::JSD, 8).report;
  REQUIRE(semi.report.sup);
  CHECK(*semi.report.sup == *sup_only.report.sup);
  CHECK(semi.report.total == doctest::Approx(*semi.report.sup + lambda * unsup.total).epsilon(1e-13));
  CHECK(sup_only.report.total == *sup_only.report.sup);

  // Supervised term reads the first rows only: -CE on the labeled logits.
  std::vector<int> labels;
  for (std::size_t i = 0; i < 4; ++i) labels.push_back(*graphs[i].label);
  const auto enc = m.encoder().encode(tape, batch);
  const Var logits = m.head()->forward(tape, enc.h);
  const Tensor first = [&] {
    Tensor t({4, 2});
    for (std::size_t i = 0; i < 8; ++i) t[i] = logits.value()[i];
    return t;
  }();
  CHECK(*semi.report.sup == doctest::Approx(-cross_entropy(tape.constant(first), labels).value().item()).epsilon(1e-13));

  CHECK_THROWS_AS(semi_supervised_objective(tape, m, batch, 4, -1e-3, Estimator::JSD, 8), ConfigError);
  Model headless(config_for(graphs, 8), 3);
  CHECK_THROWS_AS(semi_supervised_objective(tape, headless, batch, 4, lambda, Estimator::JSD, 8), ContractError);
}

TEST_CASE("semi-supervised gradients match finite differences") {
  auto graphs = graph::synthetic_regression_dataset(2, 4);
  graph::ensure_node_features(graphs);
  ModelConfig c = config_for(graphs, 4);
  c.head_outputs = 1;
  c.task = TaskKind::Regression;
  c.encoder.readout = Readout::Mean;
  Model m(c, 6);
  const std::span<const Graph> all(graphs);
  auto loss = [&](Tape& tape) {
    return semi_supervised_loss(tape, m, all.first(2), all.subspan(2), 0.5, Estimator::JSD, 3).total;
  };
  CHECK(check_gradients(m.params(), loss).max_error < 1e-4);
}

TEST_CASE("JSD objective is negative and monotone in every score") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t b = 2 + seed % 5;
    auto terms = [&](const Tensor& pos, const Tensor& head, const Tensor& tail) {
      Tape tape(false);
      const PairScores s{tape.constant(pos), tape.constant(head), tape.constant(tail)};
      return to_report(jsd_objective(s)).total;
    };
    const Tensor pos = random_tensor(rng, b, 1, -5.0, 5.0);
    const Tensor head = random_tensor(rng, b, 1, -5.0, 5.0);
    const Tensor tail = random_tensor(rng, b * (b - 1), 1, -5.0, 5.0);
    const double base = terms(pos, head, tail);
    CHECK(base < 0.0);
    const std::size_t i = rng.index(b), j = rng.index(b * (b - 1));
    Tensor p2 = pos, h2 = head, t2 = tail;
    p2[i] += 0.1;
    h2[i] += 0.1;
    t2[j] += 0.1;
    CHECK(terms(p2, head, tail) > base);
    CHECK(terms(pos, h2, tail) < base);
    CHECK(terms(pos, head, t2) < base);
  }
}

TEST_CASE("DV matched scores carry no information") {
  Tape tape(false);
  const PairScores s{tape.constant(Tensor({3, 1}, 1.0)), tape.constant(Tensor({3, 1}, 1.0)),
                     tape.constant(Tensor({6, 1}, 1.0))};
  CHECK(std::abs(to_report(dv_objective(s)).total) < 1e-15);
}

TEST_CASE("DV matches the direct formula on random scores") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t b = 2 + seed % 5;
    const Tensor pos = random_tensor(rng, b, 1, -4.0, 4.0);
    const Tensor head = random_tensor(rng, b, 1, -4.0, 4.0);
    const Tensor tail = random_tensor(rng, b * (b - 1), 1, -4.0, 4.0);
    double p = 0.0, e = 0.0;
    for (double x : pos.data()) p += x / static_cast<double>(b);
    for (double x : head.data()) e += std::exp(x);
    for (double x : tail.data()) e += std::exp(x);
    const double expect = p - std::log(e / static_cast<double>(b * b));
    Tape tape(false);
    const PairScores s{tape.constant(pos), tape.constant(head), tape.constant(tail)};
    CHECK(to_report(dv_objective(s)).total == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("negative counts for every batch size") {
  for (std::size_t b = 2; b <= 9; ++b) {
    const auto graphs = graphs_with_features(b, b);
    Model m(config_for(graphs, 4), 0);
    Tape tape(false);
    const auto batch = graph::make_batch(graphs);
    const auto pass = unsupervised_objective(tape, m, batch, Estimator::JSD, 1);
    CHECK(pass.h_corrupt.value().rows() == b);
    CHECK(pass.h_tilde.value().rows() == b);
    const PairScores s = head_tail_scores(pass.encoded.h, pass.h_corrupt, pass.h_tilde);
    CHECK(s.head.value().numel() == b);
    CHECK(s.tail.value().numel() == b * (b - 1));
  }
}
