#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "sgmi/core/error.hpp"
#include "sgmi/core/log.hpp"
#include "sgmi/core/rng.hpp"
#include "sgmi/graph/features.hpp"
#include "sgmi/graph/synthetic.hpp"
#include "sgmi/graph/tudataset.hpp"
#include "support/tempdir.hpp"

using namespace sgmi;
using namespace sgmi::graph;
using sgmi::testing::TempDir;
using sgmi::testing::write_file;

namespace {

const std::filesystem::path kMutag = std::filesystem::path(SGMI_DATA_DIR) / "MUTAG";

struct Quiet {
  Quiet() { set_log_level(LogLevel::Error); }
} quiet;

// Two graphs: a path 1-2-3 listed in one direction with a duplicate, and a
// single edge 4-5 listed in both directions.
void write_fixture(const std::filesystem::path& dir, const std::string& name) {
  write_file(dir / (name + "_A.txt"), "1, 2\n2, 3\n1, 2\n4, 5\n5, 4\n");
  write_file(dir / (name + "_graph_indicator.txt"), "1\n1\n1\n2\n2\n");
  write_file(dir / (name + "_graph_labels.txt"), "-1\n1\n");
  write_file(dir / (name + "_node_labels.txt"), "0\n2\n0\n5\n2\n");
  write_file(dir / (name + "_edge_labels.txt"), "1\n0\n1\n0\n0\n");
}

Graph random_graph(Rng& rng, std::size_t node_width, std::size_t edge_width) {
  Graph g;
  g.num_nodes = 1 + rng.index(7);
  std::map<Edge, bool> seen;
  const std::size_t tries = rng.index(12);
  for (std::size_t t = 0; t < tries && g.num_nodes > 1; ++t) {
    const std::size_t u = rng.index(g.num_nodes), v = rng.index(g.num_nodes);
    if (u == v || seen.contains({u, v})) continue;
    seen[{u, v}] = seen[{v, u}] = true;
  }
  for (const auto& [e, _] : seen) g.edges.push_back(e);
  g.node_attrs = ad::Tensor({g.num_nodes, node_width});
  for (double& x : g.node_attrs->data()) x = rng.uniform();
  if (edge_width) {
    g.edge_attrs = ad::Tensor({g.edges.size(), edge_width});
    for (double& x : g.edge_attrs->data()) x = rng.uniform();
  }
  g.label = static_cast<int>(rng.index(3));
  return g;
}

}  // namespace

TEST_CASE("loader re-indexes, deduplicates and symmetrizes") {
  TempDir dir("fixture");
  write_fixture(dir.path(), "FIX");
  const Dataset ds = load_tudataset(dir.path(), "FIX");
  REQUIRE(ds.graphs.size() == 2);
  const Graph& a = ds.graphs[0];
  CHECK(a.num_nodes == 3);
  const std::vector<Edge> expected = {{0, 1}, {1, 0}, {1, 2}, {2, 1}};
  CHECK(a.edges == expected);
  CHECK(a.undirected_edge_count() == 2);
  CHECK(ds.graphs[1].edges == std::vector<Edge>{{0, 1}, {1, 0}});

  // Class labels -1, 1 become 0, 1.
  CHECK(a.label == 0);
  CHECK(ds.graphs[1].label == 1);

  // Node labels {0, 2, 5} one-hot in sorted order.
  REQUIRE(a.node_attrs);
  CHECK(a.node_attrs->cols() == 3);
  CHECK(a.node_attrs->row(1)[1] == 1.0);
  CHECK(ds.graphs[1].node_attrs->row(0)[2] == 1.0);

  // Edge labels one-hot; the reverse direction inherits the listed edge's row.
  REQUIRE(a.edge_attrs);
  CHECK(a.edge_attrs->cols() == 2);
  CHECK(a.edge_attrs->row(0)[1] == 1.0);  // (0,1) from line "1, 2" label 1
  CHECK(a.edge_attrs->row(1)[1] == 1.0);  // (1,0) mirrored
  CHECK(a.edge_attrs->row(2)[0] == 1.0);  // (1,2) label 0

  CHECK(ds.meta.num_graphs == 2);
  CHECK(ds.meta.num_classes == 2);
  CHECK(ds.meta.has_edge_attrs);
}

TEST_CASE("missing mandatory file names the file") {
  TempDir dir("missing");
  write_fixture(dir.path(), "FIX");
  std::filesystem::remove(dir / "FIX_graph_indicator.txt");
  try {
    load_tudataset(dir.path(), "FIX");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("FIX_graph_indicator.txt") != std::string::npos);
  }
}

TEST_CASE("empty directory is a load error") {
  TempDir dir("empty");
  CHECK_THROWS_AS(load_tudataset(dir.path(), "X"), LoadError);
  CHECK_THROWS_AS(load_tudataset(dir / "nope"), LoadError);
}

TEST_CASE("dangling node reference reports the line") {
  TempDir dir("dangling");
  write_fixture(dir.path(), "FIX");
  write_file(dir / "FIX_A.txt", "1, 2\n2, 3\n3, 9\n4, 5\n5, 4\n");
  try {
    load_tudataset(dir.path(), "FIX");
    FAIL("expected IntegrityError");
  } catch (const IntegrityError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("MUTAG statistics") {
  const Dataset ds = load_tudataset(kMutag);
  CHECK(ds.name == "MUTAG");
  CHECK(ds.meta.num_graphs == 188);
  CHECK(ds.meta.num_classes == 2);
  CHECK(std::abs(ds.meta.avg_nodes - 17.93) <= 0.01);
  CHECK(std::abs(ds.meta.avg_edges - 19.79) <= 0.01);
  CHECK(ds.meta.has_node_attrs);
  for (const Graph& g : ds.graphs) CHECK_NOTHROW(g.validate());
}

TEST_CASE("degree features") {
  Graph g;
  g.num_nodes = 5;
  // Star centred on node 0 with three leaves; node 4 isolated.
  for (std::size_t v : {1u, 2u, 3u}) {
    g.edges.push_back({0, v});
    g.edges.push_back({v, 0});
  }
  const ad::Tensor f = degree_features(g, 5);
  CHECK(f.cols() == 6);
  CHECK(f(0, 3) == 1.0);
  CHECK(f(4, 0) == 1.0);
  CHECK(f(1, 1) == 1.0);
  for (std::size_t r = 0; r < 5; ++r) CHECK(std::accumulate(f.row(r).begin(), f.row(r).end(), 0.0) == 1.0);
  // Clamp.
  const ad::Tensor c = degree_features(g, 2);
  CHECK(c(0, 2) == 1.0);
}

TEST_CASE("degree feature column sums equal the degree histogram on MUTAG") {
  Dataset ds = load_tudataset(kMutag);
  std::vector<Graph> graphs = ds.graphs;
  for (Graph& g : graphs) g.node_attrs.reset();
  const auto clamp = ensure_node_features(graphs);
  REQUIRE(clamp);
  CHECK(*clamp == max_degree(graphs));
  std::vector<double> columns(*clamp + 1, 0.0), histogram(*clamp + 1, 0.0);
  for (const Graph& g : graphs) {
    std::vector<std::size_t> deg(g.num_nodes, 0);
    for (const Edge& e : g.edges) ++deg[e.src];
    for (std::size_t d : deg) histogram[d] += 1.0;
    for (std::size_t r = 0; r < g.num_nodes; ++r)
      for (std::size_t c = 0; c < columns.size(); ++c) columns[c] += (*g.node_attrs)(r, c);
  }
  CHECK(columns == histogram);
}

TEST_CASE("make_batch offsets and shifted edges") {
  Graph a, b;
  a.num_nodes = 3;
  a.edges = {{0, 1}, {1, 0}, {1, 2}, {2, 1}};
  b.num_nodes = 2;
  b.edges = {{0, 1}, {1, 0}};
  a.node_attrs = ad::Tensor({3, 1}, 1.0);
  b.node_attrs = ad::Tensor({2, 1}, 2.0);

  const std::vector<Graph> single = {a};
  const GraphBatch s = make_batch(single);
  CHECK(s.node_offsets == std::vector<std::size_t>{0});
  CHECK(s.src == std::vector<std::size_t>{0, 1, 1, 2});

  const std::vector<Graph> pair = {a, b};
  const GraphBatch batch = make_batch(pair);
  CHECK(batch.node_offsets == std::vector<std::size_t>{0, 3});
  CHECK(batch.graph_id == std::vector<std::size_t>{0, 0, 0, 1, 1});
  CHECK(batch.src[4] == 3);
  CHECK(batch.dst[4] == 4);
  CHECK(batch.num_nodes == 5);
}

TEST_CASE("make_batch rejects mixed widths and empty input") {
  Graph a, b;
  a.num_nodes = b.num_nodes = 1;
  a.node_attrs = ad::Tensor({1, 2});
  b.node_attrs = ad::Tensor({1, 3});
  const std::vector<Graph> mixed = {a, b};
  CHECK_THROWS_AS(make_batch(mixed), ContractError);
  CHECK_THROWS_AS(make_batch(std::vector<Graph>{}), ContractError);
}

TEST_CASE("batching round-trips and stays block-diagonal") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t edge_width = seed % 2 ? 3 : 0;
    std::vector<Graph> graphs;
    for (int i = 0; i < 10; ++i) graphs.push_back(random_graph(rng, 4, edge_width));
    const GraphBatch batch = make_batch(graphs);
    CHECK(std::is_sorted(batch.graph_id.begin(), batch.graph_id.end()));
    for (std::size_t e = 0; e < batch.num_edges(); ++e) CHECK(batch.graph_id[batch.src[e]] == batch.graph_id[batch.dst[e]]);
    for (std::size_t g = 0; g + 1 < graphs.size(); ++g) {
      CHECK(batch.node_offsets[g + 1] == batch.node_offsets[g] + batch.node_counts[g]);
    }
    for (std::size_t g = 0; g < graphs.size(); ++g) CHECK(unbatch(batch, g) == graphs[g]);
  }
}

TEST_CASE("graph validation") {
  Graph g;
  g.num_nodes = 2;
  g.edges = {{0, 2}};
  CHECK_THROWS_AS(g.validate(), IntegrityError);
  g.edges = {{0, 1}};
  CHECK_THROWS_AS(g.validate(), IntegrityError);  // missing reverse direction
  g.edges = {{0, 1}, {1, 0}};
  CHECK_NOTHROW(g.validate());
  g.node_attrs = ad::Tensor({3, 1});
  CHECK_THROWS_AS(g.validate(), IntegrityError);
}

TEST_CASE("synthetic data is deterministic and balanced") {
  const auto a = synthetic_dataset(11, 101, 2);
  const auto b = synthetic_dataset(11, 101, 2);
  CHECK(a == b);
  CHECK(a != synthetic_dataset(12, 101, 2));
  std::map<int, int> counts;
  for (const Graph& g : a) {
    CHECK_NOTHROW(g.validate());
    ++counts[*g.label];
  }
  CHECK(counts.size() == 2);
  CHECK(std::abs(counts[0] - counts[1]) <= 1);
}

TEST_CASE("planted motifs are separable by degree histograms") {
  // Nearest-centroid classifier on normalized degree histograms, trained on
  // even-indexed graphs and scored on odd ones.
  for (std::size_t classes : {2u, 4u}) {
    const auto graphs = synthetic_dataset(5, 200, classes);
    const std::size_t width = max_degree(graphs) + 1;
    auto histogram = [&](const Graph& g) {
      std::vector<double> h(width, 0.0);
      for (std::size_t d : g.degrees()) h[d] += 1.0 / static_cast<double>(g.num_nodes);
      return h;
    };
    std::vector<std::vector<double>> centroid(classes, std::vector<double>(width, 0.0));
    std::vector<double> n(classes, 0.0);
    for (std::size_t i = 0; i < graphs.size(); i += 2) {
      const auto h = histogram(graphs[i]);
      const auto c = static_cast<std::size_t>(*graphs[i].label);
      for (std::size_t k = 0; k < width; ++k) centroid[c][k] += h[k];
      n[c] += 1.0;
    }
    for (std::size_t c = 0; c < classes; ++c)
      for (double& x : centroid[c]) x /= n[c];
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 1; i < graphs.size(); i += 2, ++total) {
      const auto h = histogram(graphs[i]);
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t c = 0; c < classes; ++c) {
        double d = 0.0;
        for (std::size_t k = 0; k < width; ++k) d += (h[k] - centroid[c][k]) * (h[k] - centroid[c][k]);
        if (d < best_d) best_d = d, best = c;
      }
      hits += best == static_cast<std::size_t>(*graphs[i].label);
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(total);
    INFO("classes " << classes << " accuracy " << acc);
    CHECK(acc > 0.6);
  }
}

TEST_CASE("regression targets are z-scored") {
  const auto graphs = synthetic_regression_dataset(3, 150);
  double mean = 0.0, sq = 0.0;
  for (const Graph& g : graphs) {
    REQUIRE(g.targets.size() == 1);
    mean += g.targets[0];
  }
  mean /= 150.0;
  for (const Graph& g : graphs) sq += (g.targets[0] - mean) * (g.targets[0] - mean);
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::abs(sq / 150.0 - 1.0) < 1e-12);
}

TEST_CASE("writer and loader round-trip") {
  TempDir dir("roundtrip");
  auto graphs = synthetic_dataset(2, 30, 3);
  write_tudataset(dir.path(), "SYN", graphs);
  const Dataset back = load_tudataset(dir.path(), "SYN");
  REQUIRE(back.graphs.size() == graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    CHECK(back.graphs[i].num_nodes == graphs[i].num_nodes);
    auto a = graphs[i].edges, b = back.graphs[i].edges;
    std::sort(a.begin(), a.end());
    CHECK(a == b);
    CHECK(back.graphs[i].label == graphs[i].label);
    CHECK_FALSE(back.graphs[i].node_attrs.has_value());
  }

  TempDir reg("roundtrip-reg");
  const auto targets = synthetic_regression_dataset(4, 12);
  write_tudataset(reg.path(), "REG", targets);
  const Dataset rb = load_tudataset(reg.path(), "REG");
  for (std::size_t i = 0; i < targets.size(); ++i) CHECK(rb.graphs[i].targets == targets[i].targets);
}

TEST_CASE("MUTAG written back reloads identically") {
  const Dataset ds = load_tudataset(kMutag);
  TempDir dir("mutag");
  write_tudataset(dir.path(), "M", ds.graphs);
  const Dataset back = load_tudataset(dir.path(), "M");
  REQUIRE(back.graphs.size() == ds.graphs.size());
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    CHECK(back.graphs[i].edges == ds.graphs[i].edges);
    CHECK(back.graphs[i].node_attrs == ds.graphs[i].node_attrs);
    CHECK(back.graphs[i].edge_attrs == ds.graphs[i].edge_attrs);
    CHECK(back.graphs[i].label == ds.graphs[i].label);
  }
}
