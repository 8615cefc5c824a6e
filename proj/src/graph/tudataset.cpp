#include "sgmi/graph/tudataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sgmi/core/error.hpp"

namespace sgmi::graph {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct TextFile {
  fs::path path;
  std::vector<std::vector<std::string>> rows;  // comma-separated fields per non-empty line
  std::vector<std::size_t> line_numbers;
};

TextFile read_fields(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("tudataset: cannot read '" + path.string() + "'");
  TextFile f{path, {}, {}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    f.rows.push_back(std::move(fields));
    f.line_numbers.push_back(lineno);
  }
  return f;
}

[[noreturn]] void bad_value(const TextFile& f, std::size_t row, const std::string& what) {
  throw IntegrityError("tudataset: " + f.path.filename().string() + " line " + std::to_string(f.line_numbers[row]) +
                       ": " + what);
}

long long parse_int(const TextFile& f, std::size_t row, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || errno != 0 || *end != '\0') bad_value(f, row, "expected integer, got '" + s + "'");
  return v;
}

double parse_double(const TextFile& f, std::size_t row, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || errno == ERANGE || *end != '\0') bad_value(f, row, "expected number, got '" + s + "'");
  return v;
}

std::optional<TextFile> read_optional(const fs::path& dir, const std::string& name, const std::string& suffix) {
  const fs::path p = dir / (name + suffix);
  if (!fs::exists(p)) return std::nullopt;
  return read_fields(p);
}

TextFile read_required(const fs::path& dir, const std::string& name, const std::string& suffix) {
  const fs::path p = dir / (name + suffix);
  if (!fs::exists(p)) throw LoadError("tudataset: missing mandatory file '" + p.string() + "'");
  return read_fields(p);
}

void expect_rows(const TextFile& f, std::size_t n, const std::string& what) {
  if (f.rows.size() != n) {
    throw IntegrityError("tudataset: " + f.path.filename().string() + " has " + std::to_string(f.rows.size()) +
                         " lines, expected " + std::to_string(n) + " (" + what + ")");
  }
}

// Continuous attribute columns followed by the one-hot code of categorical labels.
std::vector<std::vector<double>> feature_rows(const std::optional<TextFile>& attributes,
                                              const std::optional<TextFile>& labels, std::size_t count,
                                              const std::string& what) {
  std::vector<std::vector<double>> rows(count);
  if (attributes) {
    expect_rows(*attributes, count, what);
    std::size_t width = attributes->rows.empty() ? 0 : attributes->rows.front().size();
    for (std::size_t i = 0; i < count; ++i) {
      if (attributes->rows[i].size() != width) bad_value(*attributes, i, "inconsistent attribute count");
      for (const auto& field : attributes->rows[i]) rows[i].push_back(parse_double(*attributes, i, field));
    }
  }
  if (labels) {
    expect_rows(*labels, count, what);
    std::vector<long long> values(count);
    std::set<long long> distinct;
    for (std::size_t i = 0; i < count; ++i) {
      values[i] = parse_int(*labels, i, labels->rows[i].front());
      distinct.insert(values[i]);
    }
    std::map<long long, std::size_t> code;
    for (long long v : distinct) code.emplace(v, code.size());
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<double> onehot(code.size(), 0.0);
      onehot[code[values[i]]] = 1.0;
      rows[i].insert(rows[i].end(), onehot.begin(), onehot.end());
    }
  }
  return rows;
}

}  // namespace

Dataset load_tudataset(const fs::path& directory) {
  fs::path dir = directory;
  if (dir.filename().empty()) dir = dir.parent_path();
  return load_tudataset(dir, dir.filename().string());
}

Dataset load_tudataset(const fs::path& directory, const std::string& name) {
  if (!fs::is_directory(directory)) throw LoadError("tudataset: '" + directory.string() + "' is not a directory");
  const TextFile adjacency = read_required(directory, name, "_A.txt");
  const TextFile indicator = read_required(directory, name, "_graph_indicator.txt");
  const TextFile graph_labels = read_required(directory, name, "_graph_labels.txt");
  const auto node_labels = read_optional(directory, name, "_node_labels.txt");
  const auto node_attributes = read_optional(directory, name, "_node_attributes.txt");
  const auto edge_labels = read_optional(directory, name, "_edge_labels.txt");
  const auto edge_attributes = read_optional(directory, name, "_edge_attributes.txt");
  const auto graph_attributes = read_optional(directory, name, "_graph_attributes.txt");

  const std::size_t num_graphs = graph_labels.rows.size();
  const std::size_t num_nodes = indicator.rows.size();

  // Global node -> (graph, local id). Local ids follow file order within each graph.
  std::vector<std::size_t> node_graph(num_nodes), node_local(num_nodes);
  std::vector<std::size_t> graph_sizes(num_graphs, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    const long long gid = parse_int(indicator, i, indicator.rows[i].front());
    if (gid < 1 || static_cast<std::size_t>(gid) > num_graphs) {
      bad_value(indicator, i, "graph id " + std::to_string(gid) + " outside [1, " + std::to_string(num_graphs) + "]");
    }
    node_graph[i] = static_cast<std::size_t>(gid - 1);
    node_local[i] = graph_sizes[node_graph[i]]++;
  }

  auto node_features = feature_rows(node_attributes, node_labels, num_nodes, "one per node");
  const bool has_edge_features = edge_attributes.has_value() || edge_labels.has_value();
  auto edge_features = feature_rows(edge_attributes, edge_labels, adjacency.rows.size(), "one per edge");

  // Per graph: (src, dst) -> feature row index, first occurrence wins.
  std::vector<std::map<Edge, std::size_t>> edge_maps(num_graphs);
  for (std::size_t k = 0; k < adjacency.rows.size(); ++k) {
    const auto& fields = adjacency.rows[k];
    if (fields.size() != 2) bad_value(adjacency, k, "expected two node ids");
    const long long u = parse_int(adjacency, k, fields[0]);
    const long long v = parse_int(adjacency, k, fields[1]);
    for (long long x : {u, v}) {
      if (x < 1 || static_cast<std::size_t>(x) > num_nodes) {
        bad_value(adjacency, k, "dangling node reference " + std::to_string(x));
      }
    }
    const std::size_t gu = static_cast<std::size_t>(u - 1), gv = static_cast<std::size_t>(v - 1);
    if (node_graph[gu] != node_graph[gv]) bad_value(adjacency, k, "edge crosses graphs");
    auto& m = edge_maps[node_graph[gu]];
    m.try_emplace(Edge{node_local[gu], node_local[gv]}, k);
  }
  for (auto& m : edge_maps) {
    std::vector<std::pair<Edge, std::size_t>> missing;
    for (const auto& [e, row] : m) {
      if (!m.contains(Edge{e.dst, e.src})) missing.emplace_back(Edge{e.dst, e.src}, row);
    }
    for (auto& [e, row] : missing) m.emplace(e, row);
  }

  std::vector<long long> raw_labels(num_graphs);
  std::set<long long> distinct_labels;
  for (std::size_t g = 0; g < num_graphs; ++g) {
    raw_labels[g] = parse_int(graph_labels, g, graph_labels.rows[g].front());
    distinct_labels.insert(raw_labels[g]);
  }
  std::map<long long, int> label_code;
  for (long long v : distinct_labels) label_code.emplace(v, static_cast<int>(label_code.size()));
  if (graph_attributes) expect_rows(*graph_attributes, num_graphs, "one per graph");

  Dataset ds;
  ds.name = name;
  ds.graphs.resize(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    Graph& graph = ds.graphs[g];
    graph.num_nodes = graph_sizes[g];
    graph.label = label_code[raw_labels[g]];
    if (graph_attributes) {
      for (const auto& field : graph_attributes->rows[g]) graph.targets.push_back(parse_double(*graph_attributes, g, field));
    }
  }
  const std::size_t node_width = num_nodes ? node_features.front().size() : 0;
  if (node_width > 0) {
    for (std::size_t g = 0; g < num_graphs; ++g) ds.graphs[g].node_attrs = Tensor({graph_sizes[g], node_width});
    for (std::size_t i = 0; i < num_nodes; ++i) {
      auto row = ds.graphs[node_graph[i]].node_attrs->row(node_local[i]);
      std::copy(node_features[i].begin(), node_features[i].end(), row.begin());
    }
  }
  const std::size_t edge_width = has_edge_features && !edge_features.empty() ? edge_features.front().size() : 0;
  for (std::size_t g = 0; g < num_graphs; ++g) {
    Graph& graph = ds.graphs[g];
    const auto& m = edge_maps[g];
    if (edge_width > 0) graph.edge_attrs = Tensor({m.size(), edge_width});
    std::size_t k = 0;
    for (const auto& [e, row] : m) {
      graph.edges.push_back(e);
      if (edge_width > 0) std::copy(edge_features[row].begin(), edge_features[row].end(), graph.edge_attrs->row(k).begin());
      ++k;
    }
    graph.validate();
  }
  ds.meta = compute_meta(name, ds.graphs);
  return ds;
}

namespace {

void write_number(std::ostream& out, double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  out << buf;
}

void write_rows(const fs::path& path, const std::vector<std::span<const double>>& rows) {
  std::ofstream out(path);
  if (!out) throw LoadError("tudataset: cannot write '" + path.string() + "'");
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ", ";
      write_number(out, row[j]);
    }
    out << '\n';
  }
}

}  // namespace

void write_tudataset(const fs::path& directory, const std::string& name, std::span<const Graph> graphs) {
  fs::create_directories(directory);
  std::ofstream a(directory / (name + "_A.txt"));
  std::ofstream indicator(directory / (name + "_graph_indicator.txt"));
  std::ofstream labels(directory / (name + "_graph_labels.txt"));
  if (!a || !indicator || !labels) throw LoadError("tudataset: cannot write into '" + directory.string() + "'");

  const bool node_attrs = !graphs.empty() && std::all_of(graphs.begin(), graphs.end(), [](const Graph& g) {
    return g.node_attrs.has_value();
  });
  const bool edge_attrs = std::any_of(graphs.begin(), graphs.end(), [](const Graph& g) {
    return g.edge_attrs.has_value() && !g.edges.empty();
  });
  const bool targets = !graphs.empty() && std::all_of(graphs.begin(), graphs.end(), [](const Graph& g) {
    return !g.targets.empty();
  });
  std::vector<std::span<const double>> node_rows, edge_rows, target_rows;

  std::size_t offset = 0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const Graph& graph = graphs[g];
    for (std::size_t i = 0; i < graph.num_nodes; ++i) {
      indicator << (g + 1) << '\n';
      if (node_attrs) node_rows.push_back(graph.node_attrs->row(i));
    }
    for (std::size_t k = 0; k < graph.edges.size(); ++k) {
      a << (graph.edges[k].src + offset + 1) << ", " << (graph.edges[k].dst + offset + 1) << '\n';
      if (edge_attrs) {
        if (!graph.edge_attrs) throw ContractError("write_tudataset: graph " + std::to_string(g) + " lacks edge attributes");
        edge_rows.push_back(graph.edge_attrs->row(k));
      }
    }
    labels << graph.label.value_or(0) << '\n';
    if (targets) target_rows.emplace_back(graph.targets);
    offset += graph.num_nodes;
  }
  if (node_attrs) write_rows(directory / (name + "_node_attributes.txt"), node_rows);
  if (edge_attrs) write_rows(directory / (name + "_edge_attributes.txt"), edge_rows);
  if (targets) write_rows(directory / (name + "_graph_attributes.txt"), target_rows);
}

}  // namespace sgmi::graph
