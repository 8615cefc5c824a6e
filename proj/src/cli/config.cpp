#include "sgmi/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "sgmi/core/error.hpp"

namespace sgmi::cli {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError("config: '" + key + "' is empty");
  return out;
}

template <typename E>
E parse_enum(const std::string& key, const std::string& text, const std::map<std::string, E>& names) {
  const auto it = names.find(trim(text));
  if (it == names.end()) {
    std::string options;
    for (const auto& [name, _] : names) options += (options.empty() ? "" : ", ") + name;
    throw ConfigError("config: '" + key + "' must be one of " + options + ", got '" + text + "'");
  }
  return it->second;
}

const std::map<std::string, model::Readout> kReadouts = {{"sum", model::Readout::Sum}, {"mean", model::Readout::Mean}};
const std::map<std::string, model::GeneratorKind> kGenerators = {{"tree-split", model::GeneratorKind::TreeSplit},
                                                                  {"multi-head", model::GeneratorKind::MultiHead}};
const std::map<std::string, model::Estimator> kEstimators = {{"jsd", model::Estimator::JSD},
                                                              {"dv", model::Estimator::DV}};

template <typename E>
std::string enum_name(E value, const std::map<std::string, E>& names) {
  for (const auto& [name, v] : names)
    if (v == value) return name;
  return "?";
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

struct Key {
  std::string section;
  std::string name;
  Setter set;
  std::function<std::string(const RunConfig&)> get;
};

std::string qualified(const std::string& section, const std::string& name) { return section + "." + name; }

template <typename Get>
Key count_key(const std::string& section, const std::string& name, Get field) {
  const std::string q = qualified(section, name);
  return {section, name,
          [q, field](RunConfig& c, const std::string& v) { field(c) = static_cast<std::size_t>(parse_u64(q, v)); },
          [field](const RunConfig& c) { return std::to_string(field(c)); }};
}

template <typename Get>
Key real_key(const std::string& section, const std::string& name, Get field) {
  const std::string q = qualified(section, name);
  return {section, name, [q, field](RunConfig& c, const std::string& v) { field(c) = parse_double(q, v); },
          [field](const RunConfig& c) { return fmt(field(c)); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back({"data", "path", [](RunConfig& c, const std::string& v) { c.data_path = trim(v); },
                 [](const RunConfig& c) { return c.data_path.string(); }});
    k.push_back(count_key("data", "semi_labeled", [](auto& c) -> auto& { return c.semi.labeled; }));
    k.push_back(count_key("data", "semi_validation", [](auto& c) -> auto& { return c.semi.validation; }));
    k.push_back(count_key("data", "semi_test", [](auto& c) -> auto& { return c.semi.test; }));

    k.push_back(count_key("encoder", "layers",
                          [](auto& c) -> auto& { return c.train.encoder.num_layers; }));
    k.push_back(count_key("encoder", "hidden", [](auto& c) -> auto& { return c.train.encoder.hidden; }));
    k.push_back({"encoder", "readout",
                 [](RunConfig& c, const std::string& v) {
                   c.train.encoder.readout = parse_enum("encoder.readout", v, kReadouts);
                 },
                 [](const RunConfig& c) { return enum_name(c.train.encoder.readout, kReadouts); }});

    k.push_back({"generator", "kind",
                 [](RunConfig& c, const std::string& v) {
                   c.train.generator.kind = parse_enum("generator.kind", v, kGenerators);
                 },
                 [](const RunConfig& c) { return enum_name(c.train.generator.kind, kGenerators); }});
    k.push_back(count_key("generator", "depth", [](auto& c) -> auto& { return c.train.generator.depth; }));
    k.push_back(count_key("generator", "heads", [](auto& c) -> auto& { return c.train.generator.heads; }));

    k.push_back({"objective", "estimator",
                 [](RunConfig& c, const std::string& v) {
                   c.train.estimator = parse_enum("objective.estimator", v, kEstimators);
                 },
                 [](const RunConfig& c) { return enum_name(c.train.estimator, kEstimators); }});
    k.push_back(real_key("objective", "lambda", [](auto& c) -> auto& { return c.train.lambda; }));

    k.push_back(count_key("train", "epochs", [](auto& c) -> auto& { return c.train.epochs; }));
    k.push_back(count_key("train", "batch_size", [](auto& c) -> auto& { return c.train.batch_size; }));
    k.push_back(real_key("train", "lr", [](auto& c) -> auto& { return c.train.lr; }));
    k.push_back({"train", "seed",
                 [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64("train.seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    k.push_back(count_key("train", "eval_every", [](auto& c) -> auto& { return c.train.eval_every; }));
    k.push_back(count_key("train", "eval_repetitions",
                          [](auto& c) -> auto& { return c.train.eval_repetitions; }));

    k.push_back(count_key("eval", "folds", [](auto& c) -> auto& { return c.eval.folds; }));
    k.push_back(count_key("eval", "repetitions", [](auto& c) -> auto& { return c.eval.repetitions; }));
    k.push_back({"eval", "c_grid",
                 [](RunConfig& c, const std::string& v) { c.eval.c_grid = parse_list("eval.c_grid", v); },
                 [](const RunConfig& c) {
                   std::string s;
                   for (double x : c.eval.c_grid) s += (s.empty() ? "" : ",") + fmt(x);
                   return s;
                 }});
    k.push_back(count_key("eval", "inner_folds", [](auto& c) -> auto& { return c.eval.inner_folds; }));
    k.push_back(count_key("eval", "max_iterations",
                          [](auto& c) -> auto& { return c.eval.max_iterations; }));
    k.push_back(real_key("eval", "tolerance", [](auto& c) -> auto& { return c.eval.tolerance; }));
    k.push_back({"eval", "seed",
                 [](RunConfig& c, const std::string& v) { c.eval.seed = parse_u64("eval.seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.eval.seed); }});
    return k;
  }();
  return table;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  for (const auto& [section, entries] : tree) {
    if (!entries.data().empty()) throw ConfigError("config: key '" + section + "' outside any section");
    bool known_section = false;
    for (const Key& k : keys()) known_section = known_section || k.section == section;
    if (!known_section) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [name, value] : entries) {
      const Key* match = nullptr;
      for (const Key& k : keys())
        if (k.section == section && k.name == name) match = &k;
      if (match == nullptr) throw ConfigError("config: unknown key '" + name + "' in [" + section + "]");
      match->set(config, value.data());
    }
  }
  if (!config.data_path.empty() && config.data_path.is_relative() && !base_dir.empty()) {
    config.data_path = (base_dir / config.data_path).lexically_normal();
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string snapshot(const RunConfig& config) {
  std::string out, section;
  for (const Key& k : keys()) {
    if (k.section != section) {
      out += (section.empty() ? "[" : "\n[") + k.section + "]\n";
      section = k.section;
    }
    out += k.name + " = " + k.get(config) + "\n";
  }
  return out;
}

void validate(const RunConfig& config) {
  config.train.validate();
  config.eval.validate();
}

}  // namespace sgmi::cli
