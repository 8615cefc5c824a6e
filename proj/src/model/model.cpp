#include "sgmi/model/model.hpp"

#include <cmath>
#include <map>

#include "sgmi/autodiff/checkpoint.hpp"
#include "sgmi/core/error.hpp"

namespace sgmi::model {

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config), store_(std::make_unique<ad::ParameterStore>()) {
  Rng rng(seed);
  encoder_ = std::make_unique<Encoder>(*store_, config.node_in, config.edge_in, config.encoder, rng);
  generator_ = std::make_unique<SubgraphGenerator>(*store_, config.encoder.hidden, config.generator, rng);
  if (config.head_outputs > 0) {
    head_.emplace(*store_, "head",
                  std::vector<std::size_t>{config.encoder.hidden, config.encoder.hidden, config.head_outputs}, rng);
  }
}

Tensor Model::embed(const GraphBatch& batch) const {
  Tape tape(false);
  return encoder_->encode(tape, batch).h.value();
}

namespace {

ad::NamedTensor meta(const std::string& key, double value) { return {"meta/" + key, Tensor::scalar(value)}; }

}  // namespace

std::vector<ad::NamedTensor> model_records(const Model& model) {
  const ModelConfig& c = model.config();
  std::vector<ad::NamedTensor> records = {
      meta("node_in", static_cast<double>(c.node_in)),
      meta("edge_in", static_cast<double>(c.edge_in)),
      meta("layers", static_cast<double>(c.encoder.num_layers)),
      meta("hidden", static_cast<double>(c.encoder.hidden)),
      meta("readout", c.encoder.readout == Readout::Sum ? 0.0 : 1.0),
      meta("generator", c.generator.kind == GeneratorKind::TreeSplit ? 0.0 : 1.0),
      meta("depth", static_cast<double>(c.generator.depth)),
      meta("heads", static_cast<double>(c.generator.heads)),
      meta("head_outputs", static_cast<double>(c.head_outputs)),
      meta("task", c.task == TaskKind::Classification ? 0.0 : 1.0),
      meta("degree_clamp", c.degree_clamp ? static_cast<double>(*c.degree_clamp) : -1.0),
  };
  for (const auto& p : model.params()) records.push_back({p.name, p.value});
  return records;
}

Model model_from_records(const std::vector<ad::NamedTensor>& records) {
  std::map<std::string, double> values;
  std::vector<ad::NamedTensor> params;
  for (const auto& r : records) {
    if (r.name.starts_with("meta/")) {
      if (r.value.numel() != 1) throw LoadError("checkpoint: meta record '" + r.name + "' is not scalar");
      values[r.name.substr(5)] = r.value.item();
    } else {
      params.push_back(r);
    }
  }
  auto get = [&](const std::string& key) -> double {
    auto it = values.find(key);
    if (it == values.end()) throw LoadError("checkpoint: missing meta record '" + key + "'");
    return it->second;
  };
  auto count = [&](const std::string& key) {
    const double v = get(key);
    if (v < 0 || v != std::floor(v)) throw LoadError("checkpoint: bad meta value for '" + key + "'");
    return static_cast<std::size_t>(v);
  };
  ModelConfig c;
  c.node_in = count("node_in");
  c.edge_in = count("edge_in");
  c.encoder.num_layers = count("layers");
  c.encoder.hidden = count("hidden");
  c.encoder.readout = get("readout") == 0.0 ? Readout::Sum : Readout::Mean;
  c.generator.kind = get("generator") == 0.0 ? GeneratorKind::TreeSplit : GeneratorKind::MultiHead;
  c.generator.depth = count("depth");
  c.generator.heads = count("heads");
  c.head_outputs = count("head_outputs");
  c.task = get("task") == 0.0 ? TaskKind::Classification : TaskKind::Regression;
  if (get("degree_clamp") >= 0.0) c.degree_clamp = count("degree_clamp");

  Model model(c, 0);
  if (params.size() != model.params().size()) {
    throw LoadError("checkpoint: " + std::to_string(params.size()) + " parameter records, model expects " +
                    std::to_string(model.params().size()));
  }
  try {
    model.params().restore(params);
  } catch (const Error& e) {
    throw LoadError(std::string("checkpoint: ") + e.what());
  }
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const auto records = model_records(model);
  ad::save_tensors(path, records);
}

Model load_checkpoint(const std::filesystem::path& path) { return model_from_records(ad::load_tensors(path)); }

}  // namespace sgmi::model
