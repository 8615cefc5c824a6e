#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "sgmi/model/encoder.hpp"
#include "sgmi/model/subgraph.hpp"

namespace sgmi::model {

enum class TaskKind { Classification, Regression };

struct ModelConfig {
  std::size_t node_in = 0;
  std::size_t edge_in = 0;  // 0: no edge attributes
  EncoderConfig encoder;
  GeneratorConfig generator;
  // Prediction head for semi-supervised training; 0 outputs means no head.
  std::size_t head_outputs = 0;
  TaskKind task = TaskKind::Classification;
  // Degree one-hot clamp used to build node features, when the data had none.
  std::optional<std::size_t> degree_clamp;
};

/// Encoder, subgraph generator and optional prediction head over one
/// parameter store. Move-only: components refer to parameters by address.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  ad::ParameterStore& params() { return *store_; }
  const ad::ParameterStore& params() const { return *store_; }
  const Encoder& encoder() const { return *encoder_; }
  const SubgraphGenerator& generator() const { return *generator_; }
  const Mlp* head() const { return head_ ? &*head_ : nullptr; }

  /// h(G) for every graph in the batch without recording gradients.
  Tensor embed(const GraphBatch& batch) const;

 private:
  ModelConfig config_;
  std::unique_ptr<ad::ParameterStore> store_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<SubgraphGenerator> generator_;
  std::optional<Mlp> head_;
};

/// Model configuration as scalar "meta/..." records followed by every
/// parameter, in the SGMI tensor container.
std::vector<ad::NamedTensor> model_records(const Model& model);
Model model_from_records(const std::vector<ad::NamedTensor>& records);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace sgmi::model
