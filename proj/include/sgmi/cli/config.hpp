#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include "sgmi/train/trainer.hpp"

namespace sgmi::cli {

/// Graph counts for semi-supervised runs; graphs left over become unlabeled.
struct SemiSplitSizes {
  std::size_t labeled = 100;
  std::size_t validation = 50;
  std::size_t test = 50;
};

struct RunConfig {
  std::filesystem::path data_path;  // TUDataset directory
  SemiSplitSizes semi;
  train::TrainConfig train;
  train::EvalConfig eval;
};

/// INI text with sections [data], [encoder], [generator], [objective],
/// [train] and [eval]. Missing keys keep their defaults; unknown sections or
/// keys and malformed values throw ConfigError. A relative data path is
/// resolved against `base_dir`.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its effective value, in a fixed order. Parsing the
/// snapshot yields the same configuration, and the same snapshot.
std::string snapshot(const RunConfig& config);

/// Full validation of both train and eval settings; throws ConfigError.
void validate(const RunConfig& config);

}  // namespace sgmi::cli
