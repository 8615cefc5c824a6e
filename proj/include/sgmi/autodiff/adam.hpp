#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "sgmi/autodiff/parameter.hpp"

namespace sgmi::ad {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

/// One bias-corrected Adam update over every parameter, then zeroes the
/// gradients. Returns false (and logs a warning) when no backward pass has
/// populated gradients since the previous update.
bool adam_step(ParameterStore& store, AdamState& state);

}  // namespace sgmi::ad
