#include "sgmi/model/nn.hpp"

#include <cmath>

#include "sgmi/core/error.hpp"

namespace sgmi::model {

Tensor fan_in_uniform(Rng& rng, ad::Shape shape, std::size_t fan_in) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : t.data()) x = rng.uniform(-bound, bound);
  return t;
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight_(&store.add(name + "/weight", fan_in_uniform(rng, {in, out}, in))),
      bias_(&store.add(name + "/bias", fan_in_uniform(rng, {1, out}, in))),
      in_(in),
      out_(out) {}

Var Linear::forward(Tape& tape, Var x) const {
  if (x.value().cols() != in_) {
    throw ContractError("linear '" + weight_->name + "': input width " + std::to_string(x.value().cols()) +
                        " does not match " + std::to_string(in_));
  }
  return ad::add(ad::matmul(x, tape.parameter(*weight_)), tape.parameter(*bias_));
}

Mlp::Mlp(ParameterStore& store, const std::string& name, std::vector<std::size_t> widths, Rng& rng) {
  if (widths.size() < 2) throw ContractError("mlp '" + name + "': needs at least two widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers_.emplace_back(store, name + "/" + std::to_string(i), widths[i], widths[i + 1], rng);
  }
}

Var Mlp::forward(Tape& tape, Var x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(tape, x);
    if (i + 1 < layers_.size()) x = ad::relu(x);
  }
  return x;
}

ChannelConv::ChannelConv(ParameterStore& store, const std::string& name, std::size_t channels)
    : weights_(&store.add(name + "/weight", Tensor({1, channels}, 1.0 / static_cast<double>(channels)))),
      bias_(&store.add(name + "/bias", Tensor::scalar(0.0))),
      channels_(channels) {
  if (channels == 0) throw ContractError("channel conv '" + name + "': needs at least one channel");
}

Var ChannelConv::forward(Tape& tape, std::span<const Var> channels) const {
  if (channels.size() != channels_) {
    throw ContractError("channel conv '" + weights_->name + "': expected " + std::to_string(channels_) +
                        " channels, got " + std::to_string(channels.size()));
  }
  for (const Var& c : channels) {
    if (c.shape() != channels.front().shape()) {
      throw DimensionError("channel conv '" + weights_->name + "': channel shapes differ " +
                           ad::shape_str(channels.front().shape()) + " vs " + ad::shape_str(c.shape()));
    }
  }
  Var w = tape.parameter(*weights_);
  Var out = ad::mul(channels[0], ad::column(w, 0));
  for (std::size_t i = 1; i < channels.size(); ++i) out = ad::add(out, ad::mul(channels[i], ad::column(w, i)));
  return ad::add(out, tape.parameter(*bias_));
}

}  // namespace sgmi::model
