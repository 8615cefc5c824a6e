#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sgmi/autodiff/ops.hpp"
#include "sgmi/autodiff/parameter.hpp"
#include "sgmi/core/rng.hpp"

namespace sgmi::model {

using ad::Parameter;
using ad::ParameterStore;
using ad::Tape;
using ad::Tensor;
using ad::Var;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialized tensor.
Tensor fan_in_uniform(Rng& rng, ad::Shape shape, std::size_t fan_in);

/// y = x W + b with W: in x out, b: 1 x out.
class Linear {
 public:
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var forward(Tape& tape, Var x) const;

  Parameter& weight() const { return *weight_; }
  Parameter& bias() const { return *bias_; }
  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }

 private:
  Parameter* weight_;
  Parameter* bias_;
  std::size_t in_, out_;
};

/// Linear layers with ReLU between consecutive layers (none after the last).
class Mlp {
 public:
  Mlp(ParameterStore& store, const std::string& name, std::vector<std::size_t> widths, Rng& rng);

  Var forward(Tape& tape, Var x) const;

  const std::vector<Linear>& layers() const { return layers_; }
  std::size_t in() const { return layers_.front().in(); }
  std::size_t out() const { return layers_.back().out(); }

 private:
  std::vector<Linear> layers_;
};

/// Learnable (N,1) kernel over N equally shaped channels:
/// out = sum_i w_i * X_i + b with scalar weights and a scalar bias.
/// Weights start at 1/N and the bias at 0.
class ChannelConv {
 public:
  ChannelConv(ParameterStore& store, const std::string& name, std::size_t channels);

  Var forward(Tape& tape, std::span<const Var> channels) const;

  std::size_t channels() const { return channels_; }
  Parameter& weights() const { return *weights_; }  // 1 x N
  Parameter& bias() const { return *bias_; }        // scalar

 private:
  Parameter* weights_;
  Parameter* bias_;
  std::size_t channels_;
};

}  // namespace sgmi::model
