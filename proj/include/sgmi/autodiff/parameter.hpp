#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sgmi/autodiff/tensor.hpp"

namespace sgmi::ad {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Set when a backward pass has written into grad since the last update.
  bool grad_ready = false;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Owns named parameters. Element addresses stay stable for the lifetime of
/// the store, so modules may hold Parameter pointers.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter& add(std::string name, Tensor init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();

  // Values in insertion order.
  std::vector<NamedTensor> snapshot() const;
  // Restores values by name; every stored parameter must be present with its shape.
  void restore(const std::vector<NamedTensor>& values);

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace sgmi::ad
