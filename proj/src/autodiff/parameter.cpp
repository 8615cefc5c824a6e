#include "sgmi/autodiff/parameter.hpp"

#include "sgmi/core/error.hpp"

namespace sgmi::ad {

Parameter& ParameterStore::add(std::string name, Tensor init) {
  if (index_.contains(name)) throw ContractError("parameter store: duplicate name '" + name + "'");
  index_.emplace(name, params_.size());
  Tensor grad(init.shape());
  params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad), false});
  return params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("parameter store: no parameter '" + name + "'");
  return params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("parameter store: no parameter '" + name + "'");
  return params_[it->second];
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) {
    p.grad.fill(0.0);
    p.grad_ready = false;
  }
}

std::vector<NamedTensor> ParameterStore::snapshot() const {
  std::vector<NamedTensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back({p.name, p.value});
  return out;
}

void ParameterStore::restore(const std::vector<NamedTensor>& values) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& nt : values) by_name[nt.name] = &nt.value;
  for (auto& p : params_) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ContractError("restore: missing parameter '" + p.name + "'");
    if (it->second->shape() != p.value.shape()) {
      throw DimensionError("restore: parameter '" + p.name + "' has shape " + shape_str(p.value.shape()) +
                           ", stored " + shape_str(it->second->shape()));
    }
    p.value = *it->second;
  }
}

}  // namespace sgmi::ad
