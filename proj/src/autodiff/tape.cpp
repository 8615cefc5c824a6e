#include "sgmi/autodiff/tape.hpp"

#include "sgmi/core/error.hpp"

namespace sgmi::ad {

Var Tape::constant(Tensor value) {
  records_.push_back(Record{"constant", std::move(value), {}, nullptr, nullptr, false});
  return Var(this, records_.size() - 1);
}

Var Tape::parameter(Parameter& param) {
  records_.push_back(Record{"parameter", param.value, {}, nullptr, &param, grad_enabled_});
  return Var(this, records_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  if (grad_enabled_) {
    for (std::size_t id : inputs) needs = needs || records_[id].requires_grad;
  }
  Record r{op, std::move(value), {}, nullptr, nullptr, needs};
  if (needs) {
    r.inputs = std::move(inputs);
    r.backward = std::move(backward);
  }
  records_.push_back(std::move(r));
  return Var(this, records_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!records_[id].requires_grad) return;
  Tensor& slot = grads_[id];
  if (slot.empty() && slot.shape().empty()) {
    slot = g;
    return;
  }
  auto dst = slot.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::accumulate(std::size_t id, Tensor&& g) {
  if (!records_[id].requires_grad) return;
  Tensor& slot = grads_[id];
  if (slot.empty() && slot.shape().empty()) {
    slot = std::move(g);
    return;
  }
  auto dst = slot.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw ContractError("backward: loss belongs to a different tape");
  const Tensor& lv = records_[loss.id_].value;
  if (lv.numel() != 1) throw ContractError("backward: loss must be scalar, got shape " + shape_str(lv.shape()));
  last_visits_ = 0;
  if (!records_[loss.id_].requires_grad) return;

  grads_.assign(records_.size(), Tensor());
  grads_[loss.id_] = Tensor(lv.shape(), 1.0);

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Record& r = records_[i];
    ++last_visits_;
    Tensor& g = grads_[i];
    if (g.empty()) continue;
    if (r.param != nullptr) {
      auto dst = r.param->grad.data();
      auto src = g.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      r.param->grad_ready = true;
    } else if (r.backward) {
      r.backward(*this, g);
    }
    g = Tensor();
  }
  grads_.clear();
  grads_.shrink_to_fit();
}

}  // namespace sgmi::ad
