#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string_view>
#include <vector>

#include "sgmi/autodiff/parameter.hpp"
#include "sgmi/autodiff/tensor.hpp"

namespace sgmi::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run record of executed operations. Records are appended in
/// execution order, so every operand id precedes its result id.
class Tape {
 public:
  // Receives the gradient flowing into the record's result and pushes
  // contributions into its operands via Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Parameter& param);

  Var record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  /// Reverse pass from a scalar loss. Parameter leaves add their gradient to
  /// Parameter::grad; intermediate gradients are released afterwards.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return records_[id].value; }
  bool requires_grad(std::size_t id) const { return records_[id].requires_grad; }
  std::string_view op(std::size_t id) const { return records_[id].op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return records_[id].inputs; }
  std::size_t size() const { return records_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

  // Adds g into the pending gradient of record id (no-op if it needs no gradient).
  void accumulate(std::size_t id, const Tensor& g);
  void accumulate(std::size_t id, Tensor&& g);

  // Number of records visited by the most recent backward pass.
  std::size_t last_backward_visits() const { return last_visits_; }

 private:
  struct Record {
    std::string_view op;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::deque<Record> records_;
  std::vector<Tensor> grads_;
  bool grad_enabled_;
  std::size_t last_visits_ = 0;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace sgmi::ad
