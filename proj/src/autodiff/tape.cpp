// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0

#include "sendd/autodiff/tape.hpp"

#include <string>

#include "sendd/errors.hpp"

namespace sendd::ad {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("access through an empty Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("non-finite leaf value");
  nodes_.push_back(Node{std::move(value), {}, requires_grad, {}});
  return Var(this, nodes_.size() - 1);
}

void Tape::check_parent(const Var& v) const {
  if (v.tape() != this) throw ContractError("operand recorded on a different tape");
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
                 Backward backward) {
  return record(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> parents,
                 Backward backward) {
  if (consumed_) throw ContractError("tape already differentiated; build a fresh tape");
  if (!value.all_finite()) throw NumericError(std::string(op) + " produced a non-finite value");
  bool needs = false;
  for (const auto& p : parents) {
    check_parent(p);
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_buffer(NodeId id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(const Var& loss) {
  check_parent(loss);
  if (consumed_) throw ContractError("backward() called twice on one tape");
  if (loss.size() != 1) throw ContractError("backward() needs a scalar loss");
  consumed_ = true;
  grad_buffer(loss.id())[0] = 1.0;
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (node.grad.empty() || !node.backward) continue;
    node.backward(*this, node.grad);
  }
}

Tensor Tape::grad(const Var& v) const {
  check_parent(v);
  const auto& node = nodes_[v.id()];
  if (node.grad.empty()) return Tensor(node.value.shape());
  return Tensor(node.value.shape(), node.grad);
}

}  // namespace sendd::ad
