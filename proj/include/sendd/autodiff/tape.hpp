// Copyright (c) 2026, The sendd-desk authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode tape. Nodes are appended in evaluation order, so parents always
// precede children and backward is a single reverse sweep. A tape is built once
// and differentiated once; a second backward() throws.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string_view>

#include "sendd/autodiff/tensor.hpp"

namespace sendd::ad {

class Tape;
using NodeId = std::size_t;

/// Handle to a tensor recorded on a Tape.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  NodeId id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

class Tape {
 public:
  /// Receives the gradient of the loss with respect to the node's output.
  using Backward = std::function<void(Tape&, std::span<const double>)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Appends an op result. The backward closure is kept only if some parent
  /// requires a gradient. Throws NumericError on non-finite output.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
             Backward backward);
  Var record(std::string_view op, Tensor value, std::span<const Var> parents, Backward backward);

  /// Accumulates d(loss)/d(node) for every node reachable from the scalar loss.
  void backward(const Var& loss);

  /// Gradient of the last backward pass; zeros if the node was not reached.
  Tensor grad(const Var& v) const;

  /// Mutable gradient accumulator, allocated on first use. For op closures.
  std::span<double> grad_buffer(NodeId id);
  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    Backward backward;
  };

  void check_parent(const Var& v) const;

  std::deque<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace sendd::ad
