// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over a dynamically recorded graph.
//
// Every op result that depends on a grad-requiring input is a Node holding
// its value, its inputs and a backward closure. Backward closures are written
// in terms of the same Var ops, so running them with recording enabled yields
// gradients that are themselves differentiable (create_graph). Ops whose
// backward is implemented with raw kernels are flagged as first-order only
// and reject a create_graph sweep with CapabilityError.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ladd/tensor.hpp"

namespace ladd {

template <typename T>
class Var;

template <typename T>
struct Node {
  using BackwardFn = std::function<std::vector<Var<T>>(const Var<T>& grad_out)>;

  Tensor<T> value;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
  const char* op = "leaf";
  bool requires_grad = false;
  bool twice_differentiable = true;
  std::uint64_t seq = 0;
};

/// Whether ops executed on this thread record graph nodes.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class GradModeGuard {
 public:
  explicit GradModeGuard(bool on) : prev_(GradMode::enabled()) { GradMode::set_enabled(on); }
  ~GradModeGuard() { GradMode::set_enabled(prev_); }
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool prev_;
};

std::uint64_t next_node_seq();

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  /// A graph leaf. Leaves with requires_grad are differentiation targets.
  static Var leaf(Tensor<T> value, bool requires_grad = true) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->seq = next_node_seq();
    return Var(std::move(n));
  }
  static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t numel() const { return node_->value.numel(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const char* op() const { return node_->op; }
  T item() const { return node_->value.item(); }

  /// Same value, cut from the graph.
  Var detach() const { return constant(node_->value); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Records a result node when recording is on and some input needs gradients;
/// otherwise returns a constant.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs,
                   typename Node<T>::BackwardFn backward, const char* op,
                   bool twice_differentiable) {
  bool needs = false;
  if (GradMode::enabled()) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (!needs) return Var<T>::constant(std::move(value));
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->inputs.reserve(inputs.size());
  for (auto& in : inputs) n->inputs.push_back(in.node());
  n->backward = std::move(backward);
  n->op = op;
  n->requires_grad = true;
  n->twice_differentiable = twice_differentiable;
  n->seq = next_node_seq();
  return Var<T>(std::move(n));
}

/// Topologically ordered view of everything reachable from a root that
/// participates in differentiation.
template <typename T>
class ComputationTape {
 public:
  struct Record {
    const char* op;
    std::vector<std::size_t> inputs;  // indices into the tape; always < own index
    bool differentiable_twice;
    bool is_leaf;
  };

  static ComputationTape record(const Var<T>& root);

  std::size_t size() const { return nodes_.size(); }
  const Record& at(std::size_t i) const { return records_.at(i); }
  const std::vector<Node<T>*>& nodes() const { return nodes_; }
  /// Whether every non-leaf op on the tape can be differentiated again.
  bool differentiable_twice() const;

 private:
  std::vector<Node<T>*> nodes_;
  std::vector<Record> records_;
};

/// Gradients of a scalar `loss` with respect to each of `wrt`.
///
/// With create_graph the returned gradients are graph nodes and can be
/// differentiated again; any first-order-only op on the path raises
/// CapabilityError. Targets the loss does not depend on get zero gradients.
template <typename T>
std::vector<Var<T>> grad(const Var<T>& loss, std::span<const Var<T>> wrt,
                         bool create_graph = false);

template <typename T>
std::vector<Var<T>> grad(const Var<T>& loss, const std::vector<Var<T>>& wrt,
                         bool create_graph = false) {
  return grad(loss, std::span<const Var<T>>(wrt), create_graph);
}

using VarF = Var<float>;
using VarD = Var<double>;

}  // namespace ladd
