// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_map>
#include <unordered_set>

#include "ladd/ops.hpp"

namespace ladd {

namespace {
thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_seq{0};
}  // namespace

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }
std::uint64_t next_node_seq() { return g_seq.fetch_add(1, std::memory_order_relaxed) + 1; }

template <typename T>
ComputationTape<T> ComputationTape<T>::record(const Var<T>& root) {
  ComputationTape tape;
  if (!root.requires_grad()) return tape;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{root.node().get()};
  seen.insert(stack.back());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    tape.nodes_.push_back(n);
    for (const auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  // Node sequence numbers are assigned at creation, and an op's inputs always
  // exist before the op itself, so ascending seq is a topological order.
  std::sort(tape.nodes_.begin(), tape.nodes_.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->seq < b->seq; });
  std::unordered_map<const Node<T>*, std::size_t> index;
  for (std::size_t i = 0; i < tape.nodes_.size(); ++i) index[tape.nodes_[i]] = i;
  tape.records_.reserve(tape.nodes_.size());
  for (const Node<T>* n : tape.nodes_) {
    Record r{n->op, {}, n->twice_differentiable, !n->backward};
    for (const auto& in : n->inputs) {
      auto it = index.find(in.get());
      if (it != index.end()) r.inputs.push_back(it->second);
    }
    tape.records_.push_back(std::move(r));
  }
  return tape;
}

template <typename T>
bool ComputationTape<T>::differentiable_twice() const {
  return std::all_of(records_.begin(), records_.end(),
                     [](const Record& r) { return r.is_leaf || r.differentiable_twice; });
}

template <typename T>
std::vector<Var<T>> grad(const Var<T>& loss, std::span<const Var<T>> wrt, bool create_graph) {
  if (loss.defined() && loss.numel() != 1) {
    throw ShapeError("grad() needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  std::vector<Var<T>> out;
  out.reserve(wrt.size());
  auto zeros_like = [](const Var<T>& v) { return Var<T>::constant(Tensor<T>(v.shape())); };
  if (!loss.requires_grad()) {
    for (const auto& w : wrt) out.push_back(zeros_like(w));
    return out;
  }

  const auto tape = ComputationTape<T>::record(loss);
  std::unordered_set<const Node<T>*> targets;
  for (const auto& w : wrt) targets.insert(w.node().get());

  std::unordered_map<const Node<T>*, Var<T>> grads;
  grads.emplace(loss.node().get(), Var<T>::constant(Tensor<T>(loss.shape(), T(1))));

  GradModeGuard mode(create_graph);
  const auto& nodes = tape.nodes();
  for (std::size_t i = nodes.size(); i-- > 0;) {
    Node<T>* n = nodes[i];
    auto it = grads.find(n);
    if (it == grads.end() || !n->backward) continue;
    if (create_graph && !n->twice_differentiable) {
      throw CapabilityError(std::string("op '") + n->op +
                            "' is first-order only; cannot build a differentiable gradient "
                            "through it");
    }
    Var<T> g = it->second;
    if (!targets.contains(n)) grads.erase(it);
    auto input_grads = n->backward(g);
    for (std::size_t k = 0; k < n->inputs.size() && k < input_grads.size(); ++k) {
      const Node<T>* in = n->inputs[k].get();
      if (!in->requires_grad || !input_grads[k].defined()) continue;
      auto [slot, inserted] = grads.try_emplace(in, input_grads[k]);
      if (!inserted) slot->second = add(slot->second, input_grads[k]);
    }
  }

  for (const auto& w : wrt) {
    auto it = grads.find(w.node().get());
    out.push_back(it == grads.end() ? zeros_like(w) : it->second);
  }
  return out;
}

template class ComputationTape<float>;
template class ComputationTape<double>;
template std::vector<Var<float>> grad(const Var<float>&, std::span<const Var<float>>, bool);
template std::vector<Var<double>> grad(const Var<double>&, std::span<const Var<double>>, bool);

}  // namespace ladd
