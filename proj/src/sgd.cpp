// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/sgd.hpp"

#include "ladd/ops.hpp"

namespace ladd {

template <typename T>
void sgd_step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads, SgdState<T>& state) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: params/grads count mismatch");
  if (state.momentum != T(0) && state.velocity.empty()) {
    for (const auto& p : params) state.velocity.emplace_back(p.shape());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) {
      throw ShapeError("sgd_step: param " + std::to_string(i) + " is " +
                       shape_str(params[i].shape()) + ", grad is " + shape_str(grads[i].shape()));
    }
    T* p = params[i].data();
    const T* g = grads[i].data();
    const std::size_t n = params[i].numel();
    if (state.momentum == T(0)) {
      for (std::size_t k = 0; k < n; ++k) p[k] -= state.lr * (g[k] + state.weight_decay * p[k]);
    } else {
      T* v = state.velocity[i].data();
      for (std::size_t k = 0; k < n; ++k) {
        v[k] = state.momentum * v[k] + (g[k] + state.weight_decay * p[k]);
        p[k] -= state.lr * v[k];
      }
    }
  }
}

template <typename T>
std::vector<Var<T>> sgd_step(std::span<const Var<T>> params, std::span<const Var<T>> grads,
                             T lr) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: params/grads count mismatch");
  std::vector<Var<T>> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) {
      throw ShapeError("sgd_step: param " + std::to_string(i) + " is " +
                       shape_str(params[i].shape()) + ", grad is " + shape_str(grads[i].shape()));
    }
    if (!grads[i].requires_grad() && params[i].requires_grad()) {
      throw CapabilityError(
          "differentiable sgd_step needs gradients built with create_graph; gradient " +
          std::to_string(i) + " is opaque");
    }
    out.push_back(sub(params[i], scale(grads[i], lr)));
  }
  return out;
}

template void sgd_step(std::span<Tensor<float>>, std::span<const Tensor<float>>,
                       SgdState<float>&);
template void sgd_step(std::span<Tensor<double>>, std::span<const Tensor<double>>,
                       SgdState<double>&);
template std::vector<Var<float>> sgd_step(std::span<const Var<float>>,
                                          std::span<const Var<float>>, float);
template std::vector<Var<double>> sgd_step(std::span<const Var<double>>,
                                           std::span<const Var<double>>, double);

}  // namespace ladd
