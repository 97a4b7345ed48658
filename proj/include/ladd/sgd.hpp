// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "ladd/autograd.hpp"

namespace ladd {

template <typename T>
struct SgdState {
  T lr = T(0.01);
  T momentum = T(0);
  T weight_decay = T(0);
  /// Mirrors the parameter shapes once the first momentum step has run.
  std::vector<Tensor<T>> velocity;
};

/// In-place update with plain tensors (the fast training path):
///   v <- momentum * v + (g + weight_decay * p);  p <- p - lr * v
template <typename T>
void sgd_step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads, SgdState<T>& state);

/// Graph-building update. The returned parameters are nodes through which a
/// later loss differentiates back into whatever produced `grads`. Requires
/// gradients built with create_graph; plain gradients raise CapabilityError.
/// Momentum and weight decay are not supported on this path.
template <typename T>
std::vector<Var<T>> sgd_step(std::span<const Var<T>> params, std::span<const Var<T>> grads,
                             T lr);

}  // namespace ladd
