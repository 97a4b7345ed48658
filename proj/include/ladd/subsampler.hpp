// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Static N x N crop grid. Each window covers a fraction R of both axes and is
// resized back to the full image size.
#pragma once

#include <cstddef>
#include <vector>

#include "ladd/ops.hpp"

namespace ladd {

struct SubSamplerConfig {
  std::size_t n = 5;
  double r = 0.625;

  std::size_t count() const { return n * n; }
  void validate() const;
};

using CropWindow = CropBox;

/// N^2 windows in row-major order (j = row * N + col). Window extents are
/// round(R * size); offsets are round-half-up of k * (size - extent) / (N - 1).
std::vector<CropWindow> crop_windows(std::size_t height, std::size_t width,
                                     const SubSamplerConfig& cfg);

/// Sub-image j of a [C, H, W] image, resized to [C, H, W].
template <typename T>
Tensor<T> subsample(const Tensor<T>& image, const SubSamplerConfig& cfg, std::size_t j);

/// All sub-images of one image, [N^2, C, H, W].
template <typename T>
Tensor<T> subsample_all(const Tensor<T>& image, const SubSamplerConfig& cfg);

/// Sub-image views of a batch [B, C, H, W], laid out [B * N^2, C, H, W] with
/// the N^2 views of image b at rows b * N^2 .. b * N^2 + N^2 - 1.
template <typename T>
Tensor<T> subsample_batch(const Tensor<T>& batch, const SubSamplerConfig& cfg);

/// Differentiable sub-image j of every image in a batch.
template <typename T>
Var<T> subsample_var(const Var<T>& batch, const SubSamplerConfig& cfg, std::size_t j);

}  // namespace ladd
