// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable ops.
//
// Re-differentiable (usable under create_graph): add, sub, mul, neg, scale,
// mul_scalar, sqrt, reciprocal, take_rows, pad_rows, matmul, transpose, linear, add_rowvec, sum_rows, broadcast_rows,
// row_sum, broadcast_cols, sum_all, expand, reshape, relu, sigmoid, softplus,
// softmax, log_softmax, softmax_cross_entropy.
//
// First-order only: conv2d, avg_pool2x2, instance_norm, crop_resize.
#pragma once

#include <cstddef>

#include "ladd/autograd.hpp"

namespace ladd {

// Elementwise, equal shapes.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> neg(const Var<T>& a);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
/// a * s where s holds a single element.
template <typename T> Var<T> mul_scalar(const Var<T>& a, const Var<T>& s);

template <typename T> Var<T> sqrt(const Var<T>& a);
template <typename T> Var<T> reciprocal(const Var<T>& a);

/// Rows [begin, end) of the leading axis.
template <typename T> Var<T> take_rows(const Var<T>& x, std::size_t begin, std::size_t end);
/// Zero rows added before and after along the leading axis.
template <typename T> Var<T> pad_rows(const Var<T>& x, std::size_t before, std::size_t after);

template <typename T> Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T> Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T> Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }
template <typename T> Var<T> operator-(const Var<T>& a) { return neg(a); }

// Matrix ops on rank-2 operands.
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> transpose(const Var<T>& a);
/// x[m,k] * w[n,k]^T + b[n]
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);
/// x[m,n] + b[n] on every row.
template <typename T> Var<T> add_rowvec(const Var<T>& x, const Var<T>& b);
/// [m,n] -> [n]
template <typename T> Var<T> sum_rows(const Var<T>& x);
/// [n] -> [m,n]
template <typename T> Var<T> broadcast_rows(const Var<T>& v, std::size_t m);
/// [m,n] -> [m]
template <typename T> Var<T> row_sum(const Var<T>& x);
/// [m] -> [m,n]
template <typename T> Var<T> broadcast_cols(const Var<T>& v, std::size_t n);

/// Sum of all elements, shape [1].
template <typename T> Var<T> sum_all(const Var<T>& x);
/// Single-element tensor broadcast to `shape`.
template <typename T> Var<T> expand(const Var<T>& s, const Shape& shape);
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);
template <typename T> Var<T> dot(const Var<T>& a, const Var<T>& b) { return sum_all(mul(a, b)); }

// Activations. relu's second derivative is taken as zero everywhere.
template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> softplus(const Var<T>& x);

// Row-wise over rank-2 [batch, classes].
template <typename T> Var<T> softmax(const Var<T>& logits);
template <typename T> Var<T> log_softmax(const Var<T>& logits);
/// Mean over rows of -sum_c target_c * log softmax(logits)_c, shape [1].
/// Differentiable in both arguments.
template <typename T> Var<T> softmax_cross_entropy(const Var<T>& logits, const Var<T>& target);

// Image ops on [B, C, H, W].
/// Stride-1 convolution with zero padding that preserves H and W (odd kernel).
/// weight [Cout, Cin, k, k], bias [Cout].
template <typename T> Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);
/// Non-overlapping 2x2 mean; an odd trailing row or column is dropped.
template <typename T> Var<T> avg_pool2x2(const Var<T>& x);
/// Per-sample, per-channel standardization with affine gamma[C], beta[C].
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5));

struct CropBox {
  std::size_t x0 = 0, y0 = 0, w = 0, h = 0;
};

/// Crops `box` from every image and bilinearly resizes it to out_h x out_w
/// using half-pixel-center alignment with edge clamping.
template <typename T>
Var<T> crop_resize(const Var<T>& x, const CropBox& box, std::size_t out_h, std::size_t out_w);

/// Plain-tensor version of crop_resize for a single [C, H, W] image.
template <typename T>
Tensor<T> crop_resize_image(const Tensor<T>& image, const CropBox& box, std::size_t out_h,
                            std::size_t out_w);

/// Row-wise softmax on a plain tensor.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

}  // namespace ladd
