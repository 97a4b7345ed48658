// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ladd {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& t, std::size_t begin, std::size_t end) {
  if (t.rank() == 0 || begin >= end || end > t.dim(0)) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_str(t.shape()));
  }
  Shape s = t.shape();
  const std::size_t row = t.numel() / s[0];
  s[0] = end - begin;
  std::vector<T> out(t.data() + begin * row, t.data() + end * row);
  return Tensor<T>(std::move(s), std::move(out));
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items) {
  if (items.empty()) throw ShapeError("stack of zero tensors");
  const Shape& inner = items.front().shape();
  Shape s{items.size()};
  s.insert(s.end(), inner.begin(), inner.end());
  std::vector<T> out;
  out.reserve(numel_of(s));
  for (const auto& it : items) {
    if (it.shape() != inner) {
      throw ShapeError("stack: expected " + shape_str(inner) + ", got " + shape_str(it.shape()));
    }
    out.insert(out.end(), it.storage().begin(), it.storage().end());
  }
  return Tensor<T>(std::move(s), std::move(out));
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& t, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ShapeError("gather_rows with no rows");
  Shape s = t.shape();
  const std::size_t row = t.numel() / s[0];
  s[0] = rows.size();
  std::vector<T> out(rows.size() * row);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= t.dim(0)) throw ShapeError("gather_rows index out of range");
    std::memcpy(out.data() + i * row, t.data() + rows[i] * row, row * sizeof(T));
  }
  return Tensor<T>(std::move(s), std::move(out));
}

#define LADD_INSTANTIATE(T)                                                     \
  template class Tensor<T>;                                                     \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);    \
  template Tensor<T> stack(std::span<const Tensor<T>>);                         \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);

LADD_INSTANTIATE(float)
LADD_INSTANTIATE(double)
LADD_INSTANTIATE(std::uint8_t)
#undef LADD_INSTANTIATE

}  // namespace ladd
