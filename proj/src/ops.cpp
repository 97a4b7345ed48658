// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace ladd {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

template <typename T>
void same_shape(const char* op, const Var<T>& a, const Var<T>& b) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

template <typename T>
void rank2(const char* op, const Var<T>& a) {
  require(a.value().rank() == 2,
          std::string(op) + ": expected rank-2 operand, got " + shape_str(a.shape()));
}

template <typename T>
void rank4(const char* op, const Var<T>& a) {
  require(a.value().rank() == 4,
          std::string(op) + ": expected [B, C, H, W], got " + shape_str(a.shape()));
}

template <typename T, typename F>
Tensor<T> map1(const Tensor<T>& a, F f) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename T, typename F>
Tensor<T> map2(const Tensor<T>& a, const Tensor<T>& b, F f) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& z) {
  const std::size_t m = z.dim(0), n = z.dim(1);
  Tensor<T> out(z.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const T* zr = z.data() + i * n;
    T* o = out.data() + i * n;
    T mx = *std::max_element(zr, zr + n);
    T s = 0;
    for (std::size_t c = 0; c < n; ++c) s += std::exp(zr[c] - mx);
    const T lse = mx + std::log(s);
    for (std::size_t c = 0; c < n; ++c) o[c] = zr[c] - lse;
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax: expected [batch, classes]");
  Tensor<T> out = log_softmax_rows(logits);
  for (auto& v : out.storage()) v = std::exp(v);
  return out;
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  same_shape("add", a, b);
  return make_result<T>(
      map2(a.value(), b.value(), [](T x, T y) { return x + y; }), {a, b},
      [](const Var<T>& g) { return std::vector<Var<T>>{g, g}; }, "add", true);
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  same_shape("sub", a, b);
  return make_result<T>(
      map2(a.value(), b.value(), [](T x, T y) { return x - y; }), {a, b},
      [](const Var<T>& g) { return std::vector<Var<T>>{g, neg(g)}; }, "sub", true);
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  same_shape("mul", a, b);
  return make_result<T>(
      map2(a.value(), b.value(), [](T x, T y) { return x * y; }), {a, b},
      [a, b](const Var<T>& g) { return std::vector<Var<T>>{mul(g, b), mul(g, a)}; }, "mul", true);
}

template <typename T>
Var<T> neg(const Var<T>& a) {
  return make_result<T>(
      map1(a.value(), [](T x) { return -x; }), {a},
      [](const Var<T>& g) { return std::vector<Var<T>>{neg(g)}; }, "neg", true);
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  return make_result<T>(
      map1(a.value(), [factor](T x) { return x * factor; }), {a},
      [factor](const Var<T>& g) { return std::vector<Var<T>>{scale(g, factor)}; }, "scale", true);
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, const Var<T>& s) {
  require(s.numel() == 1, "mul_scalar: scale operand must have one element, got " +
                              shape_str(s.shape()));
  const T sv = s.value()[0];
  return make_result<T>(
      map1(a.value(), [sv](T x) { return x * sv; }), {a, s},
      [a, s](const Var<T>& g) {
        return std::vector<Var<T>>{mul_scalar(g, s), reshape(sum_all(mul(g, a)), s.shape())};
      },
      "mul_scalar", true);
}

template <typename T>
Var<T> sqrt(const Var<T>& a) {
  for (T v : a.value().storage()) {
    if (!(v >= T(0))) throw NumericalError("sqrt: negative or NaN operand");
  }
  Tensor<T> out = map1(a.value(), [](T x) { return std::sqrt(x); });
  return make_result<T>(
      std::move(out), {a},
      [a](const Var<T>& g) {
        return std::vector<Var<T>>{mul(g, scale(reciprocal(sqrt(a)), T(0.5)))};
      },
      "sqrt", true);
}

template <typename T>
Var<T> reciprocal(const Var<T>& a) {
  Tensor<T> out = map1(a.value(), [](T x) { return T(1) / x; });
  return make_result<T>(
      std::move(out), {a},
      [a](const Var<T>& g) {
        auto r = reciprocal(a);
        return std::vector<Var<T>>{neg(mul(g, mul(r, r)))};
      },
      "reciprocal", true);
}

template <typename T>
Var<T> take_rows(const Var<T>& x, std::size_t begin, std::size_t end) {
  require(x.value().rank() >= 1 && begin < end && end <= x.shape()[0],
          "take_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
              ") outside " + shape_str(x.shape()));
  Shape src = x.shape();
  return make_result<T>(
      slice_rows(x.value(), begin, end), {x},
      [src, begin, end](const Var<T>& g) {
        return std::vector<Var<T>>{pad_rows(g, begin, src[0] - end)};
      },
      "take_rows", true);
}

template <typename T>
Var<T> pad_rows(const Var<T>& x, std::size_t before, std::size_t after) {
  Shape s = x.shape();
  const std::size_t row = x.numel() / s[0];
  Shape out_shape = s;
  out_shape[0] = before + s[0] + after;
  Tensor<T> out(out_shape);
  std::copy(x.value().data(), x.value().data() + x.numel(), out.data() + before * row);
  const std::size_t n = s[0];
  return make_result<T>(
      std::move(out), {x},
      [before, n](const Var<T>& g) {
        return std::vector<Var<T>>{take_rows(g, before, before + n)};
      },
      "pad_rows", true);
}

// ---------------------------------------------------------------- matrix

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  rank2("matmul", a);
  rank2("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  require(b.shape()[0] == k, "matmul: inner dims differ, " + shape_str(a.shape()) + " x " +
                                 shape_str(b.shape()));
  Tensor<T> out(Shape{m, n});
  MapR<T>(out.data(), m, n).noalias() =
      CMapR<T>(a.value().data(), m, k) * CMapR<T>(b.value().data(), k, n);
  return make_result<T>(
      std::move(out), {a, b},
      [a, b](const Var<T>& g) {
        return std::vector<Var<T>>{matmul(g, transpose(b)), matmul(transpose(a), g)};
      },
      "matmul", true);
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  rank2("transpose", a);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor<T> out(Shape{n, m});
  MapR<T>(out.data(), n, m) = CMapR<T>(a.value().data(), m, n).transpose();
  return make_result<T>(
      std::move(out), {a}, [](const Var<T>& g) { return std::vector<Var<T>>{transpose(g)}; },
      "transpose", true);
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  rank2("linear", x);
  rank2("linear", w);
  const std::size_t m = x.shape()[0], k = x.shape()[1], n = w.shape()[0];
  require(w.shape()[1] == k, "linear: input has " + std::to_string(k) +
                                 " features, weight expects " + std::to_string(w.shape()[1]));
  require(b.shape() == Shape{n}, "linear: bias shape " + shape_str(b.shape()) +
                                     " does not match " + std::to_string(n) + " outputs");
  Tensor<T> out(Shape{m, n});
  auto o = MapR<T>(out.data(), m, n);
  o.noalias() = CMapR<T>(x.value().data(), m, k) * CMapR<T>(w.value().data(), n, k).transpose();
  o.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.value().data(), n);
  const bool need_x = x.requires_grad();
  return make_result<T>(
      std::move(out), {x, w, b},
      [x, w, need_x](const Var<T>& g) {
        return std::vector<Var<T>>{need_x ? matmul(g, w) : Var<T>{}, matmul(transpose(g), x),
                                   sum_rows(g)};
      },
      "linear", true);
}

template <typename T>
Var<T> add_rowvec(const Var<T>& x, const Var<T>& b) {
  rank2("add_rowvec", x);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  require(b.shape() == Shape{n}, "add_rowvec: vector shape " + shape_str(b.shape()));
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b.value()[j];
  return make_result<T>(
      std::move(out), {x, b},
      [](const Var<T>& g) { return std::vector<Var<T>>{g, sum_rows(g)}; }, "add_rowvec", true);
}

template <typename T>
Var<T> sum_rows(const Var<T>& x) {
  rank2("sum_rows", x);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  Tensor<T> out(Shape{n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += x.value()[i * n + j];
  return make_result<T>(
      std::move(out), {x},
      [m](const Var<T>& g) { return std::vector<Var<T>>{broadcast_rows(g, m)}; }, "sum_rows",
      true);
}

template <typename T>
Var<T> broadcast_rows(const Var<T>& v, std::size_t m) {
  require(v.value().rank() == 1, "broadcast_rows: expected a vector");
  const std::size_t n = v.numel();
  Tensor<T> out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i)
    std::copy(v.value().data(), v.value().data() + n, out.data() + i * n);
  return make_result<T>(
      std::move(out), {v}, [](const Var<T>& g) { return std::vector<Var<T>>{sum_rows(g)}; },
      "broadcast_rows", true);
}

template <typename T>
Var<T> row_sum(const Var<T>& x) {
  rank2("row_sum", x);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  Tensor<T> out(Shape{m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += x.value()[i * n + j];
  return make_result<T>(
      std::move(out), {x},
      [n](const Var<T>& g) { return std::vector<Var<T>>{broadcast_cols(g, n)}; }, "row_sum", true);
}

template <typename T>
Var<T> broadcast_cols(const Var<T>& v, std::size_t n) {
  require(v.value().rank() == 1, "broadcast_cols: expected a vector");
  const std::size_t m = v.numel();
  Tensor<T> out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) std::fill_n(out.data() + i * n, n, v.value()[i]);
  return make_result<T>(
      std::move(out), {v}, [](const Var<T>& g) { return std::vector<Var<T>>{row_sum(g)}; },
      "broadcast_cols", true);
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  T s = 0;
  for (T v : x.value().storage()) s += v;
  Shape shape = x.shape();
  return make_result<T>(
      Tensor<T>::scalar(s), {x},
      [shape](const Var<T>& g) { return std::vector<Var<T>>{expand(g, shape)}; }, "sum_all", true);
}

template <typename T>
Var<T> expand(const Var<T>& s, const Shape& shape) {
  require(s.numel() == 1, "expand: source must have one element");
  Shape src = s.shape();
  return make_result<T>(
      Tensor<T>(shape, s.value()[0]), {s},
      [src](const Var<T>& g) { return std::vector<Var<T>>{reshape(sum_all(g), src)}; }, "expand",
      true);
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Shape src = x.shape();
  return make_result<T>(
      x.value().reshaped(std::move(shape)), {x},
      [src](const Var<T>& g) { return std::vector<Var<T>>{reshape(g, src)}; }, "reshape", true);
}

// ---------------------------------------------------------------- activations

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = map1(x.value(), [](T v) { return v > T(0) ? v : T(0); });
  return make_result<T>(
      std::move(out), {x},
      [x](const Var<T>& g) {
        Tensor<T> mask = map1(x.value(), [](T v) { return v > T(0) ? T(1) : T(0); });
        return std::vector<Var<T>>{mul(g, Var<T>::constant(std::move(mask)))};
      },
      "relu", true);
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out = map1(x.value(), [](T v) {
    return v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  });
  return make_result<T>(
      std::move(out), {x},
      [x](const Var<T>& g) {
        auto s = sigmoid(x);
        return std::vector<Var<T>>{mul(g, sub(s, mul(s, s)))};
      },
      "sigmoid", true);
}

template <typename T>
Var<T> softplus(const Var<T>& x) {
  Tensor<T> out = map1(x.value(), [](T v) {
    return v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  });
  return make_result<T>(
      std::move(out), {x},
      [x](const Var<T>& g) { return std::vector<Var<T>>{mul(g, sigmoid(x))}; }, "softplus", true);
}

template <typename T>
Var<T> softmax(const Var<T>& logits) {
  rank2("softmax", logits);
  const std::size_t n = logits.shape()[1];
  return make_result<T>(
      softmax_rows(logits.value()), {logits},
      [logits, n](const Var<T>& g) {
        auto s = softmax(logits);
        return std::vector<Var<T>>{mul(s, sub(g, broadcast_cols(row_sum(mul(g, s)), n)))};
      },
      "softmax", true);
}

template <typename T>
Var<T> log_softmax(const Var<T>& logits) {
  rank2("log_softmax", logits);
  const std::size_t n = logits.shape()[1];
  return make_result<T>(
      log_softmax_rows(logits.value()), {logits},
      [logits, n](const Var<T>& g) {
        return std::vector<Var<T>>{sub(g, mul(softmax(logits), broadcast_cols(row_sum(g), n)))};
      },
      "log_softmax", true);
}

template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const Var<T>& target) {
  rank2("softmax_cross_entropy", logits);
  same_shape("softmax_cross_entropy", logits, target);
  const std::size_t m = logits.shape()[0], n = logits.shape()[1];
  const T tol = T(1e-5);
  for (std::size_t i = 0; i < m; ++i) {
    T s = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const T t = target.value()[i * n + c];
      if (!(t >= T(0))) {
        throw ShapeError("softmax_cross_entropy: target row " + std::to_string(i) +
                         " has a negative or NaN entry");
      }
      s += t;
    }
    if (std::abs(s - T(1)) > tol) {
      throw ShapeError("softmax_cross_entropy: target row " + std::to_string(i) + " sums to " +
                       std::to_string(static_cast<double>(s)) + ", not 1");
    }
  }
  Tensor<T> lsm = log_softmax_rows(logits.value());
  T total = 0;
  for (std::size_t i = 0; i < m * n; ++i) total -= target.value()[i] * lsm[i];
  const T inv_m = T(1) / static_cast<T>(m);
  const bool need_t = target.requires_grad();
  return make_result<T>(
      Tensor<T>::scalar(total * inv_m), {logits, target},
      [logits, target, m, n, inv_m, need_t](const Var<T>& g) {
        if (!GradMode::enabled()) {
          // First-order fast path.
          const T gs = g.value()[0] * inv_m;
          Tensor<T> sm = softmax_rows(logits.value());
          Tensor<T> gz(logits.shape());
          for (std::size_t i = 0; i < m; ++i) {
            T ts = 0;
            for (std::size_t c = 0; c < n; ++c) ts += target.value()[i * n + c];
            for (std::size_t c = 0; c < n; ++c)
              gz[i * n + c] = gs * (sm[i * n + c] * ts - target.value()[i * n + c]);
          }
          Var<T> gt;
          if (need_t) {
            Tensor<T> l = log_softmax_rows(logits.value());
            for (auto& v : l.storage()) v *= -gs;
            gt = Var<T>::constant(std::move(l));
          }
          return std::vector<Var<T>>{Var<T>::constant(std::move(gz)), gt};
        }
        auto gscaled = scale(g, inv_m);
        auto gz = mul_scalar(
            sub(mul(softmax(logits), broadcast_cols(row_sum(target), n)), target), gscaled);
        Var<T> gt = need_t ? mul_scalar(log_softmax(logits), neg(gscaled)) : Var<T>{};
        return std::vector<Var<T>>{gz, gt};
      },
      "softmax_cross_entropy", true);
}

// ---------------------------------------------------------------- image ops

namespace {

template <typename T>
void im2col(const T* img, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
            T* col, std::size_t ld, std::size_t col_offset) {
  const long pad = static_cast<long>(k / 2);
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < cin; ++c) {
    const T* plane = img + c * hw;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = col + ((c * k + ky) * k + kx) * ld + col_offset;
        const long dy = static_cast<long>(ky) - pad, dx = static_cast<long>(kx) - pad;
        for (std::size_t oy = 0; oy < h; ++oy) {
          const long iy = static_cast<long>(oy) + dy;
          T* dst = row + oy * w;
          if (iy < 0 || iy >= static_cast<long>(h)) {
            std::fill_n(dst, w, T(0));
            continue;
          }
          const long x_lo = std::max<long>(0, -dx);
          const long x_hi = std::min<long>(static_cast<long>(w), static_cast<long>(w) - dx);
          std::fill_n(dst, x_lo, T(0));
          std::copy_n(plane + iy * w + x_lo + dx, x_hi - x_lo, dst + x_lo);
          std::fill(dst + x_hi, dst + w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, std::size_t ld, std::size_t col_offset, std::size_t cin, std::size_t h,
            std::size_t w, std::size_t k, T* img) {
  const long pad = static_cast<long>(k / 2);
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < cin; ++c) {
    T* plane = img + c * hw;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = col + ((c * k + ky) * k + kx) * ld + col_offset;
        const long dy = static_cast<long>(ky) - pad, dx = static_cast<long>(kx) - pad;
        for (std::size_t oy = 0; oy < h; ++oy) {
          const long iy = static_cast<long>(oy) + dy;
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          const long x_lo = std::max<long>(0, -dx);
          const long x_hi = std::min<long>(static_cast<long>(w), static_cast<long>(w) - dx);
          const T* src = row + oy * w;
          T* dst = plane + iy * w + dx;
          for (long ox = x_lo; ox < x_hi; ++ox) dst[ox] += src[ox];
        }
      }
    }
  }
}

// Images per im2col chunk; keeps the column buffer around a few MB.
std::size_t conv_chunk(std::size_t batch, std::size_t krows, std::size_t hw) {
  const std::size_t budget = std::size_t{1} << 20;  // elements
  return std::clamp<std::size_t>(budget / std::max<std::size_t>(1, krows * hw), 1, batch);
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  rank4("conv2d", x);
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  require(ws.size() == 4 && ws[2] == ws[3] && ws[2] % 2 == 1,
          "conv2d: weight must be [Cout, Cin, k, k] with odd k, got " + shape_str(ws));
  require(ws[1] == xs[1], "conv2d: input has " + std::to_string(xs[1]) +
                              " channels, weight expects " + std::to_string(ws[1]));
  require(bias.shape() == Shape{ws[0]}, "conv2d: bias shape " + shape_str(bias.shape()));
  const std::size_t batch = xs[0], cin = xs[1], h = xs[2], w = xs[3];
  const std::size_t cout = ws[0], k = ws[2], hw = h * w, krows = cin * k * k;
  const std::size_t chunk = conv_chunk(batch, krows, hw);

  Tensor<T> out(Shape{batch, cout, h, w});
  std::vector<T> col(krows * chunk * hw);
  MatR<T> prod(cout, chunk * hw);
  CMapR<T> wm(weight.value().data(), cout, krows);
  for (std::size_t b0 = 0; b0 < batch; b0 += chunk) {
    const std::size_t nb = std::min(chunk, batch - b0);
    const std::size_t ld = nb * hw;
    for (std::size_t i = 0; i < nb; ++i)
      im2col(x.value().data() + (b0 + i) * cin * hw, cin, h, w, k, col.data(), ld, i * hw);
    auto p = prod.leftCols(ld);
    p.noalias() = wm * CMapR<T>(col.data(), krows, ld);
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t co = 0; co < cout; ++co) {
        T* dst = out.data() + ((b0 + i) * cout + co) * hw;
        const T bv = bias.value()[co];
        const T* src = p.data() + co * p.outerStride() + i * hw;
        for (std::size_t q = 0; q < hw; ++q) dst[q] = src[q] + bv;
      }
  }

  const bool need_x = x.requires_grad();
  return make_result<T>(
      std::move(out), {x, weight, bias},
      [x, weight, need_x, batch, cin, h, w, cout, k, hw, krows, chunk](const Var<T>& g) {
        const T* gd = g.value().data();
        Tensor<T> gx;
        if (need_x) gx = Tensor<T>(x.shape());
        Tensor<T> gw(weight.shape());
        Tensor<T> gb(Shape{cout});
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t co = 0; co < cout; ++co) {
            const T* src = gd + (b * cout + co) * hw;
            T s = 0;
            for (std::size_t q = 0; q < hw; ++q) s += src[q];
            gb[co] += s;
          }
        std::vector<T> col(krows * chunk * hw);
        MatR<T> gmat(cout, chunk * hw);
        MatR<T> gcol(need_x ? krows : 0, need_x ? chunk * hw : 0);
        MapR<T> gwm(gw.data(), cout, krows);
        CMapR<T> wm(weight.value().data(), cout, krows);
        for (std::size_t b0 = 0; b0 < batch; b0 += chunk) {
          const std::size_t nb = std::min(chunk, batch - b0);
          const std::size_t ld = nb * hw;
          for (std::size_t i = 0; i < nb; ++i) {
            im2col(x.value().data() + (b0 + i) * cin * hw, cin, h, w, k, col.data(), ld, i * hw);
            for (std::size_t co = 0; co < cout; ++co)
              std::copy_n(gd + ((b0 + i) * cout + co) * hw, hw,
                          gmat.data() + co * gmat.outerStride() + i * hw);
          }
          auto gm = gmat.leftCols(ld);
          gwm.noalias() += gm * CMapR<T>(col.data(), krows, ld).transpose();
          if (need_x) {
            auto gc = gcol.leftCols(ld);
            gc.noalias() = wm.transpose() * gm;
            for (std::size_t i = 0; i < nb; ++i)
              col2im(gc.data(), static_cast<std::size_t>(gc.outerStride()), i * hw, cin, h, w, k,
                     gx.data() + (b0 + i) * cin * hw);
          }
        }
        return std::vector<Var<T>>{need_x ? Var<T>::constant(std::move(gx)) : Var<T>{},
                                   Var<T>::constant(std::move(gw)),
                                   Var<T>::constant(std::move(gb))};
      },
      "conv2d", false);
}

template <typename T>
Var<T> avg_pool2x2(const Var<T>& x) {
  rank4("avg_pool2x2", x);
  const auto& s = x.shape();
  require(s[2] >= 2 && s[3] >= 2, "avg_pool2x2: spatial extents must be >= 2, got " + shape_str(s));
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], oh = h / 2, ow = w / 2;
  Tensor<T> out(Shape{s[0], s[1], oh, ow});
  const T* in = x.value().data();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const T* r0 = in + p * h * w + (2 * y) * w + 2 * xx;
        out[(p * oh + y) * ow + xx] = T(0.25) * (r0[0] + r0[1] + r0[w] + r0[w + 1]);
      }
  Shape in_shape = s;
  return make_result<T>(
      std::move(out), {x},
      [in_shape, planes, h, w, oh, ow](const Var<T>& g) {
        Tensor<T> gx(in_shape);
        for (std::size_t p = 0; p < planes; ++p)
          for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx) {
              const T v = T(0.25) * g.value()[(p * oh + y) * ow + xx];
              T* r0 = gx.data() + p * h * w + (2 * y) * w + 2 * xx;
              r0[0] += v;
              r0[1] += v;
              r0[w] += v;
              r0[w + 1] += v;
            }
        return std::vector<Var<T>>{Var<T>::constant(std::move(gx))};
      },
      "avg_pool2x2", false);
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  rank4("instance_norm", x);
  const auto& s = x.shape();
  const std::size_t batch = s[0], ch = s[1], hw = s[2] * s[3];
  require(gamma.shape() == Shape{ch} && beta.shape() == Shape{ch},
          "instance_norm: affine parameters must be [" + std::to_string(ch) + "]");
  Tensor<T> out(s);
  Tensor<T> xhat(s);
  std::vector<T> rstd(batch * ch);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t p = b * ch + c;
      const T* src = x.value().data() + p * hw;
      T mean = 0;
      for (std::size_t q = 0; q < hw; ++q) mean += src[q];
      mean /= static_cast<T>(hw);
      T var = 0;
      for (std::size_t q = 0; q < hw; ++q) var += (src[q] - mean) * (src[q] - mean);
      var /= static_cast<T>(hw);
      const T r = T(1) / std::sqrt(var + eps);
      rstd[p] = r;
      const T gm = gamma.value()[c], bt = beta.value()[c];
      T* xh = xhat.data() + p * hw;
      T* o = out.data() + p * hw;
      for (std::size_t q = 0; q < hw; ++q) {
        xh[q] = (src[q] - mean) * r;
        o[q] = gm * xh[q] + bt;
      }
    }
  const bool need_x = x.requires_grad();
  return make_result<T>(
      std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), rstd = std::move(rstd), gamma, batch, ch, hw,
       need_x](const Var<T>& g) {
        Tensor<T> gx;
        if (need_x) gx = Tensor<T>(xhat.shape());
        Tensor<T> gg(Shape{ch}), gbeta(Shape{ch});
        const T n = static_cast<T>(hw);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t p = b * ch + c;
            const T* go = g.value().data() + p * hw;
            const T* xh = xhat.data() + p * hw;
            T sg = 0, sgx = 0;
            for (std::size_t q = 0; q < hw; ++q) {
              sg += go[q];
              sgx += go[q] * xh[q];
            }
            gg[c] += sgx;
            gbeta[c] += sg;
            if (need_x) {
              const T gm = gamma.value()[c];
              const T k = gm * rstd[p] / n;
              T* dst = gx.data() + p * hw;
              for (std::size_t q = 0; q < hw; ++q) dst[q] = k * (n * go[q] - sg - xh[q] * sgx);
            }
          }
        return std::vector<Var<T>>{need_x ? Var<T>::constant(std::move(gx)) : Var<T>{},
                                   Var<T>::constant(std::move(gg)),
                                   Var<T>::constant(std::move(gbeta))};
      },
      "instance_norm", false);
}

namespace {

struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

// Half-pixel-center source coordinates, clamped to the crop extent.
AxisTaps axis_taps(std::size_t offset, std::size_t extent, std::size_t out) {
  AxisTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double ratio = static_cast<double>(extent) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(extent - 1));
    const auto l = static_cast<std::size_t>(std::floor(src));
    const std::size_t h = std::min(l + 1, extent - 1);
    t.lo[o] = offset + l;
    t.hi[o] = offset + h;
    t.frac[o] = src - static_cast<double>(l);
  }
  return t;
}

template <typename T>
void resize_plane(const T* src, std::size_t w, const AxisTaps& ty, const AxisTaps& tx, T* dst) {
  const std::size_t oh = ty.lo.size(), ow = tx.lo.size();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    const T fy = static_cast<T>(ty.frac[oy]);
    const T* r0 = src + ty.lo[oy] * w;
    const T* r1 = src + ty.hi[oy] * w;
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const T fx = static_cast<T>(tx.frac[ox]);
      const T top = r0[tx.lo[ox]] + fx * (r0[tx.hi[ox]] - r0[tx.lo[ox]]);
      const T bot = r1[tx.lo[ox]] + fx * (r1[tx.hi[ox]] - r1[tx.lo[ox]]);
      dst[oy * ow + ox] = top + fy * (bot - top);
    }
  }
}

template <typename T>
void resize_plane_backward(const T* g, std::size_t w, const AxisTaps& ty, const AxisTaps& tx,
                           T* dsrc) {
  const std::size_t oh = ty.lo.size(), ow = tx.lo.size();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    const T fy = static_cast<T>(ty.frac[oy]);
    T* r0 = dsrc + ty.lo[oy] * w;
    T* r1 = dsrc + ty.hi[oy] * w;
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const T fx = static_cast<T>(tx.frac[ox]);
      const T v = g[oy * ow + ox];
      r0[tx.lo[ox]] += v * (1 - fy) * (1 - fx);
      r0[tx.hi[ox]] += v * (1 - fy) * fx;
      r1[tx.lo[ox]] += v * fy * (1 - fx);
      r1[tx.hi[ox]] += v * fy * fx;
    }
  }
}

void check_box(const CropBox& box, std::size_t h, std::size_t w, std::size_t out_h,
               std::size_t out_w) {
  if (box.w == 0 || box.h == 0 || box.x0 + box.w > w || box.y0 + box.h > h || out_h == 0 ||
      out_w == 0) {
    throw ShapeError("crop_resize: window (" + std::to_string(box.x0) + ", " +
                     std::to_string(box.y0) + ", " + std::to_string(box.w) + "x" +
                     std::to_string(box.h) + ") does not fit a " + std::to_string(h) + "x" +
                     std::to_string(w) + " image");
  }
}

}  // namespace

template <typename T>
Tensor<T> crop_resize_image(const Tensor<T>& image, const CropBox& box, std::size_t out_h,
                            std::size_t out_w) {
  if (image.rank() != 3) throw ShapeError("crop_resize_image: expected [C, H, W]");
  const std::size_t ch = image.dim(0), h = image.dim(1), w = image.dim(2);
  check_box(box, h, w, out_h, out_w);
  const auto ty = axis_taps(box.y0, box.h, out_h);
  const auto tx = axis_taps(box.x0, box.w, out_w);
  Tensor<T> out(Shape{ch, out_h, out_w});
  for (std::size_t c = 0; c < ch; ++c)
    resize_plane(image.data() + c * h * w, w, ty, tx, out.data() + c * out_h * out_w);
  return out;
}

template <typename T>
Var<T> crop_resize(const Var<T>& x, const CropBox& box, std::size_t out_h, std::size_t out_w) {
  rank4("crop_resize", x);
  const auto& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  check_box(box, h, w, out_h, out_w);
  auto ty = axis_taps(box.y0, box.h, out_h);
  auto tx = axis_taps(box.x0, box.w, out_w);
  Tensor<T> out(Shape{s[0], s[1], out_h, out_w});
  for (std::size_t p = 0; p < planes; ++p)
    resize_plane(x.value().data() + p * h * w, w, ty, tx, out.data() + p * out_h * out_w);
  Shape in_shape = s;
  return make_result<T>(
      std::move(out), {x},
      [in_shape, planes, h, w, out_h, out_w, ty = std::move(ty),
       tx = std::move(tx)](const Var<T>& g) {
        Tensor<T> gx(in_shape);
        for (std::size_t p = 0; p < planes; ++p)
          resize_plane_backward(g.value().data() + p * out_h * out_w, w, ty, tx,
                                gx.data() + p * h * w);
        return std::vector<Var<T>>{Var<T>::constant(std::move(gx))};
      },
      "crop_resize", false);
}

#define LADD_INSTANTIATE_OPS(T)                                                              \
  template Var<T> add(const Var<T>&, const Var<T>&);                                         \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                         \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                         \
  template Var<T> neg(const Var<T>&);                                                        \
  template Var<T> scale(const Var<T>&, T);                                                   \
  template Var<T> mul_scalar(const Var<T>&, const Var<T>&);                                  \
  template Var<T> sqrt(const Var<T>&);                                                       \
  template Var<T> reciprocal(const Var<T>&);                                                 \
  template Var<T> take_rows(const Var<T>&, std::size_t, std::size_t);                        \
  template Var<T> pad_rows(const Var<T>&, std::size_t, std::size_t);                         \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                      \
  template Var<T> transpose(const Var<T>&);                                                  \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                       \
  template Var<T> add_rowvec(const Var<T>&, const Var<T>&);                                  \
  template Var<T> sum_rows(const Var<T>&);                                                   \
  template Var<T> broadcast_rows(const Var<T>&, std::size_t);                                \
  template Var<T> row_sum(const Var<T>&);                                                    \
  template Var<T> broadcast_cols(const Var<T>&, std::size_t);                                \
  template Var<T> sum_all(const Var<T>&);                                                    \
  template Var<T> expand(const Var<T>&, const Shape&);                                       \
  template Var<T> reshape(const Var<T>&, Shape);                                             \
  template Var<T> relu(const Var<T>&);                                                       \
  template Var<T> sigmoid(const Var<T>&);                                                    \
  template Var<T> softplus(const Var<T>&);                                                   \
  template Var<T> softmax(const Var<T>&);                                                    \
  template Var<T> log_softmax(const Var<T>&);                                                \
  template Var<T> softmax_cross_entropy(const Var<T>&, const Var<T>&);                       \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&);                       \
  template Var<T> avg_pool2x2(const Var<T>&);                                                \
  template Var<T> instance_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);             \
  template Var<T> crop_resize(const Var<T>&, const CropBox&, std::size_t, std::size_t);      \
  template Tensor<T> crop_resize_image(const Tensor<T>&, const CropBox&, std::size_t,        \
                                       std::size_t);                                         \
  template Tensor<T> softmax_rows(const Tensor<T>&);

LADD_INSTANTIATE_OPS(float)
LADD_INSTANTIATE_OPS(double)
#undef LADD_INSTANTIATE_OPS

}  // namespace ladd
