// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "ladd/autograd.hpp"
#include "ladd/errors.hpp"
#include "ladd/model.hpp"
#include "ladd/ops.hpp"
#include "ladd/sgd.hpp"
#include "support/oracles.hpp"

using namespace ladd;
using oracle::ScalarFn;

namespace {

// Projects an op output onto a fixed random direction so every element matters.
ScalarFn projected(std::function<VarD(const std::vector<VarD>&)> op, const TensorD& dir) {
  return [op, dir](const std::vector<VarD>& in) {
    auto out = op(in);
    return dot(reshape(out, Shape{out.numel()}), VarD::constant(dir.reshaped(Shape{dir.numel()})));
  };
}

struct OpCase {
  const char* name;
  std::vector<Shape> inputs;
  Shape out;
  std::function<VarD(const std::vector<VarD>&)> op;
  bool positive = false;
};

std::vector<OpCase> op_cases() {
  return {
      {"add", {{3, 4}, {3, 4}}, {3, 4}, [](auto& v) { return add(v[0], v[1]); }},
      {"sub", {{3, 4}, {3, 4}}, {3, 4}, [](auto& v) { return sub(v[0], v[1]); }},
      {"mul", {{3, 4}, {3, 4}}, {3, 4}, [](auto& v) { return mul(v[0], v[1]); }},
      {"mul_scalar", {{3, 4}, {1}}, {3, 4}, [](auto& v) { return mul_scalar(v[0], v[1]); }},
      {"sqrt", {{5}}, {5}, [](auto& v) { return sqrt(v[0]); }, true},
      {"reciprocal", {{5}}, {5}, [](auto& v) { return reciprocal(v[0]); }, true},
      {"take_rows", {{5, 3}}, {2, 3}, [](auto& v) { return take_rows(v[0], 1, 3); }},
      {"pad_rows", {{2, 3}}, {5, 3}, [](auto& v) { return pad_rows(v[0], 1, 2); }},
      {"matmul", {{3, 4}, {4, 2}}, {3, 2}, [](auto& v) { return matmul(v[0], v[1]); }},
      {"transpose", {{3, 4}}, {4, 3}, [](auto& v) { return transpose(v[0]); }},
      {"linear", {{3, 4}, {2, 4}, {2}}, {3, 2}, [](auto& v) { return linear(v[0], v[1], v[2]); }},
      {"add_rowvec", {{3, 4}, {4}}, {3, 4}, [](auto& v) { return add_rowvec(v[0], v[1]); }},
      {"sum_rows", {{3, 4}}, {4}, [](auto& v) { return sum_rows(v[0]); }},
      {"broadcast_rows", {{4}}, {3, 4}, [](auto& v) { return broadcast_rows(v[0], 3); }},
      {"row_sum", {{3, 4}}, {3}, [](auto& v) { return row_sum(v[0]); }},
      {"broadcast_cols", {{3}}, {3, 4}, [](auto& v) { return broadcast_cols(v[0], 4); }},
      {"expand", {{1}}, {2, 3}, [](auto& v) { return expand(v[0], Shape{2, 3}); }},
      {"sigmoid", {{3, 4}}, {3, 4}, [](auto& v) { return sigmoid(v[0]); }},
      {"softplus", {{3, 4}}, {3, 4}, [](auto& v) { return softplus(v[0]); }},
      {"softmax", {{3, 4}}, {3, 4}, [](auto& v) { return softmax(v[0]); }},
      {"log_softmax", {{3, 4}}, {3, 4}, [](auto& v) { return log_softmax(v[0]); }},
      {"softmax_ce", {{3, 4}, {3, 4}}, {1}, [](auto& v) { return softmax_cross_entropy(v[0], softmax(v[1])); }},
      {"conv2d", {{2, 2, 5, 5}, {3, 2, 3, 3}, {3}}, {2, 3, 5, 5}, [](auto& v) { return conv2d(v[0], v[1], v[2]); }},
      {"avg_pool2x2", {{2, 2, 5, 4}}, {2, 2, 2, 2}, [](auto& v) { return avg_pool2x2(v[0]); }},
      {"instance_norm", {{2, 3, 4, 4}, {3}, {3}}, {2, 3, 4, 4},
       [](auto& v) { return instance_norm(v[0], v[1], v[2]); }},
      {"crop_resize", {{2, 1, 6, 6}}, {2, 1, 5, 7},
       [](auto& v) { return crop_resize(v[0], CropBox{1, 2, 4, 3}, 5, 7); }},
  };
}

}  // namespace

TEST_CASE("constant loss has zero gradients") {
  GradModeGuard on(true);
  auto x = VarD::leaf(TensorD::from({3}, {1, 2, 3}));
  auto loss = VarD::constant(TensorD::scalar(4.0));
  auto g = grad(loss, std::vector<VarD>{x});
  for (double v : g[0].value().storage()) CHECK(v == 0.0);
}

TEST_CASE("quadratic loss gradient is theta - x") {
  GradModeGuard on(true);
  auto th = VarD::leaf(TensorD::scalar(1.75));
  auto x = VarD::constant(TensorD::scalar(0.5));
  auto d = sub(th, x);
  auto loss = scale(mul(d, d), 0.5);
  CHECK(grad(loss, std::vector<VarD>{th})[0].item() == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("every op matches central differences over 20 seeds") {
  for (const auto& c : op_cases()) {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(derive_seed(seed, c.name));
      std::vector<TensorD> xs;
      for (const auto& s : c.inputs) {
        auto t = oracle::random_tensor(rng, s);
        if (c.positive)
          for (auto& v : t.storage()) v = 0.5 + std::abs(v);
        xs.push_back(std::move(t));
      }
      const auto f = projected(c.op, oracle::random_tensor(rng, c.out));
      worst = std::fmax(worst, oracle::rel_error(oracle::engine_gradient(f, xs), oracle::fd_gradient(f, xs)));
    }
    INFO(c.name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("relu gradient away from the kink") {
  Rng rng(3);
  auto x = oracle::random_tensor(rng, {4, 5});
  for (auto& v : x.storage()) v += v > 0 ? 0.1 : -0.1;
  ScalarFn f = projected([](auto& v) { return relu(v[0]); }, oracle::random_tensor(rng, {4, 5}));
  CHECK(oracle::rel_error(oracle::engine_gradient(f, {x}), oracle::fd_gradient(f, {x})) < 1e-8);
}

TEST_CASE("MLP cross-entropy gradients in parameters and inputs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto arch = ArchSpec::mlp({6, 5}, 4, 3, Activation::softplus);
    const auto model = ModelD::create(arch, seed);
    Rng rng(derive_seed(seed, "mlp-fd"));
    std::vector<TensorD> xs;
    for (const auto& p : model.params()) xs.push_back(p.value);
    xs.push_back(oracle::random_tensor(rng, {5, 4}));
    const TensorD target = softmax_rows(oracle::random_tensor(rng, {5, 3}));
    ScalarFn f = [&](const std::vector<VarD>& v) {
      std::span<const VarD> params(v.data(), v.size() - 1);
      return softmax_cross_entropy(model.forward(params, v.back()), VarD::constant(target));
    };
    CHECK(oracle::rel_error(oracle::engine_gradient(f, xs), oracle::fd_gradient(f, xs)) < 1e-4);
  }
}

TEST_CASE("ConvNet gradients through conv, norm, relu and pooling") {
  const auto arch = ArchSpec::convnet(2, 2, 8, 3, 3);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto model = ModelD::create(arch, seed);
    Rng rng(derive_seed(seed, "conv-fd"));
    std::vector<TensorD> xs;
    for (const auto& p : model.params()) xs.push_back(p.value);
    const TensorD images = oracle::random_tensor(rng, {2, 2, 8, 8});
    const TensorD target = softmax_rows(oracle::random_tensor(rng, {2, 3}));
    ScalarFn f = [&](const std::vector<VarD>& v) {
      return softmax_cross_entropy(model.forward(v, VarD::constant(images)), VarD::constant(target));
    };
    CHECK(oracle::rel_error(oracle::engine_gradient(f, xs), oracle::fd_gradient(f, xs, 1e-6)) < 1e-4);
  }
}

TEST_CASE("second order: d/dx of v . grad_theta matches FD of the gradient") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, "second-order"));
    const auto w = oracle::random_tensor(rng, {3, 4});
    const auto x = oracle::random_tensor(rng, {5, 4});
    const auto v = oracle::random_tensor(rng, {3, 4});
    const TensorD target = softmax_rows(oracle::random_tensor(rng, {5, 3}));
    const auto w2 = oracle::random_tensor(rng, {3, 3});
    const auto b = VarD::constant(TensorD(Shape{3}));
    ScalarFn f = [&](const std::vector<VarD>& in) {
      auto h = softplus(linear(in[1], in[0], b));
      auto logits = linear(h, VarD::constant(w2), b);
      return softmax_cross_entropy(logits, VarD::constant(target));
    };
    auto [engine, fd] = oracle::mixed_second_order(f, w, x, v);
    CHECK(oracle::rel_error({engine}, {fd}) < 1e-3);
  }
}

TEST_CASE("create_graph through a first-order-only op is a capability error") {
  GradModeGuard on(true);
  Rng rng(1);
  auto x = VarD::leaf(oracle::random_tensor(rng, {1, 1, 4, 4}));
  auto w = VarD::leaf(oracle::random_tensor(rng, {1, 1, 3, 3}));
  auto b = VarD::leaf(TensorD(Shape{1}));
  auto loss = sum_all(conv2d(x, w, b));
  CHECK_THROWS_AS(grad(loss, std::vector<VarD>{w}, true), CapabilityError);
  CHECK_NOTHROW(grad(loss, std::vector<VarD>{w}, false));
}

TEST_CASE("computation tape is topologically ordered") {
  GradModeGuard on(true);
  auto a = VarD::leaf(TensorD::from({2}, {1, 2}));
  auto b = VarD::leaf(TensorD::from({2}, {3, 4}));
  auto c = mul(add(a, b), a);
  auto loss = sum_all(softplus(c));
  const auto tape = ComputationTape<double>::record(loss);
  CHECK(tape.size() >= 5);
  for (std::size_t i = 0; i < tape.size(); ++i)
    for (auto in : tape.at(i).inputs) CHECK(in < i);
  CHECK(tape.differentiable_twice());
  auto x = VarD::leaf(TensorD(Shape{1, 1, 2, 2}, 1.0));
  CHECK_FALSE(ComputationTape<double>::record(sum_all(avg_pool2x2(x))).differentiable_twice());
}

TEST_CASE("sgd_step arithmetic") {
  std::vector<TensorD> p{TensorD::scalar(1.0)};
  std::vector<TensorD> g{TensorD::scalar(0.5)};
  SgdState<double> st;
  st.lr = 0.1;
  sgd_step<double>(p, g, st);
  CHECK(p[0][0] == doctest::Approx(0.95).epsilon(1e-15));
  st.lr = 0.0;
  sgd_step<double>(p, g, st);
  CHECK(p[0][0] == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("differentiable sgd_step needs re-differentiable gradients") {
  GradModeGuard on(true);
  auto th = VarD::leaf(TensorD::scalar(1.0));
  auto x = VarD::leaf(TensorD::scalar(0.25));
  auto d = sub(th, x);
  auto loss = scale(mul(d, d), 0.5);
  auto opaque = grad(loss, std::vector<VarD>{th});
  CHECK_THROWS_AS(sgd_step<double>(std::vector<VarD>{th}, opaque, 0.1), CapabilityError);
}

TEST_CASE("two-step unroll on the scalar quadratic: dtheta2/dx0 = beta (1 - beta)") {
  GradModeGuard on(true);
  const double beta = 0.3;
  auto x0 = VarD::leaf(TensorD::scalar(0.4));
  auto x1 = VarD::leaf(TensorD::scalar(-0.2));
  std::vector<VarD> th{VarD::leaf(TensorD::scalar(1.0))};
  for (const auto& x : {x0, x1}) {
    auto d = sub(th[0], x);
    auto g = grad(scale(mul(d, d), 0.5), th, true);
    th = sgd_step<double>(th, g, beta);
  }
  CHECK(th[0].item() == doctest::Approx((1 - beta) * (1 - beta) * 1.0 + beta * (1 - beta) * 0.4 + beta * -0.2));
  auto dx = grad(th[0], std::vector<VarD>{x0, x1});
  CHECK(dx[0].item() == doctest::Approx(beta * (1 - beta)).epsilon(1e-14));
  CHECK(dx[1].item() == doctest::Approx(beta).epsilon(1e-14));
}
