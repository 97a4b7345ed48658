// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "ladd/distiller.hpp"
#include "ladd/errors.hpp"
#include "ladd/fixtures.hpp"
#include "ladd/ops.hpp"
#include "support/oracles.hpp"

using namespace ladd;

TEST_CASE("real-sample init: one image per class, drawn from that class") {
  const auto src = glyph_digits(1, 6, Split::train);
  const auto d = init_synthetic(src, 1, InitMode::real_sample, 3);
  CHECK(d.size() == 10);
  const std::size_t per = 784;
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d.hard_labels[i] == i);
    bool member = false;
    for (std::size_t r = 0; r < src.size() && !member; ++r) {
      if (src.labels[r] != i) continue;
      bool same = true;
      for (std::size_t k = 0; k < per && same; ++k) same = d.images[i * per + k] == src.images[r * per + k] / 255.0f;
      member = same;
    }
    CHECK(member);
  }
  CHECK(init_synthetic(src, 1, InitMode::real_sample, 3).images == d.images);
  CHECK_THROWS_AS(init_synthetic(src, 7, InitMode::real_sample, 3), ConfigError);
  const auto noise = init_synthetic(src, 2, InitMode::noise, 3);
  for (float v : noise.images.storage()) CHECK((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("distinct seeds give distinct random selections") {
  const auto src = glyph_digits(2, 20, Split::train);
  std::vector<TensorF> picks;
  for (std::uint64_t s = 0; s < 5; ++s) picks.push_back(distill_random(src, 2, s).images);
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = a + 1; b < 5; ++b) CHECK_FALSE(picks[a] == picks[b]);
}

TEST_CASE("zero iterations is the identity for dm and gm") {
  const auto src = glyph_digits(3, 5, Split::train);
  DistillConfig cfg;
  cfg.ipc = 2;
  cfg.seed = 4;
  cfg.iterations = 0;
  const auto init = init_synthetic(src, 2, InitMode::real_sample, 4);
  cfg.algorithm = DistillAlgorithm::dm;
  CHECK(distill(src, cfg).data.images == init.images);
  cfg.algorithm = DistillAlgorithm::gm;
  CHECK(distill(src, cfg).data.images == init.images);
}

TEST_CASE("dataset update is x - beta * g before clamping") {
  Rng rng(5);
  TensorF x(Shape{2, 1, 3, 3}), g(Shape{2, 1, 3, 3});
  for (auto& v : x.storage()) v = static_cast<float>(rng.uniform());
  for (auto& v : g.storage()) v = static_cast<float>(rng.normal());
  const TensorF before = x;
  const auto raw = apply_dataset_update(x, g, 0.7f);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(raw[i] == before[i] - 0.7f * g[i]);
    CHECK(x[i] == std::clamp(raw[i], 0.0f, 1.0f));
  }
}

TEST_CASE("DM: matched means give zero loss and zero image gradient") {
  Rng rng(6);
  TensorF real(Shape{4, 1, 4, 4});
  for (auto& v : real.storage()) v = static_cast<float>(rng.uniform());
  const auto model = ModelF::create(ArchSpec::convnet(2, 1, 4, 3, 5), 1);
  Embedder embed = [&](const VarF& x) { return model.features(model.param_vars(false), x); };
  GradModeGuard on(true);
  auto syn = VarF::leaf(real);
  auto loss = dm_class_loss(embed, real, syn);
  CHECK(loss.item() == 0.0f);
  const auto g = grad(loss, std::vector<VarF>{syn})[0].value();
  for (float v : g.storage()) CHECK(v == 0.0f);
}

TEST_CASE("DM with a linear embedder follows the analytic gradient") {
  Rng rng(7);
  const std::size_t f = 12, e = 5;
  TensorF w(Shape{e, f});
  for (auto& v : w.storage()) v = static_cast<float>(rng.normal());
  TensorF real(Shape{6, 1, 3, 4}), x(Shape{1, 1, 3, 4});
  for (auto& v : real.storage()) v = static_cast<float>(rng.uniform());
  for (auto& v : x.storage()) v = static_cast<float>(rng.uniform());
  Embedder embed = [&](const VarF& in) {
    return matmul(reshape(in, Shape{in.shape()[0], f}), transpose(VarF::constant(w)));
  };
  GradModeGuard on(true);
  auto syn = VarF::leaf(x);
  auto loss = dm_class_loss(embed, real, syn);
  const auto g = grad(loss, std::vector<VarF>{syn})[0].value();

  // L = |W (m - x)|^2, dL/dx = -2 W^T W (m - x)
  std::vector<double> m(f, 0.0), diff(f), wd(e, 0.0), expect(f, 0.0);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t k = 0; k < f; ++k) m[k] += real[r * f + k] / 6.0;
  for (std::size_t k = 0; k < f; ++k) diff[k] = m[k] - x[k];
  double l = 0;
  for (std::size_t a = 0; a < e; ++a) {
    for (std::size_t k = 0; k < f; ++k) wd[a] += w[a * f + k] * diff[k];
    l += wd[a] * wd[a];
  }
  for (std::size_t k = 0; k < f; ++k)
    for (std::size_t a = 0; a < e; ++a) expect[k] -= 2 * w[a * f + k] * wd[a];
  CHECK(loss.item() == doctest::Approx(l).epsilon(1e-5));
  double num = 0, den = 0;
  for (std::size_t k = 0; k < f; ++k) {
    num += (g[k] - expect[k]) * (g[k] - expect[k]);
    den += expect[k] * expect[k];
  }
  CHECK(std::sqrt(num / den) < 1e-5);

  // one small step moves the embedding toward the real mean
  TensorF moved = x;
  apply_dataset_update(moved, g, 1e-3f, -10.0f, 10.0f);
  NoGradGuard off;
  CHECK(dm_class_loss(embed, real, VarF::constant(moved)).item() < loss.item());
}

TEST_CASE("DM loss is non-increasing with a frozen embedder and full batches") {
  const auto src = glyph_digits(8, 6, Split::train);
  DistillConfig cfg;
  cfg.algorithm = DistillAlgorithm::dm;
  cfg.ipc = 2;
  cfg.iterations = 8;
  cfg.real_batch = 6;
  cfg.embed_width = 6;
  cfg.fixed_embedder = true;
  cfg.dataset_lr = 0.05f;
  cfg.init = InitMode::noise;
  cfg.seed = 2;
  const auto res = distill_dm(src, cfg);
  REQUIRE(res.trace.rows.size() == 8);
  for (std::size_t i = 1; i < res.trace.rows.size(); ++i)
    for (std::size_t c = 0; c < 10; ++c) CHECK(res.trace.rows[i].class_loss[c] <= res.trace.rows[i - 1].class_loss[c] * (1 + 1e-6));
  CHECK(res.data.hard_labels == init_synthetic(src, 2, InitMode::noise, 2).hard_labels);
  CHECK(res.trace.csv().starts_with("iteration,class,loss\n"));
}

TEST_CASE("GM: identical real and synthetic data give zero loss") {
  const auto model = ModelD::create(ArchSpec::mlp({6}, 8, 3, Activation::softplus), 2);
  Rng rng(3);
  const auto real = oracle::random_tensor(rng, {4, 1, 2, 4});
  GradModeGuard on(true);
  auto syn = VarD::leaf(real);
  const auto params = model.param_vars(true);
  for (auto dist : {Distance::l2, Distance::cosine}) {
    auto loss = gm_class_loss<double>(model, params, real, syn, 1, dist);
    CHECK(std::abs(loss.item()) < 1e-9);
    const auto g = grad(loss, std::vector<VarD>{syn})[0].value();
    double n = 0;
    for (double v : g.storage()) n += v * v;
    CHECK(std::sqrt(n) < 1e-6);
  }
}

TEST_CASE("GM image gradient matches finite differences in 64-bit") {
  for (auto dist : {Distance::l2, Distance::cosine}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto model = ModelD::create(ArchSpec::mlp({}, 6, 3), seed);
      Rng rng(derive_seed(seed, "gm-fd"));
      const auto real = oracle::random_tensor(rng, {5, 1, 2, 3});
      const auto x = oracle::random_tensor(rng, {1, 1, 2, 3});
      oracle::ScalarFn f = [&](const std::vector<VarD>& v) {
        GradModeGuard on(true);
        return gm_class_loss<double>(model, model.param_vars(true), real, v[0], 2, dist);
      };
      std::vector<TensorD> xs{x};
      // FD needs graph recording inside the loss, so evaluate through the engine path without grads
      std::vector<TensorD> fd(1, TensorD(x.shape()));
      for (std::size_t k = 0; k < x.numel(); ++k) {
        auto up = x, down = x;
        up[k] += 1e-5;
        down[k] -= 1e-5;
        fd[0][k] = (f({VarD::leaf(up, false)}).item() - f({VarD::leaf(down, false)}).item()) / 2e-5;
      }
      GradModeGuard on(true);
      auto leaf = VarD::leaf(x);
      auto g = grad(f({leaf}), std::vector<VarD>{leaf});
      CHECK(oracle::rel_error({g[0].value()}, fd) < 1e-3);
    }
  }
}

TEST_CASE("GM on a convolutional network is a capability error") {
  const auto src = glyph_digits(9, 3, Split::train);
  const auto model = ModelD::create(ArchSpec::convnet(3, 1, 28, 10, 2), 1);
  Rng rng(1);
  const auto real = oracle::random_tensor(rng, {2, 1, 28, 28});
  GradModeGuard on(true);
  auto syn = VarD::leaf(oracle::random_tensor(rng, {1, 1, 28, 28}));
  CHECK_THROWS_AS(gm_class_loss<double>(model, model.param_vars(true), real, syn, 0, Distance::l2), CapabilityError);
}

TEST_CASE("GM distillation keeps labels and improves its matching loss") {
  const auto src = glyph_digits(10, 8, Split::train);
  DistillConfig cfg;
  cfg.algorithm = DistillAlgorithm::gm;
  cfg.ipc = 1;
  cfg.iterations = 5;
  cfg.real_batch = 8;
  cfg.mlp_hidden = {16};
  cfg.dataset_lr = 0.1f;
  cfg.seed = 1;
  const auto res = distill_gm(src, cfg);
  CHECK(res.data.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(res.data.hard_labels[i] == i);
  CHECK(res.trace.rows.size() == 5);
  for (float v : res.data.images.storage()) CHECK((v >= 0.0f && v <= 1.0f));
}
