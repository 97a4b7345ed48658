// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "ladd/distiller.hpp"
#include "ladd/errors.hpp"
#include "ladd/fixtures.hpp"
#include "ladd/labeler.hpp"
#include "ladd/train.hpp"
#include "support/oracles.hpp"

using namespace ladd;

namespace {

LabelerTrainConfig quick_config() {
  LabelerTrainConfig cfg;
  cfg.epochs = 3;
  cfg.width = 8;
  cfg.batch = 32;
  cfg.seed = 5;
  return cfg;
}

LabelerCheckpoint zero_head_labeler(const ArchSpec& arch) {
  LabelerCheckpoint ck;
  ck.model = ModelF::create(arch, 1);
  for (auto& p : ck.model.params())
    if (p.name.starts_with("head")) p.value = TensorF(p.value.shape());
  ck.epoch = 1;
  return ck;
}

}  // namespace

TEST_CASE("labeler configuration checks") {
  const auto train = glyph_digits(1, 4, Split::train);
  auto cfg = quick_config();
  cfg.epochs = 0;
  const std::vector<std::size_t> snaps{1};
  CHECK_THROWS_AS(train_labeler(train, train, cfg, snaps), ConfigError);
  cfg = quick_config();
  const std::vector<std::size_t> bad{2, 2};
  CHECK_THROWS_AS(train_labeler(train, train, cfg, bad), ConfigError);
  const std::vector<std::size_t> late{4};
  CHECK_THROWS_AS(train_labeler(train, train, cfg, late), ConfigError);
}

TEST_CASE("labeler snapshots arrive in epoch order and learn the glyphs") {
  const auto train = glyph_digits(2, 30, Split::train);
  const auto val = glyph_digits(2, 10, Split::val);
  auto cfg = quick_config();
  const std::vector<std::size_t> snaps{1, 3};
  std::vector<std::size_t> seen;
  const auto ckpts = train_labeler(train, val, cfg, snaps, [&](std::size_t e, double) { seen.push_back(e); });
  CHECK(seen == std::vector<std::size_t>{1, 2, 3});
  REQUIRE(ckpts.size() == 2);
  CHECK(ckpts[0].epoch == 1);
  CHECK(ckpts[1].epoch == 3);
  for (const auto& c : ckpts) CHECK(c.mean_val_entropy >= 0.0);
  CHECK(ckpts[1].val_accuracy > 10.0);
  // deterministic given the seed
  const auto again = train_labeler(train, val, cfg, snaps);
  for (std::size_t i = 0; i < again.back().model.params().size(); ++i) {
    CHECK(again.back().model.params()[i].value == ckpts.back().model.params()[i].value);
  }
}

TEST_CASE("labeler divergence names the epoch") {
  const auto train = glyph_digits(3, 10, Split::train);
  auto cfg = quick_config();
  cfg.lr = 1e30f;
  const std::vector<std::size_t> snaps{3};
  try {
    train_labeler(train, train, cfg, snaps);
    FAIL("expected divergence");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("predict_soft") {
  const auto arch = ArchSpec::convnet(3, 1, 28, 10, 4);
  Rng rng(1);
  TensorF images(Shape{5, 1, 28, 28});
  for (auto& v : images.storage()) v = static_cast<float>(rng.uniform());
  SUBCASE("zero head gives uniform rows") {
    const auto p = predict_soft(zero_head_labeler(arch).model, images);
    for (float v : p.storage()) CHECK(v == doctest::Approx(0.1).epsilon(1e-6));
  }
  SUBCASE("rows are probability vectors") {
    const auto p = predict_soft(ModelF::create(arch, 3), images);
    for (std::size_t r = 0; r < 5; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 10; ++c) s += p[r * 10 + c];
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
  SUBCASE("agrees with a scalar forward and softmax") {
    const auto mlp = ModelF::create(ArchSpec::mlp({7}, 6, 4), 2);
    TensorF x(Shape{3, 6});
    for (auto& v : x.storage()) v = static_cast<float>(rng.normal());
    const auto p = predict_soft(mlp, x);
    const auto& w = mlp.params();
    std::vector<double> xd(x.storage().begin(), x.storage().end());
    auto h = oracle::dense(xd, 3, 6, w[0].value.cast<double>(), w[1].value.cast<double>());
    for (auto& v : h) v = std::max(v, 0.0);
    const auto logits = oracle::dense(h, 3, 7, w[2].value.cast<double>(), w[3].value.cast<double>());
    for (std::size_t r = 0; r < 3; ++r) {
      double z = 0;
      for (std::size_t c = 0; c < 4; ++c) z += std::exp(logits[r * 4 + c]);
      for (std::size_t c = 0; c < 4; ++c) CHECK(p[r * 4 + c] == doctest::Approx(std::exp(logits[r * 4 + c]) / z).epsilon(1e-5));
    }
  }
}

TEST_CASE("augment_labels shapes, normalization and identity crops") {
  const auto src = glyph_digits(4, 3, Split::train);
  SourceDataset two = src;
  {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < src.size(); ++i)
      if (src.labels[i] < 2) rows.push_back(i);
    two.images = Tensor<std::uint8_t>(Shape{rows.size(), 1, 28, 28});
    two.labels.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy_n(src.images.data() + rows[i] * 784, 784, two.images.data() + i * 784);
      two.labels.push_back(src.labels[rows[i]]);
    }
    two.classes = 2;
  }
  const auto d = distill_random(two, 1, 9);
  LabelerCheckpoint ck;
  ck.model = ModelF::create(ArchSpec::convnet(3, 1, 28, 2, 4), 7);
  ck.epoch = 10;
  const auto la = augment_labels(d, ck, {2, 0.625});
  CHECK(la.dense_labels.shape() == Shape{2, 4, 2});
  CHECK(la.labeler.epoch == 10);
  CHECK_NOTHROW(check_probability_rows(la.dense_labels, 2, "dense"));
  const auto again = augment_labels(d, ck, {2, 0.625});
  CHECK(again.dense_labels == la.dense_labels);

  const auto full = augment_labels(d, ck, {3, 1.0});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 1; j < 9; ++j)
      for (std::size_t c = 0; c < 2; ++c) CHECK(full.dense_labels[(i * 9 + j) * 2 + c] == doctest::Approx(full.dense_labels[i * 9 * 2 + c]).epsilon(1e-6));

  LabelerCheckpoint wrong;
  wrong.model = ModelF::create(ArchSpec::convnet(3, 3, 32, 2, 4), 7);
  CHECK_THROWS_AS(augment_labels(d, wrong, {2, 0.625}), ShapeError);
}

TEST_CASE("CIFAR-scale dense tensor is [50, 25, 10] and 50,000 bytes") {
  StorageFixtureOptions opt;
  const auto d = procedural_images(opt);
  LabelerCheckpoint ck;
  ck.model = ModelF::create(ArchSpec::convnet(5, 3, 128, 10, 4), 1);
  const auto la = augment_labels(d, ck, {5, 0.625});
  CHECK(la.dense_labels.shape() == Shape{50, 25, 10});
  CHECK(la.dense_labels.numel() * sizeof(float) == 50000);
}

TEST_CASE("entropy report") {
  const auto probe = glyph_digits(5, 4, Split::val);
  const auto arch = ArchSpec::convnet(3, 1, 28, 10, 4);
  SUBCASE("uniform-output model has entropy ln C") {
    const std::vector<LabelerCheckpoint> ck{zero_head_labeler(arch), zero_head_labeler(arch)};
    const auto rows = entropy_report(ck, probe);
    CHECK(rows[0].entropy_nats == doctest::Approx(std::log(10.0)).epsilon(1e-5));
    CHECK(rows[0].entropy_nats == rows[1].entropy_nats);
    CHECK(rows[0].accuracy == rows[1].accuracy);
    CHECK(entropy_csv(rows).starts_with("epoch,entropy_nats,accuracy\n"));
  }
  SUBCASE("a single checkpoint is rejected") {
    const std::vector<LabelerCheckpoint> one{zero_head_labeler(arch)};
    CHECK_THROWS_AS(entropy_report(one, probe), ConfigError);
  }
}
