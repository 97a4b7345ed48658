// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "ladd/errors.hpp"
#include "ladd/subsampler.hpp"
#include "support/oracles.hpp"

using namespace ladd;

namespace {

std::size_t offset_oracle(std::size_t k, std::size_t size, std::size_t extent, std::size_t n) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(k) * (size - extent) / (n - 1) + 0.5));
}

TensorF random_image(std::uint64_t seed, std::size_t c, std::size_t h, std::size_t w) {
  Rng rng(seed);
  TensorF t(Shape{c, h, w});
  for (auto& v : t.storage()) v = static_cast<float>(rng.uniform());
  return t;
}

}  // namespace

TEST_CASE("128 px, N=5, R=0.625: 25 windows of 80x80 on a 12 px stride") {
  const auto ws = crop_windows(128, 128, {5, 0.625});
  REQUIRE(ws.size() == 25);
  const std::size_t offs[5] = {0, 12, 24, 36, 48};
  for (std::size_t j = 0; j < 25; ++j) {
    CHECK(ws[j].w == 80);
    CHECK(ws[j].h == 80);
    CHECK(ws[j].y0 == offs[j / 5]);
    CHECK(ws[j].x0 == offs[j % 5]);
  }
}

TEST_CASE("32 px, N=5, R=0.625: 20x20 windows at 0,3,6,9,12") {
  const auto ws = crop_windows(32, 32, {5, 0.625});
  for (std::size_t j = 0; j < 25; ++j) {
    CHECK(ws[j].w == 20);
    CHECK(ws[j].x0 == offset_oracle(j % 5, 32, 20, 5));
    CHECK(ws[j].y0 == offset_oracle(j / 5, 32, 20, 5));
  }
  CHECK(ws.back().x0 + ws.back().w == 32);
}

TEST_CASE("grid properties over many sizes") {
  for (std::size_t size : {7u, 28u, 31u, 32u, 33u, 64u, 100u, 128u}) {
    for (std::size_t n : {2u, 3u, 4u, 5u, 7u}) {
      for (double r : {0.3, 0.5, 0.625, 0.75, 0.9}) {
        const SubSamplerConfig cfg{n, r};
        const auto ws = crop_windows(size, size, cfg);
        const std::size_t w = ws[0].w;
        CHECK(w == static_cast<std::size_t>(std::floor(r * size + 0.5)));
        CHECK(ws.front().x0 == 0);
        CHECK(ws[n - 1].x0 == size - w);
        for (std::size_t k = 1; k < n; ++k) {
          const double exact = static_cast<double>(size - w) / (n - 1);
          const double step = static_cast<double>(ws[k].x0) - static_cast<double>(ws[k - 1].x0);
          CHECK(std::abs(step - exact) <= 1.0);
        }
        // mirror symmetry; round-half-up can break it by one pixel only at exact ties
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t a = ws[k].x0, b = ws[n - 1 - k].x0;
          const bool tie = (2 * k * (size - w)) % (2 * (n - 1)) == n - 1;
          if (tie) {
            CHECK(a + b == size - w + 1);
          } else {
            CHECK(a + b == size - w);
          }
          CHECK(ws[k * n].y0 == ws[k].x0);
        }
      }
    }
  }
}

TEST_CASE("R = 1 gives identical full windows and identity sub-images") {
  const SubSamplerConfig cfg{5, 1.0};
  for (const auto& b : crop_windows(16, 16, cfg)) {
    CHECK(b.x0 == 0);
    CHECK(b.y0 == 0);
    CHECK(b.w == 16);
  }
  const auto img = random_image(3, 3, 16, 16);
  for (std::size_t j = 0; j < 25; ++j) CHECK(subsample(img, cfg, j) == img);
}

TEST_CASE("invalid configurations") {
  CHECK_THROWS_AS(crop_windows(32, 32, {1, 0.5}), ConfigError);
  CHECK_THROWS_AS(crop_windows(32, 32, {5, 0.0}), ConfigError);
  CHECK_THROWS_AS(crop_windows(32, 32, {5, 1.5}), ConfigError);
  CHECK_THROWS_AS(crop_windows(10, 10, {5, 0.01}), ConfigError);
  const auto img = random_image(1, 1, 8, 8);
  CHECK_THROWS_AS(subsample(img, {2, 0.5}, 4), IndexError);
}

TEST_CASE("constant image stays constant") {
  TensorF img(Shape{2, 32, 32}, 0.375f);
  for (std::size_t j = 0; j < 25; ++j) {
    const auto out = subsample(img, {5, 0.625}, j);
    for (float v : out.storage()) CHECK(v == 0.375f);
  }
}

TEST_CASE("4x4 ramp, 2x2 crop at the origin resized to 4x4 matches hand bilinear") {
  TensorD img(Shape{1, 4, 4});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) img[y * 4 + x] = static_cast<double>(4 * y + x);
  const auto out = crop_resize_image(img, CropBox{0, 0, 2, 2}, 4, 4);
  // half-pixel centres map output 0..3 to source -0.25, 0.25, 0.75, 1.25, clamped to [0, 1]
  const double src[4] = {0.0, 0.25, 0.75, 1.0};
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) CHECK(out[y * 4 + x] == doctest::Approx(4 * src[y] + src[x]).epsilon(1e-15));
}

TEST_CASE("bilinear resize matches the reference sampler on random crops") {
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    const std::size_t h = 9, w = 11;
    TensorD img(Shape{1, h, w});
    for (auto& v : img.storage()) v = rng.normal();
    const CropBox box{rng.below(4), rng.below(4), 3 + rng.below(5), 2 + rng.below(5)};
    const std::size_t oh = 3 + rng.below(9), ow = 3 + rng.below(9);
    const auto out = crop_resize_image(img, box, oh, ow);
    std::vector<double> crop(box.h * box.w);
    for (std::size_t y = 0; y < box.h; ++y)
      for (std::size_t x = 0; x < box.w; ++x) crop[y * box.w + x] = img[(box.y0 + y) * w + box.x0 + x];
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const double sy = (y + 0.5) * box.h / oh - 0.5, sx = (x + 0.5) * box.w / ow - 0.5;
        CHECK(out[y * ow + x] == doctest::Approx(oracle::bilinear_at(crop.data(), box.h, box.w, sy, sx)).epsilon(1e-12));
      }
  }
}

TEST_CASE("interior crops are translation consistent") {
  const auto img = random_image(8, 1, 20, 20);
  TensorF shifted(Shape{1, 20, 20});
  const std::size_t dy = 2, dx = 3;
  for (std::size_t y = 0; y + dy < 20; ++y)
    for (std::size_t x = 0; x + dx < 20; ++x) shifted[(y + dy) * 20 + x + dx] = img[y * 20 + x];
  const auto a = crop_resize_image(img, CropBox{4, 5, 8, 8}, 20, 20);
  const auto b = crop_resize_image(shifted, CropBox{4 + dx, 5 + dy, 8, 8}, 20, 20);
  CHECK(a == b);
}

TEST_CASE("subsample_all stacks every subsample in row-major order") {
  const auto img = random_image(5, 3, 24, 24);
  const SubSamplerConfig cfg{2, 0.5};
  const auto all = subsample_all(img, cfg);
  REQUIRE(all.shape() == Shape{4, 3, 24, 24});
  for (std::size_t j = 0; j < 4; ++j) {
    const auto one = subsample(img, cfg, j);
    for (std::size_t k = 0; k < one.numel(); ++k) CHECK(all[j * one.numel() + k] == one[k]);
  }
  const auto ws = crop_windows(24, 24, cfg);
  CHECK((ws[0].x0 == 0 && ws[0].y0 == 0));
  CHECK((ws[1].x0 == 12 && ws[1].y0 == 0));
  CHECK((ws[2].x0 == 0 && ws[2].y0 == 12));
  CHECK((ws[3].x0 == 12 && ws[3].y0 == 12));
}

TEST_CASE("128 px sub-image stack has shape [25, 3, 128, 128]") {
  const auto img = random_image(6, 3, 128, 128);
  CHECK(subsample_all(img, {5, 0.625}).shape() == Shape{25, 3, 128, 128});
}

TEST_CASE("batch and differentiable paths agree with single-image subsample") {
  Rng rng(2);
  TensorF batch(Shape{3, 2, 16, 16});
  for (auto& v : batch.storage()) v = static_cast<float>(rng.uniform());
  const SubSamplerConfig cfg{3, 0.625};
  const auto views = subsample_batch(batch, cfg);
  REQUIRE(views.shape() == Shape{27, 2, 16, 16});
  const std::size_t per = 2 * 16 * 16;
  for (std::size_t b = 0; b < 3; ++b) {
    TensorF img(Shape{2, 16, 16}, std::vector<float>(batch.data() + b * per, batch.data() + (b + 1) * per));
    for (std::size_t j = 0; j < 9; ++j) {
      const auto one = subsample(img, cfg, j);
      for (std::size_t k = 0; k < per; ++k) CHECK(views[(b * 9 + j) * per + k] == one[k]);
      const auto v = subsample_var(VarF::constant(batch), cfg, j).value();
      for (std::size_t k = 0; k < per; ++k) CHECK(v[b * per + k] == one[k]);
    }
  }
}
