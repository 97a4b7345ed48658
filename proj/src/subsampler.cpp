// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/subsampler.hpp"

#include <cmath>
#include <string>

namespace ladd {

namespace {

std::size_t window_extent(double r, std::size_t size) {
  return static_cast<std::size_t>(std::floor(r * static_cast<double>(size) + 0.5));
}

// round-half-up of k * span / (n - 1) in exact integer arithmetic
std::size_t grid_offset(std::size_t k, std::size_t span, std::size_t n) {
  const std::size_t den = 2 * (n - 1);
  return (2 * k * span + (n - 1)) / den;
}

}  // namespace

void SubSamplerConfig::validate() const {
  if (n < 2) throw ConfigError("sub-sampler needs N >= 2, got N=" + std::to_string(n));
  if (!(r > 0.0 && r <= 1.0)) {
    throw ConfigError("sub-sampler coverage R must lie in (0, 1], got " + std::to_string(r));
  }
}

std::vector<CropWindow> crop_windows(std::size_t height, std::size_t width,
                                     const SubSamplerConfig& cfg) {
  cfg.validate();
  const std::size_t w = window_extent(cfg.r, width), h = window_extent(cfg.r, height);
  if (w < 1 || h < 1) {
    throw ConfigError("sub-sampler window rounds to zero pixels for a " + std::to_string(height) +
                      "x" + std::to_string(width) + " image at R=" + std::to_string(cfg.r));
  }
  if (w > width || h > height) {
    throw ConfigError("sub-sampler window " + std::to_string(h) + "x" + std::to_string(w) +
                      " exceeds the image");
  }
  std::vector<CropWindow> out;
  out.reserve(cfg.count());
  for (std::size_t row = 0; row < cfg.n; ++row) {
    for (std::size_t col = 0; col < cfg.n; ++col) {
      out.push_back({grid_offset(col, width - w, cfg.n), grid_offset(row, height - h, cfg.n), w,
                     h});
    }
  }
  return out;
}

template <typename T>
Tensor<T> subsample(const Tensor<T>& image, const SubSamplerConfig& cfg, std::size_t j) {
  if (image.rank() != 3) throw ShapeError("subsample: expected [C, H, W], got " + shape_str(image.shape()));
  if (j >= cfg.count()) {
    throw IndexError("subsample: index " + std::to_string(j) + " outside [0, " +
                            std::to_string(cfg.count()) + ")");
  }
  const auto wins = crop_windows(image.dim(1), image.dim(2), cfg);
  return crop_resize_image(image, wins[j], image.dim(1), image.dim(2));
}

template <typename T>
Tensor<T> subsample_all(const Tensor<T>& image, const SubSamplerConfig& cfg) {
  if (image.rank() != 3) throw ShapeError("subsample_all: expected [C, H, W], got " + shape_str(image.shape()));
  const auto wins = crop_windows(image.dim(1), image.dim(2), cfg);
  const std::size_t per = image.numel();
  Tensor<T> out(Shape{wins.size(), image.dim(0), image.dim(1), image.dim(2)});
  for (std::size_t j = 0; j < wins.size(); ++j) {
    auto v = crop_resize_image(image, wins[j], image.dim(1), image.dim(2));
    std::copy(v.data(), v.data() + per, out.data() + j * per);
  }
  return out;
}

template <typename T>
Tensor<T> subsample_batch(const Tensor<T>& batch, const SubSamplerConfig& cfg) {
  if (batch.rank() != 4) throw ShapeError("subsample_batch: expected [B, C, H, W]");
  const std::size_t b = batch.dim(0), k = cfg.count();
  const std::size_t per = batch.numel() / b;
  Tensor<T> out(Shape{b * k, batch.dim(1), batch.dim(2), batch.dim(3)});
  for (std::size_t i = 0; i < b; ++i) {
    Tensor<T> img(Shape{batch.dim(1), batch.dim(2), batch.dim(3)},
                  std::vector<T>(batch.data() + i * per, batch.data() + (i + 1) * per));
    auto views = subsample_all(img, cfg);
    std::copy(views.data(), views.data() + views.numel(), out.data() + i * k * per);
  }
  return out;
}

template <typename T>
Var<T> subsample_var(const Var<T>& batch, const SubSamplerConfig& cfg, std::size_t j) {
  if (batch.value().rank() != 4) throw ShapeError("subsample_var: expected [B, C, H, W]");
  if (j >= cfg.count()) {
    throw IndexError("subsample_var: index " + std::to_string(j) + " outside [0, " +
                            std::to_string(cfg.count()) + ")");
  }
  const auto& s = batch.shape();
  const auto wins = crop_windows(s[2], s[3], cfg);
  return crop_resize(batch, wins[j], s[2], s[3]);
}

#define LADD_INSTANTIATE_SUBSAMPLER(T)                                                  \
  template Tensor<T> subsample(const Tensor<T>&, const SubSamplerConfig&, std::size_t); \
  template Tensor<T> subsample_all(const Tensor<T>&, const SubSamplerConfig&);          \
  template Tensor<T> subsample_batch(const Tensor<T>&, const SubSamplerConfig&);        \
  template Var<T> subsample_var(const Var<T>&, const SubSamplerConfig&, std::size_t);

LADD_INSTANTIATE_SUBSAMPLER(float)
LADD_INSTANTIATE_SUBSAMPLER(double)
#undef LADD_INSTANTIATE_SUBSAMPLER

}  // namespace ladd
