// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "ladd/checkpoint.hpp"
#include "ladd/errors.hpp"
#include "ladd/labeler.hpp"
#include "ladd/rng.hpp"

namespace ladd {

DistilledDataset procedural_images(const StorageFixtureOptions& opt) {
  if (opt.classes == 0 || opt.ipc == 0 || opt.size == 0 || opt.channels == 0) {
    throw ConfigError("storage fixture: classes, ipc, size and channels must be positive");
  }
  DistilledDataset d;
  d.classes = opt.classes;
  d.ipc = opt.ipc;
  const std::size_t m = opt.classes * opt.ipc, s = opt.size, c = opt.channels;
  d.images = TensorF(Shape{m, c, s, s});
  Rng rng(derive_seed(opt.seed, "storage-fixture"));
  for (std::size_t i = 0; i < m; ++i) {
    d.hard_labels.push_back(static_cast<std::uint16_t>(i / opt.ipc));
    // a few random plane waves per channel
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::array<double, 4> fx{}, fy{}, ph{}, amp{};
      for (std::size_t k = 0; k < 4; ++k) {
        fx[k] = rng.uniform(-3.0, 3.0) / static_cast<double>(s);
        fy[k] = rng.uniform(-3.0, 3.0) / static_cast<double>(s);
        ph[k] = rng.uniform(0.0, 6.283185307179586);
        amp[k] = rng.uniform(10.0, 40.0);
      }
      const double base = rng.uniform(80.0, 170.0);
      float* out = d.images.data() + (i * c + ch) * s * s;
      for (std::size_t y = 0; y < s; ++y) {
        for (std::size_t x = 0; x < s; ++x) {
          double v = base;
          for (std::size_t k = 0; k < 4; ++k) {
            v += amp[k] * std::sin(6.283185307179586 * (fx[k] * x + fy[k] * y) + ph[k]);
          }
          v += opt.noise_levels * rng.normal();
          out[y * s + x] = static_cast<float>(std::clamp(std::round(v), 0.0, 255.0) / 255.0);
        }
      }
    }
  }
  d.validate();
  return d;
}

LabelAugmentedDataset storage_fixture(const StorageFixtureOptions& opt) {
  opt.sampler.validate();
  auto d = procedural_images(opt);
  LabelerCheckpoint ckpt;
  const std::size_t depth = opt.size > 64 ? 5 : 3;
  ckpt.model = ModelF::create(ArchSpec::convnet(depth, opt.channels, opt.size, opt.classes,
                                                opt.labeler_width),
                              derive_seed(opt.seed, "storage-labeler"));
  ckpt.train_seed = opt.seed;
  return augment_labels(d, ckpt, opt.sampler);
}

namespace {

//  segments: 0 top, 1 upper-right, 2 lower-right, 3 bottom, 4 lower-left, 5 upper-left, 6 middle
constexpr std::array<std::uint8_t, 10> kDigitSegments = {
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
    0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111};

struct Segment {
  double x0, y0, x1, y1;
};

constexpr std::array<Segment, 7> kSegments = {{
    {0.25, 0.15, 0.75, 0.15},
    {0.75, 0.15, 0.75, 0.50},
    {0.75, 0.50, 0.75, 0.85},
    {0.25, 0.85, 0.75, 0.85},
    {0.25, 0.50, 0.25, 0.85},
    {0.25, 0.15, 0.25, 0.50},
    {0.25, 0.50, 0.75, 0.50},
}};

double segment_distance(double px, double py, const Segment& s) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = s.x0 + t * dx - px, ey = s.y0 + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

void put_be32(std::string& out, std::uint32_t v) {
  for (int k = 3; k >= 0; --k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

}  // namespace

SourceDataset glyph_digits(std::uint64_t seed, std::size_t per_class, Split split) {
  if (per_class == 0) throw ConfigError("glyph digits: per_class must be positive");
  constexpr std::size_t kSide = 28;
  SourceDataset d;
  d.classes = 10;
  d.split = split;
  const std::size_t m = per_class * 10;
  d.images = Tensor<std::uint8_t>(Shape{m, 1, kSide, kSide});
  Rng rng(derive_seed(seed, split == Split::train ? "glyphs-train" : "glyphs-val"));
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t cls = i % 10;
    d.labels.push_back(static_cast<std::uint16_t>(cls));
    const double sc = rng.uniform(0.85, 1.1), shear = rng.uniform(-0.15, 0.15);
    const double ox = rng.uniform(-0.08, 0.08), oy = rng.uniform(-0.08, 0.08);
    const double thick = rng.uniform(0.05, 0.08);
    std::uint8_t* out = d.images.data() + i * kSide * kSide;
    for (std::size_t y = 0; y < kSide; ++y) {
      for (std::size_t x = 0; x < kSide; ++x) {
        // pixel centre mapped back to glyph coordinates
        double v = (y + 0.5) / kSide, u = (x + 0.5) / kSide;
        v = (v - 0.5 - oy) / sc + 0.5;
        u = (u - 0.5 - ox) / sc + 0.5 + shear * (v - 0.5);
        double dist = 1e9;
        for (std::size_t k = 0; k < 7; ++k) {
          if (kDigitSegments[cls] >> k & 1) dist = std::fmin(dist, segment_distance(u, v, kSegments[k]));
        }
        double ink = std::clamp(1.0 - (dist - thick) / 0.04, 0.0, 1.0);
        ink = std::clamp(ink + 0.05 * rng.normal(), 0.0, 1.0);
        out[y * kSide + x] = static_cast<std::uint8_t>(std::lround(ink * 255.0));
      }
    }
  }
  d.validate();
  return d;
}

std::string encode_idx_images(const SourceDataset& d) {
  std::string out;
  put_be32(out, 0x0803);
  put_be32(out, static_cast<std::uint32_t>(d.size()));
  put_be32(out, static_cast<std::uint32_t>(d.images.dim(2)));
  put_be32(out, static_cast<std::uint32_t>(d.images.dim(3)));
  out.append(reinterpret_cast<const char*>(d.images.data()), d.images.numel());
  return out;
}

std::string encode_idx_labels(const SourceDataset& d) {
  std::string out;
  put_be32(out, 0x0801);
  put_be32(out, static_cast<std::uint32_t>(d.size()));
  for (auto l : d.labels) out.push_back(static_cast<char>(l));
  return out;
}

void write_mnist_fixture(const std::filesystem::path& dir, std::uint64_t seed,
                         std::size_t train_per_class, std::size_t val_per_class) {
  std::filesystem::create_directories(dir);
  const auto train = glyph_digits(seed, train_per_class, Split::train);
  const auto val = glyph_digits(seed, val_per_class, Split::val);
  write_file_atomic(dir / "train-images-idx3-ubyte", encode_idx_images(train));
  write_file_atomic(dir / "train-labels-idx1-ubyte", encode_idx_labels(train));
  write_file_atomic(dir / "t10k-images-idx3-ubyte", encode_idx_images(val));
  write_file_atomic(dir / "t10k-labels-idx1-ubyte", encode_idx_labels(val));
}

}  // namespace ladd
