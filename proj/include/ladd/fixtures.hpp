// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic datasets for tests, CI and the storage report.
#pragma once

#include <cstdint>
#include <filesystem>

#include "ladd/dataset.hpp"

namespace ladd {

struct StorageFixtureOptions {
  std::size_t classes = 10;
  std::size_t ipc = 5;
  std::size_t size = 128;
  std::size_t channels = 3;
  SubSamplerConfig sampler{};
  /// Std of per-pixel noise on top of the smooth field, in 8-bit levels.
  double noise_levels = 10.0;
  std::size_t labeler_width = 16;
  std::uint64_t seed = 0;
};

/// Distilled-looking images: a low-frequency colour field per image plus
/// pixel noise, already on the 8-bit grid.
DistilledDataset procedural_images(const StorageFixtureOptions& opt);

/// procedural_images labelled densely by an untrained ConvNet (D3 up to
/// 64 px, D5 above).
LabelAugmentedDataset storage_fixture(const StorageFixtureOptions& opt);

/// Seven-segment style digits on 28x28, jittered per sample.
SourceDataset glyph_digits(std::uint64_t seed, std::size_t per_class, Split split);

/// Writes glyph_digits as the four standard MNIST IDX files.
void write_mnist_fixture(const std::filesystem::path& dir, std::uint64_t seed,
                         std::size_t train_per_class, std::size_t val_per_class);

/// IDX byte streams (magic 0x0803 / 0x0801, big-endian dims).
std::string encode_idx_images(const SourceDataset& d);
std::string encode_idx_labels(const SourceDataset& d);

}  // namespace ladd
