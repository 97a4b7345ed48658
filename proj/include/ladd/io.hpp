// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset ingestion, distilled-dataset archives and storage accounting.
//
// Archive layout: a ZIP container holding
//   manifest.json      UTF-8 JSON (see ArchiveManifest)
//   images.bin         u8 [M, C, H, W], min-max quantized (value_lo, value_hi)
//   hard_labels.bin    u16 LE [M]
//   dense_labels.bin   f32 LE [M, N^2, classes]     (optional)
//   full_labels.bin    f32 LE [M, classes]          (optional)
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "ladd/dataset.hpp"

namespace ladd {

inline constexpr std::size_t kCifarRecordBytes = 3073;

struct SourceSplits {
  SourceDataset train;
  SourceDataset val;
};

/// Parses concatenated CIFAR-10 binary records.
SourceDataset parse_cifar10_records(std::string_view bytes, const std::string& origin,
                                    Split split);
/// Reads data_batch_1..5.bin and test_batch.bin from `dir`.
SourceSplits load_cifar10(const std::filesystem::path& dir);

/// IDX image (magic 0x00000803) and label (0x00000801) files.
SourceDataset parse_mnist_idx(std::string_view image_bytes, std::string_view label_bytes,
                              Split split);
/// Reads {train,t10k}-{images-idx3,labels-idx1}-ubyte from `dir`.
SourceSplits load_mnist(const std::filesystem::path& dir);

struct ArchiveManifest {
  std::size_t classes = 0, ipc = 0;
  std::size_t channels = 0, height = 0, width = 0;
  std::size_t n = 0;
  double r = 0.0;
  bool has_dense = false, has_full_soft = false;
  float value_lo = 0.0f, value_hi = 0.0f;
  std::string image_dtype = "u8", hard_label_dtype = "u16", label_dtype = "f32";
  std::string labeler_id;
  std::size_t labeler_epoch = 0;
  std::uint64_t creation_seed = 0;

  std::string to_json() const;
  static ArchiveManifest from_json(std::string_view text);
  friend bool operator==(const ArchiveManifest&, const ArchiveManifest&) = default;
};

std::string encode_archive(const LabelAugmentedDataset& d, std::uint64_t creation_seed,
                           ArchiveManifest* manifest = nullptr);
LabelAugmentedDataset decode_archive(std::string_view bytes, ArchiveManifest* manifest = nullptr);

ArchiveManifest save_archive(const std::filesystem::path& path, const LabelAugmentedDataset& d,
                             std::uint64_t creation_seed = 0);
ArchiveManifest save_archive(const std::filesystem::path& path, const DistilledDataset& d,
                             std::uint64_t creation_seed = 0);
LabelAugmentedDataset load_archive(const std::filesystem::path& path,
                                   ArchiveManifest* manifest = nullptr);

/// Maps images onto the 8-bit grid used by archives (what a save/load
/// round trip would produce).
TensorF quantize_images(const TensorF& images);

struct StorageReport {
  std::size_t raw_image_bytes = 0;
  std::size_t raw_hard_label_bytes = 0;
  std::size_t raw_label_bytes = 0;
  std::size_t compressed_image_bytes = 0;
  std::size_t compressed_hard_label_bytes = 0;
  std::size_t compressed_label_bytes = 0;
  /// compressed dense labels / compressed (images + hard labels) x 100
  double overhead_percent = 0.0;
  /// raw dense labels / raw images x 100
  double raw_ratio_percent = 0.0;
};

/// Compresses each payload separately with DEFLATE. Images are serialized in a
/// canonical order (by class, then bytes) so the figure does not depend on
/// the order images are held in.
StorageReport measure_storage(const LabelAugmentedDataset& d, int level = 6);

}  // namespace ladd
