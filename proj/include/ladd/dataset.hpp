// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ladd/subsampler.hpp"
#include "ladd/tensor.hpp"

namespace ladd {

enum class Split { train, val };

/// Real images as stored on disk: [M, C, H, W] bytes plus class indices.
struct SourceDataset {
  Tensor<std::uint8_t> images;
  std::vector<std::uint16_t> labels;
  std::size_t classes = 0;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  Shape image_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }
  void validate() const;

  /// Rows scaled to [0, 1].
  TensorF to_float(std::span<const std::size_t> rows) const;
  TensorF to_float(std::size_t begin, std::size_t end) const;
  /// Indices of each class, ascending.
  std::vector<std::vector<std::size_t>> by_class() const;
  /// Evenly spread deterministic subset of at most `count` rows.
  SourceDataset subset(std::size_t count) const;
};

/// C x IPC synthetic images in [0, 1] with their class indices.
struct DistilledDataset {
  TensorF images;
  std::vector<std::uint16_t> hard_labels;
  std::size_t ipc = 0;
  std::size_t classes = 0;

  std::size_t size() const { return hard_labels.size(); }
  void validate() const;
};

struct LabelerProvenance {
  std::string checkpoint_id;
  std::size_t epoch = 0;
};

/// Distilled images plus labeler outputs: dense [M, N^2, C] for sub-images
/// and full [M, C] for the whole images. Either may be empty.
struct LabelAugmentedDataset {
  DistilledDataset base;
  TensorF dense_labels;
  TensorF full_labels;
  SubSamplerConfig sampler;
  LabelerProvenance labeler;

  std::size_t size() const { return base.size(); }
  bool has_dense() const { return !dense_labels.empty(); }
  bool has_full_soft() const { return !full_labels.empty(); }
  void validate() const;
};

TensorF one_hot(std::span<const std::uint16_t> labels, std::size_t classes);

/// Throws IntegrityError unless every row of a [..., C] tensor is a
/// probability vector within `tol`.
void check_probability_rows(const TensorF& t, std::size_t classes, const std::string& what,
                            float tol = 1e-5f);

}  // namespace ladd
