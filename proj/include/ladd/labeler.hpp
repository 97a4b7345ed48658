// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ladd/dataset.hpp"
#include "ladd/model.hpp"

namespace ladd {

struct LabelerTrainConfig {
  std::size_t epochs = 50;
  float lr = 0.01f;
  std::size_t batch = 256;
  float momentum = 0.9f;
  float weight_decay = 0.0f;
  /// ConvNet width of the labeler.
  std::size_t width = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LabelerCheckpoint {
  std::size_t epoch = 0;
  ModelF model;
  std::uint64_t train_seed = 0;
  double mean_val_entropy = 0.0;
  double val_accuracy = 0.0;

  std::string id() const;
};

/// ConvNetD3 for sources up to 64 px, ConvNetD5 above.
ArchSpec labeler_arch(const SourceDataset& source, std::size_t width);

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Trains from scratch and snapshots at `snapshot_epochs` (ascending, within
/// [1, cfg.epochs]). Each snapshot records entropy and accuracy on `probe`.
std::vector<LabelerCheckpoint> train_labeler(const SourceDataset& train,
                                             const SourceDataset& probe,
                                             const LabelerTrainConfig& cfg,
                                             std::span<const std::size_t> snapshot_epochs,
                                             const EpochCallback& on_epoch = {});

/// Softmax rows [B, classes].
TensorF predict_soft(const ModelF& model, const TensorF& images);

/// Dense labels of every sub-image plus soft labels of the full images.
LabelAugmentedDataset augment_labels(const DistilledDataset& d, const LabelerCheckpoint& ckpt,
                                     const SubSamplerConfig& cfg);

struct EntropyRow {
  std::size_t epoch = 0;
  double entropy_nats = 0.0;
  double accuracy = 0.0;
};

std::vector<EntropyRow> entropy_report(std::span<const LabelerCheckpoint> ckpts,
                                       const SourceDataset& probe);
std::string entropy_csv(std::span<const EntropyRow> rows);

}  // namespace ladd
