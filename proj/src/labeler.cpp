// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/labeler.hpp"

#include <cmath>

#include "ladd/csv.hpp"
#include "ladd/ops.hpp"
#include "ladd/rng.hpp"
#include "ladd/train.hpp"

namespace ladd {

void LabelerTrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("labeler: epochs must be >= 1");
  if (!(lr > 0.0f)) throw ConfigError("labeler: lr must be positive");
  if (batch == 0) throw ConfigError("labeler: batch must be >= 1");
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw ConfigError("labeler: momentum must lie in [0, 1)");
  if (width == 0) throw ConfigError("labeler: width must be >= 1");
}

std::string LabelerCheckpoint::id() const {
  return model.arch().str() + "@seed" + std::to_string(train_seed) + "/epoch" + std::to_string(epoch);
}

ArchSpec labeler_arch(const SourceDataset& source, std::size_t width) {
  const auto s = source.image_shape();
  const std::size_t depth = s[1] > 64 ? 5 : 3;
  ArchSpec a = ArchSpec::convnet(depth, s[0], s[1], source.classes, width);
  a.in_width = s[2];
  return a;
}

std::vector<LabelerCheckpoint> train_labeler(const SourceDataset& train,
                                             const SourceDataset& probe,
                                             const LabelerTrainConfig& cfg,
                                             std::span<const std::size_t> snapshot_epochs,
                                             const EpochCallback& on_epoch) {
  cfg.validate();
  train.validate();
  if (snapshot_epochs.empty()) throw ConfigError("labeler: no snapshot epochs requested");
  for (std::size_t i = 0; i < snapshot_epochs.size(); ++i) {
    const std::size_t e = snapshot_epochs[i];
    if (e < 1 || e > cfg.epochs || (i > 0 && e <= snapshot_epochs[i - 1])) {
      throw ConfigError("labeler: snapshot epochs must be strictly increasing within [1, " +
                        std::to_string(cfg.epochs) + "]");
    }
  }

  ModelF model = ModelF::create(labeler_arch(train, cfg.width), derive_seed(cfg.seed, "init"));
  SgdState<float> opt{cfg.lr, cfg.momentum, cfg.weight_decay, {}};
  const std::size_t m = train.size(), c = train.classes;
  std::vector<LabelerCheckpoint> out;
  std::size_t next = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed(derive_seed(cfg.seed, "order"), epoch));
    const auto order = rng.permutation(m);
    double loss_sum = 0;
    std::size_t steps = 0;
    for (std::size_t b0 = 0; b0 < m; b0 += cfg.batch) {
      const std::size_t b1 = std::min(m, b0 + cfg.batch);
      std::span<const std::size_t> rows(order.data() + b0, b1 - b0);
      std::vector<std::uint16_t> labels;
      for (auto r : rows) labels.push_back(train.labels[r]);
      const float loss = supervised_step(model, train.to_float(rows), one_hot(labels, c), opt);
      if (!std::isfinite(loss)) {
        throw NumericalError("labeler diverged: non-finite loss in epoch " + std::to_string(epoch));
      }
      loss_sum += loss;
      ++steps;
    }
    if (on_epoch) on_epoch(epoch, loss_sum / static_cast<double>(steps));
    if (next < snapshot_epochs.size() && snapshot_epochs[next] == epoch) {
      LabelerCheckpoint ck;
      ck.epoch = epoch;
      ck.model = model;
      ck.train_seed = cfg.seed;
      const auto probs = predict_dataset(model, probe);
      ck.mean_val_entropy = mean_entropy(probs);
      ck.val_accuracy = evaluate_accuracy(model, probe);
      out.push_back(std::move(ck));
      ++next;
    }
  }
  return out;
}

TensorF predict_soft(const ModelF& model, const TensorF& images) {
  return softmax_rows(model.logits(images, 256));
}

LabelAugmentedDataset augment_labels(const DistilledDataset& d, const LabelerCheckpoint& ckpt,
                                     const SubSamplerConfig& cfg) {
  d.validate();
  cfg.validate();
  const Shape want = ckpt.model.arch().input_shape();
  if (Shape(d.images.shape().begin() + 1, d.images.shape().end()) != want ||
      ckpt.model.arch().classes != d.classes) {
    throw ShapeError("augment_labels: labeler " + ckpt.model.arch().str() +
                     " does not match dataset images " + shape_str(d.images.shape()) + " with " +
                     std::to_string(d.classes) + " classes");
  }
  const std::size_t m = d.size(), k = cfg.count(), c = d.classes;
  LabelAugmentedDataset out;
  out.base = d;
  out.sampler = cfg;
  out.labeler = {ckpt.id(), ckpt.epoch};
  out.dense_labels = TensorF(Shape{m, k, c});
  out.full_labels = predict_soft(ckpt.model, d.images);

  const std::size_t chunk = std::max<std::size_t>(1, 256 / k);
  for (std::size_t b0 = 0; b0 < m; b0 += chunk) {
    const std::size_t b1 = std::min(m, b0 + chunk);
    auto views = subsample_batch(slice_rows(d.images, b0, b1), cfg);
    auto probs = predict_soft(ckpt.model, views);
    std::copy(probs.data(), probs.data() + probs.numel(), out.dense_labels.data() + b0 * k * c);
  }
  out.validate();
  return out;
}

std::vector<EntropyRow> entropy_report(std::span<const LabelerCheckpoint> ckpts,
                                       const SourceDataset& probe) {
  if (ckpts.size() < 2) throw ConfigError("entropy_report needs at least 2 checkpoints");
  std::vector<EntropyRow> rows;
  for (const auto& ck : ckpts) {
    rows.push_back({ck.epoch, mean_entropy(predict_dataset(ck.model, probe)),
                    evaluate_accuracy(ck.model, probe)});
  }
  return rows;
}

std::string entropy_csv(std::span<const EntropyRow> rows) {
  CsvWriter w({"epoch", "entropy_nats", "accuracy"});
  for (const auto& r : rows) {
    w.row({std::to_string(r.epoch), fmt_num(r.entropy_nats), fmt_num(r.accuracy, 2)});
  }
  return w.str();
}

}  // namespace ladd
