// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Image-level distillation baselines: random real selection, distribution
// matching with fresh random embedders, and gradient matching on MLPs.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ladd/dataset.hpp"
#include "ladd/model.hpp"

namespace ladd {

enum class DistillAlgorithm { random, dm, gm };
enum class Distance { l2, cosine };
enum class InitMode { real_sample, noise };

struct DistillConfig {
  DistillAlgorithm algorithm = DistillAlgorithm::random;
  std::size_t ipc = 1;
  std::size_t iterations = 0;
  /// Dataset learning rate (beta).
  float dataset_lr = 1.0f;
  /// gm: matching rounds per outer iteration, each followed by one SGD step of the network on D.
  std::size_t inner_steps = 1;
  float inner_lr = 0.01f;
  /// Real images sampled per class per iteration.
  std::size_t real_batch = 128;
  Distance distance = Distance::l2;
  InitMode init = InitMode::real_sample;
  /// dm embedder: ConvNetD3 of this width over the source image size.
  std::size_t embed_width = 128;
  /// gm network: MLP with these hidden widths.
  std::vector<std::size_t> mlp_hidden = {128};
  Activation mlp_activation = Activation::relu;
  /// dm: reuse one embedder for every iteration instead of a fresh one.
  bool fixed_embedder = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DistillTrace {
  struct Row {
    std::size_t iteration = 0;
    std::vector<double> class_loss;
  };
  std::vector<Row> rows;

  /// iteration,class,loss
  std::string csv() const;
};

struct DistillResult {
  DistilledDataset data;
  DistillTrace trace;
};

/// Class-major: images [c * ipc, (c + 1) * ipc) belong to class c.
DistilledDataset init_synthetic(const SourceDataset& source, std::size_t ipc, InitMode init,
                                std::uint64_t seed);
DistilledDataset distill_random(const SourceDataset& source, std::size_t ipc, std::uint64_t seed);
DistillResult distill_dm(const SourceDataset& source, const DistillConfig& cfg);
DistillResult distill_gm(const SourceDataset& source, const DistillConfig& cfg);
DistillResult distill(const SourceDataset& source, const DistillConfig& cfg);

/// The dataset update x <- x - beta * grad. Returns the unclamped result and
/// leaves `images` clamped to [lo, hi].
TensorF apply_dataset_update(TensorF& images, const TensorF& grad, float beta, float lo = 0.0f,
                             float hi = 1.0f);

using Embedder = std::function<VarF(const VarF&)>;

/// Squared l2 distance between the mean embeddings of `real` and `syn`.
VarF dm_class_loss(const Embedder& embed, const TensorF& real, const VarF& syn);

/// Layer-wise distance between two gradient sets.
template <typename T>
Var<T> gradient_distance(std::span<const Var<T>> a, std::span<const Var<T>> b, Distance d);

/// Gradient-matching loss for one class: distance between the parameter
/// gradients on real data (held constant) and on `syn` (kept on the graph).
template <typename T>
Var<T> gm_class_loss(const Model<T>& model, std::span<const Var<T>> params, const Tensor<T>& real,
                     const Var<T>& syn, std::size_t label, Distance d);

}  // namespace ladd
