// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deployment: training a fresh classifier on a (label-augmented) distilled
// dataset with the composite global/local loss, then evaluating it.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ladd/dataset.hpp"
#include "ladd/labeler.hpp"
#include "ladd/model.hpp"

namespace ladd {

/// Which loss terms are active. full_* use the whole image, sub_* use the N^2
/// sub-images; *_hard use the class index, *_soft use labeler outputs.
struct LossFlags {
  bool full_hard = true;
  bool full_soft = false;
  bool sub_hard = false;
  bool sub_soft = false;

  bool any() const { return full_hard || full_soft || sub_hard || sub_soft; }
  bool uses_full() const { return full_hard || full_soft; }
  bool uses_sub() const { return sub_hard || sub_soft; }
  /// e.g. "full_hard+sub_soft"
  std::string str() const;
  static LossFlags parse(const std::string& text);
  friend bool operator==(const LossFlags&, const LossFlags&) = default;
};

enum class SubReduction { sum, mean };

struct AugmentConfig {
  bool flip = true;
  std::size_t shift_px = 4;
  std::size_t cutout_px = 16;
  bool enabled = true;
};

struct DeployConfig {
  std::size_t epochs = 1000;
  float lr = 0.01f;
  float momentum = 0.9f;
  float weight_decay = 5e-4f;
  bool cosine = true;
  /// Images per optimizer step.
  std::size_t batch = 256;
  LossFlags flags;
  SubReduction reduction = SubReduction::sum;
  AugmentConfig augment;
  /// Upper bound on views per forward pass; gradients are accumulated.
  std::size_t micro_batch_views = 256;
  std::uint64_t seed = 0;

  void validate() const;
  /// Stable digest of every field except the seed.
  std::string hash() const;
};

/// The views and targets of one minibatch of images.
struct DeployBatch {
  TensorF full;   // [B, C, H, W], may be empty
  TensorF sub;    // [B * N^2, C, H, W], may be empty
  std::vector<std::uint16_t> hard;
  TensorF full_soft;  // [B, classes]
  TensorF dense;      // [B, N^2, classes]
};

struct LossTerms {
  double full_hard = 0, full_soft = 0, sub_hard = 0, sub_soft = 0, total = 0;
};

/// Composite loss averaged over the B images of `batch`. With reduction=sum
/// each image contributes CE over its full view plus the sum of CE over its
/// N^2 sub-views; mean divides the sub-view sum by N^2.
VarF deployment_loss(const ModelF& model, std::span<const VarF> params, const DeployBatch& batch,
                     const LossFlags& flags, SubReduction reduction, std::size_t views_per_image,
                     LossTerms* terms = nullptr);

/// In-place flip / shift / cutout of one [C, H, W] view.
void augment_view(float* view, std::size_t channels, std::size_t height, std::size_t width,
                  const AugmentConfig& cfg, std::uint64_t seed);

ModelF deploy_train(const LabelAugmentedDataset& d, const ArchSpec& arch, const DeployConfig& cfg,
                    const std::function<void(std::size_t epoch, double loss)>& on_epoch = {});

std::vector<std::uint64_t> trial_seeds(std::uint64_t base, std::size_t trials);

/// ConvNetD3, MLP(1024-512), SmallCNN over the given input size.
std::vector<ArchSpec> default_eval_archs(const Shape& image_shape, std::size_t classes,
                                         std::size_t convnet_width = 128);

struct ArchResult {
  std::string arch;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  double mean = 0.0, std = 0.0;
};

struct EvalReport {
  std::vector<ArchResult> per_arch;
  double overall_mean = 0.0;
  std::size_t trials = 0;
  std::string config_hash;

  /// arch,seed,accuracy
  std::string trials_csv() const;
  /// arch,trials,accuracy_mean,accuracy_std,config_hash
  std::string summary_csv() const;
};

/// Sample standard deviation (0 for a single value).
double sample_std(std::span<const double> v);

ArchResult deploy_trials(const LabelAugmentedDataset& d, const ArchSpec& arch,
                         std::span<const std::uint64_t> seeds, const DeployConfig& cfg,
                         const SourceDataset& val, std::size_t jobs = 1);

EvalReport cross_arch_eval(const LabelAugmentedDataset& d, std::span<const ArchSpec> archs,
                           std::span<const std::uint64_t> seeds, const DeployConfig& cfg,
                           const SourceDataset& val, std::size_t jobs = 1);

struct AblationRow {
  std::string name;
  LossFlags flags;
  ArchResult result;
};

/// The seven image/label combinations, in order: full+hard, full+soft,
/// full+hard+soft, sub+hard, sub+soft, sub+hard+soft, LADD (full+hard, sub+soft).
std::vector<std::pair<std::string, LossFlags>> ablation_rows();

/// Runs the rows whose indices are listed (all seven when empty).
std::vector<AblationRow> ablation_grid(const LabelAugmentedDataset& d, const ArchSpec& arch,
                                       const DeployConfig& cfg,
                                       std::span<const std::uint64_t> seeds,
                                       const SourceDataset& val,
                                       std::span<const std::size_t> only = {},
                                       std::size_t jobs = 1);
/// row,flags,trials,accuracy_mean,accuracy_std
std::string ablation_csv(std::span<const AblationRow> rows);
/// row,flags,seed,accuracy
std::string ablation_trials_csv(std::span<const AblationRow> rows);

struct RnCell {
  std::size_t n = 0;
  double r = 0.0;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double overhead_percent = 0.0;
};

std::vector<RnCell> rn_grid_sweep(const DistilledDataset& base, const LabelerCheckpoint& labeler,
                                  std::span<const std::size_t> ns, std::span<const double> rs,
                                  const ArchSpec& arch, const DeployConfig& cfg,
                                  std::span<const std::uint64_t> seeds, const SourceDataset& val,
                                  std::size_t jobs = 1);
std::string rn_csv(std::span<const RnCell> cells);

}  // namespace ladd
