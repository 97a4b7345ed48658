// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// One JSON document configuring every pipeline stage. Missing keys take the
// defaults below; unknown keys are rejected.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ladd/deploy.hpp"
#include "ladd/distiller.hpp"
#include "ladd/fixtures.hpp"
#include "ladd/labeler.hpp"
#include "ladd/subsampler.hpp"

namespace ladd {

struct DataConfig {
  /// "cifar10" or "mnist"
  std::string source = "cifar10";
  /// Empty: fall back to $LADD_DATA_ROOT.
  std::string root;
  /// Evenly strided subsets of k training / validation images (0 keeps all).
  std::size_t train_limit = 0;
  std::size_t val_limit = 0;
};

struct LabelerStageConfig {
  LabelerTrainConfig train;
  std::vector<std::size_t> snapshots = {10, 20, 30, 40, 50};
  /// Snapshot whose outputs become the dense labels.
  std::size_t use_epoch = 10;
};

struct DeployStageConfig {
  DeployConfig train;
  /// Architecture text; empty means ConvNetD3 of `width` over the data shape.
  std::string arch;
  std::size_t width = 128;
};

struct EvalStageConfig {
  std::size_t trials = 5;
  /// Architecture texts; empty means the default trio.
  std::vector<std::string> archs;
};

struct SweepStageConfig {
  std::vector<std::size_t> ns = {2, 3, 4, 5, 6};
  std::vector<double> rs = {0.5, 0.625, 0.75};
};

struct AuditStageConfig {
  /// "quadratic" or "mlp"
  std::string model = "mlp";
  std::size_t steps = 3;
  double beta = 0.1;
  double fd_step = 1e-5;
  // quadratic
  std::vector<double> xs = {0.3, -0.7, 1.1};
  double theta_start = 1.0, theta_target = -0.5;
  // mlp
  std::size_t features = 6, classes = 3, batch = 4, expert_steps = 10;
  std::vector<std::size_t> hidden = {5};
  double expert_lr = 0.1;
};

struct StorageStageConfig {
  StorageFixtureOptions fixture;
  int level = 6;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "ladd_out";
  std::size_t jobs = 1;
  DataConfig data;
  SubSamplerConfig sampler;
  LabelerStageConfig labeler;
  DistillConfig distill;
  DeployStageConfig deploy;
  EvalStageConfig eval;
  std::vector<std::size_t> ablation_rows;
  SweepStageConfig sweep;
  AuditStageConfig audit;
  StorageStageConfig storage;

  /// Checks every stage; throws ConfigError naming the offending key.
  void validate() const;
  /// Copies the global seed into each stage under its own derived stream.
  void derive_stage_seeds();
};

RunConfig parse_run_config(std::string_view json_text);
/// Pretty JSON with every key present.
std::string dump_run_config(const RunConfig& cfg);

}  // namespace ladd
