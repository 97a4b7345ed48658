// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Audit of the per-batch trajectory-matching gradient approximation against
// exact backpropagation through an unrolled SGD trajectory.
//
// Notation: theta_0 = theta_start, theta_i after i inner SGD steps with lr
// beta on batch X_i, g_i = grad_theta l(theta_i; X_i), G = sum_i g_i,
// loss = |theta_T - theta_target|^2 / |theta_start - theta_target|^2 and
// A = 2 beta (theta_target - theta_start) + 2 beta^2 G.
//
//   exact      full reverse sweep through the differentiable unroll
//   tesla      A . d g_i / d X_i, other steps' graphs discarded
//   corrected  A (prod_{j>i} (I - beta H_j)) d g_i / d X_i via Hessian-vector products
//   literal    as corrected with the product starting at j = i (diagnostic)
//   fd         central differences of the loss
// All per-batch gradients are divided by the loss denominator.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ladd/model.hpp"

namespace ladd {

enum class AuditModelKind { quadratic, softmax_linear, mlp };

struct UnrollSpec {
  AuditModelKind kind = AuditModelKind::quadratic;
  /// softmax_linear / mlp: the network (MLP without / with hidden layers).
  ArchSpec arch;
  std::size_t steps = 1;
  double beta = 0.1;
  std::vector<TensorD> batches;
  /// Probability targets per batch; unused for the quadratic model.
  std::vector<TensorD> targets;
  std::vector<TensorD> theta_start;
  std::vector<TensorD> theta_target;
  /// Expert steps that produced theta_target (provenance only).
  std::size_t expert_steps = 0;

  void validate() const;
};

/// Inner loss l(theta; X). Quadratic: sum((theta - x)^2) / 2.
VarD inner_loss(const UnrollSpec& spec, std::span<const VarD> theta, const VarD& x,
                const TensorD& target);

/// steps + 1 parameter snapshots. With `differentiable`, snapshots are graph
/// nodes depending on `batches` (which should be grad-requiring leaves).
std::vector<std::vector<VarD>> unroll_sgd(const UnrollSpec& spec, std::span<const VarD> batches,
                                          bool differentiable);
std::vector<std::vector<TensorD>> unroll_values(const UnrollSpec& spec);

double mtt_loss(const UnrollSpec& spec);
/// The loss as a function of the final snapshot.
VarD mtt_loss_of(const UnrollSpec& spec, std::span<const VarD> theta_final);

using BatchGrads = std::vector<TensorD>;

BatchGrads grad_exact(const UnrollSpec& spec);
BatchGrads grad_tesla(const UnrollSpec& spec);
BatchGrads grad_corrected(const UnrollSpec& spec, bool literal_indexing = false);
BatchGrads fd_oracle(const UnrollSpec& spec, double step = 1e-5);

/// Accumulated gradient G and prefactor A of the current spec.
struct Prefactor {
  std::vector<TensorD> g_sum;
  std::vector<TensorD> a;
};
Prefactor prefactor(const UnrollSpec& spec);

double grad_norm(const BatchGrads& g);
/// |a - ref| / |ref| over all batches.
double rel_error(const BatchGrads& a, const BatchGrads& ref);
/// Same for one batch.
double rel_error(const TensorD& a, const TensorD& ref);

struct AuditReport {
  static constexpr const char* kPaths[5] = {"exact", "tesla", "corrected", "literal", "fd"};
  BatchGrads exact, tesla, corrected, literal, fd;
  Prefactor pre;
  /// Symmetric |a - b| / max(|a|, |b|) over kPaths.
  double diff[5][5] = {};
  std::vector<std::string> verdicts;

  const BatchGrads& path(std::size_t i) const;
  std::string verdict_block() const;
  /// batch,path,grad_norm,rel_diff_vs_exact
  std::string csv() const;
};

AuditReport audit(const UnrollSpec& spec, double fd_step = 1e-5);

/// Scalar quadratic model, one scalar per batch.
UnrollSpec quadratic_spec(double beta, std::span<const double> xs, double theta_start,
                          double theta_target);

struct RandomSpecOptions {
  std::size_t steps = 3;
  double beta = 0.1;
  std::size_t features = 6;
  /// Empty gives a softmax-linear model.
  std::vector<std::size_t> hidden = {5};
  std::size_t classes = 3;
  std::size_t batch = 4;
  std::size_t expert_steps = 10;
  double expert_lr = 0.1;
};

/// Random batches and one-hot targets; theta_target comes from a twin model
/// trained expert_steps opaque SGD steps on separately drawn source batches.
UnrollSpec random_spec(std::uint64_t seed, const RandomSpecOptions& opt);

}  // namespace ladd
