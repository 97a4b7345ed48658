// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ladd/autograd.hpp"

namespace ladd {

enum class Activation { relu, softplus };

/// Architecture descriptor. Textual form (round-trips through parse/str):
///   ConvNetD3(w=128,norm=instance,in=3x32x32,c=10)
///   MLP(1024-512,act=relu,in=3x32x32,c=10)       hidden widths may be empty: MLP(,act=...)
///   SmallCNN(in=3x32x32,c=10)
struct ArchSpec {
  enum class Kind { convnet, mlp, smallcnn };

  Kind kind = Kind::convnet;
  std::size_t in_channels = 3, in_height = 32, in_width = 32;
  std::size_t classes = 10;
  // ConvNetD{depth}
  std::size_t depth = 3;
  std::size_t net_width = 128;
  bool instance_norm = true;
  // MLP
  std::vector<std::size_t> hidden;
  Activation activation = Activation::relu;

  static ArchSpec convnet(std::size_t depth, std::size_t channels, std::size_t hw,
                          std::size_t classes, std::size_t width = 128);
  static ArchSpec mlp(std::vector<std::size_t> hidden, std::size_t in_features,
                      std::size_t classes, Activation act = Activation::relu);
  static ArchSpec smallcnn(std::size_t channels, std::size_t hw, std::size_t classes);

  static ArchSpec parse(std::string_view text);
  std::string str() const;

  Shape input_shape() const { return {in_channels, in_height, in_width}; }
  std::size_t input_features() const { return in_channels * in_height * in_width; }
  /// Whether every op of the forward pass is in the re-differentiable subset.
  bool differentiable_twice() const { return kind == Kind::mlp; }

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
};

/// A classifier: architecture plus a named parameter set.
///
/// forward() is functional in the parameters so that callers can pass graph
/// nodes (for unrolled training) or plain leaves.
template <typename T>
class Model {
 public:
  Model() = default;
  Model(ArchSpec arch, std::vector<Param<T>> params, std::uint64_t init_seed = 0);

  /// Fresh parameters; identical (arch, seed) gives bitwise-identical params.
  static Model create(const ArchSpec& arch, std::uint64_t init_seed);

  const ArchSpec& arch() const { return arch_; }
  std::uint64_t init_seed() const { return init_seed_; }
  const std::vector<Param<T>>& params() const { return params_; }
  std::vector<Param<T>>& params() { return params_; }
  std::size_t param_count() const;

  /// Parameters as graph leaves.
  std::vector<Var<T>> param_vars(bool requires_grad = true) const;
  void set_params(std::span<const Var<T>> values);
  void set_params(std::span<const Tensor<T>> values);

  /// Logits [B, classes]. Accepts [B, C, H, W]; MLPs also accept [B, features].
  Var<T> forward(std::span<const Var<T>> params, const Var<T>& batch) const;
  Var<T> forward(const Var<T>& batch) const;
  /// Penultimate representation [B, D] (input of the final linear layer).
  Var<T> features(std::span<const Var<T>> params, const Var<T>& batch) const;

  /// Inference without graph recording, evaluated in chunks.
  Tensor<T> logits(const Tensor<T>& batch, std::size_t chunk = 512) const;

  template <typename U>
  Model<U> cast() const;

 private:
  void check_input(const Var<T>& batch) const;
  Var<T> trunk(std::span<const Var<T>> params, const Var<T>& batch) const;

  ArchSpec arch_;
  std::vector<Param<T>> params_;
  std::uint64_t init_seed_ = 0;
};

using ModelF = Model<float>;
using ModelD = Model<double>;

}  // namespace ladd
