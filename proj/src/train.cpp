// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/train.hpp"

#include <cmath>
#include <numbers>

#include "ladd/ops.hpp"

namespace ladd {

float supervised_step(ModelF& model, const TensorF& inputs, const TensorF& targets,
                      SgdState<float>& opt) {
  GradModeGuard on(true);
  auto params = model.param_vars(true);
  auto loss = softmax_cross_entropy(model.forward(params, VarF::constant(inputs)),
                                    VarF::constant(targets));
  const float value = loss.item();
  if (!std::isfinite(value)) return value;
  auto grads = grad(loss, params);
  std::vector<TensorF> g;
  g.reserve(grads.size());
  for (auto& v : grads) g.push_back(v.value());
  std::vector<TensorF> p;
  p.reserve(params.size());
  for (auto& v : model.params()) p.push_back(std::move(v.value));
  sgd_step<float>(p, g, opt);
  for (std::size_t i = 0; i < p.size(); ++i) model.params()[i].value = std::move(p[i]);
  return value;
}

TensorF predict_dataset(const ModelF& model, const SourceDataset& data, std::size_t chunk) {
  const std::size_t m = data.size(), c = model.arch().classes;
  TensorF out(Shape{m, c});
  for (std::size_t b0 = 0; b0 < m; b0 += chunk) {
    const std::size_t b1 = std::min(m, b0 + chunk);
    auto probs = softmax_rows(model.logits(data.to_float(b0, b1), chunk));
    std::copy(probs.data(), probs.data() + probs.numel(), out.data() + b0 * c);
  }
  return out;
}

double evaluate_accuracy(const ModelF& model, const SourceDataset& data, std::size_t chunk) {
  const std::size_t m = data.size(), c = model.arch().classes;
  std::size_t correct = 0;
  for (std::size_t b0 = 0; b0 < m; b0 += chunk) {
    const std::size_t b1 = std::min(m, b0 + chunk);
    auto logits = model.logits(data.to_float(b0, b1), chunk);
    for (std::size_t i = b0; i < b1; ++i) {
      const float* row = logits.data() + (i - b0) * c;
      const auto pred = static_cast<std::size_t>(std::max_element(row, row + c) - row);
      correct += pred == data.labels[i];
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(m);
}

double mean_entropy(const TensorF& probs) {
  const std::size_t m = probs.dim(0), c = probs.dim(1);
  double total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double h = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const double p = probs[i * c + k];
      if (p > 0) h -= p * std::log(p);
    }
    total += h;
  }
  return total / static_cast<double>(m);
}

float cosine_lr(float base, std::size_t step, std::size_t total) {
  if (total == 0) return base;
  const double t = static_cast<double>(step) / static_cast<double>(total);
  return static_cast<float>(base * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

}  // namespace ladd
