// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ladd/dataset.hpp"
#include "ladd/model.hpp"
#include "ladd/sgd.hpp"

namespace ladd {

/// One SGD step on mean cross-entropy against probability targets; returns the loss.
float supervised_step(ModelF& model, const TensorF& inputs, const TensorF& targets,
                      SgdState<float>& opt);

/// Top-1 accuracy in percent over every row of `data`.
double evaluate_accuracy(const ModelF& model, const SourceDataset& data, std::size_t chunk = 500);

/// Softmax probabilities for every row of `data`, [M, classes].
TensorF predict_dataset(const ModelF& model, const SourceDataset& data, std::size_t chunk = 500);

/// Mean Shannon entropy (nats) of probability rows [M, classes].
double mean_entropy(const TensorF& probs);

/// Cosine decay from base to 0: base * (1 + cos(pi * step / total)) / 2.
float cosine_lr(float base, std::size_t step, std::size_t total);

}  // namespace ladd
