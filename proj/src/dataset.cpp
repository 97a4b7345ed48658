// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/dataset.hpp"

#include <cmath>

namespace ladd {

void SourceDataset::validate() const {
  if (labels.empty()) throw FormatError("source dataset is empty");
  if (images.rank() != 4 || images.dim(0) != labels.size()) {
    throw FormatError("source dataset: " + std::to_string(labels.size()) + " labels for images " +
                      shape_str(images.shape()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw FormatError("source dataset: label " + std::to_string(labels[i]) + " at row " +
                        std::to_string(i) + " is not below C=" + std::to_string(classes));
    }
  }
}

TensorF SourceDataset::to_float(std::span<const std::size_t> rows) const {
  const std::size_t per = images.numel() / images.dim(0);
  TensorF out(Shape{rows.size(), images.dim(1), images.dim(2), images.dim(3)});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::uint8_t* src = images.data() + rows[i] * per;
    float* dst = out.data() + i * per;
    for (std::size_t k = 0; k < per; ++k) dst[k] = static_cast<float>(src[k]) / 255.0f;
  }
  return out;
}

TensorF SourceDataset::to_float(std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> rows(end - begin);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = begin + i;
  return to_float(rows);
}

std::vector<std::vector<std::size_t>> SourceDataset::by_class() const {
  std::vector<std::vector<std::size_t>> out(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

SourceDataset SourceDataset::subset(std::size_t count) const {
  if (count >= size()) return *this;
  std::vector<std::size_t> rows(count);
  for (std::size_t i = 0; i < count; ++i) rows[i] = i * size() / count;
  SourceDataset out;
  out.images = gather_rows(images, rows);
  for (auto r : rows) out.labels.push_back(labels[r]);
  out.classes = classes;
  out.split = split;
  return out;
}

void DistilledDataset::validate() const {
  if (hard_labels.empty()) throw IntegrityError("distilled dataset is empty");
  if (images.rank() != 4 || images.dim(0) != hard_labels.size()) {
    throw IntegrityError("distilled dataset: " + std::to_string(hard_labels.size()) +
                         " labels for images " + shape_str(images.shape()));
  }
  if (classes * ipc != hard_labels.size()) {
    throw IntegrityError("distilled dataset: C x IPC = " + std::to_string(classes * ipc) +
                         " but holds " + std::to_string(hard_labels.size()) + " images");
  }
  std::vector<std::size_t> counts(classes, 0);
  for (auto l : hard_labels) {
    if (l >= classes) throw IntegrityError("distilled dataset: label out of range");
    ++counts[l];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] != ipc) {
      throw IntegrityError("distilled dataset: class " + std::to_string(c) + " has " +
                           std::to_string(counts[c]) + " images, expected " + std::to_string(ipc));
    }
  }
}

void LabelAugmentedDataset::validate() const {
  base.validate();
  const std::size_t m = base.size(), c = base.classes;
  if (has_dense()) {
    if (dense_labels.shape() != Shape{m, sampler.count(), c}) {
      throw IntegrityError("dense labels " + shape_str(dense_labels.shape()) + " do not match [" +
                           std::to_string(m) + ", " + std::to_string(sampler.count()) + ", " +
                           std::to_string(c) + "]");
    }
    check_probability_rows(dense_labels, c, "dense labels");
  }
  if (has_full_soft()) {
    if (full_labels.shape() != Shape{m, c}) {
      throw IntegrityError("full-image soft labels " + shape_str(full_labels.shape()) +
                           " do not match [" + std::to_string(m) + ", " + std::to_string(c) + "]");
    }
    check_probability_rows(full_labels, c, "full-image soft labels");
  }
}

TensorF one_hot(std::span<const std::uint16_t> labels, std::size_t classes) {
  TensorF out(Shape{labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) out[i * classes + labels[i]] = 1.0f;
  return out;
}

void check_probability_rows(const TensorF& t, std::size_t classes, const std::string& what,
                            float tol) {
  const std::size_t rows = t.numel() / classes;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      const float v = t[r * classes + k];
      if (!(v >= 0.0f) || !std::isfinite(v)) {
        throw IntegrityError(what + ": row " + std::to_string(r) + " has a negative or non-finite entry");
      }
      s += v;
    }
    if (std::abs(s - 1.0) > tol) {
      throw IntegrityError(what + ": row " + std::to_string(r) + " sums to " + std::to_string(s));
    }
  }
}

}  // namespace ladd
