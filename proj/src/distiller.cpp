// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/distiller.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ladd/csv.hpp"
#include "ladd/ops.hpp"
#include "ladd/rng.hpp"
#include "ladd/train.hpp"

namespace ladd {

namespace {

template <typename T>
Tensor<T> class_targets(std::size_t rows, std::size_t classes, std::size_t label) {
  Tensor<T> t(Shape{rows, classes});
  for (std::size_t i = 0; i < rows; ++i) t[i * classes + label] = T(1);
  return t;
}

std::vector<std::size_t> sample_rows(const std::vector<std::size_t>& pool, std::size_t count,
                                     Rng& rng) {
  if (count >= pool.size()) return pool;
  auto perm = rng.permutation(pool.size());
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = pool[perm[i]];
  return out;
}

TensorF class_block(const TensorF& images, std::size_t c, std::size_t ipc) {
  return slice_rows(images, c * ipc, (c + 1) * ipc);
}

void write_block(TensorF& images, std::size_t c, std::size_t ipc, const TensorF& block) {
  const std::size_t per = images.numel() / images.dim(0);
  std::copy(block.data(), block.data() + block.numel(), images.data() + c * ipc * per);
}

void check_finite(double loss, std::size_t iteration, const char* algo) {
  if (!std::isfinite(loss)) {
    throw NumericalError(std::string(algo) + ": non-finite loss at iteration " +
                         std::to_string(iteration));
  }
}

}  // namespace

void DistillConfig::validate() const {
  if (ipc == 0) throw ConfigError("distill: ipc must be >= 1");
  if (!(dataset_lr > 0.0f)) throw ConfigError("distill: dataset_lr must be positive");
  if (algorithm == DistillAlgorithm::gm && inner_steps == 0) {
    throw ConfigError("distill: gm requires inner_steps >= 1");
  }
  if (real_batch == 0) throw ConfigError("distill: real_batch must be >= 1");
}

std::string DistillTrace::csv() const {
  CsvWriter w({"iteration", "class", "loss"});
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.class_loss.size(); ++c) {
      w.row({std::to_string(r.iteration), std::to_string(c), fmt_num(r.class_loss[c], 8)});
    }
  }
  return w.str();
}

DistilledDataset init_synthetic(const SourceDataset& source, std::size_t ipc, InitMode init,
                                std::uint64_t seed) {
  source.validate();
  if (ipc == 0) throw ConfigError("init_synthetic: ipc must be >= 1");
  const auto pools = source.by_class();
  const std::size_t c = source.classes;
  for (std::size_t k = 0; k < c; ++k) {
    if (pools[k].size() < ipc) {
      throw ConfigError("init_synthetic: class " + std::to_string(k) + " has " +
                        std::to_string(pools[k].size()) + " images, fewer than IPC=" +
                        std::to_string(ipc));
    }
  }
  DistilledDataset d;
  d.ipc = ipc;
  d.classes = c;
  const Shape s = source.image_shape();
  d.images = TensorF(Shape{c * ipc, s[0], s[1], s[2]});
  const std::size_t per = numel_of(s);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < ipc; ++i) d.hard_labels.push_back(static_cast<std::uint16_t>(k));
    if (init == InitMode::real_sample) {
      Rng rng(derive_seed(derive_seed(seed, "init-real"), k));
      const auto perm = rng.permutation(pools[k].size());
      std::vector<std::size_t> rows(ipc);
      for (std::size_t i = 0; i < ipc; ++i) rows[i] = pools[k][perm[i]];
      auto block = source.to_float(rows);
      std::copy(block.data(), block.data() + block.numel(), d.images.data() + k * ipc * per);
    } else {
      Rng rng(derive_seed(derive_seed(seed, "init-noise"), k));
      float* dst = d.images.data() + k * ipc * per;
      for (std::size_t q = 0; q < ipc * per; ++q) dst[q] = static_cast<float>(rng.uniform());
    }
  }
  return d;
}

DistilledDataset distill_random(const SourceDataset& source, std::size_t ipc,
                                std::uint64_t seed) {
  return init_synthetic(source, ipc, InitMode::real_sample, seed);
}

TensorF apply_dataset_update(TensorF& images, const TensorF& grad, float beta, float lo,
                             float hi) {
  if (images.shape() != grad.shape()) throw ShapeError("apply_dataset_update: shape mismatch");
  TensorF raw(images.shape());
  for (std::size_t i = 0; i < images.numel(); ++i) {
    raw[i] = images[i] - beta * grad[i];
    images[i] = std::clamp(raw[i], lo, hi);
  }
  return raw;
}

VarF dm_class_loss(const Embedder& embed, const TensorF& real, const VarF& syn) {
  TensorF real_mean;
  {
    NoGradGuard no_grad;
    auto fr = embed(VarF::constant(real));
    real_mean = scale(sum_rows(fr), 1.0f / static_cast<float>(real.dim(0))).value();
  }
  auto fs = embed(syn);
  auto syn_mean = scale(sum_rows(fs), 1.0f / static_cast<float>(syn.shape()[0]));
  auto diff = sub(VarF::constant(real_mean), syn_mean);
  return dot(diff, diff);
}

template <typename T>
Var<T> gradient_distance(std::span<const Var<T>> a, std::span<const Var<T>> b, Distance d) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("gradient_distance: set size mismatch");
  Var<T> total;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Var<T> term;
    if (d == Distance::l2) {
      auto diff = sub(a[i], b[i]);
      term = dot(diff, diff);
    } else {
      const T eps = T(1e-12);
      auto na = sqrt(add(dot(a[i], a[i]), Var<T>::constant(Tensor<T>::scalar(eps))));
      auto nb = sqrt(add(dot(b[i], b[i]), Var<T>::constant(Tensor<T>::scalar(eps))));
      auto cosv = mul(dot(a[i], b[i]), reciprocal(mul(na, nb)));
      term = sub(Var<T>::constant(Tensor<T>::scalar(T(1))), cosv);
    }
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

template <typename T>
Var<T> gm_class_loss(const Model<T>& model, std::span<const Var<T>> params, const Tensor<T>& real,
                     const Var<T>& syn, std::size_t label, Distance d) {
  if (!model.arch().differentiable_twice()) {
    throw CapabilityError("gradient matching needs a re-differentiable architecture, got " +
                          model.arch().str());
  }
  const std::size_t c = model.arch().classes;
  std::vector<Var<T>> g_real;
  {
    std::vector<Var<T>> p;
    for (const auto& v : params) p.push_back(Var<T>::leaf(v.value(), true));
    auto loss = softmax_cross_entropy(model.forward(p, Var<T>::constant(real)),
                                      Var<T>::constant(class_targets<T>(real.dim(0), c, label)));
    for (auto& g : grad(loss, p)) g_real.push_back(Var<T>::constant(g.value()));
  }
  auto loss_syn =
      softmax_cross_entropy(model.forward(params, syn),
                            Var<T>::constant(class_targets<T>(syn.shape()[0], c, label)));
  auto g_syn = grad(loss_syn, params, true);
  return gradient_distance<T>(g_real, g_syn, d);
}

DistillResult distill_dm(const SourceDataset& source, const DistillConfig& cfg) {
  cfg.validate();
  DistillResult res;
  res.data = init_synthetic(source, cfg.ipc, cfg.init, cfg.seed);
  const auto pools = source.by_class();
  const auto s = source.image_shape();
  ArchSpec arch = ArchSpec::convnet(3, s[0], s[1], source.classes, cfg.embed_width);
  arch.in_width = s[2];

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const std::uint64_t embed_seed =
        cfg.fixed_embedder ? derive_seed(cfg.seed, "embedder") : derive_seed(derive_seed(cfg.seed, "embedder"), it);
    const ModelF net = ModelF::create(arch, embed_seed);
    const auto params = net.param_vars(false);
    Embedder embed = [&](const VarF& x) { return net.features(params, x); };
    Rng rng(derive_seed(derive_seed(cfg.seed, "dm-real"), it));

    DistillTrace::Row row{it, {}};
    TensorF grads(res.data.images.shape());
    for (std::size_t c = 0; c < source.classes; ++c) {
      const auto rows = sample_rows(pools[c], cfg.real_batch, rng);
      GradModeGuard on(true);
      auto syn = VarF::leaf(class_block(res.data.images, c, cfg.ipc), true);
      auto loss = dm_class_loss(embed, source.to_float(rows), syn);
      check_finite(loss.item(), it, "dm");
      row.class_loss.push_back(loss.item());
      write_block(grads, c, cfg.ipc, grad(loss, std::vector<VarF>{syn})[0].value());
    }
    apply_dataset_update(res.data.images, grads, cfg.dataset_lr);
    res.trace.rows.push_back(std::move(row));
  }
  return res;
}

DistillResult distill_gm(const SourceDataset& source, const DistillConfig& cfg) {
  cfg.validate();
  const auto s = source.image_shape();
  const ArchSpec arch =
      ArchSpec::mlp(cfg.mlp_hidden, numel_of(s), source.classes, cfg.mlp_activation);
  DistillResult res;
  res.data = init_synthetic(source, cfg.ipc, cfg.init, cfg.seed);
  const auto pools = source.by_class();
  const std::size_t c_total = source.classes;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    ModelF net = ModelF::create(arch, derive_seed(derive_seed(cfg.seed, "gm-net"), it));
    SgdState<float> inner{cfg.inner_lr, 0.0f, 0.0f, {}};
    Rng rng(derive_seed(derive_seed(cfg.seed, "gm-real"), it));
    DistillTrace::Row row{it, std::vector<double>(c_total, 0.0)};

    for (std::size_t round = 0; round < cfg.inner_steps; ++round) {
      GradModeGuard on(true);
      const auto params = net.param_vars(true);
      TensorF grads(res.data.images.shape());
      for (std::size_t c = 0; c < c_total; ++c) {
        const auto rows = sample_rows(pools[c], cfg.real_batch, rng);
        auto syn = VarF::leaf(class_block(res.data.images, c, cfg.ipc), true);
        auto loss = gm_class_loss<float>(net, params, source.to_float(rows), syn, c, cfg.distance);
        check_finite(loss.item(), it, "gm");
        if (round == 0) row.class_loss[c] = loss.item();
        write_block(grads, c, cfg.ipc, grad(loss, std::vector<VarF>{syn})[0].value());
      }
      apply_dataset_update(res.data.images, grads, cfg.dataset_lr);
      supervised_step(net, res.data.images, one_hot(res.data.hard_labels, c_total), inner);
    }
    res.trace.rows.push_back(std::move(row));
  }
  return res;
}

DistillResult distill(const SourceDataset& source, const DistillConfig& cfg) {
  switch (cfg.algorithm) {
    case DistillAlgorithm::random: {
      cfg.validate();
      DistillResult r;
      r.data = distill_random(source, cfg.ipc, cfg.seed);
      return r;
    }
    case DistillAlgorithm::dm:
      return distill_dm(source, cfg);
    case DistillAlgorithm::gm:
      return distill_gm(source, cfg);
  }
  throw ConfigError("distill: unknown algorithm");
}

template Var<float> gradient_distance(std::span<const Var<float>>, std::span<const Var<float>>,
                                      Distance);
template Var<double> gradient_distance(std::span<const Var<double>>, std::span<const Var<double>>,
                                       Distance);
template Var<float> gm_class_loss(const Model<float>&, std::span<const Var<float>>,
                                  const Tensor<float>&, const Var<float>&, std::size_t, Distance);
template Var<double> gm_class_loss(const Model<double>&, std::span<const Var<double>>,
                                   const Tensor<double>&, const Var<double>&, std::size_t,
                                   Distance);

}  // namespace ladd
