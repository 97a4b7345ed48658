// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/deploy.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "ladd/csv.hpp"
#include "ladd/io.hpp"
#include "ladd/ops.hpp"
#include "ladd/parallel.hpp"
#include "ladd/rng.hpp"
#include "ladd/train.hpp"

namespace ladd {

namespace {

TensorF concat_rows(const TensorF& a, const TensorF& b) {
  Shape s = a.shape();
  s[0] += b.dim(0);
  TensorF out(s);
  std::copy(a.data(), a.data() + a.numel(), out.data());
  std::copy(b.data(), b.data() + b.numel(), out.data() + a.numel());
  return out;
}

TensorF repeat_rows(const TensorF& t, std::size_t times) {
  const std::size_t m = t.dim(0), c = t.numel() / m;
  TensorF out(Shape{m * times, c});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < times; ++k)
      std::copy(t.data() + i * c, t.data() + (i + 1) * c, out.data() + (i * times + k) * c);
  return out;
}

std::uint64_t view_seed(std::uint64_t base, std::size_t epoch, std::size_t image, std::size_t view) {
  return derive_seed(derive_seed(derive_seed(base, epoch), image), view);
}

}  // namespace

std::string LossFlags::str() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += name;
  };
  add(full_hard, "full_hard");
  add(full_soft, "full_soft");
  add(sub_hard, "sub_hard");
  add(sub_soft, "sub_soft");
  return s.empty() ? "none" : s;
}

LossFlags LossFlags::parse(const std::string& text) {
  LossFlags f{false, false, false, false};
  if (text == "none" || text.empty()) return f;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, '+')) {
    if (item == "full_hard") f.full_hard = true;
    else if (item == "full_soft") f.full_soft = true;
    else if (item == "sub_hard") f.sub_hard = true;
    else if (item == "sub_soft") f.sub_soft = true;
    else throw ConfigError("unknown loss flag '" + item + "'");
  }
  return f;
}

void DeployConfig::validate() const {
  if (!flags.any()) throw ConfigError("deploy: at least one loss flag must be set");
  if (epochs == 0) throw ConfigError("deploy: epochs must be >= 1");
  if (!(lr > 0.0f)) throw ConfigError("deploy: lr must be positive");
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw ConfigError("deploy: momentum must lie in [0, 1)");
  if (batch == 0 || micro_batch_views == 0) throw ConfigError("deploy: batch sizes must be >= 1");
}

std::string DeployConfig::hash() const {
  std::ostringstream os;
  os << "epochs=" << epochs << ";lr=" << lr << ";momentum=" << momentum << ";wd=" << weight_decay
     << ";cosine=" << cosine << ";batch=" << batch << ";flags=" << flags.str()
     << ";reduction=" << (reduction == SubReduction::sum ? "sum" : "mean")
     << ";aug=" << augment.enabled << "/" << augment.flip << "/" << augment.shift_px << "/"
     << augment.cutout_px;
  std::uint64_t h = derive_seed(0, os.str());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

VarF deployment_loss(const ModelF& model, std::span<const VarF> params, const DeployBatch& batch,
                     const LossFlags& flags, SubReduction reduction, std::size_t views_per_image,
                     LossTerms* terms) {
  if (!flags.any()) throw ConfigError("deployment_loss: no loss flag set");
  const std::size_t b = batch.hard.size(), c = model.arch().classes, k = views_per_image;
  if (flags.uses_full() && (batch.full.empty() || batch.full.dim(0) != b)) {
    throw ShapeError("deployment_loss: full views missing or mis-sized");
  }
  if (flags.uses_sub() && (batch.sub.empty() || batch.sub.dim(0) != b * k)) {
    throw ShapeError("deployment_loss: sub views missing or mis-sized");
  }
  if (flags.full_soft && batch.full_soft.shape() != Shape{b, c}) {
    throw ConfigError("deployment_loss: full_soft needs full-image soft labels");
  }
  if (flags.sub_soft && batch.dense.shape() != Shape{b, k, c}) {
    throw ConfigError("deployment_loss: sub_soft needs dense labels [" + std::to_string(b) + ", " +
                      std::to_string(k) + ", " + std::to_string(c) + "]");
  }

  VarF full_logits, sub_logits;
  if (flags.uses_full() && flags.uses_sub()) {
    auto logits = model.forward(params, VarF::constant(concat_rows(batch.full, batch.sub)));
    full_logits = take_rows(logits, 0, b);
    sub_logits = take_rows(logits, b, b + b * k);
  } else if (flags.uses_full()) {
    full_logits = model.forward(params, VarF::constant(batch.full));
  } else {
    sub_logits = model.forward(params, VarF::constant(batch.sub));
  }

  const float sub_factor = reduction == SubReduction::sum ? static_cast<float>(k) : 1.0f;
  const TensorF hard = one_hot(batch.hard, c);
  LossTerms t;
  VarF total;
  auto accumulate = [&](const VarF& term, double& slot) {
    slot = term.item();
    total = total.defined() ? add(total, term) : term;
  };
  if (flags.full_hard) {
    accumulate(softmax_cross_entropy(full_logits, VarF::constant(hard)), t.full_hard);
  }
  if (flags.full_soft) {
    accumulate(softmax_cross_entropy(full_logits, VarF::constant(batch.full_soft)), t.full_soft);
  }
  if (flags.sub_hard) {
    auto ce = softmax_cross_entropy(sub_logits, VarF::constant(repeat_rows(hard, k)));
    accumulate(scale(ce, sub_factor), t.sub_hard);
  }
  if (flags.sub_soft) {
    auto ce = softmax_cross_entropy(sub_logits, VarF::constant(batch.dense.reshaped({b * k, c})));
    accumulate(scale(ce, sub_factor), t.sub_soft);
  }
  t.total = total.item();
  if (terms) *terms = t;
  return total;
}

void augment_view(float* view, std::size_t channels, std::size_t height, std::size_t width,
                  const AugmentConfig& cfg, std::uint64_t seed) {
  if (!cfg.enabled) return;
  Rng rng(seed);
  const std::size_t plane = height * width;
  if (cfg.flip && rng.below(2) == 1) {
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t y = 0; y < height; ++y) {
        float* row = view + c * plane + y * width;
        std::reverse(row, row + width);
      }
  }
  if (cfg.shift_px > 0) {
    const long span = static_cast<long>(cfg.shift_px);
    const long dx = static_cast<long>(rng.below(2 * cfg.shift_px + 1)) - span;
    const long dy = static_cast<long>(rng.below(2 * cfg.shift_px + 1)) - span;
    if (dx != 0 || dy != 0) {
      std::vector<float> tmp(view, view + channels * plane);
      const long h = static_cast<long>(height), w = static_cast<long>(width);
      for (std::size_t c = 0; c < channels; ++c)
        for (long y = 0; y < h; ++y)
          for (long x = 0; x < w; ++x) {
            const long sy = y - dy, sx = x - dx;
            view[c * plane + y * w + x] =
                (sy >= 0 && sy < h && sx >= 0 && sx < w) ? tmp[c * plane + sy * w + sx] : 0.0f;
          }
    }
  }
  if (cfg.cutout_px > 0) {
    const std::size_t side = rng.below(cfg.cutout_px + 1);
    const long cy = static_cast<long>(rng.below(height)), cx = static_cast<long>(rng.below(width));
    const long half = static_cast<long>(side / 2);
    const long y0 = std::max(0L, cy - half), y1 = std::min<long>(height, cy - half + static_cast<long>(side));
    const long x0 = std::max(0L, cx - half), x1 = std::min<long>(width, cx - half + static_cast<long>(side));
    for (std::size_t c = 0; c < channels; ++c)
      for (long y = y0; y < y1; ++y)
        for (long x = x0; x < x1; ++x) view[c * plane + y * width + x] = 0.0f;
  }
}

ModelF deploy_train(const LabelAugmentedDataset& d, const ArchSpec& arch, const DeployConfig& cfg,
                    const std::function<void(std::size_t, double)>& on_epoch) {
  cfg.validate();
  d.base.validate();
  if (cfg.flags.sub_soft && !d.has_dense()) {
    throw ConfigError("deploy: sub_soft requested but the dataset carries no dense labels");
  }
  if (cfg.flags.full_soft && !d.has_full_soft()) {
    throw ConfigError("deploy: full_soft requested but the dataset carries no full-image soft labels");
  }
  const auto& img = d.base.images;
  const std::size_t m = d.size(), ch = img.dim(1), h = img.dim(2), w = img.dim(3);
  const std::size_t per = ch * h * w, classes = d.base.classes;
  const std::size_t k = cfg.flags.uses_sub() ? d.sampler.count() : 0;

  TensorF all_sub;
  if (cfg.flags.uses_sub()) all_sub = subsample_batch(img, d.sampler);

  ModelF model = ModelF::create(arch, derive_seed(cfg.seed, "init"));
  SgdState<float> opt{cfg.lr, cfg.momentum, cfg.weight_decay, {}};
  const std::size_t steps_per_epoch = (m + cfg.batch - 1) / cfg.batch;
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;
  const std::size_t views_per_image = (cfg.flags.uses_full() ? 1 : 0) + k;
  const std::size_t chunk_images = std::max<std::size_t>(1, cfg.micro_batch_views / views_per_image);
  const std::uint64_t aug_base = derive_seed(cfg.seed, "augment");
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng(derive_seed(derive_seed(cfg.seed, "order"), epoch));
    const auto order = order_rng.permutation(m);
    double epoch_loss = 0;
    for (std::size_t b0 = 0; b0 < m; b0 += cfg.batch) {
      const std::size_t b1 = std::min(m, b0 + cfg.batch), bsz = b1 - b0;
      std::vector<TensorF> acc;
      double step_loss = 0;
      for (std::size_t c0 = b0; c0 < b1; c0 += chunk_images) {
        const std::size_t c1 = std::min(b1, c0 + chunk_images), n = c1 - c0;
        DeployBatch batch;
        if (cfg.flags.uses_full()) batch.full = TensorF(Shape{n, ch, h, w});
        if (k) batch.sub = TensorF(Shape{n * k, ch, h, w});
        if (cfg.flags.full_soft) batch.full_soft = TensorF(Shape{n, classes});
        if (cfg.flags.sub_soft) batch.dense = TensorF(Shape{n, k, classes});
        for (std::size_t q = 0; q < n; ++q) {
          const std::size_t i = order[c0 + q];
          batch.hard.push_back(d.base.hard_labels[i]);
          if (cfg.flags.uses_full()) {
            float* dst = batch.full.data() + q * per;
            std::copy(img.data() + i * per, img.data() + (i + 1) * per, dst);
            augment_view(dst, ch, h, w, cfg.augment, view_seed(aug_base, epoch, i, 0));
          }
          for (std::size_t j = 0; j < k; ++j) {
            float* dst = batch.sub.data() + (q * k + j) * per;
            const float* src = all_sub.data() + (i * k + j) * per;
            std::copy(src, src + per, dst);
            augment_view(dst, ch, h, w, cfg.augment, view_seed(aug_base, epoch, i, 1 + j));
          }
          if (cfg.flags.full_soft) {
            std::copy(d.full_labels.data() + i * classes, d.full_labels.data() + (i + 1) * classes,
                      batch.full_soft.data() + q * classes);
          }
          if (cfg.flags.sub_soft) {
            std::copy(d.dense_labels.data() + i * k * classes,
                      d.dense_labels.data() + (i + 1) * k * classes,
                      batch.dense.data() + q * k * classes);
          }
        }
        GradModeGuard on(true);
        auto params = model.param_vars(true);
        auto loss = deployment_loss(model, params, batch, cfg.flags, cfg.reduction, k);
        const float weight = static_cast<float>(n) / static_cast<float>(bsz);
        const double lv = loss.item();
        if (!std::isfinite(lv)) {
          throw NumericalError("deploy diverged: non-finite loss in epoch " + std::to_string(epoch + 1));
        }
        step_loss += lv * weight;
        auto grads = grad(scale(loss, weight), params);
        if (acc.empty()) {
          for (auto& g : grads) acc.push_back(g.value());
        } else {
          for (std::size_t p = 0; p < acc.size(); ++p) {
            float* a = acc[p].data();
            const float* g = grads[p].value().data();
            for (std::size_t e = 0; e < acc[p].numel(); ++e) a[e] += g[e];
          }
        }
      }
      opt.lr = cfg.cosine ? cosine_lr(cfg.lr, step, total_steps) : cfg.lr;
      std::vector<TensorF> p;
      for (auto& v : model.params()) p.push_back(std::move(v.value));
      sgd_step<float>(p, acc, opt);
      for (std::size_t i = 0; i < p.size(); ++i) model.params()[i].value = std::move(p[i]);
      epoch_loss += step_loss;
      ++step;
    }
    if (on_epoch) on_epoch(epoch + 1, epoch_loss / static_cast<double>(steps_per_epoch));
  }
  return model;
}

std::vector<std::uint64_t> trial_seeds(std::uint64_t base, std::size_t trials) {
  std::vector<std::uint64_t> out;
  for (std::size_t t = 0; t < trials; ++t) out.push_back(derive_seed(derive_seed(base, "trial"), t));
  return out;
}

std::vector<ArchSpec> default_eval_archs(const Shape& s, std::size_t classes,
                                         std::size_t convnet_width) {
  ArchSpec conv = ArchSpec::convnet(3, s[0], s[1], classes, convnet_width);
  conv.in_width = s[2];
  ArchSpec mlp = ArchSpec::mlp({1024, 512}, s[0], classes);
  mlp.in_channels = s[0];
  mlp.in_height = s[1];
  mlp.in_width = s[2];
  ArchSpec small = ArchSpec::smallcnn(s[0], s[1], classes);
  small.in_width = s[2];
  return {conv, mlp, small};
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

ArchResult deploy_trials(const LabelAugmentedDataset& d, const ArchSpec& arch,
                         std::span<const std::uint64_t> seeds, const DeployConfig& cfg,
                         const SourceDataset& val, std::size_t jobs) {
  if (seeds.empty()) throw ConfigError("evaluation needs at least one trial");
  ArchResult r;
  r.arch = arch.str();
  r.seeds.assign(seeds.begin(), seeds.end());
  r.accuracies.assign(seeds.size(), 0.0);
  parallel_for(seeds.size(), jobs, [&](std::size_t t) {
    DeployConfig c = cfg;
    c.seed = seeds[t];
    r.accuracies[t] = evaluate_accuracy(deploy_train(d, arch, c), val);
  });
  r.mean = std::accumulate(r.accuracies.begin(), r.accuracies.end(), 0.0) /
           static_cast<double>(r.accuracies.size());
  r.std = sample_std(r.accuracies);
  return r;
}

EvalReport cross_arch_eval(const LabelAugmentedDataset& d, std::span<const ArchSpec> archs,
                           std::span<const std::uint64_t> seeds, const DeployConfig& cfg,
                           const SourceDataset& val, std::size_t jobs) {
  if (archs.empty()) throw ConfigError("evaluation needs at least one architecture");
  EvalReport rep;
  rep.trials = seeds.size();
  rep.config_hash = cfg.hash();
  for (const auto& a : archs) rep.per_arch.push_back(deploy_trials(d, a, seeds, cfg, val, jobs));
  for (const auto& r : rep.per_arch) rep.overall_mean += r.mean;
  rep.overall_mean /= static_cast<double>(rep.per_arch.size());
  return rep;
}

std::string EvalReport::trials_csv() const {
  CsvWriter w({"arch", "seed", "accuracy"});
  for (const auto& r : per_arch)
    for (std::size_t t = 0; t < r.seeds.size(); ++t)
      w.row({"\"" + r.arch + "\"", std::to_string(r.seeds[t]), fmt_num(r.accuracies[t], 2)});
  return w.str();
}

std::string EvalReport::summary_csv() const {
  CsvWriter w({"arch", "trials", "accuracy_mean", "accuracy_std", "config_hash"});
  for (const auto& r : per_arch) {
    w.row({"\"" + r.arch + "\"", std::to_string(r.seeds.size()), fmt_num(r.mean, 4),
           fmt_num(r.std, 4), config_hash});
  }
  w.row({"overall", std::to_string(trials), fmt_num(overall_mean, 4), "", config_hash});
  return w.str();
}

std::vector<std::pair<std::string, LossFlags>> ablation_rows() {
  return {
      {"full+hard", {true, false, false, false}},
      {"full+soft", {false, true, false, false}},
      {"full+hard+soft", {true, true, false, false}},
      {"sub+hard", {false, false, true, false}},
      {"sub+soft", {false, false, false, true}},
      {"sub+hard+soft", {false, false, true, true}},
      {"LADD", {true, false, false, true}},
  };
}

std::vector<AblationRow> ablation_grid(const LabelAugmentedDataset& d, const ArchSpec& arch,
                                       const DeployConfig& cfg,
                                       std::span<const std::uint64_t> seeds,
                                       const SourceDataset& val, std::span<const std::size_t> only,
                                       std::size_t jobs) {
  if (!d.has_dense() || !d.has_full_soft()) {
    throw ConfigError("ablation grid needs dense and full-image soft labels");
  }
  const auto all = ablation_rows();
  std::vector<std::size_t> idx(only.begin(), only.end());
  if (idx.empty()) {
    idx.resize(all.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
  }
  std::vector<AblationRow> out;
  for (auto i : idx) {
    if (i >= all.size()) throw ConfigError("ablation row index " + std::to_string(i) + " out of range");
    DeployConfig c = cfg;
    c.flags = all[i].second;
    out.push_back({all[i].first, all[i].second, deploy_trials(d, arch, seeds, c, val, jobs)});
  }
  return out;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  CsvWriter w({"row", "flags", "trials", "accuracy_mean", "accuracy_std"});
  for (const auto& r : rows) {
    w.row({r.name, r.flags.str(), std::to_string(r.result.seeds.size()), fmt_num(r.result.mean, 4),
           fmt_num(r.result.std, 4)});
  }
  return w.str();
}

std::string ablation_trials_csv(std::span<const AblationRow> rows) {
  CsvWriter w({"row", "flags", "seed", "accuracy"});
  for (const auto& r : rows) {
    for (std::size_t t = 0; t < r.result.seeds.size(); ++t) {
      w.row({r.name, r.flags.str(), std::to_string(r.result.seeds[t]), fmt_num(r.result.accuracies[t], 4)});
    }
  }
  return w.str();
}

std::vector<RnCell> rn_grid_sweep(const DistilledDataset& base, const LabelerCheckpoint& labeler,
                                  std::span<const std::size_t> ns, std::span<const double> rs,
                                  const ArchSpec& arch, const DeployConfig& cfg,
                                  std::span<const std::uint64_t> seeds, const SourceDataset& val,
                                  std::size_t jobs) {
  if (ns.empty() || rs.empty()) throw ConfigError("R/N sweep needs at least one N and one R");
  for (auto n : ns)
    for (auto r : rs) {
      SubSamplerConfig sc{n, r};
      crop_windows(base.images.dim(2), base.images.dim(3), sc);
    }
  std::vector<RnCell> cells;
  for (auto n : ns) {
    for (auto r : rs) {
      const SubSamplerConfig sc{n, r};
      const auto la = augment_labels(base, labeler, sc);
      const auto res = deploy_trials(la, arch, seeds, cfg, val, jobs);
      cells.push_back({n, r, res.mean, res.std, measure_storage(la).overhead_percent});
    }
  }
  return cells;
}

std::string rn_csv(std::span<const RnCell> cells) {
  CsvWriter w({"N", "R", "accuracy_mean", "accuracy_std", "overhead_percent"});
  for (const auto& c : cells) {
    w.row({std::to_string(c.n), fmt_num(c.r, 4), fmt_num(c.accuracy_mean, 4),
           fmt_num(c.accuracy_std, 4), fmt_num(c.overhead_percent, 4)});
  }
  return w.str();
}

}  // namespace ladd
