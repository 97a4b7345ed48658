// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/run_config.hpp"

#include <json.hpp>

#include "ladd/errors.hpp"
#include "ladd/rng.hpp"

namespace ladd {

using json = nlohmann::ordered_json;

namespace {

const char* algorithm_name(DistillAlgorithm a) {
  switch (a) {
    case DistillAlgorithm::random: return "random";
    case DistillAlgorithm::dm: return "dm";
    default: return "gm";
  }
}

DistillAlgorithm parse_algorithm(const std::string& s) {
  if (s == "random") return DistillAlgorithm::random;
  if (s == "dm") return DistillAlgorithm::dm;
  if (s == "gm") return DistillAlgorithm::gm;
  throw ConfigError("distill.algorithm: expected random|dm|gm, got '" + s + "'");
}

template <typename E>
E pick(const std::string& key, const std::string& s, std::initializer_list<std::pair<const char*, E>> options) {
  std::string names;
  for (const auto& [name, value] : options) {
    if (s == name) return value;
    names += names.empty() ? name : std::string("|") + name;
  }
  throw ConfigError(key + ": expected " + names + ", got '" + s + "'");
}

json to_json(const RunConfig& c) {
  const auto& l = c.labeler.train;
  const auto& d = c.distill;
  const auto& t = c.deploy.train;
  const auto& a = c.audit;
  const auto& f = c.storage.fixture;
  json j;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["jobs"] = c.jobs;
  j["data"] = {{"source", c.data.source},
               {"root", c.data.root},
               {"train_limit", c.data.train_limit},
               {"val_limit", c.data.val_limit}};
  j["sampler"] = {{"n", c.sampler.n}, {"r", c.sampler.r}};
  j["labeler"] = {{"epochs", l.epochs},         {"lr", l.lr},
                  {"batch", l.batch},           {"momentum", l.momentum},
                  {"weight_decay", l.weight_decay}, {"width", l.width},
                  {"snapshots", c.labeler.snapshots}, {"use_epoch", c.labeler.use_epoch}};
  j["distill"] = {{"algorithm", algorithm_name(d.algorithm)},
                  {"ipc", d.ipc},
                  {"iterations", d.iterations},
                  {"dataset_lr", d.dataset_lr},
                  {"inner_steps", d.inner_steps},
                  {"inner_lr", d.inner_lr},
                  {"real_batch", d.real_batch},
                  {"distance", d.distance == Distance::l2 ? "l2" : "cosine"},
                  {"init", d.init == InitMode::real_sample ? "real" : "noise"},
                  {"embed_width", d.embed_width},
                  {"mlp_hidden", d.mlp_hidden},
                  {"mlp_activation", d.mlp_activation == Activation::relu ? "relu" : "softplus"},
                  {"fixed_embedder", d.fixed_embedder}};
  j["deploy"] = {{"arch", c.deploy.arch},
                 {"width", c.deploy.width},
                 {"epochs", t.epochs},
                 {"lr", t.lr},
                 {"momentum", t.momentum},
                 {"weight_decay", t.weight_decay},
                 {"cosine", t.cosine},
                 {"batch", t.batch},
                 {"flags", t.flags.any() ? t.flags.str() : ""},
                 {"reduction", t.reduction == SubReduction::sum ? "sum" : "mean"},
                 {"augment", {{"enabled", t.augment.enabled},
                              {"flip", t.augment.flip},
                              {"shift_px", t.augment.shift_px},
                              {"cutout_px", t.augment.cutout_px}}},
                 {"micro_batch_views", t.micro_batch_views}};
  j["eval"] = {{"trials", c.eval.trials}, {"archs", c.eval.archs}};
  j["ablation"] = {{"rows", c.ablation_rows}};
  j["sweep"] = {{"ns", c.sweep.ns}, {"rs", c.sweep.rs}};
  j["audit"] = {{"model", a.model},       {"steps", a.steps},
                {"beta", a.beta},         {"fd_step", a.fd_step},
                {"xs", a.xs},             {"theta_start", a.theta_start},
                {"theta_target", a.theta_target}, {"features", a.features},
                {"hidden", a.hidden},     {"classes", a.classes},
                {"batch", a.batch},       {"expert_steps", a.expert_steps},
                {"expert_lr", a.expert_lr}};
  j["storage"] = {{"level", c.storage.level},
                  {"classes", f.classes},
                  {"ipc", f.ipc},
                  {"size", f.size},
                  {"channels", f.channels},
                  {"noise_levels", f.noise_levels},
                  {"labeler_width", f.labeler_width}};
  return j;
}

void reject_unknown(const json& user, const json& known, const std::string& path) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!known.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    if (known[it.key()].is_object()) {
      if (!it.value().is_object()) throw ConfigError("config key '" + key + "' must be an object");
      reject_unknown(it.value(), known[it.key()], key);
    }
  }
}

class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  template <typename T>
  void operator()(const char* section, const char* key, T& out) const {
    const json& node = section ? root_.at(section).at(key) : root_.at(key);
    try {
      out = node.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config key '") + (section ? std::string(section) + "." : "") + key +
                        "' has the wrong type: " + node.dump());
    }
  }

 private:
  const json& root_;
};

RunConfig from_json(const json& j) {
  RunConfig c;
  Reader get(j);
  get(nullptr, "seed", c.seed);
  get(nullptr, "out", c.out);
  get(nullptr, "jobs", c.jobs);
  get("data", "source", c.data.source);
  get("data", "root", c.data.root);
  get("data", "train_limit", c.data.train_limit);
  get("data", "val_limit", c.data.val_limit);
  get("sampler", "n", c.sampler.n);
  get("sampler", "r", c.sampler.r);

  auto& l = c.labeler.train;
  get("labeler", "epochs", l.epochs);
  get("labeler", "lr", l.lr);
  get("labeler", "batch", l.batch);
  get("labeler", "momentum", l.momentum);
  get("labeler", "weight_decay", l.weight_decay);
  get("labeler", "width", l.width);
  get("labeler", "snapshots", c.labeler.snapshots);
  get("labeler", "use_epoch", c.labeler.use_epoch);

  auto& d = c.distill;
  std::string s;
  get("distill", "algorithm", s);
  d.algorithm = parse_algorithm(s);
  get("distill", "ipc", d.ipc);
  get("distill", "iterations", d.iterations);
  get("distill", "dataset_lr", d.dataset_lr);
  get("distill", "inner_steps", d.inner_steps);
  get("distill", "inner_lr", d.inner_lr);
  get("distill", "real_batch", d.real_batch);
  get("distill", "distance", s);
  d.distance = pick<Distance>("distill.distance", s, {{"l2", Distance::l2}, {"cosine", Distance::cosine}});
  get("distill", "init", s);
  d.init = pick<InitMode>("distill.init", s, {{"real", InitMode::real_sample}, {"noise", InitMode::noise}});
  get("distill", "embed_width", d.embed_width);
  get("distill", "mlp_hidden", d.mlp_hidden);
  get("distill", "mlp_activation", s);
  d.mlp_activation = pick<Activation>("distill.mlp_activation", s,
                                      {{"relu", Activation::relu}, {"softplus", Activation::softplus}});
  get("distill", "fixed_embedder", d.fixed_embedder);

  auto& t = c.deploy.train;
  get("deploy", "arch", c.deploy.arch);
  get("deploy", "width", c.deploy.width);
  get("deploy", "epochs", t.epochs);
  get("deploy", "lr", t.lr);
  get("deploy", "momentum", t.momentum);
  get("deploy", "weight_decay", t.weight_decay);
  get("deploy", "cosine", t.cosine);
  get("deploy", "batch", t.batch);
  get("deploy", "flags", s);
  t.flags = s.empty() ? LossFlags{false, false, false, false} : LossFlags::parse(s);
  get("deploy", "reduction", s);
  t.reduction = pick<SubReduction>("deploy.reduction", s, {{"sum", SubReduction::sum}, {"mean", SubReduction::mean}});
  const json& aug = j.at("deploy").at("augment");
  Reader ga(aug);
  ga(nullptr, "enabled", t.augment.enabled);
  ga(nullptr, "flip", t.augment.flip);
  ga(nullptr, "shift_px", t.augment.shift_px);
  ga(nullptr, "cutout_px", t.augment.cutout_px);
  get("deploy", "micro_batch_views", t.micro_batch_views);

  get("eval", "trials", c.eval.trials);
  get("eval", "archs", c.eval.archs);
  get("ablation", "rows", c.ablation_rows);
  get("sweep", "ns", c.sweep.ns);
  get("sweep", "rs", c.sweep.rs);

  auto& a = c.audit;
  get("audit", "model", a.model);
  get("audit", "steps", a.steps);
  get("audit", "beta", a.beta);
  get("audit", "fd_step", a.fd_step);
  get("audit", "xs", a.xs);
  get("audit", "theta_start", a.theta_start);
  get("audit", "theta_target", a.theta_target);
  get("audit", "features", a.features);
  get("audit", "hidden", a.hidden);
  get("audit", "classes", a.classes);
  get("audit", "batch", a.batch);
  get("audit", "expert_steps", a.expert_steps);
  get("audit", "expert_lr", a.expert_lr);

  auto& f = c.storage.fixture;
  get("storage", "level", c.storage.level);
  get("storage", "classes", f.classes);
  get("storage", "ipc", f.ipc);
  get("storage", "size", f.size);
  get("storage", "channels", f.channels);
  get("storage", "noise_levels", f.noise_levels);
  get("storage", "labeler_width", f.labeler_width);
  return c;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json user;
  try {
    user = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!user.is_object()) throw ConfigError("config root must be a JSON object");
  json merged = to_json(RunConfig{});
  reject_unknown(user, merged, "");
  merged.merge_patch(user);
  return from_json(merged);
}

std::string dump_run_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

void RunConfig::validate() const {
  if (jobs == 0) throw ConfigError("jobs must be >= 1");
  if (data.source != "cifar10" && data.source != "mnist") {
    throw ConfigError("data.source: expected cifar10|mnist, got '" + data.source + "'");
  }
  sampler.validate();
  labeler.train.validate();
  if (labeler.snapshots.empty()) throw ConfigError("labeler.snapshots must not be empty");
  for (std::size_t i = 0; i < labeler.snapshots.size(); ++i) {
    const auto e = labeler.snapshots[i];
    if (e == 0 || e > labeler.train.epochs || (i > 0 && e <= labeler.snapshots[i - 1])) {
      throw ConfigError("labeler.snapshots must be ascending within [1, labeler.epochs]");
    }
  }
  bool found = false;
  for (auto e : labeler.snapshots) found = found || e == labeler.use_epoch;
  if (!found) throw ConfigError("labeler.use_epoch must be one of labeler.snapshots");
  distill.validate();
  deploy.train.validate();
  if (!deploy.arch.empty()) ArchSpec::parse(deploy.arch);
  if (deploy.width == 0) throw ConfigError("deploy.width must be >= 1");
  if (eval.trials == 0) throw ConfigError("eval.trials must be >= 1");
  for (const auto& a : eval.archs) ArchSpec::parse(a);
  for (auto r : ablation_rows) {
    if (r >= 7) throw ConfigError("ablation.rows entries must be < 7");
  }
  for (auto n : sweep.ns) SubSamplerConfig{n, sampler.r}.validate();
  for (auto r : sweep.rs) SubSamplerConfig{sampler.n, r}.validate();
  if (audit.model != "quadratic" && audit.model != "mlp") {
    throw ConfigError("audit.model: expected quadratic|mlp, got '" + audit.model + "'");
  }
  if (audit.steps == 0) throw ConfigError("audit.steps must be >= 1");
  if (audit.model == "quadratic" && audit.xs.size() < audit.steps) {
    throw ConfigError("audit.xs needs at least audit.steps values");
  }
  if (!(audit.fd_step > 0)) throw ConfigError("audit.fd_step must be positive");
  if (storage.level < 0 || storage.level > 9) throw ConfigError("storage.level must lie in [0, 9]");
}

void RunConfig::derive_stage_seeds() {
  labeler.train.seed = derive_seed(seed, "labeler");
  distill.seed = derive_seed(seed, "distill");
  deploy.train.seed = derive_seed(seed, "deploy");
  storage.fixture.seed = derive_seed(seed, "storage");
}

}  // namespace ladd
