// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// ladd: command-line front end for the distillation workbench.
//
//   ladd distill        source -> distilled.zip
//   ladd augment        distilled.zip -> labeler checkpoints, augmented.zip
//   ladd deploy         augmented.zip -> model.ckpt, deploy.csv
//   ladd eval           augmented.zip -> eval_trials.csv, eval_summary.csv
//   ladd ablate         augmented.zip -> ablation.csv
//   ladd sweep-rn       distilled.zip + labeler -> rn_sweep.csv
//   ladd report-storage archive or procedural fixture -> storage.csv
//   ladd audit-tesla    -> tesla_audit.csv, verdict on stdout
//   ladd mnist-fixture  synthetic digits in MNIST IDX layout
//
// Exit codes: 0 ok, 2 bad config, 3 missing input, 4 numerical failure, 1 other.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "ladd/checkpoint.hpp"
#include "ladd/csv.hpp"
#include "ladd/deploy.hpp"
#include "ladd/distiller.hpp"
#include "ladd/errors.hpp"
#include "ladd/fixtures.hpp"
#include "ladd/io.hpp"
#include "ladd/labeler.hpp"
#include "ladd/rng.hpp"
#include "ladd/run_config.hpp"
#include "ladd/runtime.hpp"
#include "ladd/tesla.hpp"
#include "ladd/train.hpp"

namespace fs = std::filesystem;
using namespace ladd;

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
  bool print_config = false;
  std::string in;
  std::string labeler;
  bool fixture = false;
  std::string fixture_dir;
  std::size_t train_per_class = 100, val_per_class = 20;
};

void log(const std::string& msg) { std::cerr << "[ladd] " << msg << "\n"; }

RunConfig resolve_config(const Flags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) cfg = parse_run_config(read_file(f.config_path));
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (cfg.data.root.empty()) {
    if (const char* env = std::getenv("LADD_DATA_ROOT")) cfg.data.root = env;
  }
  cfg.validate();
  cfg.derive_stage_seeds();
  return cfg;
}

SourceSplits load_source(const RunConfig& cfg) {
  if (cfg.data.root.empty()) {
    throw MissingInputError("no dataset root: set data.root in the config or LADD_DATA_ROOT");
  }
  const fs::path root = cfg.data.root;
  if (!fs::is_directory(root)) throw MissingInputError("dataset root not found: " + root.string());
  SourceSplits s = cfg.data.source == "mnist" ? load_mnist(root) : load_cifar10(root);
  if (cfg.data.train_limit) s.train = s.train.subset(cfg.data.train_limit);
  if (cfg.data.val_limit) s.val = s.val.subset(cfg.data.val_limit);
  log("loaded " + cfg.data.source + ": " + std::to_string(s.train.size()) + " train, " +
      std::to_string(s.val.size()) + " val");
  return s;
}

ArchSpec deploy_arch(const RunConfig& cfg, const Shape& image, std::size_t classes) {
  if (cfg.deploy.arch.empty()) {
    auto a = ArchSpec::convnet(3, image[0], image[1], classes, cfg.deploy.width);
    a.in_width = image[2];
    return a;
  }
  auto a = ArchSpec::parse(cfg.deploy.arch);
  if (a.input_shape() != image || a.classes != classes) {
    throw ConfigError("deploy.arch " + a.str() + " does not fit the dataset");
  }
  return a;
}

std::vector<ArchSpec> eval_archs(const RunConfig& cfg, const Shape& image, std::size_t classes) {
  if (cfg.eval.archs.empty()) return default_eval_archs(image, classes, cfg.deploy.width);
  std::vector<ArchSpec> out;
  for (const auto& text : cfg.eval.archs) {
    auto a = ArchSpec::parse(text);
    if (a.input_shape() != image || a.classes != classes) {
      throw ConfigError("eval.archs entry " + a.str() + " does not fit the dataset");
    }
    out.push_back(a);
  }
  return out;
}

Shape image_shape(const LabelAugmentedDataset& d) {
  const auto& im = d.base.images;
  return {im.dim(1), im.dim(2), im.dim(3)};
}

fs::path out_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  write_file_atomic(fs::path(cfg.out) / "config_used.json", dump_run_config(cfg));
  return cfg.out;
}

fs::path input_or(const Flags& f, const fs::path& fallback) {
  return f.in.empty() ? fallback : fs::path(f.in);
}

fs::path labeler_path(const fs::path& dir, std::size_t epoch) {
  return dir / ("labeler_e" + std::to_string(epoch) + ".ckpt");
}

void save_labeler(const fs::path& path, const LabelerCheckpoint& c) {
  nlohmann::ordered_json meta = {{"epoch", c.epoch},
                                 {"train_seed", c.train_seed},
                                 {"mean_val_entropy", c.mean_val_entropy},
                                 {"val_accuracy", c.val_accuracy}};
  save_checkpoint<float>(path, c.model, meta.dump());
}

LabelerCheckpoint load_labeler(const fs::path& path) {
  auto ck = load_checkpoint<float>(path);
  LabelerCheckpoint c;
  c.model = std::move(ck.model);
  try {
    const auto meta = nlohmann::json::parse(ck.metadata);
    c.epoch = meta.at("epoch").get<std::size_t>();
    c.train_seed = meta.at("train_seed").get<std::uint64_t>();
    c.mean_val_entropy = meta.at("mean_val_entropy").get<double>();
    c.val_accuracy = meta.at("val_accuracy").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("labeler checkpoint " + path.string() + " has bad metadata: " + e.what());
  }
  return c;
}

void write_csv(const fs::path& dir, const std::string& name, const std::string& body) {
  write_file_atomic(dir / name, body);
  log("wrote " + (dir / name).string());
}

int cmd_distill(const RunConfig& cfg, const Flags&) {
  const auto dir = out_dir(cfg);
  const auto src = load_source(cfg);
  auto res = distill(src.train, cfg.distill);
  save_archive(dir / "distilled.zip", res.data, cfg.distill.seed);
  write_csv(dir, "distill_trace.csv", res.trace.csv());
  return 0;
}

int cmd_augment(const RunConfig& cfg, const Flags& f) {
  const auto dir = out_dir(cfg);
  const auto base = load_archive(input_or(f, dir / "distilled.zip")).base;
  const auto src = load_source(cfg);
  std::vector<LabelerCheckpoint> ckpts;
  if (!f.labeler.empty()) {
    ckpts.push_back(load_labeler(f.labeler));
  } else {
    ckpts = train_labeler(src.train, src.val, cfg.labeler.train, cfg.labeler.snapshots,
                          [](std::size_t e, double loss) {
                            log("labeler epoch " + std::to_string(e) + " loss " + fmt_num(loss));
                          });
    for (const auto& c : ckpts) save_labeler(labeler_path(dir, c.epoch), c);
    if (ckpts.size() >= 2) write_csv(dir, "labeler_entropy.csv", entropy_csv(entropy_report(ckpts, src.val)));
  }
  const LabelerCheckpoint* use = &ckpts.front();
  for (const auto& c : ckpts) {
    if (c.epoch == cfg.labeler.use_epoch) use = &c;
  }
  const auto la = augment_labels(base, *use, cfg.sampler);
  save_archive(dir / "augmented.zip", la, cfg.seed);
  log("augmented with " + use->id() + ": dense labels [" + std::to_string(la.dense_labels.dim(0)) + ", " +
      std::to_string(la.dense_labels.dim(1)) + ", " + std::to_string(la.dense_labels.dim(2)) + "]");
  return 0;
}

int cmd_deploy(const RunConfig& cfg, const Flags& f) {
  const auto dir = out_dir(cfg);
  const auto d = load_archive(input_or(f, dir / "augmented.zip"));
  const auto src = load_source(cfg);
  const auto arch = deploy_arch(cfg, image_shape(d), d.base.classes);
  double last = 0;
  auto model = deploy_train(d, arch, cfg.deploy.train, [&](std::size_t e, double loss) {
    last = loss;
    if (e % 50 == 0 || e == cfg.deploy.train.epochs) {
      log("deploy epoch " + std::to_string(e) + " loss " + fmt_num(loss));
    }
  });
  const double acc = evaluate_accuracy(model, src.val);
  save_checkpoint<float>(dir / "model.ckpt", model);
  CsvWriter w({"arch", "seed", "flags", "epochs", "final_loss", "accuracy", "config_hash"});
  w.row({arch.str(), std::to_string(cfg.deploy.train.seed), cfg.deploy.train.flags.str(),
         std::to_string(cfg.deploy.train.epochs), fmt_num(last), fmt_num(acc),
         cfg.deploy.train.hash()});
  write_csv(dir, "deploy.csv", w.str());
  std::cout << "accuracy " << fmt_num(acc) << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const Flags& f) {
  const auto dir = out_dir(cfg);
  const auto d = load_archive(input_or(f, dir / "augmented.zip"));
  const auto src = load_source(cfg);
  const auto archs = eval_archs(cfg, image_shape(d), d.base.classes);
  const auto seeds = trial_seeds(cfg.deploy.train.seed, cfg.eval.trials);
  const auto rep = cross_arch_eval(d, archs, seeds, cfg.deploy.train, src.val, cfg.jobs);
  write_csv(dir, "eval_trials.csv", rep.trials_csv());
  write_csv(dir, "eval_summary.csv", rep.summary_csv());
  std::cout << rep.summary_csv();
  return 0;
}

int cmd_ablate(const RunConfig& cfg, const Flags& f) {
  const auto dir = out_dir(cfg);
  const auto d = load_archive(input_or(f, dir / "augmented.zip"));
  const auto src = load_source(cfg);
  const auto arch = deploy_arch(cfg, image_shape(d), d.base.classes);
  const auto seeds = trial_seeds(cfg.deploy.train.seed, cfg.eval.trials);
  const auto rows = ablation_grid(d, arch, cfg.deploy.train, seeds, src.val, cfg.ablation_rows, cfg.jobs);
  const auto csv = ablation_csv(rows);
  write_csv(dir, "ablation.csv", csv);
  write_csv(dir, "ablation_trials.csv", ablation_trials_csv(rows));
  std::cout << csv;
  return 0;
}

int cmd_sweep_rn(const RunConfig& cfg, const Flags& f) {
  const auto dir = out_dir(cfg);
  const auto base = load_archive(input_or(f, dir / "distilled.zip")).base;
  const auto labeler = load_labeler(f.labeler.empty() ? labeler_path(dir, cfg.labeler.use_epoch)
                                                      : fs::path(f.labeler));
  const auto src = load_source(cfg);
  const Shape shape{base.images.dim(1), base.images.dim(2), base.images.dim(3)};
  const auto arch = deploy_arch(cfg, shape, base.classes);
  const auto seeds = trial_seeds(cfg.deploy.train.seed, cfg.eval.trials);
  const auto cells = rn_grid_sweep(base, labeler, cfg.sweep.ns, cfg.sweep.rs, arch, cfg.deploy.train,
                                   seeds, src.val, cfg.jobs);
  const auto csv = rn_csv(cells);
  write_csv(dir, "rn_sweep.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_report_storage(const RunConfig& cfg, const Flags& f) {
  const auto dir = out_dir(cfg);
  LabelAugmentedDataset d;
  std::string source;
  if (f.fixture) {
    auto opt = cfg.storage.fixture;
    opt.sampler = cfg.sampler;
    d = storage_fixture(opt);
    source = "fixture";
  } else {
    const auto path = input_or(f, dir / "augmented.zip");
    d = load_archive(path);
    source = path.filename().string();
  }
  if (!d.has_dense()) throw ConfigError("report-storage: archive has no dense labels");
  const auto r = measure_storage(d, cfg.storage.level);
  CsvWriter w({"source", "images", "n", "raw_image_bytes", "raw_hard_label_bytes", "raw_label_bytes",
               "compressed_image_bytes", "compressed_hard_label_bytes", "compressed_label_bytes",
               "overhead_percent", "raw_ratio_percent"});
  w.row({source, std::to_string(d.size()), std::to_string(d.sampler.n),
         std::to_string(r.raw_image_bytes), std::to_string(r.raw_hard_label_bytes),
         std::to_string(r.raw_label_bytes), std::to_string(r.compressed_image_bytes),
         std::to_string(r.compressed_hard_label_bytes), std::to_string(r.compressed_label_bytes),
         fmt_num(r.overhead_percent), fmt_num(r.raw_ratio_percent)});
  write_csv(dir, "storage.csv", w.str());
  std::cout << "overhead_percent " << fmt_num(r.overhead_percent) << "\nraw_ratio_percent "
            << fmt_num(r.raw_ratio_percent) << "\n";
  return 0;
}

int cmd_audit_tesla(const RunConfig& cfg, const Flags&) {
  const auto dir = out_dir(cfg);
  const auto& a = cfg.audit;
  UnrollSpec spec;
  if (a.model == "quadratic") {
    spec = quadratic_spec(a.beta, std::span(a.xs).first(a.steps), a.theta_start, a.theta_target);
  } else {
    RandomSpecOptions opt;
    opt.steps = a.steps;
    opt.beta = a.beta;
    opt.features = a.features;
    opt.hidden = a.hidden;
    opt.classes = a.classes;
    opt.batch = a.batch;
    opt.expert_steps = a.expert_steps;
    opt.expert_lr = a.expert_lr;
    spec = random_spec(derive_seed(cfg.seed, "audit"), opt);
  }
  const auto report = audit(spec, a.fd_step);
  write_csv(dir, "tesla_audit.csv", report.csv());
  write_file_atomic(dir / "tesla_verdict.txt", report.verdict_block());
  std::cout << report.verdict_block();
  return 0;
}

int cmd_mnist_fixture(const RunConfig& cfg, const Flags& f) {
  write_mnist_fixture(f.fixture_dir, cfg.seed, f.train_per_class, f.val_per_class);
  log("wrote glyph-digit IDX files to " + f.fixture_dir);
  return 0;
}

std::string one_line(std::string s) {
  for (auto& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
    if (ch == '"') ch = '\'';
  }
  return s;
}

int fail(int code, const char* kind, const std::string& what) {
  std::cerr << "ladd: error code=" << code << " kind=" << kind << " message=\"" << one_line(what) << "\"\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Label-augmented dataset distillation workbench"};
  app.require_subcommand(0, 1);
  Flags f;
  app.add_option("--config", f.config_path, "JSON run config")->option_text("PATH");
  app.add_option("--seed", f.seed, "global seed (overrides config)");
  app.add_option("--out", f.out, "output directory (overrides config)");
  app.add_option("--jobs", f.jobs, "worker threads (overrides config)");
  app.add_flag("--print-config", f.print_config, "print the resolved config and exit");

  using Handler = int (*)(const RunConfig&, const Flags&);
  std::vector<std::pair<CLI::App*, Handler>> cmds;
  auto add = [&](const char* name, const char* help, Handler h) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    cmds.emplace_back(sub, h);
    return sub;
  };
  add("distill", "distill images from the source dataset", cmd_distill);
  add("augment", "train a labeler and attach dense labels", cmd_augment)
      ->add_option("--in", f.in, "distilled archive");
  cmds.back().first->add_option("--labeler", f.labeler, "use this labeler checkpoint instead of training");
  add("deploy", "train one model on an archive", cmd_deploy)->add_option("--in", f.in, "archive");
  add("eval", "cross-architecture evaluation", cmd_eval)->add_option("--in", f.in, "archive");
  add("ablate", "image/label combination grid", cmd_ablate)->add_option("--in", f.in, "archive");
  add("sweep-rn", "grid over sub-sampler N and R", cmd_sweep_rn)->add_option("--in", f.in, "distilled archive");
  cmds.back().first->add_option("--labeler", f.labeler, "labeler checkpoint");
  add("report-storage", "compressed storage accounting", cmd_report_storage)
      ->add_option("--in", f.in, "archive");
  cmds.back().first->add_flag("--fixture", f.fixture, "use the procedural 10-class fixture");
  add("audit-tesla", "compare meta-gradient paths through unrolled SGD", cmd_audit_tesla);
  auto* fx = add("mnist-fixture", "write synthetic digits as MNIST IDX files", cmd_mnist_fixture);
  fx->add_option("--dir", f.fixture_dir, "target directory")->required();
  fx->add_option("--train-per-class", f.train_per_class)->check(CLI::PositiveNumber);
  fx->add_option("--val-per-class", f.val_per_class)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }

  try {
    const RunConfig cfg = resolve_config(f);
    if (f.print_config) {
      std::cout << dump_run_config(cfg);
      return 0;
    }
    for (auto& [sub, handler] : cmds) {
      if (sub->parsed()) return handler(cfg, f);
    }
    std::cerr << app.help();
    return fail(2, "usage", "a subcommand is required");
  } catch (const ConfigError& e) {
    return fail(2, "config", e.what());
  } catch (const MissingInputError& e) {
    return fail(3, "missing_input", e.what());
  } catch (const NumericalError& e) {
    return fail(4, "numerical", e.what());
  } catch (const Error& e) {
    return fail(1, "error", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
}
