// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ladd/errors.hpp"
#include "ladd/run_config.hpp"

using namespace ladd;

namespace {

std::string error_of(std::string_view text) {
  try {
    parse_run_config(text).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults survive a dump and parse") {
  const RunConfig def;
  const auto text = dump_run_config(def);
  CHECK(dump_run_config(parse_run_config(text)) == text);
  CHECK(dump_run_config(parse_run_config("{}")) == text);
  CHECK_NOTHROW(def.validate());
}

TEST_CASE("partial configs override only the named keys") {
  const auto c = parse_run_config(R"({"seed": 9, "deploy": {"augment": {"cutout_px": 3}}, "sweep": {"rs": [0.5]}})");
  CHECK(c.seed == 9);
  CHECK(c.deploy.train.augment.cutout_px == 3);
  CHECK(c.deploy.train.augment.shift_px == RunConfig{}.deploy.train.augment.shift_px);
  CHECK(c.sweep.rs == std::vector<double>{0.5});
  CHECK(c.sweep.ns == RunConfig{}.sweep.ns);
}

TEST_CASE("config errors name the offending key") {
  CHECK(error_of(R"({"sede": 1})").find("'sede'") != std::string::npos);
  CHECK(error_of(R"({"deploy": {"augment": {"blur": 1}}})").find("deploy.augment.blur") != std::string::npos);
  CHECK(error_of(R"({"labeler": {"epochs": "ten"}})").find("labeler.epochs") != std::string::npos);
  CHECK(error_of(R"({"distill": 3})").find("must be an object") != std::string::npos);
  CHECK(error_of("{seed: 1").find("not valid JSON") != std::string::npos);
  CHECK(error_of("[1, 2]").find("JSON object") != std::string::npos);
  CHECK(error_of(R"({"distill": {"algorithm": "mtt"}})").find("distill.algorithm") != std::string::npos);
  CHECK(error_of(R"({"deploy": {"flags": "full_hard+soft"}})").find("soft") != std::string::npos);
}

TEST_CASE("semantic validation") {
  CHECK(error_of(R"({"labeler": {"epochs": 5, "snapshots": [2, 6], "use_epoch": 2}})").find("snapshots") != std::string::npos);
  CHECK(error_of(R"({"labeler": {"epochs": 5, "snapshots": [2, 4], "use_epoch": 3}})").find("use_epoch") != std::string::npos);
  CHECK(error_of(R"({"ablation": {"rows": [7]}})").find("ablation.rows") != std::string::npos);
  CHECK_FALSE(error_of(R"({"sampler": {"n": 1}})").empty());
  CHECK_FALSE(error_of(R"({"sweep": {"rs": [0.0]}})").empty());
  CHECK(error_of(R"({"storage": {"level": 11}})").find("storage.level") != std::string::npos);
  CHECK(error_of(R"({"data": {"source": "imagenet"}})").find("data.source") != std::string::npos);
  CHECK(error_of(R"({"deploy": {"flags": ""}})").find("flag") != std::string::npos);
  CHECK(error_of(R"({"audit": {"model": "quadratic", "steps": 4}})").find("audit.xs") != std::string::npos);
}

TEST_CASE("stage seeds derive from the global seed") {
  auto a = parse_run_config(R"({"seed": 1})");
  auto b = parse_run_config(R"({"seed": 1})");
  auto c = parse_run_config(R"({"seed": 2})");
  a.derive_stage_seeds();
  b.derive_stage_seeds();
  c.derive_stage_seeds();
  CHECK(a.labeler.train.seed == b.labeler.train.seed);
  CHECK(a.deploy.train.seed == b.deploy.train.seed);
  CHECK(a.labeler.train.seed != c.labeler.train.seed);
  CHECK(a.labeler.train.seed != a.distill.seed);
  CHECK(a.distill.seed != a.deploy.train.seed);
}

TEST_CASE("shipped configs are valid") {
  std::ifstream in(std::string(LADD_SOURCE_DIR) + "/configs/mnist_ci.json");
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto c = parse_run_config(ss.str());
  CHECK_NOTHROW(c.validate());
  CHECK(c.data.source == "mnist");
}
