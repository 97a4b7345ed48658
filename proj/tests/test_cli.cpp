// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

/// Runs the CLI in `dir` with stdout and stderr captured together.
CliRun run_cli(const fs::path& dir, const std::string& args, const std::string& env = "") {
  const fs::path log = dir / "cli.log";
  const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" + LADD_CLI_PATH + "' " + args +
                          " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ladd_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("exit codes and error lines") {
  const auto dir = scratch("codes");
  auto r = run_cli(dir, "");
  CHECK(r.code == 2);
  CHECK(r.out.find("ladd: error code=2 kind=usage") != std::string::npos);

  std::ofstream(dir / "bad.json") << R"({"bogus": 1})";
  r = run_cli(dir, "--config bad.json distill");
  CHECK(r.code == 2);
  CHECK(r.out.find("kind=config message=\"unknown config key 'bogus'\"") != std::string::npos);

  r = run_cli(dir, "--config missing.json distill");
  CHECK(r.code == 3);

  r = run_cli(dir, "--out o distill", "LADD_DATA_ROOT=/nonexistent/ladd");
  CHECK(r.code == 3);
  CHECK(r.out.find("kind=missing_input") != std::string::npos);

  r = run_cli(dir, "deploy --in nothing.zip");
  CHECK(r.code == 3);
}

TEST_CASE("print-config reflects command-line overrides") {
  const auto dir = scratch("print");
  const auto r = run_cli(dir, "--seed 42 --out here --print-config");
  CHECK(r.code == 0);
  CHECK(r.out.find("\"seed\": 42") != std::string::npos);
  CHECK(r.out.find("\"out\": \"here\"") != std::string::npos);
}

TEST_CASE("storage report on the procedural fixture") {
  const auto dir = scratch("storage");
  const auto r = run_cli(dir, "--out s report-storage --fixture");
  REQUIRE(r.code == 0);
  const auto at = r.out.find("overhead_percent ");
  REQUIRE(at != std::string::npos);
  const double overhead = std::stod(r.out.substr(at + 17));
  CHECK(overhead > 1.0);
  CHECK(overhead < 3.0);
  CHECK(fs::exists(dir / "s" / "storage.csv"));
  CHECK(fs::exists(dir / "s" / "config_used.json"));
}

TEST_CASE("audit command writes its table and verdicts") {
  const auto dir = scratch("audit");
  const auto r = run_cli(dir, "--out a audit-tesla");
  REQUIRE(r.code == 0);
  std::ifstream in(dir / "a" / "tesla_verdict.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find("corrected agrees with exact") != std::string::npos);
  CHECK(fs::exists(dir / "a" / "tesla_audit.csv"));
}
