// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "ladd/errors.hpp"
#include "ladd/tesla.hpp"

using namespace ladd;

namespace {

double scalar(const TensorD& t) { return t[0]; }

bool has_verdict(const AuditReport& r, const std::string& prefix) {
  for (const auto& v : r.verdicts)
    if (v.starts_with(prefix)) return true;
  return false;
}

}  // namespace

TEST_CASE("quadratic unroll follows the closed form") {
  const double beta = 0.3, t0 = 1.0, ts = -0.5;
  const std::vector<double> xs{0.3, -0.7, 1.1};
  const auto spec = quadratic_spec(beta, xs, t0, ts);
  const auto snaps = unroll_values(spec);
  REQUIRE(snaps.size() == 4);
  double theta = t0, g_sum = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(scalar(snaps[i][0]) == doctest::Approx(theta).epsilon(1e-14));
    g_sum += theta - xs[i];
    theta = (1 - beta) * theta + beta * xs[i];
  }
  CHECK(scalar(snaps[3][0]) == doctest::Approx(theta).epsilon(1e-14));
  const double den = (t0 - ts) * (t0 - ts);
  CHECK(mtt_loss(spec) == doctest::Approx((theta - ts) * (theta - ts) / den).epsilon(1e-14));

  const auto pre = prefactor(spec);
  CHECK(scalar(pre.g_sum[0]) == doctest::Approx(g_sum).epsilon(1e-14));
  CHECK(scalar(pre.a[0]) == doctest::Approx(2 * beta * (ts - t0) + 2 * beta * beta * g_sum).epsilon(1e-14));

  // dL/dx_i = 2 (theta_T - target) beta (1 - beta)^(T-1-i) / den; TESLA drops the (1 - beta) factors
  const auto exact = grad_exact(spec);
  const auto tesla = grad_tesla(spec);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double want = 2 * (theta - ts) * beta * std::pow(1 - beta, 2.0 - i) / den;
    CHECK(scalar(exact[i]) == doctest::Approx(want).epsilon(1e-12));
    CHECK(scalar(tesla[i]) == doctest::Approx(2 * (theta - ts) * beta / den).epsilon(1e-12));
  }
}

TEST_CASE("two-step quadratic: TESLA overstates the first batch by 1 / (1 - beta)") {
  for (double beta : {0.05, 0.1, 0.4}) {
    const std::vector<double> xs{0.2, 0.9};
    const auto spec = quadratic_spec(beta, xs, 1.5, 0.25);
    const double ratio = scalar(grad_tesla(spec)[0]) / scalar(grad_exact(spec)[0]);
    CHECK(std::abs(ratio - 1.0 / (1.0 - beta)) < 1e-8);
    CHECK(rel_error(grad_corrected(spec), grad_exact(spec)) < 1e-12);
  }
}

TEST_CASE("degenerate and edge-case unrolls") {
  SUBCASE("zero steps leaves the loss at one") {
    const auto spec = quadratic_spec(0.1, {}, 2.0, 1.0);
    CHECK(mtt_loss(spec) == doctest::Approx(1.0));
  }
  SUBCASE("zero learning rate freezes the snapshots") {
    const std::vector<double> xs{0.1, 0.2, 0.3};
    const auto snaps = unroll_values(quadratic_spec(0.0, xs, 0.7, 0.0));
    for (const auto& s : snaps) CHECK(scalar(s[0]) == 0.7);
  }
  SUBCASE("start equal to target has no normalizer") {
    const std::vector<double> xs{0.1};
    CHECK_THROWS_AS(mtt_loss(quadratic_spec(0.1, xs, 0.5, 0.5)), NumericalError);
  }
  SUBCASE("convolutional networks cannot be unrolled") {
    auto spec = random_spec(1, {});
    spec.arch = ArchSpec::convnet(3, 1, 8, 3, 2);
    CHECK_THROWS_AS(spec.validate(), CapabilityError);
  }
  SUBCASE("batch count must match the step count") {
    auto spec = random_spec(1, {});
    spec.targets.pop_back();
    CHECK_THROWS(spec.validate());
  }
}

TEST_CASE("random MLP unrolls: exact matches FD and the corrected sum matches exact") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    RandomSpecOptions opt;
    if (seed % 2) opt.hidden = {};
    const auto spec = random_spec(seed, opt);
    const auto exact = grad_exact(spec);
    CHECK(rel_error(exact, fd_oracle(spec)) < 1e-5);
    CHECK(rel_error(grad_corrected(spec), exact) < 1e-6);
    const auto tesla = grad_tesla(spec);
    CHECK(rel_error(tesla.back(), exact.back()) < 1e-10);
  }
}

TEST_CASE("a single step makes every path agree") {
  RandomSpecOptions opt;
  opt.steps = 1;
  const auto r = audit(random_spec(3, opt));
  CHECK(rel_error(r.tesla, r.exact) < 1e-10);
  CHECK(rel_error(r.corrected, r.exact) < 1e-10);
  CHECK(has_verdict(r, "all paths agree"));
}

TEST_CASE("audit report") {
  const auto r = audit(random_spec(5, {}));
  CHECK(has_verdict(r, "exact matches FD"));
  CHECK(has_verdict(r, "corrected agrees with exact"));
  CHECK(has_verdict(r, "TESLA diverges"));
  CHECK(r.diff[0][0] == 0.0);
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) CHECK(r.diff[a][b] == r.diff[b][a]);
  CHECK(r.diff[0][1] > 1e-4);
  CHECK(r.diff[0][3] > 1e-4);
  CHECK(r.csv().starts_with("batch,path,grad_norm,rel_diff_vs_exact\n"));
  CHECK(r.verdict_block().find("corrected") != std::string::npos);
  CHECK(&r.path(2) == &r.corrected);
  CHECK(&r.path(4) == &r.fd);
}
