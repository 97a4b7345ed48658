// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/tesla.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ladd/csv.hpp"
#include "ladd/ops.hpp"
#include "ladd/rng.hpp"
#include "ladd/sgd.hpp"

namespace ladd {

namespace {

std::vector<VarD> leaves(std::span<const TensorD> ts, bool requires_grad) {
  std::vector<VarD> out;
  for (const auto& t : ts) out.push_back(VarD::leaf(t, requires_grad));
  return out;
}

double sq_norm(std::span<const TensorD> a, std::span<const TensorD> b) {
  double s = 0;
  for (std::size_t p = 0; p < a.size(); ++p)
    for (std::size_t i = 0; i < a[p].numel(); ++i) s += (a[p][i] - b[p][i]) * (a[p][i] - b[p][i]);
  return s;
}

double denominator(const UnrollSpec& spec) {
  const double den = sq_norm(spec.theta_start, spec.theta_target);
  if (!(den > 0.0)) {
    throw NumericalError("degenerate unroll spec: theta_start equals theta_target");
  }
  return den;
}

std::vector<TensorD> values(std::span<const VarD> vs) {
  std::vector<TensorD> out;
  for (const auto& v : vs) out.push_back(v.value());
  return out;
}

TensorD scaled(const TensorD& t, double f) {
  TensorD out = t;
  for (auto& v : out.storage()) v *= f;
  return out;
}

void check_finite(const TensorD& t, const char* what) {
  if (!t.all_finite()) throw NumericalError(std::string(what) + " produced non-finite values");
}

}  // namespace

void UnrollSpec::validate() const {
  if (!(beta >= 0.0)) throw ConfigError("unroll: beta must be >= 0");
  if (batches.size() != steps) {
    throw ConfigError("unroll: " + std::to_string(batches.size()) + " batches for T=" +
                      std::to_string(steps));
  }
  if (theta_start.size() != theta_target.size()) throw ShapeError("unroll: theta sets differ in size");
  for (std::size_t p = 0; p < theta_start.size(); ++p) {
    if (theta_start[p].shape() != theta_target[p].shape()) {
      throw ShapeError("unroll: theta_start / theta_target shapes differ at tensor " + std::to_string(p));
    }
  }
  if (kind == AuditModelKind::quadratic) {
    if (theta_start.size() != 1) throw ShapeError("unroll: quadratic model has one parameter tensor");
    for (const auto& b : batches) {
      if (b.shape() != theta_start[0].shape()) throw ShapeError("unroll: quadratic batch shape mismatch");
    }
  } else {
    if (arch.kind != ArchSpec::Kind::mlp) {
      throw CapabilityError("unroll: audit networks must be MLPs (re-differentiable), got " + arch.str());
    }
    if (targets.size() != steps) throw ConfigError("unroll: one target tensor per batch required");
    const auto fresh = ModelD::create(arch, 0);
    if (fresh.params().size() != theta_start.size()) throw ShapeError("unroll: theta does not fit " + arch.str());
    for (std::size_t p = 0; p < theta_start.size(); ++p) {
      if (fresh.params()[p].value.shape() != theta_start[p].shape()) {
        throw ShapeError("unroll: theta tensor " + std::to_string(p) + " does not fit " + arch.str());
      }
    }
  }
}

VarD inner_loss(const UnrollSpec& spec, std::span<const VarD> theta, const VarD& x,
                const TensorD& target) {
  if (spec.kind == AuditModelKind::quadratic) {
    auto d = sub(theta[0], x);
    return scale(dot(d, d), 0.5);
  }
  static thread_local std::string cached_arch;
  static thread_local ModelD model;
  if (cached_arch != spec.arch.str()) {
    model = ModelD::create(spec.arch, 0);
    cached_arch = spec.arch.str();
  }
  return softmax_cross_entropy(model.forward(theta, x), VarD::constant(target));
}

std::vector<std::vector<VarD>> unroll_sgd(const UnrollSpec& spec, std::span<const VarD> batches,
                                          bool differentiable) {
  spec.validate();
  if (batches.size() != spec.steps) throw ShapeError("unroll_sgd: batch count mismatch");
  if (differentiable && spec.kind != AuditModelKind::quadratic && !spec.arch.differentiable_twice()) {
    throw CapabilityError("unroll_sgd: " + spec.arch.str() + " is not re-differentiable");
  }
  GradModeGuard on(true);
  std::vector<std::vector<VarD>> traj;
  traj.push_back(leaves(spec.theta_start, true));
  for (std::size_t i = 0; i < spec.steps; ++i) {
    const auto& theta = traj.back();
    const TensorD& target = spec.targets.empty() ? spec.batches[i] : spec.targets[i];
    if (differentiable) {
      auto loss = inner_loss(spec, theta, batches[i], target);
      auto g = grad(loss, theta, true);
      traj.push_back(sgd_step<double>(theta, g, spec.beta));
    } else {
      auto th = leaves(values(theta), true);
      auto loss = inner_loss(spec, th, VarD::constant(batches[i].value()), target);
      auto g = grad(loss, th);
      std::vector<VarD> next;
      for (std::size_t p = 0; p < th.size(); ++p) {
        next.push_back(VarD::leaf(
            sub(VarD::constant(th[p].value()), scale(VarD::constant(g[p].value()), spec.beta)).value(),
            true));
      }
      traj.push_back(std::move(next));
    }
  }
  return traj;
}

std::vector<std::vector<TensorD>> unroll_values(const UnrollSpec& spec) {
  auto b = leaves(spec.batches, false);
  auto traj = unroll_sgd(spec, b, false);
  std::vector<std::vector<TensorD>> out;
  for (const auto& t : traj) out.push_back(values(t));
  return out;
}

VarD mtt_loss_of(const UnrollSpec& spec, std::span<const VarD> theta_final) {
  const double den = denominator(spec);
  VarD num;
  for (std::size_t p = 0; p < theta_final.size(); ++p) {
    auto d = sub(theta_final[p], VarD::constant(spec.theta_target[p]));
    auto term = dot(d, d);
    num = num.defined() ? add(num, term) : term;
  }
  return scale(num, 1.0 / den);
}

double mtt_loss(const UnrollSpec& spec) {
  if (spec.steps == 0) {
    return sq_norm(spec.theta_start, spec.theta_target) / denominator(spec);
  }
  const auto traj = unroll_values(spec);
  return sq_norm(traj.back(), spec.theta_target) / denominator(spec);
}

BatchGrads grad_exact(const UnrollSpec& spec) {
  auto xs = leaves(spec.batches, true);
  auto traj = unroll_sgd(spec, xs, true);
  auto loss = mtt_loss_of(spec, traj.back());
  BatchGrads out = values(grad(loss, xs));
  for (const auto& g : out) check_finite(g, "grad_exact");
  return out;
}

Prefactor prefactor(const UnrollSpec& spec) {
  const auto traj = unroll_values(spec);
  Prefactor pf;
  GradModeGuard on(true);
  for (const auto& t : spec.theta_start) pf.g_sum.emplace_back(t.shape());
  for (std::size_t i = 0; i < spec.steps; ++i) {
    auto th = leaves(traj[i], true);
    const TensorD& target = spec.targets.empty() ? spec.batches[i] : spec.targets[i];
    auto g = grad(inner_loss(spec, th, VarD::constant(spec.batches[i]), target), th);
    for (std::size_t p = 0; p < g.size(); ++p)
      for (std::size_t k = 0; k < g[p].numel(); ++k) pf.g_sum[p][k] += g[p].value()[k];
  }
  for (std::size_t p = 0; p < pf.g_sum.size(); ++p) {
    TensorD a(spec.theta_start[p].shape());
    for (std::size_t k = 0; k < a.numel(); ++k) {
      a[k] = 2.0 * spec.beta * (spec.theta_target[p][k] - spec.theta_start[p][k]) +
             2.0 * spec.beta * spec.beta * pf.g_sum[p][k];
    }
    pf.a.push_back(std::move(a));
  }
  return pf;
}

namespace {

// d/dX [v . g(theta, X)] and d/dtheta [v . g(theta, X)] at the given point.
struct Directional {
  TensorD d_x;
  std::vector<TensorD> hvp;
};

Directional directional(const UnrollSpec& spec, std::span<const TensorD> theta, std::size_t i,
                        std::span<const TensorD> v) {
  GradModeGuard on(true);
  auto th = leaves(theta, true);
  auto x = VarD::leaf(spec.batches[i], true);
  const TensorD& target = spec.targets.empty() ? spec.batches[i] : spec.targets[i];
  auto g = grad(inner_loss(spec, th, x, target), th, true);
  VarD s;
  for (std::size_t p = 0; p < g.size(); ++p) {
    auto term = dot(VarD::constant(v[p]), g[p]);
    s = s.defined() ? add(s, term) : term;
  }
  std::vector<VarD> wrt = th;
  wrt.push_back(x);
  auto out = grad(s, wrt);
  Directional d;
  for (std::size_t p = 0; p < th.size(); ++p) d.hvp.push_back(out[p].value());
  d.d_x = out.back().value();
  check_finite(d.d_x, "directional derivative");
  for (const auto& h : d.hvp) check_finite(h, "Hessian-vector product");
  return d;
}

}  // namespace

BatchGrads grad_tesla(const UnrollSpec& spec) {
  const double den = denominator(spec);
  const auto traj = unroll_values(spec);
  const auto pf = prefactor(spec);
  BatchGrads out;
  for (std::size_t i = 0; i < spec.steps; ++i) {
    out.push_back(scaled(directional(spec, traj[i], i, pf.a).d_x, 1.0 / den));
  }
  return out;
}

BatchGrads grad_corrected(const UnrollSpec& spec, bool literal_indexing) {
  const double den = denominator(spec);
  const auto traj = unroll_values(spec);
  auto v = prefactor(spec).a;
  BatchGrads out(spec.steps);
  for (std::size_t i = spec.steps; i-- > 0;) {
    auto d = directional(spec, traj[i], i, v);
    std::vector<TensorD> next = v;
    for (std::size_t p = 0; p < v.size(); ++p)
      for (std::size_t k = 0; k < v[p].numel(); ++k) next[p][k] -= spec.beta * d.hvp[p][k];
    if (literal_indexing) {
      out[i] = scaled(directional(spec, traj[i], i, next).d_x, 1.0 / den);
    } else {
      out[i] = scaled(d.d_x, 1.0 / den);
    }
    v = std::move(next);
  }
  return out;
}

BatchGrads fd_oracle(const UnrollSpec& spec, double step) {
  BatchGrads out;
  UnrollSpec probe = spec;
  for (std::size_t i = 0; i < spec.steps; ++i) {
    TensorD g(spec.batches[i].shape());
    for (std::size_t k = 0; k < g.numel(); ++k) {
      const double orig = spec.batches[i][k];
      probe.batches[i][k] = orig + step;
      const double up = mtt_loss(probe);
      probe.batches[i][k] = orig - step;
      const double down = mtt_loss(probe);
      probe.batches[i][k] = orig;
      g[k] = (up - down) / (2.0 * step);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double grad_norm(const BatchGrads& g) {
  double s = 0;
  for (const auto& t : g)
    for (double v : t.storage()) s += v * v;
  return std::sqrt(s);
}

double rel_error(const TensorD& a, const TensorD& ref) {
  double num = 0, den = 0;
  for (std::size_t k = 0; k < a.numel(); ++k) {
    num += (a[k] - ref[k]) * (a[k] - ref[k]);
    den += ref[k] * ref[k];
  }
  if (den == 0) return num == 0 ? 0.0 : INFINITY;
  return std::sqrt(num / den);
}

double rel_error(const BatchGrads& a, const BatchGrads& ref) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].numel(); ++k) {
      num += (a[i][k] - ref[i][k]) * (a[i][k] - ref[i][k]);
      den += ref[i][k] * ref[i][k];
    }
  if (den == 0) return num == 0 ? 0.0 : INFINITY;
  return std::sqrt(num / den);
}

const BatchGrads& AuditReport::path(std::size_t i) const {
  switch (i) {
    case 0: return exact;
    case 1: return tesla;
    case 2: return corrected;
    case 3: return literal;
    default: return fd;
  }
}

AuditReport audit(const UnrollSpec& spec, double fd_step) {
  AuditReport r;
  r.exact = grad_exact(spec);
  r.tesla = grad_tesla(spec);
  r.corrected = grad_corrected(spec);
  r.literal = grad_corrected(spec, true);
  r.fd = fd_oracle(spec, fd_step);
  r.pre = prefactor(spec);
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b < 5; ++b) {
      if (a == b) continue;
      const double na = grad_norm(r.path(a)), nb = grad_norm(r.path(b));
      double num = 0;
      for (std::size_t i = 0; i < spec.steps; ++i)
        for (std::size_t k = 0; k < r.path(a)[i].numel(); ++k) {
          const double d = r.path(a)[i][k] - r.path(b)[i][k];
          num += d * d;
        }
      const double m = std::max(na, nb);
      r.diff[a][b] = m > 0 ? std::sqrt(num) / m : 0.0;
    }

  const double e_fd = rel_error(r.exact, r.fd);
  const double c_e = rel_error(r.corrected, r.exact);
  r.verdicts.push_back(std::string(e_fd < 1e-5 ? "exact matches FD" : "exact DISAGREES with FD") +
                       " (rel " + fmt_num(e_fd, 12) + ")");
  r.verdicts.push_back(std::string(c_e < 1e-6 ? "corrected agrees with exact" : "corrected DISAGREES with exact") +
                       " (rel " + fmt_num(c_e, 12) + ")");
  if (spec.steps == 1) {
    const bool all = rel_error(r.tesla, r.exact) < 1e-10 && rel_error(r.corrected, r.exact) < 1e-10;
    r.verdicts.push_back(all ? "all paths agree" : "T=1 paths DISAGREE");
  } else {
    double worst = 0;
    for (std::size_t i = 0; i + 1 < spec.steps; ++i) worst = std::fmax(worst, rel_error(r.tesla[i], r.exact[i]));
    const bool diverges = worst > 1e-3;
    r.verdicts.push_back(std::string(diverges ? "TESLA diverges" : "TESLA matches") + "; " +
                         (c_e < 1e-6 ? "corrected agrees" : "corrected disagrees") +
                         " (worst non-final TESLA rel " + fmt_num(worst, 8) + ")");
    const double lit = rel_error(r.literal, r.exact);
    r.verdicts.push_back("product from j=i (literal indexing) rel vs exact " + fmt_num(lit, 8));
  }
  return r;
}

std::string AuditReport::verdict_block() const {
  std::ostringstream os;
  os << "== TESLA audit ==\n";
  for (const auto& v : verdicts) os << "  " << v << "\n";
  os << "  relative discrepancy |a-b|/max(|a|,|b|):\n" << std::string(11, ' ');
  for (auto p : kPaths) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " %-9s", p);
    os << buf;
  }
  os << "\n";
  for (std::size_t a = 0; a < 5; ++a) {
    std::string name = kPaths[a];
    os << "  " << name << std::string(9 - name.size(), ' ');
    for (std::size_t b = 0; b < 5; ++b) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.3e", diff[a][b]);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

std::string AuditReport::csv() const {
  CsvWriter w({"batch", "path", "grad_norm", "rel_diff_vs_exact"});
  for (std::size_t i = 0; i < exact.size(); ++i) {
    for (std::size_t p = 0; p < 5; ++p) {
      const auto& g = path(p)[i];
      double n = 0;
      for (double v : g.storage()) n += v * v;
      w.row({std::to_string(i), kPaths[p], fmt_num(std::sqrt(n), 12),
             fmt_num(rel_error(g, exact[i]), 12)});
    }
  }
  return w.str();
}

UnrollSpec quadratic_spec(double beta, std::span<const double> xs, double theta_start,
                          double theta_target) {
  UnrollSpec s;
  s.kind = AuditModelKind::quadratic;
  s.steps = xs.size();
  s.beta = beta;
  for (double x : xs) s.batches.push_back(TensorD::scalar(x));
  s.theta_start = {TensorD::scalar(theta_start)};
  s.theta_target = {TensorD::scalar(theta_target)};
  return s;
}

UnrollSpec random_spec(std::uint64_t seed, const RandomSpecOptions& opt) {
  UnrollSpec s;
  s.kind = opt.hidden.empty() ? AuditModelKind::softmax_linear : AuditModelKind::mlp;
  s.arch = ArchSpec::mlp(opt.hidden, opt.features, opt.classes, Activation::softplus);
  s.steps = opt.steps;
  s.beta = opt.beta;
  s.expert_steps = opt.expert_steps;
  Rng rng(derive_seed(seed, "audit-spec"));
  auto draw_batch = [&](TensorD& x, TensorD& t) {
    x = TensorD(Shape{opt.batch, opt.features});
    for (auto& v : x.storage()) v = rng.normal();
    t = TensorD(Shape{opt.batch, opt.classes});
    for (std::size_t b = 0; b < opt.batch; ++b) t[b * opt.classes + rng.below(opt.classes)] = 1.0;
  };
  for (std::size_t i = 0; i < opt.steps; ++i) {
    TensorD x, t;
    draw_batch(x, t);
    s.batches.push_back(std::move(x));
    s.targets.push_back(std::move(t));
  }
  const auto init = ModelD::create(s.arch, derive_seed(seed, "audit-init"));
  for (const auto& p : init.params()) s.theta_start.push_back(p.value);

  // twin model trained on its own source batches
  UnrollSpec expert = s;
  expert.steps = opt.expert_steps;
  expert.beta = opt.expert_lr;
  expert.batches.clear();
  expert.targets.clear();
  for (std::size_t i = 0; i < opt.expert_steps; ++i) {
    TensorD x, t;
    draw_batch(x, t);
    expert.batches.push_back(std::move(x));
    expert.targets.push_back(std::move(t));
  }
  expert.theta_target = s.theta_start;
  s.theta_target = unroll_values(expert).back();
  s.validate();
  return s;
}

}  // namespace ladd
