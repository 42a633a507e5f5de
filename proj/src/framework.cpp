#include "saddle/framework.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

#include "saddle/errors.hpp"
#include "saddle/rng.hpp"

namespace saddle {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t gfo_length(const GfoChoice& g) {
  return std::visit(overloaded{[](const std::monostate&) -> std::size_t { return 1; },
                               [](const SvrgConfig& c) { return c.inner_iterations; },
                               [](const GdConfig& c) { return c.iterations; },
                               [](const SgdConfig& c) { return c.iterations; },
                               [](const AdamConfig& c) { return c.iterations; }},
                    g);
}

class RunState {
 public:
  RunState(OracleContext& ctx, const MixConfig& cfg) : ctx_(ctx), cfg_(cfg) {}

  void row(std::size_t outer, std::size_t inner, double f, double grad_norm,
           std::optional<double> min_eig, Phase phase, const CounterSnapshot& c) {
    rows.push_back({outer, inner, cfg_.record_wall_time ? c.wall_nanos : 0, c.ifo, c.iso, f,
                    grad_norm, min_eig, phase});
  }
  void monitored_row(std::size_t outer, std::size_t inner, const Vector& x,
                     std::optional<double> min_eig, Phase phase) {
    const PointEval e = ctx_.monitor_eval(x);
    row(outer, inner, e.value, e.grad.norm(), min_eig, phase, ctx_.snapshot());
  }

  std::vector<TraceRow> rows;

 private:
  OracleContext& ctx_;
  const MixConfig& cfg_;
};

}  // namespace

bool Budget::exhausted(const CounterSnapshot& c) const {
  if (max_ifo && c.ifo >= *max_ifo) return true;
  if (max_iso && c.iso >= *max_iso) return true;
  if (max_wall_seconds && static_cast<double>(c.wall_nanos) * 1e-9 >= *max_wall_seconds) return true;
  return false;
}

double MixConfig::resolved_gamma() const { return gamma ? *gamma : std::sqrt(eps); }

void MixConfig::validate() const {
  if (T == 0) throw ContractViolation("mix: T must be positive");
  if (!(eps > 0.0)) throw ContractViolation("mix: eps must be positive");
  if (gamma && !(*gamma > 0.0)) throw ContractViolation("mix: gamma must be positive");
  if (p && !(*p >= 0.0 && *p <= 1.0)) throw ContractViolation("mix: p must lie in [0, 1]");
  if (!(rho > 0.0 && rho < 1.0)) throw ContractViolation("mix: rho must lie in (0, 1)");
  if (lipschitz_hess && !(*lipschitz_hess > 0.0)) throw ContractViolation("mix: M must be positive");
  if (k == 0) throw ContractViolation("mix: k must be positive");
}

double gfo_rate(std::size_t n, double lipschitz_grad, std::size_t inner_iterations) {
  return svrg_rate(n, lipschitz_grad, inner_iterations);
}

double hfo_rate(double gamma, double lipschitz_hess, double rho) {
  return rho * gamma * gamma * gamma / (24.0 * lipschitz_hess * lipschitz_hess);
}

double default_p(std::size_t n, double eps, double gamma, double lipschitz_grad,
                 double lipschitz_hess, double rho, std::size_t inner_iterations) {
  const double g = gfo_rate(n, lipschitz_grad, inner_iterations);
  const double h = hfo_rate(gamma, lipschitz_hess, rho);
  const double p = 1.0 / (1.0 / (eps * eps * g) + 1.0 / h);
  if (!std::isfinite(p)) return 1.0 - 1e-6;
  return std::clamp(p, 1e-6, 1.0 - 1e-6);
}

double theta(double p, double eps, double g_val, double h_val) {
  if (!(p > 0.0 && p < 1.0)) throw ContractViolation("theta: p must lie in (0, 1)");
  return std::min((1.0 - p) * eps * eps * g_val, p * h_val);
}

std::size_t min_outer_iterations(double delta, double theta_val) {
  if (!(theta_val > 0.0) || delta < 0.0) throw ContractViolation("min_outer_iterations: need theta > 0, delta >= 0");
  return static_cast<std::size_t>(std::floor(delta / theta_val)) + 1;
}

std::size_t recommended_k(double delta, std::size_t T, double theta_val, double q, double zeta) {
  if (!(zeta > 0.0 && zeta < 1.0)) throw ContractViolation("recommended_k: zeta must lie in (0, 1)");
  if (!(q > 0.0 && q < 1.0)) throw ContractViolation("recommended_k: q must lie in (0, 1)");
  if (!(delta > 0.0) || !(theta_val > 0.0)) throw ContractViolation("recommended_k: need delta, theta > 0");
  const double ratio = static_cast<double>(T) * theta_val / delta;
  if (!(ratio > 1.0)) throw ContractViolation("recommended_k: need T > delta / theta");
  const double denom = std::min(std::log(ratio), std::log(1.0 / q));
  const double k = std::ceil(std::log(1.0 / zeta) / denom);
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

std::vector<std::pair<std::size_t, Vector>> sample_outputs(const std::vector<Vector>& output_set,
                                                           std::size_t k, std::uint64_t seed) {
  if (output_set.empty()) throw ContractViolation("sample_outputs: empty output set");
  if (k == 0) throw ContractViolation("sample_outputs: k must be positive");
  Rng rng = Rng::derive(seed, "output-samples");
  std::vector<std::pair<std::size_t, Vector>> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t i = rng.index(output_set.size());
    out.emplace_back(i, output_set[i]);
  }
  return out;
}

MixRunResult mix_run(OracleContext& ctx, const Vector& x0, const MixConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(x0.size()) != ctx.dim())
    throw ContractViolation("mix: start point has wrong dimension");

  MixRunResult res;
  const ProblemSpec& spec = ctx.spec();
  const double M = cfg.lipschitz_hess ? *cfg.lipschitz_hess : spec.lipschitz_hess;
  res.gamma = cfg.resolved_gamma();
  const bool has_gfo = !std::holds_alternative<std::monostate>(cfg.gfo);
  const bool has_hfo = !std::holds_alternative<std::monostate>(cfg.hfo);
  if (cfg.p) {
    res.p = *cfg.p;
  } else {
    res.p = default_p(ctx.n(), cfg.eps, res.gamma, spec.lipschitz_grad, M, cfg.rho,
                      gfo_length(cfg.gfo));
  }

  RunState st(ctx, cfg);
  AdamState adam;
  DiagScaleState diag;
  Vector x = x0;
  double f_x = ctx.monitor_value(x);
  st.monitored_row(0, 0, x, std::nullopt, Phase::gfo);

  for (std::size_t t = 1; t <= cfg.T; ++t) {
    if (cfg.budget.exhausted(ctx.snapshot())) {
      res.budget_exhausted = true;
      break;
    }
    OuterRecord rec;
    rec.t = t;
    rec.f_prev = f_x;

    // GFO
    const std::uint64_t gseed = mix_seed(cfg.seed, "gfo", t);
    Vector u;
    Vector y;
    if (has_gfo) {
      GfoResult g = std::visit(
          overloaded{[&](const std::monostate&) -> GfoResult { return {}; },
                     [&](SvrgConfig c) { c.seed = gseed; return svrg_run(ctx, x, c); },
                     [&](GdConfig c) { c.seed = gseed; return gd_run(ctx, x, c); },
                     [&](SgdConfig c) { c.seed = gseed; return sgd_run(ctx, x, c); },
                     [&](AdamConfig c) { c.seed = gseed; return adam_run(ctx, x, c, &adam); }},
          cfg.gfo);
      if (cfg.gfo_inner_rows) {
        for (const auto& tp : g.trace) {
          st.row(t, tp.iteration, tp.f, tp.grad_norm, std::nullopt, Phase::gfo, tp.counters);
        }
      }
      Rng choice = Rng::derive(cfg.seed, "mix-choice", t);
      rec.used_y = choice.bernoulli(res.p);
      u = rec.used_y ? g.y : g.z;
      y = std::move(g.y);
      st.monitored_row(t, g.iterations, u, std::nullopt, Phase::gfo);
    } else {
      u = x;
      y = x;
    }
    res.output_set.push_back(y);
    rec.f_u = ctx.monitor_value(u);

    if (cfg.budget.exhausted(ctx.snapshot())) {
      x = u;
      f_x = rec.f_u;
      rec.f_next = f_x;
      rec.counters = ctx.snapshot();
      res.outer.push_back(rec);
      res.budget_exhausted = true;
      break;
    }

    // Halt test at u.
    std::optional<CriticalityCheck> check;
    if (cfg.halt_check) {
      const EigenSearchConfig* base = nullptr;
      EigenSearchConfig ec;
      if (const auto* hd = std::get_if<HessianDescentConfig>(&cfg.hfo)) {
        ec = hd->eigen_config();
        base = &ec;
      }
      check = check_second_order_critical(ctx, u, cfg.eps, res.gamma, cfg.rho,
                                          mix_seed(cfg.seed, "check", t), base);
      rec.grad_norm_u = check->grad_norm;
      if (check->certificate) rec.rayleigh = check->certificate->rayleigh;
      st.row(t, 0, check->at_x.value, check->grad_norm, rec.rayleigh, Phase::check,
             ctx.snapshot());
      if (check->critical) {
        res.halted_early = true;
        res.output_set.assign(1, u);
        x = u;
        f_x = check->at_x.value;
        rec.f_next = f_x;
        rec.counters = ctx.snapshot();
        res.outer.push_back(rec);
        break;
      }
    }

    // HFO
    const std::uint64_t hseed = mix_seed(cfg.seed, "hfo", t);
    HfoResult h;
    if (has_hfo) {
      const PointEval* at_u = check ? &check->at_x : nullptr;
      h = std::visit(
          overloaded{
              [&](const std::monostate&) -> HfoResult { return {}; },
              [&](HessianDescentConfig c) {
                c.eps = cfg.eps;
                c.gamma = res.gamma;
                c.rho = cfg.rho;
                c.lipschitz_hess = M;
                c.seed = hseed;
                const CurvatureEstimate* est =
                    check && check->certificate ? &*check->certificate : nullptr;
                return hessian_descent(ctx, u, c, at_u, est);
              },
              [&](CubicDescentConfig c) {
                c.subproblem.lipschitz_hess = M;
                c.seed = hseed;
                return cubic_descent(ctx, u, c, at_u);
              },
              [&](ApproxCubicConfig c) {
                c.subproblem.lipschitz_hess = M;
                c.seed = hseed;
                auto [r, s] = approx_cubic_descent(ctx, u, c, std::move(diag));
                diag = std::move(s);
                return r;
              }},
          cfg.hfo);
      rec.hfo_ran = true;
      rec.hfo_moved = h.moved;
      rec.descent_floor = h.descent_floor;
      rec.h1_violation = h.h1_violation;
      if (h.certificate) rec.rayleigh = h.certificate->rayleigh;
      x = std::move(h.y);
      st.monitored_row(t, h.solver_iterations, x, rec.rayleigh, Phase::hfo);
      f_x = st.rows.back().f;
    } else {
      x = u;
      f_x = rec.f_u;
    }
    rec.f_next = f_x;
    rec.counters = ctx.snapshot();
    res.outer.push_back(rec);

    if (has_hfo && h.tau == HfoStatus::halt) {
      res.halted_early = true;
      res.output_set.assign(1, x);
      break;
    }
  }

  res.final_x = x;
  res.final_f = f_x;
  res.samples = sample_outputs(res.output_set.empty() ? std::vector<Vector>{x0} : res.output_set,
                               cfg.k, mix_seed(cfg.seed, "samples", 0));
  res.trace = std::move(st.rows);
  res.counters = ctx.snapshot();
  return res;
}

}  // namespace saddle
