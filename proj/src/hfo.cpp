#include "saddle/hfo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "saddle/errors.hpp"
#include "saddle/rng.hpp"

namespace saddle {

namespace {

void require_point(const OracleContext& ctx, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != ctx.dim())
    throw ContractViolation("point has wrong dimension");
}

struct RestartOutcome {
  Vector w;
  double rayleigh;
  std::size_t hvps;
  bool converged;
};

// Power iteration on B = cI - H from a random unit vector. B is PSD because
// c bounds ||H||, so B-Rayleigh quotients c - w^T H w increase monotonically
// and w^T H w decreases; stop once the decrease stalls.
RestartOutcome power_restart(OracleContext& ctx, const Vector& x, double c, std::size_t budget,
                             double stall, Rng rng) {
  const auto d = static_cast<Eigen::Index>(ctx.dim());
  RestartOutcome out{rng.unit_vector(d), 0.0, 0, false};
  Vector hw(d), b(d);
  ctx.full_hvp(x, out.w, hw);
  ++out.hvps;
  double q = out.w.dot(hw);
  for (std::size_t it = 0; it < budget; ++it) {
    b = c * out.w - hw;
    const double nb = b.norm();
    // Bw = 0: w lies in the top eigenspace of H (e.g. H = cI) and the
    // iteration cannot move.
    if (nb <= 1e-14 * std::max(1.0, c)) {
      out.converged = true;
      break;
    }
    out.w = b / nb;
    ctx.full_hvp(x, out.w, hw);
    ++out.hvps;
    if (!hw.allFinite())
      throw NumericError("non-finite HVP in curvature search", NumericError::Where::iteration, it);
    const double q_new = out.w.dot(hw);
    const double drop = q - q_new;
    q = q_new;
    if (drop < stall) {
      out.converged = true;
      break;
    }
  }
  out.rayleigh = q;
  return out;
}

HfoResult argmin_step(OracleContext& ctx, const Vector& x, double f_x, Vector u) {
  HfoResult res;
  res.f_x = f_x;
  Vector scratch;
  const double f_u = ctx.full_grad(u, scratch);
  if (f_u < f_x) {
    res.y = std::move(u);
    res.f_y = f_u;
    res.moved = true;
  } else {
    res.y = x;
    res.f_y = f_x;
  }
  return res;
}

}  // namespace

void EigenSearchConfig::validate() const {
  if (!(gamma > 0.0)) throw ContractViolation("curvature search: gamma must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw ContractViolation("curvature search: rho must be in (0, 1)");
  if (max_iterations == 0) throw ContractViolation("curvature search: max_iterations must be positive");
  if (!(stall_factor >= 0.0)) throw ContractViolation("curvature search: stall_factor must be >= 0");
  if (shift && !(*shift > 0.0)) throw ContractViolation("curvature search: shift must be positive");
}

std::size_t restart_count(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw ContractViolation("rho must be in (0, 1)");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::log(1.0 / (1.0 - rho)))));
}

std::size_t power_iteration_budget(double gamma, double shift, std::size_t d) {
  const double k = (8.0 / gamma) * shift * std::log(9.0 * static_cast<double>(d) * std::exp(1.0));
  if (!(k < 1e15)) return std::numeric_limits<std::size_t>::max() / 2;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(k)));
}

CurvatureEstimate min_eig_vector(OracleContext& ctx, const Vector& x, const EigenSearchConfig& cfg) {
  cfg.validate();
  require_point(ctx, x);
  const double c = cfg.shift ? *cfg.shift : ctx.problem().curvature_bound(x);
  if (!(c > 0.0) || !std::isfinite(c)) throw NumericError("invalid curvature bound", NumericError::Where::iteration, 0);

  CurvatureEstimate est;
  est.shift = c;
  est.restarts = restart_count(cfg.rho);
  const std::size_t analytic = power_iteration_budget(cfg.gamma, c, ctx.dim());
  est.iteration_budget = std::min(analytic, cfg.max_iterations);
  const double stall = cfg.stall_factor * cfg.gamma;

  std::size_t converged = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < est.restarts; ++r) {
    auto out = power_restart(ctx, x, c, est.iteration_budget, stall,
                             Rng::derive(cfg.seed, "min-eig", r));
    est.hvp_calls += out.hvps;
    if (out.converged) ++converged;
    if (out.rayleigh < best) {
      best = out.rayleigh;
      est.v = std::move(out.w);
    }
  }
  // Fresh recompute so the reported quotient is exactly v^T H v.
  Vector hv;
  ctx.full_hvp(x, est.v, hv);
  ++est.hvp_calls;
  est.rayleigh = est.v.dot(hv);
  est.converged = converged == est.restarts;
  // Restarts that ran out of budget carry no guarantee of their own.
  est.confidence = est.converged ? cfg.rho
                                 : 1.0 - std::exp(-static_cast<double>(converged));
  return est;
}

EigenSearchConfig HessianDescentConfig::eigen_config() const {
  EigenSearchConfig e;
  e.gamma = gamma;
  e.rho = rho;
  e.seed = seed;
  e.max_iterations = max_eig_iterations;
  e.stall_factor = stall_factor;
  return e;
}

void HessianDescentConfig::validate() const {
  if (!(eps > 0.0)) throw ContractViolation("HessianDescent: eps must be positive");
  if (!(lipschitz_hess > 0.0)) throw ContractViolation("HessianDescent: M must be positive");
  eigen_config().validate();
}

HfoResult hessian_descent(OracleContext& ctx, const Vector& x, const HessianDescentConfig& cfg,
                          const PointEval* at_x, const CurvatureEstimate* estimate) {
  cfg.validate();
  require_point(ctx, x);
  PointEval local;
  if (!at_x) {
    local = ctx.full_grad(x);
    at_x = &local;
  }
  CurvatureEstimate est = estimate ? *estimate : min_eig_vector(ctx, x, cfg.eigen_config());
  const double r = est.rayleigh;

  const double alpha = std::abs(r) / cfg.lipschitz_hess;
  const double sign = est.v.dot(at_x->grad) >= 0.0 ? 1.0 : -1.0;
  Vector u = x - (alpha * sign) * est.v;
  HfoResult res = argmin_step(ctx, x, at_x->value, std::move(u));
  if (r <= -cfg.gamma / 2.0) {
    res.descent_floor = std::pow(std::abs(r), 3) / (3.0 * cfg.lipschitz_hess * cfg.lipschitz_hess);
  }
  res.certificate = std::move(est);
  return res;
}

// ---------------------------------------------------------------------------

void CubicSubproblemConfig::validate() const {
  if (!(lipschitz_hess > 0.0)) throw ContractViolation("cubic: M must be positive");
  if (!(solver_step > 0.0)) throw ContractViolation("cubic: solver step must be positive");
  if (!(grad_tol > 0.0)) throw ContractViolation("cubic: tolerance must be positive");
  if (max_iters == 0) throw ContractViolation("cubic: max_iters must be positive");
  if (!(init_scale >= 0.0)) throw ContractViolation("cubic: init_scale must be >= 0");
  if (!(perturbation >= 0.0)) throw ContractViolation("cubic: perturbation must be >= 0");
  if (!(symmetry_break >= 0.0)) throw ContractViolation("cubic: symmetry_break must be >= 0");
}

CubicSubproblemConfig CubicSubproblemConfig::small_profile(double lipschitz_hess) {
  CubicSubproblemConfig c;
  c.lipschitz_hess = lipschitz_hess;
  c.solver_step = 1e-2;
  c.grad_tol = 1e-3;
  return c;
}

CubicSubproblemConfig CubicSubproblemConfig::large_profile(double lipschitz_hess) {
  CubicSubproblemConfig c;
  c.lipschitz_hess = lipschitz_hess;
  c.solver_step = 1e-3;
  c.grad_tol = 0.1;
  return c;
}

double cubic_model_value(const Vector& g, const Vector& v, const Vector& hv, double lipschitz_hess,
                         const Vector* scale) {
  const double nv = scale ? scale->cwiseProduct(v).norm() : v.norm();
  return g.dot(v) + 0.5 * v.dot(hv) + lipschitz_hess / 6.0 * nv * nv * nv;
}

Vector cubic_model_gradient(const Vector& g, const Vector& v, const Vector& hv,
                            double lipschitz_hess, const Vector* scale) {
  if (!scale) return g + hv + (0.5 * lipschitz_hess * v.norm()) * v;
  const Vector dv = scale->cwiseProduct(v);
  return g + hv + (0.5 * lipschitz_hess * dv.norm()) * scale->cwiseProduct(dv);
}

CubicSolution cubic_subproblem(const Vector& g, const HvpOperator& hvp,
                               const CubicSubproblemConfig& cfg, std::uint64_t seed,
                               const Vector* scale) {
  cfg.validate();
  if (scale && scale->size() != g.size()) throw ContractViolation("cubic: scale has wrong dimension");
  CubicSolution sol;
  sol.v = -cfg.init_scale * g;
  if (g.norm() <= 1e-12 && cfg.perturbation > 0.0) {
    sol.v += cfg.perturbation * Rng::derive(seed, "cubic-kick").unit_vector(g.size());
  }
  // When g is orthogonal to a negative-curvature direction, descent from a
  // start parallel to g stalls at a saddle of the model. A seeded linear
  // term orthogonal to g, of norm symmetry_break * grad_tol, pushes the
  // iterates off that subspace; it is dropped once the perturbed model is
  // solved and the run finishes on the true model.
  Vector kick = Vector::Zero(g.size());
  if (cfg.symmetry_break > 0.0 && g.size() > 1) {
    Vector r = Rng::derive(seed, "cubic-symmetry").normal_vector(g.size());
    const double gn = g.norm();
    if (gn > 1e-12) r -= (r.dot(g) / (gn * gn)) * g;
    const double rn = r.norm();
    if (rn > 0.0) kick = (cfg.symmetry_break * cfg.grad_tol / rn) * r;
  }
  bool perturbed = kick.squaredNorm() > 0.0;
  const Vector g_kick = g + kick;

  Vector hv(g.size());
  Vector grad;
  for (std::size_t k = 0; k < cfg.max_iters; ++k) {
    hvp(sol.v, hv);
    ++sol.iterations;
    grad = cubic_model_gradient(perturbed ? g_kick : g, sol.v, hv, cfg.lipschitz_hess, scale);
    sol.grad_norm = grad.norm();
    if (!std::isfinite(sol.grad_norm))
      throw NumericError("cubic subproblem diverged", NumericError::Where::iteration, k);
    if (sol.grad_norm <= cfg.grad_tol && perturbed) {
      perturbed = false;
      grad = cubic_model_gradient(g, sol.v, hv, cfg.lipschitz_hess, scale);
      sol.grad_norm = grad.norm();
    }
    if (sol.grad_norm <= cfg.grad_tol && !perturbed) {
      sol.converged = true;
      break;
    }
    if (k + 1 == cfg.max_iters) break;  // keep the v whose Hv is known
    sol.v -= cfg.solver_step * grad;
  }
  if (perturbed) {
    grad = cubic_model_gradient(g, sol.v, hv, cfg.lipschitz_hess, scale);
    sol.grad_norm = grad.norm();
  }
  sol.model_value = cubic_model_value(g, sol.v, hv, cfg.lipschitz_hess, scale);
  return sol;
}

HfoResult cubic_descent(OracleContext& ctx, const Vector& x, const CubicDescentConfig& cfg,
                        const PointEval* at_x) {
  require_point(ctx, x);
  PointEval local;
  if (!at_x) {
    local = ctx.full_grad(x);
    at_x = &local;
  }
  auto sub = cfg.subproblem;
  const double lip = ctx.spec().lipschitz_grad;
  sub.init_scale = std::min(1.0 / lip, 1.0);
  auto hvp = [&](const Vector& v, Vector& out) { ctx.full_hvp(x, v, out); };
  const CubicSolution sol = cubic_subproblem(at_x->grad, hvp, sub, cfg.seed);
  HfoResult res = argmin_step(ctx, x, at_x->value, x + sol.v);
  res.solver_iterations = sol.iterations;
  return res;
}

void DiagScaleState::update(const Vector& g) {
  if (s.size() == 0) s = Vector::Zero(g.size());
  if (s.size() != g.size()) throw ContractViolation("diagonal scale has wrong dimension");
  const Vector a = g.cwiseAbs();
  s = beta * s + (1.0 - beta) * (a.cwiseProduct(a).cwiseProduct(a) + 2.0 * a.cwiseProduct(a));
}

Vector DiagScaleState::scale() const {
  return (s.array() + floor).pow(exponent).matrix();
}

std::pair<HfoResult, DiagScaleState> approx_cubic_descent(OracleContext& ctx, const Vector& x,
                                                          const ApproxCubicConfig& cfg,
                                                          DiagScaleState state) {
  require_point(ctx, x);
  const std::size_t n = ctx.n();
  if (cfg.batch == 0 || cfg.batch > n) throw ContractViolation("approx cubic: batch must be in [1, n]");

  // Partial Fisher-Yates: the first `batch` entries are a uniform sample
  // without replacement.
  Rng rng = Rng::derive(cfg.seed, "approx-cubic-batch");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < cfg.batch; ++k) std::swap(idx[k], idx[k + rng.index(n - k)]);
  idx.resize(cfg.batch);

  Vector g;
  ctx.batch_grad(idx, x, g);
  state.update(g);
  const Vector scale = state.scale();

  auto sub = cfg.subproblem;
  sub.init_scale = std::min(1.0 / ctx.spec().lipschitz_grad, 1.0);
  auto hvp = [&](const Vector& v, Vector& out) { ctx.batch_hvp(idx, x, v, out); };
  const CubicSolution sol = cubic_subproblem(g, hvp, sub, cfg.seed, &scale);

  HfoResult res;
  res.y = x + sol.v;
  res.moved = sol.v.norm() > 0.0;
  res.solver_iterations = sol.iterations;
  if (cfg.monitor_descent) {
    res.f_x = ctx.monitor_value(x);
    res.f_y = ctx.monitor_value(res.y);
    res.h1_violation = res.f_y > res.f_x;
  } else {
    res.f_x = res.f_y = std::numeric_limits<double>::quiet_NaN();
  }
  return {std::move(res), std::move(state)};
}

CriticalityCheck check_second_order_critical(OracleContext& ctx, const Vector& x, double eps,
                                             double gamma, double rho, std::uint64_t seed,
                                             const EigenSearchConfig* base) {
  require_point(ctx, x);
  CriticalityCheck out;
  out.at_x = ctx.full_grad(x);
  out.grad_norm = out.at_x.grad.norm();
  if (out.grad_norm > eps) return out;
  EigenSearchConfig ec = base ? *base : EigenSearchConfig{};
  ec.gamma = gamma;
  ec.rho = rho;
  ec.seed = seed;
  out.certificate = min_eig_vector(ctx, x, ec);
  out.critical = out.certificate->rayleigh >= -gamma / 2.0;
  return out;
}

}  // namespace saddle
