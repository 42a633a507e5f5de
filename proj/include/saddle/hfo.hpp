#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>

#include "saddle/oracle.hpp"

namespace saddle {

// ---------------------------------------------------------------------------
// Negative-curvature search

struct EigenSearchConfig {
  double gamma = 0.1;  // target accuracy: v^T H v <= lambda_min + gamma / 2
  double rho = 0.9;    // success probability
  std::uint64_t seed = 0;
  /// Hard cap on power iterations per restart, on top of the analytic budget
  /// ceil((8/gamma) * c * ln(9 d e)).
  std::size_t max_iterations = 20000;
  /// A restart stops once one iteration lowers the Rayleigh quotient by less
  /// than stall_factor * gamma.
  double stall_factor = 1e-4;
  /// Shift c of the iteration matrix cI - H; defaults to the problem's
  /// curvature bound at x.
  std::optional<double> shift;

  void validate() const;
};

/// Unit direction of (estimated) most negative curvature.
struct CurvatureEstimate {
  Vector v;
  double rayleigh = 0.0;     // v^T Hess f(x) v, from one fresh full HVP
  std::size_t hvp_calls = 0; // full HVPs spent, including the final recompute
  double confidence = 0.0;   // rho when every restart converged, lower otherwise
  bool converged = false;
  std::size_t restarts = 0;
  std::size_t iteration_budget = 0;  // per-restart cap actually used
  double shift = 0.0;
};

/// Number of independent restarts for success probability rho:
/// ceil(ln(1 / (1 - rho))), at least 1.
std::size_t restart_count(double rho);

/// Per-restart power-iteration budget ceil((8/gamma) * shift * ln(9 d e)).
std::size_t power_iteration_budget(double gamma, double shift, std::size_t d);

/// Shifted power iteration on cI - Hess f(x) with seeded random restarts,
/// matrix-free. Each iteration is one full HVP (n ISO calls); the best
/// restart's Rayleigh quotient is recomputed once more at the end.
CurvatureEstimate min_eig_vector(OracleContext& ctx, const Vector& x, const EigenSearchConfig& cfg);

// ---------------------------------------------------------------------------
// Hessian-focused steps

enum class HfoStatus { halt, proceed };

struct HfoResult {
  Vector y;
  HfoStatus tau = HfoStatus::proceed;
  double f_x = 0.0;
  double f_y = 0.0;
  std::optional<CurvatureEstimate> certificate;
  /// |rayleigh|^3 / (3 M^2) when the certificate shows rayleigh <= -gamma/2.
  std::optional<double> descent_floor;
  bool moved = false;  // y differs from the input point
  std::size_t solver_iterations = 0;
  bool h1_violation = false;  // stochastic variants only: f(y) > f(x) was observed
};

struct HessianDescentConfig {
  double eps = 1e-3;
  double gamma = 0.0316;
  double lipschitz_hess = 1.0;  // M
  double rho = 0.9;
  std::uint64_t seed = 0;
  std::size_t max_eig_iterations = 20000;
  double stall_factor = 1e-4;

  EigenSearchConfig eigen_config() const;
  void validate() const;
};

/// One negative-curvature step: u = x - (|r|/M) sign(<v, grad f(x)>) v with
/// sign(0) = +1, then y = argmin{f(u), f(x)} (ties keep x). Always returns
/// proceed; certification is the caller's halt test.
///
/// `at_x` and `estimate` let a caller that already evaluated x hand over the
/// gradient and curvature estimate; both must belong to x.
HfoResult hessian_descent(OracleContext& ctx, const Vector& x, const HessianDescentConfig& cfg,
                          const PointEval* at_x = nullptr,
                          const CurvatureEstimate* estimate = nullptr);

struct CubicSubproblemConfig {
  double lipschitz_hess = 1.0;  // M of the model
  double solver_step = 1e-2;
  double grad_tol = 1e-3;
  std::size_t max_iters = 10000;
  /// v0 = -init_scale * g; cubic_descent uses min(1/L, 1).
  double init_scale = 1.0;
  /// Norm of the seeded kick added to v0 when ||g|| <= 1e-12.
  double perturbation = 1e-6;
  /// Size, in units of grad_tol, of the temporary linear term orthogonal to
  /// g that moves the solver off a saddle of the model; 0 disables it.
  double symmetry_break = 2.0;

  void validate() const;

  /// Synthetic-experiment profile: step 1e-2, tolerance 1e-3.
  static CubicSubproblemConfig small_profile(double lipschitz_hess);
  /// Large-instance profile: step 1e-3, tolerance 0.1.
  static CubicSubproblemConfig large_profile(double lipschitz_hess);
};

using HvpOperator = std::function<void(const Vector&, Vector&)>;

/// m(v) = <g, v> + 1/2 <v, Hv> + (M/6) ||D v||^3, with D = diag(scale) or I.
double cubic_model_value(const Vector& g, const Vector& v, const Vector& hv, double lipschitz_hess,
                         const Vector* scale = nullptr);
/// grad m(v) = g + Hv + (M/2) ||D v|| D^2 v.
Vector cubic_model_gradient(const Vector& g, const Vector& v, const Vector& hv,
                            double lipschitz_hess, const Vector* scale = nullptr);

struct CubicSolution {
  Vector v;
  double model_value = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;  // == number of HVP applications
  bool converged = false;
};

/// Fixed-step gradient descent on the cubic model, stopping when
/// ||grad m|| <= grad_tol or after max_iters HVPs. The reported grad_norm
/// always refers to the unperturbed model.
CubicSolution cubic_subproblem(const Vector& g, const HvpOperator& hvp,
                               const CubicSubproblemConfig& cfg, std::uint64_t seed,
                               const Vector* scale = nullptr);

struct CubicDescentConfig {
  CubicSubproblemConfig subproblem;
  std::uint64_t seed = 0;
};

/// Full-batch cubic-regularized step with an argmin guard on {x + v, x}.
HfoResult cubic_descent(OracleContext& ctx, const Vector& x, const CubicDescentConfig& cfg,
                        const PointEval* at_x = nullptr);

/// Adaptive diagonal scaling for the minibatch cubic model:
/// s <- beta s + (1 - beta)(|g|^3 + 2 g^2), D = (s + floor)^exponent.
struct DiagScaleState {
  Vector s;
  double beta = 0.9;
  double floor = 1e-12;
  double exponent = 1.0 / 9.0;

  void update(const Vector& g);
  Vector scale() const;
};

struct ApproxCubicConfig {
  std::size_t batch = 1;
  CubicSubproblemConfig subproblem;
  bool monitor_descent = true;  // uncounted f(x), f(y) to flag H.1 violations
  std::uint64_t seed = 0;
};

/// Minibatch cubic step with diagonal scaling; the step is applied
/// unconditionally.
std::pair<HfoResult, DiagScaleState> approx_cubic_descent(OracleContext& ctx, const Vector& x,
                                                          const ApproxCubicConfig& cfg,
                                                          DiagScaleState scale);

// ---------------------------------------------------------------------------

struct CriticalityCheck {
  bool critical = false;
  PointEval at_x;
  double grad_norm = 0.0;
  std::optional<CurvatureEstimate> certificate;  // absent when the gradient test failed
};

/// ||grad f(x)|| <= eps (n IFO) and, only if that holds, a curvature
/// estimate with rayleigh >= -gamma/2. Given the estimator's gamma/2
/// accuracy this certifies Hess f(x) >= -gamma I with probability rho.
CriticalityCheck check_second_order_critical(OracleContext& ctx, const Vector& x, double eps,
                                             double gamma, double rho, std::uint64_t seed,
                                             const EigenSearchConfig* base = nullptr);

}  // namespace saddle
