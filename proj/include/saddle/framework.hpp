#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "saddle/gfo.hpp"
#include "saddle/hfo.hpp"
#include "saddle/oracle.hpp"
#include "saddle/trace.hpp"

namespace saddle {

/// monostate disables the stage: no GFO means u = x, no HFO means x = u.
using GfoChoice = std::variant<std::monostate, SvrgConfig, GdConfig, SgdConfig, AdamConfig>;
using HfoChoice =
    std::variant<std::monostate, HessianDescentConfig, CubicDescentConfig, ApproxCubicConfig>;

/// Limits checked between subroutine invocations, so a run overshoots by at
/// most one invocation.
struct Budget {
  std::optional<std::uint64_t> max_ifo;
  std::optional<std::uint64_t> max_iso;
  std::optional<double> max_wall_seconds;

  bool exhausted(const CounterSnapshot& c) const;
};

struct MixConfig {
  std::size_t T = 1;
  double eps = 1e-3;
  std::optional<double> gamma;  // default sqrt(eps)
  std::optional<double> p;      // default from default_p
  double rho = 0.9;
  /// M handed to the HFO; defaults to the problem's recorded constant.
  std::optional<double> lipschitz_hess;
  std::uint64_t seed = 0;
  GfoChoice gfo;
  HfoChoice hfo;
  std::size_t k = 1;
  /// Certify u before each HFO call and halt when it passes.
  bool halt_check = true;
  Budget budget;
  bool record_wall_time = false;  // otherwise wall_ns is written as 0
  bool gfo_inner_rows = true;     // copy the GFO's own trace points into the run trace

  double resolved_gamma() const;
  void validate() const;
};

struct OuterRecord {
  std::size_t t = 0;
  bool used_y = false;
  double f_prev = 0.0;  // f(x^{t-1})
  double f_u = 0.0;
  double f_next = 0.0;  // f(x^t)
  double grad_norm_u = 0.0;
  bool hfo_ran = false;
  bool hfo_moved = false;
  std::optional<double> rayleigh;
  std::optional<double> descent_floor;
  bool h1_violation = false;
  CounterSnapshot counters;
};

struct MixRunResult {
  std::vector<Vector> output_set;
  bool halted_early = false;
  bool budget_exhausted = false;
  Vector final_x;
  double final_f = 0.0;
  double p = 0.0;
  double gamma = 0.0;
  std::vector<std::pair<std::size_t, Vector>> samples;
  std::vector<OuterRecord> outer;
  std::vector<TraceRow> trace;
  CounterSnapshot counters;
};

/// Algorithm 1. The halt test runs at u^t before the HFO; its gradient and
/// curvature estimate are reused by HessianDescent at the same point.
MixRunResult mix_run(OracleContext& ctx, const Vector& x0, const MixConfig& cfg);

/// g(n, eps) = T_g / (40 L n^(2/3)).
double gfo_rate(std::size_t n, double lipschitz_grad, std::size_t inner_iterations);
/// h(n, eps, gamma) = rho gamma^3 / (24 M^2).
double hfo_rate(double gamma, double lipschitz_hess, double rho);

/// 1/p = 1/(eps^2 g) + 1/h, clamped to [1e-6, 1 - 1e-6].
double default_p(std::size_t n, double eps, double gamma, double lipschitz_grad,
                 double lipschitz_hess, double rho, std::size_t inner_iterations);

/// min((1 - p) eps^2 g, p h).
double theta(double p, double eps, double g_val, double h_val);

/// Smallest integer T with T > delta / theta.
std::size_t min_outer_iterations(double delta, double theta_val);

/// ceil(log(1/zeta) / min(log(T theta / delta), log(1/q))), at least 1.
std::size_t recommended_k(double delta, std::size_t T, double theta_val, double q, double zeta);

/// k i.i.d. uniform draws (with replacement) from the output set.
std::vector<std::pair<std::size_t, Vector>> sample_outputs(const std::vector<Vector>& output_set,
                                                           std::size_t k, std::uint64_t seed);

}  // namespace saddle
