#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Core>

namespace saddle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Sizes and smoothness constants of a finite-sum problem f = (1/n) sum_i f_i.
struct ProblemSpec {
  std::size_t n = 1;
  std::size_t d = 1;
  double lipschitz_grad = 1.0;  // L: every f_i is L-smooth
  double lipschitz_hess = 1.0;  // M: Hessian of f is M-Lipschitz
  std::optional<double> lower_bound_hint;

  /// Throws ContractViolation unless n, d >= 1 and L, M > 0.
  void validate() const;
};

/// A finite sum of n smooth components over R^d.
///
/// Components are addressed 0-based. Implementations must be pure: outputs
/// depend only on the arguments, so they may be called concurrently.
class FiniteSumProblem {
 public:
  virtual ~FiniteSumProblem() = default;

  virtual const ProblemSpec& spec() const = 0;
  virtual std::string name() const = 0;

  /// Returns f_i(x) and writes grad f_i(x) into `grad` (resized as needed).
  virtual double component(std::size_t i, const Vector& x, Vector& grad) const = 0;

  /// Writes Hess f_i(x) * v into `out`.
  virtual void component_hvp(std::size_t i, const Vector& x, const Vector& v,
                             Vector& out) const = 0;

  /// Upper bound on the spectral norm of Hess f(x). Used as the shift of the
  /// negative-curvature search; L is always valid, problems may do better.
  virtual double curvature_bound(const Vector& /*x*/) const { return spec().lipschitz_grad; }

  std::size_t n() const { return spec().n; }
  std::size_t dim() const { return spec().d; }
};

/// Plain copy of the counters at one instant.
struct CounterSnapshot {
  std::uint64_t ifo = 0;
  std::uint64_t iso = 0;
  std::uint64_t wall_nanos = 0;

  std::uint64_t oracle_units() const { return ifo + iso; }
};

/// Running tallies for one run. Increments are atomic so oracle calls may be
/// issued from several threads against the same context.
class OracleCounters {
 public:
  OracleCounters();

  void add_ifo(std::uint64_t k) { ifo_.fetch_add(k, std::memory_order_relaxed); }
  void add_iso(std::uint64_t k) { iso_.fetch_add(k, std::memory_order_relaxed); }

  std::uint64_t ifo_calls() const { return ifo_.load(std::memory_order_relaxed); }
  std::uint64_t iso_calls() const { return iso_.load(std::memory_order_relaxed); }
  std::uint64_t wall_nanos() const;

  CounterSnapshot snapshot() const;

 private:
  std::atomic<std::uint64_t> ifo_{0};
  std::atomic<std::uint64_t> iso_{0};
  std::chrono::steady_clock::time_point start_;
};

/// Function value and gradient at a point.
struct PointEval {
  double value = 0.0;
  Vector grad;
};

/// Per-run gateway to a problem. Every counted oracle access goes through
/// here; optimizers never call FiniteSumProblem directly.
///
/// The `monitor_*` methods evaluate f for traces and reporting without
/// touching the counters.
class OracleContext {
 public:
  explicit OracleContext(const FiniteSumProblem& problem);

  OracleContext(const OracleContext&) = delete;
  OracleContext& operator=(const OracleContext&) = delete;

  const FiniteSumProblem& problem() const { return problem_; }
  const ProblemSpec& spec() const { return problem_.spec(); }
  std::size_t n() const { return problem_.n(); }
  std::size_t dim() const { return problem_.dim(); }

  /// One IFO call: (f_i(x), grad f_i(x)).
  double ifo(std::size_t i, const Vector& x, Vector& grad);
  PointEval ifo(std::size_t i, const Vector& x);

  /// One ISO call: Hess f_i(x) v.
  void iso(std::size_t i, const Vector& x, const Vector& v, Vector& out);
  Vector iso(std::size_t i, const Vector& x, const Vector& v);

  /// Average over all components in ascending index order; n IFO calls.
  double full_grad(const Vector& x, Vector& grad);
  PointEval full_grad(const Vector& x);

  /// Average HVP over all components in ascending index order; n ISO calls.
  void full_hvp(const Vector& x, const Vector& v, Vector& out);
  Vector full_hvp(const Vector& x, const Vector& v);

  /// Minibatch averages; |batch| IFO / ISO calls, summed in the given order.
  double batch_grad(std::span<const std::size_t> batch, const Vector& x, Vector& grad);
  void batch_hvp(std::span<const std::size_t> batch, const Vector& x, const Vector& v,
                 Vector& out);

  /// Uncounted full evaluations for monitoring.
  PointEval monitor_eval(const Vector& x) const;
  double monitor_value(const Vector& x) const;

  OracleCounters& counters() { return counters_; }
  const OracleCounters& counters() const { return counters_; }
  CounterSnapshot snapshot() const { return counters_.snapshot(); }

 private:
  void check_point(const Vector& x, const char* what) const;
  void check_index(std::size_t i) const;

  const FiniteSumProblem& problem_;
  OracleCounters counters_;
  Vector scratch_;
};

/// Relative discrepancy between full_hvp and a central finite difference of
/// full_grad along v: ||Hv - fd|| / max(1, ||fd||). Without `h` the step is
/// 1e-5 * max(1, ||x||) / ||v||.
double check_hvp(OracleContext& ctx, const Vector& x, const Vector& v,
                 std::optional<double> h = std::nullopt);

double default_fd_step(const Vector& x, const Vector& v);

}  // namespace saddle
