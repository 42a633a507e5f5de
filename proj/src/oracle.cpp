#include "saddle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "saddle/errors.hpp"

namespace saddle {

void ProblemSpec::validate() const {
  if (n < 1 || d < 1) throw ContractViolation("ProblemSpec: n and d must be positive");
  if (!(lipschitz_grad > 0.0) || !(lipschitz_hess > 0.0))
    throw ContractViolation("ProblemSpec: L and M must be positive");
}

OracleCounters::OracleCounters() : start_(std::chrono::steady_clock::now()) {}

std::uint64_t OracleCounters::wall_nanos() const {
  const auto elapsed = std::chrono::steady_clock::now() - start_;
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(elapsed).count());
}

CounterSnapshot OracleCounters::snapshot() const {
  return CounterSnapshot{ifo_calls(), iso_calls(), wall_nanos()};
}

OracleContext::OracleContext(const FiniteSumProblem& problem) : problem_(problem) {
  problem_.spec().validate();
}

void OracleContext::check_index(std::size_t i) const {
  if (i >= n()) {
    std::ostringstream msg;
    msg << "component index " << i << " out of range [0, " << n() << ")";
    throw ContractViolation(msg.str());
  }
}

void OracleContext::check_point(const Vector& x, const char* what) const {
  if (static_cast<std::size_t>(x.size()) != dim()) {
    std::ostringstream msg;
    msg << what << " has length " << x.size() << ", problem dimension is " << dim();
    throw ContractViolation(msg.str());
  }
}

double OracleContext::ifo(std::size_t i, const Vector& x, Vector& grad) {
  check_index(i);
  check_point(x, "point");
  counters_.add_ifo(1);
  const double value = problem_.component(i, x, grad);
  if (!std::isfinite(value) || !grad.allFinite()) {
    throw NumericError("non-finite IFO output at component " + std::to_string(i),
                       NumericError::Where::component, i);
  }
  return value;
}

PointEval OracleContext::ifo(std::size_t i, const Vector& x) {
  PointEval out;
  out.value = ifo(i, x, out.grad);
  return out;
}

void OracleContext::iso(std::size_t i, const Vector& x, const Vector& v, Vector& out) {
  check_index(i);
  check_point(x, "point");
  check_point(v, "direction");
  counters_.add_iso(1);
  problem_.component_hvp(i, x, v, out);
  if (!out.allFinite()) {
    throw NumericError("non-finite ISO output at component " + std::to_string(i),
                       NumericError::Where::component, i);
  }
}

Vector OracleContext::iso(std::size_t i, const Vector& x, const Vector& v) {
  Vector out;
  iso(i, x, v, out);
  return out;
}

double OracleContext::full_grad(const Vector& x, Vector& grad) {
  check_point(x, "point");
  const std::size_t count = n();
  grad.setZero(x.size());
  double value = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    value += ifo(i, x, scratch_);
    grad += scratch_;
  }
  grad /= static_cast<double>(count);
  return value / static_cast<double>(count);
}

PointEval OracleContext::full_grad(const Vector& x) {
  PointEval out;
  out.value = full_grad(x, out.grad);
  return out;
}

void OracleContext::full_hvp(const Vector& x, const Vector& v, Vector& out) {
  check_point(x, "point");
  check_point(v, "direction");
  const std::size_t count = n();
  out.setZero(x.size());
  for (std::size_t i = 0; i < count; ++i) {
    iso(i, x, v, scratch_);
    out += scratch_;
  }
  out /= static_cast<double>(count);
}

Vector OracleContext::full_hvp(const Vector& x, const Vector& v) {
  Vector out;
  full_hvp(x, v, out);
  return out;
}

double OracleContext::batch_grad(std::span<const std::size_t> batch, const Vector& x,
                                 Vector& grad) {
  if (batch.empty()) throw ContractViolation("batch_grad: empty batch");
  check_point(x, "point");
  grad.setZero(x.size());
  double value = 0.0;
  for (std::size_t i : batch) {
    value += ifo(i, x, scratch_);
    grad += scratch_;
  }
  grad /= static_cast<double>(batch.size());
  return value / static_cast<double>(batch.size());
}

void OracleContext::batch_hvp(std::span<const std::size_t> batch, const Vector& x,
                              const Vector& v, Vector& out) {
  if (batch.empty()) throw ContractViolation("batch_hvp: empty batch");
  check_point(x, "point");
  check_point(v, "direction");
  out.setZero(x.size());
  for (std::size_t i : batch) {
    iso(i, x, v, scratch_);
    out += scratch_;
  }
  out /= static_cast<double>(batch.size());
}

PointEval OracleContext::monitor_eval(const Vector& x) const {
  check_point(x, "point");
  PointEval out;
  out.grad.setZero(x.size());
  Vector g;
  double value = 0.0;
  for (std::size_t i = 0; i < n(); ++i) {
    value += problem_.component(i, x, g);
    out.grad += g;
  }
  out.grad /= static_cast<double>(n());
  out.value = value / static_cast<double>(n());
  return out;
}

double OracleContext::monitor_value(const Vector& x) const { return monitor_eval(x).value; }

double default_fd_step(const Vector& x, const Vector& v) {
  return 1e-5 * std::max(1.0, x.norm()) / v.norm();
}

double check_hvp(OracleContext& ctx, const Vector& x, const Vector& v,
                 std::optional<double> step) {
  if (v.size() == 0 || v.norm() == 0.0) throw ContractViolation("check_hvp: zero direction");
  if (step && !(*step > 0.0)) throw ContractViolation("check_hvp: step must be positive");
  const double h = step ? *step : default_fd_step(x, v);
  const Vector hv = ctx.full_hvp(x, v);
  Vector g_plus, g_minus;
  ctx.full_grad(x + h * v, g_plus);
  ctx.full_grad(x - h * v, g_minus);
  const Vector fd = (g_plus - g_minus) / (2.0 * h);
  return (hv - fd).norm() / std::max(1.0, fd.norm());
}

}  // namespace saddle
