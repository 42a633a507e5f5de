#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "saddle/oracle.hpp"

namespace saddle {

/// One sampled point of an optimizer's progress.
struct TracePoint {
  std::size_t iteration = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  CounterSnapshot counters;
};

/// Output of a gradient-focused run: y is a uniformly sampled inner iterate,
/// z the final iterate. f_y and f_z come from uncounted evaluations.
struct GfoResult {
  Vector y;
  Vector z;
  double f_y = 0.0;
  double f_z = 0.0;
  std::size_t iterations = 0;
  std::vector<TracePoint> trace;
};

/// Called with (t, x_t) for every inner iterate before it is updated.
using IterateObserver = std::function<void(std::size_t, const Vector&)>;

struct SvrgConfig {
  std::size_t epoch_length = 1;      // m
  double step_size = 0.0;            // eta, constant within a run
  std::size_t inner_iterations = 1;  // T_g; epochs S = ceil(T_g / m)
  std::size_t batch = 1;             // indices per inner step
  std::uint64_t seed = 0;
  IterateObserver observer;

  /// m = n, eta = 1 / (4 L n^(2/3)), T_g = ceil(40 L n^(2/3) / sqrt(eps)).
  static SvrgConfig paper_defaults(std::size_t n, double lipschitz_grad, double eps,
                                   std::uint64_t seed = 0);
  void validate() const;
};

/// g(n, eps) = T_g / (40 L n^(2/3)), the rate constant of the SVRG contract.
double svrg_rate(std::size_t n, double lipschitz_grad, std::size_t inner_iterations);

/// Variance-reduced direction
///   (1/|B|) sum_{i in B} [grad f_i(x) - grad f_i(snapshot)] + snapshot_grad.
/// Costs 2|B| IFO calls.
void svrg_direction(OracleContext& ctx, std::span<const std::size_t> batch, const Vector& x,
                    const Vector& snapshot, const Vector& snapshot_grad, Vector& out);

/// Epoch-based SVRG. Each epoch takes one full gradient at the snapshot
/// (n IFO) followed by inner steps of 2*batch IFO each; the final epoch is
/// truncated so exactly T_g inner steps run. Total cost:
/// ceil(T_g/m) * n + 2 * batch * T_g IFO calls, no ISO calls.
GfoResult svrg_run(OracleContext& ctx, const Vector& x0, const SvrgConfig& cfg);

struct GdConfig {
  double step_size = 0.0;
  std::size_t iterations = 1;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Full-batch gradient descent, n IFO per iteration.
GfoResult gd_run(OracleContext& ctx, const Vector& x0, const GdConfig& cfg);

struct SgdConfig {
  double step_size = 0.0;
  std::size_t batch = 1;
  std::size_t iterations = 1;
  std::uint64_t seed = 0;
  std::size_t trace_every = 0;  // uncounted full evaluation every k iterations; 0 = off
  void validate(std::size_t n) const;
};

/// Minibatch SGD with replacement; batch == n runs a full ordered pass.
GfoResult sgd_run(OracleContext& ctx, const Vector& x0, const SgdConfig& cfg);

struct AdamConfig {
  double alpha = 1e-3;
  double epsilon = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t batch = 1;
  std::size_t iterations = 1;
  std::uint64_t seed = 0;
  std::size_t trace_every = 0;
  void validate(std::size_t n) const;
};

/// Moment estimates carried between consecutive Adam calls.
struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::uint64_t steps = 0;
};

/// Bias-corrected Adam on minibatch gradients. With `state` the moments
/// persist across calls; otherwise each call starts fresh.
GfoResult adam_run(OracleContext& ctx, const Vector& x0, const AdamConfig& cfg,
                   AdamState* state = nullptr);

}  // namespace saddle
