#include "saddle/gfo.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "saddle/errors.hpp"
#include "saddle/rng.hpp"

namespace saddle {

namespace {

// Keeps one uniformly chosen element of the offered stream in O(d) memory.
class ReservoirSampler {
 public:
  explicit ReservoirSampler(Rng rng) : rng_(std::move(rng)) {}

  void offer(const Vector& candidate) {
    ++seen_;
    if (seen_ == 1 || rng_.index(seen_) == 0) chosen_ = candidate;
  }
  const Vector& chosen() const { return chosen_; }
  std::size_t seen() const { return seen_; }

 private:
  Rng rng_;
  std::size_t seen_ = 0;
  Vector chosen_;
};

void require_finite(const Vector& x, std::size_t iteration) {
  if (!x.allFinite()) {
    throw NumericError("non-finite iterate at iteration " + std::to_string(iteration),
                       NumericError::Where::iteration, iteration);
  }
}

void require_dimension(const OracleContext& ctx, const Vector& x0) {
  if (static_cast<std::size_t>(x0.size()) != ctx.dim())
    throw ContractViolation("start point has wrong dimension");
}

void finish(OracleContext& ctx, GfoResult& out, const ReservoirSampler& sampler, Vector z) {
  out.z = std::move(z);
  out.y = sampler.seen() ? sampler.chosen() : out.z;
  out.f_y = ctx.monitor_value(out.y);
  out.f_z = ctx.monitor_value(out.z);
}

void sample_with_replacement(Rng& rng, std::size_t n, std::vector<std::size_t>& batch) {
  for (auto& i : batch) i = rng.index(n);
}

}  // namespace

SvrgConfig SvrgConfig::paper_defaults(std::size_t n, double lipschitz_grad, double eps,
                                      std::uint64_t seed) {
  if (!(eps > 0.0) || !(lipschitz_grad > 0.0) || n == 0)
    throw ContractViolation("SvrgConfig::paper_defaults: need n >= 1, L > 0, eps > 0");
  const double n23 = std::cbrt(static_cast<double>(n) * static_cast<double>(n));
  SvrgConfig cfg;
  cfg.epoch_length = n;
  cfg.step_size = 1.0 / (4.0 * lipschitz_grad * n23);
  cfg.inner_iterations = static_cast<std::size_t>(std::ceil(40.0 * lipschitz_grad * n23 / std::sqrt(eps)));
  cfg.seed = seed;
  return cfg;
}

void SvrgConfig::validate() const {
  if (epoch_length == 0) throw ContractViolation("SVRG: epoch length must be positive");
  if (!(step_size > 0.0)) throw ContractViolation("SVRG: step size must be positive");
  if (inner_iterations == 0) throw ContractViolation("SVRG: T_g must be positive");
  if (batch == 0) throw ContractViolation("SVRG: batch must be positive");
}

double svrg_rate(std::size_t n, double lipschitz_grad, std::size_t inner_iterations) {
  const double n23 = std::cbrt(static_cast<double>(n) * static_cast<double>(n));
  return static_cast<double>(inner_iterations) / (40.0 * lipschitz_grad * n23);
}

void svrg_direction(OracleContext& ctx, std::span<const std::size_t> batch, const Vector& x,
                    const Vector& snapshot, const Vector& snapshot_grad, Vector& out) {
  out.setZero(x.size());
  Vector g_x, g_snap;
  for (std::size_t i : batch) {
    ctx.ifo(i, x, g_x);
    ctx.ifo(i, snapshot, g_snap);
    out += g_x - g_snap;
  }
  out /= static_cast<double>(batch.size());
  out += snapshot_grad;
}

GfoResult svrg_run(OracleContext& ctx, const Vector& x0, const SvrgConfig& cfg) {
  cfg.validate();
  require_dimension(ctx, x0);
  if (cfg.batch > ctx.n()) throw ContractViolation("SVRG: batch larger than n");

  Rng index_rng = Rng::derive(cfg.seed, "svrg-index");
  ReservoirSampler sampler(Rng::derive(cfg.seed, "svrg-output"));

  GfoResult out;
  Vector x = x0;
  Vector snapshot, snapshot_grad, direction;
  std::vector<std::size_t> batch(cfg.batch);
  std::size_t t = 0;
  const std::size_t epochs = (cfg.inner_iterations + cfg.epoch_length - 1) / cfg.epoch_length;
  for (std::size_t s = 0; s < epochs; ++s) {
    snapshot = x;
    const double f_snapshot = ctx.full_grad(snapshot, snapshot_grad);
    out.trace.push_back({t, f_snapshot, snapshot_grad.norm(), ctx.snapshot()});
    const std::size_t steps = std::min(cfg.epoch_length, cfg.inner_iterations - t);
    for (std::size_t k = 0; k < steps; ++k, ++t) {
      sampler.offer(x);
      if (cfg.observer) cfg.observer(t, x);
      sample_with_replacement(index_rng, ctx.n(), batch);
      svrg_direction(ctx, batch, x, snapshot, snapshot_grad, direction);
      x -= cfg.step_size * direction;
      require_finite(x, t);
    }
  }
  out.iterations = t;
  finish(ctx, out, sampler, std::move(x));
  return out;
}

void GdConfig::validate() const {
  if (!(step_size > 0.0)) throw ContractViolation("GD: step must be positive");
  if (iterations == 0) throw ContractViolation("GD: iterations must be positive");
}

GfoResult gd_run(OracleContext& ctx, const Vector& x0, const GdConfig& cfg) {
  cfg.validate();
  require_dimension(ctx, x0);
  ReservoirSampler sampler(Rng::derive(cfg.seed, "gd-output"));
  GfoResult out;
  Vector x = x0;
  Vector grad;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const double f = ctx.full_grad(x, grad);
    out.trace.push_back({t, f, grad.norm(), ctx.snapshot()});
    sampler.offer(x);
    x -= cfg.step_size * grad;
    require_finite(x, t);
  }
  out.iterations = cfg.iterations;
  finish(ctx, out, sampler, std::move(x));
  return out;
}

void SgdConfig::validate(std::size_t n) const {
  if (!(step_size > 0.0)) throw ContractViolation("SGD: step must be positive");
  if (batch == 0 || batch > n) throw ContractViolation("SGD: batch must lie in [1, n]");
  if (iterations == 0) throw ContractViolation("SGD: iterations must be positive");
}

GfoResult sgd_run(OracleContext& ctx, const Vector& x0, const SgdConfig& cfg) {
  cfg.validate(ctx.n());
  require_dimension(ctx, x0);
  Rng index_rng = Rng::derive(cfg.seed, "sgd-index");
  ReservoirSampler sampler(Rng::derive(cfg.seed, "sgd-output"));
  const bool full_pass = cfg.batch == ctx.n();
  std::vector<std::size_t> batch(cfg.batch);
  if (full_pass) std::iota(batch.begin(), batch.end(), std::size_t{0});

  GfoResult out;
  Vector x = x0;
  Vector grad;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    if (cfg.trace_every && t % cfg.trace_every == 0) {
      const PointEval e = ctx.monitor_eval(x);
      out.trace.push_back({t, e.value, e.grad.norm(), ctx.snapshot()});
    }
    sampler.offer(x);
    if (!full_pass) sample_with_replacement(index_rng, ctx.n(), batch);
    ctx.batch_grad(batch, x, grad);
    x -= cfg.step_size * grad;
    require_finite(x, t);
  }
  out.iterations = cfg.iterations;
  finish(ctx, out, sampler, std::move(x));
  return out;
}

void AdamConfig::validate(std::size_t n) const {
  if (!(alpha > 0.0) || !(epsilon > 0.0)) throw ContractViolation("Adam: alpha and eps must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ContractViolation("Adam: betas must lie in [0, 1)");
  if (batch == 0 || batch > n) throw ContractViolation("Adam: batch must lie in [1, n]");
  if (iterations == 0) throw ContractViolation("Adam: iterations must be positive");
}

GfoResult adam_run(OracleContext& ctx, const Vector& x0, const AdamConfig& cfg, AdamState* state) {
  cfg.validate(ctx.n());
  require_dimension(ctx, x0);
  AdamState local;
  AdamState& st = state ? *state : local;
  if (st.first_moment.size() != x0.size()) {
    st.first_moment = Vector::Zero(x0.size());
    st.second_moment = Vector::Zero(x0.size());
    st.steps = 0;
  }
  Rng index_rng = Rng::derive(cfg.seed, "adam-index");
  ReservoirSampler sampler(Rng::derive(cfg.seed, "adam-output"));
  const bool full_pass = cfg.batch == ctx.n();
  std::vector<std::size_t> batch(cfg.batch);
  if (full_pass) std::iota(batch.begin(), batch.end(), std::size_t{0});

  GfoResult out;
  Vector x = x0;
  Vector grad;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    if (cfg.trace_every && t % cfg.trace_every == 0) {
      const PointEval e = ctx.monitor_eval(x);
      out.trace.push_back({t, e.value, e.grad.norm(), ctx.snapshot()});
    }
    sampler.offer(x);
    if (!full_pass) sample_with_replacement(index_rng, ctx.n(), batch);
    ctx.batch_grad(batch, x, grad);
    ++st.steps;
    st.first_moment = cfg.beta1 * st.first_moment + (1.0 - cfg.beta1) * grad;
    st.second_moment = cfg.beta2 * st.second_moment + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    const double k = static_cast<double>(st.steps);
    const double c1 = 1.0 - std::pow(cfg.beta1, k);
    const double c2 = 1.0 - std::pow(cfg.beta2, k);
    x.array() -= cfg.alpha * (st.first_moment.array() / c1) /
                 ((st.second_moment.array() / c2).sqrt() + cfg.epsilon);
    require_finite(x, t);
  }
  out.iterations = cfg.iterations;
  finish(ctx, out, sampler, std::move(x));
  return out;
}

}  // namespace saddle
