#include <doctest.h>

#include <map>

#include "saddle/errors.hpp"
#include "saddle/framework.hpp"
#include "saddle/problems.hpp"
#include "saddle/rng.hpp"
#include "stats.hpp"

using namespace saddle;

namespace {

MixConfig gd_hd(double step, std::size_t gd_iters, std::size_t T, double gamma, double M) {
  MixConfig cfg;
  cfg.T = T;
  cfg.eps = 1e-6;
  cfg.gamma = gamma;
  cfg.lipschitz_hess = M;
  GdConfig gd;
  gd.step_size = step;
  gd.iterations = gd_iters;
  cfg.gfo = gd;
  cfg.hfo = HessianDescentConfig{};
  cfg.halt_check = false;
  return cfg;
}

}  // namespace

TEST_CASE("p = 1 follows y, p = 0 follows z") {
  SeparableQuadratic q(Vector::LinSpaced(3, 0.5, 1.5), 4);
  const Vector x0 = Vector::Constant(3, 1.0);
  for (double p : {0.0, 1.0}) {
    MixConfig cfg;
    cfg.T = 4;
    cfg.p = p;
    cfg.seed = 11;
    cfg.halt_check = false;
    GdConfig gd;
    gd.step_size = 0.5;
    gd.iterations = 5;
    cfg.gfo = gd;
    OracleContext ctx(q);
    const MixRunResult r = mix_run(ctx, x0, cfg);
    REQUIRE(r.outer.size() == 4);

    // replay the GFO by hand with the same derived seeds
    OracleContext replay(q);
    Vector x = x0;
    for (std::size_t t = 1; t <= 4; ++t) {
      GdConfig c = gd;
      c.seed = mix_seed(11, "gfo", t);
      const GfoResult g = gd_run(replay, x, c);
      CHECK(r.outer[t - 1].used_y == (p == 1.0));
      CHECK(r.output_set[t - 1] == g.y);
      x = p == 1.0 ? g.y : g.z;
      CHECK(r.outer[t - 1].f_u == replay.monitor_value(x));
    }
    CHECK(r.final_x == x);
  }
}

TEST_CASE("halt at the first outer iteration") {
  SeparableQuadratic q(Vector::LinSpaced(3, 1.0, 2.0), 2);
  OracleContext ctx(q);
  MixConfig cfg;
  cfg.T = 10;
  cfg.eps = 1e-3;
  GdConfig gd;
  gd.step_size = 0.5;
  gd.iterations = 60;
  cfg.gfo = gd;
  cfg.hfo = HessianDescentConfig{};
  cfg.p = 0.0;
  const MixRunResult r = mix_run(ctx, Vector::Constant(3, 0.1), cfg);
  CHECK(r.halted_early);
  CHECK(r.outer.size() == 1);
  REQUIRE(r.output_set.size() == 1);
  CHECK(r.output_set[0] == r.final_x);
  CHECK_FALSE(r.outer[0].hfo_ran);
}

TEST_CASE("GD is stuck at the 2-D saddle, HessianDescent escapes") {
  SaddleToy2D s(2, 1.0);
  {
    OracleContext ctx(s);
    GdConfig gd;
    gd.step_size = 0.5;
    gd.iterations = 50;
    const GfoResult g = gd_run(ctx, Vector::Zero(2), gd);
    CHECK(g.z == Vector::Zero(2));
  }
  OracleContext ctx(s);
  MixConfig cfg = gd_hd(0.5, 10, 5, 0.5, 1.0);
  const MixRunResult r = mix_run(ctx, Vector::Zero(2), cfg);
  CHECK(r.final_f <= -0.4);
  REQUIRE(!r.outer.empty());
  CHECK(r.outer[0].f_next == doctest::Approx(-0.5));
  CHECK(std::abs(r.outer[0].f_next + 0.5) <= 1e-12);
}

TEST_CASE("deterministic GD + HessianDescent never increases f") {
  for (const auto& np : shipped_problems()) {
    const auto d = static_cast<Eigen::Index>(np.problem->dim());
    const double L = np.problem->spec().lipschitz_grad;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      OracleContext ctx(*np.problem);
      MixConfig cfg = gd_hd(1.0 / L, 5, 6, 0.05, np.problem->spec().lipschitz_hess);
      cfg.seed = seed;
      cfg.p = 0.0;
      const Vector x0 = Rng::derive(seed, "fw-start").uniform_vector(d, -0.3, 0.3);
      const MixRunResult r = mix_run(ctx, x0, cfg);
      for (const auto& rec : r.outer) {
        INFO(np.name << " seed " << seed << " t " << rec.t);
        CHECK(rec.f_u <= rec.f_prev);
        CHECK(rec.f_next <= rec.f_u);
      }
    }
  }
}

TEST_CASE("SVRG + HessianDescent does not increase f on average") {
  SeparableQuadratic q(Vector::LinSpaced(4, -0.2, 1.0), 20, 0.3, 0.05, 1);
  std::vector<double> diffs;
  const Vector x0 = Vector::Constant(4, 0.2);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    OracleContext ctx(q);
    MixConfig cfg;
    cfg.T = 3;
    cfg.eps = 1e-6;
    cfg.gamma = 0.1;
    cfg.seed = seed;
    cfg.halt_check = false;
    SvrgConfig sv;
    sv.epoch_length = 20;
    sv.step_size = 0.1;
    sv.inner_iterations = 20;
    cfg.gfo = sv;
    cfg.hfo = HessianDescentConfig{};
    const MixRunResult r = mix_run(ctx, x0, cfg);
    diffs.push_back(r.final_f - ctx.monitor_value(x0));
  }
  const MeanSe m = mean_se(diffs);
  CHECK(m.mean <= 3.0 * m.se);
}

TEST_CASE("certified steps decrease by the cubic floor") {
  SyntheticParams sp;
  sp.n = 30;
  sp.d = 8;
  sp.neg_eig = -0.05;
  sp.seed = 2;
  const auto prob = generate_synthetic(sp);
  std::size_t qualifying = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    OracleContext ctx(prob);
    MixConfig cfg;
    cfg.T = 4;
    cfg.eps = 1e-4;
    cfg.gamma = 0.02;
    cfg.lipschitz_hess = 0.5;
    cfg.p = 1.0;
    cfg.seed = seed;
    cfg.halt_check = false;
    SvrgConfig sv;
    sv.epoch_length = 30;
    sv.step_size = 0.05;
    sv.inner_iterations = 10;
    cfg.gfo = sv;
    cfg.hfo = HessianDescentConfig{};
    const MixRunResult r = mix_run(ctx, synthetic_start(8, seed), cfg);
    for (const auto& rec : r.outer) {
      if (!rec.used_y || !rec.rayleigh || *rec.rayleigh > -0.01) continue;
      ++qualifying;
      const double floor = std::pow(*rec.rayleigh, 2) * std::abs(*rec.rayleigh) / (3 * 0.25);
      CHECK(rec.f_u - rec.f_next >= floor - 1e-9);
    }
  }
  CHECK(qualifying > 0);
}

TEST_CASE("halted outputs pass an independent dense check") {
  SyntheticParams sp;
  sp.n = 20;
  sp.d = 6;
  sp.neg_eig = -0.05;
  sp.seed = 5;
  const auto prob = generate_synthetic(sp);
  int halted = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    OracleContext ctx(prob);
    MixConfig cfg;
    cfg.T = 40;
    cfg.eps = 1e-3;
    cfg.gamma = 0.01;
    cfg.lipschitz_hess = 1.0;
    cfg.seed = seed;
    GdConfig gd;
    gd.step_size = 0.3;
    gd.iterations = 50;
    cfg.gfo = gd;
    cfg.hfo = HessianDescentConfig{};
    const MixRunResult r = mix_run(ctx, synthetic_start(6, seed), cfg);
    if (!r.halted_early) continue;
    ++halted;
    const Vector& x = r.output_set.at(0);
    OracleContext check(prob);
    CHECK(check.full_grad(x).grad.norm() <= 1e-3);
    CHECK(dense_hessian(check, x).min_eigenvalue() >= -0.01 - 1e-6);
  }
  CHECK(halted == 5);
}

TEST_CASE("identical seeds reproduce the output set") {
  SyntheticParams sp;
  sp.n = 20;
  sp.d = 5;
  const auto prob = generate_synthetic(sp);
  MixConfig cfg;
  cfg.T = 3;
  cfg.eps = 1e-4;
  cfg.gamma = 1e-2;
  cfg.seed = 77;
  cfg.k = 5;
  SvrgConfig sv;
  sv.epoch_length = 20;
  sv.step_size = 0.05;
  sv.inner_iterations = 30;
  cfg.gfo = sv;
  cfg.hfo = HessianDescentConfig{};
  OracleContext a(prob), b(prob);
  const MixRunResult ra = mix_run(a, synthetic_start(5, 3), cfg);
  const MixRunResult rb = mix_run(b, synthetic_start(5, 3), cfg);
  REQUIRE(ra.output_set.size() == rb.output_set.size());
  for (std::size_t i = 0; i < ra.output_set.size(); ++i) CHECK(ra.output_set[i] == rb.output_set[i]);
  CHECK(ra.trace == rb.trace);
  CHECK(ra.samples.size() == 5);
}

TEST_CASE("budget stops the loop between subroutines") {
  SeparableQuadratic q(Vector::LinSpaced(3, -0.5, 1.0), 10);
  OracleContext ctx(q);
  MixConfig cfg = gd_hd(0.5, 4, 100, 0.1, 1.0);
  cfg.budget.max_ifo = 200;
  const MixRunResult r = mix_run(ctx, Vector::Constant(3, 0.5), cfg);
  CHECK(r.budget_exhausted);
  CHECK(r.outer.size() < 100);
  // overshoot is at most one subroutine: a GD call (40 IFO) plus the HD argmin (10)
  CHECK(r.counters.ifo <= 200 + 50);
}

TEST_CASE("trace counters never decrease") {
  SyntheticParams sp;
  sp.n = 20;
  sp.d = 5;
  const auto prob = generate_synthetic(sp);
  OracleContext ctx(prob);
  MixConfig cfg;
  cfg.T = 4;
  cfg.eps = 1e-5;
  cfg.gamma = 1e-2;
  SvrgConfig sv;
  sv.epoch_length = 10;
  sv.step_size = 0.05;
  sv.inner_iterations = 25;
  cfg.gfo = sv;
  cfg.hfo = HessianDescentConfig{};
  const MixRunResult r = mix_run(ctx, synthetic_start(5, 1), cfg);
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    CHECK(r.trace[i].ifo >= r.trace[i - 1].ifo);
    CHECK(r.trace[i].iso >= r.trace[i - 1].iso);
    CHECK(r.trace[i].wall_ns == 0);
  }
}

TEST_CASE("default_p") {
  SUBCASE("pinned scenario") {
    const std::size_t Tg = static_cast<std::size_t>(std::ceil(40.0 * 2.0 * 100.0 / std::sqrt(1e-3)));
    CHECK(Tg == 252983);
    const double p = default_p(1000, 1e-3, std::sqrt(1e-3), 2.0, 1.0, 0.9, Tg);
    CHECK(p == doctest::Approx(1.1429920539122447e-06).epsilon(1e-12));
    const double g = gfo_rate(1000, 2.0, Tg);
    const double h = hfo_rate(std::sqrt(1e-3), 1.0, 0.9);
    CHECK(g == doctest::Approx(31.622875).epsilon(1e-12));
    CHECK(h == doctest::Approx(1.1858541225631422e-06).epsilon(1e-12));
    CHECK(theta(p, 1e-3, g, h) == doctest::Approx(1.3554218391887487e-12).epsilon(1e-10));
  }
  SUBCASE("equal terms give half") {
    // g term eps^2 g = 1 * 0.1 when T_g = 4 L n^(2/3); h = rho gamma^3 / (24 M^2)
    const double eps = 1.0, L = 1.0;
    const std::size_t n = 8;  // n^(2/3) = 4
    const double g = gfo_rate(n, L, 16);  // 16 / 160 = 0.1
    CHECK(g == doctest::Approx(0.1));
    const double gamma = std::cbrt(0.1 * 24.0 / 0.9);
    CHECK(default_p(n, eps, gamma, L, 1.0, 0.9, 16) == doctest::Approx(0.05));
  }
  SUBCASE("GFO-limited regime") {
    const double p = default_p(8, 1e-3, 10.0, 1.0, 1e-3, 0.9, 16);
    CHECK(p == doctest::Approx(1e-6 * 0.1).epsilon(1e-3) );
  }
  SUBCASE("clamped") {
    CHECK(default_p(8, 1.0, 1e3, 1.0, 1e-6, 0.9, 1000000) == 1.0 - 1e-6);
    CHECK(default_p(8, 1e-6, 1e-6, 1.0, 1.0, 0.9, 1) == 1e-6);
  }
}

TEST_CASE("theta and iteration helpers") {
  CHECK(theta(0.5, 1.0, 2.0, 4.0) == 1.0);
  CHECK(theta(1.0 - 1e-12, 1.0, 2.0, 4.0) < 1e-11);
  CHECK_THROWS_AS(theta(1.0, 1.0, 2.0, 4.0), ContractViolation);
  CHECK(min_outer_iterations(10.0, 1.0) == 11);
  CHECK(min_outer_iterations(10.5, 1.0) == 11);
  CHECK(recommended_k(1.0, 100, 0.1, 0.5, 0.01) ==
        static_cast<std::size_t>(std::ceil(std::log(100.0) / std::log(2.0))));
  CHECK(recommended_k(1.0, 100, 0.1, 1e-9, 0.5) == 1);
  CHECK_THROWS_AS(recommended_k(1.0, 5, 0.1, 0.5, 0.01), ContractViolation);
}

TEST_CASE("sample_outputs") {
  const std::vector<Vector> one{Vector::Ones(2)};
  for (const auto& [i, v] : sample_outputs(one, 20, 3)) {
    CHECK(i == 0);
    CHECK(v == one[0]);
  }
  std::vector<Vector> four;
  for (int i = 0; i < 4; ++i) four.push_back(Vector::Constant(1, i));
  std::map<std::size_t, int> counts;
  const auto s = sample_outputs(four, 10000, 42);
  for (const auto& [i, v] : s) {
    ++counts[i];
    CHECK(v(0) == static_cast<double>(i));
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(counts[i] / 1e4 - 0.25) <= 0.02);
  CHECK(sample_outputs(four, 50, 42) == std::vector(s.begin(), s.begin() + 50));
  CHECK_THROWS_AS(sample_outputs({}, 1, 0), ContractViolation);
  CHECK_THROWS_AS(sample_outputs(four, 0, 0), ContractViolation);
}

TEST_CASE("mix configuration contracts") {
  SaddleToy2D s;
  OracleContext ctx(s);
  MixConfig cfg;
  cfg.T = 0;
  CHECK_THROWS_AS(mix_run(ctx, Vector::Zero(2), cfg), ContractViolation);
  cfg.T = 1;
  cfg.p = 1.5;
  CHECK_THROWS_AS(mix_run(ctx, Vector::Zero(2), cfg), ContractViolation);
  cfg.p.reset();
  CHECK_THROWS_AS(mix_run(ctx, Vector::Zero(3), cfg), ContractViolation);
}
