#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "saddle/errors.hpp"
#include "saddle/harness.hpp"
#include "saddle/rng.hpp"
#include "saddle/serialize.hpp"

namespace saddle {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitBudget = 3;

// Registry keys exposed as --key flags; values given on the command line win
// over the config file.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
    for (const auto& k : run_config_keys()) {
      options[k.name] = app->add_option("--" + k.name, values[k.name], k.help)
                             ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& [name, opt] : options) {
      if (opt->count() > 0) set_config_value(cfg, name, values.at(name));
    }
    validate(cfg);
    return cfg;
  }

  bool problem_given() const {
    if (!config_path.empty()) return true;
    for (const char* k : {"problem", "problem_path", "n", "d", "problem_seed"}) {
      if (options.at(k)->count() > 0) return true;
    }
    return false;
  }
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out << text;
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

int finish_run(const RunConfig& cfg, const RunOutcome& o) {
  if (!cfg.out.empty()) {
    auto comments = trace_comments(cfg);
    comments.insert(comments.begin() + 1, "created " + utc_now());
    write_trace(cfg.out, o.result.trace, comments);
  }
  const std::string js = summary_json(cfg, o);
  if (!cfg.summary.empty()) write_text(cfg.summary, js);
  for (const auto& w : o.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << o.stack << ": f=" << format_real(o.result.final_f)
            << " |grad|=" << format_real(o.final_grad_norm) << " ifo=" << o.result.counters.ifo
            << " iso=" << o.result.counters.iso << (o.result.halted_early ? " halted" : "")
            << (o.result.budget_exhausted ? " budget_exhausted" : "") << '\n';
  return o.result.budget_exhausted && cfg.budget_fatal ? kExitBudget : kExitOk;
}

int cmd_generate(std::size_t n, std::size_t d, std::uint64_t seed, double neg, double lo, double hi,
                 const std::string& out) {
  SyntheticParams p;
  p.n = n;
  p.d = d;
  p.seed = seed;
  p.neg_eig = neg;
  p.pos_lo = lo;
  p.pos_hi = hi;
  const auto problem = generate_synthetic(p);
  save_problem(problem, out);
  std::cout << "wrote " << out << ": n=" << n << " d=" << d << " L=" << format_real(problem.spec().lipschitz_grad)
            << " M=" << format_real(problem.spec().lipschitz_hess) << '\n';
  return kExitOk;
}

int cmd_compare(RunConfig base, const std::string& stacks, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const ProblemInstance inst = build_problem(base);
  std::ostringstream table;
  table << "method,final_f,final_grad_norm,ifo,iso,wall_seconds,halted_early,budget_exhausted\n";
  bool exhausted_fatal = false;
  std::stringstream ss(stacks);
  std::string stack;
  while (std::getline(ss, stack, ',')) {
    RunConfig cfg = base;
    cfg.stack = stack;
    validate(cfg);
    cfg.out = (std::filesystem::path(dir) / (stack + ".csv")).string();
    cfg.summary = (std::filesystem::path(dir) / (stack + ".json")).string();
    const RunOutcome o = execute(cfg, *inst.problem, inst.start);
    if (finish_run(cfg, o) == kExitBudget) exhausted_fatal = true;
    const auto& r = o.result;
    table << o.stack << ',' << format_real(r.final_f) << ',' << format_real(o.final_grad_norm) << ','
          << r.counters.ifo << ',' << r.counters.iso << ','
          << format_real(static_cast<double>(r.counters.wall_nanos) * 1e-9) << ','
          << (r.halted_early ? "true" : "false") << ',' << (r.budget_exhausted ? "true" : "false") << '\n';
  }
  write_text((std::filesystem::path(dir) / "summary.csv").string(), table.str());
  std::cout << table.str();
  return exhausted_fatal ? kExitBudget : kExitOk;
}

struct CheckLine {
  std::string what;
  double value;
  double limit;
  bool pass() const { return value <= limit; }
};

std::vector<CheckLine> validate_problem(const NamedProblem& np) {
  std::vector<CheckLine> out;
  const auto& problem = *np.problem;
  OracleContext ctx(problem);
  const auto d = static_cast<Eigen::Index>(problem.dim());
  const auto* syn = dynamic_cast<const SyntheticSaddleProblem*>(&problem);
  const double radius = syn ? 0.5 : 1.0;
  double hvp_err = 0.0, grad_err = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng = Rng::derive(1234, "validate", s);
    const Vector x = rng.uniform_vector(d, -radius, radius);
    const Vector v = rng.normal_vector(d);
    hvp_err = std::max(hvp_err, check_hvp(ctx, x, v));
    const Vector u = rng.unit_vector(d);
    const double h = default_fd_step(x, u);
    const double fd = (ctx.monitor_value(x + h * u) - ctx.monitor_value(x - h * u)) / (2.0 * h);
    const double exact = ctx.monitor_eval(x).grad.dot(u);
    grad_err = std::max(grad_err, std::abs(fd - exact) / std::max(1.0, std::abs(exact)));
  }
  out.push_back({np.name + " hvp finite-difference error", hvp_err, 1e-5});
  out.push_back({np.name + " gradient finite-difference error", grad_err, 1e-5});
  if (syn && problem.dim() <= 200) {
    const Vector ev = dense_hessian(ctx, Vector::Zero(d)).eigenvalues();
    const auto& prm = syn->params();
    double spread = std::abs(ev(0) - prm.neg_eig);
    for (Eigen::Index j = 1; j < ev.size(); ++j) {
      spread = std::max(spread, std::max(prm.pos_lo - ev(j), ev(j) - prm.pos_hi));
    }
    out.push_back({np.name + " origin spectrum deviation", std::max(spread, 0.0), 1e-9});
    Vector bsum = Vector::Zero(d);
    for (std::size_t i = 0; i < problem.n(); ++i) bsum += syn->b_vector(i);
    out.push_back({np.name + " |sum b_i|", bsum.cwiseAbs().maxCoeff(), 0.0});
  }
  return out;
}

int cmd_validate(const ConfigFlags& flags) {
  auto problems = shipped_problems();
  if (flags.problem_given()) {
    const RunConfig cfg = flags.resolve();
    problems.push_back({"configured-" + cfg.problem, build_problem(cfg).problem});
  }
  bool ok = true;
  for (const auto& np : problems) {
    for (const auto& c : validate_problem(np)) {
      std::cout << (c.pass() ? "PASS " : "FAIL ") << c.what << " = " << format_real(c.value)
                << " (limit " << format_real(c.limit) << ")\n";
      ok = ok && c.pass();
    }
  }
  return ok ? kExitOk : kExitNumeric;
}

int cmd_grid(const RunConfig& base, const std::vector<std::string>& axes_text, bool tie_adam) {
  std::vector<GridAxis> axes;
  for (const auto& a : axes_text) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("--axis expects key=v1,v2,...");
    GridAxis ax;
    ax.key = a.substr(0, eq);
    std::stringstream ss(a.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, ',')) ax.values.push_back(v);
    axes.push_back(std::move(ax));
  }
  try {
    const GridResult g = grid_search(base, axes, tie_adam);
    std::cout << format_grid_table(g.cells, g.best);
    if (!base.out.empty()) {
      std::ostringstream os;
      for (const auto& line : describe(g.best_config)) os << line << '\n';
      write_text(base.out, os.str());
    }
  } catch (const GridSearchError& e) {
    std::cerr << e.what() << '\n' << format_grid_table(e.cells());
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Saddle-escaping finite-sum optimizers and the synthetic benchmark"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "write a synthetic instance to disk");
  std::size_t gn = 1000, gd = 100;
  std::uint64_t gseed = 0;
  double gneg = -0.001, glo = 1.0, ghi = 2.0;
  std::string gout;
  gen->add_option("--n", gn, "components")->check(CLI::PositiveNumber);
  gen->add_option("--d", gd, "dimension")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gseed, "generator seed");
  gen->add_option("--neg-eig", gneg, "smallest Hessian eigenvalue at the origin");
  gen->add_option("--pos-lo", glo, "lower end of the positive spectrum");
  gen->add_option("--pos-hi", ghi, "upper end of the positive spectrum");
  gen->add_option("--out", gout, "output path")->required();

  auto* run = app.add_subcommand("run", "run one optimizer stack");
  ConfigFlags run_flags;
  run_flags.attach(run);

  auto* cmp = app.add_subcommand("compare", "run several stacks on one problem");
  ConfigFlags cmp_flags;
  cmp_flags.attach(cmp);
  std::string stacks = "sgd,adam,svrg,cubic,mix";
  std::string out_dir;
  cmp->add_option("--stacks", stacks, "comma-separated stacks");
  cmp->add_option("--out-dir", out_dir, "directory for traces and summary.csv")->required();

  auto* val = app.add_subcommand("validate", "oracle self-checks on the shipped problems");
  ConfigFlags val_flags;
  val_flags.attach(val);

  auto* grid = app.add_subcommand("grid", "grid search over config keys");
  ConfigFlags grid_flags;
  grid_flags.attach(grid);
  std::vector<std::string> axes;
  bool tie_adam = false;
  grid->add_option("--axis", axes, "key=v1,v2,... (repeatable)")->required();
  grid->add_flag("--tie-adam", tie_adam, "set adam_eps equal to adam_alpha in every cell");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(gn, gd, gseed, gneg, glo, ghi, gout);
    if (*run) {
      const RunConfig cfg = run_flags.resolve();
      const ProblemInstance inst = build_problem(cfg);
      return finish_run(cfg, execute(cfg, *inst.problem, inst.start));
    }
    if (*cmp) return cmd_compare(cmp_flags.resolve(), stacks, out_dir);
    if (*val) return cmd_validate(val_flags);
    if (*grid) return cmd_grid(grid_flags.resolve(), axes, tie_adam);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConstructionError& e) {
    std::cerr << "construction failed: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitUsage;
}

}  // namespace saddle
