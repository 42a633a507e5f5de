#include "saddle/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "saddle/errors.hpp"
#include "saddle/serialize.hpp"
#include "saddle/trace.hpp"

namespace saddle {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("bad value '" + value + "' for key '" + key + "'");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, v);
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, v);
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v[0] == '-') bad_value(key, v);
  try {
    std::size_t pos = 0;
    const auto x = std::stoull(v, &pos);
    if (pos != v.size()) bad_value(key, v);
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v);
}

std::string str(double v) { return format_real(v); }
std::string str(std::uint64_t v) { return std::to_string(v); }
std::string str(bool v) { return v ? "true" : "false"; }

template <class T>
T parse_as(const std::string& key, const std::string& v) {
  if constexpr (std::is_same_v<T, double>) return to_double(key, v);
  else if constexpr (std::is_same_v<T, bool>) return to_bool(key, v);
  else if constexpr (std::is_same_v<T, std::string>) return v;
  else return static_cast<T>(to_u64(key, v));
}

template <class T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) return v;
  else if constexpr (std::is_same_v<T, double> || std::is_same_v<T, bool>) return str(v);
  else return str(static_cast<std::uint64_t>(v));
}

template <class T>
ConfigKey key(std::string name, std::string help, T RunConfig::*field) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.get = [field](const RunConfig& c) { return show(c.*field); };
  k.set = [field, name](RunConfig& c, const std::string& v) { c.*field = parse_as<T>(name, v); };
  return k;
}

template <class T>
ConfigKey key(std::string name, std::string help, std::optional<T> RunConfig::*field) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.get = [field](const RunConfig& c) { return c.*field ? show(*(c.*field)) : std::string(); };
  k.set = [field, name](RunConfig& c, const std::string& v) {
    if (v.empty()) c.*field = std::nullopt;
    else c.*field = parse_as<T>(name, v);
  };
  return k;
}

std::vector<ConfigKey> build_keys() {
  using C = RunConfig;
  return {
      key("problem", "synthetic | file | quadratic | saddle2d | quartic | dense-quadratic", &C::problem),
      key("problem_path", "serialized instance for problem = file", &C::problem_path),
      key("n", "number of components", &C::n),
      key("d", "dimension", &C::d),
      key("problem_seed", "generator seed of the problem", &C::problem_seed),
      key("neg_eig", "smallest Hessian eigenvalue at the origin (synthetic)", &C::neg_eig),
      key("pos_lo", "lower end of the positive spectrum", &C::pos_lo),
      key("pos_hi", "upper end of the positive spectrum", &C::pos_hi),
      key("start_radius", "start drawn uniformly from [-r, r]^d", &C::start_radius),
      key("start_seed", "seed of the start point", &C::start_seed),
      key("stack", "sgd | gd | adam | svrg | cubic | approx-cubic | mix", &C::stack),
      key("mix_gfo", "gradient stage of mix: svrg | gd | sgd | adam", &C::mix_gfo),
      key("mix_hfo", "Hessian stage of mix: hd | cubic | approx-cubic", &C::mix_hfo),
      key("outer", "outer iterations T", &C::outer),
      key("eps", "gradient tolerance", &C::eps),
      key("gamma", "curvature tolerance (default sqrt(eps))", &C::gamma),
      key("p", "probability of handing y to the HFO (default: balanced)", &C::p),
      key("rho", "success probability of the curvature search", &C::rho),
      key("M", "Hessian Lipschitz constant used by the HFO", &C::M),
      key("seed", "run seed", &C::seed),
      key("k", "output samples", &C::k),
      key("halt_check", "certify before each HFO call (default on for mix)", &C::halt_check),
      key("max_ifo", "IFO budget", &C::max_ifo),
      key("max_iso", "ISO budget", &C::max_iso),
      key("max_wall_seconds", "wall-time budget", &C::max_wall_seconds),
      key("budget_fatal", "exit with status 3 when a budget runs out", &C::budget_fatal),
      key("svrg_step", "SVRG step (default 1/(4 L n^(2/3)))", &C::svrg_step),
      key("svrg_epoch", "SVRG epoch length (default n)", &C::svrg_epoch),
      key("svrg_inner", "SVRG inner iterations T_g (default 40 L n^(2/3)/sqrt(eps))", &C::svrg_inner),
      key("svrg_batch", "SVRG indices per inner step", &C::svrg_batch),
      key("gd_step", "GD step", &C::gd_step),
      key("gd_iters", "GD iterations per outer iteration", &C::gd_iters),
      key("sgd_step", "SGD step", &C::sgd_step),
      key("sgd_batch", "SGD batch", &C::sgd_batch),
      key("sgd_iters", "SGD iterations per outer iteration", &C::sgd_iters),
      key("adam_alpha", "Adam step", &C::adam_alpha),
      key("adam_eps", "Adam denominator offset", &C::adam_eps),
      key("adam_beta1", "Adam first-moment decay", &C::adam_beta1),
      key("adam_beta2", "Adam second-moment decay", &C::adam_beta2),
      key("adam_batch", "Adam batch", &C::adam_batch),
      key("adam_iters", "Adam iterations per outer iteration", &C::adam_iters),
      key("trace_every", "SGD/Adam: monitored trace row every k steps (0 = off)", &C::trace_every),
      key("eig_max_iters", "power-iteration cap per restart", &C::eig_max_iters),
      key("cubic_step", "cubic solver step", &C::cubic_step),
      key("cubic_tol", "cubic solver gradient tolerance", &C::cubic_tol),
      key("cubic_max_iters", "cubic solver iteration cap", &C::cubic_max_iters),
      key("acubic_batch", "approx-cubic minibatch", &C::acubic_batch),
      key("out", "trace CSV path", &C::out),
      key("summary", "summary JSON path", &C::summary),
      key("record_wall_time", "write wall-clock nanoseconds into the trace", &C::record_wall_time),
  };
}

Vector linspace(std::size_t d, double lo, double hi) {
  if (d == 1) return Vector::Constant(1, lo);
  return Vector::LinSpaced(static_cast<Eigen::Index>(d), lo, hi);
}

bool is_one_of(const std::string& v, std::initializer_list<const char*> options) {
  return std::any_of(options.begin(), options.end(), [&](const char* o) { return v == o; });
}

}  // namespace

const std::vector<ConfigKey>& run_config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& name, const std::string& value) {
  for (const auto& k : run_config_keys()) {
    if (k.name == name) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + name + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    apply_config_text(cfg, ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<std::string> describe(const RunConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& k : run_config_keys()) {
    const std::string v = k.get(cfg);
    out.push_back(v.empty() ? k.name + " =" : k.name + " = " + v);
  }
  return out;
}

void validate(const RunConfig& cfg) {
  if (!is_one_of(cfg.problem, {"synthetic", "file", "quadratic", "saddle2d", "quartic", "dense-quadratic"}))
    throw ConfigError("unknown problem '" + cfg.problem + "'");
  if (cfg.problem == "file" && cfg.problem_path.empty())
    throw ConfigError("problem = file needs problem_path");
  if (!is_one_of(cfg.stack, {"sgd", "gd", "adam", "svrg", "cubic", "approx-cubic", "mix"}))
    throw ConfigError("unknown stack '" + cfg.stack + "'");
  if (!is_one_of(cfg.mix_gfo, {"svrg", "gd", "sgd", "adam"}))
    throw ConfigError("unknown mix_gfo '" + cfg.mix_gfo + "'");
  if (!is_one_of(cfg.mix_hfo, {"hd", "cubic", "approx-cubic"}))
    throw ConfigError("unknown mix_hfo '" + cfg.mix_hfo + "'");
  if (cfg.outer == 0) throw ConfigError("outer must be positive");
  if (!(cfg.eps > 0.0)) throw ConfigError("eps must be positive");
  if (cfg.gamma && !(*cfg.gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (cfg.p && !(*cfg.p >= 0.0 && *cfg.p <= 1.0)) throw ConfigError("p must lie in [0, 1]");
  if (!(cfg.rho > 0.0 && cfg.rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
  if (cfg.M && !(*cfg.M > 0.0)) throw ConfigError("M must be positive");
  if (cfg.k == 0) throw ConfigError("k must be positive");
  if (!(cfg.start_radius >= 0.0)) throw ConfigError("start_radius must be >= 0");
}

ProblemInstance build_problem(const RunConfig& cfg) {
  validate(cfg);
  ProblemInstance inst;
  if (cfg.problem == "synthetic") {
    SyntheticParams p;
    p.n = cfg.n;
    p.d = cfg.d;
    p.seed = cfg.problem_seed;
    p.neg_eig = cfg.neg_eig;
    p.pos_lo = cfg.pos_lo;
    p.pos_hi = cfg.pos_hi;
    inst.problem = std::make_shared<SyntheticSaddleProblem>(generate_synthetic(p));
  } else if (cfg.problem == "file") {
    inst.problem = std::make_shared<SyntheticSaddleProblem>(load_problem(cfg.problem_path));
  } else if (cfg.problem == "quadratic") {
    inst.problem = std::make_shared<SeparableQuadratic>(linspace(cfg.d, cfg.pos_lo, cfg.pos_hi), cfg.n,
                                                        0.5, 0.1, cfg.problem_seed);
  } else if (cfg.problem == "saddle2d") {
    inst.problem = std::make_shared<SaddleToy2D>(cfg.n);
  } else if (cfg.problem == "quartic") {
    inst.problem = std::make_shared<SeparableQuartic>(cfg.d, cfg.n);
  } else {
    inst.problem = std::make_shared<DenseQuadratic>(DenseQuadratic::random(cfg.d, cfg.problem_seed, cfg.n));
  }
  const std::size_t d = inst.problem->dim();
  inst.start = cfg.start_radius > 0.0 ? synthetic_start(d, cfg.start_seed, cfg.start_radius)
                                      : Vector::Zero(static_cast<Eigen::Index>(d));
  return inst;
}

MixConfig make_mix_config(const RunConfig& cfg, const FiniteSumProblem& problem) {
  validate(cfg);
  const ProblemSpec& spec = problem.spec();
  MixConfig mc;
  mc.T = cfg.outer;
  mc.eps = cfg.eps;
  mc.gamma = cfg.gamma;
  mc.p = cfg.p;
  mc.rho = cfg.rho;
  mc.lipschitz_hess = cfg.M;
  mc.seed = cfg.seed;
  mc.k = cfg.k;
  mc.budget.max_ifo = cfg.max_ifo;
  mc.budget.max_iso = cfg.max_iso;
  mc.budget.max_wall_seconds = cfg.max_wall_seconds;
  mc.record_wall_time = cfg.record_wall_time;

  auto gfo = [&](const std::string& kind) -> GfoChoice {
    if (kind == "svrg") {
      SvrgConfig s = SvrgConfig::paper_defaults(spec.n, spec.lipschitz_grad, cfg.eps);
      if (cfg.svrg_step) s.step_size = *cfg.svrg_step;
      if (cfg.svrg_epoch) s.epoch_length = *cfg.svrg_epoch;
      if (cfg.svrg_inner) s.inner_iterations = *cfg.svrg_inner;
      s.batch = cfg.svrg_batch;
      return s;
    }
    if (kind == "gd") return GdConfig{cfg.gd_step, cfg.gd_iters, 0};
    if (kind == "sgd") return SgdConfig{cfg.sgd_step, cfg.sgd_batch, cfg.sgd_iters, 0, cfg.trace_every};
    AdamConfig a;
    a.alpha = cfg.adam_alpha;
    a.epsilon = cfg.adam_eps;
    a.beta1 = cfg.adam_beta1;
    a.beta2 = cfg.adam_beta2;
    a.batch = cfg.adam_batch;
    a.iterations = cfg.adam_iters;
    a.trace_every = cfg.trace_every;
    return a;
  };
  auto cubic_sub = [&] {
    CubicSubproblemConfig c;
    c.lipschitz_hess = cfg.M ? *cfg.M : spec.lipschitz_hess;
    c.solver_step = cfg.cubic_step;
    c.grad_tol = cfg.cubic_tol;
    c.max_iters = cfg.cubic_max_iters;
    return c;
  };
  auto hfo = [&](const std::string& kind) -> HfoChoice {
    if (kind == "hd") {
      HessianDescentConfig h;
      h.max_eig_iterations = cfg.eig_max_iters;
      return h;
    }
    if (kind == "cubic") return CubicDescentConfig{cubic_sub(), 0};
    ApproxCubicConfig a;
    a.batch = std::min(cfg.acubic_batch, spec.n);
    a.subproblem = cubic_sub();
    return a;
  };

  if (cfg.stack == "mix") {
    mc.gfo = gfo(cfg.mix_gfo);
    mc.hfo = hfo(cfg.mix_hfo);
  } else if (cfg.stack == "cubic") {
    mc.hfo = hfo("cubic");
  } else if (cfg.stack == "approx-cubic") {
    mc.hfo = hfo("approx-cubic");
  } else {
    mc.gfo = gfo(cfg.stack);
  }
  mc.halt_check = cfg.halt_check.value_or(cfg.stack == "mix");
  return mc;
}

RunOutcome execute(const RunConfig& cfg, const FiniteSumProblem& problem, const Vector& x0) {
  const MixConfig mc = make_mix_config(cfg, problem);
  OracleContext ctx(problem);
  RunOutcome out;
  out.stack = cfg.stack == "mix" ? "mix-" + cfg.mix_gfo + "-" + cfg.mix_hfo : cfg.stack;
  out.result = mix_run(ctx, x0, mc);
  out.final_grad_norm = ctx.monitor_eval(out.result.final_x).grad.norm();
  if (const auto* syn = dynamic_cast<const SyntheticSaddleProblem*>(&problem)) {
    std::size_t outside = 0;
    for (const auto& y : out.result.output_set) outside += syn->in_box(y) ? 0 : 1;
    if (!syn->in_box(out.result.final_x))
      out.warnings.push_back("final iterate left the box where L and M were computed");
    if (outside)
      out.warnings.push_back(std::to_string(outside) + " output point(s) outside the box where L and M were computed");
  }
  for (const auto& r : out.result.outer) {
    if (r.h1_violation) {
      out.warnings.push_back("approx-cubic step increased f at outer iteration " + std::to_string(r.t));
    }
  }
  return out;
}

std::vector<std::string> trace_comments(const RunConfig& cfg) {
  std::vector<std::string> c;
  c.push_back(std::string("saddle ") + kLibraryVersion);
  c.push_back("cost units: ifo and iso count single-component oracle calls; rankings weigh 1 iso = 1 ifo");
  c.push_back("resolved config follows; strip '# ' to replay");
  for (auto& line : describe(cfg)) c.push_back(std::move(line));
  return c;
}

std::string summary_json(const RunConfig& cfg, const RunOutcome& o) {
  nlohmann::ordered_json j;
  const auto& r = o.result;
  j["stack"] = o.stack;
  j["final_f"] = r.final_f;
  j["final_grad_norm"] = o.final_grad_norm;
  j["ifo"] = r.counters.ifo;
  j["iso"] = r.counters.iso;
  j["wall_seconds"] = static_cast<double>(r.counters.wall_nanos) * 1e-9;
  j["outer_iterations"] = r.outer.size();
  j["halted_early"] = r.halted_early;
  j["budget_exhausted"] = r.budget_exhausted;
  j["p"] = r.p;
  j["gamma"] = r.gamma;
  j["output_set_size"] = r.output_set.size();
  nlohmann::ordered_json samples = nlohmann::ordered_json::array();
  for (const auto& s : r.samples) samples.push_back(s.first);
  j["sample_indices"] = samples;
  j["warnings"] = o.warnings;
  nlohmann::ordered_json conf;
  for (const auto& k : run_config_keys()) conf[k.name] = k.get(cfg);
  j["config"] = conf;
  return j.dump(2) + "\n";
}

std::string format_grid_table(const std::vector<GridCell>& cells, std::optional<std::size_t> best) {
  std::ostringstream os;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    os << (best && *best == i ? "* " : "  ");
    for (const auto& [k, v] : c.assignment) os << k << '=' << v << ' ';
    if (c.diverged) {
      os << "diverged" << (c.error.empty() ? "" : " (" + c.error + ")");
    } else {
      os << "final_f=" << format_real(c.final_f) << " cost=" << c.cost_units;
    }
    os << '\n';
  }
  return os.str();
}

GridResult grid_search(const RunConfig& base, const std::vector<GridAxis>& axes, bool tie_adam) {
  if (axes.empty()) throw ConfigError("grid search needs at least one axis");
  for (const auto& a : axes) {
    if (a.values.empty()) throw ConfigError("grid axis '" + a.key + "' has no values");
  }
  const ProblemInstance inst = build_problem(base);

  const double f0 = OracleContext(*inst.problem).monitor_value(inst.start);
  GridResult res;
  std::vector<std::size_t> pos(axes.size(), 0);
  std::vector<RunConfig> configs;
  while (true) {
    RunConfig cfg = base;
    cfg.out.clear();
    cfg.summary.clear();
    GridCell cell;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      set_config_value(cfg, axes[a].key, axes[a].values[pos[a]]);
      cell.assignment.emplace_back(axes[a].key, axes[a].values[pos[a]]);
    }
    if (tie_adam) cfg.adam_eps = cfg.adam_alpha;
    try {
      const RunOutcome o = execute(cfg, *inst.problem, inst.start);
      cell.final_f = o.result.final_f;
      cell.cost_units = o.result.counters.oracle_units();
      cell.diverged = !std::isfinite(cell.final_f) || cell.final_f > f0 + 1e6 * (1.0 + std::abs(f0));
    } catch (const NumericError& e) {
      cell.diverged = true;
      cell.error = e.what();
    }
    res.cells.push_back(std::move(cell));
    configs.push_back(std::move(cfg));

    std::size_t a = 0;
    while (a < axes.size() && ++pos[a] == axes[a].values.size()) pos[a++] = 0;
    if (a == axes.size()) break;
  }

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    const auto& c = res.cells[i];
    if (c.diverged) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = res.cells[*best];
    if (c.final_f < b.final_f || (c.final_f == b.final_f && c.cost_units < b.cost_units)) best = i;
  }
  if (!best) throw GridSearchError("every grid cell diverged", res.cells);
  res.best = *best;
  res.best_config = configs[*best];
  return res;
}

}  // namespace saddle
