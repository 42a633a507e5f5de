#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "saddle/framework.hpp"
#include "saddle/problems.hpp"

namespace saddle {

inline constexpr const char* kLibraryVersion = "1.0.0";

/// Everything needed to replay one run. Field names double as config-file
/// keys and --flags (see run_config_keys()).
struct RunConfig {
  // problem
  std::string problem = "synthetic";  // synthetic | file | quadratic | saddle2d | quartic | dense-quadratic
  std::string problem_path;
  std::size_t n = 1000;
  std::size_t d = 100;
  std::uint64_t problem_seed = 0;
  double neg_eig = -0.001;
  double pos_lo = 1.0;
  double pos_hi = 2.0;
  double start_radius = 1e-4;  // start uniform in [-r, r]^d; 0 = origin
  std::uint64_t start_seed = 0;

  // stack
  std::string stack = "mix";      // sgd | gd | adam | svrg | cubic | approx-cubic | mix
  std::string mix_gfo = "svrg";   // svrg | gd | sgd | adam
  std::string mix_hfo = "hd";     // hd | cubic | approx-cubic
  std::size_t outer = 10;         // T
  double eps = 1e-3;
  std::optional<double> gamma;
  std::optional<double> p;
  double rho = 0.9;
  std::optional<double> M;
  std::uint64_t seed = 0;
  std::size_t k = 1;
  std::optional<bool> halt_check;  // default: on for mix, off otherwise

  // budgets
  std::optional<std::uint64_t> max_ifo;
  std::optional<std::uint64_t> max_iso;
  std::optional<double> max_wall_seconds;
  bool budget_fatal = false;

  // GFO parameters; unset SVRG values fall back to the theory defaults
  std::optional<double> svrg_step;
  std::optional<std::size_t> svrg_epoch;
  std::optional<std::size_t> svrg_inner;
  std::size_t svrg_batch = 1;
  double gd_step = 1e-3;
  std::size_t gd_iters = 100;
  double sgd_step = 1e-3;
  std::size_t sgd_batch = 1;
  std::size_t sgd_iters = 1000;
  double adam_alpha = 1e-3;
  double adam_eps = 1e-8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  std::size_t adam_batch = 1;
  std::size_t adam_iters = 1000;
  std::size_t trace_every = 0;

  // HFO parameters
  std::size_t eig_max_iters = 20000;
  double cubic_step = 1e-2;
  double cubic_tol = 1e-3;
  std::size_t cubic_max_iters = 10000;
  std::size_t acubic_batch = 10;

  // output
  std::string out;      // trace CSV; empty = none
  std::string summary;  // summary JSON; empty = none
  bool record_wall_time = false;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;  // throws ConfigError
};

const std::vector<ConfigKey>& run_config_keys();

/// Sets one key; throws ConfigError for unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
/// Flat "key = value" file, '#' comments. Later lines win.
void apply_config_file(RunConfig& cfg, const std::string& path);
void apply_config_text(RunConfig& cfg, const std::string& text);
/// One "key = value" line per key, in registry order. Unset optionals are
/// written as "key =".
std::vector<std::string> describe(const RunConfig& cfg);
/// Throws ConfigError on inconsistent settings.
void validate(const RunConfig& cfg);

struct ProblemInstance {
  std::shared_ptr<const FiniteSumProblem> problem;
  Vector start;
};

ProblemInstance build_problem(const RunConfig& cfg);

/// Translates the stack description into a framework configuration.
MixConfig make_mix_config(const RunConfig& cfg, const FiniteSumProblem& problem);

struct RunOutcome {
  MixRunResult result;
  double final_grad_norm = 0.0;
  std::vector<std::string> warnings;
  std::string stack;
};

RunOutcome execute(const RunConfig& cfg, const FiniteSumProblem& problem, const Vector& x0);

/// Header comment lines for a trace: version, cost convention, resolved config.
std::vector<std::string> trace_comments(const RunConfig& cfg);
std::string summary_json(const RunConfig& cfg, const RunOutcome& outcome);

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

struct GridCell {
  std::vector<std::pair<std::string, std::string>> assignment;
  double final_f = 0.0;
  std::uint64_t cost_units = 0;  // IFO + ISO
  bool diverged = false;
  std::string error;
};

struct GridResult {
  std::vector<GridCell> cells;  // in enumeration order
  std::size_t best = 0;
  RunConfig best_config;
};

/// Every grid cell diverged; the table is attached.
class GridSearchError : public std::runtime_error {
 public:
  GridSearchError(const std::string& what, std::vector<GridCell> cells)
      : std::runtime_error(what), cells_(std::move(cells)) {}
  const std::vector<GridCell>& cells() const { return cells_; }

 private:
  std::vector<GridCell> cells_;
};

std::string format_grid_table(const std::vector<GridCell>& cells,
                              std::optional<std::size_t> best = std::nullopt);

/// Runs every cell of the Cartesian product on one problem instance and
/// ranks by final f, ties broken by fewer oracle units. With `tie_adam`, the
/// adam_eps of each cell is set equal to its adam_alpha.
GridResult grid_search(const RunConfig& base, const std::vector<GridAxis>& axes,
                       bool tie_adam = false);

/// CLI entry point; returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace saddle
