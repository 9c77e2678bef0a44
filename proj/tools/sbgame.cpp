// Batch front end: solve one mode, compare all modes, validate a config or
// dump the coupling constraints.

#include "sbgame/sbgame.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sbgame;

namespace {

enum Exit { kOk = 0, kUsage = 2, kInfeasible = 3, kNotConverged = 4 };

struct Flags {
  std::string config;
  std::string mode = "stochastic";
  std::string algorithm;
  std::string variant;
  std::optional<std::uint64_t> seed;
  std::optional<long> samples;
  std::string out_dir = "out";
  std::optional<long> max_iters;
  std::optional<double> tol_u;
  std::optional<double> tol_lambda;
  bool allow_nonslater = false;
  int threads = 1;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "configuration file")->required();
  cmd->add_option("--algorithm", f.algorithm, "semi or central")->check(CLI::IsMember({"semi", "central"}));
  cmd->add_option("--variant", f.variant, "consistent or literal")->check(CLI::IsMember({"consistent", "literal"}));
  cmd->add_option("--seed", f.seed, "Monte Carlo seed");
  cmd->add_option("--samples", f.samples, "Monte Carlo samples (validation and cost histogram)");
  cmd->add_option("--out-dir", f.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--max-iters", f.max_iters, "iteration cap");
  cmd->add_option("--tol-u", f.tol_u, "primal stopping tolerance");
  cmd->add_option("--tol-lambda", f.tol_lambda, "dual stopping tolerance");
  cmd->add_flag("--allow-nonslater", f.allow_nonslater, "solve even without a strictly feasible point");
  cmd->add_option("--threads", f.threads, "worker threads for Monte Carlo loops")->check(CLI::PositiveNumber);
}

/// Loads the config and applies command-line overrides; the result is validated.
MicrogridConfig load_with_overrides(const Flags& f) {
  MicrogridConfig c = load_config(f.config, false);
  if (!f.algorithm.empty()) c.solver.algorithm = f.algorithm == "central" ? Algorithm::central : Algorithm::semi;
  if (!f.variant.empty()) c.solver.variant = f.variant == "literal" ? Variant::literal : Variant::consistent;
  if (f.seed) c.experiment.seed = *f.seed;
  if (f.samples) {
    c.experiment.validation_samples = *f.samples;
    c.experiment.cost_samples = *f.samples;
  }
  if (f.max_iters) c.solver.max_iters = *f.max_iters;
  if (f.tol_u) c.solver.eps_u = *f.tol_u;
  if (f.tol_lambda) c.solver.eps_lambda = *f.tol_lambda;
  auto report = validate(c);
  if (!report.ok()) throw ValidationError(std::move(report));
  return c;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

void write_manifest(const fs::path& dir, const std::string& command, const Flags& f, const MicrogridConfig& c,
                    const std::string& modes) {
  std::ofstream out(dir / "manifest.txt");
  out << "tool = sbgame\n"
      << "version = " << kVersion << "\n"
      << "command = " << command << "\n"
      << "config = " << f.config << "\n"
      << "modes = " << modes << "\n"
      << "algorithm = " << to_string(c.solver.algorithm) << "\n"
      << "variant = " << to_string(c.solver.variant) << "\n"
      << "seed = " << c.experiment.seed << "\n"
      << "validation_samples = " << c.experiment.validation_samples << "\n"
      << "cost_samples = " << c.experiment.cost_samples << "\n"
      << "max_iters = " << c.solver.max_iters << "\n"
      << "tol_u = " << format_double(c.solver.eps_u) << "\n"
      << "tol_lambda = " << format_double(c.solver.eps_lambda) << "\n"
      << "allow_nonslater = " << (f.allow_nonslater ? "true" : "false") << "\n"
      << "threads = " << f.threads << "\n"
      << "out_dir = " << f.out_dir << "\n"
      << "timestamp = " << timestamp() << "\n";
}

RunOptions run_options(const Flags& f, const MicrogridConfig& c) {
  RunOptions opt;
  opt.algorithm = c.solver.algorithm;
  opt.allow_nonslater = f.allow_nonslater;
  opt.solve.log_stride = c.solver.log_stride;
  return opt;
}

/// Converged and the post-solve audits hold.
bool audits_pass(const ModeResult& r, const MicrogridConfig& c) {
  const double tol = 10.0 * std::max(c.solver.eps_u, c.solver.eps_lambda);
  return r.gne.converged && r.gne.fixed_point_residual <= tol && r.gne.feasibility_max <= 1e-6;
}

void print_constants(const ModeResult& r, const MicrogridConfig& c) {
  const auto [lo, hi] = gamma_eigenvalues(c);
  std::cout << "eigenvalues of Gamma: " << format_double(lo) << ", " << format_double(hi) << "\n"
            << "zeta = " << format_double(r.constants.zeta) << ", l_f = " << format_double(r.constants.l_f)
            << " (bound " << format_double(hi) << ")\n"
            << "alpha in [" << format_double(r.params.alpha.minCoeff()) << ", "
            << format_double(r.params.alpha.maxCoeff()) << "], bound " << format_double(r.params.alpha_bound) << "\n"
            << "gamma = " << format_double(r.params.gamma) << ", gamma_max = " << format_double(r.params.gamma_max)
            << "\n";
}

void print_result(const ModeResult& r) {
  std::cout << to_string(r.mode) << ": converged=" << (r.gne.converged ? "true" : "false")
            << " iterations=" << r.gne.iterations << " fixed_point_residual=" << format_double(r.gne.fixed_point_residual)
            << " feasibility_max=" << format_double(r.gne.feasibility_max)
            << " peak_grid_exchange=" << format_double(r.grid_exchange_mean.maxCoeff()) << "\n";
}

void write_constants_for(const fs::path& dir, const ModeResult& r, const MicrogridConfig& c) {
  write_constants((dir / "constants.csv").string(), r.constants, r.params, compute_margins(c),
                  preconditioner_schur_min_eigenvalue(r.params.alpha, r.params.gamma, r.coupling));
  write_margins((dir / "margins.csv").string(), compute_margins(c));
}

int cmd_solve(const Flags& f) {
  const auto mode = parse_mode(f.mode);
  if (!mode) {
    std::cerr << "error: unknown mode '" << f.mode << "'\n";
    return kUsage;
  }
  const MicrogridConfig c = load_with_overrides(f);
  const ModeResult r = run_mode(c, *mode, run_options(f, c));
  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  print_constants(r, c);
  print_result(r);
  write_iteration_log((dir / "iteration_log.csv").string(), r.gne);
  write_discharge_profiles((dir / "discharge_profiles.csv").string(), {r});
  write_grid_exchange((dir / "grid_exchange.csv").string(), {r});
  write_summary((dir / "summary.csv").string(), c, {r});
  write_constants_for(dir, r, c);
  write_manifest(dir, "solve", f, c, to_string(*mode));
  return audits_pass(r, c) ? kOk : kNotConverged;
}

int cmd_compare(const Flags& f) {
  const MicrogridConfig c = load_with_overrides(f);
  const RunOptions opt = run_options(f, c);
  std::vector<ModeResult> modes;
  for (auto m : {ConstraintMode::stochastic, ConstraintMode::det_lower, ConstraintMode::det_upper}) {
    modes.push_back(run_mode(c, m, opt));
    print_result(modes.back());
  }
  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  const auto hist = montecarlo_costs(c, modes, c.experiment.cost_samples, c.experiment.seed, f.threads);
  const auto viol =
      montecarlo_validate(c, modes.front().gne.u_star, c.experiment.validation_samples, c.experiment.seed, f.threads);
  for (std::size_t m = 0; m < modes.size(); ++m)
    std::cout << to_string(modes[m].mode) << ": mean realized cost " << format_double(hist.means[m]) << "\n";
  for (std::size_t m = 0; m < modes.size(); ++m)
    write_iteration_log((dir / ("iteration_log_" + std::string(to_string(modes[m].mode)) + ".csv")).string(),
                        modes[m].gne);
  write_discharge_profiles((dir / "discharge_profiles.csv").string(), modes);
  write_grid_exchange((dir / "grid_exchange.csv").string(), modes);
  write_violations((dir / "violations.csv").string(), viol);
  write_costs((dir / "costs.csv").string(), hist);
  write_histogram((dir / "histogram.csv").string(), hist);
  write_summary((dir / "summary.csv").string(), c, modes, &hist);
  write_constants_for(dir, modes.front(), c);
  write_manifest(dir, "compare", f, c, "stochastic,det_lower,det_upper");
  for (const auto& m : modes)
    if (!audits_pass(m, c)) return kNotConverged;
  return kOk;
}

int cmd_validate(const Flags& f) {
  MicrogridConfig c = load_config(f.config, false);
  const ValidationReport report = validate(c);
  if (!report.ok()) {
    for (const auto& v : report.violations) std::cout << v.key << ": " << v.message << "\n";
    return kUsage;
  }
  std::cout << "OK\n";
  return kOk;
}

int cmd_dump(const Flags& f, bool to_stdout) {
  const auto mode = parse_mode(f.mode);
  if (!mode) {
    std::cerr << "error: unknown mode '" << f.mode << "'\n";
    return kUsage;
  }
  const MicrogridConfig c = load_with_overrides(f);
  const CouplingConstraint cc = build_coupling(c, compute_margins(c), *mode);
  if (to_stdout) {
    write_constraints(std::cout, cc);
    return kOk;
  }
  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  write_constraints((dir / "constraints.csv").string(), cc);
  write_margins((dir / "margins.csv").string(), compute_margins(c));
  write_manifest(dir, "dump-constraints", f, c, to_string(*mode));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-battery demand-side management game"};
  app.require_subcommand(1);
  Flags f;

  auto* solve = app.add_subcommand("solve", "solve one constraint mode");
  add_common(solve, f);
  solve->add_option("--mode", f.mode, "stochastic, det_lower or det_upper")->capture_default_str();

  auto* compare = app.add_subcommand("compare", "solve all modes and run the Monte Carlo experiments");
  add_common(compare, f);

  auto* check = app.add_subcommand("validate", "check a configuration");
  check->add_option("--config", f.config, "configuration file")->required();

  auto* dump = app.add_subcommand("dump-constraints", "write A and b with block labels");
  add_common(dump, f);
  dump->add_option("--mode", f.mode, "stochastic, det_lower or det_upper")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (f.samples && *f.samples < 1) {
    std::cerr << "error: --samples must be at least 1\n";
    return kUsage;
  }

  try {
    if (solve->parsed()) return cmd_solve(f);
    if (compare->parsed()) return cmd_compare(f);
    if (check->parsed()) return cmd_validate(f);
    return cmd_dump(f, dump->count("--out-dir") == 0);
  } catch (const ValidationError& e) {
    std::cerr << "invalid config:\n" << e.report().to_string() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const StepSizeError& e) {
    std::cerr << "step size error: " << e.what() << "\n";
    return kUsage;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
