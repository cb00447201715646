#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "htopt/harness.hpp"
#include "htopt/verify.hpp"

namespace htopt {

namespace {

void apply_overrides(ExperimentConfig& config, int seeds, const std::string& out,
                     int jobs) {
  if (seeds > 0) config.seeds = seeds;
  if (!out.empty()) config.out_dir = out;
  if (jobs > 0) config.jobs = jobs;
}

void ensure_out_dir(ExperimentConfig& config) {
  if (config.out_dir.empty()) config.out_dir = ".";
  std::filesystem::create_directories(config.out_dir);
}

void print_cells(const std::vector<CellStats>& cells) {
  std::printf("%10s %22s %14s %8s %10s\n", "T", "mean_avg_grad_norm", "stderr",
              "n_seeds", "n_diverged");
  for (const CellStats& cell : cells) {
    if (cell.failed) {
      std::printf("%10ld   cell failed: %s\n", cell.T, cell.error.c_str());
      continue;
    }
    std::printf("%10ld %22.8g %14.4g %8d %10d\n", cell.T, cell.mean,
                cell.std_error, cell.n_seeds, cell.n_diverged);
  }
}

int run_command(const std::string& config_path, int seeds, const std::string& out,
                int jobs, bool strict) {
  ExperimentConfig config = parse_config_file(config_path);
  apply_overrides(config, seeds, out, jobs);
  ensure_out_dir(config);
  const ExperimentResult result = run_experiment(config);
  print_cells(result.cells);
  write_csv(config.out_dir + "/results.csv", result.cells);
  write_results_json(config.out_dir + "/results.json", config, result, std::nullopt);
  bool any_failed = false, any_diverged = false;
  for (const CellStats& cell : result.cells) {
    any_failed = any_failed || cell.failed;
    any_diverged = any_diverged || cell.n_diverged > 0;
  }
  if (any_failed || any_diverged)
    std::cout << "warning: some cells failed or recorded diverged runs\n";
  if (strict && any_failed) return 2;
  return 0;
}

int rates_command(const std::string& config_path, int seeds, const std::string& out,
                  int jobs, bool strict, double tolerance) {
  ExperimentConfig config = parse_config_file(config_path);
  apply_overrides(config, seeds, out, jobs);
  ensure_out_dir(config);
  const ExperimentResult result = run_experiment(config);
  print_cells(result.cells);
  const RateEstimate rate = fit_rate(result.cells);

  const Regime regime = config.schedule.kind == ScheduleKind::UnknownP
                            ? Regime::UnknownP
                            : Regime::KnownP;
  const double theory = theoretical_exponent(regime, config.oracle.p);
  const double gap = std::fabs(rate.slope - theory);
  std::printf("fitted slope %.6f  intercept %.6f  R^2 %.4f\n", rate.slope,
              rate.intercept, rate.r_squared);
  std::printf("theory slope %.6f  |fitted - theory| = %.6f  tolerance %.6f%s\n",
              theory, gap, tolerance, strict ? "" : " (advisory)");

  write_csv(config.out_dir + "/results.csv", result.cells);
  write_results_json(config.out_dir + "/results.json", config, result, rate);
  if (strict && gap > tolerance) {
    std::cout << "strict mode: slope outside tolerance\n";
    return 2;
  }
  return 0;
}

int verify_command(const std::string& out, std::uint64_t seed, bool strict) {
  const std::vector<CheckResult> results = verify_suite(seed);
  bool all_pass = true;
  std::printf("%-34s %6s %14s %14s\n", "check", "status", "observed", "bound");
  nlohmann::json doc = nlohmann::json::array();
  for (const CheckResult& check : results) {
    all_pass = all_pass && check.pass;
    std::printf("%-34s %6s %14.6g %14.6g\n", check.name.c_str(),
                check.pass ? "pass" : "FAIL", check.observed, check.bound);
    doc.push_back({{"name", check.name},
                   {"pass", check.pass},
                   {"observed", check.observed},
                   {"bound", check.bound},
                   {"note", check.note}});
  }
  std::string dir = out.empty() ? "." : out;
  std::filesystem::create_directories(dir);
  std::ofstream json_out(dir + "/verify_report.json");
  json_out << doc.dump(2) << '\n';
  std::cout << (all_pass ? "all checks passed\n" : "SOME CHECKS FAILED\n");
  if (!all_pass) return strict ? 2 : 1;
  return 0;
}

int contrast_command(const std::string& config_path, int seeds, int jobs,
                     bool strict) {
  ExperimentConfig config = parse_config_file(config_path);
  apply_overrides(config, seeds, "", jobs);
  if (config.T_grid.size() != 1) {
    std::cerr << "contrast uses a single-horizon config (one T_grid entry)\n";
    return 1;
  }
  const long T = config.T_grid[0];
  const Problem problem = make_problem(config.problem);
  const StochasticOracle oracle =
      make_oracle(config.oracle, config.problem, problem);

  const Schedule normalized_schedule =
      make_schedule(config.schedule, problem, oracle, T);
  const WithinRunRate normalized =
      within_run_rate(Method::Nsgdm, problem, oracle, normalized_schedule, T,
                      config.seeds, config.base_seed, config.jobs);

  const Schedule sgd_schedule{0.0, 1.0 / std::sqrt(static_cast<double>(T)), 1,
                              ScheduleKind::Manual};
  const WithinRunRate plain =
      within_run_rate(Method::Sgd, problem, oracle, sgd_schedule, T, config.seeds,
                      config.base_seed + 1, config.jobs);

  const double diverged_frac =
      static_cast<double>(plain.n_diverged) / config.seeds;
  std::printf("within-run slope of mean ||grad F(x_t)|| at T = %ld, %d seeds\n", T,
              config.seeds);
  std::printf("  nsgdm: slope %.4f (R^2 %.3f)\n", normalized.rate.slope,
              normalized.rate.r_squared);
  std::printf("  sgd (eta = T^-1/2): slope %.4f (R^2 %.3f), diverged %.0f%%\n",
              plain.rate.slope, plain.rate.r_squared, 100.0 * diverged_frac);
  const bool contrast_holds = normalized.rate.slope <= -0.08 &&
                              (plain.rate.slope >= -0.03 || diverged_frac >= 0.10);
  std::printf("contrast thresholds (nsgdm <= -0.08; sgd >= -0.03 or >= 10%% "
              "diverged): %s%s\n",
              contrast_holds ? "met" : "NOT met", strict ? "" : " (advisory)");
  if (strict && !contrast_holds) return 2;
  return 0;
}

int schedule_command(const std::string& kind, double Delta1, double L0, double L1,
                     double sigma0, double sigma1, double grad1, double p, long T) {
  Schedule schedule;
  if (kind == "known_p") {
    schedule = known_p_schedule(Delta1, L0, L1, sigma0, sigma1, grad1, p, T);
  } else if (kind == "unknown_p") {
    schedule = unknown_p_schedule_full(T, L1, sigma1,
                                       sigma1 > 1.0 / (16.0 * std::sqrt(2.0))
                                           ? std::optional<double>(p)
                                           : std::nullopt);
  } else {
    std::cerr << "schedule kind must be known_p or unknown_p\n";
    return 1;
  }
  std::printf("beta = %.12g\neta  = %.12g\nB    = %d\n", schedule.beta,
              schedule.eta, schedule.B);
  return 0;
}

int hard_instance_command(double p, double Delta1, double L0, double sigma0,
                          double epsilon, long T, std::uint64_t seed,
                          const std::string& method_name) {
  const HardInstanceParams params =
      HardInstanceParams::make(p, Delta1, L0, sigma0, epsilon);
  const Problem problem = make_hard_instance(params);
  const StochasticOracle oracle = make_zero_chain_oracle(params);

  std::printf("hard instance: d = %d, lambda = %.6g, q = %.6g\n", params.d,
              params.lambda, params.q);
  const double floor_exact = (params.d - 1) / (2.0 * params.q);
  const double floor_order = Delta1 * L0 * std::pow(sigma0, p / (p - 1.0)) *
                             std::pow(epsilon, -(3.0 * p - 2.0) / (p - 1.0));
  std::printf("iteration floor: (d-1)/(2q) = %.6g  [order Delta1*L0*sigma0^(p/(p-1))"
              "*eps^(-(3p-2)/(p-1)) = %.6g]\n", floor_exact, floor_order);

  if (T <= 0) T = 1000;
  const Method method = method_from_string(method_name);
  const Schedule schedule = known_p_schedule(
      Delta1, L0, 0.0, sigma0, 0.0, norm(problem.grad_at(problem.x1)), p, T);
  RandomStream stream(seed);
  const OptimizerTrace trace =
      run_optimizer(method, problem, oracle, schedule, T,
                    std::numeric_limits<double>::infinity(), stream, true);

  std::printf("%10s %12s %20s\n", "t", "prog_0(x_t)", "||grad F(x_t)||");
  for (long t = 1; t <= trace.steps; t *= 2) {
    const Vec& x = trace.x[t - 1];
    std::printf("%10ld %12d %20.8g\n", t, prog_alpha(x, 0.0),
                trace.grad_norms[t - 1]);
  }
  std::printf("final avg grad norm over %ld steps: %.8g\n", trace.steps,
              trace.avg_grad_norm);
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"heavy-tailed stochastic optimization lab"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int seeds = 0, jobs = 0;
  bool strict = false;
  double tolerance = 0.1;
  std::uint64_t seed = 1;

  auto add_config_option = [&config_path](CLI::App* cmd) {
    cmd->add_option("config", config_path, "config file path");
    cmd->add_option("--config", config_path, "config file path");
  };

  auto* run = app.add_subcommand("run", "run an experiment grid from a config file");
  add_config_option(run);
  run->add_option("--seeds", seeds);
  run->add_option("--out", out_dir);
  run->add_option("--jobs", jobs);
  run->add_flag("--strict", strict);

  auto* rates = app.add_subcommand("rates", "run a grid and fit the log-log rate");
  add_config_option(rates);
  rates->add_option("--seeds", seeds);
  rates->add_option("--out", out_dir);
  rates->add_option("--jobs", jobs);
  rates->add_option("--tolerance", tolerance);
  rates->add_flag("--strict", strict);

  auto* verify = app.add_subcommand("verify", "run the built-in verification suite");
  verify->add_option("--out", out_dir);
  verify->add_option("--seed", seed);
  verify->add_flag("--strict", strict);

  auto* contrast = app.add_subcommand(
      "contrast", "within-run nsgdm vs plain-sgd comparison at one horizon");
  add_config_option(contrast);
  contrast->add_option("--seeds", seeds);
  contrast->add_option("--jobs", jobs);
  contrast->add_flag("--strict", strict);

  std::string sched_kind = "known_p";
  double Delta1 = 1.0, L0 = 1.0, L1 = 0.0, sigma0 = 1.0, sigma1 = 0.0;
  double grad1 = 0.0, p = 2.0, epsilon = 0.01;
  long T = 100;
  auto* schedule = app.add_subcommand("schedule", "print the (beta, eta, B) constants");
  schedule->add_option("--kind", sched_kind);
  schedule->add_option("--Delta1", Delta1);
  schedule->add_option("--L0", L0);
  schedule->add_option("--L1", L1);
  schedule->add_option("--sigma0", sigma0);
  schedule->add_option("--sigma1", sigma1);
  schedule->add_option("--grad1", grad1);
  schedule->add_option("--p", p);
  schedule->add_option("--T", T)->required();

  std::string method_name = "nsgdm";
  long hi_T = 0;
  auto* hard = app.add_subcommand("hard-instance",
                                  "build the lower-bound instance and run a method");
  hard->add_option("--p", p);
  hard->add_option("--Delta1", Delta1);
  hard->add_option("--L0", L0);
  hard->add_option("--sigma0", sigma0);
  hard->add_option("--epsilon", epsilon);
  hard->add_option("--T", hi_T);
  hard->add_option("--seed", seed);
  hard->add_option("--method", method_name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run->parsed()) return run_command(config_path, seeds, out_dir, jobs, strict);
    if (rates->parsed())
      return rates_command(config_path, seeds, out_dir, jobs, strict, tolerance);
    if (verify->parsed()) return verify_command(out_dir, seed, strict);
    if (contrast->parsed()) return contrast_command(config_path, seeds, jobs, strict);
    if (schedule->parsed())
      return schedule_command(sched_kind, Delta1, L0, L1, sigma0, sigma1, grad1, p, T);
    if (hard->parsed())
      return hard_instance_command(p, Delta1, L0, sigma0, epsilon, hi_T, seed,
                                   method_name);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace htopt
