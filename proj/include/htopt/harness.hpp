#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "htopt/noise.hpp"
#include "htopt/optim.hpp"
#include "htopt/problems.hpp"

namespace htopt {

struct ConfigError : std::runtime_error {
  int line;
  ConfigError(int line_no, const std::string& msg)
      : std::runtime_error("config line " + std::to_string(line_no) + ": " + msg),
        line(line_no) {}
};

struct ProblemSpec {
  std::string name;  // quadratic | chain | hard_instance | regression
  std::map<std::string, std::string> params;
};

struct OracleSpec {
  std::string kind;  // gaussian | pareto | student-t | zero_chain | regression
  double shape = 0.0;
  double scale = 1.0;
  int batch = 1;
  double p = 2.0;
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::KnownP;
  double beta = 0.0;  // manual only
  double eta = 0.0;
  int B = 1;
};

struct ExperimentConfig {
  ProblemSpec problem;
  OracleSpec oracle;
  Method method = Method::Nsgdm;
  ScheduleSpec schedule;
  double clip_tau = 0.0;  // 0 means +inf
  std::vector<long> T_grid;
  int seeds = 100;
  std::uint64_t base_seed = 1;
  std::string out_dir;
  int jobs = 0;  // 0 = hardware concurrency
  bool track_descent = false;
};

// Parses the flat `key = value` format ('#' comments, dotted sections).
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

Problem make_problem(const ProblemSpec& spec);
// zero_chain and regression oracles draw their parameters from the paired
// problem spec; the additive kinds only need the problem's gradient.
StochasticOracle make_oracle(const OracleSpec& spec, const ProblemSpec& problem_spec,
                             const Problem& problem);
Schedule make_schedule(const ScheduleSpec& spec, const Problem& problem,
                       const StochasticOracle& oracle, long T);

struct CellStats {
  long T = 0;
  double mean = 0.0;       // mean over converged seeds of (1/T) sum ||grad F(x_t)||
  double std_error = 0.0;
  int n_seeds = 0;
  int n_diverged = 0;
  bool failed = false;     // schedule/problem construction failed for this cell
  std::string error;
};

struct ExperimentResult {
  std::vector<CellStats> cells;  // sorted by T
  double max_descent_residual = 0.0;  // only meaningful when track_descent
};

// Runs the (T, seed) grid; cells execute concurrently with per-cell streams
// seeded as derive(derive(base_seed, T), seed_index), so results do not
// depend on the job count.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct RateEstimate {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  // (T, metric, std_error) triples actually used by the fit
  std::vector<std::array<double, 3>> points;
};

// Ordinary least squares of log(metric) on log(T). Nonpositive metrics are
// dropped with a warning; fewer than 3 surviving points is an error.
RateEstimate fit_rate(const std::vector<CellStats>& cells);

struct WithinRunRate {
  RateEstimate rate;  // log-log fit of the seed-mean ||grad F(x_t)|| at t = 16, 32, ..., T
  int n_seeds = 0;
  int n_diverged = 0;
};

// Decay of the gradient norm inside a single horizon: runs `seeds` replicas
// of T iterations, averages ||grad F(x_t)|| across seeds at power-of-two
// checkpoints, and fits the log-log slope. Diverged runs are excluded.
WithinRunRate within_run_rate(Method method, const Problem& problem,
                              const StochasticOracle& oracle,
                              const Schedule& schedule, long T, int seeds,
                              std::uint64_t base_seed, int jobs = 0);

enum class Regime { KnownP, UnknownP };

// (1-p)/(3p-2) for the known-index regime, (1-p)/(2p) otherwise.
double theoretical_exponent(Regime regime, double p);

void write_csv(const std::string& path, const std::vector<CellStats>& cells);
void write_results_json(const std::string& path, const ExperimentConfig& config,
                        const ExperimentResult& result,
                        const std::optional<RateEstimate>& rate);

int cli_main(int argc, const char* const* argv);

}  // namespace htopt
