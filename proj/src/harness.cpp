#include "htopt/harness.hpp"

#include "htopt/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace htopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected a number, got '" + s + "'");
  }
}

long to_long(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected an integer, got '" + s + "'");
  }
}

struct RawConfig {
  std::map<std::string, std::pair<std::string, int>> entries;  // key -> (value, line)

  bool has(const std::string& key) const { return entries.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = entries.find(key);
    return it == entries.end() ? fallback : it->second.first;
  }
  double get_double(const std::string& key, double fallback) const {
    auto it = entries.find(key);
    return it == entries.end() ? fallback
                               : to_double(it->second.first, it->second.second);
  }
  long get_long(const std::string& key, long fallback) const {
    auto it = entries.find(key);
    return it == entries.end() ? fallback
                               : to_long(it->second.first, it->second.second);
  }
  int line_of(const std::string& key) const {
    auto it = entries.find(key);
    return it == entries.end() ? 0 : it->second.second;
  }
};

RawConfig parse_raw(const std::string& text) {
  RawConfig raw;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "empty key");
    raw.entries[key] = {value, line_no};
  }
  return raw;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  const RawConfig raw = parse_raw(text);
  ExperimentConfig config;

  if (!raw.has("problem.name")) throw ConfigError(0, "missing problem.name");
  config.problem.name = raw.get("problem.name", "");
  for (const auto& [key, value] : raw.entries) {
    if (key.rfind("problem.", 0) == 0 && key != "problem.name")
      config.problem.params[key.substr(8)] = value.first;
  }

  config.oracle.kind = raw.get("oracle.kind", "gaussian");
  config.oracle.shape = raw.get_double("oracle.shape", 0.0);
  config.oracle.scale = raw.get_double("oracle.scale", 1.0);
  config.oracle.batch = static_cast<int>(raw.get_long("oracle.batch", 1));
  config.oracle.p = raw.get_double("oracle.p", 2.0);

  config.method = method_from_string(raw.get("method", "nsgdm"));

  const std::string sched = raw.get("schedule.kind", "known_p");
  if (sched == "known_p") config.schedule.kind = ScheduleKind::KnownP;
  else if (sched == "unknown_p") config.schedule.kind = ScheduleKind::UnknownP;
  else if (sched == "manual") config.schedule.kind = ScheduleKind::Manual;
  else throw ConfigError(raw.line_of("schedule.kind"), "unknown schedule.kind '" + sched + "'");
  config.schedule.beta = raw.get_double("schedule.beta", 0.0);
  config.schedule.eta = raw.get_double("schedule.eta", 0.0);
  config.schedule.B = static_cast<int>(raw.get_long("schedule.B", 1));
  config.clip_tau = raw.get_double("clip.tau", 0.0);

  if (!raw.has("T_grid")) throw ConfigError(0, "missing T_grid");
  for (const std::string& item : split(raw.get("T_grid", ""), ','))
    config.T_grid.push_back(to_long(item, raw.line_of("T_grid")));
  if (config.T_grid.empty()) throw ConfigError(raw.line_of("T_grid"), "empty T_grid");
  for (std::size_t i = 1; i < config.T_grid.size(); ++i)
    if (config.T_grid[i] <= config.T_grid[i - 1])
      throw ConfigError(raw.line_of("T_grid"), "T_grid must be strictly increasing");

  config.seeds = static_cast<int>(raw.get_long("seeds", 100));
  if (config.seeds < 1) throw ConfigError(raw.line_of("seeds"), "seeds must be >= 1");
  config.base_seed = static_cast<std::uint64_t>(raw.get_long("seed", 1));
  config.out_dir = raw.get("out", "");
  config.jobs = static_cast<int>(raw.get_long("jobs", 0));
  config.track_descent = raw.get("track_descent", "false") == "true";
  return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace {

Vec parse_vec_param(const std::map<std::string, std::string>& params,
                    const std::string& key, int dim, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return Vec(dim, fallback);
  const std::vector<std::string> items = split(it->second, ',');
  if (items.size() == 1) return Vec(dim, to_double(items[0], 0));
  if (static_cast<int>(items.size()) != dim)
    throw std::invalid_argument("problem." + key + " must have length dim");
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = to_double(items[i], 0);
  return v;
}

double param_double(const std::map<std::string, std::string>& params,
                    const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : to_double(it->second, 0);
}

}  // namespace

Problem make_problem(const ProblemSpec& spec) {
  if (spec.name == "quadratic") {
    const int dim = static_cast<int>(param_double(spec.params, "dim", 10));
    Vec eigenvalues;
    if (spec.params.count("eigenvalues")) {
      eigenvalues = parse_vec_param(spec.params, "eigenvalues", dim, 1.0);
    } else {
      const double lo = param_double(spec.params, "eig_min", 0.1);
      const double hi = param_double(spec.params, "eig_max", 1.0);
      eigenvalues.resize(dim);
      for (int i = 0; i < dim; ++i)
        eigenvalues[i] = dim == 1 ? hi : lo + (hi - lo) * i / (dim - 1.0);
    }
    const Vec x_star = parse_vec_param(spec.params, "x_star", dim, 0.0);
    const Vec x1 = parse_vec_param(spec.params, "x1", dim, 0.0);
    return make_quadratic(dim, eigenvalues, x_star, x1);
  }
  if (spec.name == "chain") {
    const int d = static_cast<int>(param_double(spec.params, "d", 10));
    Problem problem;
    problem.name = "chain";
    problem.dim = d;
    problem.L0 = 152.0;
    problem.L1 = 0.0;
    problem.x1 = parse_vec_param(spec.params, "x1", d, 0.0);
    // f_d(0) - inf f_d <= delta*d, giving a declared lower bound
    problem.f_star =
        chain_value(Vec(d, 0.0), d) - HardInstanceParams::kDelta * d;
    problem.value_at = [d](std::span<const double> x) { return chain_value(x, d); };
    problem.grad_at = [d](std::span<const double> x) { return chain_grad(x, d); };
    return problem;
  }
  if (spec.name == "hard_instance") {
    const HardInstanceParams params = HardInstanceParams::make(
        param_double(spec.params, "p", 2.0), param_double(spec.params, "Delta1", 1.0),
        param_double(spec.params, "L0", 1.0), param_double(spec.params, "sigma0", 1.0),
        param_double(spec.params, "epsilon", 0.01));
    return make_hard_instance(params);
  }
  if (spec.name == "regression") {
    return make_regression(param_double(spec.params, "q", 0.5),
                           param_double(spec.params, "x_star", 0.0),
                           param_double(spec.params, "sigma", 1.0),
                           param_double(spec.params, "p", 2.0),
                           param_double(spec.params, "x1", 0.0));
  }
  throw std::invalid_argument("unknown problem '" + spec.name + "'");
}

StochasticOracle make_oracle(const OracleSpec& spec, const ProblemSpec& problem_spec,
                             const Problem& problem) {
  if (spec.kind == "zero_chain") {
    if (problem.name != "hard_instance")
      throw std::invalid_argument("zero_chain oracle pairs with hard_instance only");
    const HardInstanceParams params = HardInstanceParams::make(
        param_double(problem_spec.params, "p", 2.0),
        param_double(problem_spec.params, "Delta1", 1.0),
        param_double(problem_spec.params, "L0", 1.0),
        param_double(problem_spec.params, "sigma0", 1.0),
        param_double(problem_spec.params, "epsilon", 0.01));
    return make_zero_chain_oracle(params);
  }
  if (spec.kind == "regression") {
    if (problem.name != "regression")
      throw std::invalid_argument("regression oracle pairs with the regression problem");
    const double omega_shape = spec.shape;
    return make_regression_oracle(
        param_double(problem_spec.params, "q", 0.5),
        param_double(problem_spec.params, "x_star", 0.0),
        param_double(problem_spec.params, "sigma", 1.0),
        param_double(problem_spec.params, "p", 2.0),
        NoiseKind::SymmetricPareto, omega_shape);
  }
  return make_additive_oracle(problem, noise_kind_from_string(spec.kind),
                              spec.shape, spec.scale, spec.batch, spec.p);
}

Schedule make_schedule(const ScheduleSpec& spec, const Problem& problem,
                       const StochasticOracle& oracle, long T) {
  switch (spec.kind) {
    case ScheduleKind::Manual: {
      Schedule s;
      s.beta = spec.beta;
      s.eta = spec.eta;
      s.B = spec.B;
      s.provenance = ScheduleKind::Manual;
      return s;
    }
    case ScheduleKind::UnknownP:
      return unknown_p_schedule_full(T, problem.L1, oracle.meta.sigma1,
                                     oracle.meta.p);
    case ScheduleKind::KnownP: {
      const double f1 = problem.value_at(problem.x1);
      const double Delta1 = f1 - problem.f_star.value_or(0.0);
      return known_p_schedule(Delta1, problem.L0, problem.L1, oracle.meta.sigma0,
                              oracle.meta.sigma1, norm(problem.grad_at(problem.x1)),
                              oracle.meta.p, T);
    }
  }
  throw std::logic_error("unreachable");
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const Problem problem = make_problem(config.problem);
  const StochasticOracle oracle = make_oracle(config.oracle, config.problem, problem);

  struct Cell {
    long T;
    Schedule schedule;
    bool failed = false;
    std::string error;
  };
  std::vector<Cell> cells;
  for (long T : config.T_grid) {
    Cell cell{T, Schedule{}, false, ""};
    try {
      cell.schedule = make_schedule(config.schedule, problem, oracle, T);
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
    cells.push_back(std::move(cell));
  }

  struct RunSlot {
    double avg = 0.0;
    bool diverged = false;
    double descent = 0.0;
  };
  const int n_T = static_cast<int>(cells.size());
  std::vector<std::vector<RunSlot>> slots(n_T, std::vector<RunSlot>(config.seeds));

  struct Job {
    int cell;
    int seed_index;
  };
  std::vector<Job> jobs;
  for (int c = 0; c < n_T; ++c) {
    if (cells[c].failed) continue;
    for (int s = 0; s < config.seeds; ++s) jobs.push_back({c, s});
  }

  const double tau = config.clip_tau > 0.0 ? config.clip_tau : kInf;
  std::atomic<std::size_t> next_job{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next_job.fetch_add(1);
      if (j >= jobs.size()) break;
      const Job job = jobs[j];
      const Cell& cell = cells[job.cell];
      RandomStream stream(derive_seed(
          derive_seed(config.base_seed, static_cast<std::uint64_t>(cell.T)),
          static_cast<std::uint64_t>(job.seed_index)));
      const OptimizerTrace trace =
          run_optimizer(config.method, problem, oracle, cell.schedule, cell.T,
                        tau, stream, config.track_descent);
      RunSlot& slot = slots[job.cell][job.seed_index];
      slot.avg = trace.avg_grad_norm;
      slot.diverged = trace.diverged;
      if (config.track_descent && !trace.diverged &&
          config.method == Method::Nsgdm)
        slot.descent = descent_residual(trace, problem);
    }
  };

  int n_jobs = config.jobs > 0 ? config.jobs
                               : static_cast<int>(std::thread::hardware_concurrency());
  n_jobs = std::max(1, std::min<int>(n_jobs, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n_jobs; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  ExperimentResult result;
  for (int c = 0; c < n_T; ++c) {
    CellStats stats;
    stats.T = cells[c].T;
    stats.n_seeds = config.seeds;
    if (cells[c].failed) {
      stats.failed = true;
      stats.error = cells[c].error;
      result.cells.push_back(std::move(stats));
      continue;
    }
    double sum = 0.0, sumsq = 0.0;
    int used = 0;
    for (const RunSlot& slot : slots[c]) {
      if (slot.diverged || !std::isfinite(slot.avg)) {
        stats.n_diverged += 1;
        continue;
      }
      sum += slot.avg;
      sumsq += slot.avg * slot.avg;
      used += 1;
      result.max_descent_residual = std::max(result.max_descent_residual, slot.descent);
    }
    if (used > 0) {
      stats.mean = sum / used;
      const double var = std::max(0.0, sumsq / used - stats.mean * stats.mean);
      stats.std_error = used > 1 ? std::sqrt(var / used) : 0.0;
    } else {
      stats.mean = kInf;
    }
    result.cells.push_back(std::move(stats));
  }
  std::sort(result.cells.begin(), result.cells.end(),
            [](const CellStats& a, const CellStats& b) { return a.T < b.T; });
  return result;
}

RateEstimate fit_rate(const std::vector<CellStats>& cells) {
  RateEstimate estimate;
  for (const CellStats& cell : cells) {
    if (cell.failed) continue;
    if (!(cell.mean > 0.0) || !std::isfinite(cell.mean)) {
      std::cerr << "warning: dropping T=" << cell.T
                << " from rate fit (nonpositive or non-finite metric)\n";
      continue;
    }
    estimate.points.push_back(
        {static_cast<double>(cell.T), cell.mean, cell.std_error});
  }
  const std::size_t n = estimate.points.size();
  if (n < 3)
    throw std::invalid_argument("fit_rate: need at least 3 positive points");

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& point : estimate.points) {
    const double x = std::log(point[0]);
    const double y = std::log(point[1]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double nd = static_cast<double>(n);
  const double cov = sxy - sx * sy / nd;
  const double var_x = sxx - sx * sx / nd;
  const double var_y = syy - sy * sy / nd;
  estimate.slope = cov / var_x;
  estimate.intercept = (sy - estimate.slope * sx) / nd;
  estimate.r_squared = var_y > 0.0 ? (cov * cov) / (var_x * var_y) : 1.0;
  return estimate;
}

WithinRunRate within_run_rate(Method method, const Problem& problem,
                              const StochasticOracle& oracle,
                              const Schedule& schedule, long T, int seeds,
                              std::uint64_t base_seed, int jobs) {
  if (T < 64) throw std::invalid_argument("within_run_rate: T must be >= 64");
  std::vector<long> checkpoints;
  for (long t = 16; t <= T; t *= 2) checkpoints.push_back(t);

  struct Slot {
    std::vector<double> at_checkpoint;
    bool diverged = false;
  };
  std::vector<Slot> slots(seeds);
  std::atomic<int> next_seed{0};
  auto worker = [&]() {
    for (;;) {
      const int s = next_seed.fetch_add(1);
      if (s >= seeds) break;
      RandomStream stream(derive_seed(
          derive_seed(base_seed, static_cast<std::uint64_t>(T)),
          static_cast<std::uint64_t>(s)));
      const OptimizerTrace trace =
          run_optimizer(method, problem, oracle, schedule, T, kInf, stream, false);
      if (trace.diverged) {
        slots[s].diverged = true;
        continue;
      }
      for (long t : checkpoints)
        slots[s].at_checkpoint.push_back(trace.grad_norms[t - 1]);
    }
  };
  int n_jobs = jobs > 0 ? jobs
                        : static_cast<int>(std::thread::hardware_concurrency());
  n_jobs = std::max(1, std::min(n_jobs, seeds));
  std::vector<std::thread> pool;
  for (int i = 1; i < n_jobs; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  WithinRunRate result;
  result.n_seeds = seeds;
  std::vector<CellStats> cells;
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    double sum = 0.0;
    int used = 0;
    for (const Slot& slot : slots) {
      if (slot.diverged) continue;
      sum += slot.at_checkpoint[k];
      used += 1;
    }
    CellStats cell;
    cell.T = checkpoints[k];
    cell.mean = used > 0 ? sum / used : kInf;
    cell.n_seeds = seeds;
    cell.n_diverged = seeds - used;
    cells.push_back(cell);
  }
  for (const Slot& slot : slots)
    if (slot.diverged) result.n_diverged += 1;
  if (result.n_diverged < seeds) result.rate = fit_rate(cells);
  return result;
}

double theoretical_exponent(Regime regime, double p) {
  if (!(p > 1.0 && p <= 2.0))
    throw std::invalid_argument("theoretical_exponent: p must lie in (1,2]");
  return regime == Regime::KnownP ? (1.0 - p) / (3.0 * p - 2.0)
                                  : (1.0 - p) / (2.0 * p);
}

namespace {
std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

void write_csv(const std::string& path, const std::vector<CellStats>& cells) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "T,mean_avg_grad_norm,stderr,n_seeds,n_diverged\n";
  for (const CellStats& cell : cells) {
    if (cell.failed) continue;
    out << cell.T << ',' << format_double(cell.mean) << ','
        << format_double(cell.std_error) << ',' << cell.n_seeds << ','
        << cell.n_diverged << '\n';
  }
}

void write_results_json(const std::string& path, const ExperimentConfig& config,
                        const ExperimentResult& result,
                        const std::optional<RateEstimate>& rate) {
  nlohmann::json doc;
  doc["problem"] = {{"name", config.problem.name}};
  for (const auto& [key, value] : config.problem.params)
    doc["problem"][key] = value;
  doc["oracle"] = {{"kind", config.oracle.kind},
                   {"shape", config.oracle.shape},
                   {"scale", config.oracle.scale},
                   {"batch", config.oracle.batch},
                   {"p", config.oracle.p}};
  doc["method"] = to_string(config.method);
  doc["seeds"] = config.seeds;
  doc["seed"] = config.base_seed;
  doc["cells"] = nlohmann::json::array();
  for (const CellStats& cell : result.cells) {
    nlohmann::json c = {{"T", cell.T},
                        {"mean_avg_grad_norm", cell.mean},
                        {"stderr", cell.std_error},
                        {"n_seeds", cell.n_seeds},
                        {"n_diverged", cell.n_diverged}};
    if (cell.failed) c["error"] = cell.error;
    doc["cells"].push_back(c);
  }
  if (rate.has_value()) {
    doc["rate"] = {{"slope", rate->slope},
                   {"intercept", rate->intercept},
                   {"r_squared", rate->r_squared}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

}  // namespace htopt
