#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "htopt/harness.hpp"

using namespace htopt;

TEST_CASE("theoretical exponents") {
  CHECK(theoretical_exponent(Regime::KnownP, 2.0) == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK(theoretical_exponent(Regime::KnownP, 1.5) == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(theoretical_exponent(Regime::UnknownP, 1.5) ==
        doctest::Approx(-1.0 / 6.0).epsilon(1e-15));
  CHECK(theoretical_exponent(Regime::UnknownP, 2.0) == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK_THROWS_AS(theoretical_exponent(Regime::KnownP, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(theoretical_exponent(Regime::KnownP, 2.5), std::invalid_argument);
}

TEST_CASE("fit_rate on exact power laws") {
  auto cells_for = [](double coeff, double exponent) {
    std::vector<CellStats> cells;
    for (long T : {100L, 200L, 400L, 800L, 1600L}) {
      CellStats cell;
      cell.T = T;
      cell.mean = coeff * std::pow(static_cast<double>(T), exponent);
      cell.n_seeds = 1;
      cells.push_back(cell);
    }
    return cells;
  };

  const RateEstimate quarter = fit_rate(cells_for(1.0, -0.25));
  CHECK(quarter.slope == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(quarter.r_squared == doctest::Approx(1.0).epsilon(1e-12));

  const RateEstimate fifth = fit_rate(cells_for(3.0, -0.2));
  CHECK(fifth.slope == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(fifth.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  const RateEstimate flat = fit_rate(cells_for(2.0, 0.0));
  CHECK(flat.slope == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fit_rate rejects degenerate inputs") {
  std::vector<CellStats> cells(2);
  cells[0].T = 10;
  cells[0].mean = 1.0;
  cells[1].T = 20;
  cells[1].mean = 0.5;
  CHECK_THROWS_AS(fit_rate(cells), std::invalid_argument);

  // nonpositive metrics are dropped, leaving too few points
  std::vector<CellStats> bad(4);
  for (int i = 0; i < 4; ++i) {
    bad[i].T = 10 * (i + 1);
    bad[i].mean = i < 2 ? 1.0 : 0.0;
  }
  CHECK_THROWS_AS(fit_rate(bad), std::invalid_argument);
}

TEST_CASE("config parsing") {
  const std::string text = R"(
# experiment
problem.name = quadratic
problem.dim = 4
problem.eig_min = 0.1
problem.eig_max = 1.0
problem.x1 = 1.0
oracle.kind = pareto
oracle.shape = 1.7
oracle.scale = 0.5
oracle.p = 1.5
method = nsgdm
schedule.kind = known_p
T_grid = 16, 32, 64
seeds = 3
seed = 7
)";
  const ExperimentConfig config = parse_config_text(text);
  CHECK(config.problem.name == "quadratic");
  CHECK(config.problem.params.at("dim") == "4");
  CHECK(config.oracle.kind == "pareto");
  CHECK(config.oracle.p == 1.5);
  CHECK(config.method == Method::Nsgdm);
  CHECK(config.schedule.kind == ScheduleKind::KnownP);
  CHECK(config.T_grid == std::vector<long>{16, 32, 64});
  CHECK(config.seeds == 3);
  CHECK(config.base_seed == 7);
}

TEST_CASE("config errors carry line numbers") {
  CHECK_THROWS_AS(parse_config_text("problem.name = quadratic\nbroken line\n"),
                  ConfigError);
  try {
    parse_config_text("problem.name = quadratic\nbroken line\n");
  } catch (const ConfigError& e) {
    CHECK(e.line == 2);
  }
  // missing T_grid
  CHECK_THROWS_AS(parse_config_text("problem.name = quadratic\n"), ConfigError);
  // non-increasing grid
  CHECK_THROWS_AS(
      parse_config_text("problem.name = quadratic\nT_grid = 16, 16, 32\n"),
      ConfigError);
}

TEST_CASE("make_problem from specs") {
  ProblemSpec spec;
  spec.name = "quadratic";
  spec.params = {{"dim", "3"}, {"eigenvalues", "0.5, 1.0, 2.0"}, {"x_star", "1.0"}};
  const Problem quad = make_problem(spec);
  CHECK(quad.dim == 3);
  CHECK(quad.L0 == 2.0);
  CHECK(quad.grad_at(Vec{1.0, 1.0, 1.0}) == Vec{0.0, 0.0, 0.0});

  ProblemSpec chain;
  chain.name = "chain";
  chain.params = {{"d", "4"}};
  const Problem chain_problem = make_problem(chain);
  CHECK(chain_problem.dim == 4);
  CHECK(chain_problem.value_at(Vec(4, 0.0)) ==
        doctest::Approx(-2.0663656770612466).epsilon(1e-12));

  ProblemSpec unknown;
  unknown.name = "nope";
  CHECK_THROWS_AS(make_problem(unknown), std::invalid_argument);
}

TEST_CASE("run_experiment determinism and divergence accounting") {
  const std::string text = R"(
problem.name = quadratic
problem.dim = 3
problem.x1 = 1.0
oracle.kind = gaussian
oracle.scale = 0.5
oracle.p = 2.0
method = nsgdm
schedule.kind = known_p
T_grid = 8, 16, 32
seeds = 5
seed = 11
)";
  const ExperimentConfig config = parse_config_text(text);
  const ExperimentResult r1 = run_experiment(config);
  const ExperimentResult r2 = run_experiment(config);
  REQUIRE(r1.cells.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r1.cells[i].mean == r2.cells[i].mean);  // bit-identical reruns
    CHECK(r1.cells[i].std_error == r2.cells[i].std_error);
    CHECK(r1.cells[i].n_diverged + 5 - r1.cells[i].n_diverged == r1.cells[i].n_seeds);
  }

  // single-seed rerun with the same seed is expected to be identical, too
  ExperimentConfig one = config;
  one.seeds = 1;
  CHECK(run_experiment(one).cells[0].mean == run_experiment(one).cells[0].mean);
}

TEST_CASE("noiseless quadratic metric decreases along the grid") {
  const std::string text = R"(
problem.name = quadratic
problem.dim = 3
problem.x1 = 2.0
oracle.kind = gaussian
oracle.scale = 0.0
oracle.p = 2.0
method = nsgdm
schedule.kind = known_p
T_grid = 32, 128, 512
seeds = 1
seed = 3
)";
  const ExperimentResult result = run_experiment(parse_config_text(text));
  REQUIRE(result.cells.size() == 3);
  CHECK(result.cells[0].mean > result.cells[1].mean);
  CHECK(result.cells[1].mean > result.cells[2].mean);
}

TEST_CASE("csv output schema and byte-identical reruns") {
  const std::string text = R"(
problem.name = quadratic
problem.dim = 2
problem.x1 = 1.0
oracle.kind = pareto
oracle.shape = 2.2
oracle.scale = 0.3
oracle.p = 1.5
method = nsgdm
schedule.kind = unknown_p
T_grid = 8, 16, 32
seeds = 4
seed = 5
)";
  const ExperimentConfig config = parse_config_text(text);
  const auto tmp = std::filesystem::temp_directory_path();
  const std::string path1 = (tmp / "htopt_test_results_1.csv").string();
  const std::string path2 = (tmp / "htopt_test_results_2.csv").string();
  write_csv(path1, run_experiment(config).cells);
  write_csv(path2, run_experiment(config).cells);

  auto slurp = [](const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string body1 = slurp(path1);
  CHECK(body1 == slurp(path2));
  CHECK(body1.rfind("T,mean_avg_grad_norm,stderr,n_seeds,n_diverged\n", 0) == 0);
  std::filesystem::remove(path1);
  std::filesystem::remove(path2);
}

TEST_CASE("zero-chain oracle and hard instance wire up through the config") {
  const std::string text = R"(
problem.name = hard_instance
problem.p = 1.5
problem.Delta1 = 1.0
problem.L0 = 1.0
problem.sigma0 = 1.0
problem.epsilon = 0.005
oracle.kind = zero_chain
method = nsgdm
schedule.kind = known_p
T_grid = 16, 32, 64
seeds = 3
seed = 9
)";
  const ExperimentResult result = run_experiment(parse_config_text(text));
  REQUIRE(result.cells.size() == 3);
  for (const CellStats& cell : result.cells) {
    CHECK(!cell.failed);
    CHECK(cell.n_diverged == 0);
    CHECK(std::isfinite(cell.mean));
  }
}

TEST_CASE("regression problem and oracle wire up through the config") {
  const std::string text = R"(
problem.name = regression
problem.q = 0.5
problem.x_star = 1.0
problem.sigma = 1.0
problem.p = 2.0
problem.x1 = 3.0
oracle.kind = regression
oracle.p = 2.0
method = nsgdm
schedule.kind = unknown_p
T_grid = 16, 32, 64
seeds = 3
seed = 10
)";
  const ExperimentResult result = run_experiment(parse_config_text(text));
  REQUIRE(result.cells.size() == 3);
  for (const CellStats& cell : result.cells) CHECK(!cell.failed);
}

TEST_CASE("cli rates --strict returns 2 when the slope misses the tolerance") {
  const auto tmp = std::filesystem::temp_directory_path();
  const std::string path = (tmp / "htopt_strict_config.txt").string();
  {
    std::ofstream out(path);
    out << "problem.name = quadratic\nproblem.dim = 2\nproblem.x1 = 1.0\n"
           "oracle.kind = gaussian\noracle.scale = 0.3\noracle.p = 2.0\n"
           "method = nsgdm\nschedule.kind = known_p\n"
           "T_grid = 8, 16, 32\nseeds = 3\nseed = 2\n";
  }
  const std::string out_dir = (tmp / "htopt_strict_out").string();
  const char* argv[] = {"htopt",  "rates",      path.c_str(), "--strict",
                        "--out",  out_dir.c_str(), "--tolerance", "1e-9"};
  CHECK(cli_main(8, argv) == 2);
  std::filesystem::remove(path);
  std::filesystem::remove_all(out_dir);
}

TEST_CASE("cli schedule subcommand prints the schedule constants") {
  const char* argv[] = {"htopt", "schedule", "--kind", "unknown_p", "--T", "16"};
  CHECK(cli_main(6, argv) == 0);
}

TEST_CASE("cli rejects malformed configs with exit code 1") {
  const auto tmp = std::filesystem::temp_directory_path();
  const std::string path = (tmp / "htopt_bad_config.txt").string();
  {
    std::ofstream out(path);
    out << "problem.name = quadratic\nthis is not a key value pair\n";
  }
  const char* argv[] = {"htopt", "run", path.c_str()};
  CHECK(cli_main(3, argv) == 1);
  std::filesystem::remove(path);
}
