#include <doctest.h>

#include <cmath>
#include <limits>

#include "htopt/optim.hpp"

using namespace htopt;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("known_p_schedule hand-checked values") {
  // Delta1=1, L0=1, L1=0, sigma0=1, sigma1=0, p=2, T=100:
  // beta = 1 - max{0.01^(2/3), 0.01^(1/2)} = 0.9, eta = sqrt(0.1/100)
  const Schedule s = known_p_schedule(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 2.0, 100);
  CHECK(s.beta == doctest::Approx(0.9).epsilon(1e-13));
  CHECK(s.eta == doctest::Approx(0.031622776601683791).epsilon(1e-13));
  CHECK(s.B == 1);

  // T = 1 with the max >= 1: the min clamps and beta = 0
  const Schedule t1 = known_p_schedule(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 2.0, 1);
  CHECK(t1.beta == 0.0);

  // sigma1 = 0 always gives B = 1
  CHECK(known_p_schedule(2.0, 3.0, 1.0, 0.5, 0.0, 1.0, 1.5, 1000).B == 1);
}

TEST_CASE("known_p_schedule noiseless degenerate") {
  const Schedule s = known_p_schedule(1.0, 4.0, 0.0, 0.0, 0.0, 0.0, 2.0, 100);
  CHECK(s.beta == 0.0);
  CHECK(s.eta == doctest::Approx(std::sqrt(1.0 / 400.0)).epsilon(1e-14));
  const Schedule with_l1 = known_p_schedule(1.0, 4.0, 2.0, 0.0, 0.0, 0.0, 2.0, 100);
  CHECK(with_l1.eta == doctest::Approx(std::min(0.05, 1.0 / 16.0)).epsilon(1e-14));
}

TEST_CASE("known_p_schedule honors the L1 stepsize cap") {
  const Schedule s = known_p_schedule(1.0, 1.0, 10.0, 1.0, 0.5, 2.0, 1.5, 50);
  CHECK(s.eta <= (1.0 - s.beta) / (8.0 * 10.0) * (1.0 + 1e-12));
  CHECK(s.eta > 0.0);
}

TEST_CASE("unknown_p_schedule quoted constants") {
  const Schedule s16 = unknown_p_schedule(16, 0.0);
  CHECK(s16.beta == 0.75);
  CHECK(s16.eta == 0.125);
  CHECK(s16.B == 1);

  const Schedule s100 = unknown_p_schedule(100, 1.0);
  CHECK(s100.eta == doctest::Approx(0.0125).epsilon(1e-14));

  CHECK(unknown_p_schedule(1, 0.0).beta == 0.0);
}

TEST_CASE("unknown_p_schedule_full batch branch") {
  CHECK(unknown_p_schedule_full(16, 0.0, 0.02).B == 1);  // below 1/(16*sqrt(2))
  CHECK(unknown_p_schedule_full(16, 0.0, 0.0).B == 1);
  CHECK(unknown_p_schedule_full(16, 0.0, 1.0, 2.0).B == 512);  // (16*sqrt(2))^2
  CHECK_THROWS_WITH_AS(unknown_p_schedule_full(16, 0.0, 1.0),
                       doctest::Contains("tail index required"),
                       std::invalid_argument);
}

TEST_CASE("nsgdm_step recursion") {
  SUBCASE("zero momentum and zero gradient leave x unchanged") {
    OptimizerState state;
    state.x = Vec{1.0, 2.0};
    state.m = Vec{0.0, 0.0};
    nsgdm_step(state, {Vec{0.0, 0.0}}, 0.5, 0.1);
    CHECK(state.x == Vec{1.0, 2.0});
  }

  SUBCASE("beta = 0 is a pure normalized step") {
    OptimizerState state;
    state.x = Vec{0.0, 0.0};
    state.m = Vec{5.0, -1.0};
    nsgdm_step(state, {Vec{3.0, 4.0}}, 0.0, 1.0);
    CHECK(state.m == Vec{3.0, 4.0});
    CHECK(state.x[0] == doctest::Approx(-0.6).epsilon(1e-15));
    CHECK(state.x[1] == doctest::Approx(-0.8).epsilon(1e-15));
  }

  SUBCASE("hand-evaluated beta = 0.5 step") {
    OptimizerState state;
    state.x = Vec{0.0, 0.0};
    state.m = Vec{1.0, 0.0};
    nsgdm_step(state, {Vec{0.0, 1.0}}, 0.5, 0.1);
    CHECK(state.m[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(state.m[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(state.x[0] == doctest::Approx(-0.070710678118654752).epsilon(1e-13));
    CHECK(state.x[1] == doctest::Approx(-0.070710678118654752).epsilon(1e-13));
  }

  SUBCASE("first step seeds m_0 = g_1 for any beta") {
    OptimizerState state;
    state.x = Vec{0.0};
    nsgdm_step(state, {Vec{2.0}}, 0.9, 0.1);
    CHECK(state.m == Vec{2.0});
  }

  CHECK_THROWS_AS(batch_mean({}), std::invalid_argument);
}

TEST_CASE("ssgdm_step sign updates") {
  OptimizerState state;
  state.x = Vec{0.0, 0.0, 0.0};
  state.m = Vec{1.0, 1.0, 1.0};
  const Vec eta{0.1, 0.1, 0.1};
  // beta = 1 freezes m at its previous value, so the step uses m as-is
  state.m = Vec{3.0, -0.1, 0.0};
  ssgdm_step(state, {Vec{9.0, 9.0, 9.0}}, 1.0, eta);
  CHECK(state.m == Vec{3.0, -0.1, 0.0});
  CHECK(state.x[0] == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(state.x[1] == doctest::Approx(+0.1).epsilon(1e-15));
  CHECK(state.x[2] == 0.0);
}

TEST_CASE("ssgdm equals nsgdm in one dimension") {
  OptimizerState a, b;
  a.x = Vec{2.0};
  b.x = Vec{2.0};
  const Vec eta{0.3};
  RandomStream stream(6);
  for (int t = 0; t < 20; ++t) {
    const Vec g{stream.next_gaussian()};
    nsgdm_step(a, {g}, 0.7, 0.3);
    ssgdm_step(b, {g}, 0.7, eta);
    CHECK(a.x[0] == doctest::Approx(b.x[0]).epsilon(1e-12));
  }
}

TEST_CASE("clip_gradient") {
  const Vec g{3.0, 4.0};
  CHECK(clip_gradient(g, kInf) == g);
  const Vec clipped = clip_gradient(g, 1.0);
  CHECK(clipped[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(clipped[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(clip_gradient(g, 10.0) == g);  // inside the ball
  CHECK(norm(clip_gradient(g, 2.0)) <= 2.0 * (1.0 + 1e-12));
  // direction preserved
  const Vec c = clip_gradient(g, 0.5);
  CHECK(c[0] / c[1] == doctest::Approx(g[0] / g[1]).epsilon(1e-13));
  // zero vector stays zero under finite tau
  CHECK(clip_gradient(Vec{0.0, 0.0}, 1.0) == Vec{0.0, 0.0});
}

TEST_CASE("run_optimizer: step-length invariant and determinism") {
  const Problem quad = make_quadratic(3, Vec{0.5, 1.0, 1.5}, Vec(3, 0.0), Vec(3, 2.0));
  const StochasticOracle oracle =
      make_additive_oracle(quad, NoiseKind::SymmetricPareto, 2.0, 0.5, 1, 1.5);
  const Schedule manual{0.8, 0.05, 1, ScheduleKind::Manual};

  RandomStream s1(10), s2(10);
  const OptimizerTrace t1 =
      run_optimizer(Method::Nsgdm, quad, oracle, manual, 200, kInf, s1, true);
  const OptimizerTrace t2 =
      run_optimizer(Method::Nsgdm, quad, oracle, manual, 200, kInf, s2, true);
  CHECK(t1.grad_norms == t2.grad_norms);  // identical seed, identical trace

  for (long t = 1; t <= t1.steps; ++t) {
    const double len = norm(sub(t1.x[t], t1.x[t - 1]));
    const bool zero_step = len == 0.0;
    const bool full_step = std::fabs(len - manual.eta) <= 1e-12 * manual.eta;
    CHECK((zero_step || full_step));
  }
}

TEST_CASE("run_optimizer: momentum is a convex combination of past gradients") {
  const Problem quad = make_quadratic(2, Vec{1.0, 2.0}, Vec(2, 0.0), Vec(2, 1.0));
  const StochasticOracle oracle =
      make_additive_oracle(quad, NoiseKind::Gaussian, 0.0, 1.0, 1, 2.0);
  const Schedule manual{0.9, 0.02, 1, ScheduleKind::Manual};
  RandomStream stream(21);
  const OptimizerTrace trace =
      run_optimizer(Method::Nsgdm, quad, oracle, manual, 50, kInf, stream, true);

  for (long t = 1; t <= trace.steps; ++t) {
    // replay coefficients: m_t = beta^t g_1 + sum_s (1-beta_s) beta^(t-s) g_s
    double coeff_sum = 0.0;
    Vec recon(2, 0.0);
    double suffix = 1.0;
    for (long s = t; s >= 1; --s) {
      const double beta_s = trace.beta_used[s - 1];
      const double c = (1.0 - beta_s) * suffix;
      CHECK(c >= 0.0);
      coeff_sum += c;
      axpy(c, trace.g[s - 1], recon);
      suffix *= beta_s;
    }
    coeff_sum += suffix;  // beta_{1:t} weight on m_0 = g_1
    axpy(suffix, trace.g[0], recon);
    CHECK(coeff_sum == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(norm(sub(recon, trace.m[t - 1])) <= 1e-10 * (1.0 + norm(trace.m[t - 1])));
  }
}

TEST_CASE("run_optimizer: noiseless nsgdm ends inside an eta-ball of the minimizer") {
  const Problem quad = make_quadratic(2, Vec{1.0, 1.0}, Vec(2, 0.0), Vec{3.0, 4.0});
  const StochasticOracle oracle =
      make_additive_oracle(quad, NoiseKind::Gaussian, 0.0, 0.0, 1, 2.0);
  const Schedule manual{0.0, 0.05, 1, ScheduleKind::Manual};
  RandomStream stream(1);
  const OptimizerTrace trace =
      run_optimizer(Method::Nsgdm, quad, oracle, manual, 500, kInf, stream, true);
  // fixed-length steps cannot settle exactly; they hover near the optimum
  const double tail_norm = trace.grad_norms.back();
  CHECK(tail_norm <= quad.L0 * manual.eta * 1.5);
  CHECK(tail_norm > 0.0);
}

TEST_CASE("run_optimizer: beta = 0, B = 1 collapses to normalized SGD") {
  const Problem quad = make_quadratic(2, Vec{0.5, 1.0}, Vec(2, 0.0), Vec(2, 1.0));
  const StochasticOracle oracle =
      make_additive_oracle(quad, NoiseKind::Gaussian, 0.0, 0.7, 1, 2.0);
  const Schedule manual{0.0, 0.1, 1, ScheduleKind::Manual};
  RandomStream s1(33);
  const OptimizerTrace trace =
      run_optimizer(Method::Nsgdm, quad, oracle, manual, 40, kInf, s1, true);

  // replay by hand with the same stream
  RandomStream s2(33);
  Vec x = quad.x1;
  for (long t = 1; t <= 40; ++t) {
    const Vec g = oracle.sample(x, 1, s2)[0];
    CHECK(norm(sub(g, trace.g[t - 1])) == 0.0);
    const double gn = norm(g);
    if (gn > 0.0) axpy(-manual.eta / gn, g, x);
    CHECK(norm(sub(x, trace.x[t])) == 0.0);
  }
}

TEST_CASE("run_optimizer: clipped-sgd caps every step at eta*tau") {
  const Problem quad = make_quadratic(2, Vec{1.0, 2.0}, Vec(2, 0.0), Vec{5.0, 5.0});
  const StochasticOracle oracle =
      make_additive_oracle(quad, NoiseKind::SymmetricPareto, 1.5, 2.0, 1, 1.3);
  const Schedule manual{0.0, 0.1, 1, ScheduleKind::Manual};
  const double tau = 2.5;
  RandomStream stream(55);
  const OptimizerTrace trace = run_optimizer(Method::ClippedSgd, quad, oracle,
                                             manual, 100, tau, stream, true);
  for (long t = 1; t <= trace.steps; ++t) {
    CHECK(norm(sub(trace.x[t], trace.x[t - 1])) <=
          manual.eta * tau * (1.0 + 1e-12));
  }
  CHECK(!trace.diverged);
}

TEST_CASE("run_optimizer: plain SGD with an unstable stepsize sets the divergence flag") {
  const Problem quad = make_quadratic(1, Vec{1.0}, Vec{0.0}, Vec{1.0});
  const StochasticOracle oracle =
      make_additive_oracle(quad, NoiseKind::Gaussian, 0.0, 0.0, 1, 2.0);
  const Schedule manual{0.0, 3.0, 1, ScheduleKind::Manual};  // |1 - eta| = 2 doubles x
  RandomStream stream(1);
  const OptimizerTrace trace =
      run_optimizer(Method::Sgd, quad, oracle, manual, 5000, kInf, stream, false);
  CHECK(trace.diverged);
  CHECK(trace.steps < 5000);
}
