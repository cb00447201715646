#include "htopt/verify.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace htopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

bool bit_equal(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  return a.empty() ||
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}
}  // namespace

bool OloTrace::holds(double slack) const {
  for (std::size_t t = 0; t < prefix_lhs.size(); ++t) {
    if (prefix_lhs[t] > prefix_rhs[t] + slack * (1.0 + std::fabs(prefix_rhs[t])))
      return false;
  }
  return true;
}

OloTrace olo_check(const std::vector<Vec>& v) {
  OloTrace trace;
  if (v.empty()) return trace;
  const std::size_t dim = v[0].size();
  for (const Vec& vt : v)
    if (vt.size() != dim) throw std::invalid_argument("olo_check: dimension mismatch");

  Vec w(dim, 0.0);
  Vec running_sum(dim, 0.0);
  double sumsq = 0.0;
  double inner_sum = 0.0;  // sum of <v_t, w_t>
  for (const Vec& vt : v) {
    trace.weights.push_back(w);
    const double vsq = dot(vt, vt);
    sumsq += vsq;
    const double gamma = sumsq > 0.0 ? std::sqrt(2.0 / sumsq) : kInf;
    trace.stepsizes.push_back(gamma);

    inner_sum += dot(vt, w);
    axpy(1.0, vt, running_sum);
    trace.prefix_lhs.push_back(norm(running_sum));
    trace.prefix_rhs.push_back(2.0 * std::sqrt(2.0 * sumsq) - inner_sum);

    // w_{t+1} = proj onto the unit ball of (w_t - gamma_t v_t); before the
    // first nonzero v the construction has not started and w stays 0.
    if (sumsq > 0.0) {
      axpy(-gamma, vt, w);
      const double wn = norm(w);
      if (wn > 1.0)
        for (double& c : w) c /= wn;
    }
  }
  trace.lhs = trace.prefix_lhs.back();
  trace.rhs = trace.prefix_rhs.back();
  return trace;
}

bool olo_causality_check(const std::vector<Vec>& v, int t, RandomStream& stream,
                         int n_tails) {
  if (t < 1 || t > static_cast<int>(v.size()))
    throw std::out_of_range("olo_causality_check: index out of range");
  const std::size_t dim = v.empty() ? 0 : v[0].size();
  const Vec reference = olo_check(v).weights[t - 1];

  for (int k = 0; k < n_tails; ++k) {
    std::vector<Vec> padded(v.begin(), v.begin() + (t - 1));
    for (std::size_t s = t - 1; s < v.size(); ++s) {
      Vec tail(dim);
      for (double& c : tail) c = 10.0 * stream.next_gaussian();
      padded.push_back(std::move(tail));
    }
    if (!bit_equal(olo_check(padded).weights[t - 1], reference)) return false;
  }
  return true;
}

double decomposition_residual(const OptimizerTrace& trace, const Problem& problem) {
  if (!trace.full || trace.steps < 1)
    throw std::invalid_argument("decomposition_residual: full trace required");
  const long T = trace.steps;

  // grad F(x_t) for t = 1..T (trace.x[t-1] holds x_t)
  std::vector<Vec> grads(T);
  for (long t = 0; t < T; ++t) grads[t] = problem.grad_at(trace.x[t]);
  const Vec eps0 = sub(trace.g[0], grads[0]);

  double worst = 0.0;
  for (long t = 1; t <= T; ++t) {
    // suffix products beta_{s:t} accumulated from s = t down to 1
    Vec rhs(problem.dim, 0.0);
    double beta_suffix = 1.0;  // beta_{s+1:t}, starts at beta_{t+1:t} = 1
    for (long s = t; s >= 1; --s) {
      const double beta_s = trace.beta_used[s - 1];
      // noise term (1-beta_s) beta_{s+1:t} xi_s
      const Vec xi = sub(trace.g[s - 1], grads[s - 1]);
      axpy((1.0 - beta_s) * beta_suffix, xi, rhs);
      beta_suffix *= beta_s;  // now beta_{s:t}
      // drift term beta_{s:t} D_s, D_1 = 0
      if (s >= 2) {
        const Vec drift = sub(grads[s - 2], grads[s - 1]);
        axpy(beta_suffix, drift, rhs);
      }
    }
    axpy(beta_suffix, eps0, rhs);  // beta_{1:t} eps_0

    const Vec eps_t = sub(trace.m[t - 1], grads[t - 1]);
    worst = std::max(worst, norm(sub(eps_t, rhs)) / (1.0 + norm(trace.m[t - 1])));
  }
  return worst;
}

double descent_residual(const OptimizerTrace& trace, const Problem& problem) {
  if (!trace.full || trace.steps < 1)
    throw std::invalid_argument("descent_residual: full trace required");
  if (trace.method != Method::Nsgdm)
    throw std::invalid_argument("descent_residual: applies to nsgdm traces");

  double worst = 0.0;
  double f_cur = problem.value_at(trace.x[0]);
  for (long t = 1; t <= trace.steps; ++t) {
    const double eta = trace.eta_used[t - 1];
    if (problem.L1 > 0.0 && eta > 1.0 / problem.L1)
      throw std::domain_error("descent_residual: eta exceeds 1/L1");
    const Vec grad = problem.grad_at(trace.x[t - 1]);
    const double gn = norm(grad);
    const double eps_n = norm(sub(trace.m[t - 1], grad));
    const double f_next = problem.value_at(trace.x[t]);
    const double bound = f_cur - eta * gn + 2.0 * eta * eps_n +
                         0.5 * (problem.L0 + problem.L1 * gn) * eta * eta;
    worst = std::max(worst, (f_next - bound) / (1.0 + std::fabs(f_cur)));
    f_cur = f_next;
  }
  return std::max(worst, 0.0);
}

RatioEstimate martingale_ratio(const MdsSpec& spec, int T, int trials, double p,
                               RandomStream& stream) {
  if (trials < 1 || T < 1)
    throw std::invalid_argument("martingale_ratio: T and trials must be >= 1");
  if (!(p >= 1.0 && p <= 2.0))
    throw std::invalid_argument("martingale_ratio: p must lie in [1,2]");

  double num_sum = 0.0, num_sumsq = 0.0;
  double den_sum = 0.0, den_sumsq = 0.0;
  Vec running(spec.dim, 0.0);
  Vec draw(spec.dim, 0.0);

  for (int trial = 0; trial < trials; ++trial) {
    std::fill(running.begin(), running.end(), 0.0);
    double pow_sum = 0.0;
    double coord_sum = 0.0;  // drives the state-dependent scale
    for (int t = 0; t < T; ++t) {
      double scale = spec.scale;
      if (spec.kind == MdsKind::StateScaledPareto && coord_sum > 0.0)
        scale *= 1.5;
      for (int i = 0; i < spec.dim; ++i) {
        draw[i] = spec.kind == MdsKind::IidGaussian
                      ? scale * stream.next_gaussian()
                      : stream.next_symmetric_pareto(spec.shape, scale);
      }
      for (int i = 0; i < spec.dim; ++i) {
        running[i] += draw[i];
        coord_sum += draw[i];
      }
      pow_sum += std::pow(norm(draw), p);
    }
    const double num = norm(running);
    const double den = std::pow(pow_sum, 1.0 / p);
    num_sum += num;
    num_sumsq += num * num;
    den_sum += den;
    den_sumsq += den * den;
  }

  const double n = static_cast<double>(trials);
  RatioEstimate est;
  est.numerator = num_sum / n;
  est.denominator = den_sum / n;
  const double num_se =
      std::sqrt(std::max(0.0, num_sumsq / n - est.numerator * est.numerator) / n);
  const double den_se =
      std::sqrt(std::max(0.0, den_sumsq / n - est.denominator * est.denominator) / n);
  est.stable = est.denominator > 10.0 * den_se;
  est.ratio = est.numerator / est.denominator;
  // delta method: var(a/b) ~ (a/b)^2 ((se_a/a)^2 + (se_b/b)^2)
  est.std_error = est.ratio * std::sqrt(std::pow(num_se / est.numerator, 2) +
                                        std::pow(den_se / est.denominator, 2));
  return est;
}

std::vector<CheckResult> verify_suite(std::uint64_t seed) {
  std::vector<CheckResult> results;
  const double kTwoSqrt2 = 2.0 * std::sqrt(2.0);

  {  // OLO inequality over random sequences
    RandomStream stream(derive_seed(seed, 1));
    bool all_hold = true;
    double worst_margin = kInf;
    for (int rep = 0; rep < 200; ++rep) {
      const int dim = rep % 3 == 0 ? 1 : (rep % 3 == 1 ? 3 : 16);
      std::vector<Vec> v(64, Vec(dim));
      for (Vec& vt : v)
        for (double& c : vt)
          c = rep % 2 == 0 ? stream.next_gaussian()
                           : stream.next_symmetric_pareto(1.6, 1.0);
      const OloTrace trace = olo_check(v);
      all_hold = all_hold && trace.holds();
      for (std::size_t t = 0; t < trace.prefix_lhs.size(); ++t)
        worst_margin = std::min(worst_margin,
                                trace.prefix_rhs[t] - trace.prefix_lhs[t]);
    }
    results.push_back({"olo_inequality_random_sequences", all_hold, worst_margin,
                       0.0, "min over prefixes of rhs-lhs; bound is 0"});
  }

  {  // OLO causality
    RandomStream stream(derive_seed(seed, 2));
    bool ok = true;
    for (int rep = 0; rep < 20 && ok; ++rep) {
      std::vector<Vec> v(32, Vec(3));
      for (Vec& vt : v)
        for (double& c : vt) c = stream.next_symmetric_pareto(1.6, 1.0);
      const int t = 1 + static_cast<int>(stream.next_u64() % 32);
      ok = olo_causality_check(v, t, stream);
    }
    results.push_back({"olo_weight_causality", ok, ok ? 1.0 : 0.0, 1.0,
                       "w_t identical under replacement tails"});
  }

  {  // decomposition identity on an nsgdm run
    RandomStream stream(derive_seed(seed, 3));
    const Problem quad = make_quadratic(
        5, Vec{0.2, 0.4, 0.6, 0.8, 1.0}, Vec(5, 0.0), Vec(5, 1.0));
    const StochasticOracle oracle =
        make_additive_oracle(quad, NoiseKind::SymmetricPareto, 1.7, 0.5, 1, 1.5);
    const Schedule manual{0.9, 0.05, 1, ScheduleKind::Manual};
    const OptimizerTrace trace =
        run_optimizer(Method::Nsgdm, quad, oracle, manual, 100, kInf, stream, true);
    const double res = decomposition_residual(trace, quad);
    results.push_back({"momentum_error_decomposition", res <= 1e-8, res, 1e-8, ""});
  }

  {  // martingale ratio bound; unstable denominators are flagged, not asserted
    RandomStream stream(derive_seed(seed, 4));
    bool ok = true;
    int stable_count = 0, flagged = 0;
    double worst = 0.0;
    for (double p : {1.2, 1.5, 2.0}) {
      const MdsSpec iid{MdsKind::IidPareto, p + 0.4, 1.0, 3};
      const MdsSpec dep{MdsKind::StateScaledPareto, p + 0.4, 1.0, 3};
      for (const MdsSpec& spec : {iid, dep}) {
        const RatioEstimate est = martingale_ratio(spec, 64, 10000, p, stream);
        if (!est.stable) {
          flagged += 1;
          continue;
        }
        stable_count += 1;
        ok = ok && est.ratio <= kTwoSqrt2 + 3.0 * est.std_error;
        worst = std::max(worst, est.ratio);
      }
    }
    ok = ok && stable_count >= 3;  // no vacuous pass
    std::string note = "worst stable ratio of E||sum v|| / E[(sum ||v||^p)^(1/p)]";
    if (flagged > 0) note += "; " + std::to_string(flagged) + " combo(s) flagged unstable";
    results.push_back({"martingale_ratio_bound", ok, worst, kTwoSqrt2, note});
  }

  {  // per-trajectory descent inequality
    RandomStream stream(derive_seed(seed, 5));
    const Problem quad = make_quadratic(
        5, Vec{0.2, 0.4, 0.6, 0.8, 1.0}, Vec(5, 0.0), Vec(5, 1.0));
    const StochasticOracle oracle =
        make_additive_oracle(quad, NoiseKind::SymmetricPareto, 1.7, 0.5, 1, 1.5);
    const Schedule schedule = known_p_schedule(
        quad.value_at(quad.x1), quad.L0, 0.0,
        oracle.meta.sigma0, 0.0, norm(quad.grad_at(quad.x1)), 1.5, 200);
    const OptimizerTrace trace =
        run_optimizer(Method::Nsgdm, quad, oracle, schedule, 200, kInf, stream, true);
    const double res = descent_residual(trace, quad);
    results.push_back({"descent_inequality", res <= 1e-9, res, 1e-9, ""});
  }

  {  // hard-instance gradient properties, sampled
    RandomStream stream(derive_seed(seed, 6));
    const int d = 16;
    bool ok = true;
    double worst_inf = 0.0;
    Vec x(d);
    for (int rep = 0; rep < 1000; ++rep) {
      for (double& c : x) c = stream.next_gaussian();
      const Vec g = chain_grad(x, d);
      worst_inf = std::max(worst_inf, norm_inf(g));
      ok = ok && norm_inf(g) <= HardInstanceParams::kGamma;
      ok = ok && prog_alpha(g, 0.0) <= prog_alpha(x, 0.5) + 1;
      if (prog_alpha(x, 1.0) < d) ok = ok && norm(g) > 1.0;
    }
    results.push_back({"chain_gradient_properties", ok, worst_inf,
                       HardInstanceParams::kGamma,
                       "max ||grad f_d||_inf over 1000 gaussian points"});
  }

  {  // zero-chain exact unbiasedness by 2-point enumeration
    const HardInstanceParams params = HardInstanceParams::make(1.5, 1.0, 1.0, 1.0, 0.005);
    const Problem hard = make_hard_instance(params);
    RandomStream stream(derive_seed(seed, 7));
    double worst = 0.0;
    Vec x(params.d);
    for (int rep = 0; rep < 100; ++rep) {
      for (double& c : x) c = params.lambda * stream.next_gaussian();
      const Vec g0 = zero_chain_outcome(params, x, 0);
      const Vec g1 = zero_chain_outcome(params, x, 1);
      const Vec truth = hard.grad_at(x);
      Vec mix(params.d);
      for (int j = 0; j < params.d; ++j)
        mix[j] = params.q * g1[j] + (1.0 - params.q) * g0[j];
      worst = std::max(worst, norm(sub(mix, truth)) / (1.0 + norm(truth)));
    }
    results.push_back({"zero_chain_unbiasedness", worst <= 1e-12, worst, 1e-12,
                       "q*g(x,1)+(1-q)*g(x,0) vs grad F_d"});
  }

  {  // moment contracts
    RandomStream stream(derive_seed(seed, 8));
    const Problem quad = make_quadratic(
        5, Vec{0.2, 0.4, 0.6, 0.8, 1.0}, Vec(5, 0.0), Vec(5, 1.0));
    const StochasticOracle oracle =
        make_additive_oracle(quad, NoiseKind::SymmetricPareto, 3.0, 1.0, 1, 1.5);
    const MomentEstimate est = empirical_moment(oracle, quad.x1, 1.5, 10000, stream);
    const double bound = std::pow(oracle.meta.sigma0, 1.5);
    results.push_back({"additive_moment_contract", est.mean <= bound * 1.05,
                       est.mean, bound, "E||xi||^p vs certified sigma0^p"});
  }

  return results;
}

}  // namespace htopt
