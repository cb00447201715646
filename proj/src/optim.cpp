#include "htopt/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace htopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// ceil with a relative guard against last-ulp excess
long ceil_guarded(double x) {
  return static_cast<long>(std::ceil(x - 1e-9 * std::max(1.0, std::fabs(x))));
}
}  // namespace

Method method_from_string(const std::string& name) {
  if (name == "nsgdm") return Method::Nsgdm;
  if (name == "ssgdm") return Method::Ssgdm;
  if (name == "clipped-sgd" || name == "clipped_sgd") return Method::ClippedSgd;
  if (name == "sgd") return Method::Sgd;
  throw std::invalid_argument("unknown method: " + name);
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Nsgdm: return "nsgdm";
    case Method::Ssgdm: return "ssgdm";
    case Method::ClippedSgd: return "clipped-sgd";
    case Method::Sgd: return "sgd";
  }
  return "?";
}

int schedule_batch(double sigma1, double p) {
  if (sigma1 < 0.0) throw std::invalid_argument("schedule: sigma1 must be nonnegative");
  if (sigma1 == 0.0) return 1;
  if (!(p > 1.0 && p <= 2.0)) throw std::invalid_argument("schedule: p must lie in (1,2]");
  const double raw = std::pow(16.0 * std::sqrt(2.0) * sigma1, p / (p - 1.0));
  return static_cast<int>(std::max<long>(ceil_guarded(raw), 1));
}

Schedule known_p_schedule(double Delta1, double L0, double L1, double sigma0,
                          double sigma1, double grad_norm_x1, double p, long T) {
  if (T < 1) throw std::invalid_argument("schedule: T must be >= 1");
  if (!(Delta1 > 0.0 && L0 > 0.0))
    throw std::invalid_argument("schedule: Delta1 and L0 must be positive");
  if (!(p > 1.0 && p <= 2.0)) throw std::invalid_argument("schedule: p must lie in (1,2]");
  if (L1 < 0.0 || sigma0 < 0.0 || sigma1 < 0.0)
    throw std::invalid_argument("schedule: constants must be nonnegative");

  Schedule s;
  s.provenance = ScheduleKind::KnownP;
  s.B = schedule_batch(sigma1, p);
  const double Td = static_cast<double>(T);

  if (sigma0 == 0.0) {
    // noiseless degenerate: the max argument blows up, driving beta to 0
    s.beta = 0.0;
  } else {
    const double Bp = static_cast<double>(s.B);
    const double u = std::pow((Delta1 * L1 * std::pow(Bp, (p - 1.0) / p) + sigma0 +
                               sigma1 * grad_norm_x1) /
                                  (sigma0 * Td),
                              p / (2.0 * p - 1.0));
    const double v = std::pow(Delta1 * L0 * std::pow(Bp, 2.0 * (p - 1.0) / p) /
                                  (sigma0 * sigma0 * Td),
                              p / (3.0 * p - 2.0));
    s.beta = 1.0 - std::min(1.0, std::max(u, v));
  }

  const double cap = L1 > 0.0 ? (1.0 - s.beta) / (8.0 * L1) : kInf;
  s.eta = std::min(std::sqrt((1.0 - s.beta) * Delta1 / (L0 * Td)), cap);
  return s;
}

Schedule unknown_p_schedule(long T, double L1) {
  if (T < 1) throw std::invalid_argument("schedule: T must be >= 1");
  if (L1 < 0.0) throw std::invalid_argument("schedule: L1 must be nonnegative");
  Schedule s;
  s.provenance = ScheduleKind::UnknownP;
  const double Td = static_cast<double>(T);
  s.beta = 1.0 - 1.0 / std::sqrt(Td);
  const double cap = L1 > 0.0 ? 1.0 / (8.0 * L1 * std::sqrt(Td)) : kInf;
  s.eta = std::min(std::pow(Td, -0.75), cap);
  s.B = 1;
  return s;
}

Schedule unknown_p_schedule_full(long T, double L1, double sigma1,
                                 std::optional<double> p) {
  Schedule s = unknown_p_schedule(T, L1);
  if (sigma1 < 0.0) throw std::invalid_argument("schedule: sigma1 must be nonnegative");
  if (sigma1 <= 1.0 / (16.0 * std::sqrt(2.0))) {
    s.B = 1;
    return s;
  }
  if (!p.has_value())
    throw std::invalid_argument(
        "schedule: tail index required when sigma1 > 1/(16*sqrt(2))");
  s.B = schedule_batch(sigma1, *p);
  return s;
}

Vec batch_mean(const std::vector<Vec>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Vec mean(batch[0].size(), 0.0);
  for (const Vec& g : batch) axpy(1.0, g, mean);
  for (double& v : mean) v /= static_cast<double>(batch.size());
  return mean;
}

static void momentum_update(OptimizerState& state, const Vec& g, double beta) {
  if (state.m.empty()) state.m = g;  // m_0 = g_1
  for (std::size_t i = 0; i < state.m.size(); ++i)
    state.m[i] = beta * state.m[i] + (1.0 - beta) * g[i];
}

void nsgdm_step(OptimizerState& state, const std::vector<Vec>& batch,
                double beta, double eta) {
  const Vec g = batch_mean(batch);
  momentum_update(state, g, beta);
  const double mn = norm(state.m);
  if (mn > 0.0) axpy(-eta / mn, state.m, state.x);
  state.t += 1;
}

void ssgdm_step(OptimizerState& state, const std::vector<Vec>& batch,
                double beta, std::span<const double> eta) {
  const Vec g = batch_mean(batch);
  momentum_update(state, g, beta);
  for (std::size_t i = 0; i < state.x.size(); ++i) {
    if (state.m[i] > 0.0) state.x[i] -= eta[i];
    else if (state.m[i] < 0.0) state.x[i] += eta[i];
  }
  state.t += 1;
}

Vec clip_gradient(std::span<const double> g, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("clip: tau must be positive");
  const double gn = norm(g);
  const double factor = std::min(1.0, tau / gn);  // tau/0 = inf -> min picks 1
  return scaled(g, std::isfinite(factor) ? factor : 1.0);
}

OptimizerTrace run_optimizer(Method method, const Problem& problem,
                             const StochasticOracle& oracle,
                             const Schedule& schedule, long T, double clip_tau,
                             RandomStream& stream, bool record_full) {
  if (T < 1) throw std::invalid_argument("run_optimizer: T must be >= 1");
  if (schedule.B < 1 || !(schedule.eta > 0.0) || schedule.beta < 0.0 ||
      schedule.beta > 1.0)
    throw std::invalid_argument("run_optimizer: invalid schedule");

  OptimizerTrace trace;
  trace.method = method;
  trace.full = record_full;
  trace.grad_norms.reserve(T);

  OptimizerState state;
  state.x = problem.x1;
  const Vec eta_vec(problem.dim, schedule.eta);
  if (record_full) trace.x.push_back(state.x);

  double sum_norm = 0.0;
  for (long t = 1; t <= T; ++t) {
    const Vec grad = problem.grad_at(state.x);
    if (!all_finite(grad)) {
      trace.diverged = true;
      break;
    }
    trace.grad_norms.push_back(norm(grad));
    sum_norm += trace.grad_norms.back();

    std::vector<Vec> batch = oracle.sample(state.x, schedule.B, stream);
    const Vec gmean = batch_mean(batch);
    switch (method) {
      case Method::Nsgdm:
        nsgdm_step(state, batch, schedule.beta, schedule.eta);
        break;
      case Method::Ssgdm:
        ssgdm_step(state, batch, schedule.beta, eta_vec);
        break;
      case Method::ClippedSgd:
      case Method::Sgd: {
        const Vec ghat = method == Method::ClippedSgd
                             ? clip_gradient(gmean, clip_tau)
                             : gmean;
        axpy(-schedule.eta, ghat, state.x);
        state.m = ghat;
        state.t += 1;
        break;
      }
    }
    trace.beta_used.push_back(schedule.beta);
    trace.eta_used.push_back(schedule.eta);
    if (record_full) {
      trace.g.push_back(gmean);
      trace.m.push_back(state.m);
      trace.x.push_back(state.x);
    }
    trace.steps = t;
    if (!all_finite(state.x)) {
      trace.diverged = true;
      break;
    }
  }
  trace.avg_grad_norm = trace.steps > 0
                            ? sum_norm / static_cast<double>(trace.steps)
                            : std::numeric_limits<double>::infinity();
  return trace;
}

}  // namespace htopt
