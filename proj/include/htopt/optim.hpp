#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "htopt/noise.hpp"
#include "htopt/problems.hpp"
#include "htopt/random.hpp"
#include "htopt/vec.hpp"

namespace htopt {

enum class Method { Nsgdm, Ssgdm, ClippedSgd, Sgd };

Method method_from_string(const std::string& name);
std::string to_string(Method method);

enum class ScheduleKind { KnownP, UnknownP, Manual };

struct Schedule {
  double beta = 0.0;
  double eta = 0.0;
  int B = 1;
  ScheduleKind provenance = ScheduleKind::Manual;
};

// Batch size max{ceil((16*sqrt(2)*sigma1)^(p/(p-1))), 1}. The ceiling is taken
// with a 1e-9 relative guard so borderline real-arithmetic integers (e.g. 512
// at sigma1 = 1, p = 2) round to themselves.
int schedule_batch(double sigma1, double p);

// Constants for the known-tail-index regime. sigma0 = 0 degenerates to the
// noiseless choice beta = 0, eta = min{sqrt(Delta1/(L0*T)), 1/(8*L1)}.
Schedule known_p_schedule(double Delta1, double L0, double L1, double sigma0,
                          double sigma1, double grad_norm_x1, double p, long T);

// Parameter-free choice: beta = 1 - T^(-1/2), eta = min{T^(-3/4), 1/(8*L1*sqrt(T))}, B = 1.
Schedule unknown_p_schedule(long T, double L1);

// Same beta/eta; B = 1 whenever sigma1 <= 1/(16*sqrt(2)), otherwise the batch
// formula applies and the tail index is required.
Schedule unknown_p_schedule_full(long T, double L1, double sigma1,
                                 std::optional<double> p = std::nullopt);

struct OptimizerState {
  long t = 0;  // completed iterations
  Vec x;
  Vec m;  // empty until the first step seeds m_0 = g_1
};

Vec batch_mean(const std::vector<Vec>& batch);

// m <- beta*m + (1-beta)*mean(batch); x <- x - eta*m/||m|| with 0/||0|| = 0.
// The first call uses the batch mean as m_0, so m_1 = g_1 for any beta.
void nsgdm_step(OptimizerState& state, const std::vector<Vec>& batch,
                double beta, double eta);

// Same momentum recursion, per-coordinate sign update with 0/|0| = 0.
void ssgdm_step(OptimizerState& state, const std::vector<Vec>& batch,
                double beta, std::span<const double> eta);

// min{1, tau/||g||} * g; tau = +inf leaves g unchanged.
Vec clip_gradient(std::span<const double> g, double tau);

struct OptimizerTrace {
  Method method = Method::Nsgdm;
  long steps = 0;             // iterations completed (diverged runs stop early)
  bool diverged = false;
  std::vector<double> grad_norms;  // ||grad F(x_t)||, t = 1..steps
  std::vector<double> beta_used;
  std::vector<double> eta_used;
  double avg_grad_norm = 0.0;  // (1/steps) * sum of grad_norms

  // full per-step records, only when requested:
  // x[t] = x_{t+1} for t = 0..steps (x[0] is the initial point),
  // m[t-1] = m_t and g[t-1] = batch mean g_t for t = 1..steps.
  bool full = false;
  std::vector<Vec> x, m, g;
};

// Runs T iterations from problem.x1 drawing schedule.B estimates per step.
// Non-finite iterates abort the run with diverged = true.
OptimizerTrace run_optimizer(Method method, const Problem& problem,
                             const StochasticOracle& oracle,
                             const Schedule& schedule, long T, double clip_tau,
                             RandomStream& stream, bool record_full = false);

}  // namespace htopt
