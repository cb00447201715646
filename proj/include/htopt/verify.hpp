#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "htopt/optim.hpp"
#include "htopt/problems.hpp"
#include "htopt/random.hpp"
#include "htopt/vec.hpp"

namespace htopt {

// Projected-online-gradient construction evaluated on a vector sequence:
// w_1 = 0, w_{t+1} = proj_unit_ball(w_t - gamma_t v_t) with
// gamma_t = sqrt(2 / sum_{s<=t} ||v_s||^2); w stays 0 until the first
// nonzero v. prefix_lhs/prefix_rhs record both sides of
//   ||sum v|| <= 2*sqrt(2*sum ||v||^2) - sum <v, w>
// at every prefix length.
struct OloTrace {
  std::vector<Vec> weights;       // w_1..w_T
  std::vector<double> stepsizes;  // gamma_1..gamma_T (+inf before the first nonzero v)
  std::vector<double> prefix_lhs;
  std::vector<double> prefix_rhs;
  double lhs = 0.0;  // final-prefix values
  double rhs = 0.0;

  bool holds(double slack = 1e-9) const;
};

OloTrace olo_check(const std::vector<Vec>& v);

// Rebuilds the construction with random tails substituted after position
// t-1 and reports whether w_t is bit-identical across all of them.
bool olo_causality_check(const std::vector<Vec>& v, int t, RandomStream& stream,
                         int n_tails = 4);

// Max over t of ||(m_t - grad F(x_t)) - unrolled error decomposition|| / (1 + ||m_t||).
// The decomposition is beta_{1:t} eps_0 + sum beta_{s:t} D_s
// + sum (1-beta_s) beta_{s+1:t} xi_s, rebuilt from the recorded x_t and g_t.
// Requires a full trace.
double decomposition_residual(const OptimizerTrace& trace, const Problem& problem);

// Max over t of the positive part of
//   F(x_{t+1}) - [F(x_t) - eta_t ||grad F(x_t)|| + 2 eta_t ||eps_t||
//                 + (L0 + L1 ||grad F(x_t)||)/2 * eta_t^2],
// normalized by 1 + |F(x_t)|. Deterministic per step for normalized-update
// traces; requires a full nsgdm trace and eta_t <= 1/L1 when L1 > 0.
double descent_residual(const OptimizerTrace& trace, const Problem& problem);

enum class MdsKind { IidGaussian, IidPareto, StateScaledPareto };

struct MdsSpec {
  MdsKind kind = MdsKind::IidGaussian;
  double shape = 0.0;  // pareto tail index (unused for gaussian)
  double scale = 1.0;
  int dim = 1;
};

struct RatioEstimate {
  double ratio = 0.0;
  double std_error = 0.0;   // delta-method standard error of the ratio
  double numerator = 0.0;   // MC mean of ||sum v_t||
  double denominator = 0.0; // MC mean of (sum ||v_t||^p)^(1/p)
  bool stable = true;       // denominator resolved well above its own SE
};

// MC estimate of E||sum_{t<=T} v_t|| / E[(sum ||v_t||^p)^(1/p)] for a
// martingale difference sequence; bounded by 2*sqrt(2).
RatioEstimate martingale_ratio(const MdsSpec& spec, int T, int trials, double p,
                               RandomStream& stream);

struct CheckResult {
  std::string name;
  bool pass = false;
  double observed = 0.0;
  double bound = 0.0;
  std::string note;
};

// The full desk-scale check suite used by the `verify` CLI subcommand.
std::vector<CheckResult> verify_suite(std::uint64_t seed);

}  // namespace htopt
