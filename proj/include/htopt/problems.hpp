#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "htopt/vec.hpp"

namespace htopt {

// A differentiable objective with declared smoothness constants.
// value_at/grad_at are pure functions; concurrent read-only use is safe.
struct Problem {
  std::string name;
  int dim = 0;
  std::function<double(std::span<const double>)> value_at;
  std::function<Vec(std::span<const double>)> grad_at;
  double L0 = 0.0;  // smoothness constant
  double L1 = 0.0;  // generalized-smoothness constant (0 = classical case)
  std::optional<double> f_star;  // known lower bound, if any
  Vec x1;                        // initial point
};

// Smooth bump: 0 for t <= 1/2, exp(1 - (2t-1)^-2) above. C-infinity, range [0, e).
double psi(double t);
double psi_prime(double t);

// sqrt(e) * integral of exp(-tau^2/2) from -inf to t. Monotone, range (0, sqrt(2*pi*e)).
double phi(double t);
double phi_prime(double t);

// Highest 1-based index i with |x[i]| > alpha; 0 when no entry qualifies.
int prog_alpha(std::span<const double> x, double alpha);

// Chain function f_d and its analytic gradient. d must equal x.size().
double chain_value(std::span<const double> x, int d);
Vec chain_grad(std::span<const double> x, int d);

// Parameters of the lower-bound construction. Derived quantities are filled
// in by make(); the fixed constants delta=12, ell=152, gamma=23 come with it.
struct HardInstanceParams {
  static constexpr double kDelta = 12.0;
  static constexpr double kEll = 152.0;
  static constexpr double kGamma = 23.0;
  static constexpr int kMaxDim = 10000;

  double p = 2.0;       // tail index in (1,2]
  double Delta1 = 1.0;  // initial suboptimality budget
  double L0 = 1.0;
  double sigma0 = 1.0;
  double epsilon = 0.01;  // target stationarity

  // derived
  int d = 0;           // floor(Delta1*L0 / (4*delta*ell*eps^2))
  double lambda = 0.0; // 2*ell*eps/L0
  double q = 0.0;      // (4*gamma*eps/sigma0)^(p/(p-1))

  // Validates ranges, computes d/lambda/q, and rejects infeasible settings
  // (q > 1, d < 1, or d beyond the kMaxDim desk-scale cap).
  static HardInstanceParams make(double p, double Delta1, double L0,
                                 double sigma0, double epsilon);
};

// F_d(x) = (L0*lambda^2/ell) * f_d(x/lambda) with x1 = 0, L1 = 0.
Problem make_hard_instance(const HardInstanceParams& params);

// F(x) = 1/2 * sum_i eig[i]*(x[i]-x_star[i])^2; L0 = max eigenvalue, F* = 0.
// x1 defaults to the zero vector when empty.
Problem make_quadratic(int dim, const Vec& eigenvalues, const Vec& x_star,
                       const Vec& x1 = {});

// One-dimensional regression objective F(x) = (q/2)(x - x_star)^2 (additive
// constant dropped); pairs with make_regression_oracle.
Problem make_regression(double q, double x_star, double sigma, double p,
                        double x1 = 0.0);

// Noise-contract companions of the regression example:
// sigma0^p = 2^(p-1)*q*sigma^p, sigma1^p = 1-q + 2^(p-1)*q^(1-p)*(1-q)^p.
struct RegressionNoiseLevels {
  double sigma0;
  double sigma1;
};
RegressionNoiseLevels regression_noise_levels(double q, double sigma, double p);

// F(y) - F(x) - <grad F(x), y-x> - (L0 + L1*||grad F(x)||)/2 * ||x-y||^2.
// Nonpositive (up to rounding) for any problem honoring its declared constants.
// Requires ||x-y|| <= 1/L1 when L1 > 0.
double smoothness_residual(const Problem& problem, std::span<const double> x,
                           std::span<const double> y);

// Central finite differences with step 1e-5*(1+||x||).
Vec finite_diff_grad(const Problem& problem, std::span<const double> x);

}  // namespace htopt
