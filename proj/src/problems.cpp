#include "htopt/problems.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace htopt {

namespace {
constexpr double kSqrtE = 1.6487212707001281468;        // sqrt(e)
constexpr double kSqrtHalfPi = 1.2533141373155002512;   // sqrt(pi/2)
constexpr double kInvSqrt2 = 0.70710678118654752440;
}  // namespace

double psi(double t) {
  if (t <= 0.5) return 0.0;
  const double u = 2.0 * t - 1.0;
  return std::exp(1.0 - 1.0 / (u * u));
}

double psi_prime(double t) {
  if (t <= 0.5) return 0.0;
  const double u = 2.0 * t - 1.0;
  // 4*exp(1 - u^-2)/u^3, written in log form so the underflowing exp never
  // meets a 1/u^3 overflow (no 0*inf near t = 1/2).
  return 4.0 * std::exp(1.0 - 1.0 / (u * u) - 3.0 * std::log(u));
}

double phi(double t) {
  // sqrt(e) * sqrt(2*pi) * normal_cdf(t), via erf.
  return kSqrtE * kSqrtHalfPi * (1.0 + std::erf(t * kInvSqrt2));
}

double phi_prime(double t) { return kSqrtE * std::exp(-0.5 * t * t); }

int prog_alpha(std::span<const double> x, double alpha) {
  for (int i = static_cast<int>(x.size()); i >= 1; --i) {
    if (std::fabs(x[i - 1]) > alpha) return i;
  }
  return 0;
}

static void check_chain_dim(std::span<const double> x, int d) {
  if (d < 1) throw std::invalid_argument("chain function: d must be positive");
  if (static_cast<int>(x.size()) != d)
    throw std::invalid_argument("chain function: dimension mismatch");
}

double chain_value(std::span<const double> x, int d) {
  check_chain_dim(x, d);
  double f = -psi(1.0) * phi(x[0]);
  for (int i = 1; i < d; ++i) {
    f += psi(-x[i - 1]) * phi(-x[i]) - psi(x[i - 1]) * phi(x[i]);
  }
  return f;
}

Vec chain_grad(std::span<const double> x, int d) {
  check_chain_dim(x, d);
  Vec g(d, 0.0);
  // coordinate j enters term i=j+1 through Psi(+-x[j]) and term i=j through
  // Phi(+-x[j]); the first coordinate also carries the -Psi(1)Phi(x[1]) head.
  g[0] = -psi(1.0) * phi_prime(x[0]);
  for (int j = 0; j + 1 < d; ++j) {
    g[j] += -psi_prime(-x[j]) * phi(-x[j + 1]) - psi_prime(x[j]) * phi(x[j + 1]);
  }
  for (int j = 1; j < d; ++j) {
    g[j] += -psi(-x[j - 1]) * phi_prime(-x[j]) - psi(x[j - 1]) * phi_prime(x[j]);
  }
  return g;
}

HardInstanceParams HardInstanceParams::make(double p, double Delta1, double L0,
                                            double sigma0, double epsilon) {
  if (!(p > 1.0 && p <= 2.0))
    throw std::invalid_argument("hard instance: p must lie in (1,2]");
  if (!(Delta1 > 0.0 && L0 > 0.0 && sigma0 > 0.0 && epsilon > 0.0))
    throw std::invalid_argument("hard instance: Delta1, L0, sigma0, epsilon must be positive");

  HardInstanceParams params;
  params.p = p;
  params.Delta1 = Delta1;
  params.L0 = L0;
  params.sigma0 = sigma0;
  params.epsilon = epsilon;
  params.lambda = 2.0 * kEll * epsilon / L0;
  params.q = std::pow(4.0 * kGamma * epsilon / sigma0, p / (p - 1.0));

  const double d_real =
      std::floor(Delta1 * L0 / (4.0 * kDelta * kEll * epsilon * epsilon));
  if (params.q > 1.0) {
    std::ostringstream msg;
    msg << "hard instance infeasible: q = (4*gamma*eps/sigma0)^(p/(p-1)) = "
        << params.q << " > 1; epsilon must satisfy 4*gamma*eps <= sigma0";
    throw std::domain_error(msg.str());
  }
  if (d_real < 1.0) {
    std::ostringstream msg;
    msg << "hard instance infeasible: d = floor(Delta1*L0/(4*delta*ell*eps^2)) = "
        << d_real << " < 1; epsilon too large for the given budget";
    throw std::domain_error(msg.str());
  }
  if (d_real > kMaxDim) {
    std::ostringstream msg;
    msg << "hard instance dimension d = " << d_real << " exceeds the desk-scale cap "
        << kMaxDim << "; increase epsilon or decrease Delta1*L0";
    throw std::domain_error(msg.str());
  }
  params.d = static_cast<int>(d_real);
  return params;
}

Problem make_hard_instance(const HardInstanceParams& params) {
  if (params.d < 1 || params.lambda <= 0.0)
    throw std::invalid_argument("hard instance: call HardInstanceParams::make first");
  const int d = params.d;
  const double lambda = params.lambda;
  const double value_scale = params.L0 * lambda * lambda / HardInstanceParams::kEll;
  const double grad_scale = params.L0 * lambda / HardInstanceParams::kEll;

  Problem problem;
  problem.name = "hard_instance";
  problem.dim = d;
  problem.L0 = params.L0;
  problem.L1 = 0.0;
  problem.x1 = Vec(d, 0.0);
  // F_d(0) - inf F_d <= Delta1 by construction, so F_d(0) - Delta1 is a
  // valid declared lower bound.
  problem.f_star = value_scale * chain_value(problem.x1, d) - params.Delta1;
  problem.value_at = [d, lambda, value_scale](std::span<const double> x) {
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / lambda;
    return value_scale * chain_value(y, d);
  };
  problem.grad_at = [d, lambda, grad_scale](std::span<const double> x) {
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / lambda;
    Vec g = chain_grad(y, d);
    for (double& v : g) v *= grad_scale;
    return g;
  };
  return problem;
}

Problem make_quadratic(int dim, const Vec& eigenvalues, const Vec& x_star,
                       const Vec& x1) {
  if (dim < 1) throw std::invalid_argument("quadratic: dim must be positive");
  if (static_cast<int>(eigenvalues.size()) != dim ||
      static_cast<int>(x_star.size()) != dim)
    throw std::invalid_argument("quadratic: eigenvalues/x_star must have length dim");
  for (double e : eigenvalues)
    if (!(e > 0.0)) throw std::invalid_argument("quadratic: eigenvalues must be positive");
  if (!x1.empty() && static_cast<int>(x1.size()) != dim)
    throw std::invalid_argument("quadratic: x1 must have length dim");

  Problem problem;
  problem.name = "quadratic";
  problem.dim = dim;
  problem.L0 = *std::max_element(eigenvalues.begin(), eigenvalues.end());
  problem.L1 = 0.0;
  problem.f_star = 0.0;
  problem.x1 = x1.empty() ? Vec(dim, 0.0) : x1;
  problem.value_at = [eigenvalues, x_star](std::span<const double> x) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = x[i] - x_star[i];
      f += 0.5 * eigenvalues[i] * r * r;
    }
    return f;
  };
  problem.grad_at = [eigenvalues, x_star](std::span<const double> x) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      g[i] = eigenvalues[i] * (x[i] - x_star[i]);
    return g;
  };
  return problem;
}

RegressionNoiseLevels regression_noise_levels(double q, double sigma, double p) {
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("regression: q must lie in (0,1)");
  if (!(p > 1.0 && p <= 2.0))
    throw std::invalid_argument("regression: p must lie in (1,2]");
  if (sigma < 0.0) throw std::invalid_argument("regression: sigma must be nonnegative");
  const double two_pm1 = std::pow(2.0, p - 1.0);
  RegressionNoiseLevels levels;
  levels.sigma0 = std::pow(two_pm1 * q * std::pow(sigma, p), 1.0 / p);
  levels.sigma1 = std::pow(
      1.0 - q + two_pm1 * std::pow(q, 1.0 - p) * std::pow(1.0 - q, p), 1.0 / p);
  return levels;
}

Problem make_regression(double q, double x_star, double sigma, double p,
                        double x1) {
  regression_noise_levels(q, sigma, p);  // validates the parameter ranges

  Problem problem;
  problem.name = "regression";
  problem.dim = 1;
  problem.L0 = q;
  problem.L1 = 0.0;
  problem.f_star = 0.0;
  problem.x1 = Vec{x1};
  problem.value_at = [q, x_star](std::span<const double> x) {
    const double r = x[0] - x_star;
    return 0.5 * q * r * r;
  };
  problem.grad_at = [q, x_star](std::span<const double> x) {
    return Vec{q * (x[0] - x_star)};
  };
  return problem;
}

double smoothness_residual(const Problem& problem, std::span<const double> x,
                           std::span<const double> y) {
  const Vec diff = sub(y, x);
  const double dist = norm(diff);
  if (problem.L1 > 0.0 && dist > 1.0 / problem.L1)
    throw std::domain_error("smoothness_residual: ||x-y|| exceeds 1/L1");
  const Vec gx = problem.grad_at(x);
  return problem.value_at(y) - problem.value_at(x) - dot(gx, diff) -
         0.5 * (problem.L0 + problem.L1 * norm(gx)) * dist * dist;
}

Vec finite_diff_grad(const Problem& problem, std::span<const double> x) {
  const double h = 1e-5 * (1.0 + norm(x));
  Vec xp(x.begin(), x.end());
  Vec xm(x.begin(), x.end());
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (problem.value_at(xp) - problem.value_at(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

}  // namespace htopt
