#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "htopt/problems.hpp"
#include "htopt/random.hpp"
#include "htopt/vec.hpp"

namespace htopt {

enum class NoiseKind { Gaussian, SymmetricPareto, StudentT };

NoiseKind noise_kind_from_string(const std::string& name);
std::string to_string(NoiseKind kind);

// Declared noise contract: E||g - grad F||^p <= sigma0^p + sigma1^p ||grad F||^p.
struct OracleMeta {
  double p = 2.0;
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  int batch = 1;
};

// A batch of unbiased gradient estimates at a point. sample draws `count`
// mutually independent estimates; all randomness comes from the stream, so
// identical (seed, call sequence) gives bit-identical outputs.
struct StochasticOracle {
  OracleMeta meta;
  std::function<Vec(std::span<const double>)> true_grad;
  std::function<std::vector<Vec>(std::span<const double>, int count,
                                 RandomStream&)> sample;
};

// One zero-mean noise vector with iid coordinates from the chosen family.
// Pareto requires shape > 1, Student-t requires dof (= shape) > 1.
Vec heavy_tail_sample(NoiseKind kind, double shape, double scale, int dim,
                      RandomStream& stream);

// Per-coordinate p-th absolute moment E|X|^p, closed form. Throws when the
// moment is infinite (p >= shape for Pareto/Student-t).
double coordinate_abs_moment(NoiseKind kind, double shape, double scale, double p);

// Certified vector-level noise level: sigma0 with
// sigma0^p = dim * coordinate_abs_moment (subadditivity of t^(p/2), p <= 2;
// equality at p = 2 for iid coordinates).
double certified_sigma0(NoiseKind kind, double shape, double scale, int dim,
                        double p);

// Additive oracle g = grad F(x) + xi with iid heavy-tailed xi; meta carries
// the certified (sigma0, 0) contract at tail index p.
StochasticOracle make_additive_oracle(const Problem& problem, NoiseKind kind,
                                      double shape, double scale, int B,
                                      double p);

// Bernoulli zero-chain oracle of the lower-bound construction:
// g(x, z) = (L0*lambda/ell) * h_d(x/lambda, z), z ~ Bernoulli(q), where
// h_d masks all chain-gradient coordinates past prog_{1/4}(x/lambda) by z/q.
StochasticOracle make_zero_chain_oracle(const HardInstanceParams& params);

// The estimate the zero-chain oracle emits for a fixed Bernoulli outcome
// z in {0, 1}; the oracle's entire two-point support, usable for exact
// enumeration of its mean and moments.
Vec zero_chain_outcome(const HardInstanceParams& params,
                       std::span<const double> x, int z);

// Regression-example oracle g = a^2 (x - x_star) - a*omega with a ~ Bernoulli(q)
// and omega heavy-tailed with E|omega|^p = sigma^p exactly (scale solved from
// the closed-form moment). omega_shape defaults to p + 1.
StochasticOracle make_regression_oracle(double q, double x_star, double sigma,
                                        double p, NoiseKind omega_kind,
                                        double omega_shape = 0.0);

struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// Monte Carlo estimate of E||g - grad F(x)||^p over independent draws.
MomentEstimate empirical_moment(const StochasticOracle& oracle,
                                std::span<const double> x, double p, int trials,
                                RandomStream& stream);

}  // namespace htopt
