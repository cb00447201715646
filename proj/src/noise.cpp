#include "htopt/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace htopt {

NoiseKind noise_kind_from_string(const std::string& name) {
  if (name == "gaussian") return NoiseKind::Gaussian;
  if (name == "pareto" || name == "symmetric-pareto") return NoiseKind::SymmetricPareto;
  if (name == "student-t" || name == "student_t") return NoiseKind::StudentT;
  throw std::invalid_argument("unknown noise kind: " + name);
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::SymmetricPareto: return "symmetric-pareto";
    case NoiseKind::StudentT: return "student-t";
  }
  return "?";
}

Vec heavy_tail_sample(NoiseKind kind, double shape, double scale, int dim,
                      RandomStream& stream) {
  if (dim < 1) throw std::invalid_argument("heavy_tail_sample: dim must be positive");
  if (scale < 0.0) throw std::invalid_argument("heavy_tail_sample: negative scale");
  Vec xi(dim);
  switch (kind) {
    case NoiseKind::Gaussian:
      for (double& v : xi) v = scale * stream.next_gaussian();
      break;
    case NoiseKind::SymmetricPareto:
      for (double& v : xi) v = stream.next_symmetric_pareto(shape, scale);
      break;
    case NoiseKind::StudentT:
      for (double& v : xi) v = stream.next_student_t(shape, scale);
      break;
  }
  return xi;
}

double coordinate_abs_moment(NoiseKind kind, double shape, double scale, double p) {
  if (!(p > 0.0)) throw std::invalid_argument("moment order p must be positive");
  const double sp = std::pow(scale, p);
  switch (kind) {
    case NoiseKind::Gaussian:
      // E|Z|^p = 2^(p/2) Gamma((p+1)/2) / sqrt(pi)
      return sp * std::pow(2.0, 0.5 * p) * std::tgamma(0.5 * (p + 1.0)) /
             std::sqrt(3.14159265358979323846);
    case NoiseKind::SymmetricPareto:
      if (p >= shape)
        throw std::domain_error("pareto p-th moment infinite: p >= shape");
      return sp * shape / (shape - p);
    case NoiseKind::StudentT: {
      if (p >= shape)
        throw std::domain_error("student-t p-th moment infinite: p >= dof");
      // E|T|^p = dof^(p/2) * B((p+1)/2, (dof-p)/2) / B(1/2, dof/2)
      const double lg = std::lgamma(0.5 * (p + 1.0)) + std::lgamma(0.5 * (shape - p)) -
                        std::lgamma(0.5) - std::lgamma(0.5 * shape);
      return sp * std::pow(shape, 0.5 * p) * std::exp(lg);
    }
  }
  throw std::logic_error("unreachable");
}

double certified_sigma0(NoiseKind kind, double shape, double scale, int dim,
                        double p) {
  if (scale == 0.0) return 0.0;
  // (sum xi_i^2)^(p/2) <= sum |xi_i|^p for p <= 2, so E||xi||^p <= dim * m_p.
  // Exact equality at p = 2 for iid coordinates.
  const double mp = coordinate_abs_moment(kind, shape, scale, p);
  return std::pow(static_cast<double>(dim) * mp, 1.0 / p);
}

StochasticOracle make_additive_oracle(const Problem& problem, NoiseKind kind,
                                      double shape, double scale, int B,
                                      double p) {
  if (B < 1) throw std::invalid_argument("additive oracle: batch must be >= 1");
  if (!(p > 1.0 && p <= 2.0))
    throw std::invalid_argument("additive oracle: p must lie in (1,2]");

  StochasticOracle oracle;
  oracle.meta.p = p;
  oracle.meta.sigma0 = certified_sigma0(kind, shape, scale, problem.dim, p);
  oracle.meta.sigma1 = 0.0;
  oracle.meta.batch = B;
  oracle.true_grad = problem.grad_at;
  const int dim = problem.dim;
  auto grad = problem.grad_at;
  oracle.sample = [grad, kind, shape, scale, dim](std::span<const double> x,
                                                  int count, RandomStream& stream) {
    const Vec g = grad(x);
    std::vector<Vec> batch;
    batch.reserve(count);
    for (int i = 0; i < count; ++i) {
      Vec gi = scale == 0.0 ? Vec(dim, 0.0)
                            : heavy_tail_sample(kind, shape, scale, dim, stream);
      for (int j = 0; j < dim; ++j) gi[j] += g[j];
      batch.push_back(std::move(gi));
    }
    return batch;
  };
  return oracle;
}

Vec zero_chain_outcome(const HardInstanceParams& params,
                       std::span<const double> x, int z) {
  if (z != 0 && z != 1)
    throw std::invalid_argument("zero_chain_outcome: z must be 0 or 1");
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / params.lambda;
  Vec g = chain_grad(y, params.d);
  const double grad_scale =
      params.L0 * params.lambda / HardInstanceParams::kEll;
  for (double& v : g) v *= grad_scale;
  // coordinates up to prog_{1/4}(x/lambda) stay exact; the rest carry z/q
  const int revealed = prog_alpha(y, 0.25);
  const double factor = z == 1 ? 1.0 / params.q : 0.0;
  for (std::size_t j = revealed; j < g.size(); ++j) g[j] *= factor;
  return g;
}

StochasticOracle make_zero_chain_oracle(const HardInstanceParams& params) {
  const Problem problem = make_hard_instance(params);
  const double q = params.q;

  StochasticOracle oracle;
  oracle.meta.p = params.p;
  oracle.meta.sigma0 = params.sigma0;
  oracle.meta.sigma1 = 0.0;
  oracle.meta.batch = 1;
  oracle.true_grad = problem.grad_at;
  oracle.sample = [params, q](std::span<const double> x, int count,
                              RandomStream& stream) {
    std::vector<Vec> batch;
    batch.reserve(count);
    for (int i = 0; i < count; ++i)
      batch.push_back(zero_chain_outcome(params, x, stream.next_bernoulli(q) ? 1 : 0));
    return batch;
  };
  return oracle;
}

StochasticOracle make_regression_oracle(double q, double x_star, double sigma,
                                        double p, NoiseKind omega_kind,
                                        double omega_shape) {
  const RegressionNoiseLevels levels = regression_noise_levels(q, sigma, p);
  if (omega_kind == NoiseKind::Gaussian)
    throw std::invalid_argument("regression oracle: omega must be pareto or student-t");
  if (omega_shape == 0.0) omega_shape = p + 1.0;
  if (omega_shape <= p)
    throw std::invalid_argument("regression oracle: omega_shape must exceed p");
  // solve the sampler scale so E|omega|^p = sigma^p exactly
  const double unit_moment = coordinate_abs_moment(omega_kind, omega_shape, 1.0, p);
  const double omega_scale = sigma * std::pow(unit_moment, -1.0 / p);

  StochasticOracle oracle;
  oracle.meta.p = p;
  oracle.meta.sigma0 = levels.sigma0;
  oracle.meta.sigma1 = levels.sigma1;
  oracle.meta.batch = 1;
  oracle.true_grad = [q, x_star](std::span<const double> x) {
    return Vec{q * (x[0] - x_star)};
  };
  oracle.sample = [q, x_star, omega_kind, omega_shape, omega_scale](
                      std::span<const double> x, int count, RandomStream& stream) {
    std::vector<Vec> batch;
    batch.reserve(count);
    for (int i = 0; i < count; ++i) {
      const double a = stream.next_bernoulli(q) ? 1.0 : 0.0;
      const double omega =
          omega_kind == NoiseKind::SymmetricPareto
              ? stream.next_symmetric_pareto(omega_shape, omega_scale)
              : stream.next_student_t(omega_shape, omega_scale);
      batch.push_back(Vec{a * a * (x[0] - x_star) - a * omega});
    }
    return batch;
  };
  return oracle;
}

MomentEstimate empirical_moment(const StochasticOracle& oracle,
                                std::span<const double> x, double p, int trials,
                                RandomStream& stream) {
  if (trials < 1) throw std::invalid_argument("empirical_moment: trials must be >= 1");
  const Vec g = oracle.true_grad(x);
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < trials; ++i) {
    const std::vector<Vec> batch = oracle.sample(x, 1, stream);
    const double m = std::pow(norm(sub(batch[0], g)), p);
    sum += m;
    sumsq += m * m;
  }
  MomentEstimate est;
  est.mean = sum / trials;
  const double var = std::max(0.0, sumsq / trials - est.mean * est.mean);
  est.std_error = std::sqrt(var / trials);
  return est;
}

}  // namespace htopt
