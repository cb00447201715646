#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>

#include "htopt/vec.hpp"

namespace htopt {

// splitmix64 output function (public-domain constants).
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// Combine a base seed with a key into a new seed. Used to derive per-cell
// streams as derive_seed(derive_seed(base, T), seed_index).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t key) {
  return mix64(mix64(base) ^ (key + 0x9E3779B97F4A7C15ull));
}

// Counter-based random stream: draw t is mix64(seed + t*gamma), i.e. the
// splitmix64 sequence. State is exactly (seed, draw counter), so a stream
// position can be recorded, replayed, and compared across platforms; the
// integer outputs are bit-identical everywhere.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return counter_; }

  std::uint64_t next_u64() {
    counter_ += 1;
    return mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ull);
  }

  // Uniform on the open interval (0, 1); never returns 0 or 1.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (two uniforms per draw, no cached twin).
  double next_gaussian() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Pareto magnitude with minimum `scale` and tail index `shape`, sign
  // flipped with probability 1/2. Zero mean for shape > 1;
  // E|X|^p = shape/(shape-p) * scale^p for p < shape, infinite otherwise.
  double next_symmetric_pareto(double shape, double scale) {
    if (shape <= 1.0) throw std::invalid_argument("symmetric-pareto: shape must exceed 1");
    if (scale < 0.0) throw std::invalid_argument("symmetric-pareto: negative scale");
    const double u = next_uniform();
    const double s = next_uniform() < 0.5 ? -1.0 : 1.0;
    return s * scale * std::pow(u, -1.0 / shape);
  }

  // Student-t with `dof` degrees of freedom via Bailey's exact two-uniform
  // transform: sqrt(dof*(u1^(-2/dof)-1)) * cos(2*pi*u2).
  double next_student_t(double dof, double scale) {
    if (dof <= 1.0) throw std::invalid_argument("student-t: dof must exceed 1");
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return scale * std::sqrt(dof * (std::pow(u1, -2.0 / dof) - 1.0)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  bool next_bernoulli(double prob) { return next_uniform() < prob; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace htopt
