#pragma once

#include <cstdint>
#include <random>

namespace steindisc {

/// Derives an independent 64-bit seed for stream `stream` of master seed `master`
/// (SplitMix64 finalizer over a Weyl sequence). Pure and order independent.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

/// Random source owned by one sampler or one Monte Carlo repetition.
/// All variates are generated by the algorithms in rng.cpp so results do
/// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1].
  double uniform_pos() noexcept { return 1.0 - uniform(); }

  double exponential() noexcept;
  double normal() noexcept;
  /// Gamma(shape, scale = 1); shape > 0.
  double gamma(double shape);
  double beta(double a, double b);

  std::int64_t poisson(double mean);
  std::int64_t binomial(std::int64_t trials, double p);
  /// Failures before the r-th success with success probability p (r > 0 real).
  std::int64_t negative_binomial(double r, double p);
  /// Geometric on {1, 2, ...} with success probability q.
  std::int64_t geometric1(double q);

 private:
  std::int64_t poisson_search(double mean);
  std::int64_t poisson_ptrs(double mean);
  std::int64_t binomial_from_mode(std::int64_t trials, double p);

  std::mt19937_64 engine_;
};

}  // namespace steindisc
