#include "steindisc/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "steindisc/common.hpp"
#include "steindisc/numerics.hpp"

namespace steindisc {

namespace {

// Draws beyond this are clamped; only reachable for extremely heavy tails.
constexpr double kMaxCount = 0x1.0p62;

std::int64_t clamp_count(double v) {
  if (!(v < kMaxCount)) return static_cast<std::int64_t>(kMaxCount);
  return static_cast<std::int64_t>(v);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  std::uint64_t z = master + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::exponential() noexcept { return -std::log(uniform_pos()); }

double Rng::normal() noexcept {
  // Box–Muller, one output per call.
  const double u1 = uniform_pos();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw DomainError("gamma variate: shape must be positive");
  if (shape < 1.0) {
    // Shape augmentation: Gamma(a) = Gamma(a + 1) * U^(1/a).
    const double g = gamma(shape + 1.0);
    return g * std::exp(std::log(uniform_pos()) / shape);
  }
  // Marsaglia–Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Rng::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

std::int64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw DomainError("poisson variate: mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  return mean <= 30.0 ? poisson_search(mean) : poisson_ptrs(mean);
}

std::int64_t Rng::poisson_search(double mean) {
  // Inversion by sequential search.
  const double u = uniform();
  double p = std::exp(-mean);
  double cdf = p;
  std::int64_t k = 0;
  while (u >= cdf) {
    ++k;
    p *= mean / static_cast<double>(k);
    const double next = cdf + p;
    if (next == cdf) break;  // remaining mass below rounding
    cdf = next;
  }
  return k;
}

std::int64_t Rng::poisson_ptrs(double mean) {
  // Transformed rejection with squeeze (Hörmann 1993).
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  while (true) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::abs(u);
    const double kd = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return clamp_count(kd);
    if (kd < 0.0 || (us < 0.013 && v > us)) continue;
    if (kd >= kMaxCount) return clamp_count(kd);
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + kd * loglam - numerics::log_gamma(kd + 1.0)) {
      return clamp_count(kd);
    }
  }
}

std::int64_t Rng::binomial(std::int64_t trials, double p) {
  if (trials < 0) throw DomainError("binomial variate: negative trial count");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial variate: p outside [0, 1]");
  if (trials == 0 || p == 0.0) return 0;
  if (p == 1.0) return trials;
  if (trials <= 64) {
    std::int64_t k = 0;
    for (std::int64_t i = 0; i < trials; ++i) k += uniform() < p ? 1 : 0;
    return k;
  }
  return binomial_from_mode(trials, p);
}

std::int64_t Rng::binomial_from_mode(std::int64_t trials, double p) {
  // Inversion over the support ordered outward from the mode.
  const double m = static_cast<double>(trials);
  const auto mode = std::min<std::int64_t>(trials, static_cast<std::int64_t>(std::floor((m + 1.0) * p)));
  const double md = static_cast<double>(mode);
  const double log_pmode = numerics::log_factorial(trials) - numerics::log_factorial(mode) -
                           numerics::log_factorial(trials - mode) + md * std::log(p) + (m - md) * std::log1p(-p);
  const double odds = p / (1.0 - p);

  double u = uniform();
  std::int64_t up = mode, down = mode - 1;
  double p_up = std::exp(log_pmode);
  double p_down = mode > 0 ? p_up * md / (m - md + 1.0) / odds : 0.0;
  while (up <= trials || down >= 0) {
    if (up <= trials) {
      if (u < p_up) return up;
      u -= p_up;
      p_up *= (m - static_cast<double>(up)) / (static_cast<double>(up) + 1.0) * odds;
      ++up;
    }
    if (down >= 0) {
      if (u < p_down) return down;
      u -= p_down;
      p_down *= static_cast<double>(down) / (m - static_cast<double>(down) + 1.0) / odds;
      --down;
    }
    if (p_up < 1e-300 && p_down < 1e-300) break;
  }
  return mode;
}

std::int64_t Rng::negative_binomial(double r, double p) {
  if (!(r > 0.0)) throw DomainError("negative binomial variate: r must be positive");
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("negative binomial variate: p outside (0, 1]");
  if (p == 1.0) return 0;
  const double rate = gamma(r) * (1.0 - p) / p;
  if (!(rate < kMaxCount)) return static_cast<std::int64_t>(kMaxCount);
  return poisson(rate);
}

std::int64_t Rng::geometric1(double q) {
  if (!(q > 0.0 && q <= 1.0)) {
    if (q == 0.0) return static_cast<std::int64_t>(kMaxCount);
    throw DomainError("geometric variate: q outside (0, 1]");
  }
  if (q == 1.0) return 1;
  const double trials = std::floor(std::log(uniform_pos()) / std::log1p(-q));
  return 1 + clamp_count(trials);
}

}  // namespace steindisc
