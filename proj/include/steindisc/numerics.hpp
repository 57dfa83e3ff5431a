#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace steindisc::numerics {

/// ln Γ(x) for x > 0. Throws DomainError otherwise.
double log_gamma(double x);

/// ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b).
double log_beta(double a, double b);

/// ln k! for k >= 0.
double log_factorial(std::int64_t k);

/// Lower branch W₋₁ of the Lambert W function on [−1/e, 0); the result is <= −1.
double lambert_w_minus1(double x);

/// Numerically stable log(Σ exp(v_i)); returns −inf for an empty or all −inf input.
double log_sum_exp(std::span<const double> values);

/// Resource limits for an optimizer run.
struct Budget {
  int max_iters = 20000;
  double max_seconds = 10.0;
};

struct OptimizerReport {
  std::vector<double> argmin;
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;
  bool time_exceeded = false;
  double elapsed = 0.0;  // seconds
};

/// Converged once both the simplex diameter and the objective spread fall below their tolerances.
struct NelderMeadOptions {
  double diameter_tol = 1e-8;
  double spread_tol = 1e-10;
  /// Edge length of the initial simplex, scaled by max(1, max|start_i|).
  double initial_step = 0.1;
  int restarts = 1;
};

using Objective = std::function<double(std::span<const double>)>;

/// Nelder–Mead with reflection/expansion/contraction/shrink coefficients (1, 2, ½, ½).
/// Non-finite objective values inside the run are treated as +inf.
/// Throws UsageError when the objective is not finite at `start`.
OptimizerReport nelder_mead(const Objective& objective, std::vector<double> start, const Budget& budget,
                            const NelderMeadOptions& options = {});

/// Brent's golden-section / parabolic minimizer on [lo, hi]; returns x with
/// |x − local argmin| <= tol. Throws NumericalError if the objective is not finite.
double minimize_1d(const std::function<double(double)>& objective, double lo, double hi, double tol);

}  // namespace steindisc::numerics
