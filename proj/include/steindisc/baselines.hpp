#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "steindisc/common.hpp"
#include "steindisc/estimate.hpp"
#include "steindisc/models.hpp"
#include "steindisc/numerics.hpp"

namespace steindisc::baselines {

/// Readings of the minimum-distance objective Σ_k (p̂(k) + mean(h(X)·1{X ? k}))².
/// AtLeast uses 1{X ≥ k}, which makes the population objective vanish at the true ρ.
/// AsPrinted uses 1{X > k} as displayed. SquareInside squares each observation's term
/// before averaging (with 1{X > k}).
enum class MdReading { AtLeast, AsPrinted, SquareInside };

struct Options {
  numerics::Budget budget{};
  /// Starting point in θ coordinates; defaults to default_start(frame).
  std::optional<std::vector<double>> start;
  MdReading md_reading = MdReading::AtLeast;
};

/// ρ = 1, λ = 1, p = 0.5, α = β = 1, (1, …, 1) for the Dirichlet negative multinomial,
/// (1/(d+1), …, 1/(d+1)) for the (truncated) negative multinomial.
std::vector<double> default_start(const ModelFrame& frame);

/// Σ log p_θ(X_i). Throws DomainError if an observation lies outside the support.
double log_likelihood(const ModelSpec& model, const IntMatrix& sample);

/// Closed-form logarithmic MLE 1 − exp(W₋₁(−e^{−1/x̄}/x̄) + 1/x̄). Throws DomainError for x̄ <= 1.
double logarithmic_mle(double sample_mean);

/// Maximum likelihood estimate. Closed forms for the Poisson, binomial, negative multinomial
/// and logarithmic families; Brent on a transformed scale for the other univariate families;
/// Nelder–Mead for the beta negative binomial, truncated negative multinomial and Dirichlet
/// negative multinomial families.
EstimateResult mle(const ModelFrame& frame, const IntMatrix& sample, const Options& options = {});

/// Moment estimator α̂ = (α₀ − 1) X̄ / r for the Dirichlet negative multinomial; NE OutOfDomain if α₀ <= 1.
EstimateResult moment_dnm(const IntMatrix& sample, double r, double alpha0);

/// Mean over the sample of ι(X/(X+1+ρ))² + ι((X−1)/(X+ρ))² − 2ι(X/(X+1+ρ)), ι(u) = 1/(1+u).
double score_matching_objective_ys(const IntMatrix& sample, double rho);
EstimateResult score_matching_ys(const IntMatrix& sample, const Options& options = {});

/// Σ_{k=1}^{k_max} of the minimum-distance term; k_max = 0 means max(sample).
double minimum_distance_objective_ys(const IntMatrix& sample, double rho, MdReading reading = MdReading::AtLeast,
                                     std::int64_t k_max = 0);
EstimateResult minimum_distance_ys(const IntMatrix& sample, const Options& options = {});

}  // namespace steindisc::baselines
