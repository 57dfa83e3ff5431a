#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "steindisc/common.hpp"
#include "steindisc/estimate.hpp"
#include "steindisc/models.hpp"

namespace steindisc {

/// Scalar test function on the lattice. `boundary_vanishing` marks functions that are
/// explicitly masked to zero on the finite faces of their box; the unmasked catalog
/// choices ("one", "identity", "log", "k_minus_1") rely on τ or f vanishing at a instead.
class TestFunction {
 public:
  using Fn = std::function<double(Point)>;

  TestFunction() = default;
  TestFunction(std::string name, Fn fn, bool boundary_vanishing = false)
      : name_(std::move(name)), fn_(std::move(fn)), boundary_vanishing_(boundary_vanishing) {}

  double operator()(Point k) const { return fn_(k); }
  double evaluate(Point k) const { return fn_(k); }
  const std::string& name() const noexcept { return name_; }
  bool boundary_vanishing() const noexcept { return boundary_vanishing_; }

 private:
  std::string name_;
  Fn fn_;
  bool boundary_vanishing_ = false;
};

namespace stein {

/// Builds a named test function for `frame` ("one", "identity", "log", "k_minus_1",
/// "masked_identity", "inv_sum_interior", "sum_interior", "zero"). Masks use the frame's
/// support box. Throws UsageError for unknown names or names that do not fit the dimension.
TestFunction make_test_function(std::string_view name, const ModelFrame& frame);

/// The catalog's default choice per family (two functions for the beta negative binomial).
std::vector<TestFunction> default_test_functions(const ModelFrame& frame);
std::vector<std::string> default_test_function_names(Family family);

/// Number of test functions the family's estimator consumes.
std::size_t test_function_count(Family family);

/// Component i of the Stein operator at k, from the family's closed form. The test
/// function counts as 0 at points outside the support. Throws DomainError for k ∉ U.
std::vector<double> stein_operator(const ModelSpec& model, const TestFunction& f, Point k);
void stein_operator(const ModelSpec& model, const TestFunction& f, Point k, std::span<double> out);

/// E[A_θ f(X)] by exact summation, one residual per component.
std::vector<double> check_stein_identity(const ModelSpec& model, const TestFunction& f);
ExpectationResult check_stein_identity_detailed(const ModelSpec& model, const TestFunction& f,
                                                const SumControl& control = {});

/// Σ over the points of shell `shell` (offsets from the lower corner summing to `shell`)
/// of f(k)·τ_i(k)·p(k), restricted to k_i ≥ a_i + 1. Equals the partial Stein sum over
/// shells 0..shell-1, which makes it an exact check for slowly converging tails.
std::vector<double> boundary_flux(const ModelSpec& model, const TestFunction& f, std::int64_t shell);

/// Throws UsageError for an empty sample or dimension mismatch, DomainError if a row lies outside U.
void require_sample_in_support(const ModelFrame& frame, const IntMatrix& sample);

/// Closed-form Stein estimator of the family. `fs` holds test_function_count(family) functions.
EstimateResult stein_estimate(const ModelFrame& frame, const IntMatrix& sample, std::span<const TestFunction> fs);
EstimateResult stein_estimate(const ModelFrame& frame, const IntMatrix& sample);

/// Returns `theta` if it satisfies the family constraints, otherwise the matching NE reason.
EstimateResult check_constraints(const ModelFrame& frame, std::vector<double> theta);

// ---------------------------------------------------------------------------
// Linear representation A_θ f(k) = M(k) g(θ)

/// Stacked operator of all test functions written as M(k)·g(θ). The last entry of g is
/// the constant 1, so M̄·g = 0 reduces to a q × q linear system in the other entries.
///   Poisson (λ, 1)   Binomial ((1-p)/p, 1)   Yule–Simon (ρ, 1)   logarithmic (p, 1)
///   BNB (α, β, 1)    NM/TNM (p₁..p_d, 1)     DNM (α₁..α_d, 1)
class LinearSteinForm {
 public:
  LinearSteinForm(ModelFrame frame, std::vector<TestFunction> fs);

  std::size_t equations() const noexcept { return q_; }
  std::size_t g_size() const noexcept { return q_ + 1; }
  const ModelFrame& frame() const noexcept { return frame_; }

  /// q × (q + 1) matrix M(k).
  Eigen::MatrixXd M(Point k) const;
  void M(Point k, Eigen::Ref<Eigen::MatrixXd> out) const;
  Eigen::VectorXd g(std::span<const double> theta) const;
  /// (q + 1) × q Jacobian of g.
  Eigen::MatrixXd dg(std::span<const double> theta) const;
  /// θ from the first q entries of g.
  std::vector<double> theta_from_g(const Eigen::VectorXd& phi) const;

 private:
  ModelFrame frame_;
  std::vector<TestFunction> fs_;
  std::size_t q_ = 0;
};

/// Solves mean(M(X_i))·g(θ) = 0. NE SingularSystem when the system's condition number exceeds 1e12.
EstimateResult solve_linear_stein_system(const LinearSteinForm& form, const IntMatrix& sample);

enum class CovarianceMode { Exact, Empirical };

/// Σ = J⁻¹ V J⁻ᵀ with J = E[M(X)]·dg(θ) and V = E[(M(X)g(θ))(M(X)g(θ))ᵀ]. Exact mode sums
/// over the model at model.theta; empirical mode uses sample means at model.theta (pass θ̂).
/// Throws NumericalError when J is singular.
Eigen::MatrixXd sandwich_covariance(const ModelSpec& model, const LinearSteinForm& form, CovarianceMode mode,
                                    const IntMatrix* sample = nullptr);

/// Asymptotic variance of the maximum likelihood estimator for the logarithmic family
/// (inverse Fisher information per observation). Throws DomainError for p ∉ (0, 1).
double ml_asymptotic_variance_logarithmic(double p);

/// Asymptotic variance of the logarithmic Stein estimator with f(k) = k − 1, by exact summation.
double stein_asymptotic_variance_logarithmic(double p);

}  // namespace stein
}  // namespace steindisc
