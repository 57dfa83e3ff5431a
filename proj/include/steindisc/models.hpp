#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "steindisc/common.hpp"
#include "steindisc/rng.hpp"

namespace steindisc {

enum class Family {
  Poisson,
  Binomial,
  YuleSimon,
  BetaNegBinomial,
  Logarithmic,
  TruncPoisson,
  TruncBinomial,
  NegMultinomial,
  TruncNegMultinomial,
  DirichletNegMultinomial,
};

inline constexpr Family kAllFamilies[] = {
    Family::Poisson,         Family::Binomial,      Family::YuleSimon,
    Family::BetaNegBinomial, Family::Logarithmic,   Family::TruncPoisson,
    Family::TruncBinomial,   Family::NegMultinomial, Family::TruncNegMultinomial,
    Family::DirichletNegMultinomial,
};

/// Short lowercase identifier used by the CLI, configs and reports ("poisson", "tnm", ...).
std::string_view family_name(Family family) noexcept;
/// Inverse of family_name; also accepts a few long aliases. Throws UsageError.
Family family_from_name(std::string_view name);

bool is_multivariate(Family family) noexcept;
bool is_truncated(Family family) noexcept;

/// One side of a lattice interval.
struct Bound {
  enum class Kind { Finite, PlusInfinity, MinusInfinity };

  Kind kind = Kind::Finite;
  std::int64_t value = 0;

  static constexpr Bound finite(std::int64_t v) noexcept { return {Kind::Finite, v}; }
  static constexpr Bound plus_infinity() noexcept { return {Kind::PlusInfinity, 0}; }
  static constexpr Bound minus_infinity() noexcept { return {Kind::MinusInfinity, 0}; }

  constexpr bool is_finite() const noexcept { return kind == Kind::Finite; }

  friend constexpr bool operator==(const Bound&, const Bound&) = default;
};

/// Rectangular support {a₁..b₁} × … × {a_d..b_d}. Degenerate axes (aᵢ = bᵢ) are
/// representable so that sample-based domain estimates fit the same type;
/// model supports are additionally required to satisfy aᵢ < bᵢ.
class LatticeBox {
 public:
  LatticeBox() = default;
  /// Throws UsageError on length mismatch, misplaced infinities or a_i > b_i.
  LatticeBox(std::vector<Bound> lower, std::vector<Bound> upper);

  /// {lower..∞}^d
  static LatticeBox orthant(std::size_t dim, std::int64_t lower = 0);
  static LatticeBox finite(std::span<const std::int64_t> lower, std::span<const std::int64_t> upper);
  static LatticeBox interval(std::int64_t a, Bound b);

  std::size_t dim() const noexcept { return lower_.size(); }
  const Bound& lower(std::size_t i) const { return lower_.at(i); }
  const Bound& upper(std::size_t i) const { return upper_.at(i); }

  bool contains(Point k) const noexcept;
  bool is_finite() const noexcept;
  bool is_degenerate() const noexcept;
  /// Number of lattice points; nullopt for infinite boxes.
  std::optional<std::uint64_t> cardinality() const noexcept;

  friend bool operator==(const LatticeBox&, const LatticeBox&) = default;

 private:
  std::vector<Bound> lower_;
  std::vector<Bound> upper_;
};

/// Known (non-estimated) quantities of a family.
struct Hyperparameters {
  std::int64_t m = 0;   // binomial trials
  double r = 0.0;       // BNB / NM / TNM / DNM
  double alpha0 = 0.0;  // DNM
  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// Everything about a model except the estimable parameter vector.
struct ModelFrame {
  Family family = Family::Poisson;
  Hyperparameters fixed;
  LatticeBox support;

  std::size_t dim() const noexcept { return support.dim(); }
  friend bool operator==(const ModelFrame&, const ModelFrame&) = default;
};

/// A fully specified lattice distribution. Parameter layout of `theta`:
///   Poisson, TruncPoisson: (λ)          Binomial, TruncBinomial, Logarithmic: (p)
///   YuleSimon: (ρ)                      BetaNegBinomial: (α, β)
///   NegMultinomial, TruncNegMultinomial: (p₁..p_d)
///   DirichletNegMultinomial: (α₁..α_d)
struct ModelSpec {
  Family family = Family::Poisson;
  std::vector<double> theta;
  Hyperparameters fixed;
  LatticeBox support;

  std::size_t dim() const noexcept { return support.dim(); }
  ModelFrame frame() const { return {family, fixed, support}; }
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Number of estimable parameters for the family in dimension `dim`.
std::size_t parameter_count(Family family, std::size_t dim);
/// Component names ("lambda", "alpha1", ...), in `theta` order.
std::vector<std::string> parameter_names(Family family, std::size_t dim);

/// Throws InvalidModel describing the first violated constraint.
void validate_frame(const ModelFrame& frame);
void validate(const ModelSpec& model);
/// Returns true when `theta` satisfies the family's parameter constraints.
bool satisfies_constraints(const ModelFrame& frame, std::span<const double> theta) noexcept;

ModelSpec with_theta(const ModelFrame& frame, std::vector<double> theta);

namespace models {

ModelSpec poisson(double lambda);
ModelSpec binomial(std::int64_t m, double p);
ModelSpec yule_simon(double rho);
ModelSpec beta_neg_binomial(double alpha, double beta, double r);
ModelSpec logarithmic(double p);
ModelSpec trunc_poisson(double lambda, std::int64_t a, Bound b);
ModelSpec trunc_binomial(std::int64_t m, double p, std::int64_t a, std::int64_t b);
ModelSpec neg_multinomial(double r, std::vector<double> p);
ModelSpec trunc_neg_multinomial(double r, std::vector<double> p, std::vector<std::int64_t> a,
                                std::vector<std::int64_t> b);
ModelSpec dirichlet_neg_multinomial(double r, double alpha0, std::vector<double> alpha);

/// Default frame of an untruncated family with the given hyperparameters.
ModelFrame natural_frame(Family family, std::size_t dim, Hyperparameters fixed);

}  // namespace models

/// Natural log of the normalized pmf. Throws DomainError for k outside the support.
double log_pmf(const ModelSpec& model, Point k);

/// Pmf evaluator that caches the (possibly expensive) truncation normalizer.
class Pmf {
 public:
  explicit Pmf(ModelSpec model);

  /// No support check; callers guarantee k ∈ support.
  double log_unchecked(Point k) const;
  double log(Point k) const;
  double operator()(Point k) const;

  const ModelSpec& model() const noexcept { return model_; }
  double log_normalizer() const noexcept { return log_norm_; }

 private:
  ModelSpec model_;
  double log_norm_ = 0.0;
};

/// log of the parent (untruncated) pmf mass on the truncation box; 0 for untruncated families.
double log_truncation_mass(const ModelSpec& model);

/// Stein weight τ_θ; evaluate returns one entry per axis.
class TauWeight {
 public:
  explicit TauWeight(ModelSpec model) : model_(std::move(model)) {}
  std::vector<double> evaluate(Point k) const;
  void evaluate(Point k, std::span<double> out) const;
  std::size_t dim() const noexcept { return model_.dim(); }

 private:
  ModelSpec model_;
};

TauWeight tau(const ModelSpec& model);

/// Exact sampler for one model; construction precomputes tables where needed.
class Sampler {
 public:
  explicit Sampler(ModelSpec model);

  void draw(Rng& rng, std::span<std::int64_t> out) const;
  IntMatrix draw(Rng& rng, std::size_t n) const;

  /// Parent-distribution mass on the truncation box (1 for untruncated families).
  double acceptance() const noexcept { return acceptance_; }
  bool uses_table() const noexcept { return !table_cdf_.empty(); }

 private:
  void draw_parent(Rng& rng, std::span<std::int64_t> out) const;

  ModelSpec model_;
  double acceptance_ = 1.0;
  double log_inv_log1mp_ = 0.0;  // logarithmic: -p / log(1 - p)
  std::vector<double> table_cdf_;
  std::vector<std::int64_t> table_points_;
};

/// n i.i.d. draws, deterministic in `seed`.
IntMatrix sample(const ModelSpec& model, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Exact expectations by summation over the support.

/// Summation controls. Infinite axes are summed shell by shell (shell s holds the
/// points whose offsets from the lower corner add up to s).
struct SumControl {
  double term_tol = 1e-15;
  int consecutive = 30;
  double tail_rel_tol = 1e-13;
  std::int64_t max_shells = 1'000'000;
  std::uint64_t max_points = 100'000'000;
};

struct ExpectationResult {
  std::vector<double> value;
  /// Estimated magnitude of the neglected tail (0 for finite supports).
  double tail_estimate = 0.0;
  std::uint64_t points = 0;
  std::int64_t shells = 0;
  /// True when the whole support was summed.
  bool exhaustive = false;
};

using VectorFunction = std::function<void(Point, std::span<double>)>;

/// Σ_{k∈U} g(k) p(k). Throws NumericalError when the summand bound does not decrease.
ExpectationResult exact_expectation_detailed(const ModelSpec& model, std::size_t out_dim, const VectorFunction& g,
                                             const SumControl& control = {});
std::vector<double> exact_expectation(const ModelSpec& model, std::size_t out_dim, const VectorFunction& g);
double exact_expectation(const ModelSpec& model, const std::function<double(Point)>& g);

/// Calls `visit` for each lattice point of `box` whose offsets from the (finite)
/// lower corner sum to `shell`. Returns the number of points visited.
std::uint64_t for_each_in_shell(const LatticeBox& box, std::int64_t shell, const std::function<void(Point)>& visit);

/// Σ over shells 0..last_shell of g(k) p(k) (no tail handling).
std::vector<double> shell_partial_sum(const ModelSpec& model, std::size_t out_dim, const VectorFunction& g,
                                      std::int64_t last_shell);

}  // namespace steindisc
