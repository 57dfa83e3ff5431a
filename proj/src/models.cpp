#include "steindisc/models.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "steindisc/numerics.hpp"

namespace steindisc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using numerics::log_beta;
using numerics::log_factorial;
using numerics::log_gamma;

std::string axis_label(std::size_t i) { return "axis " + std::to_string(i); }

}  // namespace

// ---------------------------------------------------------------------------
// Family names

std::string_view family_name(Family family) noexcept {
  switch (family) {
    case Family::Poisson: return "poisson";
    case Family::Binomial: return "binomial";
    case Family::YuleSimon: return "yulesimon";
    case Family::BetaNegBinomial: return "bnb";
    case Family::Logarithmic: return "logarithmic";
    case Family::TruncPoisson: return "truncpoisson";
    case Family::TruncBinomial: return "truncbinomial";
    case Family::NegMultinomial: return "nm";
    case Family::TruncNegMultinomial: return "tnm";
    case Family::DirichletNegMultinomial: return "dnm";
  }
  return "unknown";
}

Family family_from_name(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  struct Alias {
    std::string_view name;
    Family family;
  };
  static constexpr Alias kAliases[] = {
      {"yule-simon", Family::YuleSimon},
      {"ys", Family::YuleSimon},
      {"lg", Family::Logarithmic},
      {"tp", Family::TruncPoisson},
      {"tb", Family::TruncBinomial},
      {"betanegbinomial", Family::BetaNegBinomial},
      {"negmultinomial", Family::NegMultinomial},
      {"truncnegmultinomial", Family::TruncNegMultinomial},
      {"dirichletnegmultinomial", Family::DirichletNegMultinomial},
  };
  for (const auto& a : kAliases) {
    if (a.name == name) return a.family;
  }
  throw UsageError("unknown model family '" + std::string(name) + "'");
}

bool is_multivariate(Family family) noexcept {
  return family == Family::NegMultinomial || family == Family::TruncNegMultinomial ||
         family == Family::DirichletNegMultinomial;
}

bool is_truncated(Family family) noexcept {
  return family == Family::TruncPoisson || family == Family::TruncBinomial || family == Family::TruncNegMultinomial;
}

// ---------------------------------------------------------------------------
// LatticeBox

LatticeBox::LatticeBox(std::vector<Bound> lower, std::vector<Bound> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) throw UsageError("LatticeBox: lower and upper bounds differ in length");
  if (lower_.empty()) throw UsageError("LatticeBox: dimension must be at least 1");
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (lower_[i].kind == Bound::Kind::PlusInfinity) throw UsageError("LatticeBox: +inf used as lower bound");
    if (upper_[i].kind == Bound::Kind::MinusInfinity) throw UsageError("LatticeBox: -inf used as upper bound");
    if (lower_[i].is_finite() && upper_[i].is_finite() && lower_[i].value > upper_[i].value) {
      throw UsageError("LatticeBox: lower bound exceeds upper bound on " + axis_label(i));
    }
  }
}

LatticeBox LatticeBox::orthant(std::size_t dim, std::int64_t lower) {
  return LatticeBox(std::vector<Bound>(dim, Bound::finite(lower)), std::vector<Bound>(dim, Bound::plus_infinity()));
}

LatticeBox LatticeBox::finite(std::span<const std::int64_t> lower, std::span<const std::int64_t> upper) {
  std::vector<Bound> lo, hi;
  for (auto v : lower) lo.push_back(Bound::finite(v));
  for (auto v : upper) hi.push_back(Bound::finite(v));
  return LatticeBox(std::move(lo), std::move(hi));
}

LatticeBox LatticeBox::interval(std::int64_t a, Bound b) { return LatticeBox({Bound::finite(a)}, {b}); }

bool LatticeBox::contains(Point k) const noexcept {
  if (k.size() != dim()) return false;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (lower_[i].is_finite() && k[i] < lower_[i].value) return false;
    if (upper_[i].is_finite() && k[i] > upper_[i].value) return false;
  }
  return true;
}

bool LatticeBox::is_finite() const noexcept {
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!lower_[i].is_finite() || !upper_[i].is_finite()) return false;
  }
  return true;
}

bool LatticeBox::is_degenerate() const noexcept {
  for (std::size_t i = 0; i < dim(); ++i) {
    if (lower_[i].is_finite() && upper_[i].is_finite() && lower_[i].value == upper_[i].value) return true;
  }
  return false;
}

std::optional<std::uint64_t> LatticeBox::cardinality() const noexcept {
  if (!is_finite()) return std::nullopt;
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < dim(); ++i) {
    const auto width = static_cast<std::uint64_t>(upper_[i].value - lower_[i].value) + 1;
    if (total > std::numeric_limits<std::uint64_t>::max() / width) return std::nullopt;
    total *= width;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Parameters and validation

std::size_t parameter_count(Family family, std::size_t dim) {
  switch (family) {
    case Family::BetaNegBinomial: return 2;
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial:
    case Family::DirichletNegMultinomial: return dim;
    default: return 1;
  }
}

std::vector<std::string> parameter_names(Family family, std::size_t dim) {
  switch (family) {
    case Family::Poisson:
    case Family::TruncPoisson: return {"lambda"};
    case Family::Binomial:
    case Family::TruncBinomial:
    case Family::Logarithmic: return {"p"};
    case Family::YuleSimon: return {"rho"};
    case Family::BetaNegBinomial: return {"alpha", "beta"};
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial:
    case Family::DirichletNegMultinomial: {
      const std::string stem = family == Family::DirichletNegMultinomial ? "alpha" : "p";
      std::vector<std::string> names;
      for (std::size_t i = 1; i <= dim; ++i) names.push_back(stem + std::to_string(i));
      return names;
    }
  }
  return {};
}

namespace {

bool is_orthant(const LatticeBox& box, std::int64_t lower) {
  for (std::size_t i = 0; i < box.dim(); ++i) {
    if (!(box.lower(i) == Bound::finite(lower)) || box.upper(i).kind != Bound::Kind::PlusInfinity) return false;
  }
  return true;
}

// Empty string when valid, otherwise a description of the first violation.
std::string frame_violation(const ModelFrame& f) {
  const auto& box = f.support;
  if (box.dim() == 0) return "support has dimension 0";
  if (!is_multivariate(f.family) && box.dim() != 1) return "univariate family requires a one-dimensional support";
  const Hyperparameters& h = f.fixed;
  switch (f.family) {
    case Family::Poisson:
    case Family::BetaNegBinomial:
      if (!is_orthant(box, 0)) return "support must be {0, 1, ...}";
      break;
    case Family::YuleSimon:
    case Family::Logarithmic:
      if (!is_orthant(box, 1)) return "support must be {1, 2, ...}";
      break;
    case Family::Binomial:
      if (h.m < 1) return "binomial requires m >= 1";
      if (!(box.lower(0) == Bound::finite(0)) || !(box.upper(0) == Bound::finite(h.m))) {
        return "support must be {0, ..., m}";
      }
      break;
    case Family::TruncPoisson: {
      const Bound& a = box.lower(0);
      const Bound& b = box.upper(0);
      if (!a.is_finite() || a.value < 0) return "truncated Poisson requires a finite lower bound a >= 0";
      if (b.is_finite() && !(a.value < b.value)) return "truncated Poisson requires a < b";
      break;
    }
    case Family::TruncBinomial: {
      if (h.m < 1) return "binomial requires m >= 1";
      const Bound& a = box.lower(0);
      const Bound& b = box.upper(0);
      if (!a.is_finite() || !b.is_finite()) return "truncated binomial requires finite a and b";
      if (!(0 <= a.value && a.value < b.value && b.value <= h.m)) return "truncated binomial requires 0 <= a < b <= m";
      break;
    }
    case Family::NegMultinomial:
    case Family::DirichletNegMultinomial:
      if (!is_orthant(box, 0)) return "support must be {0, 1, ...}^d";
      break;
    case Family::TruncNegMultinomial:
      for (std::size_t i = 0; i < box.dim(); ++i) {
        if (!box.lower(i).is_finite() || !box.upper(i).is_finite()) {
          return "truncated negative multinomial requires finite bounds on " + axis_label(i);
        }
        if (!(0 <= box.lower(i).value && box.lower(i).value < box.upper(i).value)) {
          return "truncated negative multinomial requires 0 <= a_i < b_i on " + axis_label(i);
        }
      }
      break;
  }
  switch (f.family) {
    case Family::BetaNegBinomial:
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial:
    case Family::DirichletNegMultinomial:
      if (!(h.r > 0.0) || !std::isfinite(h.r)) return "r must be a positive finite number";
      break;
    default: break;
  }
  if (f.family == Family::DirichletNegMultinomial && (!(h.alpha0 > 0.0) || !std::isfinite(h.alpha0))) {
    return "alpha0 must be a positive finite number";
  }
  return {};
}

bool positive(double v) { return v > 0.0 && std::isfinite(v); }
bool unit_open(double v) { return v > 0.0 && v < 1.0; }

std::string theta_violation(const ModelFrame& f, std::span<const double> theta) {
  const std::size_t q = parameter_count(f.family, f.dim());
  if (theta.size() != q) {
    return "expected " + std::to_string(q) + " parameter(s), got " + std::to_string(theta.size());
  }
  switch (f.family) {
    case Family::Poisson:
    case Family::TruncPoisson:
      if (!positive(theta[0])) return "lambda must be > 0";
      break;
    case Family::Binomial:
    case Family::TruncBinomial:
    case Family::Logarithmic:
      if (!unit_open(theta[0])) return "p must lie in (0, 1)";
      break;
    case Family::YuleSimon:
      if (!positive(theta[0])) return "rho must be > 0";
      break;
    case Family::BetaNegBinomial:
      if (!positive(theta[0])) return "alpha must be > 0";
      if (!positive(theta[1])) return "beta must be > 0";
      break;
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial: {
      double total = 0.0;
      for (std::size_t i = 0; i < q; ++i) {
        if (!unit_open(theta[i])) return "p" + std::to_string(i + 1) + " must lie in (0, 1)";
        total += theta[i];
      }
      if (!(total < 1.0)) return "p1 + ... + pd must be < 1";
      break;
    }
    case Family::DirichletNegMultinomial:
      for (std::size_t i = 0; i < q; ++i) {
        if (!positive(theta[i])) return "alpha" + std::to_string(i + 1) + " must be > 0";
      }
      break;
  }
  return {};
}

}  // namespace

void validate_frame(const ModelFrame& frame) {
  if (auto msg = frame_violation(frame); !msg.empty()) {
    throw InvalidModel(std::string(family_name(frame.family)) + ": " + msg);
  }
}

void validate(const ModelSpec& model) {
  const ModelFrame frame = model.frame();
  validate_frame(frame);
  if (auto msg = theta_violation(frame, model.theta); !msg.empty()) {
    throw InvalidModel(std::string(family_name(model.family)) + ": " + msg);
  }
}

bool satisfies_constraints(const ModelFrame& frame, std::span<const double> theta) noexcept {
  return theta_violation(frame, theta).empty();
}

ModelSpec with_theta(const ModelFrame& frame, std::vector<double> theta) {
  ModelSpec model{frame.family, std::move(theta), frame.fixed, frame.support};
  validate(model);
  return model;
}

// ---------------------------------------------------------------------------
// Factories

namespace models {

ModelFrame natural_frame(Family family, std::size_t dim, Hyperparameters fixed) {
  switch (family) {
    case Family::Poisson:
    case Family::BetaNegBinomial: return {family, fixed, LatticeBox::orthant(1, 0)};
    case Family::YuleSimon:
    case Family::Logarithmic: return {family, fixed, LatticeBox::orthant(1, 1)};
    case Family::Binomial: return {family, fixed, LatticeBox::interval(0, Bound::finite(fixed.m))};
    case Family::NegMultinomial:
    case Family::DirichletNegMultinomial: return {family, fixed, LatticeBox::orthant(dim, 0)};
    case Family::TruncPoisson:
    case Family::TruncBinomial:
    case Family::TruncNegMultinomial: break;
  }
  throw UsageError(std::string(family_name(family)) + ": truncated families need explicit bounds");
}

ModelSpec poisson(double lambda) { return with_theta(natural_frame(Family::Poisson, 1, {}), {lambda}); }

ModelSpec binomial(std::int64_t m, double p) {
  if (m < 1) throw InvalidModel("binomial: m must be >= 1");
  return with_theta(natural_frame(Family::Binomial, 1, {.m = m}), {p});
}

ModelSpec yule_simon(double rho) { return with_theta(natural_frame(Family::YuleSimon, 1, {}), {rho}); }

ModelSpec beta_neg_binomial(double alpha, double beta, double r) {
  return with_theta(natural_frame(Family::BetaNegBinomial, 1, {.r = r}), {alpha, beta});
}

ModelSpec logarithmic(double p) { return with_theta(natural_frame(Family::Logarithmic, 1, {}), {p}); }

ModelSpec trunc_poisson(double lambda, std::int64_t a, Bound b) {
  if (b.kind == Bound::Kind::MinusInfinity || (b.is_finite() && b.value <= a)) {
    throw InvalidModel("truncpoisson: requires a < b");
  }
  return with_theta({Family::TruncPoisson, {}, LatticeBox::interval(a, b)}, {lambda});
}

ModelSpec trunc_binomial(std::int64_t m, double p, std::int64_t a, std::int64_t b) {
  if (a > b) throw InvalidModel("truncbinomial: requires 0 <= a < b <= m");
  return with_theta({Family::TruncBinomial, {.m = m}, LatticeBox::interval(a, Bound::finite(b))}, {p});
}

ModelSpec neg_multinomial(double r, std::vector<double> p) {
  if (p.empty()) throw InvalidModel("nm: dimension must be >= 1");
  const std::size_t d = p.size();
  return with_theta(natural_frame(Family::NegMultinomial, d, {.r = r}), std::move(p));
}

ModelSpec trunc_neg_multinomial(double r, std::vector<double> p, std::vector<std::int64_t> a,
                                std::vector<std::int64_t> b) {
  if (p.empty() || a.size() != p.size() || b.size() != p.size()) {
    throw InvalidModel("tnm: p, a and b must have the same nonzero length");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) throw InvalidModel("tnm: requires 0 <= a_i < b_i on " + axis_label(i));
  }
  return with_theta({Family::TruncNegMultinomial, {.r = r}, LatticeBox::finite(a, b)}, std::move(p));
}

ModelSpec dirichlet_neg_multinomial(double r, double alpha0, std::vector<double> alpha) {
  if (alpha.empty()) throw InvalidModel("dnm: dimension must be >= 1");
  const std::size_t d = alpha.size();
  return with_theta(natural_frame(Family::DirichletNegMultinomial, d, {.r = r, .alpha0 = alpha0}), std::move(alpha));
}

}  // namespace models

// ---------------------------------------------------------------------------
// Probability mass functions

namespace {

double sum_of(Point k) { return static_cast<double>(std::accumulate(k.begin(), k.end(), std::int64_t{0})); }

double log_poisson(double lambda, std::int64_t k) {
  return static_cast<double>(k) * std::log(lambda) - lambda - log_factorial(k);
}

double log_binomial(std::int64_t m, double p, std::int64_t k) {
  const double kd = static_cast<double>(k);
  return log_factorial(m) - log_factorial(k) - log_factorial(m - k) + kd * std::log(p) +
         (static_cast<double>(m) - kd) * std::log1p(-p);
}

double log_neg_multinomial(double r, std::span<const double> p, Point k) {
  double p_total = 0.0;
  for (double v : p) p_total += v;
  const double s = sum_of(k);
  double acc = log_gamma(r + s) - log_gamma(r) + r * std::log1p(-p_total);
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (k[i] > 0) acc += static_cast<double>(k[i]) * std::log(p[i]) - log_factorial(k[i]);
  }
  return acc;
}

// Log pmf of the untruncated parent (the family itself when untruncated).
double log_parent_pmf(const ModelSpec& m, Point k) {
  const auto& t = m.theta;
  switch (m.family) {
    case Family::Poisson:
    case Family::TruncPoisson: return log_poisson(t[0], k[0]);
    case Family::Binomial:
    case Family::TruncBinomial: return log_binomial(m.fixed.m, t[0], k[0]);
    case Family::YuleSimon: return std::log(t[0]) + log_beta(static_cast<double>(k[0]), t[0] + 1.0);
    case Family::BetaNegBinomial: {
      const double kd = static_cast<double>(k[0]);
      const double r = m.fixed.r;
      return log_beta(r + kd, t[0] + t[1]) - log_beta(r, t[0]) + log_gamma(kd + t[1]) - log_factorial(k[0]) -
             log_gamma(t[1]);
    }
    case Family::Logarithmic: {
      const double kd = static_cast<double>(k[0]);
      return -std::log(-std::log1p(-t[0])) + kd * std::log(t[0]) - std::log(kd);
    }
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial: return log_neg_multinomial(m.fixed.r, t, k);
    case Family::DirichletNegMultinomial: {
      const double r = m.fixed.r;
      const double a0 = m.fixed.alpha0;
      const double a_total = std::accumulate(t.begin(), t.end(), 0.0);
      double acc = log_beta(r + sum_of(k), a0 + a_total) - log_beta(r, a0);
      for (std::size_t i = 0; i < k.size(); ++i) {
        if (k[i] > 0) acc += log_gamma(static_cast<double>(k[i]) + t[i]) - log_factorial(k[i]) - log_gamma(t[i]);
      }
      return acc;
    }
  }
  return -kInf;
}

// Log-sum-exp accumulator that never stores the individual terms.
struct LogSum {
  double top = -kInf;
  double acc = 0.0;

  void add(double v) {
    if (v == -kInf) return;
    if (v <= top) {
      acc += std::exp(v - top);
    } else {
      acc = acc * std::exp(top - v) + 1.0;
      top = v;
    }
  }
  double value() const { return top == -kInf ? -kInf : top + std::log(acc); }
};

// Visits every point of a finite box in lexicographic order.
template <typename Visit>
void for_each_in_finite_box(const LatticeBox& box, Visit&& visit) {
  const std::size_t d = box.dim();
  std::vector<std::int64_t> k(d);
  for (std::size_t i = 0; i < d; ++i) k[i] = box.lower(i).value;
  while (true) {
    visit(Point(k));
    std::size_t i = d;
    while (i > 0) {
      --i;
      if (k[i] < box.upper(i).value) {
        ++k[i];
        break;
      }
      k[i] = box.lower(i).value;
      if (i == 0) return;
    }
  }
}

double compute_log_truncation_mass(const ModelSpec& m) {
  if (!is_truncated(m.family)) return 0.0;
  const LatticeBox& box = m.support;
  if (box.is_finite()) {
    LogSum sum;
    for_each_in_finite_box(box, [&](Point k) { sum.add(log_parent_pmf(m, k)); });
    return sum.value();
  }
  // Truncated Poisson with b = ∞.
  const double lambda = m.theta[0];
  const std::int64_t a = box.lower(0).value;
  if (a == 0) return 0.0;
  double below = 0.0;
  for (std::int64_t k = 0; k < a; ++k) below += std::exp(log_poisson(lambda, k));
  if (below < 0.5) return std::log1p(-below);
  // Most of the mass lies below a: sum the upper tail directly.
  LogSum sum;
  int quiet = 0;
  for (std::int64_t k = a; k < a + 10'000'000; ++k) {
    const double lp = log_poisson(lambda, k);
    sum.add(lp);
    quiet = (static_cast<double>(k) > lambda && lp < sum.value() + std::log(1e-17)) ? quiet + 1 : 0;
    if (quiet >= 30) break;
  }
  return sum.value();
}

}  // namespace

double log_truncation_mass(const ModelSpec& model) {
  validate(model);
  return compute_log_truncation_mass(model);
}

Pmf::Pmf(ModelSpec model) : model_(std::move(model)) {
  validate(model_);
  log_norm_ = compute_log_truncation_mass(model_);
  if (!std::isfinite(log_norm_)) {
    throw NumericalError(std::string(family_name(model_.family)) + ": truncation box carries no probability mass");
  }
}

double Pmf::log_unchecked(Point k) const { return log_parent_pmf(model_, k) - log_norm_; }

double Pmf::log(Point k) const {
  if (!model_.support.contains(k)) throw DomainError("log_pmf: point outside the support");
  return log_unchecked(k);
}

double Pmf::operator()(Point k) const { return std::exp(log(k)); }

double log_pmf(const ModelSpec& model, Point k) { return Pmf(model).log(k); }

// ---------------------------------------------------------------------------
// Stein weight

void TauWeight::evaluate(Point k, std::span<double> out) const {
  const auto& t = model_.theta;
  switch (model_.family) {
    case Family::Poisson:
    case Family::TruncPoisson: out[0] = static_cast<double>(k[0]); return;
    case Family::Binomial:
    case Family::TruncBinomial: out[0] = (1.0 - t[0]) / t[0]; return;
    case Family::YuleSimon: out[0] = static_cast<double>(k[0]) + t[0]; return;
    case Family::BetaNegBinomial: {
      const double kd = static_cast<double>(k[0]);
      out[0] = (model_.fixed.r + kd + t[0] + t[1] - 1.0) * kd;
      return;
    }
    case Family::Logarithmic: out[0] = 1.0; return;
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial:
      for (std::size_t i = 0; i < k.size(); ++i) out[i] = static_cast<double>(k[i]);
      return;
    case Family::DirichletNegMultinomial: {
      const double common =
          sum_of(k) - 1.0 + model_.fixed.r + model_.fixed.alpha0 + std::accumulate(t.begin(), t.end(), 0.0);
      for (std::size_t i = 0; i < k.size(); ++i) out[i] = static_cast<double>(k[i]) * common;
      return;
    }
  }
}

std::vector<double> TauWeight::evaluate(Point k) const {
  if (k.size() != dim()) throw UsageError("tau: point dimension does not match the model");
  std::vector<double> out(dim());
  evaluate(k, out);
  return out;
}

TauWeight tau(const ModelSpec& model) {
  validate(model);
  return TauWeight(model);
}

}  // namespace steindisc
