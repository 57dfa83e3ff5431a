#include "steindisc/stein.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace steindisc {

std::string_view ne_reason_name(NeReason reason) noexcept {
  switch (reason) {
    case NeReason::None: return "none";
    case NeReason::NegativeParameter: return "negative_parameter";
    case NeReason::OutOfDomain: return "out_of_domain";
    case NeReason::SingularSystem: return "singular_system";
    case NeReason::OptimizerFailure: return "optimizer_failure";
    case NeReason::RuntimeExceeded: return "runtime_exceeded";
    case NeReason::OutlierTruncated: return "outlier_truncated";
  }
  return "unknown";
}

namespace stein {

namespace {

constexpr double kZeroDenominator = 1e-300;

double sum_of(Point k) { return static_cast<double>(std::accumulate(k.begin(), k.end(), std::int64_t{0})); }

// True when k sits on a finite face of the box (k_i = a_i or k_i = b_i on some axis).
bool on_face(const LatticeBox& box, Point k) {
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (box.lower(i).is_finite() && k[i] == box.lower(i).value) return true;
    if (box.upper(i).is_finite() && k[i] == box.upper(i).value) return true;
  }
  return false;
}

// f(k + e_axis), taken as 0 when the shifted point leaves the support.
double shifted(const TestFunction& f, const LatticeBox& support, Point k, std::size_t axis, std::int64_t* scratch) {
  std::copy(k.begin(), k.end(), scratch);
  scratch[axis] += 1;
  const Point kp(scratch, k.size());
  return support.contains(kp) ? f(kp) : 0.0;
}

void require_univariate(std::string_view name, const ModelFrame& frame) {
  if (frame.dim() != 1) throw UsageError("test function '" + std::string(name) + "' is univariate");
}

}  // namespace

// ---------------------------------------------------------------------------
// Test functions

TestFunction make_test_function(std::string_view name, const ModelFrame& frame) {
  const LatticeBox box = frame.support;
  if (name == "one") return {"one", [](Point) { return 1.0; }};
  if (name == "zero") return {"zero", [](Point) { return 0.0; }};
  if (name == "identity") {
    if (frame.dim() == 1) return {"identity", [](Point k) { return static_cast<double>(k[0]); }};
    return {"identity", [](Point k) { return sum_of(k); }};
  }
  if (name == "log") {
    require_univariate(name, frame);
    if (!box.lower(0).is_finite() || box.lower(0).value < 1) {
      throw UsageError("test function 'log' needs a support bounded below by 1");
    }
    return {"log", [](Point k) { return std::log(static_cast<double>(k[0])); }};
  }
  if (name == "k_minus_1") {
    require_univariate(name, frame);
    return {"k_minus_1", [](Point k) { return static_cast<double>(k[0]) - 1.0; }};
  }
  if (name == "masked_identity") {
    require_univariate(name, frame);
    // The truncated binomial choice vanishes at a and b + 1, which lies outside the box;
    // the other families vanish at a and b.
    const bool mask_upper = frame.family != Family::TruncBinomial;
    return {"masked_identity",
            [box, mask_upper](Point k) {
              if (!box.contains(k)) return 0.0;
              if (box.lower(0).is_finite() && k[0] == box.lower(0).value) return 0.0;
              if (mask_upper && box.upper(0).is_finite() && k[0] == box.upper(0).value) return 0.0;
              return static_cast<double>(k[0]);
            },
            true};
  }
  if (name == "sum_interior") {
    return {"sum_interior",
            [box](Point k) { return !box.contains(k) || on_face(box, k) ? 0.0 : sum_of(k); },
            true};
  }
  if (name == "inv_sum_interior") {
    return {"inv_sum_interior",
            [box](Point k) {
              if (!box.contains(k) || on_face(box, k)) return 0.0;
              const double s = sum_of(k);
              return s > 0.0 ? 1.0 / s : 0.0;
            },
            true};
  }
  throw UsageError("unknown test function '" + std::string(name) + "'");
}

std::vector<std::string> default_test_function_names(Family family) {
  switch (family) {
    case Family::Poisson: return {"one"};
    case Family::Binomial: return {"identity"};
    case Family::YuleSimon: return {"log"};
    case Family::BetaNegBinomial: return {"identity", "one"};
    case Family::Logarithmic: return {"k_minus_1"};
    case Family::TruncPoisson:
    case Family::TruncBinomial: return {"masked_identity"};
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial: return {"sum_interior"};
    case Family::DirichletNegMultinomial: return {"inv_sum_interior"};
  }
  return {};
}

std::vector<TestFunction> default_test_functions(const ModelFrame& frame) {
  std::vector<TestFunction> fs;
  for (const auto& name : default_test_function_names(frame.family)) fs.push_back(make_test_function(name, frame));
  return fs;
}

std::size_t test_function_count(Family family) { return family == Family::BetaNegBinomial ? 2 : 1; }

// ---------------------------------------------------------------------------
// Stein operator

void stein_operator(const ModelSpec& model, const TestFunction& f, Point k, std::span<double> out) {
  if (!model.support.contains(k)) throw DomainError("stein_operator: point outside the support");
  const auto& t = model.theta;
  const std::size_t d = k.size();
  std::vector<std::int64_t> scratch(d);
  const double f0 = f(k);
  const double kd = static_cast<double>(k[0]);
  auto f_up = [&](std::size_t axis) { return shifted(f, model.support, k, axis, scratch.data()); };

  switch (model.family) {
    case Family::Poisson:
    case Family::TruncPoisson: out[0] = t[0] * f_up(0) - kd * f0; return;
    case Family::Binomial:
    case Family::TruncBinomial: {
      const double m = static_cast<double>(model.fixed.m);
      out[0] = (m - kd) / (kd + 1.0) * f_up(0) - (1.0 - t[0]) / t[0] * f0;
      return;
    }
    case Family::YuleSimon: out[0] = kd * f_up(0) - (kd + t[0]) * f0; return;
    case Family::BetaNegBinomial: {
      const double r = model.fixed.r;
      out[0] = (r + kd) * (kd + t[1]) * f_up(0) - (r + kd + t[0] + t[1] - 1.0) * kd * f0;
      return;
    }
    case Family::Logarithmic: out[0] = t[0] * kd / (kd + 1.0) * f_up(0) - f0; return;
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial: {
      const double sr = sum_of(k) + model.fixed.r;
      for (std::size_t i = 0; i < d; ++i) out[i] = sr * t[i] * f_up(i) - static_cast<double>(k[i]) * f0;
      return;
    }
    case Family::DirichletNegMultinomial: {
      const double s = sum_of(k);
      const double r = model.fixed.r;
      const double weight = s - 1.0 + r + model.fixed.alpha0 + std::accumulate(t.begin(), t.end(), 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        const double ki = static_cast<double>(k[i]);
        out[i] = (s + r) * (ki + t[i]) * f_up(i) - ki * weight * f0;
      }
      return;
    }
  }
}

std::vector<double> stein_operator(const ModelSpec& model, const TestFunction& f, Point k) {
  if (k.size() != model.dim()) throw UsageError("stein_operator: point dimension does not match the model");
  std::vector<double> out(model.dim());
  stein_operator(model, f, k, out);
  return out;
}

ExpectationResult check_stein_identity_detailed(const ModelSpec& model, const TestFunction& f,
                                                const SumControl& control) {
  validate(model);
  return exact_expectation_detailed(
      model, model.dim(), [&](Point k, std::span<double> out) { stein_operator(model, f, k, out); }, control);
}

std::vector<double> check_stein_identity(const ModelSpec& model, const TestFunction& f) {
  return check_stein_identity_detailed(model, f).value;
}

std::vector<double> boundary_flux(const ModelSpec& model, const TestFunction& f, std::int64_t shell) {
  const Pmf pmf(model);
  const TauWeight weight(model);
  const std::size_t d = model.dim();
  std::vector<double> acc(d, 0.0), w(d);
  for_each_in_shell(model.support, shell, [&](Point k) {
    const double fk = f(k);
    if (fk == 0.0) return;
    const double p = std::exp(pmf.log_unchecked(k));
    weight.evaluate(k, w);
    for (std::size_t i = 0; i < d; ++i) {
      if (k[i] > model.support.lower(i).value) acc[i] += fk * w[i] * p;
    }
  });
  return acc;
}

// ---------------------------------------------------------------------------
// Estimators

void require_sample_in_support(const ModelFrame& frame, const IntMatrix& sample) {
  if (sample.empty()) throw UsageError("estimator: empty sample");
  if (sample.cols() != frame.dim()) throw UsageError("estimator: sample dimension does not match the model");
  for (std::size_t r = 0; r < sample.rows(); ++r) {
    if (!frame.support.contains(sample.row(r))) {
      throw DomainError("estimator: observation " + std::to_string(r + 1) + " lies outside the support");
    }
  }
}

EstimateResult check_constraints(const ModelFrame& frame, std::vector<double> theta) {
  for (double v : theta) {
    if (!std::isfinite(v)) return EstimateResult::non_eligible(NeReason::SingularSystem, "non-finite estimate");
  }
  for (double v : theta) {
    if (!(v > 0.0)) return EstimateResult::non_eligible(NeReason::NegativeParameter, "estimate is not positive");
  }
  if (!satisfies_constraints(frame, theta)) {
    return EstimateResult::non_eligible(NeReason::OutOfDomain, "estimate outside the parameter space");
  }
  return EstimateResult::ok(std::move(theta));
}

namespace {

EstimateResult singular(std::string what) { return EstimateResult::non_eligible(NeReason::SingularSystem, std::move(what)); }

bool is_zero(double denominator) { return std::abs(denominator) <= kZeroDenominator; }

// num / den, or nullopt when the denominator vanishes.
std::optional<double> ratio(double num, double den) {
  if (is_zero(den) || !std::isfinite(den)) return std::nullopt;
  return num / den;
}

double condition_number(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || !std::isfinite(smax)) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

constexpr double kMaxCondition = 1e12;

EstimateResult univariate_estimate(const ModelFrame& frame, const IntMatrix& x, std::span<const TestFunction> fs) {
  const LatticeBox& box = frame.support;
  const double n = static_cast<double>(x.rows());
  std::int64_t scratch[1];
  const TestFunction& f = fs[0];
  auto up = [&](Point k, const TestFunction& fn) { return shifted(fn, box, k, 0, scratch); };

  switch (frame.family) {
    case Family::Poisson:
    case Family::TruncPoisson: {
      double num = 0.0, den = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const Point k = x.row(r);
        num += static_cast<double>(k[0]) * f(k);
        den += up(k, f);
      }
      const auto lambda = ratio(num / n, den / n);
      if (!lambda) return singular("mean of f(X+1) is zero");
      return check_constraints(frame, {*lambda});
    }
    case Family::Binomial:
    case Family::TruncBinomial: {
      const double m = static_cast<double>(frame.fixed.m);
      double num = 0.0, den = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const Point k = x.row(r);
        const double kd = static_cast<double>(k[0]);
        num += (m - kd) * up(k, f) / (kd + 1.0);
        den += f(k);
      }
      const auto odds = ratio(num / n, den / n);  // (1 - p) / p
      if (!odds) return singular("mean of f(X) is zero");
      return check_constraints(frame, {1.0 / (1.0 + *odds)});
    }
    case Family::YuleSimon: {
      double a = 0.0, b = 0.0, c = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const Point k = x.row(r);
        const double kd = static_cast<double>(k[0]);
        const double fk = f(k);
        a += kd * up(k, f);
        b += kd * fk;
        c += fk;
      }
      const auto rho = ratio(a / n - b / n, c / n);
      if (!rho) return singular("mean of f(X) is zero");
      return check_constraints(frame, {*rho});
    }
    case Family::Logarithmic: {
      double num = 0.0, den = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const Point k = x.row(r);
        const double kd = static_cast<double>(k[0]);
        num += f(k);
        den += kd * up(k, f) / (kd + 1.0);
      }
      const auto p = ratio(num / n, den / n);
      if (!p) return singular("mean of X f(X+1) / (X+1) is zero");
      return check_constraints(frame, {*p});
    }
    case Family::BetaNegBinomial: {
      // Row j: mean of [-k f_j, (r+k) f_j(k+1) - k f_j, (r+k) k f_j(k+1) - (r+k-1) k f_j].
      const double rr = frame.fixed.r;
      double a[2] = {0, 0}, b[2] = {0, 0}, c[2] = {0, 0};
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const Point k = x.row(r);
        const double kd = static_cast<double>(k[0]);
        for (int j = 0; j < 2; ++j) {
          const double f0 = fs[static_cast<std::size_t>(j)](k);
          const double f1 = up(k, fs[static_cast<std::size_t>(j)]);
          a[j] += -kd * f0;
          b[j] += (rr + kd) * f1 - kd * f0;
          c[j] += (rr + kd) * kd * f1 - (rr + kd - 1.0) * kd * f0;
        }
      }
      for (int j = 0; j < 2; ++j) {
        a[j] /= n;
        b[j] /= n;
        c[j] /= n;
      }
      Eigen::Matrix2d sys;
      sys << a[0], b[0], a[1], b[1];
      const double det = a[0] * b[1] - a[1] * b[0];
      if (is_zero(det) || condition_number(sys) > kMaxCondition) return singular("moment system is singular");
      const double alpha = (b[0] * c[1] - b[1] * c[0]) / det;
      const double beta = (a[1] * c[0] - a[0] * c[1]) / det;
      return check_constraints(frame, {alpha, beta});
    }
    default: break;
  }
  throw UsageError("univariate estimator called for a multivariate family");
}

EstimateResult multivariate_estimate(const ModelFrame& frame, const IntMatrix& x, const TestFunction& f) {
  const LatticeBox& box = frame.support;
  const std::size_t d = frame.dim();
  const double n = static_cast<double>(x.rows());
  const double r = frame.fixed.r;
  std::vector<std::int64_t> scratch(d);

  // Per-axis means of (s + r) f(X + e_i), k_i f(X), (s + r) k_i f(X + e_i), k_i (s - 1 + r + α₀) f(X).
  std::vector<double> shift_mean(d, 0.0), kf_mean(d, 0.0), kshift_mean(d, 0.0), kweight_mean(d, 0.0);
  for (std::size_t row = 0; row < x.rows(); ++row) {
    const Point k = x.row(row);
    const double s = sum_of(k);
    const double f0 = f(k);
    for (std::size_t i = 0; i < d; ++i) {
      const double fi = shifted(f, box, k, i, scratch.data());
      const double ki = static_cast<double>(k[i]);
      shift_mean[i] += (s + r) * fi;
      kf_mean[i] += ki * f0;
      kshift_mean[i] += (s + r) * ki * fi;
      kweight_mean[i] += ki * (s - 1.0 + r + frame.fixed.alpha0) * f0;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    shift_mean[i] /= n;
    kf_mean[i] /= n;
    kshift_mean[i] /= n;
    kweight_mean[i] /= n;
  }

  if (frame.family != Family::DirichletNegMultinomial) {
    std::vector<double> p(d);
    for (std::size_t i = 0; i < d; ++i) {
      const auto v = ratio(kf_mean[i], shift_mean[i]);
      if (!v) return singular("mean of (S + r) f(X + e_i) is zero");
      p[i] = *v;
    }
    return check_constraints(frame, std::move(p));
  }

  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd a(dd, dd);
  Eigen::VectorXd b(dd);
  for (Eigen::Index i = 0; i < dd; ++i) {
    for (Eigen::Index j = 0; j < dd; ++j) {
      a(i, j) = (i == j ? shift_mean[static_cast<std::size_t>(i)] : 0.0) - kf_mean[static_cast<std::size_t>(i)];
    }
    b(i) = kweight_mean[static_cast<std::size_t>(i)] - kshift_mean[static_cast<std::size_t>(i)];
  }
  if (condition_number(a) > kMaxCondition) return singular("A_n is singular");
  const Eigen::VectorXd alpha = a.partialPivLu().solve(b);
  return check_constraints(frame, std::vector<double>(alpha.data(), alpha.data() + alpha.size()));
}

}  // namespace

EstimateResult stein_estimate(const ModelFrame& frame, const IntMatrix& sample, std::span<const TestFunction> fs) {
  validate_frame(frame);
  require_sample_in_support(frame, sample);
  if (fs.size() != test_function_count(frame.family)) {
    throw UsageError(std::string(family_name(frame.family)) + " estimator needs " +
                     std::to_string(test_function_count(frame.family)) + " test function(s)");
  }
  if (is_multivariate(frame.family)) return multivariate_estimate(frame, sample, fs[0]);
  return univariate_estimate(frame, sample, fs);
}

EstimateResult stein_estimate(const ModelFrame& frame, const IntMatrix& sample) {
  const auto fs = default_test_functions(frame);
  return stein_estimate(frame, sample, fs);
}

// ---------------------------------------------------------------------------
// Asymptotic variances for the logarithmic family

double ml_asymptotic_variance_logarithmic(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("ml_asymptotic_variance_logarithmic: p must lie in (0, 1)");
  const double l = -std::log1p(-p);
  double l_minus_p = 0.0;
  if (p < 0.1) {
    // -log(1 - p) - p = Σ_{j>=2} p^j / j, summed directly to avoid cancellation.
    double term = p;
    for (int j = 2; j < 200; ++j) {
      term *= p;
      const double add = term / j;
      l_minus_p += add;
      if (add < 1e-18 * l_minus_p) break;
    }
  } else {
    l_minus_p = l - p;
  }
  return (1.0 - p) * (1.0 - p) * p * l * l / l_minus_p;
}

double stein_asymptotic_variance_logarithmic(double p) {
  const ModelSpec model = models::logarithmic(p);
  const LinearSteinForm form(model.frame(), default_test_functions(model.frame()));
  return sandwich_covariance(model, form, CovarianceMode::Exact)(0, 0);
}

}  // namespace stein
}  // namespace steindisc
