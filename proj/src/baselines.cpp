#include "steindisc/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "steindisc/stein.hpp"

namespace steindisc::baselines {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Transformed parameters beyond ±log(1e8) are treated as boundary solutions.
const double kCap = std::log(1e8);

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Distinct observations with multiplicities.
struct Compressed {
  IntMatrix points;
  std::vector<double> counts;
};

Compressed compress(const IntMatrix& x) {
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    const Point ra = x.row(a), rb = x.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(idx.begin(), idx.end(), less);
  Compressed c;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Point row = x.row(idx[i]);
    if (i > 0 && std::equal(row.begin(), row.end(), x.row(idx[i - 1]).begin())) {
      c.counts.back() += 1.0;
    } else {
      c.points.push_row(row);
      c.counts.push_back(1.0);
    }
  }
  return c;
}

double weighted_log_likelihood(const ModelSpec& model, const Compressed& c) {
  const Pmf pmf(model);
  double acc = 0.0;
  for (std::size_t i = 0; i < c.points.rows(); ++i) acc += c.counts[i] * pmf.log_unchecked(c.points.row(i));
  return acc;
}

std::vector<std::int64_t> univariate_values(const IntMatrix& x) {
  if (x.empty()) throw UsageError("estimator: empty sample");
  if (x.cols() != 1) throw UsageError("estimator: expected a univariate sample");
  return x.data();
}

struct LineResult {
  double x = 0.0;
  NeReason reason = NeReason::None;
};

// Minimizes h over the real line: geometric bracket expansion from x0, then Brent.
LineResult minimize_on_line(const std::function<double(double)>& h, double x0) {
  auto eval = [&](double x) {
    const double v = h(x);
    return std::isfinite(v) ? v : kInf;
  };
  double step = 0.5;
  double f0 = eval(x0);
  if (!std::isfinite(f0)) return {0.0, NeReason::OptimizerFailure};
  const double fl = eval(x0 - step);
  const double fr = eval(x0 + step);
  double lo = x0 - step, hi = x0 + step;
  if (!(f0 <= fl && f0 <= fr)) {
    const double dir = fr < fl ? 1.0 : -1.0;
    double prev = x0;
    double mid = x0 + dir * step;
    double fmid = std::min(fl, fr);
    while (true) {
      step *= 2.0;
      const double next = mid + dir * step;
      if (std::abs(next) > kCap) return {next, NeReason::OutOfDomain};
      const double fnext = eval(next);
      if (fnext >= fmid) {
        lo = std::min(prev, next);
        hi = std::max(prev, next);
        break;
      }
      prev = mid;
      mid = next;
      fmid = fnext;
    }
  }
  try {
    const double x = numerics::minimize_1d(h, lo, hi, 1e-10);
    return {x, NeReason::None};
  } catch (const NumericalError&) {
    return {0.0, NeReason::OptimizerFailure};
  }
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double inv_logit(double y) { return 1.0 / (1.0 + std::exp(-y)); }

EstimateResult finish(const ModelFrame& frame, std::vector<double> theta, Clock::time_point t0,
                      const numerics::Budget& budget) {
  if (seconds_since(t0) > budget.max_seconds) {
    return EstimateResult::non_eligible(NeReason::RuntimeExceeded, "estimation exceeded the runtime budget");
  }
  return stein::check_constraints(frame, std::move(theta));
}

EstimateResult boundary(std::string what) { return EstimateResult::non_eligible(NeReason::OutOfDomain, std::move(what)); }

// Maps unconstrained coordinates y to θ and back.
struct Transform {
  std::function<std::vector<double>(std::span<const double>)> to_theta;
  std::function<std::vector<double>(std::span<const double>)> to_y;
};

Transform transform_for(Family family) {
  switch (family) {
    case Family::TruncBinomial:
      return {[](std::span<const double> y) { return std::vector<double>{inv_logit(y[0])}; },
              [](std::span<const double> t) { return std::vector<double>{logit(t[0])}; }};
    case Family::TruncNegMultinomial:
      // Additive logistic: p_i = e^{y_i} / (1 + Σ e^{y_j}).
      return {[](std::span<const double> y) {
                double denom = 1.0;
                for (double v : y) denom += std::exp(v);
                std::vector<double> p;
                for (double v : y) p.push_back(std::exp(v) / denom);
                return p;
              },
              [](std::span<const double> t) {
                const double p0 = 1.0 - std::accumulate(t.begin(), t.end(), 0.0);
                std::vector<double> y;
                for (double v : t) y.push_back(std::log(v / p0));
                return y;
              }};
    default:
      return {[](std::span<const double> y) {
                std::vector<double> t;
                for (double v : y) t.push_back(std::exp(v));
                return t;
              },
              [](std::span<const double> t) {
                std::vector<double> y;
                for (double v : t) y.push_back(std::log(v));
                return y;
              }};
  }
}

EstimateResult numerical_mle(const ModelFrame& frame, const IntMatrix& sample, const Options& options,
                             Clock::time_point t0) {
  const Compressed c = compress(sample);
  const double n = static_cast<double>(sample.rows());
  const Transform tr = transform_for(frame.family);
  auto negloglik = [&](std::span<const double> y) {
    try {
      const std::vector<double> theta = tr.to_theta(y);
      if (!satisfies_constraints(frame, theta)) return kInf;
      ModelSpec model{frame.family, theta, frame.fixed, frame.support};
      return -weighted_log_likelihood(model, c) / n;
    } catch (const std::exception&) {
      return kInf;
    }
  };
  const std::vector<double> start = options.start ? *options.start : default_start(frame);
  if (!satisfies_constraints(frame, start)) throw UsageError("mle: starting point violates the parameter constraints");
  const std::vector<double> y0 = tr.to_y(start);

  if (y0.size() == 1) {
    const LineResult res = minimize_on_line([&](double y) { return negloglik(std::span<const double>(&y, 1)); }, y0[0]);
    if (res.reason != NeReason::None) {
      return EstimateResult::non_eligible(res.reason, "likelihood maximum not attained in the interior");
    }
    return finish(frame, tr.to_theta(std::span<const double>(&res.x, 1)), t0, options.budget);
  }

  numerics::Budget budget = options.budget;
  budget.max_seconds = std::max(0.0, options.budget.max_seconds - seconds_since(t0));
  numerics::NelderMeadOptions nm;
  nm.initial_step = 0.5;
  numerics::OptimizerReport report;
  try {
    report = numerics::nelder_mead(negloglik, y0, budget, nm);
  } catch (const UsageError&) {
    return EstimateResult::non_eligible(NeReason::OptimizerFailure, "likelihood not finite at the starting point");
  }
  if (report.time_exceeded) {
    return EstimateResult::non_eligible(NeReason::RuntimeExceeded, "optimizer exceeded the runtime budget");
  }
  if (!report.converged) return EstimateResult::non_eligible(NeReason::OptimizerFailure, "optimizer did not converge");
  for (double v : report.argmin) {
    if (std::abs(v) > kCap) return boundary("likelihood maximum on the parameter boundary");
  }
  return finish(frame, tr.to_theta(report.argmin), t0, options.budget);
}

}  // namespace

std::vector<double> default_start(const ModelFrame& frame) {
  const std::size_t d = frame.dim();
  switch (frame.family) {
    case Family::Binomial:
    case Family::TruncBinomial:
    case Family::Logarithmic: return {0.5};
    case Family::BetaNegBinomial: return {1.0, 1.0};
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial: return std::vector<double>(d, 1.0 / static_cast<double>(d + 1));
    case Family::DirichletNegMultinomial: return std::vector<double>(d, 1.0);
    default: return {1.0};
  }
}

double log_likelihood(const ModelSpec& model, const IntMatrix& sample) {
  stein::require_sample_in_support(model.frame(), sample);
  return weighted_log_likelihood(model, compress(sample));
}

double logarithmic_mle(double sample_mean) {
  if (!(sample_mean > 1.0) || !std::isfinite(sample_mean)) {
    throw DomainError("logarithmic_mle: sample mean must exceed 1");
  }
  const double u = 1.0 / sample_mean;
  const double w = numerics::lambert_w_minus1(-u * std::exp(-u));
  return -std::expm1(w + u);
}

EstimateResult mle(const ModelFrame& frame, const IntMatrix& sample, const Options& options) {
  const auto t0 = Clock::now();
  validate_frame(frame);
  stein::require_sample_in_support(frame, sample);
  const double n = static_cast<double>(sample.rows());
  const std::size_t d = frame.dim();
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < sample.rows(); ++r)
    for (std::size_t i = 0; i < d; ++i) mean[i] += static_cast<double>(sample(r, i));
  for (double& v : mean) v /= n;

  switch (frame.family) {
    case Family::Poisson:
      if (mean[0] == 0.0) return boundary("all observations are zero");
      return finish(frame, {mean[0]}, t0, options.budget);
    case Family::Binomial: {
      const double m = static_cast<double>(frame.fixed.m);
      if (mean[0] == 0.0 || mean[0] == m) return boundary("all observations on the support boundary");
      return finish(frame, {mean[0] / m}, t0, options.budget);
    }
    case Family::Logarithmic:
      if (!(mean[0] > 1.0)) return boundary("all observations equal one");
      return finish(frame, {logarithmic_mle(mean[0])}, t0, options.budget);
    case Family::NegMultinomial: {
      const double total = std::accumulate(mean.begin(), mean.end(), 0.0);
      std::vector<double> p(d);
      for (std::size_t i = 0; i < d; ++i) {
        if (mean[i] == 0.0) return boundary("a component is zero in every observation");
        p[i] = mean[i] / (frame.fixed.r + total);
      }
      return finish(frame, std::move(p), t0, options.budget);
    }
    default: return numerical_mle(frame, sample, options, t0);
  }
}

EstimateResult moment_dnm(const IntMatrix& sample, double r, double alpha0) {
  if (sample.empty()) throw UsageError("moment_dnm: empty sample");
  if (!(alpha0 > 1.0)) return boundary("moment estimator requires alpha0 > 1");
  const std::size_t d = sample.cols();
  const ModelFrame frame = models::natural_frame(Family::DirichletNegMultinomial, d, {.r = r, .alpha0 = alpha0});
  stein::require_sample_in_support(frame, sample);
  std::vector<double> alpha(d, 0.0);
  for (std::size_t row = 0; row < sample.rows(); ++row)
    for (std::size_t i = 0; i < d; ++i) alpha[i] += static_cast<double>(sample(row, i));
  for (double& v : alpha) v *= (alpha0 - 1.0) / (static_cast<double>(sample.rows()) * r);
  return stein::check_constraints(frame, std::move(alpha));
}

// ---------------------------------------------------------------------------
// Score matching and minimum distance for the Yule–Simon family

namespace {

double iota(double u) { return 1.0 / (1.0 + u); }

void require_positive(const std::vector<std::int64_t>& values) {
  for (auto v : values) {
    if (v < 1) throw DomainError("Yule–Simon estimator: observations must be positive integers");
  }
}

// Sorted distinct values with counts, shared by the score-matching and minimum-distance objectives.
struct ValueTable {
  std::vector<double> values;
  std::vector<double> counts;
  double n = 0.0;
};

ValueTable make_table(std::vector<std::int64_t> xs) {
  std::sort(xs.begin(), xs.end());
  ValueTable t;
  t.n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0 && xs[i] == xs[i - 1]) {
      t.counts.back() += 1.0;
    } else {
      t.values.push_back(static_cast<double>(xs[i]));
      t.counts.push_back(1.0);
    }
  }
  return t;
}

double md_objective(const ValueTable& t, double rho, MdReading reading) {
  auto h = [rho](double v) { return v / (v + 1.0 + rho) - 1.0; };
  const std::size_t m = t.values.size();
  if (reading == MdReading::SquareInside) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double hv = h(t.values[j]);
      acc += t.counts[j] * ((t.values[j] - 1.0) * hv * hv + 1.0);
    }
    return acc / t.n;
  }
  // For k = v_j the term is (c_j + Σ_{v > v_j} c h(v)) / n, plus c_j h(v_j) / n under
  // AtLeast; for k strictly between v_{j-1} and v_j it is Σ_{v >= v_j} c h(v) / n;
  // beyond max(sample) it is 0.
  const bool at_least = reading == MdReading::AtLeast;
  double acc = 0.0;
  double above = 0.0;  // Σ_{l > j} c_l h(v_l)
  for (std::size_t jj = m; jj-- > 0;) {
    const double own = t.counts[jj] * h(t.values[jj]);
    const double at = (t.counts[jj] + above + (at_least ? own : 0.0)) / t.n;
    acc += at * at;
    above += own;
    const double prev = jj == 0 ? 0.0 : t.values[jj - 1];
    const double gap = t.values[jj] - prev - 1.0;
    const double between = above / t.n;
    acc += gap * between * between;
  }
  return acc;
}

// Summed over distinct values in increasing order, so the result does not depend on sample order.
double sm_objective(const ValueTable& t, double rho) {
  double acc = 0.0;
  for (std::size_t j = 0; j < t.values.size(); ++j) {
    const double x = t.values[j];
    const double up = iota(x / (x + 1.0 + rho));
    const double down = iota((x - 1.0) / (x + rho));
    acc += t.counts[j] * (up * up + down * down - 2.0 * up);
  }
  return acc / t.n;
}

EstimateResult minimize_ys(const std::function<double(double)>& objective, const Options& options) {
  const auto t0 = Clock::now();
  const double start = options.start ? options.start->at(0) : 1.0;
  if (!(start > 0.0)) throw UsageError("Yule–Simon estimator: starting value must be positive");
  const LineResult res = minimize_on_line([&](double y) { return objective(std::exp(y)); }, std::log(start));
  if (res.reason != NeReason::None) {
    return EstimateResult::non_eligible(res.reason, "objective minimum not attained in the interior");
  }
  const ModelFrame frame = models::natural_frame(Family::YuleSimon, 1, {});
  return finish(frame, {std::exp(res.x)}, t0, options.budget);
}

}  // namespace

double score_matching_objective_ys(const IntMatrix& sample, double rho) {
  const auto xs = univariate_values(sample);
  require_positive(xs);
  return sm_objective(make_table(xs), rho);
}

EstimateResult score_matching_ys(const IntMatrix& sample, const Options& options) {
  const auto xs = univariate_values(sample);
  require_positive(xs);
  const ValueTable table = make_table(xs);
  return minimize_ys([&](double rho) { return sm_objective(table, rho); }, options);
}

double minimum_distance_objective_ys(const IntMatrix& sample, double rho, MdReading reading, std::int64_t k_max) {
  const auto xs = univariate_values(sample);
  require_positive(xs);
  const auto top = *std::max_element(xs.begin(), xs.end());
  if (k_max != 0 && k_max < top) throw UsageError("minimum_distance_objective_ys: k_max below the sample maximum");
  // Summands for k > max(sample) vanish identically, so k_max only needs validating.
  return md_objective(make_table(xs), rho, reading);
}

EstimateResult minimum_distance_ys(const IntMatrix& sample, const Options& options) {
  const auto xs = univariate_values(sample);
  require_positive(xs);
  const ValueTable table = make_table(xs);
  return minimize_ys([&](double rho) { return md_objective(table, rho, options.md_reading); }, options);
}

}  // namespace steindisc::baselines
