#include "steindisc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "steindisc/parallel.hpp"
#include "steindisc/rng.hpp"
#include "steindisc/stein.hpp"
#include "steindisc/truncation.hpp"

namespace steindisc::harness {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

void reject_unknown(const NamedValues& values, const std::vector<std::string>& allowed, std::string_view what,
                    Family family) {
  for (const auto& [key, _] : values) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw UsageError("unknown " + std::string(what) + " '" + key + "' for " + std::string(family_name(family)));
    }
  }
}

const std::vector<double>* lookup(const NamedValues& values, const std::string& key) {
  const auto it = values.find(key);
  return it == values.end() ? nullptr : &it->second;
}

double scalar(const NamedValues& values, const std::string& key, Family family) {
  const auto* v = lookup(values, key);
  if (v == nullptr) throw UsageError(std::string(family_name(family)) + " requires '" + key + "'");
  if (v->size() != 1) throw UsageError("'" + key + "' must be a single value");
  return (*v)[0];
}

std::int64_t integer(double v, const std::string& key) {
  if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 9.0e15) {
    throw UsageError("'" + key + "' must be an integer");
  }
  return static_cast<std::int64_t>(v);
}

// Truncation bound vector of length d; a single value is broadcast.
std::vector<double> bound_values(const NamedValues& fixed, const std::string& key, std::size_t d) {
  const auto* v = lookup(fixed, key);
  if (v->size() == d) return *v;
  if (v->size() == 1) return std::vector<double>(d, (*v)[0]);
  throw UsageError("'" + key + "' must have " + std::to_string(d) + " value(s)");
}

Bound upper_bound(double v, const std::string& key) {
  if (v == kInf) return Bound::plus_infinity();
  return Bound::finite(integer(v, key));
}

}  // namespace

std::vector<std::string> param_keys(Family family) {
  switch (family) {
    case Family::Poisson:
    case Family::TruncPoisson: return {"lambda"};
    case Family::YuleSimon: return {"rho"};
    case Family::BetaNegBinomial: return {"alpha", "beta"};
    case Family::DirichletNegMultinomial: return {"alpha"};
    default: return {"p"};
  }
}

std::vector<std::string> fixed_keys(Family family) {
  switch (family) {
    case Family::Binomial: return {"m"};
    case Family::BetaNegBinomial:
    case Family::NegMultinomial: return {"r"};
    case Family::TruncPoisson: return {"a", "b"};
    case Family::TruncBinomial: return {"m", "a", "b"};
    case Family::TruncNegMultinomial: return {"r", "a", "b"};
    case Family::DirichletNegMultinomial: return {"r", "alpha0"};
    default: return {};
  }
}

ModelFrame build_frame(Family family, const NamedValues& fixed, std::size_t dim, const LatticeBox* fallback) {
  reject_unknown(fixed, fixed_keys(family), "fixed quantity", family);
  Hyperparameters h;
  if (family == Family::Binomial || family == Family::TruncBinomial) h.m = integer(scalar(fixed, "m", family), "m");
  switch (family) {
    case Family::BetaNegBinomial:
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial:
    case Family::DirichletNegMultinomial: h.r = scalar(fixed, "r", family); break;
    default: break;
  }
  if (family == Family::DirichletNegMultinomial) h.alpha0 = scalar(fixed, "alpha0", family);
  if (family == Family::Binomial && h.m < 1) throw InvalidModel("binomial: m must be >= 1");

  if (!is_truncated(family)) {
    ModelFrame frame = models::natural_frame(family, dim, h);
    validate_frame(frame);
    return frame;
  }

  std::vector<Bound> lower(dim), upper(dim);
  for (const char* key : {"a", "b"}) {
    const bool is_lower = key[0] == 'a';
    auto& side = is_lower ? lower : upper;
    if (lookup(fixed, key) != nullptr) {
      const auto values = bound_values(fixed, key, dim);
      for (std::size_t i = 0; i < dim; ++i) {
        side[i] = is_lower ? Bound::finite(integer(values[i], key)) : upper_bound(values[i], key);
      }
    } else if (fallback != nullptr && fallback->dim() == dim) {
      for (std::size_t i = 0; i < dim; ++i) side[i] = is_lower ? fallback->lower(i) : fallback->upper(i);
    } else {
      throw UsageError(std::string(family_name(family)) + " requires '" + key + "'");
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    if (lower[i].is_finite() && upper[i].is_finite() && lower[i].value >= upper[i].value) {
      throw InvalidModel(std::string(family_name(family)) + ": requires a < b");
    }
  }
  ModelFrame frame{family, h, LatticeBox(std::move(lower), std::move(upper))};
  validate_frame(frame);
  return frame;
}

ModelSpec build_model(const ModelDescription& description) {
  const Family family = description.family;
  reject_unknown(description.params, param_keys(family), "parameter", family);
  std::vector<double> theta;
  std::size_t dim = 1;
  if (is_multivariate(family)) {
    const std::string key = param_keys(family)[0];
    const auto* v = lookup(description.params, key);
    if (v == nullptr || v->empty()) throw UsageError(std::string(family_name(family)) + " requires '" + key + "'");
    theta = *v;
    dim = v->size();
  } else {
    for (const auto& key : param_keys(family)) theta.push_back(scalar(description.params, key, family));
  }
  return with_theta(build_frame(family, description.fixed, dim), std::move(theta));
}

ModelDescription describe(const ModelSpec& model) {
  ModelDescription d;
  d.family = model.family;
  const auto keys = param_keys(model.family);
  if (is_multivariate(model.family)) {
    d.params[keys[0]] = model.theta;
  } else {
    for (std::size_t i = 0; i < keys.size(); ++i) d.params[keys[i]] = {model.theta[i]};
  }
  for (const auto& key : fixed_keys(model.family)) {
    if (key == "m") d.fixed[key] = {static_cast<double>(model.fixed.m)};
    if (key == "r") d.fixed[key] = {model.fixed.r};
    if (key == "alpha0") d.fixed[key] = {model.fixed.alpha0};
    if (key == "a" || key == "b") {
      std::vector<double> values;
      for (std::size_t i = 0; i < model.dim(); ++i) {
        const Bound& b = key == "a" ? model.support.lower(i) : model.support.upper(i);
        values.push_back(b.is_finite() ? static_cast<double>(b.value) : kInf);
      }
      d.fixed[key] = values;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Methods

std::string_view method_kind_name(MethodKind kind) noexcept {
  switch (kind) {
    case MethodKind::Stein: return "stein";
    case MethodKind::MLE: return "mle";
    case MethodKind::Moment: return "moment";
    case MethodKind::ScoreMatching: return "sm";
    case MethodKind::MinimumDistance: return "md";
  }
  return "unknown";
}

MethodKind method_kind_from_name(std::string_view name) {
  for (auto kind : {MethodKind::Stein, MethodKind::MLE, MethodKind::Moment, MethodKind::ScoreMatching,
                    MethodKind::MinimumDistance}) {
    if (method_kind_name(kind) == name) return kind;
  }
  if (name == "ml") return MethodKind::MLE;
  if (name == "mo") return MethodKind::Moment;
  if (name == "st") return MethodKind::Stein;
  throw UsageError("unknown method '" + std::string(name) + "'");
}

std::string method_label(const MethodSpec& method) {
  std::string label(method_kind_name(method.kind));
  if (method.kind == MethodKind::Stein && !method.test_functions.empty()) {
    label += "[";
    for (std::size_t i = 0; i < method.test_functions.size(); ++i) {
      if (i > 0) label += "+";
      label += method.test_functions[i];
    }
    label += "]";
  }
  if (method.kind == MethodKind::MinimumDistance && method.md_reading != baselines::MdReading::AtLeast) {
    label += method.md_reading == baselines::MdReading::AsPrinted ? "[as_printed]" : "[square_inside]";
  }
  return label;
}

void validate_config(const ExperimentConfig& config) {
  validate(config.model);
  const Family family = config.model.family;
  if (config.n == 0) throw UsageError("config: n must be >= 1");
  if (config.reps == 0) throw UsageError("config: reps must be >= 1");
  if (config.methods.empty()) throw UsageError("config: at least one method is required");
  if (!(config.ne_policy.runtime_budget > 0.0)) throw UsageError("config: runtime_budget must be positive");
  if (config.domain_mode == DomainMode::Estimated && !is_truncated(family)) {
    throw UsageError("config: estimated domain mode needs a truncated family");
  }
  for (const auto& m : config.methods) {
    switch (m.kind) {
      case MethodKind::Moment:
        if (family != Family::DirichletNegMultinomial) {
          throw UsageError("config: the moment estimator is only available for dnm");
        }
        break;
      case MethodKind::ScoreMatching:
      case MethodKind::MinimumDistance:
        if (family != Family::YuleSimon) throw UsageError("config: sm and md are only available for yulesimon");
        break;
      case MethodKind::Stein:
        if (!m.test_functions.empty()) {
          if (m.test_functions.size() != stein::test_function_count(family)) {
            throw UsageError("config: " + std::string(family_name(family)) + " needs " +
                             std::to_string(stein::test_function_count(family)) + " test function(s)");
          }
          for (const auto& name : m.test_functions) stein::make_test_function(name, config.model.frame());
        }
        break;
      case MethodKind::MLE: break;
    }
  }
}

EstimateResult apply_method(const ExperimentConfig& config, const MethodSpec& method, const IntMatrix& sample) {
  const ModelFrame frame = config.model.frame();
  const bool estimated = config.domain_mode == DomainMode::Estimated;
  baselines::Options options;
  options.budget.max_seconds = config.ne_policy.runtime_budget;
  options.md_reading = method.md_reading;

  EstimateResult res;
  try {
    switch (method.kind) {
      case MethodKind::Stein:
        if (estimated) {
          res = truncation::plugin_stein_estimate(frame, sample, method.test_functions);
        } else if (method.test_functions.empty()) {
          res = stein::stein_estimate(frame, sample);
        } else {
          std::vector<TestFunction> fs;
          for (const auto& name : method.test_functions) fs.push_back(stein::make_test_function(name, frame));
          res = stein::stein_estimate(frame, sample, fs);
        }
        break;
      case MethodKind::MLE:
        if (estimated) {
          const auto est = truncation::estimated_frame(frame, sample);
          res = est ? baselines::mle(*est, sample, options)
                    : EstimateResult::non_eligible(NeReason::OutOfDomain, "estimated domain is degenerate");
        } else {
          res = baselines::mle(frame, sample, options);
        }
        break;
      case MethodKind::Moment: res = baselines::moment_dnm(sample, frame.fixed.r, frame.fixed.alpha0); break;
      case MethodKind::ScoreMatching: res = baselines::score_matching_ys(sample, options); break;
      case MethodKind::MinimumDistance: res = baselines::minimum_distance_ys(sample, options); break;
    }
  } catch (const NumericalError& e) {
    res = EstimateResult::non_eligible(NeReason::OptimizerFailure, e.what());
  }

  if (res.eligible() && config.ne_policy.bnb_truncated_mean && config.model.family == Family::BetaNegBinomial) {
    const double threshold = *config.ne_policy.bnb_truncated_mean;
    for (std::size_t j = 0; j < res.value->size(); ++j) {
      if (std::abs((*res.value)[j] - config.model.theta[j]) > threshold) {
        return EstimateResult::non_eligible(NeReason::OutlierTruncated, "estimate beyond the truncation threshold");
      }
    }
  }
  return res;
}

std::vector<ReportRow> run_experiment(const ExperimentConfig& config, std::size_t workers,
                                      std::vector<MethodOutcomes>* outcomes) {
  validate_config(config);
  const Sampler sampler(config.model);
  const std::size_t n_methods = config.methods.size();
  std::vector<std::vector<EstimateResult>> results(n_methods, std::vector<EstimateResult>(config.reps));
  std::vector<std::vector<double>> seconds(n_methods, std::vector<double>(config.reps, 0.0));

  parallel_for(config.reps, worker_count(workers), [&](std::size_t rep) {
    Rng rng(derive_seed(config.seed, rep));
    const IntMatrix x = sampler.draw(rng, config.n);
    for (std::size_t m = 0; m < n_methods; ++m) {
      const auto t0 = Clock::now();
      results[m][rep] = apply_method(config, config.methods[m], x);
      seconds[m][rep] = std::chrono::duration<double>(Clock::now() - t0).count();
    }
  });

  const auto names = parameter_names(config.model.family, config.model.dim());
  std::vector<ReportRow> rows;
  for (std::size_t m = 0; m < n_methods; ++m) {
    const auto& res = results[m];
    std::size_t used = 0;
    for (const auto& r : res) used += r.eligible() ? 1 : 0;
    double wall = 0.0;
    if (config.record_timing) {
      for (double s : seconds[m]) wall += s;
    }
    for (std::size_t j = 0; j < names.size(); ++j) {
      const double truth = config.model.theta[j];
      double err = 0.0, sq = 0.0;
      for (const auto& r : res) {
        if (!r.eligible()) continue;
        const double e = (*r.value)[j] - truth;
        err += e;
        sq += e * e;
      }
      ReportRow row;
      row.family = std::string(family_name(config.model.family));
      row.param = names[j];
      row.true_value = truth;
      row.method = method_label(config.methods[m]);
      const double denom = static_cast<double>(used);
      row.bias = used > 0 ? err / denom : std::numeric_limits<double>::quiet_NaN();
      row.mse = used > 0 ? sq / denom : std::numeric_limits<double>::quiet_NaN();
      row.ne_percent = 100.0 * static_cast<double>(config.reps - used) / static_cast<double>(config.reps);
      row.reps_used = used;
      row.wall_seconds = wall;
      rows.push_back(std::move(row));
    }
  }
  if (outcomes != nullptr) {
    outcomes->clear();
    for (std::size_t m = 0; m < n_methods; ++m) outcomes->push_back({config.methods[m], std::move(results[m])});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Efficiency curve

std::vector<EfficiencyPoint> efficiency_curve(std::span<const double> grid, std::size_t workers) {
  for (double p : grid) {
    if (!(p > 0.0 && p < 1.0)) throw UsageError("efficiency_curve: grid values must lie in (0, 1)");
  }
  std::vector<EfficiencyPoint> points(grid.size());
  parallel_for(grid.size(), worker_count(workers), [&](std::size_t i) {
    const double p = grid[i];
    EfficiencyPoint& pt = points[i];
    pt.p = p;
    pt.v_stein = stein::stein_asymptotic_variance_logarithmic(p);
    pt.v_ml = stein::ml_asymptotic_variance_logarithmic(p);
    pt.ratio = pt.v_stein / pt.v_ml;
  });
  return points;
}

std::vector<double> parse_grid(std::string_view spec) {
  const auto c1 = spec.find(':');
  const auto c2 = c1 == std::string_view::npos ? c1 : spec.find(':', c1 + 1);
  if (c2 == std::string_view::npos) throw UsageError("grid must have the form lo:hi:step");
  double lo = 0, hi = 0, step = 0;
  try {
    lo = std::stod(std::string(spec.substr(0, c1)));
    hi = std::stod(std::string(spec.substr(c1 + 1, c2 - c1 - 1)));
    step = std::stod(std::string(spec.substr(c2 + 1)));
  } catch (const std::exception&) {
    throw UsageError("grid must have the form lo:hi:step with numeric entries");
  }
  if (!(step > 0.0) || !(hi >= lo)) throw UsageError("grid needs step > 0 and hi >= lo");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-3)) + 1;
  std::vector<double> grid;
  for (std::size_t i = 0; i < count; ++i) {
    const double v = lo + static_cast<double>(i) * step;
    grid.push_back(std::round(v * 1e12) / 1e12);
  }
  return grid;
}

}  // namespace steindisc::harness
