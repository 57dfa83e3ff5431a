#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "steindisc/baselines.hpp"
#include "steindisc/estimate.hpp"
#include "steindisc/models.hpp"

namespace steindisc::harness {

// ---------------------------------------------------------------------------
// Model descriptions: named parameter lists as used by configs and the CLI.

/// Parameter values by name. Infinite upper bounds are stored as +inf.
using NamedValues = std::map<std::string, std::vector<double>>;

struct ModelDescription {
  Family family = Family::Poisson;
  NamedValues params;
  NamedValues fixed;
  friend bool operator==(const ModelDescription&, const ModelDescription&) = default;
};

/// Names accepted in `params` and `fixed` for a family.
std::vector<std::string> param_keys(Family family);
std::vector<std::string> fixed_keys(Family family);

/// Throws UsageError for unknown or missing names, InvalidModel for constraint violations.
ModelSpec build_model(const ModelDescription& description);
ModelDescription describe(const ModelSpec& model);

/// Frame from `fixed` alone. Missing truncation bounds are taken from `fallback` when it
/// is given (typically the estimated domain); otherwise they are an error.
ModelFrame build_frame(Family family, const NamedValues& fixed, std::size_t dim,
                       const LatticeBox* fallback = nullptr);

// ---------------------------------------------------------------------------
// Experiments

enum class MethodKind { Stein, MLE, Moment, ScoreMatching, MinimumDistance };

struct MethodSpec {
  MethodKind kind = MethodKind::Stein;
  /// Stein only; empty means the family's default choice.
  std::vector<std::string> test_functions;
  /// Minimum distance only.
  baselines::MdReading md_reading = baselines::MdReading::AtLeast;
  friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

std::string_view method_kind_name(MethodKind kind) noexcept;  // stein, mle, moment, sm, md
MethodKind method_kind_from_name(std::string_view name);
/// Report label, e.g. "stein", "stein[log]", "mle", "md".
std::string method_label(const MethodSpec& method);

enum class DomainMode { Known, Estimated };

/// Non-eligibility rules on top of the parameter-range rule that always applies.
struct NePolicy {
  /// Beta negative binomial: NE if some |θ̂_j − θ*_j| exceeds this.
  std::optional<double> bnb_truncated_mean;
  /// Seconds per estimation call.
  double runtime_budget = 10.0;
  friend bool operator==(const NePolicy&, const NePolicy&) = default;
};

struct ExperimentConfig {
  ModelSpec model;
  std::size_t n = 50;
  std::size_t reps = 2000;
  std::vector<MethodSpec> methods;
  DomainMode domain_mode = DomainMode::Known;
  NePolicy ne_policy;
  std::uint64_t seed = 1;
  /// When false the wall_seconds column is written as 0, making reports byte-reproducible.
  bool record_timing = true;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct ReportRow {
  std::string family;
  std::string param;
  double true_value = 0.0;
  std::string method;
  double bias = 0.0;
  double mse = 0.0;
  double ne_percent = 0.0;
  std::size_t reps_used = 0;
  double wall_seconds = 0.0;
};

/// Per-repetition outcomes of one method, in repetition order.
struct MethodOutcomes {
  MethodSpec method;
  std::vector<EstimateResult> estimates;
};

/// Throws UsageError for invalid method/family pairings or sizes.
void validate_config(const ExperimentConfig& config);

/// One row per (method, parameter component). Bias and MSE use eligible repetitions only.
/// Results do not depend on `workers` (0 = automatic).
std::vector<ReportRow> run_experiment(const ExperimentConfig& config, std::size_t workers = 0,
                                      std::vector<MethodOutcomes>* outcomes = nullptr);

/// Applies `method` to one sample as the harness does, including the NE policy.
EstimateResult apply_method(const ExperimentConfig& config, const MethodSpec& method, const IntMatrix& sample);

struct EfficiencyPoint {
  double p = 0.0;
  double v_stein = 0.0;
  double v_ml = 0.0;
  double ratio = 0.0;
};

/// Asymptotic variances of the logarithmic Stein (f(k) = k − 1) and ML estimators over `grid`.
std::vector<EfficiencyPoint> efficiency_curve(std::span<const double> grid, std::size_t workers = 0);

/// "lo:hi:step" → lo, lo + step, … up to hi (inclusive within step/1000).
std::vector<double> parse_grid(std::string_view spec);

// ---------------------------------------------------------------------------
// Serialization

/// Shortest decimal representation that round-trips; "nan", "inf", "-inf" otherwise.
std::string format_double(double v);

void write_report(const std::vector<ReportRow>& rows, std::ostream& out);
void write_report(const std::vector<ReportRow>& rows, const std::string& path);
void write_efficiency(const std::vector<EfficiencyPoint>& points, std::ostream& out);

/// JSON config. A file holds one experiment object or {"experiments": [ ... ]}.
/// Unknown fields are rejected; errors throw ParseError naming the line or field.
std::vector<ExperimentConfig> parse_configs(std::string_view text);
ExperimentConfig parse_config(std::string_view text);
std::vector<ExperimentConfig> read_configs(const std::string& path);
ExperimentConfig read_config(const std::string& path);

std::string config_to_json(const ExperimentConfig& config);
void write_config(const ExperimentConfig& config, const std::string& path);

}  // namespace steindisc::harness
