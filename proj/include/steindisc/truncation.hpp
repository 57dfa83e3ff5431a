#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "steindisc/common.hpp"
#include "steindisc/estimate.hpp"
#include "steindisc/models.hpp"

namespace steindisc::truncation {

struct DomainEstimate {
  LatticeBox box;
  std::vector<std::int64_t> per_axis_min;
  std::vector<std::int64_t> per_axis_max;
};

/// Componentwise sample minimum and maximum. Throws UsageError for an empty sample.
DomainEstimate estimate_domain(const IntMatrix& sample);

/// `frame` with its support replaced by the estimated box. Axes whose true upper bound is
/// infinite keep +∞, so only the lower bound is estimated there.
LatticeBox plugin_box(const ModelFrame& frame, const DomainEstimate& estimate);

/// Stein estimate with test functions masked at the estimated bounds. `frame` supplies the
/// family, the fixed hyperparameters and which upper bounds are infinite; its finite bounds
/// are not used. NE SingularSystem when the estimated box is degenerate on some axis.
EstimateResult plugin_stein_estimate(const ModelFrame& frame, const IntMatrix& sample,
                                     std::span<const std::string> test_function_names = {});

/// Frame for estimation on the estimated box, or nullopt when the box is degenerate.
std::optional<ModelFrame> estimated_frame(const ModelFrame& frame, const IntMatrix& sample);

struct InvarianceStudy {
  /// Empirical covariance of √n(θ̂ − θ*) with the true and the estimated domain.
  Eigen::MatrixXd known;
  Eigen::MatrixXd estimated;
  /// Repetitions where both estimates were eligible (the covariances use only these).
  std::size_t reps_used = 0;
  /// Repetitions where the estimated box equalled the true box.
  std::size_t exact_domain_reps = 0;
};

/// Draws `reps` samples of size n from `model` (a truncated family) and estimates θ on each
/// with the known and with the estimated domain. Deterministic in `seed` for any worker count.
InvarianceStudy variance_invariance_study(const ModelSpec& model, std::size_t n, std::size_t reps,
                                          std::uint64_t seed, std::size_t workers = 0);

}  // namespace steindisc::truncation
