#include "steindisc/truncation.hpp"

#include <algorithm>
#include <cmath>

#include "steindisc/parallel.hpp"
#include "steindisc/rng.hpp"
#include "steindisc/stein.hpp"

namespace steindisc::truncation {

DomainEstimate estimate_domain(const IntMatrix& sample) {
  if (sample.empty() || sample.cols() == 0) throw UsageError("estimate_domain: empty sample");
  const std::size_t d = sample.cols();
  DomainEstimate est;
  est.per_axis_min.assign(sample.row(0).begin(), sample.row(0).end());
  est.per_axis_max = est.per_axis_min;
  for (std::size_t r = 1; r < sample.rows(); ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      est.per_axis_min[i] = std::min(est.per_axis_min[i], sample(r, i));
      est.per_axis_max[i] = std::max(est.per_axis_max[i], sample(r, i));
    }
  }
  est.box = LatticeBox::finite(est.per_axis_min, est.per_axis_max);
  return est;
}

LatticeBox plugin_box(const ModelFrame& frame, const DomainEstimate& estimate) {
  if (frame.dim() != estimate.per_axis_min.size()) throw UsageError("plugin_box: dimension mismatch");
  std::vector<Bound> lower, upper;
  for (std::size_t i = 0; i < frame.dim(); ++i) {
    lower.push_back(Bound::finite(estimate.per_axis_min[i]));
    upper.push_back(frame.support.upper(i).is_finite() ? Bound::finite(estimate.per_axis_max[i])
                                                       : Bound::plus_infinity());
  }
  return LatticeBox(std::move(lower), std::move(upper));
}

std::optional<ModelFrame> estimated_frame(const ModelFrame& frame, const IntMatrix& sample) {
  if (!is_truncated(frame.family)) {
    throw UsageError(std::string(family_name(frame.family)) + " has no truncation domain to estimate");
  }
  if (sample.cols() != frame.dim()) throw UsageError("estimated_frame: sample dimension does not match the model");
  const LatticeBox box = plugin_box(frame, estimate_domain(sample));
  if (box.is_degenerate()) return std::nullopt;
  ModelFrame out{frame.family, frame.fixed, box};
  validate_frame(out);
  return out;
}

EstimateResult plugin_stein_estimate(const ModelFrame& frame, const IntMatrix& sample,
                                     std::span<const std::string> test_function_names) {
  const auto est = estimated_frame(frame, sample);
  if (!est) {
    return EstimateResult::non_eligible(NeReason::SingularSystem, "estimated domain is degenerate on some axis");
  }
  std::vector<TestFunction> fs;
  if (test_function_names.empty()) {
    fs = stein::default_test_functions(*est);
  } else {
    for (const auto& name : test_function_names) fs.push_back(stein::make_test_function(name, *est));
  }
  return stein::stein_estimate(*est, sample, fs);
}

InvarianceStudy variance_invariance_study(const ModelSpec& model, std::size_t n, std::size_t reps,
                                          std::uint64_t seed, std::size_t workers) {
  validate(model);
  if (!is_truncated(model.family)) throw UsageError("variance_invariance_study: needs a truncated family");
  if (n == 0 || reps == 0) throw UsageError("variance_invariance_study: n and reps must be positive");
  const Sampler sampler(model);
  const ModelFrame frame = model.frame();
  const std::size_t q = model.theta.size();

  struct Rep {
    std::optional<std::vector<double>> known, estimated;
    bool exact_domain = false;
  };
  std::vector<Rep> results(reps);
  parallel_for(reps, worker_count(workers), [&](std::size_t rep) {
    Rng rng(derive_seed(seed, rep));
    const IntMatrix x = sampler.draw(rng, n);
    Rep& out = results[rep];
    out.known = stein::stein_estimate(frame, x).value;
    out.estimated = plugin_stein_estimate(frame, x).value;
    out.exact_domain = plugin_box(frame, estimate_domain(x)) == frame.support;
  });

  InvarianceStudy study;
  const auto qi = static_cast<Eigen::Index>(q);
  std::vector<Eigen::VectorXd> zk, ze;
  for (const Rep& r : results) {
    if (r.exact_domain) ++study.exact_domain_reps;
    if (!r.known || !r.estimated) continue;
    Eigen::VectorXd a(qi), b(qi);
    for (std::size_t j = 0; j < q; ++j) {
      const double scale = std::sqrt(static_cast<double>(n));
      a(static_cast<Eigen::Index>(j)) = scale * ((*r.known)[j] - model.theta[j]);
      b(static_cast<Eigen::Index>(j)) = scale * ((*r.estimated)[j] - model.theta[j]);
    }
    zk.push_back(a);
    ze.push_back(b);
  }
  study.reps_used = zk.size();
  auto covariance = [qi](const std::vector<Eigen::VectorXd>& z) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(qi, qi);
    if (z.size() < 2) return cov;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(qi);
    for (const auto& v : z) mean += v;
    mean /= static_cast<double>(z.size());
    for (const auto& v : z) cov += (v - mean) * (v - mean).transpose();
    return Eigen::MatrixXd(cov / static_cast<double>(z.size() - 1));
  };
  study.known = covariance(zk);
  study.estimated = covariance(ze);
  return study;
}

}  // namespace steindisc::truncation
