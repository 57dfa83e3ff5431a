#include <cmath>
#include <limits>
#include <numeric>

#include "steindisc/stein.hpp"

namespace steindisc::stein {

namespace {

constexpr double kMaxCondition = 1e12;

double sum_of(Point k) { return static_cast<double>(std::accumulate(k.begin(), k.end(), std::int64_t{0})); }

double shifted(const TestFunction& f, const LatticeBox& support, Point k, std::size_t axis,
               std::vector<std::int64_t>& scratch) {
  scratch.assign(k.begin(), k.end());
  scratch[axis] += 1;
  const Point kp(scratch);
  return support.contains(kp) ? f(kp) : 0.0;
}

}  // namespace

LinearSteinForm::LinearSteinForm(ModelFrame frame, std::vector<TestFunction> fs)
    : frame_(std::move(frame)), fs_(std::move(fs)) {
  validate_frame(frame_);
  if (fs_.size() != test_function_count(frame_.family)) {
    throw UsageError(std::string(family_name(frame_.family)) + " linear form needs " +
                     std::to_string(test_function_count(frame_.family)) + " test function(s)");
  }
  q_ = parameter_count(frame_.family, frame_.dim());
}

void LinearSteinForm::M(Point k, Eigen::Ref<Eigen::MatrixXd> out) const {
  out.setZero();
  const LatticeBox& box = frame_.support;
  std::vector<std::int64_t> scratch;
  const double kd = static_cast<double>(k[0]);
  const double r = frame_.fixed.r;

  switch (frame_.family) {
    case Family::Poisson:
    case Family::TruncPoisson: {
      const TestFunction& f = fs_[0];
      out(0, 0) = shifted(f, box, k, 0, scratch);
      out(0, 1) = -kd * f(k);
      return;
    }
    case Family::Binomial:
    case Family::TruncBinomial: {
      const TestFunction& f = fs_[0];
      const double m = static_cast<double>(frame_.fixed.m);
      out(0, 0) = -f(k);
      out(0, 1) = (m - kd) / (kd + 1.0) * shifted(f, box, k, 0, scratch);
      return;
    }
    case Family::YuleSimon: {
      const TestFunction& f = fs_[0];
      const double f0 = f(k);
      out(0, 0) = -f0;
      out(0, 1) = kd * shifted(f, box, k, 0, scratch) - kd * f0;
      return;
    }
    case Family::Logarithmic: {
      const TestFunction& f = fs_[0];
      out(0, 0) = kd / (kd + 1.0) * shifted(f, box, k, 0, scratch);
      out(0, 1) = -f(k);
      return;
    }
    case Family::BetaNegBinomial:
      for (Eigen::Index j = 0; j < 2; ++j) {
        const TestFunction& f = fs_[static_cast<std::size_t>(j)];
        const double f0 = f(k);
        const double f1 = shifted(f, box, k, 0, scratch);
        out(j, 0) = -kd * f0;
        out(j, 1) = (r + kd) * f1 - kd * f0;
        out(j, 2) = (r + kd) * kd * f1 - (r + kd - 1.0) * kd * f0;
      }
      return;
    case Family::NegMultinomial:
    case Family::TruncNegMultinomial:
    case Family::DirichletNegMultinomial: {
      const TestFunction& f = fs_[0];
      const auto d = static_cast<Eigen::Index>(k.size());
      const double s = sum_of(k);
      const double f0 = f(k);
      const bool dirichlet = frame_.family == Family::DirichletNegMultinomial;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double fi = shifted(f, box, k, static_cast<std::size_t>(i), scratch);
        const double ki = static_cast<double>(k[static_cast<std::size_t>(i)]);
        if (dirichlet) {
          for (Eigen::Index j = 0; j < d; ++j) out(i, j) = -ki * f0;
          out(i, i) += (s + r) * fi;
          out(i, d) = (s + r) * ki * fi - ki * (s - 1.0 + r + frame_.fixed.alpha0) * f0;
        } else {
          out(i, i) = (s + r) * fi;
          out(i, d) = -ki * f0;
        }
      }
      return;
    }
  }
}

Eigen::MatrixXd LinearSteinForm::M(Point k) const {
  if (!frame_.support.contains(k)) throw DomainError("LinearSteinForm::M: point outside the support");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(q_), static_cast<Eigen::Index>(q_ + 1));
  M(k, out);
  return out;
}

Eigen::VectorXd LinearSteinForm::g(std::span<const double> theta) const {
  if (theta.size() != q_) throw UsageError("LinearSteinForm::g: wrong parameter length");
  Eigen::VectorXd out(static_cast<Eigen::Index>(q_ + 1));
  for (std::size_t i = 0; i < q_; ++i) out(static_cast<Eigen::Index>(i)) = theta[i];
  if (frame_.family == Family::Binomial || frame_.family == Family::TruncBinomial) out(0) = (1.0 - theta[0]) / theta[0];
  out(static_cast<Eigen::Index>(q_)) = 1.0;
  return out;
}

Eigen::MatrixXd LinearSteinForm::dg(std::span<const double> theta) const {
  if (theta.size() != q_) throw UsageError("LinearSteinForm::dg: wrong parameter length");
  const auto q = static_cast<Eigen::Index>(q_);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q + 1, q);
  out.topRows(q).setIdentity();
  if (frame_.family == Family::Binomial || frame_.family == Family::TruncBinomial) {
    out(0, 0) = -1.0 / (theta[0] * theta[0]);
  }
  return out;
}

std::vector<double> LinearSteinForm::theta_from_g(const Eigen::VectorXd& phi) const {
  std::vector<double> theta(q_);
  for (std::size_t i = 0; i < q_; ++i) theta[i] = phi(static_cast<Eigen::Index>(i));
  if (frame_.family == Family::Binomial || frame_.family == Family::TruncBinomial) theta[0] = 1.0 / (1.0 + phi(0));
  return theta;
}

EstimateResult solve_linear_stein_system(const LinearSteinForm& form, const IntMatrix& sample) {
  require_sample_in_support(form.frame(), sample);
  const auto q = static_cast<Eigen::Index>(form.equations());
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(q, q + 1);
  Eigen::MatrixXd m(q, q + 1);
  for (std::size_t r = 0; r < sample.rows(); ++r) {
    form.M(sample.row(r), m);
    mean += m;
  }
  mean /= static_cast<double>(sample.rows());

  const Eigen::MatrixXd a = mean.leftCols(q);
  const Eigen::VectorXd rhs = -mean.col(q);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  if (!(sv(q - 1) > 0.0) || !(sv(0) / sv(q - 1) <= kMaxCondition)) {
    return EstimateResult::non_eligible(NeReason::SingularSystem, "mean of M(X) is singular");
  }
  const Eigen::VectorXd phi = a.partialPivLu().solve(rhs);
  return check_constraints(form.frame(), form.theta_from_g(phi));
}

Eigen::MatrixXd sandwich_covariance(const ModelSpec& model, const LinearSteinForm& form, CovarianceMode mode,
                                    const IntMatrix* sample) {
  validate(model);
  if (!(model.frame() == form.frame())) throw UsageError("sandwich_covariance: model and form frames differ");
  const auto q = static_cast<Eigen::Index>(form.equations());
  const Eigen::VectorXd gv = form.g(model.theta);
  const Eigen::MatrixXd dgm = form.dg(model.theta);

  // Flattened layout: E[M] (q × (q+1), column-major) followed by E[(Mg)(Mg)ᵀ] (q × q).
  const auto m_size = static_cast<std::size_t>(q * (q + 1));
  const auto out_dim = m_size + static_cast<std::size_t>(q * q);
  Eigen::MatrixXd m(q, q + 1);
  auto summand = [&](Point k, std::span<double> out) {
    form.M(k, m);
    const Eigen::VectorXd a = m * gv;
    std::copy(m.data(), m.data() + m.size(), out.begin());
    Eigen::Map<Eigen::MatrixXd>(out.data() + m_size, q, q) = a * a.transpose();
  };

  std::vector<double> moments;
  if (mode == CovarianceMode::Exact) {
    moments = exact_expectation(model, out_dim, summand);
  } else {
    if (sample == nullptr) throw UsageError("sandwich_covariance: empirical mode needs a sample");
    require_sample_in_support(form.frame(), *sample);
    moments.assign(out_dim, 0.0);
    std::vector<double> row(out_dim);
    for (std::size_t r = 0; r < sample->rows(); ++r) {
      summand(sample->row(r), row);
      for (std::size_t j = 0; j < out_dim; ++j) moments[j] += row[j];
    }
    for (double& v : moments) v /= static_cast<double>(sample->rows());
  }

  const Eigen::Map<const Eigen::MatrixXd> mean_m(moments.data(), q, q + 1);
  const Eigen::Map<const Eigen::MatrixXd> v(moments.data() + m_size, q, q);
  const Eigen::MatrixXd j = mean_m * dgm;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const auto& sv = svd.singularValues();
  if (!(sv(q - 1) > 0.0) || !(sv(0) / sv(q - 1) <= kMaxCondition)) {
    throw NumericalError("sandwich_covariance: Jacobian of the Stein equations is singular");
  }
  const Eigen::MatrixXd j_inv = j.inverse();
  return j_inv * v * j_inv.transpose();
}

}  // namespace steindisc::stein
