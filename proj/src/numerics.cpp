#include "steindisc/numerics.hpp"

#include <math.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/special_functions/lambert_w.hpp>

#include "steindisc/common.hpp"

namespace steindisc::numerics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("log_gamma: argument must be a positive finite number, got " + std::to_string(x));
  }
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

double log_beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("log_beta: arguments must be positive");
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double log_factorial(std::int64_t k) {
  if (k < 0) throw DomainError("log_factorial: negative argument");
  if (k < 2) return 0.0;
  return log_gamma(static_cast<double>(k) + 1.0);
}

double lambert_w_minus1(double x) {
  constexpr double kBranchPoint = -0.36787944117144233;  // -1/e
  if (!(x < 0.0) || x < kBranchPoint) {
    throw DomainError("lambert_w_minus1: argument must lie in [-1/e, 0)");
  }
  if (x == kBranchPoint) return -1.0;
  return boost::math::lambert_wm1(x);
}

double log_sum_exp(std::span<const double> values) {
  double top = -kInf;
  for (double v : values) top = std::max(top, v);
  if (top == -kInf) return -kInf;
  if (top == kInf) return kInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

// ---------------------------------------------------------------------------
// Nelder–Mead

namespace {

struct Simplex {
  std::vector<std::vector<double>> x;
  std::vector<double> f;
};

double safe_eval(const Objective& objective, std::span<const double> p) {
  const double v = objective(p);
  return std::isfinite(v) ? v : kInf;
}

Simplex initial_simplex(const Objective& objective, const std::vector<double>& start, double step_scale) {
  const std::size_t n = start.size();
  double scale = 1.0;
  for (double v : start) scale = std::max(scale, std::abs(v));
  const double step = step_scale * scale;
  Simplex s;
  s.x.assign(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) s.x[i + 1][i] += step;
  s.f.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) s.f[j] = safe_eval(objective, s.x[j]);
  return s;
}

void order(Simplex& s) {
  std::vector<std::size_t> idx(s.f.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.f[a] < s.f[b]; });
  Simplex sorted;
  sorted.x.reserve(idx.size());
  sorted.f.reserve(idx.size());
  for (std::size_t i : idx) {
    sorted.x.push_back(std::move(s.x[i]));
    sorted.f.push_back(s.f[i]);
  }
  s = std::move(sorted);
}

double diameter(const Simplex& s) {
  double d = 0.0;
  for (std::size_t j = 1; j < s.x.size(); ++j)
    for (std::size_t i = 0; i < s.x[0].size(); ++i) d = std::max(d, std::abs(s.x[j][i] - s.x[0][i]));
  return d;
}

enum class Outcome { Converged, IterationCap, TimeCap };

// Runs one Nelder–Mead descent in place; `iterations` accumulates across restarts.
Outcome descend(const Objective& objective, Simplex& s, const Budget& budget, const NelderMeadOptions& opt,
                int& iterations, Clock::time_point t0) {
  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  const std::size_t n = s.x[0].size();
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);

  while (true) {
    order(s);
    const double spread = s.f[n] - s.f[0];
    if (std::isfinite(s.f[n]) && spread < opt.spread_tol && diameter(s) < opt.diameter_tol) {
      return Outcome::Converged;
    }
    if (!std::isfinite(s.f[n]) && diameter(s) < opt.diameter_tol) return Outcome::Converged;
    if (iterations >= budget.max_iters) return Outcome::IterationCap;
    if (seconds_since(t0) > budget.max_seconds) return Outcome::TimeCap;
    ++iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) centroid[i] += s.x[j][i] / static_cast<double>(n);

    const auto& worst = s.x[n];
    for (std::size_t i = 0; i < n; ++i) xr[i] = centroid[i] + kReflect * (centroid[i] - worst[i]);
    const double fr = safe_eval(objective, xr);

    if (fr < s.f[0]) {
      for (std::size_t i = 0; i < n; ++i) xe[i] = centroid[i] + kExpand * (xr[i] - centroid[i]);
      const double fe = safe_eval(objective, xe);
      if (fe < fr) {
        s.x[n] = xe;
        s.f[n] = fe;
      } else {
        s.x[n] = xr;
        s.f[n] = fr;
      }
      continue;
    }
    if (fr < s.f[n - 1]) {
      s.x[n] = xr;
      s.f[n] = fr;
      continue;
    }
    const bool outside = fr < s.f[n];
    const auto& toward = outside ? xr : worst;
    for (std::size_t i = 0; i < n; ++i) xc[i] = centroid[i] + kContract * (toward[i] - centroid[i]);
    const double fc = safe_eval(objective, xc);
    if (fc < (outside ? fr : s.f[n])) {
      s.x[n] = xc;
      s.f[n] = fc;
      continue;
    }
    for (std::size_t j = 1; j <= n; ++j) {
      for (std::size_t i = 0; i < n; ++i) s.x[j][i] = s.x[0][i] + kShrink * (s.x[j][i] - s.x[0][i]);
      s.f[j] = safe_eval(objective, s.x[j]);
    }
  }
}

}  // namespace

OptimizerReport nelder_mead(const Objective& objective, std::vector<double> start, const Budget& budget,
                            const NelderMeadOptions& options) {
  if (start.empty()) throw UsageError("nelder_mead: empty starting point");
  const double f0 = objective(start);
  if (!std::isfinite(f0)) throw UsageError("nelder_mead: objective is not finite at the starting point");

  const auto t0 = Clock::now();
  OptimizerReport report;
  Simplex s = initial_simplex(objective, start, options.initial_step);
  Outcome outcome = descend(objective, s, budget, options, report.iterations, t0);

  for (int r = 0; r < options.restarts && outcome == Outcome::Converged; ++r) {
    const double before = s.f[0];
    const std::vector<double> best = s.x[0];
    Simplex fresh = initial_simplex(objective, best, options.initial_step);
    outcome = descend(objective, fresh, budget, options, report.iterations, t0);
    if (fresh.f[0] <= s.f[0]) s = std::move(fresh);
    if (before - s.f[0] < options.spread_tol) break;
  }

  order(s);
  report.argmin = s.x[0];
  report.objective_value = s.f[0];
  report.elapsed = seconds_since(t0);
  report.time_exceeded = outcome == Outcome::TimeCap;
  report.converged = outcome == Outcome::Converged && std::isfinite(s.f[0]);
  return report;
}

// ---------------------------------------------------------------------------
// Brent

double minimize_1d(const std::function<double(double)>& objective, double lo, double hi, double tol) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    throw UsageError("minimize_1d: bracket must be a finite interval with lo < hi");
  }
  if (!(tol > 0.0)) throw UsageError("minimize_1d: tolerance must be positive");

  auto eval = [&](double x) {
    const double v = objective(x);
    if (!std::isfinite(v)) {
      throw NumericalError("minimize_1d: objective is not finite at x = " + std::to_string(x));
    }
    return v;
  };

  constexpr double kGolden = 0.3819660112501051;  // (3 - sqrt 5) / 2
  constexpr double kRelEps = 2.0 * std::numeric_limits<double>::epsilon();
  double a = lo, b = hi;
  double x = a + kGolden * (b - a);
  double w = x, v = x;
  double fx = eval(x);
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int iter = 0; iter < 1000; ++iter) {
    const double m = 0.5 * (a + b);
    const double tol1 = kRelEps * std::abs(x) + tol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;

    bool golden = true;
    if (std::abs(e) > tol1) {
      // Parabola through (v, fv), (w, fw), (x, fx).
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (x < m) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x < m) ? b - x : a - x;
      d = kGolden * e;
    }
    const double u = (std::abs(d) >= tol1) ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = eval(u);
    if (fu <= fx) {
      (u < x ? b : a) = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  return x;
}

}  // namespace steindisc::numerics
