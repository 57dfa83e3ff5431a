#include <algorithm>
#include <cmath>
#include <limits>

#include "steindisc/models.hpp"

namespace steindisc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::int64_t kUnbounded = std::numeric_limits<std::int64_t>::max();

struct ShellWalker {
  std::vector<std::int64_t> lower;
  std::vector<std::int64_t> width;  // kUnbounded for an infinite axis
  std::vector<std::int64_t> point;
  const std::function<void(Point)>* visit = nullptr;
  std::uint64_t count = 0;

  void walk(std::size_t axis, std::int64_t remaining) {
    if (axis + 1 == lower.size()) {
      if (remaining <= width[axis]) {
        point[axis] = lower[axis] + remaining;
        (*visit)(Point(point));
        ++count;
      }
      return;
    }
    const std::int64_t top = std::min(remaining, width[axis]);
    for (std::int64_t o = 0; o <= top; ++o) {
      point[axis] = lower[axis] + o;
      walk(axis + 1, remaining - o);
    }
  }
};

ShellWalker make_walker(const LatticeBox& box) {
  ShellWalker w;
  const std::size_t d = box.dim();
  w.lower.resize(d);
  w.width.resize(d);
  w.point.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (!box.lower(i).is_finite()) {
      throw NumericalError("exact_expectation: axes unbounded below are not supported");
    }
    w.lower[i] = box.lower(i).value;
    w.width[i] = box.upper(i).is_finite() ? box.upper(i).value - box.lower(i).value : kUnbounded;
  }
  return w;
}

// Last shell index of a finite box, or -1 if some axis is infinite.
std::int64_t last_shell_of(const ShellWalker& w) {
  std::int64_t total = 0;
  for (auto v : w.width) {
    if (v == kUnbounded) return -1;
    total += v;
  }
  return total;
}

// Conservative estimate of Σ_{t>s} B_t from the per-shell bounds B_0..B_s:
// the larger of a geometric fit and a power-law fit; +inf if the power-law
// exponent does not exceed 1 (a geometric fit would understate such tails).
double tail_estimate(const std::vector<double>& bounds) {
  const std::size_t s = bounds.size() - 1;
  const double b = bounds[s];
  if (b == 0.0) return 0.0;
  if (s < 4) return kInf;

  double geometric = kInf;
  const std::size_t w = std::clamp<std::size_t>(s / 2, 1, 10);
  if (bounds[s - w] > 0.0) {
    const double ratio = std::pow(b / bounds[s - w], 1.0 / static_cast<double>(w));
    if (ratio < 1.0) geometric = b * ratio / (1.0 - ratio);
  }
  double algebraic = kInf;
  const std::size_t h = s / 2;
  if (bounds[h] > 0.0) {
    const double beta = std::log(bounds[h] / b) / std::log(static_cast<double>(s) / static_cast<double>(h));
    if (beta > 1.0) algebraic = b * static_cast<double>(s) / (beta - 1.0);
  }
  if (!std::isfinite(algebraic)) return kInf;
  return std::isfinite(geometric) ? std::max(geometric, algebraic) : algebraic;
}

}  // namespace

std::uint64_t for_each_in_shell(const LatticeBox& box, std::int64_t shell, const std::function<void(Point)>& visit) {
  if (shell < 0) return 0;
  ShellWalker w = make_walker(box);
  w.visit = &visit;
  w.walk(0, shell);
  return w.count;
}

ExpectationResult exact_expectation_detailed(const ModelSpec& model, std::size_t out_dim, const VectorFunction& g,
                                             const SumControl& control) {
  const Pmf pmf(model);
  ShellWalker walker = make_walker(model.support);
  const std::int64_t last = last_shell_of(walker);

  ExpectationResult res;
  res.value.assign(out_dim, 0.0);
  std::vector<double> gv(out_dim);
  std::vector<double> bounds;
  double bound_total = 0.0;
  double shell_bound = 0.0;
  int quiet = 0;

  const std::function<void(Point)> visit = [&](Point k) {
    const double lp = pmf.log_unchecked(k);
    if (lp == -kInf) return;
    const double p = std::exp(lp);
    if (p == 0.0) return;
    std::fill(gv.begin(), gv.end(), 0.0);
    g(k, gv);
    double magnitude = 1.0;
    for (std::size_t j = 0; j < out_dim; ++j) {
      res.value[j] += p * gv[j];
      magnitude = std::max(magnitude, std::abs(gv[j]));
    }
    shell_bound += p * magnitude;
  };
  walker.visit = &visit;

  for (std::int64_t s = 0;; ++s) {
    shell_bound = 0.0;
    walker.walk(0, s);
    bounds.push_back(shell_bound);
    bound_total += shell_bound;
    res.shells = s + 1;
    if (s == last) {
      res.exhaustive = true;
      break;
    }
    quiet = shell_bound < control.term_tol ? quiet + 1 : 0;
    if (quiet >= control.consecutive) {
      const double tail = tail_estimate(bounds);
      if (tail <= control.tail_rel_tol * std::max(1.0, bound_total)) {
        res.tail_estimate = tail;
        break;
      }
    }
    if (s + 1 >= control.max_shells || walker.count >= control.max_points) {
      const double tail = tail_estimate(bounds);
      if (!std::isfinite(tail)) {
        throw NumericalError("exact_expectation: summand bound does not decay over " + std::to_string(s + 1) +
                             " shells");
      }
      res.tail_estimate = tail;
      break;
    }
  }
  res.points = walker.count;
  for (double v : res.value) {
    if (!std::isfinite(v)) throw NumericalError("exact_expectation: sum is not finite");
  }
  return res;
}

std::vector<double> exact_expectation(const ModelSpec& model, std::size_t out_dim, const VectorFunction& g) {
  return exact_expectation_detailed(model, out_dim, g).value;
}

double exact_expectation(const ModelSpec& model, const std::function<double(Point)>& g) {
  return exact_expectation(model, 1, [&](Point k, std::span<double> out) { out[0] = g(k); })[0];
}

std::vector<double> shell_partial_sum(const ModelSpec& model, std::size_t out_dim, const VectorFunction& g,
                                      std::int64_t last_shell) {
  const Pmf pmf(model);
  std::vector<double> acc(out_dim, 0.0), gv(out_dim);
  for (std::int64_t s = 0; s <= last_shell; ++s) {
    for_each_in_shell(model.support, s, [&](Point k) {
      const double p = std::exp(pmf.log_unchecked(k));
      if (p == 0.0) return;
      std::fill(gv.begin(), gv.end(), 0.0);
      g(k, gv);
      for (std::size_t j = 0; j < out_dim; ++j) acc[j] += p * gv[j];
    });
  }
  return acc;
}

}  // namespace steindisc
