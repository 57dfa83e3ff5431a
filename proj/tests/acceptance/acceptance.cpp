// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli_app.hpp"
#include "steindisc/baselines.hpp"
#include "steindisc/harness.hpp"
#include "steindisc/models.hpp"
#include "steindisc/stein.hpp"
#include "steindisc/truncation.hpp"

using namespace steindisc;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const harness::ReportRow& row_for(const std::vector<harness::ReportRow>& rows, const std::string& method) {
  for (const auto& r : rows)
    if (r.method == method) return r;
  throw std::runtime_error("no report row for " + method);
}

bool within(double v, double centre, double half_width) { return std::abs(v - centre) <= half_width; }

bool within_rel(double v, double centre, double rel) { return std::abs(v - centre) <= rel * std::abs(centre); }

// Series sum of g(k) p(k) for X ~ LG(p).
double lg_series(double p, const std::function<double(double)>& g) {
  const double norm = -1.0 / std::log1p(-p);
  double acc = 0.0, pk = p;
  for (int k = 1; k < 200000; ++k) {
    acc += g(k) * norm * pk / k;
    pk *= p;
    if (pk < 1e-300) break;
  }
  return acc;
}

double lg_moment_root(double xbar) {
  double lo = 1e-15, hi = 1.0 - 1e-15;
  auto mean = [](double p) { return -p / ((1.0 - p) * std::log1p(-p)); };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mean(mid) < xbar ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

bool finite_support(const ModelSpec& m) {
  for (std::size_t i = 0; i < m.dim(); ++i)
    if (!m.support.upper(i).is_finite()) return false;
  return true;
}

std::vector<ModelSpec> identity_catalog() {
  return {
      models::poisson(0.5),
      models::poisson(4.0),
      models::poisson(20.0),
      models::binomial(10, 0.3),
      models::binomial(40, 0.5),
      models::binomial(100, 0.9),
      models::yule_simon(2.0),
      models::yule_simon(3.0),
      models::yule_simon(5.0),
      models::beta_neg_binomial(10.0, 10.0, 10.0),
      models::beta_neg_binomial(7.0, 5.0, 6.0),
      models::beta_neg_binomial(15.0, 14.0, 8.0),
      models::logarithmic(0.1),
      models::logarithmic(0.5),
      models::logarithmic(0.9),
      models::trunc_poisson(2.0, 2, Bound::finite(40)),
      models::trunc_poisson(0.1, 2, Bound::finite(10)),
      models::trunc_poisson(5.0, 1, Bound::plus_infinity()),
      models::trunc_binomial(50, 0.5, 25, 35),
      models::trunc_binomial(10, 0.3, 2, 7),
      models::trunc_binomial(30, 0.8, 10, 28),
      models::neg_multinomial(3.0, {0.2, 0.3}),
      models::neg_multinomial(1.0, {0.1, 0.1, 0.1}),
      models::neg_multinomial(5.0, {0.4}),
      models::trunc_neg_multinomial(5.0, {0.2, 0.3}, {1, 1}, {9, 9}),
      models::trunc_neg_multinomial(2.0, {0.1, 0.2, 0.3}, {0, 0, 0}, {6, 6, 6}),
      models::trunc_neg_multinomial(1.0, {0.5}, {1}, {20}),
      models::dirichlet_neg_multinomial(2.0, 12.0, {1.0, 2.0, 3.0}),
      models::dirichlet_neg_multinomial(10.0, 15.0, {1.0, 1.0, 1.0}),
      models::dirichlet_neg_multinomial(3.0, 20.0, {2.0, 1.0, 1.0}),
  };
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  double worst_infinite = 0.0, worst_finite = 0.0;
  std::size_t checked = 0;
  for (const auto& m : identity_catalog()) {
    const bool finite = finite_support(m);
    for (const auto& f : stein::default_test_functions(m.frame())) {
      for (double r : stein::check_stein_identity(m, f)) {
        double& worst = finite ? worst_finite : worst_infinite;
        worst = std::max(worst, std::abs(r));
      }
    }
    ++checked;
  }
  const double secs = seconds_since(t0);
  return {worst_finite < 1e-12 && worst_infinite < 1e-8 && secs < 30.0,
          std::to_string(checked) + " settings, max residual finite " + fmt("%.2e", worst_finite) + ", infinite " +
              fmt("%.2e", worst_infinite) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome criterion2() {
  std::mt19937_64 gen(20240602);
  const ModelFrame pois = models::poisson(1.0).frame();
  const std::vector<TestFunction> one{stein::make_test_function("one", pois)};
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double lambda = std::uniform_real_distribution<double>(0.2, 30.0)(gen);
    const auto n = std::uniform_int_distribution<std::size_t>(2, 500)(gen);
    const IntMatrix x = sample(models::poisson(lambda), n, gen());
    double s = 0.0;
    for (auto v : x.data()) s += static_cast<double>(v);
    const double mean = s / static_cast<double>(n);
    const auto r = stein::stein_estimate(pois, x, one);
    if (mean == 0.0) {
      if (r.eligible()) return {false, "Poisson all-zero sample gave an estimate"};
      continue;
    }
    if (!r.eligible()) return {false, "Poisson estimate not eligible"};
    worst = std::max(worst, std::abs(r.value->at(0) - mean) / mean);
  }
  for (int i = 0; i < 1000; ++i) {
    const auto m = std::uniform_int_distribution<std::int64_t>(1, 200)(gen);
    const double p = std::uniform_real_distribution<double>(0.02, 0.98)(gen);
    const auto n = std::uniform_int_distribution<std::size_t>(2, 500)(gen);
    const ModelSpec model = models::binomial(m, p);
    const IntMatrix x = sample(model, n, gen());
    double s = 0.0;
    for (auto v : x.data()) s += static_cast<double>(v);
    const double target = s / static_cast<double>(n) / static_cast<double>(m);
    const auto r = stein::stein_estimate(model.frame(), x);
    if (target == 0.0 || target == 1.0) continue;
    if (!r.eligible()) return {false, "binomial estimate not eligible"};
    worst = std::max(worst, std::abs(r.value->at(0) - target) / target);
  }
  return {worst < 1e-12, "max relative deviation " + fmt("%.2e", worst)};
}

Outcome criterion3() {
  const auto t0 = Clock::now();
  const auto config = harness::read_config(std::string(STEINDISC_CONFIG_DIR) + "/lg_table.json");
  const auto rows = harness::run_experiment(config);
  const auto& st = row_for(rows, "stein");
  const auto& ml = row_for(rows, "mle");
  const double secs = seconds_since(t0);
  const bool ok = within(st.bias, -0.011, 0.004) && within_rel(st.mse, 6.39e-3, 0.15) &&
                  within(ml.bias, -0.011, 0.004) && within_rel(ml.mse, 6.38e-3, 0.15) && secs < 60.0;
  return {ok, "stein bias " + fmt("%.4f", st.bias) + " mse " + fmt("%.3e", st.mse) + "; mle bias " +
                  fmt("%.4f", ml.bias) + " mse " + fmt("%.3e", ml.mse) + "; " + fmt("%.1f", secs) + " s"};
}

Outcome criterion4() {
  const auto t0 = Clock::now();
  const auto config = harness::read_config(std::string(STEINDISC_CONFIG_DIR) + "/ys_table.json");
  const auto rows = harness::run_experiment(config);
  const auto& st = row_for(rows, "stein[log]");
  const auto& ml = row_for(rows, "mle");
  const auto& sm = row_for(rows, "sm");
  const auto& md = row_for(rows, "md");
  const double secs = seconds_since(t0);
  const bool ok = within(st.bias, 0.036, 0.015) && within_rel(st.mse, 0.039, 0.20) && st.ne_percent == 0.0 &&
                  within(ml.bias, 0.038, 0.015) && within_rel(ml.mse, 0.04, 0.20) && sm.reps_used > 0 &&
                  within(sm.bias, 0.069, 0.05) && md.reps_used > 0 && within(md.bias, 0.06, 0.05) && secs < 300.0;
  return {ok, "stein bias " + fmt("%.4f", st.bias) + " mse " + fmt("%.4f", st.mse) + " ne " +
                  fmt("%.1f", st.ne_percent) + "%; mle bias " + fmt("%.4f", ml.bias) + " mse " +
                  fmt("%.4f", ml.mse) + "; sm bias " + fmt("%.4f", sm.bias) + " ne " + fmt("%.1f", sm.ne_percent) +
                  "%; md bias " + fmt("%.4f", md.bias) + " ne " + fmt("%.1f", md.ne_percent) + "%; " +
                  fmt("%.1f", secs) + " s"};
}

Outcome criterion5() {
  std::mt19937_64 gen(20240605);
  double worst_eq = 0.0, worst_oracle = 0.0;
  int used = 0;
  while (used < 500) {
    const double p = std::uniform_real_distribution<double>(0.02, 0.98)(gen);
    const ModelSpec m = models::logarithmic(p);
    const IntMatrix x = sample(m, 50, gen());
    double s = 0.0;
    for (auto v : x.data()) s += static_cast<double>(v);
    const double xbar = s / 50.0;
    if (xbar <= 1.0) continue;
    const double ph = baselines::logarithmic_mle(xbar);
    worst_eq = std::max(worst_eq, std::abs(-ph / ((1.0 - ph) * std::log1p(-ph)) - xbar));
    worst_oracle = std::max(worst_oracle, std::abs(ph - lg_moment_root(xbar)));
    ++used;
  }
  return {worst_eq < 1e-8 && worst_oracle < 1e-8,
          "500 samples, moment equation " + fmt("%.2e", worst_eq) + ", bisection " + fmt("%.2e", worst_oracle)};
}

Outcome criterion6() {
  const auto t0 = Clock::now();
  const auto grid = harness::parse_grid("0.01:0.99:0.01");
  const auto curve = harness::efficiency_curve(grid);
  double min_ratio = HUGE_VAL, max_ratio = 0.0, max_step = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    min_ratio = std::min(min_ratio, curve[i].ratio);
    max_ratio = std::max(max_ratio, curve[i].ratio);
    if (i > 0) max_step = std::max(max_step, std::abs(curve[i].ratio - curve[i - 1].ratio));
  }
  double worst_oracle = 0.0;
  std::string points;
  for (std::size_t idx : {9u, 49u, 89u}) {
    const double p = curve[idx].p;
    const double num = lg_series(p, [p](double k) {
      const double v = p * k * k / (k + 1) - k + 1;
      return v * v;
    });
    const double den = lg_series(p, [](double k) { return k * k / (k + 1); });
    const double m1 = lg_series(p, [](double k) { return k - 1; });
    const double m2 = lg_series(p, [](double k) { return (k - 1) * (k - 1); });
    const double oracle = (num / (den * den)) / (p * p / (m2 - m1 * m1));
    worst_oracle = std::max(worst_oracle, std::abs(curve[idx].ratio - oracle) / oracle);
    points += " p=" + fmt("%.2f", p) + ":" + fmt("%.5f", curve[idx].ratio);
  }
  const double secs = seconds_since(t0);
  const bool ok = curve.size() == 99 && min_ratio >= 1.0 - 1e-9 && max_step < 0.05 && worst_oracle < 1e-8 &&
                  secs < 10.0;
  return {ok, "min ratio " + fmt("%.9f", min_ratio) + ", max ratio " + fmt("%.5f", max_ratio) + ", max step " +
                  fmt("%.2e", max_step) + ", oracle deviation " + fmt("%.1e", worst_oracle) + ";" + points + "; " +
                  fmt("%.2f", secs) + " s"};
}

Outcome criterion7() {
  const std::vector<ModelSpec> catalog{
      models::poisson(2.5),
      models::binomial(15, 0.35),
      models::yule_simon(1.5),
      models::beta_neg_binomial(6.0, 3.0, 4.0),
      models::logarithmic(0.6),
      models::trunc_poisson(2.0, 2, Bound::finite(40)),
      models::trunc_binomial(50, 0.5, 25, 35),
      models::neg_multinomial(3.0, {0.2, 0.3}),
      models::trunc_neg_multinomial(5.0, {0.2, 0.3}, {1, 1}, {9, 9}),
      models::dirichlet_neg_multinomial(10.0, 3.0, {1.0, 2.0, 1.5}),
  };
  double worst = 0.0;
  std::size_t compared = 0;
  for (const auto& m : catalog) {
    const auto fs = stein::default_test_functions(m.frame());
    const stein::LinearSteinForm form(m.frame(), fs);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const IntMatrix x = sample(m, 50, seed);
      const auto closed = stein::stein_estimate(m.frame(), x, fs);
      const auto generic = stein::solve_linear_stein_system(form, x);
      if (closed.eligible() != generic.eligible()) return {false, "eligibility differs for " + std::string(family_name(m.family))};
      if (!closed.eligible()) continue;
      for (std::size_t j = 0; j < m.theta.size(); ++j) {
        worst = std::max(worst, std::abs(closed.value->at(j) - generic.value->at(j)) / std::abs(closed.value->at(j)));
      }
      ++compared;
    }
  }
  // DNM: A_n α = b_n assembled entry by entry and solved by Gaussian elimination.
  const double r = 10.0, alpha0 = 3.0;
  const ModelSpec dnm = models::dirichlet_neg_multinomial(r, alpha0, {1.0, 2.0, 1.5});
  const TestFunction f = stein::make_test_function("inv_sum_interior", dnm.frame());
  double worst_dnm = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const IntMatrix x = sample(dnm, 50, 5000 + seed);
    const std::size_t d = 3, n = x.rows();
    std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
    std::vector<double> b(d, 0.0);
    for (std::size_t row = 0; row < n; ++row) {
      std::vector<std::int64_t> k(x.row(row).begin(), x.row(row).end());
      double s = 0.0;
      for (auto v : k) s += static_cast<double>(v);
      const double fk = f(k);
      for (std::size_t i = 0; i < d; ++i) {
        auto shifted = k;
        ++shifted[i];
        const double fs = f(shifted);
        const double xi = static_cast<double>(k[i]);
        a[i][i] += (s * fs + r * fs) / n;
        for (std::size_t j = 0; j < d; ++j) a[i][j] -= xi * fk / n;
        b[i] += (s * xi * fk + (r + alpha0 - 1.0) * xi * fk - s * xi * fs - r * xi * fs) / n;
      }
    }
    const auto est = stein::stein_estimate(dnm.frame(), x);
    if (!est.eligible()) continue;
    const auto oracle = dense_solve(a, b);
    for (std::size_t i = 0; i < d; ++i) {
      worst_dnm = std::max(worst_dnm, std::abs(est.value->at(i) - oracle[i]) / std::abs(oracle[i]));
    }
  }
  return {worst < 1e-10 && worst_dnm < 1e-10,
          std::to_string(compared) + " eligible samples, max relative deviation " + fmt("%.2e", worst) +
              "; dnm dense solve " + fmt("%.2e", worst_dnm)};
}

Outcome criterion8() {
  const auto t0 = Clock::now();
  const ModelSpec m = models::trunc_poisson(2.0, 2, Bound::finite(40));
  const auto study = truncation::variance_invariance_study(m, 2000, 2000, 20240608);
  const double known = study.known(0, 0), est = study.estimated(0, 0);
  const double rel = std::abs(est - known) / known;
  const double secs = seconds_since(t0);
  return {rel < 0.05 && secs < 120.0,
          "known " + fmt("%.4f", known) + ", estimated " + fmt("%.4f", est) + ", relative difference " +
              fmt("%.4f", rel) + ", reps used " + std::to_string(study.reps_used) + ", exact-domain reps " +
              std::to_string(study.exact_domain_reps) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome criterion9() {
  const ModelSpec m = models::trunc_poisson(0.1, 2, Bound::finite(10));
  const int seeds = 5000, n = 50;
  int misses = 0;
  for (int s = 0; s < seeds; ++s) {
    const auto est = truncation::estimate_domain(sample(m, n, derive_seed(20240609, s)));
    if (est.per_axis_min[0] != 2) ++misses;
  }
  const double p2 = std::exp(log_pmf(m, std::vector<std::int64_t>{2}));
  const double q = std::pow(1.0 - p2, n);
  const double se = std::sqrt(q * (1.0 - q) / seeds);
  const double rate = static_cast<double>(misses) / seeds;
  return {std::abs(rate - q) <= 3.0 * se,
          "empirical " + fmt("%.4g", rate) + ", predicted " + fmt("%.4g", q) + ", 3 se " + fmt("%.3g", 3.0 * se)};
}

Outcome criterion10() {
  harness::ExperimentConfig c;
  c.model = models::dirichlet_neg_multinomial(5.0, 0.5, {2.0, 2.0, 2.0});
  c.n = 200;
  c.reps = 200;
  c.seed = 20240610;
  c.record_timing = false;
  c.methods = {{harness::MethodKind::Moment, {}, baselines::MdReading::AtLeast},
               {harness::MethodKind::Stein, {}, baselines::MdReading::AtLeast}};
  const auto rows = harness::run_experiment(c);
  double moment_ne = -1.0, stein_ne = -1.0;
  for (const auto& r : rows) {
    if (r.method == "moment") moment_ne = r.ne_percent;
    if (r.method == "stein") stein_ne = r.ne_percent;
  }
  return {moment_ne == 100.0 && stein_ne == 0.0,
          "moment NE " + fmt("%.1f", moment_ne) + "%, stein NE " + fmt("%.1f", stein_ne) + "%"};
}

Outcome criterion11() {
  const std::string config = std::string(STEINDISC_CONFIG_DIR) + "/ys_table.json";
  std::ostringstream one, eight, err;
  const int c1 = cli::run({"simulate", "--config", config, "--reps", "400", "--workers", "1"}, one, err);
  const int c8 = cli::run({"simulate", "--config", config, "--reps", "400", "--workers", "8"}, eight, err);
  const bool same = c1 == 0 && c8 == 0 && one.str() == eight.str() && !one.str().empty();
  return {same, std::to_string(one.str().size()) + " bytes, " + (same ? "identical" : "different: " + err.str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"stein identity suite", criterion1},
      {"reduction identities", criterion2},
      {"logarithmic table", criterion3},
      {"yule-simon table", criterion4},
      {"logarithmic mle closed form", criterion5},
      {"efficiency curve", criterion6},
      {"linear-system equivalence", criterion7},
      {"unknown-domain invariance", criterion8},
      {"domain-estimator failure rate", criterion9},
      {"ne bookkeeping", criterion10},
      {"determinism", criterion11},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %zu (%s): %s - %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
