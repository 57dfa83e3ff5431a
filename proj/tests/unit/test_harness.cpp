#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "steindisc/harness.hpp"
#include "steindisc/stein.hpp"

using namespace steindisc;
using namespace steindisc::harness;

namespace {

// Random valid model of a random family.
ModelSpec random_model(std::mt19937_64& gen) {
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); };
  auto i = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(gen); };
  auto simplex = [&](std::size_t d) {
    std::vector<double> p(d);
    double total = 0.0;
    for (auto& v : p) total += (v = u(0.1, 1.0));
    const double scale = u(0.2, 0.9) / total;
    for (auto& v : p) v *= scale;
    return p;
  };
  switch (i(0, 9)) {
    case 0: return models::poisson(u(0.1, 10.0));
    case 1: return models::binomial(i(1, 60), u(0.01, 0.99));
    case 2: return models::yule_simon(u(0.2, 6.0));
    case 3: return models::beta_neg_binomial(u(1.5, 20.0), u(0.5, 20.0), u(0.5, 20.0));
    case 4: return models::logarithmic(u(0.01, 0.99));
    case 5: {
      const std::int64_t a = i(0, 4);
      return models::trunc_poisson(u(0.5, 6.0), a, i(0, 1) == 0 ? Bound::plus_infinity() : Bound::finite(a + i(2, 30)));
    }
    case 6: {
      const std::int64_t m = i(10, 60), a = i(0, m / 2);
      return models::trunc_binomial(m, u(0.1, 0.9), a, i(a + 2, m));
    }
    case 7: return models::neg_multinomial(u(0.5, 10.0), simplex(static_cast<std::size_t>(i(1, 4))));
    case 8: {
      const auto d = static_cast<std::size_t>(i(1, 3));
      std::vector<std::int64_t> a(d), b(d);
      for (std::size_t k = 0; k < d; ++k) {
        a[k] = i(0, 3);
        b[k] = a[k] + i(2, 12);
      }
      return models::trunc_neg_multinomial(u(0.5, 10.0), simplex(d), a, b);
    }
    default: {
      std::vector<double> alpha(static_cast<std::size_t>(i(1, 4)));
      for (auto& v : alpha) v = u(0.2, 5.0);
      return models::dirichlet_neg_multinomial(u(0.5, 20.0), u(0.5, 20.0), alpha);
    }
  }
}

ExperimentConfig random_config(std::mt19937_64& gen) {
  auto coin = [&] { return std::uniform_int_distribution<int>(0, 1)(gen) == 1; };
  ExperimentConfig c;
  c.model = random_model(gen);
  const Family f = c.model.family;
  c.n = std::uniform_int_distribution<std::size_t>(1, 5000)(gen);
  c.reps = std::uniform_int_distribution<std::size_t>(1, 10000)(gen);
  c.seed = gen();
  c.record_timing = coin();
  if (is_truncated(f) && coin()) c.domain_mode = DomainMode::Estimated;
  if (coin()) c.ne_policy.bnb_truncated_mean = std::uniform_real_distribution<double>(1.0, 1e4)(gen);
  c.ne_policy.runtime_budget = std::uniform_real_distribution<double>(0.01, 100.0)(gen);
  c.methods.push_back({MethodKind::Stein, {}, baselines::MdReading::AtLeast});
  if (coin()) c.methods.push_back({MethodKind::Stein, stein::default_test_function_names(f), baselines::MdReading::AtLeast});
  c.methods.push_back({MethodKind::MLE, {}, baselines::MdReading::AtLeast});
  if (f == Family::DirichletNegMultinomial) c.methods.push_back({MethodKind::Moment, {}, baselines::MdReading::AtLeast});
  if (f == Family::YuleSimon) {
    c.methods.push_back({MethodKind::ScoreMatching, {}, baselines::MdReading::AtLeast});
    c.methods.push_back({MethodKind::MinimumDistance, {}, baselines::MdReading::AtLeast});
    c.methods.push_back({MethodKind::MinimumDistance, {}, baselines::MdReading::AsPrinted});
    c.methods.push_back({MethodKind::MinimumDistance, {}, baselines::MdReading::SquareInside});
  }
  std::shuffle(c.methods.begin(), c.methods.end(), gen);
  return c;
}

ExperimentConfig small_config(const ModelSpec& model, std::vector<MethodSpec> methods, std::size_t reps) {
  ExperimentConfig c;
  c.model = model;
  c.n = 50;
  c.reps = reps;
  c.methods = std::move(methods);
  c.seed = 42;
  c.record_timing = false;
  return c;
}

std::string report_text(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  write_report(rows, out);
  return out.str();
}

const MethodSpec kStein{MethodKind::Stein, {}, baselines::MdReading::AtLeast};
const MethodSpec kMle{MethodKind::MLE, {}, baselines::MdReading::AtLeast};

}  // namespace

TEST(Config, RoundTripRandomConfigs) {
  std::mt19937_64 gen(2024);
  for (int i = 0; i < 100; ++i) {
    const ExperimentConfig c = random_config(gen);
    ASSERT_NO_THROW(validate_config(c)) << config_to_json(c);
    const ExperimentConfig back = parse_config(config_to_json(c));
    EXPECT_EQ(back, c) << config_to_json(c);
  }
}

TEST(Config, BundledConfigsParse) {
  const ExperimentConfig ys = parse_config(R"({
    "family": "yulesimon", "params": {"rho": 1}, "n": 50, "reps": 2000,
    "methods": [{"kind": "mle"}, {"kind": "sm"}, {"kind": "md"}, {"kind": "stein", "test_functions": ["log"]}],
    "seed": 20240601, "record_timing": false})");
  EXPECT_EQ(ys.model.family, Family::YuleSimon);
  EXPECT_EQ(ys.methods.size(), 4u);
  EXPECT_EQ(method_label(ys.methods[3]), "stein[log]");
  EXPECT_EQ(method_label(ys.methods[2]), "md");
  EXPECT_FALSE(ys.record_timing);
}

TEST(Config, FixedValuesAndInfinity) {
  const ExperimentConfig c = parse_config(R"({
    "family": "truncpoisson", "params": {"lambda": 2}, "fixed": {"a": 2, "b": "inf"},
    "methods": ["stein", "mle"], "domain_mode": "estimated"})");
  EXPECT_FALSE(c.model.support.upper(0).is_finite());
  EXPECT_EQ(c.model.support.lower(0).value, 2);
  EXPECT_EQ(c.domain_mode, DomainMode::Estimated);
}

TEST(Config, MultiExperimentFile) {
  const auto cs = parse_configs(R"({"experiments": [
    {"family": "poisson", "params": {"lambda": 1}, "methods": ["stein"]},
    {"family": "logarithmic", "params": {"p": 0.5}, "methods": ["mle"]}]})");
  ASSERT_EQ(cs.size(), 2u);
  EXPECT_EQ(cs[1].model.family, Family::Logarithmic);
  EXPECT_THROW(parse_config(R"({"experiments": []})"), ParseError);
}

TEST(Config, UnknownFieldRejected) {
  try {
    parse_config(R"({"family": "poisson", "params": {"lambda": 1}, "methods": ["stein"], "bogus": 1})");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos) << e.what();
  }
  try {
    parse_config(R"({"family": "poisson", "params": {"lambda": 1}, "methods": [{"kind": "stein", "extra": 2}]})");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("methods"), std::string::npos) << e.what();
  }
}

TEST(Config, SyntaxErrorReportsLine) {
  try {
    parse_config("{\n  \"family\": \"poisson\",\n  \"n\": 50,,\n}");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, InvalidPairingsRejected) {
  const MethodSpec sm{MethodKind::ScoreMatching, {}, baselines::MdReading::AtLeast};
  const MethodSpec moment{MethodKind::Moment, {}, baselines::MdReading::AtLeast};
  EXPECT_THROW(validate_config(small_config(models::poisson(1.0), {sm}, 10)), UsageError);
  EXPECT_THROW(validate_config(small_config(models::yule_simon(1.0), {moment}, 10)), UsageError);
  EXPECT_THROW(validate_config(small_config(models::poisson(1.0), {}, 10)), UsageError);
  EXPECT_THROW(validate_config(small_config(models::poisson(1.0), {kStein}, 0)), UsageError);
  const MethodSpec two{MethodKind::Stein, {"identity", "one"}, baselines::MdReading::AtLeast};
  EXPECT_THROW(validate_config(small_config(models::poisson(1.0), {two}, 10)), UsageError);
  auto est = small_config(models::poisson(1.0), {kStein}, 10);
  est.domain_mode = DomainMode::Estimated;
  EXPECT_THROW(validate_config(est), UsageError);
  EXPECT_THROW(run_experiment(est, 1), UsageError);
}

TEST(Report, HeaderAndRowCount) {
  const auto c = small_config(models::dirichlet_neg_multinomial(10.0, 3.0, {1.0, 1.0, 1.0}),
                              {kStein, kMle, {MethodKind::Moment, {}, baselines::MdReading::AtLeast}}, 5);
  const auto rows = run_experiment(c, 1);
  EXPECT_EQ(rows.size(), 9u);
  const std::string text = report_text(rows);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "family,param,true_value,method,bias,mse,ne_percent,reps_used,wall_seconds");
  int count = 0;
  while (std::getline(in, line)) {
    ++count;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8) << line;
    EXPECT_EQ(line.substr(line.size() - 2), ",0") << line;
  }
  EXPECT_EQ(count, 9);
}

TEST(Report, FormatDoubleRoundTrips) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(HUGE_VAL), "inf");
  EXPECT_EQ(format_double(-HUGE_VAL), "-inf");
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(gen) * std::pow(10.0, std::uniform_int_distribution<int>(-20, 5)(gen));
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(Experiment, SingleRepBiasIsTheError) {
  const auto c = small_config(models::logarithmic(0.5), {kStein, kMle}, 1);
  std::vector<MethodOutcomes> outcomes;
  const auto rows = run_experiment(c, 1, &outcomes);
  ASSERT_EQ(rows.size(), 2u);
  for (std::size_t m = 0; m < 2; ++m) {
    ASSERT_TRUE(outcomes[m].estimates[0].eligible());
    const double err = outcomes[m].estimates[0].value->at(0) - 0.5;
    EXPECT_EQ(rows[m].bias, err);
    EXPECT_EQ(rows[m].mse, err * err);
    EXPECT_EQ(rows[m].reps_used, 1u);
    EXPECT_EQ(rows[m].ne_percent, 0.0);
  }
}

TEST(Experiment, MseAtLeastSquaredBias) {
  const auto c = small_config(models::neg_multinomial(3.0, {0.2, 0.3}), {kStein, kMle}, 200);
  for (const auto& row : run_experiment(c, 1)) {
    EXPECT_GE(row.mse, row.bias * row.bias * (1.0 - 1e-12)) << row.method << " " << row.param;
    EXPECT_EQ(row.reps_used, 200u);
  }
}

TEST(Experiment, DeterministicAcrossWorkerCounts) {
  const MethodSpec md{MethodKind::MinimumDistance, {}, baselines::MdReading::AtLeast};
  const auto c = small_config(models::yule_simon(1.0), {kStein, kMle, md}, 64);
  const std::string one = report_text(run_experiment(c, 1));
  EXPECT_EQ(report_text(run_experiment(c, 8)), one);
  EXPECT_EQ(report_text(run_experiment(c, 3)), one);
}

TEST(Experiment, BnbOutlierPolicy) {
  auto c = small_config(models::beta_neg_binomial(10.0, 10.0, 10.0), {kStein}, 20);
  c.ne_policy.bnb_truncated_mean = 1e-9;
  const auto rows = run_experiment(c, 1);
  for (const auto& row : rows) {
    EXPECT_EQ(row.ne_percent, 100.0);
    EXPECT_EQ(row.reps_used, 0u);
    EXPECT_TRUE(std::isnan(row.bias));
  }
  std::vector<MethodOutcomes> outcomes;
  run_experiment(c, 1, &outcomes);
  EXPECT_EQ(outcomes[0].estimates[0].ne_reason, NeReason::OutlierTruncated);

  // The threshold applies to the beta negative binomial family only.
  auto other = small_config(models::poisson(2.0), {kStein}, 20);
  other.ne_policy.bnb_truncated_mean = 1e-9;
  EXPECT_EQ(run_experiment(other, 1)[0].reps_used, 20u);
}

TEST(Experiment, EstimatedDomainMode) {
  auto c = small_config(models::trunc_poisson(2.0, 2, Bound::finite(40)), {kStein, kMle}, 50);
  c.domain_mode = DomainMode::Estimated;
  c.n = 500;
  for (const auto& row : run_experiment(c, 1)) {
    EXPECT_EQ(row.reps_used, 50u) << row.method;
    EXPECT_LT(std::abs(row.bias), 0.1) << row.method;
  }
}

TEST(Efficiency, GridAndCurve) {
  const auto grid = parse_grid("0.01:0.99:0.01");
  ASSERT_EQ(grid.size(), 99u);
  EXPECT_EQ(grid.front(), 0.01);
  EXPECT_EQ(grid.back(), 0.99);
  EXPECT_EQ(grid[49], 0.5);
  EXPECT_THROW(parse_grid("0.1:0.2"), UsageError);
  EXPECT_THROW(parse_grid("0.5:0.1:0.1"), UsageError);
  EXPECT_THROW(parse_grid("a:b:c"), UsageError);

  const auto curve = efficiency_curve(grid, 1);
  ASSERT_EQ(curve.size(), 99u);
  for (const auto& pt : curve) {
    EXPECT_GE(pt.ratio, 1.0 - 1e-9) << pt.p;
    EXPECT_EQ(pt.ratio, pt.v_stein / pt.v_ml);
  }
  std::ostringstream out;
  write_efficiency(curve, out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "p,v_stein,v_ml,ratio");
}

TEST(Models, DescribeAndBuildRoundTrip) {
  std::mt19937_64 gen(77);
  for (int i = 0; i < 100; ++i) {
    const ModelSpec m = random_model(gen);
    EXPECT_EQ(build_model(describe(m)), m) << family_name(m.family);
  }
  ModelDescription bad;
  bad.family = Family::Poisson;
  bad.params = {{"mu", {1.0}}};
  EXPECT_THROW(build_model(bad), UsageError);
  bad.params = {{"lambda", {-1.0}}};
  EXPECT_THROW(build_model(bad), InvalidModel);
}
