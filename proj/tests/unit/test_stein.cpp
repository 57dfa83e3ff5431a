#include <gtest/gtest.h>

#include <cmath>

#include "steindisc/models.hpp"
#include "steindisc/stein.hpp"

using namespace steindisc;

namespace {

std::vector<std::int64_t> pt(std::initializer_list<std::int64_t> v) { return v; }

IntMatrix column(std::initializer_list<std::int64_t> v) { return IntMatrix::column(std::vector<std::int64_t>(v)); }

TestFunction fn(std::string_view name, const ModelSpec& m) { return stein::make_test_function(name, m.frame()); }

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(SteinOperator, HandEvaluations) {
  const ModelSpec pois = models::poisson(2.0);
  EXPECT_NEAR(stein::stein_operator(pois, fn("one", pois), pt({3}))[0], -1.0, 1e-15);

  const ModelSpec ys = models::yule_simon(1.0);
  EXPECT_NEAR(stein::stein_operator(ys, fn("log", ys), pt({1}))[0], std::log(2.0), 1e-15);

  const ModelSpec nm = models::neg_multinomial(1.0, {0.2, 0.3});
  const auto v = stein::stein_operator(nm, TestFunction("one", [](Point) { return 1.0; }), pt({1, 1}));
  EXPECT_NEAR(v[0], -0.4, 1e-15);
  EXPECT_NEAR(v[1], -0.1, 1e-15);
}

TEST(SteinOperator, OutsideSupportIsZero) {
  // f(b + 1) counts as 0 for the truncated binomial at k = b.
  const ModelSpec tb = models::trunc_binomial(10, 0.3, 2, 7);
  const TestFunction id("identity", [](Point k) { return static_cast<double>(k[0]); });
  const double p = 0.3;
  const double expected = (10.0 - 7.0) / 8.0 * 0.0 - (1.0 - p) / p * 7.0;
  EXPECT_NEAR(stein::stein_operator(tb, id, pt({7}))[0], expected, 1e-13);
}

TEST(TestFunctions, BoundaryMasks) {
  const ModelFrame tp = models::trunc_poisson(2.0, 2, Bound::finite(10)).frame();
  const TestFunction f = stein::make_test_function("masked_identity", tp);
  EXPECT_EQ(f(pt({2})), 0.0);
  EXPECT_EQ(f(pt({10})), 0.0);
  EXPECT_EQ(f(pt({5})), 5.0);
  EXPECT_TRUE(f.boundary_vanishing());

  const ModelFrame dnm = models::dirichlet_neg_multinomial(5.0, 2.0, {2.0, 2.0, 2.0}).frame();
  const TestFunction g = stein::make_test_function("inv_sum_interior", dnm);
  EXPECT_EQ(g(pt({0, 1, 2})), 0.0);
  EXPECT_NEAR(g(pt({1, 1, 2})), 0.25, 1e-15);

  const ModelFrame tnm = models::trunc_neg_multinomial(1.0, {0.2, 0.3}, {0, 0}, {5, 5}).frame();
  const TestFunction h = stein::make_test_function("sum_interior", tnm);
  EXPECT_EQ(h(pt({0, 3})), 0.0);
  EXPECT_EQ(h(pt({2, 3})), 5.0);
  EXPECT_EQ(h(pt({2, 5})), 0.0);
}

TEST(TestFunctions, BoundaryVanishingOnFiniteBoxes) {
  const ModelFrame tnm = models::trunc_neg_multinomial(2.0, {0.1, 0.2}, {1, 2}, {6, 7}).frame();
  const TestFunction h = stein::make_test_function("sum_interior", tnm);
  for (std::int64_t a = 1; a <= 6; ++a) {
    for (std::int64_t b = 2; b <= 7; ++b) {
      if (a == 1 || a == 6 || b == 2 || b == 7) {
        EXPECT_EQ(h(pt({a, b})), 0.0);
      }
    }
  }
}

TEST(TestFunctions, DefaultsAndErrors) {
  EXPECT_EQ(stein::default_test_function_names(Family::YuleSimon), std::vector<std::string>{"log"});
  EXPECT_EQ(stein::default_test_function_names(Family::BetaNegBinomial),
            (std::vector<std::string>{"identity", "one"}));
  EXPECT_EQ(stein::test_function_count(Family::BetaNegBinomial), 2u);
  EXPECT_EQ(stein::test_function_count(Family::DirichletNegMultinomial), 1u);
  EXPECT_THROW(stein::make_test_function("cubic", models::poisson(1.0).frame()), UsageError);
}

TEST(SteinIdentity, FiniteAndInfiniteSupports) {
  const ModelSpec tb = models::trunc_binomial(10, 0.3, 2, 7);
  EXPECT_LT(max_abs(stein::check_stein_identity(tb, fn("masked_identity", tb))), 1e-12);

  const ModelSpec pois = models::poisson(4.0);
  EXPECT_LT(max_abs(stein::check_stein_identity(pois, fn("identity", pois))), 1e-8);

  const ModelSpec bin = models::binomial(12, 0.4);
  EXPECT_LT(max_abs(stein::check_stein_identity(bin, fn("identity", bin))), 1e-12);

  const ModelSpec lg = models::logarithmic(0.6);
  EXPECT_LT(max_abs(stein::check_stein_identity(lg, fn("k_minus_1", lg))), 1e-8);

  const ModelSpec tp = models::trunc_poisson(0.9, 6, Bound::plus_infinity());
  EXPECT_LT(max_abs(stein::check_stein_identity(tp, fn("masked_identity", tp))), 1e-8);

  const ModelSpec nm = models::neg_multinomial(3.0, {0.2, 0.3});
  EXPECT_LT(max_abs(stein::check_stein_identity(nm, fn("sum_interior", nm))), 1e-8);
}

TEST(SteinIdentity, NonVanishingFunctionFailsOnTruncatedSupport) {
  // The plain identity does not vanish at the truncation bounds, so the identity breaks.
  const ModelSpec tb = models::trunc_binomial(10, 0.3, 2, 7);
  const TestFunction id("identity", [](Point k) { return static_cast<double>(k[0]); });
  EXPECT_GT(max_abs(stein::check_stein_identity(tb, id)), 1e-3);
}

TEST(SteinIdentity, TelescopingFluxForHeavyTails) {
  // DNM(5, 2, (2,2,2)) has a tail too heavy for direct summation; the partial Stein sum
  // over shells 0..N must equal the boundary flux through shell N + 1.
  const ModelSpec dnm = models::dirichlet_neg_multinomial(5.0, 2.0, {2.0, 2.0, 2.0});
  const TestFunction f = fn("inv_sum_interior", dnm);
  const auto op = [&](Point k, std::span<double> out) { stein::stein_operator(dnm, f, k, out); };
  for (std::int64_t n : {5, 20, 60}) {
    const auto partial = shell_partial_sum(dnm, 3, op, n);
    const auto flux = stein::boundary_flux(dnm, f, n + 1);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(partial[i], flux[i], 1e-12 * std::max(1.0, std::abs(flux[i]))) << n;
  }
  // The flux shrinks as the shell moves out.
  EXPECT_LT(max_abs(stein::boundary_flux(dnm, f, 400)), max_abs(stein::boundary_flux(dnm, f, 40)));
}

TEST(SteinEstimate, ReductionFixtures) {
  const ModelFrame pois = models::poisson(1.0).frame();
  const std::vector<TestFunction> one{stein::make_test_function("one", pois)};
  EXPECT_NEAR(stein::stein_estimate(pois, column({2, 3, 4}), one).value->at(0), 3.0, 1e-15);
  const std::vector<TestFunction> id{stein::make_test_function("identity", pois)};
  EXPECT_NEAR(stein::stein_estimate(pois, column({0, 1, 2}), id).value->at(0), 5.0 / 6.0, 1e-15);

  const ModelFrame bin = models::binomial(4, 0.5).frame();
  EXPECT_NEAR(stein::stein_estimate(bin, column({1, 2})).value->at(0), 0.375, 1e-15);

  const ModelFrame ys = models::yule_simon(1.0).frame();
  EXPECT_NEAR(stein::stein_estimate(ys, column({1, 1, 2})).value->at(0), 2.0 * std::log(3.0) / std::log(2.0),
              1e-12);
}

TEST(SteinEstimate, LogarithmicConsistency) {
  const ModelSpec lg = models::logarithmic(0.5);
  const IntMatrix x = sample(lg, 1000000, 2024);
  const auto r = stein::stein_estimate(lg.frame(), x);
  ASSERT_TRUE(r.eligible());
  EXPECT_NEAR(r.value->at(0), 0.5, 0.005);
}

TEST(SteinEstimate, MultivariateConsistency) {
  const ModelSpec nm = models::neg_multinomial(3.0, {0.2, 0.3});
  const auto r = stein::stein_estimate(nm.frame(), sample(nm, 200000, 8));
  ASSERT_TRUE(r.eligible());
  EXPECT_NEAR(r.value->at(0), 0.2, 0.01);
  EXPECT_NEAR(r.value->at(1), 0.3, 0.01);

  const ModelSpec dnm = models::dirichlet_neg_multinomial(10.0, 3.0, {1.0, 1.0, 1.0});
  const auto d = stein::stein_estimate(dnm.frame(), sample(dnm, 200000, 8));
  ASSERT_TRUE(d.eligible());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(d.value->at(i), 1.0, 0.05);
}

TEST(SteinEstimate, NonEligibleOutcomes) {
  const ModelFrame ys = models::yule_simon(1.0).frame();
  // log 1 = 0 everywhere: the system is identically zero.
  const auto singular = stein::stein_estimate(ys, column({1, 1, 1}));
  EXPECT_FALSE(singular.eligible());
  EXPECT_EQ(singular.ne_reason, NeReason::SingularSystem);

  const ModelFrame pois = models::poisson(1.0).frame();
  const std::vector<TestFunction> id{stein::make_test_function("identity", pois)};
  const auto zero = stein::stein_estimate(pois, column({0, 0, 0}), id);
  EXPECT_EQ(zero.ne_reason, NeReason::NegativeParameter);

  const ModelFrame bin = models::binomial(4, 0.5).frame();
  EXPECT_EQ(stein::stein_estimate(bin, column({4, 4})).ne_reason, NeReason::OutOfDomain);
}

TEST(SteinEstimate, InputErrors) {
  const ModelFrame bin = models::binomial(4, 0.5).frame();
  EXPECT_THROW(stein::stein_estimate(bin, column({1, 5})), DomainError);
  EXPECT_THROW(stein::stein_estimate(bin, IntMatrix()), UsageError);
  const ModelFrame nm = models::neg_multinomial(1.0, {0.2, 0.3}).frame();
  EXPECT_THROW(stein::stein_estimate(nm, column({1, 2})), UsageError);
}

TEST(CheckConstraints, Classification) {
  const ModelFrame pois = models::poisson(1.0).frame();
  EXPECT_EQ(stein::check_constraints(pois, {-1.0}).ne_reason, NeReason::NegativeParameter);
  EXPECT_EQ(stein::check_constraints(pois, {std::nan("")}).ne_reason, NeReason::SingularSystem);
  EXPECT_TRUE(stein::check_constraints(pois, {2.0}).eligible());
  const ModelFrame nm = models::neg_multinomial(1.0, {0.2, 0.3}).frame();
  EXPECT_EQ(stein::check_constraints(nm, {0.6, 0.5}).ne_reason, NeReason::OutOfDomain);
}

TEST(NeReasonNames, SnakeCase) {
  EXPECT_EQ(ne_reason_name(NeReason::SingularSystem), "singular_system");
  EXPECT_EQ(ne_reason_name(NeReason::OutlierTruncated), "outlier_truncated");
}
