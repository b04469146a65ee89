#include <cmath>

#include <gtest/gtest.h>

#include "falconn/error.hpp"
#include "falconn/stl/parser.hpp"
#include "falconn/stl/robustness.hpp"
#include "support/stl_oracle.hpp"

namespace falconn::stl {
namespace {

SampledSignal ramp123() {
  return SampledSignal({0.0, 1.0, 2.0}, {{"y", {1.0, 2.0, 3.0}}});
}

TEST(IntervalIndices, ExactAlignment) {
  const std::vector<double> t{0, 1, 2, 3};
  const IndexRange r = interval_indices(t, 0.0, 1.0, 2.0);
  EXPECT_EQ(r.first, 1u);
  EXPECT_EQ(r.last, 2u);
}

TEST(IntervalIndices, PointInterval) {
  const std::vector<double> t{0, 0.5, 1.0};
  const IndexRange r = interval_indices(t, 0.0, 0.0, 0.0);
  EXPECT_EQ(r.first, 0u);
  EXPECT_EQ(r.last, 0u);
}

TEST(IntervalIndices, HalfStepTolerance) {
  const std::vector<double> t{0, 0.2, 0.4};
  const IndexRange r = interval_indices(t, 0.2, 0.1, 0.3);
  EXPECT_EQ(r.first, 1u);
  EXPECT_EQ(r.last, 2u);
}

TEST(IntervalIndices, EmptyRangeThrows) {
  const std::vector<double> t{0, 1, 2};
  EXPECT_THROW(interval_indices(t, 0.0, 5.0, 6.0), HorizonError);
}

TEST(RobustnessExact, ConstantSignal) {
  const SampledSignal s({0, 1, 2, 3}, {{"y", {1, 1, 1, 1}}});
  const Formula f = parse_formula("y > 0");
  for (std::size_t t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(robustness_exact(f, s, t), 1.0);
}

TEST(RobustnessExact, GloballyAndFinallyOnRamp) {
  EXPECT_DOUBLE_EQ(robustness_exact(parse_formula("G[0,2](y < 2.5)"), ramp123(), 0), -0.5);
  EXPECT_DOUBLE_EQ(robustness_exact(parse_formula("F[0,2](y > 2.5)"), ramp123(), 0), 0.5);
}

TEST(RobustnessExact, Errors) {
  EXPECT_THROW(robustness_exact(parse_formula("G[0,3](y > 0)"), ramp123(), 0), HorizonError);
  EXPECT_THROW(robustness_exact(parse_formula("G[0,1](y > 0)"), ramp123(), 2), HorizonError);
  EXPECT_THROW(robustness_exact(parse_formula("z > 0"), ramp123(), 0), UnknownChannelError);
}

TEST(RobustnessExact, UntilUsesPrefixFromLowerBound) {
  // rhs first holds at t'=2; lhs must hold on [t+a, t'] = [1, 2]
  const SampledSignal s({0, 1, 2, 3}, {{"x", {-5, 1, 2, 0}}, {"y", {-1, -1, 4, -1}}});
  const double r = robustness_exact(parse_formula("(x > 0) U[1,3] (y > 0)"), s, 0);
  EXPECT_DOUBLE_EQ(r, 1.0);
}

TEST(RobustnessSmooth, ClosedFormLse) {
  const SampledSignal zeros({0, 1}, {{"y", {0, 0}}});
  const SampledSignal ones({0, 1}, {{"y", {1, 1}}});
  const auto mx = robustness_smooth(parse_formula("F[0,1](y > 0)"), zeros, 0, 2.0);
  EXPECT_NEAR(mx.value, std::log(2.0) / 2.0, 1e-15);
  EXPECT_NEAR(mx.value, 0.34657, 1e-5);
  const auto mn = robustness_smooth(parse_formula("G[0,1](y > 0)"), ones, 0, 2.0);
  EXPECT_NEAR(mn.value, 1.0 - std::log(2.0) / 2.0, 1e-15);
  EXPECT_EQ(mn.mode, RobustnessMode::kSmooth);
  EXPECT_EQ(mn.gradient.rows(), 1);
  EXPECT_EQ(mn.gradient.cols(), 2);
  EXPECT_NEAR(mn.gradient(0, 0), 0.5, 1e-15);
}

TEST(RobustnessSmooth, ConvergesToExactWithinLseBound) {
  const Formula f = parse_formula("G[0,2](y < 2.5)");
  const double exact = robustness_exact(f, ramp123(), 0);
  double previous = INFINITY;
  for (double k : {1.0, 2.0, 8.0, 32.0, 128.0, 1024.0}) {
    const double err = std::abs(robustness_smooth(f, ramp123(), 0, k).value - exact);
    EXPECT_LE(err, std::log(3.0) / k + 1e-14);
    EXPECT_LE(err, previous);
    previous = err;
  }
}

TEST(RobustnessSmooth, OverflowSafe) {
  const SampledSignal s({0, 1}, {{"y", {1e6, -1e6}}});
  const auto r = robustness_smooth(parse_formula("F[0,1](y > 0)"), s, 0, 100.0);
  EXPECT_DOUBLE_EQ(r.value, 1e6);
  EXPECT_TRUE(r.gradient.allFinite());
}

TEST(RobustnessSmooth, SmoothAbsDiffersFromAbsByEpsilonOnly) {
  const SampledSignal s({0}, {{"y", {0.0}}});
  const Formula f = parse_formula("abs(y) > 0");
  EXPECT_DOUBLE_EQ(robustness_exact(f, s, 0), 0.0);
  EXPECT_NEAR(robustness_smooth(f, s, 0, 2.0).value, std::sqrt(kSmoothAbsEpsilon), 1e-18);
}

TEST(RobustnessSmooth, RejectsNonPositiveK) {
  EXPECT_THROW(robustness_smooth(parse_formula("y > 0"), ramp123(), 0, 0.0), Error);
}

TEST(GradientCheck, LinearAtom) {
  const SampledSignal s({0, 1}, {{"x", {0.3, -2.0}}, {"y", {1.5, 4.0}}});
  EXPECT_LT(robustness_gradient_check(parse_formula("2*x - 3*y + 1 > 0"), s, 0, 2.0), 1e-8);
}

TEST(GradientCheck, NestedGloballyFinallyOnRandomSignal) {
  std::mt19937_64 rng(11);
  const SampledSignal s = testing::random_signal(rng, 20, 0.5);
  EXPECT_LT(robustness_gradient_check(parse_formula("G[0,4] F[0,2] (x - 0.5*y > 0.1)"), s, 0, 2.0), 1e-4);
}

TEST(GradientCheck, AbsPredicateAwayFromKink) {
  std::mt19937_64 rng(5);
  SampledSignal s = testing::random_signal(rng, 12, 1.0);
  const Formula f = parse_formula("G[0,5](abs(x - y) < 1.5) | F[1,3](y > 0.2)");
  EXPECT_LT(robustness_gradient_check(f, s, 0, 2.0), 1e-4);
}

TEST(GradientCheck, UntilAndRelease) {
  std::mt19937_64 rng(3);
  const SampledSignal s = testing::random_signal(rng, 15, 0.25);
  EXPECT_LT(robustness_gradient_check(parse_formula("(x > -1) U[0.25,1.5] (y > 0.5)"), s, 0, 2.0), 1e-4);
  EXPECT_LT(robustness_gradient_check(parse_formula("!((x > -1) U[0.25,1.5] (y > 0.5))"), s, 0, 2.0), 1e-4);
}

// Property suites on a reduced corpus; the acceptance binary runs the full
// 1000-instance versions.
class RobustnessProperties : public ::testing::Test {
 protected:
  static constexpr int kInstances = 200;
  static constexpr double kStep = 0.5;
};

TEST_F(RobustnessProperties, MatchesBruteForceOracle) {
  testing::FormulaGenerator gen(101, kStep);
  for (int i = 0; i < kInstances; ++i) {
    const Formula f = gen.generate(3);
    const SampledSignal s = testing::random_signal(gen.rng(), 30, kStep);
    const double got = robustness_exact(f, s, 0);
    EXPECT_NEAR(got, testing::StlOracle(s).robustness(f, 0), 1e-12) << f.to_string();
  }
}

TEST_F(RobustnessProperties, SignAgreesWithBooleanSatisfaction) {
  testing::FormulaGenerator gen(202, kStep);
  for (int i = 0; i < kInstances; ++i) {
    const Formula f = gen.generate(3);
    const SampledSignal s = testing::random_signal(gen.rng(), 30, kStep);
    const double r = robustness_exact(f, s, 0);
    const bool sat = testing::StlOracle(s).satisfied(f, 0);
    if (r > 0) EXPECT_TRUE(sat) << f.to_string();
    if (r < 0) EXPECT_FALSE(sat) << f.to_string();
  }
}

TEST_F(RobustnessProperties, NnfPreservesRobustness) {
  testing::FormulaGenerator gen(303, kStep);
  for (int i = 0; i < kInstances; ++i) {
    const Formula raw = gen.generate(3, true);
    const Formula f = to_nnf(raw);
    ASSERT_TRUE(is_nnf(f));
    const SampledSignal s = testing::random_signal(gen.rng(), 30, kStep);
    EXPECT_NEAR(robustness_exact(f, s, 0), testing::StlOracle(s).robustness(raw, 0), 1e-12);
  }
}

TEST_F(RobustnessProperties, SmoothWithinLseBound) {
  testing::FormulaGenerator gen(404, kStep);
  for (int i = 0; i < kInstances; ++i) {
    const Formula f = gen.generate(3);
    const SampledSignal s = testing::random_signal(gen.rng(), 30, kStep);
    const double exact = robustness_exact(f, s, 0);
    const int depth = aggregation_depth(f);
    for (double k : {1.0, 2.0, 8.0}) {
      const auto r = robustness_smooth(f, s, 0, k);
      const double bound = depth * std::log(static_cast<double>(r.max_arity)) / k;
      EXPECT_LE(std::abs(r.value - exact), bound + 1e-12) << f.to_string();
    }
  }
}

TEST_F(RobustnessProperties, SmoothGradientMatchesFiniteDifferences) {
  testing::FormulaGenerator gen(505, kStep);
  for (int i = 0; i < 40; ++i) {
    const Formula f = gen.generate(2);
    const SampledSignal s = testing::random_signal(gen.rng(), 16, kStep);
    EXPECT_LT(robustness_gradient_check(f, s, 0, 2.0), 1e-4) << f.to_string();
  }
}

}  // namespace
}  // namespace falconn::stl
