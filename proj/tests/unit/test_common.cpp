#include "shapeuq/common.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <vector>

using namespace shapeuq;

TEST(GaussLegendre, IntegratesPolynomialsUpToDegree2nMinus1) {
  for (int n = 1; n <= 12; ++n) {
    const QuadratureRule1D& rule = gauss_legendre(n);
    ASSERT_EQ(rule.nodes.size(), static_cast<std::size_t>(n));
    for (int p = 0; p <= 2 * n - 1; ++p) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += rule.weights[i] * std::pow(rule.nodes[i], p);
      EXPECT_NEAR(s, 1.0 / (p + 1), 1e-14) << "n=" << n << " p=" << p;
    }
  }
}

TEST(GaussLegendre, RejectsNonPositiveCounts) { EXPECT_THROW(gauss_legendre(0), std::invalid_argument); }

TEST(PairwiseSum, MatchesExactSumOfIntegers) {
  std::vector<double> v(1001);
  std::iota(v.begin(), v.end(), 0.0);
  EXPECT_DOUBLE_EQ(pairwise_sum(v), 500500.0);
  EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0);
}

TEST(PairwiseSum, BeatsNaiveAccumulationOnManySmallTerms) {
  std::vector<double> v(1 << 20, 0.1);
  EXPECT_NEAR(pairwise_sum(v), 0.1 * v.size(), 1e-9);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (int workers : {1, 2, 4}) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 2, [](std::size_t i) {
                 if (i == 7) throw NumericalError("boom");
               }),
               NumericalError);
}

TEST(LoglogSlope, RecoversPowerLaw) {
  std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> err;
  for (double e : eps) err.push_back(3.0 * e);
  EXPECT_NEAR(loglog_slope(eps, err), 1.0, 1e-6);
  err.clear();
  for (double e : eps) err.push_back(e * e);
  EXPECT_NEAR(loglog_slope(eps, err), 2.0, 1e-12);
}

TEST(RadialCutoff, ValuesAndDerivative) {
  RadialCutoff c{0.2, 0.6};
  EXPECT_EQ(c.value(0.0), 1.0);
  EXPECT_EQ(c.value(0.2), 1.0);
  EXPECT_EQ(c.value(0.6), 0.0);
  EXPECT_EQ(c.value(1.0), 0.0);
  EXPECT_NEAR(c.value(0.4), 0.5, 1e-15);
  for (double r : {0.25, 0.4, 0.55}) {
    const double h = 1e-6;
    EXPECT_NEAR(c.derivative(r), (c.value(r + h) - c.value(r - h)) / (2 * h), 1e-8);
    EXPECT_LE(std::abs(c.derivative(r)), c.max_slope() + 1e-12);
  }
}

TEST(Box, ContainsWithTolerance) {
  const Box b = Box::cube(2, -1.0, 1.0);
  EXPECT_EQ(b.dim(), 2);
  EXPECT_TRUE(b.contains(make_vec({0.5, -1.0})));
  EXPECT_FALSE(b.contains(make_vec({1.0 + 1e-9, 0.0})));
  EXPECT_TRUE(b.contains(make_vec({1.0 + 1e-9, 0.0}), 1e-8));
}

TEST(ConfigError, CarriesPath) {
  const ConfigError e("time.steps", "must be positive");
  EXPECT_EQ(e.path(), "time.steps");
  EXPECT_STREQ(e.what(), "time.steps: must be positive");
}

TEST(Warnings, SinkReceivesMessages) {
  std::vector<std::string> got;
  set_warning_sink([&](const std::string& m) { got.push_back(m); });
  warn("near boundary");
  set_warning_sink({});
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], "near boundary");
}
