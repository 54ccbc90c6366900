#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "inducing/numeric.hpp"

using namespace inducing;

TEST(SolveMonotone, FindsCubeRoot) {
  auto g = [](double t) { return t * t * t; };
  auto dg = [](double t) { return 3 * t * t; };
  EXPECT_NEAR(solve_monotone(g, dg, 2.0, 0.0, 2.0), std::cbrt(2.0), 1e-14);
}

TEST(SolveMonotone, DecreasingFunction) {
  auto g = [](double t) { return -t; };
  EXPECT_NEAR(solve_monotone(g, nullptr, -0.25, 0.0, 1.0), 0.25, 1e-14);
}

TEST(SolveMonotone, RejectsUnbracketedTarget) {
  auto g = [](double t) { return t; };
  EXPECT_THROW(solve_monotone(g, nullptr, 3.0, 0.0, 1.0), RootBracketError);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a(7, 0), b(7, 0), c(7, 1);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  Rng d(7, 0);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += d.uniform() == c.uniform();
  EXPECT_EQ(same, 0);
}

TEST(Rng, BelowStaysInRange) {
  Rng r(1, 0);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 5000; ++i) ++hits[r.below(5)];
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Summation, PairwiseIsOrderFixed) {
  std::vector<double> v;
  for (int i = 1; i <= 1000; ++i) v.push_back(1.0 / i);
  double naive = 0.0;
  for (double x : v) naive += x;
  EXPECT_NEAR(pairwise_sum(v), naive, 1e-12);
  EXPECT_EQ(pairwise_sum(v), pairwise_sum(v));
}

TEST(Summation, CompensatedRecoversSmallTerms) {
  CompensatedSum s;
  s.add(1.0);
  for (int i = 0; i < 1000; ++i) s.add(1e-17);
  EXPECT_NEAR(s.value() - 1.0, 1e-14, 3e-16);
}

TEST(Statistics, MeanAndError) {
  std::vector<double> v{1, 2, 3, 4};
  auto st = mean_and_error(v);
  EXPECT_DOUBLE_EQ(st.mean, 2.5);
  EXPECT_NEAR(st.std_error, std::sqrt((5.0 / 3.0) / 4.0), 1e-15);
}

TEST(Quadrature, GaussLegendreExactForCubics) {
  auto f = [](double x) { return x * x * x - 2 * x + 1; };
  EXPECT_NEAR(gauss_legendre4(f, 0.0, 2.0), 4.0 - 4.0 + 2.0, 1e-14);
  EXPECT_NEAR(gauss_legendre_composite([](double x) { return std::sin(x); }, 0.0,
                                       std::numbers::pi, 64),
              2.0, 1e-12);
}
