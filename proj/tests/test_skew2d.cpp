#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "inducing/skew2d.hpp"

using namespace inducing;

namespace {

SkewSystem make_system(double lambda, long n_max = 200) {
  return SkewSystem(build_counterexample_scheme(n_max), lambda);
}

}  // namespace

TEST(SkewSystem, RejectsLambdaOutsideRange) {
  const auto s = build_counterexample_scheme(50);
  EXPECT_THROW(SkewSystem(s, 0.0), std::invalid_argument);
  EXPECT_THROW(SkewSystem(s, 0.6), std::invalid_argument);
  EXPECT_NO_THROW(SkewSystem(s, 0.5));
}

TEST(SkewSystem, StepClimbsAndReturns) {
  const auto p = counterexample_params(100);
  const SkewSystem sys(build_counterexample_scheme(p), 0.25);
  const Cell& c = sys.scheme().cells[3];  // column n = 5
  ASSERT_EQ(c.return_time, 5);
  const double x = c.lo + 0.6 * c.length();
  SkewState st{x, 0, 0.8};
  for (long l = 1; l < 5; ++l) {
    st = sys.step(st);
    EXPECT_EQ(st.level, l);
    EXPECT_EQ(st.x, x);
    EXPECT_NEAR(st.y, 0.8 * std::pow(0.25, static_cast<double>(l)), 1e-16);
  }
  st = sys.step(st);
  EXPECT_EQ(st.level, 0);
  EXPECT_NEAR(st.x, 0.6 * p.b, 1e-12);
  // Slot of column 5 starts at lambda + lambda^2 + lambda^3 + lambda^4.
  const double slot = 0.25 + 0.0625 + 0.015625 + 0.00390625;
  EXPECT_NEAR(st.y, slot + std::pow(0.25, 5) * 0.8 * std::pow(0.25, 4), 1e-16);
  EXPECT_NEAR(sys.return_slot(5).first, slot, 1e-16);
  EXPECT_NEAR(sys.return_slot(5).second - sys.return_slot(5).first, std::pow(0.25, 5), 1e-18);
}

TEST(SkewSystem, UnstableJacobianIsOneBelowTop) {
  const auto sys = make_system(0.5, 60);
  const Cell& c = sys.scheme().cells[10];
  const double x = c.lo + 0.5 * c.length();
  for (long l = 0; l + 1 < c.return_time; ++l) EXPECT_EQ(sys.unstable_jacobian({x, l, 0.3}), 1.0);
  EXPECT_NEAR(sys.unstable_jacobian({x, c.return_time - 1, 0.3}), sys.scheme().F(x).jacobian, 1e-12);
}

TEST(Slots, DisjointForAdmissibleLambdas) {
  for (double lambda : {0.25, 0.5}) {
    const auto sys = make_system(lambda, 400);
    EXPECT_TRUE(return_slots_disjoint(sys, 400)) << lambda;
    // Oracle: geometric sums; slot n ends where slot n + 1 begins.
    for (long n = 2; n < 40; ++n) {
      const double lo = lambda * (1 - std::pow(lambda, n - 1)) / (1 - lambda);
      EXPECT_NEAR(sys.return_slot(n).first, lo, 1e-15);
      EXPECT_LE(sys.return_slot(n).second, sys.return_slot(n + 1).first + 1e-16);
    }
  }
}

TEST(Injectivity, CrossCellPairsSeparateByMinorant) {
  for (double lambda : {0.25, 0.5}) {
    const auto sys = make_system(lambda, 400);
    const auto rep = injectivity_check(sys, 100000, 7);
    EXPECT_TRUE(rep.pass) << lambda;
    EXPECT_GT(rep.cross_cell_pairs, 70000);
    EXPECT_GT(rep.same_cell_pairs, 10000);
    EXPECT_GE(rep.min_gap_over_minorant, 1.0 - 1e-6);
    EXPECT_FALSE(rep.witness.has_value());
  }
}

TEST(Conjugacy, QuotientIsExact) {
  const auto sys = make_system(0.5, 300);
  const auto rep = quotient_conjugacy_check(sys, 100000, 3);
  EXPECT_EQ(rep.samples, 100000);
  EXPECT_TRUE(rep.exact());
}

TEST(Contraction, FibresShrinkGeometrically) {
  const auto sys = make_system(0.25, 100);
  const auto rep = contraction_check(sys, 20000, 5);
  EXPECT_GT(rep.samples, 19000);
  EXPECT_LT(rep.max_relative_error, 1e-6);
}

TEST(UnstableIntegral, BirkhoffMatchesClosedForm) {
  const auto p = counterexample_params(2000);
  const SkewSystem sys(build_counterexample_scheme(p), 0.5);
  OrbitOptions o;
  o.n_orbits = 32;
  o.n_iters = 200000;
  o.burn_in = 1000;
  const auto rep = unstable_integral_report(sys, p, o);
  EXPECT_TRUE(rep.comparison.pass) << rep.birkhoff.value << " vs " << rep.quotient_value;
  EXPECT_TRUE(rep.integral_finite);
  EXPECT_TRUE(rep.entropy_divergent);
  EXPECT_LE(rep.lower, rep.tail_corrected);
  EXPECT_GE(rep.upper, rep.tail_corrected);
  const double direct = counterexample_jacobian_integral(p).truncated;
  EXPECT_EQ(rep.quotient_value, direct);
}

TEST(OrbitCsv, HeaderAndRowCount) {
  const auto sys = make_system(0.5, 20);
  std::ostringstream out;
  const Cell& c = sys.scheme().cells[0];
  write_orbit_csv(out, sys, {c.lo + 0.5 * c.length(), 0, 0.5}, 10);
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("step,x,level,y\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 12);
}
