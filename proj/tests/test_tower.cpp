#include <gtest/gtest.h>

#include <cmath>

#include "inducing/counterexample.hpp"
#include "inducing/scheme.hpp"
#include "inducing/tower.hpp"

using namespace inducing;

namespace {

// Least-squares slope of log(density) against log(x) over bins in (a, b).
double log_log_slope(const MeasureRep& mu, double a, double b) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i + 1 < mu.edges.size(); ++i) {
    const double lo = mu.edges[i], hi = mu.edges[i + 1];
    if (lo < a || hi > b || mu.masses[i] <= 0) continue;
    const double x = std::log(std::sqrt(lo * hi));
    const double y = std::log(mu.masses[i] / (hi - lo));
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++n;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST(TowerStep, CaseSplit) {
  const auto s = build_lsv_scheme(0.5, 20);
  const Tower t(s);
  // Find a point with R = 3.
  const Cell* c3 = nullptr;
  for (const auto& c : s->cells)
    if (c.return_time == 3) c3 = &c;
  ASSERT_NE(c3, nullptr);
  const double x = 0.5 * (c3->lo + c3->hi);
  EXPECT_EQ(t.step({x, 0}), (TowerState{x, 1}));
  EXPECT_EQ(t.step({x, 2}), (TowerState{s->F(x).value, 0}));
  TowerState st{x, 0};
  for (int i = 0; i < 3; ++i) st = t.step(st);
  EXPECT_EQ(st, (TowerState{s->F(x).value, 0}));
}

TEST(TowerJacobian, OneOffTopAndTelescopes) {
  const auto s = build_lsv_scheme(0.5, 20);
  const Tower t(s);
  const Cell* c5 = nullptr;
  for (const auto& c : s->cells)
    if (c.return_time == 5) c5 = &c;
  ASSERT_NE(c5, nullptr);
  const double x = c5->lo + 0.3 * c5->length();
  EXPECT_EQ(t.jacobian({x, 0}), 1.0);
  EXPECT_EQ(t.jacobian({x, 4}), s->F(x).jacobian);
  double prod = 1.0;
  for (long l = 0; l < 5; ++l) prod *= t.jacobian({x, l});
  EXPECT_EQ(prod, s->F(x).jacobian);
}

TEST(TowerStep, TruncatedCellThrows) {
  const auto s = build_lsv_scheme(0.5, 10);
  const Tower t(s);
  EXPECT_THROW(t.step({0.5 + 1e-12, 0}), TruncatedCell);
  EXPECT_THROW(t.jacobian({0.5 + 1e-12, 0}), TruncatedCell);
}

TEST(Tower, LevelMassesAndTotal) {
  const auto s = build_lsv_scheme(0.4, 300);
  const Tower t(s);
  EXPECT_NEAR(t.level_mass(0), s->base_length() - s->tail_mass, 1e-12);
  for (long l = 1; l < t.height(); ++l) EXPECT_LE(t.level_mass(l), t.level_mass(l - 1));
  EXPECT_NEAR(t.total_mass(), t.integral_of_return_time(), 1e-10);
}

TEST(Project, SemiconjugacyOnRandomStates) {
  const auto s = build_lsv_scheme(0.5, 100);
  const Tower t(s);
  Rng rng(2, 0);
  double worst = 0.0;
  int checked = 0;
  for (int i = 0; i < 100000; ++i) {
    const std::size_t k = rng.below(s->cells.size());
    const Cell& c = s->cells[k];
    const TowerState st{rng.uniform(c.lo, c.hi), static_cast<long>(rng.below(c.return_time))};
    try {
      const double lhs = s->map->eval(t.project(st)).value;
      const double rhs = t.project(t.step(st));
      worst = std::max(worst, std::fabs(lhs - rhs));
      ++checked;
    } catch (const SingularPoint&) {
    } catch (const TruncatedCell&) {
    }
  }
  EXPECT_GT(checked, 99000);
  EXPECT_LT(worst, 1e-9);
}

TEST(Project, LowLevels) {
  const auto s = build_lsv_scheme(0.5, 20);
  const Tower t(s);
  const double x = 0.5 + s->tail_mass + 0.001;
  const auto& f = *s->map;
  EXPECT_EQ(t.project({x, 0}), x);
  EXPECT_EQ(t.project({x, 2}), f(f(x)));
}

TEST(BaseMeasure, ExactLinearForCounterexample) {
  const auto p = counterexample_params(200);
  const auto s = build_counterexample_scheme(p);
  const auto nu0 = base_invariant_measure(*s, BaseMethod::exact_linear());
  EXPECT_NEAR(nu0.total_mass(), 1.0, 1e-12);
  EXPECT_NEAR(nu0.density_at(0.1), 1.0 / p.b, 1e-14);
  // F_* m = m on test intervals: m(F^{-1}[u, v]) = v - u.
  Rng rng(4, 0);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform(0.0, p.b), v = rng.uniform(0.0, p.b);
    if (u > v) std::swap(u, v);
    const std::vector<double> ys{u, v};
    const auto pre = s->preimages(ys);
    double acc = 0.0;
    for (const auto& row : pre) acc += row[1] - row[0];
    EXPECT_NEAR(acc, v - u, 1e-12);
  }
  EXPECT_THROW(base_invariant_measure(*build_lsv_scheme(0.5, 20), BaseMethod::exact_linear()),
               std::invalid_argument);
}

TEST(BaseMeasure, UlamOfDoublingIsUniform) {
  const auto s = trivial_scheme(doubling_map());
  const auto nu0 = base_invariant_measure(*s, BaseMethod::ulam(256));
  EXPECT_NEAR(nu0.total_mass(), 1.0, 1e-12);
  for (double m : nu0.masses) EXPECT_NEAR(m, 1.0 / 256, 1e-12);
}

TEST(BaseMeasure, UlamAgreesWithOrbitHistogramForLsv) {
  const auto s = build_lsv_scheme(0.5, 400);
  const auto ulam = base_invariant_measure(*s, BaseMethod::ulam(4096));
  const auto orbit = base_invariant_measure(*s, BaseMethod::orbit(10'000'000, 3, 4096));
  // Compare on 64 coarse bins to keep the orbit histogram's noise small.
  double l1 = 0.0;
  for (int j = 0; j < 64; ++j) {
    double a = 0, b = 0;
    for (int i = 0; i < 64; ++i) {
      a += ulam.masses[64 * j + i];
      b += orbit.masses[64 * j + i];
    }
    l1 += std::fabs(a - b);
  }
  EXPECT_LT(l1, 0.02);
  double lo = 1e300, hi = 0;
  for (std::size_t i = 0; i < ulam.masses.size(); ++i) {
    lo = std::min(lo, ulam.masses[i]);
    hi = std::max(hi, ulam.masses[i]);
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi / lo, 50.0);
}

TEST(TowerMeasure, OneLevelTowerForTrivialScheme) {
  const auto s = trivial_scheme(doubling_map());
  const Tower t(s);
  const auto nu0 = base_invariant_measure(*s, BaseMethod::exact_linear());
  const auto nu = tower_invariant_measure(t, nu0);
  EXPECT_EQ(nu.level_mass.size(), 1u);
  EXPECT_NEAR(nu.rho, 1.0, 1e-14);
  EXPECT_NEAR(nu.level_mass[0], 1.0, 1e-14);
}

TEST(TowerMeasure, CounterexampleRhoTwoWays) {
  const auto p = counterexample_params(2000);
  const auto s = build_counterexample_scheme(p);
  const Tower t(s);
  const auto nu = tower_invariant_measure(t, base_invariant_measure(*s, BaseMethod::exact_linear()));
  double sum_na = 0.0;
  for (long n = 2; n <= p.n_max; ++n) sum_na += n * p.a_at(n);
  EXPECT_NEAR(nu.rho, nu.rho_by_return_time, 1e-8);
  EXPECT_NEAR(nu.rho, sum_na / p.b, 1e-8);
}

TEST(TowerMeasure, LevelMassIdentityAndPushforward) {
  const auto s = build_lsv_scheme(0.5, 300);
  const Tower t(s);
  const auto nu0 = base_invariant_measure(*s, BaseMethod::ulam(1024));
  const auto nu = tower_invariant_measure(t, nu0);
  const auto pushed = tower_level_masses_by_pushforward(t, nu0);
  const auto cm = cell_masses(*s, nu0);
  double total = 0.0;
  for (double m : nu.level_mass) total += m;
  EXPECT_NEAR(total, 1.0, 1e-10);
  for (long l = 0; l < t.height(); ++l) {
    double above = 0.0;
    for (std::size_t k = 0; k < s->cells.size(); ++k)
      if (s->cells[k].return_time > l) above += cm[k];
    EXPECT_NEAR(nu.level_mass[l], above / nu.rho, 1e-8);
    EXPECT_NEAR(pushed[l], nu.level_mass[l], 1e-8);
  }
  EXPECT_TRUE(nu.rho_converged);
}

TEST(TowerMeasure, LevelMassesMatchOrbitSimulation) {
  const auto s = build_lsv_scheme(0.5, 300);
  const Tower t(s);
  const auto nu = tower_invariant_measure(t, base_invariant_measure(*s, BaseMethod::ulam(2048)));
  // Batch-mean estimate of the fraction of time spent on levels 0, 1, 2.
  const int batches = 32;
  const long steps = 200000;
  std::vector<std::vector<double>> frac(3, std::vector<double>(batches));
  for (int bidx = 0; bidx < batches; ++bidx) {
    Rng rng(9, bidx);
    TowerState st{rng.uniform(0.75, 1.0), 0};
    long counts[3] = {0, 0, 0};
    for (long i = -1000; i < steps; ++i) {
      if (!s->locate(st.x)) st = {rng.uniform(0.75, 1.0), 0};
      if (i >= 0 && st.level < 3) ++counts[st.level];
      st = t.step(st);
    }
    for (int l = 0; l < 3; ++l) frac[l][bidx] = static_cast<double>(counts[l]) / steps;
  }
  for (int l = 0; l < 3; ++l) {
    const auto ms = mean_and_error(frac[l]);
    EXPECT_NEAR(ms.mean, nu.level_mass[l], 3 * ms.std_error + 1e-3) << l;
  }
}

TEST(TowerMeasure, PushingNuThroughTheTowerMapReturnsNu) {
  // Level masses after one tower step: level l+1 receives level l minus the
  // mass returning from level l; level 0 receives everything that returns.
  const auto s = build_lsv_scheme(0.5, 200);
  const Tower t(s);
  const auto nu = tower_invariant_measure(t, base_invariant_measure(*s, BaseMethod::ulam(1024)));
  const auto cm = cell_masses(*s, nu.base);
  std::vector<double> returning(t.height(), 0.0);
  for (std::size_t k = 0; k < s->cells.size(); ++k)
    returning[s->cells[k].return_time - 1] += cm[k] / nu.rho;
  std::vector<double> next(t.height(), 0.0);
  for (long l = 0; l < t.height(); ++l) {
    next[0] += returning[l];
    if (l + 1 < t.height()) next[l + 1] += nu.level_mass[l] - returning[l];
  }
  double l1 = 0.0;
  for (long l = 0; l < t.height(); ++l) l1 += std::fabs(next[l] - nu.level_mass[l]);
  EXPECT_LT(l1, 1e-3);
}

TEST(Pushforward, TrivialSchemeGivesBaseMeasure) {
  const auto s = trivial_scheme(lorenz_like_map(0.25));
  const Tower t(s);
  const auto nu0 = base_invariant_measure(*s, BaseMethod::ulam(512));
  const auto nu = tower_invariant_measure(t, nu0);
  const auto mu = pushforward_measure(t, nu, nu0.edges);
  for (std::size_t i = 0; i < mu.masses.size(); ++i) EXPECT_NEAR(mu.masses[i], nu0.masses[i], 1e-12);
}

TEST(Pushforward, LsvDensityBlowsUpWithExponentAlpha) {
  const auto s = build_lsv_scheme(0.5, 1000);
  const Tower t(s);
  const auto nu = tower_invariant_measure(t, base_invariant_measure(*s, BaseMethod::ulam(2048)));
  const auto mu = pushforward_measure(t, nu, log_edges(1e-5, 1.0, 200));
  EXPECT_NEAR(log_log_slope(mu, 1e-4, 1e-2), -0.5, 0.1);
}

TEST(Pushforward, LsvMuIsInvariant) {
  const auto s = build_lsv_scheme(0.5, 1000);
  const Tower t(s);
  const auto nu = tower_invariant_measure(t, base_invariant_measure(*s, BaseMethod::ulam(4096)));
  const auto edges = uniform_edges(0.0, 1.0, 1024);
  const auto mu = pushforward_measure(t, nu, edges);
  EXPECT_NEAR(mu.total_mass(), 1.0, 1e-5);
  const auto op = build_ulam(*trivial_scheme(*s->map), 1024);
  EXPECT_LT(invariance_residual(op, mu.masses), 1e-2);
}

TEST(Ulam, RowsAreStochasticForFullBranchMaps) {
  const auto op = build_ulam(*trivial_scheme(lorenz_like_map(0.25)), 300);
  for (std::size_t i = 0; i < op.bins(); ++i) {
    double s = 0.0;
    for (const auto& [j, w] : op.row(i)) s += w;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ulam, NonConvergenceIsReported) {
  // A two-bin swap never settles from a non-uniform start.
  UlamOperator op(0.0, 1.0, 2);
  op.rows()[0] = {{1, 1.0}};
  op.rows()[1] = {{0, 1.0}};
  UlamOptions opt;
  opt.max_iterations = 50;
  EXPECT_THROW(op.fixed_point(opt, {1.0, 0.0}), NonConvergence);
}
