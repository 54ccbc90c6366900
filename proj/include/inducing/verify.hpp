#pragma once

// End-to-end verification runs: for each map, the finiteness verdict, the
// Jacobian (Rohlin) side, the Birkhoff side, the block-entropy curve and the
// comparison between them. Also the counterexample and skew-system bundles
// behind the command-line driver.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "inducing/counterexample.hpp"
#include "inducing/entropy.hpp"
#include "inducing/maps1d.hpp"
#include "inducing/scheme.hpp"
#include "inducing/skew2d.hpp"
#include "inducing/tower.hpp"

namespace inducing {

enum class Outcome { pass, fail, inconclusive };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::pass: return "PASS";
    case Outcome::fail: return "FAIL";
    case Outcome::inconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

inline int exit_code(Outcome o) {
  switch (o) {
    case Outcome::pass: return 0;
    case Outcome::fail: return 1;
    case Outcome::inconclusive: return 2;
  }
  return 2;
}

inline const std::vector<std::string>& known_maps() {
  static const std::vector<std::string> names{"doubling", "lorenz", "lsv", "singular", "skewprod"};
  return names;
}

struct FormulaConfig {
  std::string map = "doubling";
  std::optional<double> alpha;  // lorenz: 0.25, lsv: 0.5
  double gamma = 2.0;
  double alpha0 = 0.2, alpha1 = 0.4, p0 = 0.5;
  long n_max = 1000;            // LSV scheme truncation
  std::size_t bins = 4096;      // Ulam bins; the error estimate uses bins/2
  OrbitOptions orbit;
  BlockOptions block;
  bool run_block = true;
  double sigmas = 3.0;          // comparison tolerance in combined standard errors

  double alpha_or_default() const {
    if (alpha) return *alpha;
    return map == "lorenz" ? 0.25 : 0.5;
  }
};

// ---------------------------------------------------------------------------
// Bounded derivative and the second moment of the return time

struct SecondMomentReport {
  bool applicable = false;       // derivative bounded, so the criterion applies
  double sup_derivative = 0.0;   // sup of |f'| on a grid refined toward singularities
  std::vector<EvidenceRow> partial_sums;  // sum R^2 m(cell) for R <= N
  double tail_exponent = 0.0;    // p in m(R > n) ~ n^-p, from the last two checkpoints
  Verdict verdict = Verdict::inconclusive;
  std::string note;
};

/// Sup of |f'| on a grid that approaches every singular point and both ends
/// geometrically down to 1e-12. `grows` reports whether the sup still rises
/// over the last six decades.
inline std::pair<double, bool> derivative_sup(const PiecewiseMap1D& f) {
  std::vector<double> anchors = f.singular_set();
  anchors.push_back(f.lo());
  anchors.push_back(f.hi());
  double sup_all = 0.0, sup_coarse = 0.0;
  auto probe = [&](double x, bool coarse) {
    if (x <= f.lo() || x >= f.hi()) return;
    try {
      const double d = std::fabs(f.eval(x).derivative);
      sup_all = std::max(sup_all, d);
      if (coarse) sup_coarse = std::max(sup_coarse, d);
    } catch (const std::exception&) {
    }
  };
  for (int i = 1; i < 1024; ++i) probe(f.lo() + f.length() * i / 1024.0, true);
  for (double a : anchors)
    for (int e = 2; e <= 12; ++e)
      for (double sgn : {-1.0, 1.0}) probe(a + sgn * std::pow(10.0, -e), e <= 6);
  return {sup_all, sup_all > 1.01 * sup_coarse};
}

inline SecondMomentReport second_moment_report(const InducingScheme& scheme) {
  SecondMomentReport rep;
  if (scheme.map) {
    const auto [sup, grows] = derivative_sup(*scheme.map);
    rep.sup_derivative = sup;
    rep.applicable = !grows;
  }
  if (!rep.applicable) {
    rep.note = "derivative unbounded near the singular set; criterion does not apply";
    return rep;
  }
  const long n_max = scheme.max_return_time();
  if (n_max == 1) {
    rep.partial_sums.push_back({1, scheme.base_length(), 0.0, 0.0});
    rep.verdict = Verdict::finite;
    rep.note = "return time is identically 1";
    return rep;
  }
  std::vector<double> per_r(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (const auto& c : scheme.cells)
    per_r[static_cast<std::size_t>(c.return_time)] +=
        static_cast<double>(c.return_time) * static_cast<double>(c.return_time) * c.length();
  CompensatedSum acc;
  std::vector<double> prefix(per_r.size());
  for (std::size_t i = 0; i < per_r.size(); ++i) {
    acc.add(per_r[i]);
    prefix[i] = acc.value();
  }
  // Mass with R > N, counting the truncated tail.
  auto tail = [&](long N) {
    double t = scheme.tail_mass;
    for (const auto& c : scheme.cells)
      if (c.return_time > N) t += c.length();
    return t;
  };
  for (long d : {4L, 2L, 1L}) {
    EvidenceRow row;
    row.N = std::max(1L, n_max / d);
    row.partial_sum = prefix[static_cast<std::size_t>(row.N)];
    if (!rep.partial_sums.empty()) row.increment = row.partial_sum - rep.partial_sums.back().partial_sum;
    rep.partial_sums.push_back(row);
  }
  const long n_half = n_max / 2;
  rep.tail_exponent = std::log(tail(n_half / 2) / tail(n_half)) / std::log(2.0);
  // sum n^2 m(R = n) converges iff the tail decays faster than n^-2.
  if (rep.tail_exponent > 2.1) rep.verdict = Verdict::finite;
  else if (rep.tail_exponent < 1.9) rep.verdict = Verdict::divergent;
  else rep.note = "tail exponent within 0.1 of the critical value 2";
  return rep;
}

// ---------------------------------------------------------------------------
// Per-map formula report

struct FormulaReport {
  std::string map;
  FormulaConfig config;
  EstimatorReport finiteness;
  EstimatorReport rohlin;
  EstimatorReport birkhoff;
  std::optional<BlockEntropyResult> block;
  Comparison comparison;
  SecondMomentReport second_moment;
  std::optional<double> lebesgue_sup_deviation;  // singular map: |density - 1| on the Ulam bins
  std::optional<double> lebesgue_quadrature;     // singular map: int log f' dm / m(S^1)
  std::vector<double> density_edges, density_masses;
  Outcome outcome = Outcome::inconclusive;
  std::string verdict;
  std::vector<std::string> warnings;
};

/// int log|f'| d(m/2) for the singular circle map. With t = f(x) on either
/// branch, dx = h'(t) dt and |f'| = 1/h'(t), so the integral is
/// -int_{-1}^{1} h' log h' dt.
inline double singular_lebesgue_lyapunov(double gamma) {
  const SingularIntermittent h(gamma);
  auto g = [&](double t) {
    const double d = h.dh(t);
    return d > 0.0 ? -d * std::log(d) : 0.0;
  };
  return gauss_legendre_composite(g, -1.0, 0.0, 2000) + gauss_legendre_composite(g, 0.0, 1.0, 2000);
}

namespace detail {

inline void set_outcome(FormulaReport& rep) {
  if (rep.finiteness.verdict != Verdict::finite) {
    rep.outcome = Outcome::inconclusive;
    rep.verdict = "finiteness criterion " + to_string(rep.finiteness.verdict);
    return;
  }
  rep.comparison = compare_estimators(rep.rohlin, rep.birkhoff, rep.config.sigmas);
  rep.outcome = rep.comparison.pass ? Outcome::pass : Outcome::fail;
  rep.verdict = rep.comparison.pass ? "formula holds: Jacobian integral equals Lyapunov average"
                                    : "estimators disagree beyond tolerance";
}

inline void rohlin_with_error(FormulaReport& rep, const InducingScheme& s, std::size_t bins) {
  const auto nu = base_invariant_measure(s, BaseMethod::ulam(bins));
  const auto coarse = base_invariant_measure(s, BaseMethod::ulam(bins / 2));
  rep.rohlin = rohlin_entropy(s, nu, &coarse, &rep.finiteness);
  rep.density_edges = nu.edges;
  rep.density_masses = nu.masses;
}

}  // namespace detail

inline FormulaReport entropy_formula_report(const FormulaConfig& cfg) {
  FormulaReport rep;
  rep.map = cfg.map;
  rep.config = cfg;
  if (cfg.bins < 16) throw std::invalid_argument("bins must be at least 16");
  if (cfg.orbit.n_orbits < 2 || cfg.orbit.n_iters < 1 || cfg.orbit.burn_in < 0)
    throw std::invalid_argument("need n_orbits >= 2, n_iters >= 1 and burn_in >= 0");
  BlockOptions block = cfg.block;
  block.seed = cfg.orbit.seed;
  block.threads = cfg.orbit.threads;

  if (cfg.map == "doubling") {
    const auto f = doubling_map();
    const auto s = trivial_scheme(f);
    rep.finiteness = finiteness_criterion(*s);
    const auto nu = base_invariant_measure(*s, BaseMethod::exact_linear());
    rep.rohlin = rohlin_entropy(*s, nu, nullptr, &rep.finiteness);
    rep.birkhoff = lyapunov_birkhoff(f, cfg.orbit);
    // The doubling map is an exact binary shift in floating point, so block
    // statistics need frequent fresh starts.
    block.segment = 32;
    block.burn_in = 0;
    if (cfg.run_block) rep.block = block_entropy(f, {{0.0, 0.5}, {0.5, 1.0}}, block);
    rep.second_moment = second_moment_report(*s);
  } else if (cfg.map == "lorenz") {
    const auto f = lorenz_like_map(cfg.alpha_or_default());
    const auto s = trivial_scheme(f);
    rep.finiteness = finiteness_criterion(*s);
    detail::rohlin_with_error(rep, *s, cfg.bins);
    rep.birkhoff = lyapunov_birkhoff(f, cfg.orbit);
    if (cfg.run_block) rep.block = block_entropy(f, {{-0.5, 0.0}, {0.0, 0.5}}, block);
    rep.second_moment = second_moment_report(*s);
  } else if (cfg.map == "lsv") {
    const double a = cfg.alpha_or_default();
    const auto f = lsv_map(a);
    if (cfg.n_max < 8) throw std::invalid_argument("n_max must be at least 8");
    const auto s = build_lsv_scheme(a, cfg.n_max);
    rep.finiteness = finiteness_criterion(*s);
    detail::rohlin_with_error(rep, *s, cfg.bins);
    rep.birkhoff = lyapunov_birkhoff(f, cfg.orbit);
    if (cfg.run_block) rep.block = block_entropy(f, {{0.0, 0.5}, {0.5, 1.0}}, block);
    rep.second_moment = second_moment_report(*s);
  } else if (cfg.map == "singular") {
    const auto f = singular_intermittent_map(cfg.gamma);
    const auto s = trivial_scheme(f);
    rep.finiteness = finiteness_criterion(*s);
    detail::rohlin_with_error(rep, *s, cfg.bins);
    double dev = 0.0;
    const double width = (s->base_hi - s->base_lo) / static_cast<double>(rep.density_masses.size());
    for (double m : rep.density_masses) dev = std::max(dev, std::fabs(m / width * s->base_length() - 1.0));
    rep.lebesgue_sup_deviation = dev;
    rep.lebesgue_quadrature = singular_lebesgue_lyapunov(cfg.gamma);
    rep.birkhoff = lyapunov_birkhoff(f, cfg.orbit);
    if (cfg.run_block) rep.block = block_entropy(f, {{-1.0, 0.0}, {0.0, 1.0}}, block);
    rep.second_moment = second_moment_report(*s);
  } else if (cfg.map == "skewprod") {
    const auto f = skew_product_map(cfg.alpha0, cfg.alpha1, cfg.p0);
    if (!(cfg.alpha1 < 1.0)) throw std::invalid_argument("skewprod: alpha1 must be below 1");
    // Each fibre map is LSV; the larger exponent governs finiteness.
    if (cfg.n_max < 8) throw std::invalid_argument("n_max must be at least 8");
    rep.finiteness = finiteness_criterion(*build_lsv_scheme(cfg.alpha1, cfg.n_max));
    // Jacobian side: the x-marginal is the fixed density of the averaged
    // transfer operator p0 P_a0 + p1 P_a1, independent of the current symbol,
    // and the y-factor contributes H(p).
    auto annealed = [&](std::size_t bins) {
      const auto s0 = trivial_scheme(lsv_map(cfg.alpha0));
      const auto s1 = trivial_scheme(lsv_map(cfg.alpha1));
      const auto u0 = build_ulam(*s0, bins), u1 = build_ulam(*s1, bins);
      const auto mix = UlamOperator::mixture({{f.p0(), &u0}, {f.p1(), &u1}});
      MeasureRep nu;
      nu.kind = MeasureKind::ulam;
      nu.lo = 0.0;
      nu.hi = 1.0;
      nu.edges = mix.edges();
      nu.masses = mix.fixed_point();
      const double half = 0.5;
      const std::span<const double> brk(&half, 1);
      const double l0 = nu.integrate([&](double x) { return std::log(std::fabs(lsv_map(cfg.alpha0).eval(x).derivative)); }, brk);
      const double l1 = nu.integrate([&](double x) { return std::log(std::fabs(lsv_map(cfg.alpha1).eval(x).derivative)); }, brk);
      const double hp = -f.p0() * std::log(f.p0()) - f.p1() * std::log(f.p1());
      return std::pair<double, MeasureRep>{hp + f.p0() * l0 + f.p1() * l1, std::move(nu)};
    };
    if (rep.finiteness.verdict == Verdict::finite) {
      auto [fine, nu] = annealed(cfg.bins);
      const double coarse = annealed(cfg.bins / 2).first;
      rep.rohlin.method = "annealed_quadrature";
      rep.rohlin.value = fine;
      rep.rohlin.std_error = std::fabs(fine - coarse);
      rep.rohlin.samples = static_cast<long>(cfg.bins);
      rep.rohlin.verdict = Verdict::finite;
      rep.density_edges = nu.edges;
      rep.density_masses = nu.masses;
    }
    rep.birkhoff = lyapunov_birkhoff(f, cfg.orbit);
    if (cfg.run_block) rep.block = block_entropy(f, block);
    rep.second_moment.note = "two-dimensional map; criterion evaluated on fibre schemes only";
  } else {
    throw std::invalid_argument("unknown map '" + cfg.map + "'");
  }
  detail::set_outcome(rep);
  if (rep.block)
    for (const auto& w : rep.block->warnings) rep.warnings.push_back("block entropy: " + w);
  for (const auto& w : rep.rohlin.warnings) rep.warnings.push_back("rohlin: " + w);
  if (rep.birkhoff.resampled > 0)
    rep.warnings.push_back("birkhoff: " + std::to_string(rep.birkhoff.resampled) +
                           " starts resampled after singular hits");
  return rep;
}

// ---------------------------------------------------------------------------
// Counterexample bundle: series certification plus the failure of the formula

struct CounterexampleRow {
  long n_max = 0;
  EstimatorReport finiteness;
  JacobianIntegral jacobian;
};

struct CounterexampleFormula {
  std::vector<CounterexampleRow> rows;
  bool entropy_divergent = false;
  bool integral_finite = false;
  bool stable = false;                 // tail-corrected values agree to 3 significant figures
  double relative_spread = 0.0;
  long layout_n_max = 0;
  EstimatorReport layout_birkhoff;     // Lyapunov average of the laid-out tower map
  double layout_exact = 0.0;           // exact int log|T'| over the layout
  Comparison layout_comparison;
  std::string verdict;
};

struct CounterexampleConfig {
  std::vector<long> n_max_list{1000, 10000, 100000, 1000000};
  long layout_n_max = 200;
  OrbitOptions orbit{32, 200000, 1000, 1, 0};
  double sigmas = 3.0;
};

struct CounterexampleReport {
  CounterexampleConfig config;
  ConvergenceReport lemma;
  CounterexampleFormula formula;
  Outcome outcome = Outcome::inconclusive;
};

/// Two values agree to 3 significant figures when they differ by less than
/// half a unit in the third digit of the larger.
inline bool same_three_figures(double a, double b) {
  const double scale = std::max(std::fabs(a), std::fabs(b));
  if (scale == 0.0) return true;
  const double unit = std::pow(10.0, std::floor(std::log10(scale)) - 2.0);
  return std::fabs(a - b) <= 0.5 * unit;
}

inline CounterexampleFormula counterexample_formula(const CounterexampleConfig& cfg) {
  CounterexampleFormula out;
  for (long n : cfg.n_max_list) {
    if (n < 3) continue;
    CounterexampleRow row;
    row.n_max = n;
    const auto p = counterexample_params(n);
    row.finiteness = finiteness_criterion(*build_counterexample_scheme(p));
    row.jacobian = counterexample_jacobian_integral(p);
    out.rows.push_back(std::move(row));
  }
  out.entropy_divergent = !out.rows.empty();
  out.integral_finite = !out.rows.empty();
  std::vector<double> stable_values;
  for (const auto& r : out.rows) {
    out.entropy_divergent = out.entropy_divergent && r.finiteness.verdict == Verdict::divergent;
    out.integral_finite = out.integral_finite && std::isfinite(r.jacobian.upper) &&
                          std::isfinite(r.jacobian.tail_corrected);
    if (r.n_max >= 10000) stable_values.push_back(r.jacobian.tail_corrected);
  }
  if (stable_values.size() >= 3) {
    out.stable = true;
    const double ref = stable_values.back();
    for (double v : stable_values) {
      out.stable = out.stable && same_three_figures(v, ref);
      out.relative_spread = std::max(out.relative_spread, std::fabs(v / ref - 1.0));
    }
  }
  if (cfg.layout_n_max >= 3) {
    out.layout_n_max = cfg.layout_n_max;
    const auto p = counterexample_params(cfg.layout_n_max);
    const auto layout = counterexample_interval_map(p);
    out.layout_exact = layout_log_derivative_average(layout);
    out.layout_birkhoff = lyapunov_birkhoff(layout, cfg.orbit);
    EstimatorReport exact;
    exact.value = out.layout_exact;
    out.layout_comparison = compare_estimators(out.layout_birkhoff, exact, cfg.sigmas);
  }
  if (out.entropy_divergent && out.integral_finite)
    out.verdict = "formula fails: entropy divergent, Jacobian integral finite";
  else if (out.integral_finite)
    out.verdict = "entropy divergence not certified";
  else
    out.verdict = "Jacobian integral not certified finite";
  return out;
}

inline CounterexampleReport counterexample_report(const CounterexampleConfig& cfg) {
  for (long n : cfg.n_max_list)
    if (n < 3) throw std::invalid_argument("every n_max must be at least 3");
  if (cfg.n_max_list.empty()) throw std::invalid_argument("n_max list is empty");
  CounterexampleReport rep;
  rep.config = cfg;
  rep.lemma = lemma61_report(cfg.n_max_list);
  rep.formula = counterexample_formula(cfg);
  const bool formula_ok = rep.formula.entropy_divergent && rep.formula.integral_finite;
  if (!rep.lemma.conclusive) rep.outcome = Outcome::inconclusive;
  else if (rep.lemma.matches_lemma() && formula_ok) rep.outcome = Outcome::pass;
  else rep.outcome = Outcome::fail;
  return rep;
}

// ---------------------------------------------------------------------------
// Skew-system bundle

struct SkewConfig {
  double lambda = 0.5;
  long n_max = 10000;
  long n_pairs = 1'000'000;
  long conjugacy_samples = 100000;
  OrbitOptions orbit{32, 200000, 1000, 1, 0};
};

struct SkewReport {
  SkewConfig config;
  InjectivityReport injectivity;
  ConjugacyReport conjugacy;
  ContractionReport contraction;
  bool slots_disjoint = false;
  UnstableIntegralReport integral;
  Outcome outcome = Outcome::inconclusive;
};

inline SkewReport skew_report(const SkewConfig& cfg) {
  if (!(cfg.lambda > 0.0 && cfg.lambda <= 0.5))
    throw std::invalid_argument("lambda must lie in (0, 1/2]");
  if (cfg.n_max < 3) throw std::invalid_argument("n_max must be at least 3");
  if (cfg.n_pairs < 1 || cfg.conjugacy_samples < 1)
    throw std::invalid_argument("sample counts must be positive");
  SkewReport rep;
  rep.config = cfg;
  const auto p = counterexample_params(cfg.n_max);
  const SkewSystem sys(build_counterexample_scheme(p), cfg.lambda);
  rep.injectivity = injectivity_check(sys, cfg.n_pairs, cfg.orbit.seed);
  rep.conjugacy = quotient_conjugacy_check(sys, cfg.conjugacy_samples, cfg.orbit.seed);
  rep.contraction = contraction_check(sys, 10000, cfg.orbit.seed);
  rep.slots_disjoint = return_slots_disjoint(sys, cfg.n_max);
  rep.integral = unstable_integral_report(sys, p, cfg.orbit);
  const bool ok = rep.injectivity.pass && rep.conjugacy.exact() && rep.slots_disjoint &&
                  rep.integral.integral_finite && rep.integral.entropy_divergent;
  rep.outcome = ok ? Outcome::pass : Outcome::fail;
  return rep;
}

}  // namespace inducing
