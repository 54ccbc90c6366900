// Acceptance run: eight criteria, each printed as PASS or FAIL with its
// measured quantities and runtime. Exit status is nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "inducing/report.hpp"

using namespace inducing;

namespace {

struct Checker {
  bool ok = true;
  void expect(bool cond, const std::string& what) {
    std::printf("    [%s] %s\n", cond ? "ok" : "FAILED", what.c_str());
    ok = ok && cond;
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void doubling_exactness(Checker& c) {
  const auto t0 = std::chrono::steady_clock::now();
  FormulaConfig cfg;
  cfg.map = "doubling";
  cfg.orbit = {64, 100000, 1000, 1, 0};
  cfg.block.n_max_block = 12;
  const auto r = entropy_formula_report(cfg);
  const double log2 = std::log(2.0);
  c.expect(std::fabs(r.rohlin.value - log2) <= 1e-12, fmt("Jacobian integral %.15f, |err| %.1e <= 1e-12", r.rohlin.value, std::fabs(r.rohlin.value - log2)));
  c.expect(std::fabs(r.birkhoff.value - log2) <= 1e-3, fmt("Lyapunov average %.15f within 1e-3 of log 2", r.birkhoff.value));
  for (const auto& row : r.block->rows)
    c.expect(std::fabs(row.h_over_n - log2) <= 2.0 * row.std_error,
             fmt("H_%d/%d = %.6f, |err| %.2e <= 2 sigma = %.2e", row.n, row.n, row.h_over_n, std::fabs(row.h_over_n - log2), 2.0 * row.std_error));
  const double dt = seconds_since(t0);
  c.expect(dt < 10.0, fmt("runtime %.1f s < 10 s", dt));
}

void cross_estimator_agreement(Checker& c) {
  struct Case {
    std::string map;
    double alpha;
  };
  for (const Case& k : {Case{"lorenz", 0.25}, Case{"lsv", 0.3}, Case{"lsv", 0.5}}) {
    const auto t0 = std::chrono::steady_clock::now();
    FormulaConfig cfg;
    cfg.map = k.map;
    cfg.alpha = k.alpha;
    cfg.n_max = 2000;
    cfg.bins = 4096;
    cfg.orbit = {64, 1'000'000, 10'000, 1, 0};
    cfg.run_block = false;
    const auto r = entropy_formula_report(cfg);
    const std::string tag = fmt("%s alpha=%.2f", k.map.c_str(), k.alpha);
    c.expect(r.finiteness.verdict == Verdict::finite, tag + ": finiteness criterion finite");
    c.expect(r.comparison.pass, tag + fmt(": |%.8f - %.8f| = %.2e <= %.2e", r.rohlin.value, r.birkhoff.value,
                                          r.comparison.difference, r.comparison.tolerance));
    c.expect(r.rohlin.std_error < 0.01 * r.rohlin.value, tag + fmt(": Jacobian-side std error %.2e < 1%%", r.rohlin.std_error));
    c.expect(r.birkhoff.std_error < 0.01 * r.birkhoff.value, tag + fmt(": Lyapunov std error %.2e < 1%%", r.birkhoff.std_error));
    const double dt = seconds_since(t0);
    c.expect(dt < 300.0, tag + fmt(": runtime %.1f s < 300 s", dt));
  }
}

void series_certification(Checker& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = lemma61_report({1000, 10000, 100000, 1000000});
  c.expect(r.matches_lemma(), "verdicts: sum a_n " + to_string(r.sum_a) + ", sum n a_n " + to_string(r.sum_na) +
                                  ", sum phi(a_n) " + to_string(r.sum_phi) + ", sum n phi(a_n) " + to_string(r.sum_nphi));
  c.expect(r.phi_in_bracket, "sum phi(a_n) inside its integral-test bracket at every N");
  bool below = !r.doublings.empty();
  for (const auto& d : r.doublings) below = below && d.increment <= d.bound;
  c.expect(below, fmt("%zu doublings of N up to 1e6: sum n a_n increments below the tail bound", r.doublings.size()));
  c.expect(r.nphi_increment_ok, fmt("sum n phi(a_n) increment 1e3 -> 1e6: %.6f vs log 2 = %.6f (%.1f%%)", r.nphi_increment,
                                    r.nphi_target, 100.0 * std::fabs(r.nphi_increment / r.nphi_target - 1.0)));
  const double dt = seconds_since(t0);
  c.expect(dt < 60.0, fmt("runtime %.1f s < 60 s", dt));
}

void formula_failure(Checker& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<long> levels{10000, 100000, 1000000};
  std::vector<double> scheme_values, skew_values;
  for (long n : levels) {
    const auto p = counterexample_params(n);
    const auto s = build_counterexample_scheme(p);
    const auto fin = finiteness_criterion(*s);
    const auto j = counterexample_jacobian_integral(p);
    c.expect(fin.verdict == Verdict::divergent, fmt("scheme n_max=%ld: entropy divergent", n));
    c.expect(std::isfinite(j.upper), fmt("scheme n_max=%ld: Jacobian integral %.8f in [%.6f, %.6f]", n, j.tail_corrected, j.lower, j.upper));
    scheme_values.push_back(j.tail_corrected);
    std::printf("    (truncated system: %.8f, rho %.6f)\n", j.truncated, j.rho);

    const SkewSystem sys(s, 0.5);
    const auto u = unstable_integral_report(sys, p, {16, 100000, 1000, 1, 0});
    c.expect(u.entropy_divergent && u.integral_finite,
             fmt("skew n_max=%ld: quotient entropy divergent, unstable integral finite (%.8f)", n, u.tail_corrected));
    c.expect(u.comparison.pass, fmt("skew n_max=%ld: time average %.5f +/- %.1e matches quotient %.5f", n, u.birkhoff.value,
                                    u.birkhoff.std_error, u.quotient_value));
    skew_values.push_back(u.tail_corrected);
  }
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    c.expect(same_three_figures(scheme_values[i], scheme_values.back()),
             fmt("scheme: %.6f and %.6f agree to 3 significant figures", scheme_values[i], scheme_values.back()));
    c.expect(same_three_figures(skew_values[i], skew_values.back()),
             fmt("skew: %.6f and %.6f agree to 3 significant figures", skew_values[i], skew_values.back()));
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 120.0, fmt("runtime %.1f s < 120 s", dt));
}

void measure_identities(Checker& c) {
  const auto s = build_lsv_scheme(0.5, 300);
  const Tower t(s);
  const auto nu0 = base_invariant_measure(*s, BaseMethod::ulam(1024));
  const auto nu = tower_invariant_measure(t, nu0);
  const auto cm = cell_masses(*s, nu0);
  const auto pushed = tower_level_masses_by_pushforward(t, nu0);
  double worst = 0.0, worst_pushed = 0.0;
  for (long l = 0; l < t.height(); ++l) {
    double above = 0.0;
    for (std::size_t k = 0; k < s->cells.size(); ++k)
      if (s->cells[k].return_time > l) above += cm[k];
    const auto i = static_cast<std::size_t>(l);
    worst = std::max(worst, std::fabs(nu.level_mass[i] - above / nu.rho));
    worst_pushed = std::max(worst_pushed, std::fabs(pushed[i] - above / nu.rho));
  }
  c.expect(worst < 1e-8, fmt("level masses match nu0(R > l)/rho: max error %.1e < 1e-8", worst));
  c.expect(worst_pushed < 1e-8, fmt("level masses by pushing nu0 up the columns: max error %.1e < 1e-8", worst_pushed));

  const auto s100 = build_lsv_scheme(0.5, 100);
  const Tower t100(s100);
  Rng rng(2, 0);
  double resid = 0.0;
  long checked = 0;
  while (checked < 100000) {
    const Cell& cell = s100->cells[rng.below(s100->cells.size())];
    const TowerState st{rng.uniform(cell.lo, cell.hi), static_cast<long>(rng.below(cell.return_time))};
    try {
      resid = std::max(resid, std::fabs(s100->map->eval(t100.project(st)).value - t100.project(t100.step(st))));
      ++checked;
    } catch (const SingularPoint&) {
    } catch (const TruncatedCell&) {
    }
  }
  c.expect(resid < 1e-9, fmt("semiconjugacy residual %.1e < 1e-9 on %ld states", resid, checked));

  for (const auto& scheme : {s, build_counterexample_scheme(2000)}) {
    const auto base = scheme->linear_cells ? base_invariant_measure(*scheme, BaseMethod::exact_linear())
                                           : nu0;
    const Tower tw(scheme);
    const auto tnu = tower_invariant_measure(tw, base);
    const double lhs = tower_log_jacobian_integral(tw, tnu), rhs = jacobian_integral(*scheme, base).value;
    c.expect(std::fabs(lhs - rhs) < 1e-8,
             fmt("%s: log J integral on tower %.12f vs base %.12f", scheme->name.c_str(), lhs, rhs));
  }

  const auto s1000 = build_lsv_scheme(0.5, 1000);
  const Tower t1000(s1000);
  const auto nu1000 = tower_invariant_measure(t1000, base_invariant_measure(*s1000, BaseMethod::ulam(4096)));
  const auto mu = pushforward_measure(t1000, nu1000, uniform_edges(0.0, 1.0, 1024));
  const double inv = invariance_residual(build_ulam(*trivial_scheme(*s1000->map), 1024), mu.masses);
  c.expect(inv < 1e-2, fmt("LSV 0.5: transfer-operator invariance residual of the projected measure %.2e < 1e-2", inv));
}

void lebesgue_invariance(Checker& c) {
  FormulaConfig cfg;
  cfg.map = "singular";
  cfg.gamma = 2.0;
  cfg.bins = 1024;
  cfg.orbit = {64, 100000, 1000, 1, 0};
  cfg.run_block = false;
  const auto r = entropy_formula_report(cfg);
  c.expect(*r.lebesgue_sup_deviation < 0.02, fmt("Ulam density sup deviation from uniform %.2e < 2%%", *r.lebesgue_sup_deviation));
  const double diff = std::fabs(r.birkhoff.value - *r.lebesgue_quadrature);
  c.expect(diff <= 3.0 * r.birkhoff.std_error,
           fmt("Lyapunov average %.6f vs quadrature %.10f: |diff| %.2e <= 3 sigma = %.2e", r.birkhoff.value,
               *r.lebesgue_quadrature, diff, 3.0 * r.birkhoff.std_error));
}

void skew_structure(Checker& c) {
  for (double lambda : {0.25, 0.5}) {
    const SkewSystem sys(build_counterexample_scheme(10000), lambda);
    const auto inj = injectivity_check(sys, 1'000'000, 1);
    c.expect(inj.pass && inj.n_pairs == 1'000'000,
             fmt("lambda=%.2f: injectivity on %ld pairs (%ld cross-cell), min gap / minorant %.3f", lambda, inj.n_pairs,
                 inj.cross_cell_pairs, inj.min_gap_over_minorant));
    const auto conj = quotient_conjugacy_check(sys, 100000, 1);
    c.expect(conj.exact(), fmt("lambda=%.2f: quotient conjugacy exact on %ld states", lambda, conj.samples));
    c.expect(return_slots_disjoint(sys, 10000), fmt("lambda=%.2f: return slots disjoint", lambda));
  }
}

void distortion(Checker& c) {
  const auto d = check_gibbs_markov(*build_lsv_scheme(0.5, 200), 10000, 1);
  c.expect(std::isfinite(d.fitted_C) && d.fitted_C < 1e3 && d.fitted_beta < 1.0,
           fmt("LSV 0.5: fitted C = %.3g at beta = %.3f", d.fitted_C, d.fitted_beta));
  const auto three = piecewise_linear("three", 0.0, 3.0, {{0, 1, 0, 3}, {1, 2, 3, 0}, {2, 3, 0, 3}});
  const auto p = counterexample_params(300);
  const std::vector<std::pair<std::string, SchemePtr>> linear{
      {"doubling", trivial_scheme(doubling_map())},
      {"three-branch", trivial_scheme(three)},
      {"counterexample", build_counterexample_scheme(p)},
      {"counterexample layout", build_counterexample_layout_scheme(p)}};
  for (const auto& [name, s] : linear) {
    const auto r = check_gibbs_markov(*s, 10000, 1);
    c.expect(r.max_ratio == 0.0, fmt("%s: log-ratio identically 0 (max %.1e)", name.c_str(), r.max_ratio));
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Checker&)>>> criteria{
      {"1 doubling-map exactness", doubling_exactness},
      {"2 cross-estimator agreement", cross_estimator_agreement},
      {"3 series certification", series_certification},
      {"4 failure of the formula", formula_failure},
      {"5 measure identities", measure_identities},
      {"6 Lebesgue invariance of the singular map", lebesgue_invariance},
      {"7 skew-system structure", skew_structure},
      {"8 distortion", distortion},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    std::printf("criterion %s\n", name.c_str());
    std::fflush(stdout);
    Checker c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    std::printf("%s criterion %s (%.1f s)\n\n", c.ok ? "PASS" : "FAIL", name.c_str(), seconds_since(t0));
    std::fflush(stdout);
    failed += c.ok ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
