#pragma once

// A two-dimensional extension of the counterexample tower with a
// contracting vertical coordinate:
//   (x, l, y) -> (x, l+1, lambda y)                                 below the top
//   (x, l, y) -> (F x, 0, lambda + ... + lambda^{R-1} + lambda^R y) on the top level.
// Dropping y recovers the tower map exactly.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "inducing/counterexample.hpp"
#include "inducing/entropy.hpp"
#include "inducing/numeric.hpp"
#include "inducing/tower.hpp"

namespace inducing {

struct SkewState {
  double x;
  long level;
  double y;
  friend bool operator==(const SkewState&, const SkewState&) = default;
};

class SkewSystem {
 public:
  SkewSystem(SchemePtr base, double lambda) : tower_(std::move(base)), lambda_(lambda) {
    if (!(lambda > 0.0 && lambda <= 0.5))
      throw std::invalid_argument("SkewSystem: lambda must lie in (0, 1/2]");
    const long h = tower_.height();
    pow_.assign(static_cast<std::size_t>(h) + 1, 1.0);
    slot_lo_.assign(static_cast<std::size_t>(h) + 1, 0.0);
    for (long n = 1; n <= h; ++n) {
      const auto i = static_cast<std::size_t>(n);
      pow_[i] = pow_[i - 1] * lambda;
      // slot_lo(n) = lambda + ... + lambda^{n-1}
      slot_lo_[i] = (n >= 2) ? slot_lo_[i - 1] + pow_[i - 1] : 0.0;
    }
  }

  const Tower& tower() const { return tower_; }
  const InducingScheme& scheme() const { return tower_.scheme(); }
  double lambda() const { return lambda_; }

  double lambda_pow(long n) const { return pow_[static_cast<std::size_t>(n)]; }

  /// Return slot of column n: [lambda + ... + lambda^{n-1}, ... + lambda^n].
  std::pair<double, double> return_slot(long n) const {
    const auto i = static_cast<std::size_t>(n);
    return {slot_lo_[i], slot_lo_[i] + pow_[i]};
  }

  SkewState step(const SkewState& s) const {
    auto k = scheme().locate(s.x);
    if (!k) throw TruncatedCell(s.x);
    const long r = scheme().cells[*k].return_time;
    if (s.level < r - 1) return {s.x, s.level + 1, lambda_ * s.y};
    const auto ir = static_cast<std::size_t>(r);
    return {scheme().induced(*k, s.x).value, 0, slot_lo_[ir] + pow_[ir] * s.y};
  }

  /// |det Df_u|: 1 below the top level, J_F on it.
  double unstable_jacobian(const SkewState& s) const {
    return tower_.jacobian({s.x, s.level});
  }

 private:
  Tower tower_;
  double lambda_;
  std::vector<double> pow_;
  std::vector<double> slot_lo_;
};

inline TowerState quotient_project(const SkewState& s) { return {s.x, s.level}; }

/// Return slots for n = 2..n_top are pairwise disjoint and inside [0, 1].
inline bool return_slots_disjoint(const SkewSystem& sys, long n_top) {
  n_top = std::min(n_top, sys.tower().height());
  double prev_hi = -1.0;
  for (long n = 2; n <= n_top; ++n) {
    const auto [lo, hi] = sys.return_slot(n);
    if (lo < 0.0 || hi > 1.0 || hi < lo) return false;
    if (lo < prev_hi) return false;
    prev_hi = hi;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Structural checks

struct InjectivityWitness {
  long n, k;
  double x, xp, y, z;
  double gap;
};

struct InjectivityReport {
  long n_pairs = 0;
  long cross_cell_pairs = 0;
  long same_cell_pairs = 0;
  double min_gap_over_minorant = std::numeric_limits<double>::infinity();
  bool pass = true;
  std::optional<InjectivityWitness> witness;
};

/// Pairs of top-level points from distinct columns n > k sharing the same
/// F-image; the third coordinates of their images must differ by at least
/// lambda^n y. One pair in eight instead takes two points of one top level
/// with distinct x. Columns are limited to lambda^n >= 1e-10.
inline InjectivityReport injectivity_check(const SkewSystem& sys, long n_pairs, std::uint64_t seed) {
  InjectivityReport rep;
  rep.n_pairs = n_pairs;
  const InducingScheme& s = sys.scheme();
  long n_top = 2;
  while (n_top + 1 <= s.max_return_time() && sys.lambda_pow(n_top + 1) >= 1e-10) ++n_top;
  // Cell index of column n (cells are stored by increasing n from n = 2).
  auto cell_of = [&](long n) { return static_cast<std::size_t>(n - 2); };
  const double b = s.base_hi;
  const double eps = std::numeric_limits<double>::epsilon();
  Rng rng(seed, 0);
  for (long p = 0; p < n_pairs; ++p) {
    if (p % 8 == 7) {
      const long n = 2 + static_cast<long>(rng.below(static_cast<std::uint64_t>(n_top - 1)));
      const Cell& c = s.cells[cell_of(n)];
      const double x = rng.uniform(c.lo, c.hi), xp = rng.uniform(c.lo, c.hi);
      if (x == xp) continue;
      const SkewState a = sys.step({x, n - 1, rng.uniform()});
      const SkewState bb = sys.step({xp, n - 1, rng.uniform()});
      ++rep.same_cell_pairs;
      if (a == bb) {
        rep.pass = false;
        if (!rep.witness) rep.witness = InjectivityWitness{n, n, x, xp, 0.0, 0.0, 0.0};
      }
      continue;
    }
    long n = 2 + static_cast<long>(rng.below(static_cast<std::uint64_t>(n_top - 1)));
    long k = 2 + static_cast<long>(rng.below(static_cast<std::uint64_t>(n_top - 1)));
    if (n == k) continue;
    if (n < k) std::swap(n, k);
    const double u = rng.uniform(0.0, b);
    const Cell& cn = s.cells[cell_of(n)];
    const Cell& ck = s.cells[cell_of(k)];
    const double x = std::min(cn.lo + u / b * cn.length(), std::nextafter(cn.hi, cn.lo));
    const double xp = std::min(ck.lo + u / b * ck.length(), std::nextafter(ck.hi, ck.lo));
    const double y = rng.open_uniform(), z = rng.uniform();
    const SkewState a = sys.step({x, n - 1, y});
    const SkewState c = sys.step({xp, k - 1, z});
    ++rep.cross_cell_pairs;
    const double gap = a.y - c.y;
    const double minorant = sys.lambda_pow(n) * y;
    rep.min_gap_over_minorant = std::min(rep.min_gap_over_minorant, gap / minorant);
    if (a == c || gap < minorant - 4.0 * eps) {
      rep.pass = false;
      if (!rep.witness) rep.witness = InjectivityWitness{n, k, x, xp, y, z, gap};
    }
  }
  return rep;
}

struct ConjugacyReport {
  long samples = 0;
  long mismatches = 0;
  bool exact() const { return mismatches == 0; }
};

/// Theta(f(s)) == T(Theta(s)) bitwise on random states.
inline ConjugacyReport quotient_conjugacy_check(const SkewSystem& sys, long samples,
                                                std::uint64_t seed) {
  ConjugacyReport rep;
  const InducingScheme& s = sys.scheme();
  Rng rng(seed, 1);
  for (long i = 0; i < samples; ++i) {
    const std::size_t k = rng.below(s.cells.size());
    const Cell& c = s.cells[k];
    const double x = rng.uniform(c.lo, c.hi);
    const long level = static_cast<long>(rng.below(static_cast<std::uint64_t>(c.return_time)));
    const SkewState st{x, level, rng.uniform()};
    ++rep.samples;
    if (!(quotient_project(sys.step(st)) == sys.tower().step(quotient_project(st)))) ++rep.mismatches;
  }
  return rep;
}

struct ContractionReport {
  long samples = 0;
  double max_relative_error = 0.0;  // |measured / predicted - 1|
};

/// Two points on one vertical fibre: the vertical distance shrinks by
/// lambda below the top level and by lambda^R across a return. Columns with
/// lambda^R < 1e-6 and pairs closer than 1e-3 are skipped, since the slot
/// offset would swamp the gap in rounding.
inline ContractionReport contraction_check(const SkewSystem& sys, long samples, std::uint64_t seed) {
  ContractionReport rep;
  const InducingScheme& s = sys.scheme();
  std::size_t usable = 0;
  while (usable < s.cells.size() && sys.lambda_pow(s.cells[usable].return_time) >= 1e-6) ++usable;
  if (usable == 0) return rep;
  Rng rng(seed, 2);
  for (long i = 0; i < samples; ++i) {
    const std::size_t k = rng.below(usable);
    const Cell& c = s.cells[k];
    const long level = static_cast<long>(rng.below(static_cast<std::uint64_t>(c.return_time)));
    const double x = rng.uniform(c.lo, c.hi);
    const double y1 = rng.uniform(), y2 = rng.uniform();
    if (std::fabs(y1 - y2) < 1e-3) continue;
    const SkewState a = sys.step({x, level, y1}), b = sys.step({x, level, y2});
    const bool top = level == c.return_time - 1;
    const double predicted = (top ? sys.lambda_pow(c.return_time) : sys.lambda()) * std::fabs(y1 - y2);
    const double measured = std::fabs(a.y - b.y);
    rep.max_relative_error = std::max(rep.max_relative_error, std::fabs(measured / predicted - 1.0));
    ++rep.samples;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Unstable Jacobian integral

struct UnstableIntegralReport {
  EstimatorReport birkhoff;        // time average of log|det Df_u|
  double quotient_value = 0.0;     // (1/rho) int log J_F dnu_0 of the truncated quotient
  double tail_corrected = 0.0;     // same for the untruncated system
  double lower = 0.0, upper = 0.0; // certified bracket for the untruncated system
  Comparison comparison;
  EstimatorReport finiteness;      // entropy side of the quotient
  bool integral_finite = false;
  bool entropy_divergent = false;
};

/// Uniform start on the laid-out tower (the invariant measure, since nu_0 is
/// Lebesgue on the base) with uniform y.
inline SkewState sample_tower_start(const SkewSystem& sys, const std::vector<double>& cumulative,
                                    Rng& rng) {
  const InducingScheme& s = sys.scheme();
  const double u = rng.uniform() * cumulative.back();
  std::size_t k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                           cumulative.begin());
  k = std::min(k, s.cells.size() - 1);
  const Cell& c = s.cells[k];
  const long level = static_cast<long>(rng.below(static_cast<std::uint64_t>(c.return_time)));
  return {rng.uniform(c.lo, c.hi), level, rng.uniform()};
}

inline UnstableIntegralReport unstable_integral_report(const SkewSystem& sys,
                                                       const CounterexampleParams& params,
                                                       const OrbitOptions& opt) {
  UnstableIntegralReport rep;
  const InducingScheme& s = sys.scheme();
  std::vector<double> cumulative;
  {
    CompensatedSum acc;
    for (const auto& c : s.cells) {
      acc.add(static_cast<double>(c.return_time) * c.length());
      cumulative.push_back(acc.value());
    }
  }
  std::vector<double> per_orbit(static_cast<std::size_t>(opt.n_orbits));
  parallel_for(opt.n_orbits, opt.threads, [&](long k) {
    Rng rng(opt.seed, static_cast<std::uint64_t>(k));
    SkewState st = sample_tower_start(sys, cumulative, rng);
    CompensatedSum sum;
    for (long i = -opt.burn_in; i < opt.n_iters; ++i) {
      if (!s.locate(st.x)) st = sample_tower_start(sys, cumulative, rng);
      if (i >= 0) sum.add(std::log(sys.unstable_jacobian(st)));
      st = sys.step(st);
    }
    per_orbit[static_cast<std::size_t>(k)] = sum.value() / static_cast<double>(opt.n_iters);
  });
  const MeanStats ms = mean_and_error(per_orbit);
  rep.birkhoff.method = "birkhoff_unstable";
  rep.birkhoff.value = ms.mean;
  rep.birkhoff.std_error = ms.std_error;
  rep.birkhoff.samples = opt.n_orbits * opt.n_iters;
  rep.birkhoff.verdict = Verdict::finite;

  const JacobianIntegral ji = counterexample_jacobian_integral(params);
  rep.quotient_value = ji.truncated;
  rep.tail_corrected = ji.tail_corrected;
  rep.lower = ji.lower;
  rep.upper = ji.upper;
  EstimatorReport closed;
  closed.value = ji.truncated;
  rep.comparison = compare_estimators(rep.birkhoff, closed);
  rep.finiteness = finiteness_criterion(s);
  rep.integral_finite = std::isfinite(ji.upper) && std::isfinite(rep.birkhoff.value);
  rep.entropy_divergent = rep.finiteness.verdict == Verdict::divergent;
  return rep;
}

/// Orbit dump as CSV rows (step, x, level, y).
inline void write_orbit_csv(std::ostream& out, const SkewSystem& sys, SkewState st, long steps) {
  out << "step,x,level,y\n";
  out.precision(17);
  for (long i = 0; i <= steps; ++i) {
    out << i << ',' << st.x << ',' << st.level << ',' << st.y << '\n';
    if (i < steps) st = sys.step(st);
  }
}

}  // namespace inducing
