#pragma once

// The infinite-entropy Gibbs-Markov system: cells of length a_n with
// phi(a_n) = 1/(n^2 log n), return time n and affine onto branches. Its
// Jacobian integral is finite while the entropy side diverges.

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "inducing/maps1d.hpp"
#include "inducing/numeric.hpp"
#include "inducing/scheme.hpp"

namespace inducing {

/// phi(x) = -x log x, with phi(0) = 0.
inline double phi(double x) { return x > 0.0 ? -x * std::log(x) : 0.0; }

inline double phi_derivative(double x) { return -std::log(x) - 1.0; }

/// Solves u - log u = L for u >= 1 (L >= 1).
inline double solve_u_minus_log_u(double L) {
  if (L == 1.0) return 1.0;
  double lo = 1.0;
  double hi = L + std::log(L) + 1.0;
  double u = L + std::log(L);
  for (int i = 0; i < 200; ++i) {
    const double g = u - std::log(u) - L;
    if (g > 0.0) hi = u; else lo = u;
    double next = u - g / (1.0 - 1.0 / u);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - u) <= 1e-16 * u) return next;
    u = next;
  }
  return u;
}

/// The unique x in (0, 1/e] with phi(x) = y. Works in u = -log x, where
/// phi(x) = y reads u - log u = -log y; a bracketed Newton solve there is
/// followed by one Newton step in x.
inline double phi_inverse(double y) {
  constexpr double inv_e = 1.0 / std::numbers::e;
  if (!(y > 0.0 && y <= inv_e))
    throw std::domain_error("phi_inverse: y must lie in (0, 1/e]");
  if (y == inv_e) return inv_e;
  const double u = solve_u_minus_log_u(-std::log(y));
  double x = std::exp(-u);
  const double d = phi_derivative(x);
  if (d > 0.0) {
    const double next = x - (phi(x) - y) / d;
    if (next > 0.0 && next <= inv_e && std::fabs(phi(next) - y) < std::fabs(phi(x) - y))
      x = next;
  }
  return x;
}

/// 1/(n^2 log n), the prescribed value of phi(a_n).
inline double counterexample_phi_value(long n) {
  const double dn = static_cast<double>(n);
  return 1.0 / (dn * dn * std::log(dn));
}

/// E1(x) = -Ei(-x).
inline double exp_integral_e1(double x) { return -std::expint(-x); }

/// Exact integral of 1/(x^2 log x) over [lo, hi] (hi may be +inf), lo > 1.
inline double integral_inv_x2_log(double lo, double hi) {
  const double upper = std::isinf(hi) ? 0.0 : exp_integral_e1(std::log(hi));
  return exp_integral_e1(std::log(lo)) - upper;
}

struct CounterexampleParams {
  long n_max = 0;
  std::vector<double> a;          // a[n], n >= 2; a[0] = a[1] = 0
  std::vector<double> b_partial;  // b_partial[n] = a_2 + ... + a_n
  double b = 0.0;                 // truncated sum b_{n_max}
  double b_tail_bound = 0.0;      // sum_{n > n_max} a_n <= 1/(n_max log^2 n_max)

  double a_at(long n) const { return a[static_cast<std::size_t>(n)]; }
};

inline CounterexampleParams counterexample_params(long n_max) {
  if (n_max < 3) throw std::invalid_argument("counterexample: n_max must be >= 3");
  CounterexampleParams p;
  p.n_max = n_max;
  const auto size = static_cast<std::size_t>(n_max) + 1;
  p.a.assign(size, 0.0);
  p.b_partial.assign(size, 0.0);
  CompensatedSum acc;
  for (long n = 2; n <= n_max; ++n) {
    const auto i = static_cast<std::size_t>(n);
    p.a[i] = phi_inverse(counterexample_phi_value(n));
    acc.add(p.a[i]);
    p.b_partial[i] = acc.value();
  }
  p.b = p.b_partial.back();
  const double N = static_cast<double>(n_max);
  p.b_tail_bound = 1.0 / (N * std::log(N) * std::log(N));
  return p;
}

// ---------------------------------------------------------------------------
// Tail estimates from the continuous extension a(x) = exp(-u), where
// u - log u = 2t + log t and t = log x. Sums over n > N are estimated by the
// integral over (N + 1/2, inf).

namespace detail {

inline double counterexample_u(double t) {
  return solve_u_minus_log_u(2.0 * t + std::log(t));
}

}  // namespace detail

/// Estimate of sum_{n > N} a_n.
inline double counterexample_tail_a(long N) {
  const double t0 = std::log(static_cast<double>(N) + 0.5);
  // a(x) dx = exp(t - u) dt = exp(-t) / (t u) dt.
  auto g = [](double t) { return std::exp(-t) / (t * detail::counterexample_u(t)); };
  return gauss_legendre_composite(g, t0, t0 + 60.0, 240);
}

/// Estimate of sum_{n > N} n a_n.
inline double counterexample_tail_na(long N) {
  const double t0 = std::log(static_cast<double>(N) + 0.5);
  // x a(x) dx = dt / (t u); with t = t0 / s the integrand is 1/(s u).
  auto g = [t0](double s) { return 1.0 / (s * detail::counterexample_u(t0 / s)); };
  return gauss_legendre_composite(g, 0.0, 1.0, 256);
}

/// Estimate of sum_{n > N} phi(a_n) = sum_{n > N} 1/(n^2 log n).
inline double counterexample_tail_phi(long N) {
  return integral_inv_x2_log(static_cast<double>(N) + 0.5,
                             std::numeric_limits<double>::infinity());
}

// ---------------------------------------------------------------------------
// Scheme

inline SchemePtr build_counterexample_scheme(const CounterexampleParams& p) {
  auto s = std::make_shared<InducingScheme>();
  s->name = "counterexample";
  s->base_lo = 0.0;
  s->base_hi = p.b;
  s->cells.reserve(static_cast<std::size_t>(p.n_max) - 1);
  for (long n = 2; n <= p.n_max; ++n) {
    const auto i = static_cast<std::size_t>(n);
    s->cells.push_back({p.b_partial[i - 1], p.b_partial[i], n});
  }
  s->tail_mass = p.b_tail_bound;
  s->linear_cells = true;
  s->declared = {0.0, 0.5};
  const double b = p.b;
  std::vector<double> a(p.a.begin() + 2, p.a.end());
  s->induced = [cells = s->cells, a, b](std::size_t k, double x) {
    const Cell& c = cells[k];
    const double v = b * (x - c.lo) / c.length();
    return InducedValue{std::clamp(v, 0.0, b), b / a[k]};
  };
  s->preimages = [cells = s->cells](std::span<const double> ys) {
    const double b = cells.back().hi;
    std::vector<std::vector<double>> table(cells.size(), std::vector<double>(ys.size()));
    for (std::size_t k = 0; k < cells.size(); ++k)
      for (std::size_t j = 0; j < ys.size(); ++j)
        table[k][j] = cells[k].lo + ys[j] / b * cells[k].length();
    return table;
  };

  const double log_b = std::log(b);
  s->tails.recurrence = [](long N) { return 1.0 / std::log(static_cast<double>(N)); };
  s->tails.log_jacobian = [log_b](long N) {
    const double n = static_cast<double>(N);
    const double l = std::log(n);
    return 1.0 / (n * l) + std::fabs(log_b) / (n * l * l);
  };
  s->tails.entropy = [](long) { return std::numeric_limits<double>::infinity(); };
  s->tails.divergence_minorant = [log_b](long N) {
    const double n = static_cast<double>(N);
    return std::log(std::log(2.0 * n + 1.0) / std::log(n + 1.0)) -
           std::max(0.0, -log_b) * (1.0 / std::log(n) - 1.0 / std::log(2.0 * n));
  };
  return s;
}

inline SchemePtr build_counterexample_scheme(long n_max) {
  return build_counterexample_scheme(counterexample_params(n_max));
}

// ---------------------------------------------------------------------------
// Jacobian integral (1/rho) int log J_F dnu_0 with nu_0 = m / b, from the
// exact cell data: sum a_n log(b/a_n) / sum n a_n.

struct JacobianIntegral {
  double truncated = 0.0;      // value for the truncated system
  double tail_corrected = 0.0; // estimate for the untruncated system
  double lower = 0.0;          // certified bracket for the untruncated system
  double upper = 0.0;
  double rho = 0.0;            // sum n a_n / b of the truncated system
};

inline JacobianIntegral counterexample_jacobian_integral(const CounterexampleParams& p) {
  std::vector<double> num, den, phis;
  for (long n = 2; n <= p.n_max; ++n) {
    const double an = p.a_at(n);
    num.push_back(an * std::log(p.b / an));
    den.push_back(static_cast<double>(n) * an);
    phis.push_back(counterexample_phi_value(n));
  }
  const double A = pairwise_sum(num);
  const double B = pairwise_sum(den);
  const double S_phi = pairwise_sum(phis);
  JacobianIntegral out;
  out.truncated = A / B;
  out.rho = B / p.b;

  const long N = p.n_max;
  const double Nd = static_cast<double>(N);
  // Untruncated numerator: b log b + sum phi(a_n), with b = b_N + tail.
  const double b_est = p.b + counterexample_tail_a(N);
  const double phi_full_est = S_phi + counterexample_tail_phi(N);
  const double B_est = B + counterexample_tail_na(N);
  out.tail_corrected = (b_est * std::log(b_est) + phi_full_est) / B_est;

  // Brackets: b in [b_N, b_N + 1/(N log^2 N)], sum n a_n tail in [0, 1/log N],
  // sum phi(a_n) tail by the integral test.
  const double b_hi = p.b + p.b_tail_bound;
  const double phi_lo = S_phi + integral_inv_x2_log(Nd + 1.0, std::numeric_limits<double>::infinity());
  const double phi_hi = S_phi + integral_inv_x2_log(Nd, std::numeric_limits<double>::infinity());
  // b log b is decreasing on (0, 1/e) and increasing after; take both ends.
  const double blb_1 = p.b * std::log(p.b), blb_2 = b_hi * std::log(b_hi);
  double blb_lo = std::min(blb_1, blb_2), blb_hi = std::max(blb_1, blb_2);
  constexpr double inv_e = 1.0 / std::numbers::e;
  if (p.b < inv_e && b_hi > inv_e) blb_lo = -inv_e;
  const double num_lo = blb_lo + phi_lo, num_hi = blb_hi + phi_hi;
  const double den_lo = B, den_hi = B + 1.0 / std::log(Nd);
  out.lower = num_lo / den_hi;
  out.upper = num_hi / den_lo;
  return out;
}

// ---------------------------------------------------------------------------
// Four series and their verdicts

enum class SeriesVerdict { convergent, divergent, inconclusive };

inline std::string to_string(SeriesVerdict v) {
  switch (v) {
    case SeriesVerdict::convergent: return "convergent";
    case SeriesVerdict::divergent: return "divergent";
    case SeriesVerdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

struct SeriesRow {
  long N = 0;
  double sum_a = 0.0;          // sum a_n
  double sum_na = 0.0;         // sum n a_n
  double sum_phi = 0.0;        // sum phi(a_n)
  double sum_nphi = 0.0;       // sum n phi(a_n)
  double tail_a = 0.0;         // bound on sum_{n > N} a_n
  double tail_na = 0.0;        // bound on sum_{n > N} n a_n
  double tail_phi = 0.0;       // bound on sum_{n > N} phi(a_n)
  double minorant_nphi = 0.0;  // log log N - log log 2 - 1
  double phi_bracket_lo = 0.0; // integral-test bracket for sum phi(a_n)
  double phi_bracket_hi = 0.0;
};

struct DoublingRow {
  long N = 0;
  double increment = 0.0;  // sum_{N < n <= 2N} n a_n
  double bound = 0.0;      // 1/log N - 1/log 2N
};

struct ConvergenceReport {
  std::vector<SeriesRow> rows;
  std::vector<DoublingRow> doublings;
  SeriesVerdict sum_a = SeriesVerdict::inconclusive;
  SeriesVerdict sum_na = SeriesVerdict::inconclusive;
  SeriesVerdict sum_phi = SeriesVerdict::inconclusive;
  SeriesVerdict sum_nphi = SeriesVerdict::inconclusive;
  bool phi_in_bracket = false;
  bool weighted_tail_holds = false;        // n a_n <= 1/(n log^2 n) for 3 <= n <= N_max
  double nphi_increment = std::numeric_limits<double>::quiet_NaN();  // from 1e3 to 1e6
  double nphi_target = std::log(2.0);
  bool nphi_increment_ok = false;
  bool conclusive = false;

  bool matches_lemma() const {
    return sum_a == SeriesVerdict::convergent && sum_na == SeriesVerdict::convergent &&
           sum_phi == SeriesVerdict::convergent && sum_nphi == SeriesVerdict::divergent;
  }
};

inline ConvergenceReport lemma61_report(std::vector<long> n_list) {
  std::sort(n_list.begin(), n_list.end());
  n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());
  ConvergenceReport rep;
  if (n_list.empty()) return rep;
  const long n_top = std::max(n_list.back(), 3L);
  const auto p = counterexample_params(n_top);

  CompensatedSum s_a, s_na, s_phi, s_nphi;
  std::vector<double> cum_na(static_cast<std::size_t>(n_top) + 1, 0.0);
  std::vector<double> cum_nphi(static_cast<std::size_t>(n_top) + 1, 0.0);
  rep.weighted_tail_holds = true;
  std::size_t next = 0;
  while (next < n_list.size() && n_list[next] < 2) ++next;
  for (long n = 2; n <= n_top; ++n) {
    const double dn = static_cast<double>(n);
    const double an = p.a_at(n);
    const double ln = std::log(dn);
    s_a.add(an);
    s_na.add(dn * an);
    s_phi.add(counterexample_phi_value(n));
    s_nphi.add(1.0 / (dn * ln));
    cum_na[static_cast<std::size_t>(n)] = s_na.value();
    cum_nphi[static_cast<std::size_t>(n)] = s_nphi.value();
    if (n >= 3 && dn * an > 1.0 / (dn * ln * ln)) rep.weighted_tail_holds = false;
    while (next < n_list.size() && n_list[next] == n) {
      SeriesRow r;
      r.N = n;
      r.sum_a = s_a.value();
      r.sum_na = s_na.value();
      r.sum_phi = s_phi.value();
      r.sum_nphi = s_nphi.value();
      r.tail_a = 1.0 / (dn * ln * ln);
      r.tail_na = 1.0 / ln;
      r.tail_phi = integral_inv_x2_log(dn, std::numeric_limits<double>::infinity());
      r.minorant_nphi = std::log(ln) - std::log(std::log(2.0)) - 1.0;
      // Decreasing summand g: int_2^{N+1} g <= sum_{2..N} g <= g(2) + int_2^N g.
      r.phi_bracket_lo = integral_inv_x2_log(2.0, dn + 1.0);
      r.phi_bracket_hi = counterexample_phi_value(2) + integral_inv_x2_log(2.0, dn);
      rep.rows.push_back(r);
      ++next;
    }
  }

  // Successive doublings of N from the top of the list downwards.
  for (long N = n_top / 2; N >= 1000 && 2 * N <= n_top; N /= 2) {
    DoublingRow d;
    d.N = N;
    d.increment = cum_na[static_cast<std::size_t>(2 * N)] - cum_na[static_cast<std::size_t>(N)];
    const double dn = static_cast<double>(N);
    d.bound = 1.0 / std::log(dn) - 1.0 / std::log(2.0 * dn);
    rep.doublings.insert(rep.doublings.begin(), d);
    if (N % 2 != 0) break;
  }

  rep.conclusive = rep.rows.size() >= 3 && n_top >= 1000;
  if (!rep.conclusive) return rep;

  bool a_ok = true, na_ok = true, phi_ok = true, nphi_ok = true;
  for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
    const auto& r0 = rep.rows[i];
    const auto& r1 = rep.rows[i + 1];
    a_ok = a_ok && (r1.sum_a - r0.sum_a) <= r0.tail_a;
    na_ok = na_ok && (r1.sum_na - r0.sum_na) <= r0.tail_na;
    phi_ok = phi_ok && (r1.sum_phi - r0.sum_phi) <= r0.tail_phi;
    // Lower bound by the integral of 1/(x log x) over (N0 + 1, N1 + 1).
    const double minor = std::log(std::log(static_cast<double>(r1.N) + 1.0)) -
                         std::log(std::log(static_cast<double>(r0.N) + 1.0));
    nphi_ok = nphi_ok && (r1.sum_nphi - r0.sum_nphi) >= minor && minor > 0.0;
  }
  for (const auto& r : rep.rows) nphi_ok = nphi_ok && r.sum_nphi >= r.minorant_nphi;
  for (const auto& d : rep.doublings) na_ok = na_ok && d.increment <= d.bound;
  na_ok = na_ok && rep.weighted_tail_holds;
  const auto& last = rep.rows.back();
  rep.phi_in_bracket = last.sum_phi >= last.phi_bracket_lo && last.sum_phi <= last.phi_bracket_hi;
  phi_ok = phi_ok && rep.phi_in_bracket;

  rep.sum_a = a_ok ? SeriesVerdict::convergent : SeriesVerdict::inconclusive;
  rep.sum_na = na_ok ? SeriesVerdict::convergent : SeriesVerdict::inconclusive;
  rep.sum_phi = phi_ok ? SeriesVerdict::convergent : SeriesVerdict::inconclusive;
  rep.sum_nphi = nphi_ok ? SeriesVerdict::divergent : SeriesVerdict::inconclusive;

  if (n_top >= 1'000'000) {
    rep.nphi_increment = cum_nphi[1'000'000] - cum_nphi[1000];
    rep.nphi_target = std::log(std::log(1e6) / std::log(1e3));
    rep.nphi_increment_ok =
        std::fabs(rep.nphi_increment - rep.nphi_target) <= 0.15 * rep.nphi_target;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// The tower laid out on a line

/// Piecewise-affine interval map of the tower: level l of column n is the
/// interval [offset_n + l a_n, offset_n + (l+1) a_n]. Non-top levels
/// translate up by a_n; the top level of column n is cut into n_max - 1
/// pieces, each mapped affinely onto level 0 of one column.
inline PiecewiseMap1D counterexample_interval_map(const CounterexampleParams& p,
                                                  std::vector<double>* offsets = nullptr) {
  std::vector<double> off(static_cast<std::size_t>(p.n_max) + 2, 0.0);
  double acc = 0.0;
  for (long n = 2; n <= p.n_max; ++n) {
    off[static_cast<std::size_t>(n)] = acc;
    acc += static_cast<double>(n) * p.a_at(n);
  }
  off[static_cast<std::size_t>(p.n_max) + 1] = acc;
  const double total = acc;
  std::vector<LinearPiece> pieces;
  for (long n = 2; n <= p.n_max; ++n) {
    const double an = p.a_at(n);
    const double base = off[static_cast<std::size_t>(n)];
    for (long l = 0; l + 1 < n; ++l) {
      const double lo = base + static_cast<double>(l) * an;
      const double hi = (l + 2 == n) ? base + static_cast<double>(n - 1) * an
                                     : base + static_cast<double>(l + 1) * an;
      pieces.push_back({lo, hi, lo + an, hi + an});
    }
    // Top level: pieces proportional to the target columns' base cells.
    const double top_lo = base + static_cast<double>(n - 1) * an;
    const double top_hi = off[static_cast<std::size_t>(n) + 1];
    double cut = top_lo;
    for (long m = 2; m <= p.n_max; ++m) {
      const double am = p.a_at(m);
      double next = (m == p.n_max) ? top_hi
                                   : top_lo + p.b_partial[static_cast<std::size_t>(m)] / p.b * an;
      const double tgt = off[static_cast<std::size_t>(m)];
      if (next > cut) pieces.push_back({cut, next, tgt, tgt + am});
      cut = next;
    }
  }
  if (offsets) *offsets = off;
  auto map = piecewise_linear("counterexample_tower", 0.0, total, std::move(pieces));
  return map;
}

/// Exact value of int log|T'| dx / |layout| over the interval map's branches.
inline double layout_log_derivative_average(const PiecewiseMap1D& map) {
  std::vector<double> parts;
  parts.reserve(map.branches().size());
  for (const auto& b : map.branches()) {
    const double d = std::fabs(b.derivative(0.5 * (b.lo + b.hi)));
    parts.push_back((b.hi - b.lo) * std::log(d));
  }
  return pairwise_sum(parts) / map.length();
}

/// The scheme with the laid-out tower as its phase space: base points are
/// embedded on level 0 and the interval map drives projections. Keep n_max
/// small (the layout has about 1.5 n_max^2 branches).
inline SchemePtr build_counterexample_layout_scheme(const CounterexampleParams& p) {
  auto base = build_counterexample_scheme(p);
  auto s = std::make_shared<InducingScheme>(*base);
  std::vector<double> off;
  s->map = std::make_shared<const PiecewiseMap1D>(counterexample_interval_map(p, &off));
  s->embed = [cells = s->cells, off](double x) {
    auto it = std::upper_bound(cells.begin(), cells.end(), x,
                               [](double v, const Cell& c) { return v < c.lo; });
    const Cell& c = (it == cells.begin()) ? cells.front() : *(it - 1);
    return off[static_cast<std::size_t>(c.return_time)] + (x - c.lo);
  };
  return s;
}

}  // namespace inducing
