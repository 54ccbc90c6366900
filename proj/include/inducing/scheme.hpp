#pragma once

// Gibbs-Markov induced maps F = f^R on a base interval, truncated to finitely
// many cells, with constructions for the map zoo and numerical checks of the
// Markov, chain-rule and bounded-distortion conditions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inducing/maps1d.hpp"
#include "inducing/numeric.hpp"

namespace inducing {

struct Cell {
  double lo;
  double hi;
  long return_time;
  double length() const { return hi - lo; }
};

struct InducedValue {
  double value;     // F(x)
  double jacobian;  // J_F(x) = |(f^R)'(x)|
};

struct DistortionConstants {
  double C;
  double beta;
};

/// Analytic tail information for the cells dropped beyond some N.
/// Each function returns +infinity where no finite bound exists.
struct SchemeTails {
  /// Bound on sum_{R > N} R m(omega).
  std::function<double(long)> recurrence;
  /// Bound on sum_{R > N} int_omega |log J_F| dm.
  std::function<double(long)> log_jacobian;
  /// Bound on sum_{R > N} R int_omega log J_F dm.
  std::function<double(long)> entropy;
  /// Lower bound on the increment S_{2N} - S_N of the partial sums of
  /// R log J_F; empty when the scheme supplies none.
  std::function<double(long)> divergence_minorant;
};

/// A truncated inducing scheme. Cells are sorted, pairwise disjoint and
/// each is mapped by F onto the base. Treat as immutable once built; share
/// through std::shared_ptr<const InducingScheme>.
struct InducingScheme {
  std::string name;
  double base_lo = 0.0;
  double base_hi = 1.0;
  std::vector<Cell> cells;
  double tail_mass = 0.0;
  DistortionConstants declared{1.0, 0.5};
  /// J_F is constant on every cell.
  bool linear_cells = false;
  /// F and J_F on a given cell.
  std::function<InducedValue(std::size_t, double)> induced;
  /// table[k][j] = inverse of F|cell_k at targets[j].
  std::function<std::vector<std::vector<double>>(std::span<const double>)>
      preimages;
  /// The original system and the embedding of the base into its phase space.
  std::shared_ptr<const PiecewiseMap1D> map;
  std::function<double(double)> embed = [](double x) { return x; };
  SchemeTails tails;

  double base_length() const { return base_hi - base_lo; }

  long max_return_time() const {
    long r = 0;
    for (const auto& c : cells) r = std::max(r, c.return_time);
    return r;
  }

  /// Cell holding x (half-open [lo, hi), last cell closed), if covered.
  std::optional<std::size_t> locate(double x) const {
    auto it = std::upper_bound(
        cells.begin(), cells.end(), x,
        [](double v, const Cell& c) { return v < c.lo; });
    if (it == cells.begin()) return std::nullopt;
    const std::size_t i = static_cast<std::size_t>(it - cells.begin()) - 1;
    const Cell& c = cells[i];
    if (x < c.hi || (x == c.hi && i + 1 == cells.size())) return i;
    return std::nullopt;
  }

  InducedValue F(double x) const {
    auto i = locate(x);
    if (!i) throw TruncatedCell(x);
    return induced(*i, x);
  }

  long R(double x) const {
    auto i = locate(x);
    if (!i) throw TruncatedCell(x);
    return cells[*i].return_time;
  }

  /// Sum of cell lengths plus the truncated mass.
  double covered_plus_tail() const {
    std::vector<double> lens;
    lens.reserve(cells.size());
    for (const auto& c : cells) lens.push_back(c.length());
    return pairwise_sum(lens) + tail_mass;
  }
};

using SchemePtr = std::shared_ptr<const InducingScheme>;

// ---------------------------------------------------------------------------
// Trivial scheme for full-branch maps.

inline SchemePtr trivial_scheme(const PiecewiseMap1D& map) {
  constexpr double onto_tol = 1e-8;
  auto s = std::make_shared<InducingScheme>();
  s->name = "trivial(" + map.name() + ")";
  s->base_lo = map.lo();
  s->base_hi = map.hi();
  auto shared = std::make_shared<const PiecewiseMap1D>(map);
  s->map = shared;
  bool linear = true;
  for (const auto& b : map.branches()) {
    auto end_value = [&b](double x, double inward) {
      try {
        return b.value(x);
      } catch (const std::exception&) {
        return b.value(std::nextafter(x, inward));
      }
    };
    double a = end_value(b.lo, b.hi);
    double c = end_value(b.hi, b.lo);
    if (a > c) std::swap(a, c);
    if (std::fabs(a - map.lo()) > onto_tol || std::fabs(c - map.hi()) > onto_tol)
      throw NotFullBranch("trivial_scheme: branch (" + std::to_string(b.lo) +
                          ", " + std::to_string(b.hi) + ") of " + map.name() +
                          " is not onto the phase space");
    const double d0 = b.derivative(b.lo + 0.25 * (b.hi - b.lo));
    for (double t : {0.1, 0.5, 0.9})
      if (b.derivative(b.lo + t * (b.hi - b.lo)) != d0) linear = false;
    s->cells.push_back({b.lo, b.hi, 1});
  }
  s->linear_cells = linear;
  s->declared = linear ? DistortionConstants{0.0, 0.5}
                       : DistortionConstants{10.0, 0.5};
  s->induced = [shared](std::size_t k, double x) {
    const Branch& b = shared->branches()[k];
    // Keep the closed right end hi (circle maps) so endpoint checks see it.
    auto keep = [&](double v) {
      return (v >= shared->lo() && v <= shared->hi()) ? v : shared->wrap(v);
    };
    if (b.value_and_derivative) {
      auto [v, d] = b.value_and_derivative(x);
      return InducedValue{keep(v), std::fabs(d)};
    }
    return InducedValue{keep(b.value(x)), std::fabs(b.derivative(x))};
  };
  s->preimages = [shared](std::span<const double> ys) {
    std::vector<std::vector<double>> table(shared->branches().size());
    for (std::size_t k = 0; k < table.size(); ++k) {
      table[k].reserve(ys.size());
      for (double y : ys) table[k].push_back(shared->inverse(k, y));
    }
    return table;
  };
  s->tails.recurrence = [](long) { return 0.0; };
  s->tails.log_jacobian = [](long) { return 0.0; };
  s->tails.entropy = [](long) { return 0.0; };
  return s;
}

// ---------------------------------------------------------------------------
// First-return scheme of the LSV map on (1/2, 1).

/// Backward orbit of 1/2 under the neutral branch: x_0 = 1, x_1 = 1/2,
/// x_{n+1} = g0^{-1}(x_n). Points of (x_{n+1}, x_n) need n steps of g0 to
/// reach (1/2, 1).
inline std::vector<double> lsv_escape_points(double alpha, long n_max) {
  std::vector<double> xs(static_cast<std::size_t>(n_max) + 1);
  xs[0] = 1.0;
  xs[1] = 0.5;
  for (long n = 1; n < n_max; ++n)
    xs[static_cast<std::size_t>(n) + 1] =
        lsv_left_inverse(alpha, xs[static_cast<std::size_t>(n)]);
  return xs;
}

inline SchemePtr build_lsv_scheme(double alpha, long n_max) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("build_lsv_scheme: alpha must lie in (0,1)");
  if (n_max < 2) throw std::invalid_argument("build_lsv_scheme: n_max < 2");
  auto s = std::make_shared<InducingScheme>();
  s->name = "lsv";
  s->base_lo = 0.5;
  s->base_hi = 1.0;
  auto map = std::make_shared<const PiecewiseMap1D>(lsv_map(alpha));
  s->map = map;
  const auto xs = lsv_escape_points(alpha, n_max);
  // Cell with return time n is g1^{-1}((x_n, x_{n-1})); listed ascending.
  for (long n = n_max; n >= 1; --n) {
    const auto un = static_cast<std::size_t>(n);
    s->cells.push_back({0.5 * (xs[un] + 1.0), 0.5 * (xs[un - 1] + 1.0), n});
  }
  s->tail_mass = 0.5 * xs.back();
  if (s->tail_mass > 0.5)
    throw std::invalid_argument("build_lsv_scheme: n_max too small");
  s->declared = {2.0, 0.5};

  s->induced = [s_cells = s->cells, alpha](std::size_t k, double x) {
    const long r = s_cells[k].return_time;
    double y = 2.0 * x - 1.0;
    double jac = 2.0;
    for (long i = 1; i < r; ++i) {
      jac *= lsv_left_derivative(alpha, y);
      y = lsv_left(alpha, y);
    }
    return InducedValue{y, jac};
  };
  const std::size_t ncells = s->cells.size();
  s->preimages = [alpha, ncells](std::span<const double> ys) {
    std::vector<std::vector<double>> table(ncells,
                                           std::vector<double>(ys.size()));
    for (std::size_t j = 0; j < ys.size(); ++j) {
      double z = ys[j];
      for (std::size_t n = 1; n <= ncells; ++n) {
        table[ncells - n][j] = 0.5 * (z + 1.0);
        if (n < ncells) z = lsv_left_inverse(alpha, z);
      }
    }
    return table;
  };

  // Asymptotics of the backward orbit, x_n ~ A n^{-1/alpha}, calibrated on the
  // computed escape points. Bounds carry a safety factor of 2.
  const double p = 1.0 / alpha;
  auto amplitude = [xs, p, n_max](long N) {
    const long m = std::clamp(N, 1L, n_max);
    return xs[static_cast<std::size_t>(m)] * std::pow(static_cast<double>(m), p);
  };
  s->tails.recurrence = [amplitude, p](long N) {
    const double A = amplitude(N);
    const double n = static_cast<double>(std::max(N, 1L));
    return A * (std::pow(n, 1.0 - p) + std::pow(n, -p) +
                std::pow(n, 1.0 - p) / (p - 1.0));
  };
  s->tails.log_jacobian = [amplitude, p](long N) {
    const double A = amplitude(N);
    const double n = static_cast<double>(std::max(N, 1L));
    const double c = -std::log(A * p) + 1.0;
    return A * p *
           (std::pow(n, -p) / p * (c + (p + 1.0) * std::log(n)) +
            (p + 1.0) * std::pow(n, -p) / (p * p));
  };
  s->tails.entropy = [amplitude, p](long N) {
    const double A = amplitude(N);
    const double n = static_cast<double>(std::max(N, 1L));
    const double c = -std::log(A * p) + 1.0;
    return A * p * std::pow(n, 1.0 - p) / (p - 1.0) *
           (c + (p + 1.0) * std::log(n) + (p + 1.0) / (p - 1.0));
  };
  return s;
}

// ---------------------------------------------------------------------------
// Separation time

struct SeparationTime {
  std::optional<long> value;  // empty when unresolved
  std::string reason;         // "cap" or "truncated" when unresolved
};

/// First n <= cap with F^n(x), F^n(y) in distinct cells.
inline SeparationTime separation_time(const InducingScheme& scheme, double x,
                                      double y, long cap = 60) {
  for (long n = 0; n <= cap; ++n) {
    auto cx = scheme.locate(x);
    auto cy = scheme.locate(y);
    if (!cx || !cy) return {std::nullopt, "truncated"};
    if (*cx != *cy) return {n, ""};
    if (n == cap) break;
    x = scheme.induced(*cx, x).value;
    y = scheme.induced(*cy, y).value;
  }
  return {std::nullopt, "cap"};
}

// ---------------------------------------------------------------------------
// Bounded distortion (Gibbs) check

struct DistortionRow {
  double beta;
  double max_ratio;  // max over pairs of |log J(x)/J(y)| / beta^s
};

struct DistortionReport {
  double fitted_C = std::numeric_limits<double>::quiet_NaN();
  double fitted_beta = std::numeric_limits<double>::quiet_NaN();
  double max_ratio = 0.0;  // max |log J_F(x)/J_F(y)| over all pairs
  long n_pairs = 0;
  long unresolved_count = 0;
  bool verdict = false;  // declared constants hold on every resolved pair
  std::vector<DistortionRow> table;
};

inline std::vector<double> default_beta_grid() {
  return {0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
}

inline DistortionReport check_gibbs_markov(const InducingScheme& scheme,
                                           long n_pairs, std::uint64_t seed,
                                           long cap = 60) {
  constexpr double fit_limit = 1e3;
  const auto grid = default_beta_grid();
  DistortionReport rep;
  rep.n_pairs = n_pairs;
  std::vector<double> worst(grid.size(), 0.0);
  double worst_declared = 0.0;
  Rng rng(seed, 0);
  for (long k = 0; k < n_pairs; ++k) {
    double x;
    std::optional<std::size_t> cell;
    do {
      x = rng.uniform(scheme.base_lo, scheme.base_hi);
      cell = scheme.locate(x);
    } while (!cell);
    const Cell& c = scheme.cells[*cell];
    double y;
    if (k % 2 == 0) {
      y = rng.uniform(c.lo, c.hi);
    } else {
      // Nearby partner: log-uniform offset down to 1e-12 of the cell width.
      const double span = c.length();
      const double off = span * std::pow(10.0, -12.0 * rng.uniform());
      y = (x + off < c.hi) ? x + off : x - off;
      if (!(y >= c.lo && y < c.hi)) y = rng.uniform(c.lo, c.hi);
    }
    const InducedValue fx = scheme.induced(*cell, x);
    const InducedValue fy = scheme.induced(*cell, y);
    const double lr = std::fabs(std::log(fx.jacobian / fy.jacobian));
    rep.max_ratio = std::max(rep.max_ratio, lr);
    const SeparationTime s = separation_time(scheme, fx.value, fy.value, cap);
    if (!s.value) {
      ++rep.unresolved_count;
      continue;
    }
    const double sv = static_cast<double>(*s.value);
    for (std::size_t i = 0; i < grid.size(); ++i)
      worst[i] = std::max(worst[i], lr / std::pow(grid[i], sv));
    worst_declared =
        std::max(worst_declared, lr / std::pow(scheme.declared.beta, sv));
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rep.table.push_back({grid[i], worst[i]});
    if (std::isnan(rep.fitted_beta) && worst[i] < fit_limit) {
      rep.fitted_beta = grid[i];
      rep.fitted_C = worst[i];
    }
  }
  rep.verdict = worst_declared <= scheme.declared.C;
  return rep;
}

/// Largest relative deviation between J_F and the product of |f'| along the
/// R-step orbit, over `samples` points per cell (cells with R <= r_cap).
inline double chain_rule_residual(const InducingScheme& scheme, int samples,
                                  long r_cap = 1000) {
  double worst = 0.0;
  for (std::size_t k = 0; k < scheme.cells.size(); ++k) {
    const Cell& c = scheme.cells[k];
    if (c.return_time > r_cap) continue;
    for (int i = 0; i < samples; ++i) {
      const double x = c.lo + (i + 0.5) / samples * c.length();
      const InducedValue fv = scheme.induced(k, x);
      double y = scheme.embed(x);
      double prod = 1.0;
      try {
        for (long j = 0; j < c.return_time; ++j) {
          const Evaluation e = scheme.map->eval(y);
          prod *= e.derivative;
          y = e.value;
        }
      } catch (const SingularPoint&) {
        continue;
      }
      worst = std::max(worst, std::fabs(prod / fv.jacobian - 1.0));
    }
  }
  return worst;
}

/// Largest distance between F(endpoint) and the matching base endpoint.
inline double markov_onto_residual(const InducingScheme& scheme) {
  double worst = 0.0;
  for (std::size_t k = 0; k < scheme.cells.size(); ++k) {
    const Cell& c = scheme.cells[k];
    // Endpoints on the singular set are replaced by their inner neighbours.
    auto at = [&](double x, double inward) {
      try {
        return scheme.induced(k, x).value;
      } catch (const std::exception&) {
        return scheme.induced(k, std::nextafter(x, inward)).value;
      }
    };
    double a = at(c.lo, c.hi);
    double b = at(c.hi, c.lo);
    if (a > b) std::swap(a, b);
    worst = std::max({worst, std::fabs(a - scheme.base_lo),
                      std::fabs(b - scheme.base_hi)});
  }
  return worst;
}

}  // namespace inducing
