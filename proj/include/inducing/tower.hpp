#pragma once

// Tower extension over an inducing scheme: tower map, its Jacobian, the
// projection to phase space, and the invariant measures nu_0, nu and mu in
// closed-form, Ulam-histogram or orbit-histogram representation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "inducing/maps1d.hpp"
#include "inducing/numeric.hpp"
#include "inducing/scheme.hpp"

namespace inducing {

struct TowerState {
  double x;
  long level;
  friend bool operator==(const TowerState&, const TowerState&) = default;
};

class Tower {
 public:
  explicit Tower(SchemePtr scheme) : scheme_(std::move(scheme)) {
    const long rmax = scheme_->max_return_time();
    // m({R > l}) = sum of lengths of cells with R > l.
    std::vector<double> by_r(static_cast<std::size_t>(rmax) + 1, 0.0);
    for (const auto& c : scheme_->cells)
      by_r[static_cast<std::size_t>(c.return_time)] += c.length();
    level_mass_.assign(static_cast<std::size_t>(rmax), 0.0);
    double acc = 0.0;
    for (long l = rmax - 1; l >= 0; --l) {
      acc += by_r[static_cast<std::size_t>(l) + 1];
      level_mass_[static_cast<std::size_t>(l)] = acc;
    }
  }

  const InducingScheme& scheme() const { return *scheme_; }
  const SchemePtr& scheme_ptr() const { return scheme_; }
  long height() const { return static_cast<long>(level_mass_.size()); }

  /// Lebesgue mass of level l, m({R > l}).
  double level_mass(long l) const {
    return l < height() ? level_mass_[static_cast<std::size_t>(l)] : 0.0;
  }
  const std::vector<double>& level_masses() const { return level_mass_; }

  /// m(Delta) as the sum of level masses.
  double total_mass() const {
    std::vector<double> v(level_mass_.rbegin(), level_mass_.rend());
    return pairwise_sum(v);
  }

  /// m(Delta) as int_{Delta_0} R dm.
  double integral_of_return_time() const {
    std::vector<double> v;
    v.reserve(scheme_->cells.size());
    for (const auto& c : scheme_->cells)
      v.push_back(static_cast<double>(c.return_time) * c.length());
    return pairwise_sum(v);
  }

  TowerState step(TowerState s) const {
    auto k = scheme_->locate(s.x);
    if (!k) throw TruncatedCell(s.x);
    const long r = scheme_->cells[*k].return_time;
    if (s.level < r - 1) return {s.x, s.level + 1};
    return {scheme_->induced(*k, s.x).value, 0};
  }

  double jacobian(TowerState s) const {
    auto k = scheme_->locate(s.x);
    if (!k) throw TruncatedCell(s.x);
    const long r = scheme_->cells[*k].return_time;
    if (s.level < r - 1) return 1.0;
    return scheme_->induced(*k, s.x).jacobian;
  }

  /// pi(x, l) = f^l(embed(x)). Level 0 needs no cell, so images of returns
  /// that land in the truncated tail still project.
  double project(TowerState s) const {
    if (s.level > 0) {
      auto k = scheme_->locate(s.x);
      if (!k) throw TruncatedCell(s.x);
      if (s.level >= scheme_->cells[*k].return_time)
        throw std::out_of_range("project: level above the column height");
    }
    double y = scheme_->embed(s.x);
    for (long i = 0; i < s.level; ++i) y = scheme_->map->eval(y).value;
    return y;
  }

 private:
  SchemePtr scheme_;
  std::vector<double> level_mass_;
};

// ---------------------------------------------------------------------------
// Measures

enum class MeasureKind { density, ulam, orbit, empirical };

inline std::string to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::density: return "density";
    case MeasureKind::ulam: return "ulam";
    case MeasureKind::orbit: return "orbit";
    case MeasureKind::empirical: return "empirical";
  }
  return "unknown";
}

/// A probability measure on an interval. Histogram kinds (ulam, orbit) carry
/// bin edges and masses and are read as piecewise-constant densities.
struct MeasureRep {
  MeasureKind kind = MeasureKind::density;
  double lo = 0.0;
  double hi = 1.0;
  std::function<double(double)> density;  // kind == density
  std::vector<double> edges;              // histogram kinds
  std::vector<double> masses;
  std::vector<double> points;             // kind == empirical
  std::vector<double> weights;
  double rho = 1.0;
  long n_max = 0;
  double tail_mass = 0.0;

  bool is_histogram() const {
    return kind == MeasureKind::ulam || kind == MeasureKind::orbit;
  }

  double total_mass() const {
    if (is_histogram()) return pairwise_sum(masses);
    if (kind == MeasureKind::empirical) return pairwise_sum(weights);
    return gauss_legendre_composite(density, lo, hi, 256);
  }

  /// Density at x (histogram or closed form).
  double density_at(double x) const {
    if (kind == MeasureKind::density) return density(x);
    if (is_histogram()) {
      auto it = std::upper_bound(edges.begin(), edges.end(), x);
      if (it == edges.begin() || it == edges.end()) {
        if (x == edges.back()) it = edges.end() - 1;
        else return 0.0;
      }
      const std::size_t i = static_cast<std::size_t>(it - edges.begin()) - 1;
      return masses[i] / (edges[i + 1] - edges[i]);
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  /// Mass of [a, b].
  double mass_on(double a, double b) const {
    a = std::max(a, lo);
    b = std::min(b, hi);
    if (!(b > a)) return 0.0;
    if (kind == MeasureKind::density) return gauss_legendre_composite(density, a, b, 4);
    if (is_histogram()) {
      double s = 0.0;
      auto i0 = static_cast<std::size_t>(
          std::max<std::ptrdiff_t>(0, std::upper_bound(edges.begin(), edges.end(), a) - edges.begin() - 1));
      for (std::size_t i = i0; i + 1 < edges.size() && edges[i] < b; ++i) {
        const double ov = std::min(b, edges[i + 1]) - std::max(a, edges[i]);
        if (ov > 0.0) s += masses[i] * ov / (edges[i + 1] - edges[i]);
      }
      return s;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
      if (points[i] >= a && points[i] < b) s += weights[i];
    return s;
  }

  /// Integral of g against the measure. Histogram kinds use a 4-point
  /// Gauss-Legendre rule on each bin, split at `breaks` (sorted) so the
  /// integrand is smooth on every piece.
  template <class G>
  double integrate(G&& g, std::span<const double> breaks = {}) const {
    std::vector<double> parts;
    if (kind == MeasureKind::empirical) {
      for (std::size_t i = 0; i < points.size(); ++i) parts.push_back(weights[i] * g(points[i]));
      return pairwise_sum(parts);
    }
    auto piece = [&](double a, double b, double dens) {
      if (b > a) parts.push_back(dens * gauss_legendre4(g, a, b));
    };
    if (kind == MeasureKind::density) {
      std::vector<double> cuts{lo};
      for (double c : breaks)
        if (c > lo && c < hi) cuts.push_back(c);
      cuts.push_back(hi);
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        parts.push_back(gauss_legendre4([&](double x) { return density(x) * g(x); },
                                        cuts[i], cuts[i + 1]));
      return pairwise_sum(parts);
    }
    auto br = breaks.begin();
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      const double dens = masses[i] / (edges[i + 1] - edges[i]);
      double a = edges[i];
      while (br != breaks.end() && *br <= a) ++br;
      while (br != breaks.end() && *br < edges[i + 1]) {
        piece(a, *br, dens);
        a = *br;
        ++br;
      }
      piece(a, edges[i + 1], dens);
    }
    return pairwise_sum(parts);
  }
};

inline std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  e.back() = hi;
  return e;
}

inline std::vector<double> log_edges(double lo, double hi, std::size_t bins) {
  std::vector<double> e(bins + 1);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i <= bins; ++i)
    e[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(bins));
  e.front() = lo;
  e.back() = hi;
  return e;
}

/// Sum of |p_i - q_i| over two histograms on the same bins.
inline double l1_distance(std::span<const double> p, std::span<const double> q) {
  std::vector<double> d(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) d[i] = std::fabs(p[i] - q[i]);
  return pairwise_sum(d);
}

// ---------------------------------------------------------------------------
// Ulam discretisation of a transfer operator on uniform bins.

struct UlamOptions {
  double tol = 1e-12;        // L1 increment stopping rule
  long max_iterations = 100000;
};

class UlamOperator {
 public:
  UlamOperator(double lo, double hi, std::size_t bins)
      : lo_(lo), hi_(hi), rows_(bins) {}

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t bins() const { return rows_.size(); }
  std::vector<double> edges() const { return uniform_edges(lo_, hi_, bins()); }
  const std::vector<std::pair<std::uint32_t, double>>& row(std::size_t i) const {
    return rows_[i];
  }
  std::vector<std::vector<std::pair<std::uint32_t, double>>>& rows() { return rows_; }

  /// One application q = p P of the transition matrix to bin masses p.
  std::vector<double> apply(std::span<const double> p) const {
    std::vector<double> q(bins(), 0.0);
    for (std::size_t i = 0; i < bins(); ++i) {
      if (p[i] == 0.0) continue;
      for (const auto& [j, w] : rows_[i]) q[j] += p[i] * w;
    }
    return q;
  }

  /// Fixed vector by power iteration from `start` (uniform if empty).
  std::vector<double> fixed_point(const UlamOptions& opt = {},
                                  std::vector<double> start = {},
                                  long* iterations = nullptr) const {
    std::vector<double> p = start.empty()
                                ? std::vector<double>(bins(), 1.0 / bins())
                                : std::move(start);
    const double s0 = pairwise_sum(p);
    for (double& v : p) v /= s0;
    for (long it = 1; it <= opt.max_iterations; ++it) {
      auto q = apply(p);
      const double s = pairwise_sum(q);
      for (double& v : q) v /= s;
      const double diff = l1_distance(p, q);
      p = std::move(q);
      if (diff < opt.tol) {
        if (iterations) *iterations = it;
        return p;
      }
    }
    throw NonConvergence("Ulam power iteration did not reach the L1 tolerance");
  }

  /// Convex combination sum_k w_k P_k of operators on the same bins.
  static UlamOperator mixture(const std::vector<std::pair<double, const UlamOperator*>>& parts) {
    const UlamOperator& first = *parts.front().second;
    UlamOperator out(first.lo_, first.hi_, first.bins());
    std::vector<double> dense(first.bins(), 0.0);
    std::vector<std::uint32_t> touched;
    for (std::size_t i = 0; i < first.bins(); ++i) {
      touched.clear();
      for (const auto& [w, op] : parts)
        for (const auto& [j, v] : op->rows_[i]) {
          if (dense[j] == 0.0) touched.push_back(j);
          dense[j] += w * v;
        }
      std::sort(touched.begin(), touched.end());
      for (auto j : touched) {
        out.rows_[i].push_back({j, dense[j]});
        dense[j] = 0.0;
      }
    }
    return out;
  }

 private:
  double lo_;
  double hi_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows_;
};

namespace detail {

/// Row accumulator that switches to dense storage once a row fills up.
class RowAccumulator {
 public:
  explicit RowAccumulator(std::size_t width) : width_(width) {}

  void add(std::uint32_t j, double w) {
    if (!dense_.empty()) {
      dense_[j] += w;
      return;
    }
    if (!sparse_.empty() && sparse_.back().first == j) {
      sparse_.back().second += w;
      return;
    }
    sparse_.push_back({j, w});
    if (sparse_.size() > width_ / 4 + 16) densify();
  }

  std::vector<std::pair<std::uint32_t, double>> finish() {
    std::vector<std::pair<std::uint32_t, double>> out;
    if (!dense_.empty()) {
      for (std::size_t j = 0; j < width_; ++j)
        if (dense_[j] != 0.0) out.push_back({static_cast<std::uint32_t>(j), dense_[j]});
      return out;
    }
    std::sort(sparse_.begin(), sparse_.end(),
              [](auto& a, auto& b) { return a.first < b.first; });
    for (const auto& e : sparse_) {
      if (!out.empty() && out.back().first == e.first)
        out.back().second += e.second;
      else
        out.push_back(e);
    }
    return out;
  }

 private:
  void densify() {
    dense_.assign(width_, 0.0);
    for (const auto& [j, w] : sparse_) dense_[j] += w;
    sparse_.clear();
    sparse_.shrink_to_fit();
  }

  std::size_t width_;
  std::vector<std::pair<std::uint32_t, double>> sparse_;
  std::vector<double> dense_;
};

}  // namespace detail

/// Ulam matrix of the induced map F on `bins` uniform bins of the base:
/// P_ij = m(B_i intersect F^{-1} B_j) / m(B_i), computed exactly from the
/// inverse branches of F.
inline UlamOperator build_ulam(const InducingScheme& scheme, std::size_t bins) {
  UlamOperator op(scheme.base_lo, scheme.base_hi, bins);
  const auto edges = op.edges();
  const double h = (scheme.base_hi - scheme.base_lo) / static_cast<double>(bins);
  const auto table = scheme.preimages(edges);
  std::vector<detail::RowAccumulator> acc(bins, detail::RowAccumulator(bins));
  auto bin_of = [&](double x) {
    auto i = static_cast<long>(std::floor((x - scheme.base_lo) / h));
    return static_cast<std::size_t>(std::clamp(i, 0L, static_cast<long>(bins) - 1));
  };
  for (std::size_t k = 0; k < scheme.cells.size(); ++k) {
    const auto& pre = table[k];
    for (std::size_t j = 0; j < bins; ++j) {
      double a = pre[j], b = pre[j + 1];
      if (a > b) std::swap(a, b);
      if (!(b > a)) continue;
      for (std::size_t i = bin_of(a); i < bins && edges[i] < b; ++i) {
        const double ov = std::min(b, edges[i + 1]) - std::max(a, edges[i]);
        if (ov > 0.0) acc[i].add(static_cast<std::uint32_t>(j), ov / h);
      }
    }
  }
  for (std::size_t i = 0; i < bins; ++i) op.rows()[i] = acc[i].finish();
  return op;
}

// ---------------------------------------------------------------------------
// Invariant measure of the induced map

struct BaseMethod {
  enum class Kind { exact_linear, ulam, orbit } kind = Kind::ulam;
  std::size_t bins = 4096;
  long orbit_length = 10'000'000;
  long burn_in = 10'000;
  std::uint64_t seed = 1;

  static BaseMethod exact_linear() { return {Kind::exact_linear}; }
  static BaseMethod ulam(std::size_t bins) { return {Kind::ulam, bins}; }
  static BaseMethod orbit(long n, std::uint64_t seed, std::size_t bins = 4096) {
    BaseMethod m{Kind::orbit, bins, n};
    m.seed = seed;
    return m;
  }
};

inline MeasureRep base_invariant_measure(const InducingScheme& scheme,
                                         const BaseMethod& method,
                                         const UlamOptions& opt = {}) {
  MeasureRep nu;
  nu.lo = scheme.base_lo;
  nu.hi = scheme.base_hi;
  nu.n_max = scheme.max_return_time();
  nu.tail_mass = scheme.tail_mass;
  switch (method.kind) {
    case BaseMethod::Kind::exact_linear: {
      if (!scheme.linear_cells)
        throw std::invalid_argument(
            "base_invariant_measure: exact-linear needs J_F constant per cell");
      const double len = scheme.base_length();
      nu.kind = MeasureKind::density;
      nu.density = [len](double) { return 1.0 / len; };
      return nu;
    }
    case BaseMethod::Kind::ulam: {
      const auto op = build_ulam(scheme, method.bins);
      nu.kind = MeasureKind::ulam;
      nu.edges = op.edges();
      nu.masses = op.fixed_point(opt);
      return nu;
    }
    case BaseMethod::Kind::orbit: {
      nu.kind = MeasureKind::orbit;
      nu.edges = uniform_edges(scheme.base_lo, scheme.base_hi, method.bins);
      std::vector<double> counts(method.bins, 0.0);
      Rng rng(method.seed, 0);
      const double h = scheme.base_length() / static_cast<double>(method.bins);
      auto fresh = [&] {
        for (;;) {
          const double x = rng.uniform(scheme.base_lo, scheme.base_hi);
          if (scheme.locate(x)) return x;
        }
      };
      double x = fresh();
      for (long n = -method.burn_in; n < method.orbit_length; ++n) {
        auto k = scheme.locate(x);
        if (!k) {
          x = fresh();
          k = scheme.locate(x);
        }
        if (n >= 0) {
          auto b = static_cast<long>((x - scheme.base_lo) / h);
          counts[static_cast<std::size_t>(std::clamp(b, 0L, static_cast<long>(method.bins) - 1))] += 1.0;
        }
        x = scheme.induced(*k, x).value;
      }
      const double total = static_cast<double>(method.orbit_length);
      for (double& c : counts) c /= total;
      nu.masses = std::move(counts);
      return nu;
    }
  }
  return nu;
}

// ---------------------------------------------------------------------------
// Cell-resolved integrals against nu_0

/// int_{cell_k} g dnu_0 for every cell, with g smooth inside cells.
template <class G>
std::vector<double> cell_integrals(const InducingScheme& scheme, const MeasureRep& nu0,
                                   G&& g) {
  std::vector<double> out(scheme.cells.size(), 0.0);
  if (nu0.kind == MeasureKind::density || nu0.kind == MeasureKind::empirical) {
    for (std::size_t k = 0; k < scheme.cells.size(); ++k) {
      const Cell& c = scheme.cells[k];
      if (nu0.kind == MeasureKind::density) {
        out[k] = gauss_legendre4([&](double x) { return nu0.density(x) * g(k, x); }, c.lo, c.hi);
      } else {
        double s = 0.0;
        for (std::size_t i = 0; i < nu0.points.size(); ++i)
          if (nu0.points[i] >= c.lo && nu0.points[i] < c.hi) s += nu0.weights[i] * g(k, nu0.points[i]);
        out[k] = s;
      }
    }
    return out;
  }
  // Histogram: sweep bins and cells together.
  std::size_t i = 0;
  for (std::size_t k = 0; k < scheme.cells.size(); ++k) {
    const Cell& c = scheme.cells[k];
    while (i + 1 < nu0.edges.size() && nu0.edges[i + 1] <= c.lo) ++i;
    double s = 0.0;
    for (std::size_t j = i; j + 1 < nu0.edges.size() && nu0.edges[j] < c.hi; ++j) {
      const double a = std::max(c.lo, nu0.edges[j]);
      const double b = std::min(c.hi, nu0.edges[j + 1]);
      if (!(b > a)) continue;
      const double dens = nu0.masses[j] / (nu0.edges[j + 1] - nu0.edges[j]);
      s += dens * gauss_legendre4([&](double x) { return g(k, x); }, a, b);
    }
    out[k] = s;
  }
  return out;
}

inline std::vector<double> cell_masses(const InducingScheme& scheme, const MeasureRep& nu0) {
  return cell_integrals(scheme, nu0, [](std::size_t, double) { return 1.0; });
}

// ---------------------------------------------------------------------------
// Tower-invariant measure nu

struct TowerMeasure {
  MeasureRep base;                 // nu_0
  std::vector<double> cell_mass;   // nu_0(omega_k)
  std::vector<double> level_mass;  // nu(Delta_l)
  double rho = 1.0;                // sum_j nu_0{R > j}
  double rho_by_return_time = 1.0; // int R dnu_0
  double rho_half = 1.0;           // partial sum of nu_0{R > j} over j < n_max/2
  bool rho_converged = true;
};

inline TowerMeasure tower_invariant_measure(const Tower& tower, const MeasureRep& nu0) {
  const InducingScheme& s = tower.scheme();
  TowerMeasure t;
  t.base = nu0;
  t.cell_mass = cell_masses(s, nu0);
  const long h = tower.height();
  // nu_0{R > j} for each j.
  std::vector<double> by_r(static_cast<std::size_t>(h) + 1, 0.0);
  std::vector<double> r_weighted;
  for (std::size_t k = 0; k < s.cells.size(); ++k) {
    by_r[static_cast<std::size_t>(s.cells[k].return_time)] += t.cell_mass[k];
    r_weighted.push_back(static_cast<double>(s.cells[k].return_time) * t.cell_mass[k]);
  }
  std::vector<double> above(static_cast<std::size_t>(h), 0.0);
  double acc = 0.0;
  for (long j = h - 1; j >= 0; --j) {
    acc += by_r[static_cast<std::size_t>(j) + 1];
    above[static_cast<std::size_t>(j)] = acc;
  }
  std::vector<double> rev(above.rbegin(), above.rend());
  t.rho = pairwise_sum(rev);
  t.rho_by_return_time = pairwise_sum(r_weighted);
  std::vector<double> half(above.begin(), above.begin() + h / 2);
  std::reverse(half.begin(), half.end());
  t.rho_half = pairwise_sum(half);
  // Cauchy test on the partial sums of rho against the scheme's analytic tail.
  const double tail = s.tails.recurrence ? s.tails.recurrence(std::max(1L, h / 2)) : 0.0;
  t.rho_converged = std::isfinite(t.rho) && (t.rho - t.rho_half) <= std::max(1e-6, tail);
  t.level_mass.resize(above.size());
  for (std::size_t l = 0; l < above.size(); ++l) t.level_mass[l] = above[l] / t.rho;
  t.base.rho = t.rho;
  return t;
}

/// Level masses of nu obtained by pushing each nu_0|{R > j} up j floors of
/// the tower, one cell at a time, and normalising by the total.
inline std::vector<double> tower_level_masses_by_pushforward(const Tower& tower,
                                                             const MeasureRep& nu0) {
  const InducingScheme& s = tower.scheme();
  const auto cm = cell_masses(s, nu0);
  std::vector<std::vector<double>> per_level(static_cast<std::size_t>(tower.height()));
  for (std::size_t k = 0; k < s.cells.size(); ++k)
    for (long j = 0; j < s.cells[k].return_time; ++j)
      per_level[static_cast<std::size_t>(j)].push_back(cm[k]);
  std::vector<double> out(per_level.size());
  std::vector<double> totals;
  for (std::size_t l = 0; l < per_level.size(); ++l) {
    out[l] = pairwise_sum(per_level[l]);
    totals.push_back(out[l]);
  }
  std::reverse(totals.begin(), totals.end());
  const double total = pairwise_sum(totals);
  for (double& v : out) v /= total;
  return out;
}

// ---------------------------------------------------------------------------
// Projected measure mu = pi_* nu

/// Histogram of mu on the given phase-space edges. Each (bin, cell) piece of
/// nu_0 is cut into `subpieces` equal parts; every part is carried up its
/// column by mapping its endpoints, and its mass is spread uniformly over the
/// image interval on each level.
inline MeasureRep pushforward_measure(const Tower& tower, const TowerMeasure& nu,
                                      std::span<const double> edges, int subpieces = 8) {
  const InducingScheme& s = tower.scheme();
  const PiecewiseMap1D& f = *s.map;
  std::vector<double> mass(edges.size() - 1, 0.0);
  const long nb = static_cast<long>(mass.size());
  auto bin_of = [&](double y) {
    long i = static_cast<long>(std::upper_bound(edges.begin(), edges.end(), y) - edges.begin()) - 1;
    return std::clamp(i, 0L, nb - 1);
  };
  auto deposit = [&](double a, double b, double w) {
    if (a > b) std::swap(a, b);
    const long i0 = bin_of(a), i1 = bin_of(b);
    if (i0 == i1 || !(b > a)) {
      mass[static_cast<std::size_t>(i0)] += w;
      return;
    }
    for (long i = i0; i <= i1; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const double ov = std::min(b, edges[u + 1]) - std::max(a, edges[u]);
      if (ov > 0.0) mass[u] += w * ov / (b - a);
    }
  };
  std::vector<double> ys(static_cast<std::size_t>(subpieces) + 1);
  auto carry = [&](std::size_t k, double a, double b, double piece_mass) {
    const long r = s.cells[k].return_time;
    const double w = piece_mass / subpieces / nu.rho;
    for (int q = 0; q <= subpieces; ++q) ys[static_cast<std::size_t>(q)] = s.embed(a + (b - a) * q / subpieces);
    for (long l = 0; l < r; ++l) {
      for (int q = 0; q < subpieces; ++q)
        deposit(ys[static_cast<std::size_t>(q)], ys[static_cast<std::size_t>(q) + 1], w);
      if (l + 1 == r) break;
      try {
        for (double& y : ys) y = f.eval(y).value;
      } catch (const SingularPoint&) {
        // An endpoint sits on the singular set: finish the column with the
        // midpoints, which stay inside the branch.
        for (int q = 0; q < subpieces; ++q) {
          double y = s.embed(a + (b - a) * (q + 0.5) / subpieces);
          for (long j = 0; j <= l; ++j) y = f.eval(y).value;
          for (long j = l + 1; j < r; ++j) {
            mass[static_cast<std::size_t>(bin_of(y))] += w;
            if (j + 1 < r) y = f.eval(y).value;
          }
        }
        return;
      }
    }
  };
  const MeasureRep& nu0 = nu.base;
  if (nu0.is_histogram()) {
    std::size_t i = 0;
    for (std::size_t k = 0; k < s.cells.size(); ++k) {
      const Cell& c = s.cells[k];
      while (i + 1 < nu0.edges.size() && nu0.edges[i + 1] <= c.lo) ++i;
      for (std::size_t j = i; j + 1 < nu0.edges.size() && nu0.edges[j] < c.hi; ++j) {
        const double a = std::max(c.lo, nu0.edges[j]);
        const double b = std::min(c.hi, nu0.edges[j + 1]);
        if (b > a)
          carry(k, a, b, nu0.masses[j] * (b - a) / (nu0.edges[j + 1] - nu0.edges[j]));
      }
    }
  } else {
    const auto cm = cell_masses(s, nu0);
    for (std::size_t k = 0; k < s.cells.size(); ++k) carry(k, s.cells[k].lo, s.cells[k].hi, cm[k]);
  }
  MeasureRep mu;
  mu.kind = MeasureKind::ulam;
  mu.lo = edges.front();
  mu.hi = edges.back();
  mu.edges.assign(edges.begin(), edges.end());
  mu.masses = std::move(mass);
  mu.rho = nu.rho;
  mu.n_max = s.max_return_time();
  mu.tail_mass = s.tail_mass;
  return mu;
}

/// L1 residual |mu P - mu| of a histogram under an Ulam operator on the
/// same uniform bins.
inline double invariance_residual(const UlamOperator& op, std::span<const double> masses) {
  const auto q = op.apply(masses);
  return l1_distance(q, masses);
}

}  // namespace inducing
