#pragma once

// Entropy and Lyapunov estimators: the Jacobian (Rohlin) integral over the
// induced map, Birkhoff averages of log|f'|, block entropies of symbolic
// itineraries, and the partial-sum test for int R log J_F dm.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "inducing/maps1d.hpp"
#include "inducing/numeric.hpp"
#include "inducing/scheme.hpp"
#include "inducing/tower.hpp"

namespace inducing {

enum class Verdict { finite, divergent, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::finite: return "finite";
    case Verdict::divergent: return "divergent";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

struct EvidenceRow {
  long N = 0;
  double partial_sum = 0.0;
  double increment = 0.0;  // S_N - S_{N/2}
  double bound = 0.0;      // tail bound (finite) or minorant (divergent)
};

struct EstimatorReport {
  double value = std::numeric_limits<double>::quiet_NaN();
  double std_error = 0.0;
  std::string method;
  long samples = 0;
  double truncation_bound = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::vector<EvidenceRow> evidence;
  long resampled = 0;  // orbit restarts after singular hits
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Jacobian integral over the base

struct JacobianSide {
  double integral = 0.0;  // int log J_F dnu_0
  double rho = 1.0;       // int R dnu_0
  double value = 0.0;     // integral / rho
};

inline JacobianSide jacobian_integral(const InducingScheme& scheme, const MeasureRep& nu0) {
  const auto logj = cell_integrals(scheme, nu0, [&](std::size_t k, double x) {
    return std::log(scheme.induced(k, x).jacobian);
  });
  const auto mass = cell_masses(scheme, nu0);
  std::vector<double> rw(mass.size());
  for (std::size_t k = 0; k < mass.size(); ++k)
    rw[k] = static_cast<double>(scheme.cells[k].return_time) * mass[k];
  JacobianSide out;
  out.integral = pairwise_sum(logj) / pairwise_sum(mass);
  out.rho = pairwise_sum(rw) / pairwise_sum(mass);
  out.value = out.integral / out.rho;
  return out;
}

/// int log J_T dnu summed level by level over the tower: J_T is 1 except on
/// the top level of each column, where nu restricted to it is nu_0/rho on
/// the cell.
inline double tower_log_jacobian_integral(const Tower& tower, const TowerMeasure& nu) {
  const InducingScheme& s = tower.scheme();
  std::vector<std::vector<double>> by_level(static_cast<std::size_t>(tower.height()));
  const auto logj = cell_integrals(s, nu.base, [&](std::size_t k, double x) {
    return std::log(tower.jacobian({x, s.cells[k].return_time - 1}));
  });
  for (std::size_t k = 0; k < s.cells.size(); ++k)
    by_level[static_cast<std::size_t>(s.cells[k].return_time - 1)].push_back(logj[k] / nu.rho);
  std::vector<double> levels;
  for (auto& v : by_level) levels.push_back(pairwise_sum(v));
  return pairwise_sum(levels);
}

// ---------------------------------------------------------------------------
// Finiteness of int R log J_F dm

/// Partial sums S_N = sum over cells with R <= N of int R log J_F dm at
/// N = n_max/8, n_max/4, n_max/2, n_max.
inline EstimatorReport finiteness_criterion(const InducingScheme& scheme) {
  EstimatorReport rep;
  rep.method = "partial_sums";
  const long n_max = scheme.max_return_time();
  std::vector<double> per_r(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (std::size_t k = 0; k < scheme.cells.size(); ++k) {
    const Cell& c = scheme.cells[k];
    const double v = gauss_legendre4(
        [&](double x) { return std::log(scheme.induced(k, x).jacobian); }, c.lo, c.hi);
    per_r[static_cast<std::size_t>(c.return_time)] += static_cast<double>(c.return_time) * v;
  }
  std::vector<long> checkpoints;
  for (long d : {8L, 4L, 2L, 1L}) {
    const long N = std::max(1L, n_max / d);
    if (checkpoints.empty() || checkpoints.back() != N) checkpoints.push_back(N);
  }
  std::vector<double> prefix(per_r.size(), 0.0);
  {
    CompensatedSum acc;
    for (std::size_t i = 0; i < per_r.size(); ++i) {
      acc.add(per_r[i]);
      prefix[i] = acc.value();
    }
  }
  rep.samples = static_cast<long>(scheme.cells.size());
  bool all_below = true, all_above = true;
  bool have_increment = false;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    EvidenceRow row;
    row.N = checkpoints[i];
    row.partial_sum = prefix[static_cast<std::size_t>(row.N)];
    if (i > 0) {
      const long prev = checkpoints[i - 1];
      row.increment = row.partial_sum - prefix[static_cast<std::size_t>(prev)];
      const double tail = scheme.tails.entropy ? scheme.tails.entropy(prev) : 0.0;
      const bool below = std::isfinite(tail) && row.increment <= tail;
      bool above = false;
      if (scheme.tails.divergence_minorant) {
        const double minor = scheme.tails.divergence_minorant(prev);
        above = minor > 0.0 && row.increment >= minor;
        row.bound = below ? tail : minor;
      } else {
        row.bound = tail;
      }
      all_below = all_below && below;
      all_above = all_above && above;
      have_increment = true;
    }
    rep.evidence.push_back(row);
  }
  rep.value = rep.evidence.back().partial_sum;
  if (n_max == 1) {
    // Single return time: the sum is the full integral.
    rep.verdict = std::isfinite(rep.value) ? Verdict::finite : Verdict::divergent;
    return rep;
  }
  if (!have_increment) return rep;
  if (all_above && rep.evidence.size() >= 4) {
    rep.verdict = Verdict::divergent;
    rep.value = std::numeric_limits<double>::infinity();
  } else if (all_below) {
    rep.verdict = Verdict::finite;
    rep.truncation_bound = scheme.tails.entropy ? scheme.tails.entropy(n_max) : 0.0;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Rohlin side

inline double max_density(const MeasureRep& nu0) {
  if (nu0.is_histogram()) {
    double d = 0.0;
    for (std::size_t i = 0; i < nu0.masses.size(); ++i)
      d = std::max(d, nu0.masses[i] / (nu0.edges[i + 1] - nu0.edges[i]));
    return d;
  }
  if (nu0.kind == MeasureKind::density) {
    double d = 0.0;
    for (int i = 0; i <= 1024; ++i) d = std::max(d, nu0.density(nu0.lo + (nu0.hi - nu0.lo) * i / 1024.0));
    return d;
  }
  return std::numeric_limits<double>::infinity();
}

/// (1/rho) int log J_F dnu_0. Refuses (NaN, divergent) when the finiteness
/// criterion does not return finite. The standard error is the change
/// against `coarse` (the same estimator on half the bins) when given.
inline EstimatorReport rohlin_entropy(const InducingScheme& scheme, const MeasureRep& nu0,
                                      const MeasureRep* coarse = nullptr,
                                      const EstimatorReport* finiteness = nullptr) {
  EstimatorReport rep;
  rep.method = "rohlin_" + to_string(nu0.kind);
  const EstimatorReport fin = finiteness ? *finiteness : finiteness_criterion(scheme);
  rep.evidence = fin.evidence;
  rep.verdict = fin.verdict;
  if (fin.verdict != Verdict::finite) {
    rep.warnings.push_back("finiteness criterion is " + to_string(fin.verdict) +
                           "; no finite entropy value reported");
    return rep;
  }
  const JacobianSide side = jacobian_integral(scheme, nu0);
  rep.value = side.value;
  rep.samples = nu0.is_histogram() ? static_cast<long>(nu0.masses.size())
                                   : static_cast<long>(scheme.cells.size());
  if (coarse) rep.std_error = std::fabs(side.value - jacobian_integral(scheme, *coarse).value);
  const long n_max = scheme.max_return_time();
  const double D = max_density(nu0);
  const double lj = scheme.tails.log_jacobian ? scheme.tails.log_jacobian(n_max) : 0.0;
  const double rt = scheme.tails.recurrence ? scheme.tails.recurrence(n_max) : 0.0;
  rep.truncation_bound = (D * lj + std::fabs(side.value) * D * rt) / side.rho;
  return rep;
}

// ---------------------------------------------------------------------------
// Birkhoff averages

struct OrbitOptions {
  long n_orbits = 64;
  long n_iters = 1'000'000;
  long burn_in = 10'000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: one per core; never changes results
};

/// Average of log|f'| along orbits from Lebesgue-random starts. A start that
/// hits the clearance of the singular set is replaced by a fresh uniform
/// point, and the replacement is counted.
inline EstimatorReport lyapunov_birkhoff(const PiecewiseMap1D& map, const OrbitOptions& opt) {
  EstimatorReport rep;
  rep.method = "birkhoff";
  std::vector<double> per_orbit(static_cast<std::size_t>(opt.n_orbits));
  std::vector<long> resampled(static_cast<std::size_t>(opt.n_orbits), 0);
  parallel_for(opt.n_orbits, opt.threads, [&](long k) {
    Rng rng(opt.seed, static_cast<std::uint64_t>(k));
    double x = rng.uniform(map.lo(), map.hi());
    CompensatedSum sum;
    for (long i = -opt.burn_in; i < opt.n_iters; ++i) {
      Evaluation e;
      for (;;) {
        try {
          e = map.eval(x);
          break;
        } catch (const SingularPoint&) {
          ++resampled[static_cast<std::size_t>(k)];
          x = rng.uniform(map.lo(), map.hi());
        }
      }
      if (i >= 0) sum.add(std::log(e.derivative));
      x = e.value;
    }
    per_orbit[static_cast<std::size_t>(k)] = sum.value() / static_cast<double>(opt.n_iters);
  });
  const MeanStats st = mean_and_error(per_orbit);
  rep.value = st.mean;
  rep.std_error = st.std_error;
  rep.samples = opt.n_orbits * opt.n_iters;
  rep.resampled = std::accumulate(resampled.begin(), resampled.end(), 0L);
  rep.verdict = std::isfinite(rep.value) ? Verdict::finite : Verdict::inconclusive;
  return rep;
}

/// Average of log|det Df| for the random-fibre skew product. The base
/// coordinate is a full-branch Bernoulli map, so under Lebesgue its symbols
/// are independent with weights (p0, p1); they are drawn directly, which
/// avoids the loss of one bit per step that an exact y-iteration suffers in
/// floating point.
inline EstimatorReport lyapunov_birkhoff(const SkewProductMap& f, const OrbitOptions& opt) {
  EstimatorReport rep;
  rep.method = "birkhoff_skew_product";
  std::vector<double> per_orbit(static_cast<std::size_t>(opt.n_orbits));
  std::vector<long> resampled(static_cast<std::size_t>(opt.n_orbits), 0);
  const double log_b0 = -std::log(f.p0()), log_b1 = -std::log(f.p1());
  parallel_for(opt.n_orbits, opt.threads, [&](long k) {
    Rng rng(opt.seed, static_cast<std::uint64_t>(k));
    double x = rng.uniform();
    CompensatedSum sum;
    for (long i = -opt.burn_in; i < opt.n_iters; ++i) {
      const bool first = rng.uniform() < f.p0();
      const double a = first ? f.alpha0() : f.alpha1();
      while (std::fabs(x - 0.5) <= f.clearance()) {
        ++resampled[static_cast<std::size_t>(k)];
        x = rng.uniform();
      }
      double fx, d;
      if (x < 0.5) {
        fx = lsv_left(a, x);
        d = lsv_left_derivative(a, x);
      } else {
        fx = 2.0 * x - 1.0;
        d = 2.0;
      }
      if (i >= 0) sum.add(std::log(d) + (first ? log_b0 : log_b1));
      x = fx;
    }
    per_orbit[static_cast<std::size_t>(k)] = sum.value() / static_cast<double>(opt.n_iters);
  });
  const MeanStats st = mean_and_error(per_orbit);
  rep.value = st.mean;
  rep.std_error = st.std_error;
  rep.samples = opt.n_orbits * opt.n_iters;
  rep.resampled = std::accumulate(resampled.begin(), resampled.end(), 0L);
  rep.verdict = Verdict::finite;
  return rep;
}

// ---------------------------------------------------------------------------
// Block entropy

struct BlockOptions {
  int n_max_block = 12;
  long n_orbits = 64;
  long n_iters = 100'000;
  long burn_in = 10'000;
  std::uint64_t seed = 1;
  /// When positive, each orbit restarts from a fresh uniform point every
  /// `segment` symbols (after burn_in steps) and blocks never straddle a
  /// restart. Needed for maps that are exact binary shifts in floating point.
  long segment = 0;
  unsigned threads = 0;
};

struct BlockEntropyRow {
  int n = 0;
  double h_over_n = 0.0;
  double std_error = 0.0;
  long distinct_blocks = 0;
  long min_count = 0;
};

struct BlockEntropyResult {
  std::vector<BlockEntropyRow> rows;
  std::vector<std::string> warnings;
};

namespace detail {

/// Block counts, dense when the alphabet power is small.
class BlockCounter {
 public:
  explicit BlockCounter(std::uint64_t size) {
    if (size <= (1u << 22)) dense_.assign(size, 0);
  }
  void add(std::uint64_t code) {
    if (!dense_.empty()) ++dense_[code];
    else ++sparse_[code];
  }
  template <class F>
  void for_each(F&& f) const {
    if (!dense_.empty()) {
      for (std::uint64_t i = 0; i < dense_.size(); ++i)
        if (dense_[i] > 0) f(i, dense_[i]);
    } else {
      for (const auto& [k, v] : sparse_) f(k, v);
    }
  }

 private:
  std::vector<long> dense_;
  std::unordered_map<std::uint64_t, long> sparse_;
};

}  // namespace detail

/// Cut points of a partition given as intervals; cells shorter than
/// 10 machine epsilons are merged into their neighbour.
inline std::vector<double> partition_cuts(std::vector<std::pair<double, double>> cells) {
  std::sort(cells.begin(), cells.end());
  std::vector<double> cuts;
  const double tiny = 10.0 * std::numeric_limits<double>::epsilon();
  bool seen = false;  // a proper cell lies to the left
  for (const auto& c : cells) {
    if (c.second - c.first < tiny) continue;
    if (seen) cuts.push_back(c.first);
    seen = true;
  }
  return cuts;
}

namespace detail {

/// Receives the symbol stream of one orbit and counts every block ending at
/// the newest symbol.
class BlockSink {
 public:
  BlockSink(std::uint64_t alphabet, const std::vector<std::uint64_t>& modulus,
            std::vector<BlockCounter>& counters)
      : K_(alphabet), modulus_(modulus), counters_(counters) {}

  void push(std::uint64_t symbol) {
    code_ = code_ * K_ + symbol;
    ++run_;
    const int nb = static_cast<int>(modulus_.size());
    for (int n = 1; n <= nb && n <= run_; ++n)
      counters_[static_cast<std::size_t>(n - 1)].add(code_ % modulus_[static_cast<std::size_t>(n - 1)]);
    code_ %= modulus_.back();
  }
  /// Forget the history so no block straddles a restart.
  void reset() {
    code_ = 0;
    run_ = 0;
  }
  long run() const { return run_; }

 private:
  std::uint64_t K_;
  const std::vector<std::uint64_t>& modulus_;
  std::vector<BlockCounter>& counters_;
  std::uint64_t code_ = 0;
  long run_ = 0;
};

/// Orbits are dealt round-robin to min(16, n_orbits) groups; the spread of
/// per-group entropies gives the standard error. `orbit(k, rng, sink)`
/// emits the symbols of orbit k.
template <class Orbit>
BlockEntropyResult block_entropy_from_orbits(std::uint64_t K, const BlockOptions& opt, Orbit&& orbit) {
  if (opt.n_max_block < 1 || opt.n_max_block > 20)
    throw std::invalid_argument("block_entropy: n_max_block must lie in [1, 20]");
  const int nb = opt.n_max_block;
  const long groups = std::min<long>(16, opt.n_orbits);
  std::vector<std::uint64_t> modulus(static_cast<std::size_t>(nb));
  {
    std::uint64_t m = 1;
    for (int n = 1; n <= nb; ++n) {
      m *= K;
      modulus[static_cast<std::size_t>(n - 1)] = m;
    }
  }
  // counts[g][n-1]: block code -> count. Each group owns its counters, so
  // groups run concurrently.
  std::vector<std::vector<BlockCounter>> counts(static_cast<std::size_t>(groups));
  for (auto& g : counts)
    for (int n = 1; n <= nb; ++n) g.emplace_back(modulus[static_cast<std::size_t>(n - 1)]);
  parallel_for(groups, opt.threads, [&](long g) {
    for (long k = g; k < opt.n_orbits; k += groups) {
      Rng rng(opt.seed, static_cast<std::uint64_t>(k));
      BlockSink sink(K, modulus, counts[static_cast<std::size_t>(g)]);
      orbit(k, rng, sink);
    }
  });

  BlockEntropyResult out;
  for (int n = 1; n <= nb; ++n) {
    std::unordered_map<std::uint64_t, long> pooled;
    std::vector<double> group_h;
    for (long g = 0; g < groups; ++g) {
      const auto& c = counts[static_cast<std::size_t>(g)][static_cast<std::size_t>(n - 1)];
      long total = 0;
      c.for_each([&](std::uint64_t key, long v) {
        pooled[key] += v;
        total += v;
      });
      std::vector<double> terms;
      c.for_each([&](std::uint64_t, long v) {
        const double q = static_cast<double>(v) / static_cast<double>(total);
        terms.push_back(-q * std::log(q));
      });
      std::sort(terms.begin(), terms.end());
      group_h.push_back(pairwise_sum(terms));
    }
    long total = 0, min_count = std::numeric_limits<long>::max();
    for (const auto& [key, v] : pooled) {
      total += v;
      min_count = std::min(min_count, v);
    }
    std::vector<double> terms;
    for (const auto& [key, v] : pooled) {
      const double q = static_cast<double>(v) / static_cast<double>(total);
      terms.push_back(-q * std::log(q));
    }
    std::sort(terms.begin(), terms.end());
    const double H = pairwise_sum(terms);
    const MeanStats gs = mean_and_error(group_h);
    // Miller-Madow bias of the plug-in estimate enters the error budget.
    const double bias = static_cast<double>(pooled.size() - 1) / (2.0 * static_cast<double>(total));
    BlockEntropyRow row;
    row.n = n;
    row.h_over_n = H / n;
    row.std_error = std::sqrt(gs.std_error * gs.std_error + bias * bias) / n;
    row.distinct_blocks = static_cast<long>(pooled.size());
    row.min_count = pooled.empty() ? 0 : min_count;
    if (row.min_count < 10)
      out.warnings.push_back("undersampled: some block of length " + std::to_string(n) +
                             " observed fewer than 10 times");
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace detail

inline BlockEntropyResult block_entropy(const PiecewiseMap1D& map,
                                        const std::vector<std::pair<double, double>>& partition,
                                        const BlockOptions& opt) {
  const auto cuts = partition_cuts(partition);
  auto symbol = [&](double x) {
    return static_cast<std::uint64_t>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
  };
  return detail::block_entropy_from_orbits(cuts.size() + 1, opt, [&](long, Rng& rng, detail::BlockSink& sink) {
    double x = 0.0;
    auto restart = [&] {
      x = rng.uniform(map.lo(), map.hi());
      for (long i = 0; i < opt.burn_in; ++i) {
        try {
          x = map.eval(x).value;
        } catch (const SingularPoint&) {
          x = rng.uniform(map.lo(), map.hi());
        }
      }
      sink.reset();
    };
    restart();
    for (long i = 0; i < opt.n_iters; ++i) {
      if (opt.segment > 0 && sink.run() == opt.segment) restart();
      sink.push(symbol(x));
      try {
        x = map.eval(x).value;
      } catch (const SingularPoint&) {
        restart();
      }
    }
  });
}

/// Block entropy of the skew product for the four rectangles cut by x = 1/2
/// and y = p0. The y-symbols are drawn independently with weights (p0, p1),
/// as in the Birkhoff estimator.
inline BlockEntropyResult block_entropy(const SkewProductMap& f, const BlockOptions& opt) {
  return detail::block_entropy_from_orbits(4, opt, [&](long, Rng& rng, detail::BlockSink& sink) {
    double x = rng.uniform();
    for (long i = -opt.burn_in; i < opt.n_iters; ++i) {
      const bool first = rng.uniform() < f.p0();
      while (std::fabs(x - 0.5) <= f.clearance()) x = rng.uniform();
      if (i >= 0) sink.push(2u * (x >= 0.5) + (first ? 0u : 1u));
      x = x < 0.5 ? lsv_left(first ? f.alpha0() : f.alpha1(), x) : 2.0 * x - 1.0;
    }
  });
}

// ---------------------------------------------------------------------------
// Cross-estimator comparison

struct Comparison {
  double difference = 0.0;
  double tolerance = 0.0;  // sigmas * (combined sigma + truncation bounds)
  bool pass = false;
};

inline Comparison compare_estimators(const EstimatorReport& a, const EstimatorReport& b,
                                     double sigmas = 3.0) {
  Comparison c;
  c.difference = std::fabs(a.value - b.value);
  const double sigma = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  c.tolerance = sigmas * (sigma + a.truncation_bound + b.truncation_bound);
  c.pass = std::isfinite(c.difference) && c.difference <= c.tolerance;
  return c;
}

}  // namespace inducing
