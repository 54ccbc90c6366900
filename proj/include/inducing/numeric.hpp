#pragma once

// Small numerical toolkit shared by every module: error types, bracketed
// root finding, deterministic random streams, reproducible summation and
// fixed Gauss-Legendre rules.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace inducing {

// ---------------------------------------------------------------------------
// Errors

/// Evaluation requested inside the clearance neighbourhood of a singular point.
class SingularPoint : public std::domain_error {
 public:
  SingularPoint(double x, double singular)
      : std::domain_error("point " + std::to_string(x) +
                          " lies within clearance of singular point " +
                          std::to_string(singular)),
        x_(x),
        singular_(singular) {}
  double x() const noexcept { return x_; }
  double singular() const noexcept { return singular_; }

 private:
  double x_;
  double singular_;
};

/// A tower or induced-map operation touched a cell dropped by truncation.
class TruncatedCell : public std::out_of_range {
 public:
  explicit TruncatedCell(double x)
      : std::out_of_range("point " + std::to_string(x) +
                          " lies in a truncated (or uncovered) cell"),
        x_(x) {}
  double x() const noexcept { return x_; }

 private:
  double x_;
};

/// A map handed to trivial_scheme has a branch that is not onto.
class NotFullBranch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The target of a monotone solve is not bracketed by the search interval.
class RootBracketError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Ulam power iteration hit its iteration cap.
class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Root finding

struct SolveOptions {
  double tol = 1e-14;       // relative bracket width at which bisection stops
  int newton_steps = 2;     // polish steps after bisection
  int max_bisections = 400;
};

/// Solves g(t) = target for t in [lo, hi] when g is strictly monotone.
/// Bisection down to width tol * max(|t|, tiny), then Newton polish with dg
/// (if given) kept inside the final bracket.
inline double solve_monotone(const std::function<double(double)>& g,
                             const std::function<double(double)>& dg,
                             double target, double lo, double hi,
                             const SolveOptions& opt = {}) {
  double glo = g(lo) - target;
  double ghi = g(hi) - target;
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  if ((glo > 0.0) == (ghi > 0.0)) {
    throw RootBracketError("target " + std::to_string(target) +
                           " not bracketed on [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
  }
  const bool increasing = ghi > 0.0;
  constexpr double tiny = std::numeric_limits<double>::min();
  for (int i = 0; i < opt.max_bisections; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= opt.tol * std::max(std::fabs(mid), tiny) || mid == lo ||
        mid == hi)
      break;
    const double gm = g(mid) - target;
    if (gm == 0.0) return mid;
    if ((gm > 0.0) == increasing)
      hi = mid;
    else
      lo = mid;
  }
  double t = 0.5 * (lo + hi);
  if (dg) {
    for (int i = 0; i < opt.newton_steps; ++i) {
      const double d = dg(t);
      if (!(std::fabs(d) > 0.0) || !std::isfinite(d)) break;
      const double next = t - (g(t) - target) / d;
      if (!(next >= lo && next <= hi)) break;
      t = next;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Random streams
//
// Every stochastic routine takes (seed, stream) and derives its generator
// through seed_seq, so worker k always sees the same stream regardless of how
// many workers run.

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
    engine_.seed(seq);
  }

  /// Uniform on [0, 1) with 53 random bits; bit-identical across platforms.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double open_uniform() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire-free simple rejection; n is small in all callers.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Summation

/// Pairwise summation in fixed order; the result depends only on the input
/// sequence, never on how it was produced.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// Neumaier compensated accumulator for long streaming sums.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct MeanStats {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean and standard error of the mean of independent replicates.
inline MeanStats mean_and_error(std::span<const double> v) {
  MeanStats out;
  if (v.empty()) return out;
  out.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() < 2) return out;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - out.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
  out.std_error = std::sqrt(var / static_cast<double>(v.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Quadrature

/// Four-point Gauss-Legendre rule on [a, b].
template <class F>
double gauss_legendre4(F&& f, double a, double b) {
  static constexpr std::array<double, 4> nodes{
      -0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
      0.8611363115940526};
  static constexpr std::array<double, 4> weights{
      0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
      0.3478548451374538};
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += weights[i] * f(c + h * nodes[i]);
  return h * s;
}

/// Composite Gauss-Legendre on [a, b] with `panels` equal panels.
template <class F>
double gauss_legendre_composite(F&& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  std::vector<double> parts(static_cast<std::size_t>(panels));
  for (int i = 0; i < panels; ++i)
    parts[static_cast<std::size_t>(i)] =
        gauss_legendre4(f, a + i * h, a + (i + 1) * h);
  return pairwise_sum(parts);
}

// ---------------------------------------------------------------------------
// Work sharing

/// Calls fn(i) for every i in [0, n) on up to `threads` workers (0 means one
/// per core). Callers write results into per-index slots, so the outcome does
/// not depend on the worker count. The first exception is rethrown.
template <class Fn>
void parallel_for(long n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<long>(threads, std::max(1L, n)));
  if (threads <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (long i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace inducing
