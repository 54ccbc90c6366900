#pragma once

// Piecewise monotone C^1 maps of an interval or circle, and the concrete
// zoo: doubling, LSV intermittent, Lorenz-like, singular intermittent, and
// the two-dimensional LSV skew product.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "inducing/numeric.hpp"

namespace inducing {

/// One monotone smooth piece f|_(lo,hi). `derivative` is signed.
struct Branch {
  double lo = 0.0;
  double hi = 0.0;
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  /// Optional closed-form inverse from the image back into (lo, hi).
  std::function<double(double)> inverse;
  /// Optional fused (value, signed derivative) for maps whose value is
  /// itself the result of a solve.
  std::function<std::pair<double, double>(double)> value_and_derivative;
  int orientation = +1;
  /// Whether the closed endpoint belongs to this branch (so it is not singular).
  bool include_lo = false;
  bool include_hi = false;
};

enum class Topology { interval, circle };

struct Evaluation {
  double value;
  double derivative;  // |f'(x)|
};

class PiecewiseMap1D {
 public:
  static constexpr double default_clearance = 1e-12;

  PiecewiseMap1D(std::string name, double lo, double hi, Topology topology,
                 std::vector<Branch> branches,
                 double clearance = default_clearance)
      : name_(std::move(name)),
        lo_(lo),
        hi_(hi),
        topology_(topology),
        branches_(std::move(branches)),
        clearance_(clearance) {
    std::sort(branches_.begin(), branches_.end(),
              [](const Branch& a, const Branch& b) { return a.lo < b.lo; });
    los_.reserve(branches_.size());
    for (const auto& b : branches_) los_.push_back(b.lo);
    // Singular set: branch endpoints that no branch claims.
    std::vector<double> ends, claimed;
    for (const auto& b : branches_) {
      ends.push_back(b.lo);
      ends.push_back(b.hi);
      if (b.include_lo) claimed.push_back(b.lo);
      if (b.include_hi) claimed.push_back(b.hi);
    }
    std::sort(ends.begin(), ends.end());
    ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
    std::sort(claimed.begin(), claimed.end());
    for (double p : ends)
      if (!std::binary_search(claimed.begin(), claimed.end(), p)) singular_.push_back(p);
  }

  const std::string& name() const { return name_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double length() const { return hi_ - lo_; }
  Topology topology() const { return topology_; }
  double clearance() const { return clearance_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<double>& singular_set() const { return singular_; }

  /// Reduces circle coordinates to the fundamental domain [lo, hi).
  double wrap(double x) const {
    if (topology_ != Topology::circle) return x;
    const double len = hi_ - lo_;
    if (x >= hi_) x -= len * std::floor((x - lo_) / len);
    if (x < lo_) x += len * std::ceil((lo_ - x) / len);
    if (x >= hi_) x = lo_;
    return x;
  }

  /// Nearest singular point within clearance of x, if any.
  std::optional<double> near_singular(double x) const {
    auto it = std::lower_bound(singular_.begin(), singular_.end(), x);
    if (it != singular_.end() && *it - x <= clearance_) return *it;
    if (it != singular_.begin() && x - *(it - 1) <= clearance_)
      return *(it - 1);
    return std::nullopt;
  }

  /// Index of the branch whose (closure-adjusted) domain holds x.
  std::optional<std::size_t> branch_index(double x) const {
    auto it = std::upper_bound(los_.begin(), los_.end(), x);
    if (it == los_.begin()) {
      if (!branches_.empty() && branches_.front().include_lo &&
          x == branches_.front().lo)
        return 0;
      return std::nullopt;
    }
    std::size_t i = static_cast<std::size_t>(it - los_.begin()) - 1;
    const Branch& b = branches_[i];
    if (x > b.lo && x < b.hi) return i;
    if (x == b.lo && b.include_lo) return i;
    if (x == b.hi && b.include_hi) return i;
    if (x == b.lo && i > 0 && branches_[i - 1].include_hi &&
        branches_[i - 1].hi == x)
      return i - 1;
    return std::nullopt;
  }

  /// Value and |f'(x)|; throws SingularPoint within clearance of S.
  Evaluation eval(double x) const {
    x = wrap(x);
    if (auto s = near_singular(x)) throw SingularPoint(x, *s);
    auto i = branch_index(x);
    if (!i) throw SingularPoint(x, x);
    const Branch& b = branches_[*i];
    if (b.value_and_derivative) {
      auto [v, d] = b.value_and_derivative(x);
      return {wrap(v), std::fabs(d)};
    }
    return {wrap(b.value(x)), std::fabs(b.derivative(x))};
  }

  double operator()(double x) const { return eval(x).value; }

  /// Inverse of branch i at y; closed form when available, otherwise a
  /// bracketed solve over the branch domain.
  double inverse(std::size_t i, double y) const {
    const Branch& b = branches_[i];
    if (b.inverse) return b.inverse(y);
    return solve_monotone(b.value, b.derivative, y, b.lo, b.hi);
  }

 private:
  std::string name_;
  double lo_;
  double hi_;
  Topology topology_;
  std::vector<Branch> branches_;
  std::vector<double> los_;
  std::vector<double> singular_;
  double clearance_;
};

// ---------------------------------------------------------------------------
// Generic constructor used by tests and by the counterexample layout.

struct LinearPiece {
  double lo, hi;    // domain
  double image_lo;  // f(lo)
  double image_hi;  // f(hi)
};

inline PiecewiseMap1D piecewise_linear(std::string name, double lo, double hi,
                                       std::vector<LinearPiece> pieces,
                                       Topology topology = Topology::interval) {
  std::vector<Branch> branches;
  branches.reserve(pieces.size());
  for (const auto& p : pieces) {
    const double slope = (p.image_hi - p.image_lo) / (p.hi - p.lo);
    Branch b;
    b.lo = p.lo;
    b.hi = p.hi;
    b.value = [p, slope](double x) { return p.image_lo + slope * (x - p.lo); };
    b.derivative = [slope](double) { return slope; };
    b.inverse = [p, slope](double y) { return p.lo + (y - p.image_lo) / slope; };
    b.orientation = slope > 0 ? +1 : -1;
    b.include_lo = (p.lo == lo);
    b.include_hi = (p.hi == hi);
    branches.push_back(std::move(b));
  }
  return PiecewiseMap1D(std::move(name), lo, hi, topology, std::move(branches));
}

/// x -> 2x mod 1 on [0, 1]; singular set {1/2}.
inline PiecewiseMap1D doubling_map() {
  auto m = piecewise_linear("doubling", 0.0, 1.0,
                            {{0.0, 0.5, 0.0, 1.0}, {0.5, 1.0, 0.0, 1.0}});
  return m;
}

// ---------------------------------------------------------------------------
// Liverani-Saussol-Vaienti intermittent map.

inline double lsv_left(double alpha, double x) {
  return x + std::pow(2.0, alpha) * std::pow(x, alpha + 1.0);
}
inline double lsv_left_derivative(double alpha, double x) {
  return 1.0 + std::pow(2.0, alpha) * (alpha + 1.0) * std::pow(x, alpha);
}
/// Inverse of the neutral branch on [0, 1]. g0 is increasing and convex, so
/// Newton started right of the root decreases monotonically onto it; a
/// bracketed solve is the fallback.
inline double lsv_left_inverse(double alpha, double y) {
  if (y <= 0.0) return 0.0;
  double t = std::min(y, 0.5);
  for (int i = 0; i < 200; ++i) {
    const double step = (lsv_left(alpha, t) - y) / lsv_left_derivative(alpha, t);
    if (!(step >= 0.0)) break;
    t -= step;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * t) return t;
  }
  return solve_monotone([alpha](double x) { return lsv_left(alpha, x); },
                        [alpha](double x) { return lsv_left_derivative(alpha, x); },
                        y, 0.0, std::min(y, 0.5));
}

inline PiecewiseMap1D lsv_map(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument(
        "lsv_map: alpha must lie in (0,1); for alpha >= 1 the physical "
        "measure is the Dirac mass at 0");
  Branch left;
  left.lo = 0.0;
  left.hi = 0.5;
  left.value = [alpha](double x) { return lsv_left(alpha, x); };
  left.derivative = [alpha](double x) { return lsv_left_derivative(alpha, x); };
  left.inverse = [alpha](double y) { return lsv_left_inverse(alpha, y); };
  left.include_lo = true;
  Branch right;
  right.lo = 0.5;
  right.hi = 1.0;
  right.value = [](double x) { return 2.0 * x - 1.0; };
  right.derivative = [](double) { return 2.0; };
  right.inverse = [](double y) { return 0.5 * (y + 1.0); };
  right.include_hi = true;
  return PiecewiseMap1D("lsv", 0.0, 1.0, Topology::interval, {left, right});
}

// ---------------------------------------------------------------------------
// Lorenz-like map: f(x) = sgn(x) (2^(1-a) |x|^(1-a) - 1/2) on [-1/2, 1/2].

inline PiecewiseMap1D lorenz_like_map(double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw std::invalid_argument("lorenz_like_map: alpha must lie in (0, 1/2)");
  const double c = std::pow(2.0, 1.0 - alpha);
  const double e = 1.0 - alpha;
  auto pos = [c, e](double x) { return c * std::pow(x, e) - 0.5; };
  auto dpos = [c, e](double x) { return c * e * std::pow(x, e - 1.0); };
  auto ipos = [c, e](double y) { return std::pow((y + 0.5) / c, 1.0 / e); };
  Branch left;
  left.lo = -0.5;
  left.hi = 0.0;
  left.value = [pos](double x) { return -pos(-x); };
  left.derivative = [dpos](double x) { return dpos(-x); };
  left.inverse = [ipos](double y) { return -ipos(-y); };
  left.include_lo = true;
  Branch right;
  right.lo = 0.0;
  right.hi = 0.5;
  right.value = pos;
  right.derivative = dpos;
  right.inverse = ipos;
  right.include_hi = true;
  return PiecewiseMap1D("lorenz", -0.5, 0.5, Topology::interval, {left, right});
}

// ---------------------------------------------------------------------------
// Singular intermittent circle map on [-1, 1]/~. For x in (0, 1], f(x) = t
// solves x = h(t), where
//   h(t) = 2^-g (1 + t)^g          for t in [-1, 0]
//   h(t) = t + 2^-g (1 - t)^g      for t in (0, 1],
// and f(-x) = -f(x). h is the inverse of the positive branch.

struct SingularIntermittent {
  double gamma;
  double scale;  // 2^-gamma

  explicit SingularIntermittent(double g) : gamma(g), scale(std::pow(2.0, -g)) {}

  double h(double t) const {
    if (t <= 0.0) return scale * std::pow(1.0 + t, gamma);
    return t + scale * std::pow(1.0 - t, gamma);
  }
  double dh(double t) const {
    if (t <= 0.0) return gamma * scale * std::pow(1.0 + t, gamma - 1.0);
    return 1.0 - gamma * scale * std::pow(1.0 - t, gamma - 1.0);
  }
};

inline PiecewiseMap1D singular_intermittent_map(double gamma, double tol = 1e-14) {
  if (!(gamma > 1.0))
    throw std::invalid_argument("singular_intermittent_map: gamma must exceed 1");
  if (!(tol > 0.0))
    throw std::invalid_argument("singular_intermittent_map: tol must be positive");
  const SingularIntermittent s(gamma);
  SolveOptions opt;
  opt.tol = tol;
  auto value = [s, opt](double x) {
    if (!(x > 0.0 && x <= 1.0))
      throw RootBracketError("singular_intermittent_map: x outside (0,1]");
    return solve_monotone([s](double t) { return s.h(t); },
                          [s](double t) { return s.dh(t); }, x, -1.0, 1.0, opt);
  };
  auto deriv = [s, value](double x) {
    if (x == 1.0) return 1.0 / s.dh(1.0);
    return 1.0 / s.dh(value(x));
  };
  auto fused = [s, value](double x) {
    const double t = value(x);
    return std::pair<double, double>{t, 1.0 / s.dh(t)};
  };
  Branch right;
  right.lo = 0.0;
  right.hi = 1.0;
  right.value = value;
  right.derivative = deriv;
  right.value_and_derivative = fused;
  right.inverse = [s](double y) { return s.h(y); };
  right.include_hi = true;
  Branch left;
  left.lo = -1.0;
  left.hi = 0.0;
  left.value = [value](double x) { return -value(-x); };
  left.derivative = [deriv](double x) { return deriv(-x); };
  left.value_and_derivative = [fused](double x) {
    auto [t, d] = fused(-x);
    return std::pair<double, double>{-t, d};
  };
  left.inverse = [s](double y) { return -s.h(-y); };
  left.include_lo = true;
  return PiecewiseMap1D("singular", -1.0, 1.0, Topology::circle, {left, right});
}

// ---------------------------------------------------------------------------
// Skew product f(x, y) = (f_{alpha(y)}(x), phi(y)) on [0,1]^2.

struct Point2 {
  double x;
  double y;
};

struct Evaluation2 {
  Point2 value;
  double det;      // |det Df|
  double fiber;    // |d f_{alpha(y)} / dx|
  double base;     // |phi'(y)|
  double alpha;    // fiber parameter used
};

class SkewProductMap {
 public:
  SkewProductMap(double alpha0, double alpha1, double p0)
      : alpha0_(alpha0), alpha1_(alpha1), p0_(p0), p1_(1.0 - p0) {
    if (!(alpha0 > 0.0 && alpha0 < alpha1 && alpha1 <= 1.0))
      throw std::invalid_argument(
          "skew_product_map: need 0 < alpha0 < alpha1 <= 1");
    if (!(p0 > 0.0 && p0 < 1.0))
      throw std::invalid_argument("skew_product_map: p0 must lie in (0,1)");
  }

  double alpha0() const { return alpha0_; }
  double alpha1() const { return alpha1_; }
  double p0() const { return p0_; }
  double p1() const { return p1_; }
  double clearance() const { return PiecewiseMap1D::default_clearance; }

  double alpha_of(double y) const { return y <= p0_ ? alpha0_ : alpha1_; }
  double phi(double y) const { return y <= p0_ ? y / p0_ : (y - p0_) / p1_; }

  Evaluation2 eval(Point2 p) const {
    if (std::fabs(p.x - 0.5) <= clearance()) throw SingularPoint(p.x, 0.5);
    if (std::fabs(p.y - p0_) <= clearance()) throw SingularPoint(p.y, p0_);
    const double a = alpha_of(p.y);
    double fx, dfx;
    if (p.x < 0.5) {
      fx = lsv_left(a, p.x);
      dfx = lsv_left_derivative(a, p.x);
    } else {
      fx = 2.0 * p.x - 1.0;
      dfx = 2.0;
    }
    const double dphi = p.y <= p0_ ? 1.0 / p0_ : 1.0 / p1_;
    return {{fx, phi(p.y)}, dfx * dphi, dfx, dphi, a};
  }

 private:
  double alpha0_;
  double alpha1_;
  double p0_;
  double p1_;
};

inline SkewProductMap skew_product_map(double alpha0, double alpha1, double p0) {
  return SkewProductMap(alpha0, alpha1, p0);
}

}  // namespace inducing
