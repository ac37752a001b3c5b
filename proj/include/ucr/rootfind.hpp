#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "ucr/errors.hpp"

namespace ucr {

// Shared knobs for the scalar searches below. Bracket tolerance is relative
// to the width of the initial bracket, with an absolute floor; `value_tol`
// enables early exit once |f(u) - target| is small enough, which is what the
// nested solver layers rely on for their tolerance hierarchy.
struct BisectionConfig {
  double rel_tol = 1e-9;
  double abs_tol = 1e-15;
  double value_tol = 0.0;
  double initial_probe = 1.0;
  int max_iters = 256;
  int doubling_cap = 64;
};

struct RootResult {
  double root = 0.0;
  double value = std::numeric_limits<double>::quiet_NaN();  // f(root)
  int iterations = 0;
};

namespace detail {

// Bracket-narrowing on an interval already known to straddle the target
// (f_lo >= target >= f_hi for non-increasing f). Endpoint values are passed
// in so callers that just established the bracket do not pay for
// re-evaluation. Probes interpolate (Illinois false position) with a
// bisection safeguard: whenever two consecutive probes fail to halve the
// bracket the next probe is the midpoint, so the worst case stays within a
// constant factor of plain bisection while the bracket invariant holds at
// every step.
inline RootResult bisect_straddled(const std::function<double(double)>& f,
                                   double target, double lo, double hi,
                                   double f_lo, double f_hi,
                                   const BisectionConfig& cfg) {
  const double width_tol =
      std::max(cfg.abs_tol, cfg.rel_tol * std::abs(hi - lo));
  if (cfg.value_tol > 0) {
    if (std::abs(f_lo - target) <= cfg.value_tol) return {lo, f_lo, 0};
    if (std::abs(f_hi - target) <= cfg.value_tol) return {hi, f_hi, 0};
  }
  double g_lo = f_lo - target;  // >= 0
  double g_hi = f_hi - target;  // <= 0
  double u = 0.5 * (lo + hi);
  double f_u = std::numeric_limits<double>::quiet_NaN();
  int side = 0;
  int it = 0;
  double width_two_ago = std::numeric_limits<double>::infinity();
  double width_prev = hi - lo;
  for (; it < cfg.max_iters && (hi - lo) > width_tol; ++it) {
    const bool stalled = (hi - lo) > 0.5 * width_two_ago;
    width_two_ago = width_prev;
    width_prev = hi - lo;
    const double denom = g_lo - g_hi;
    if (stalled || !(denom > 0) || !std::isfinite(denom)) {
      u = 0.5 * (lo + hi);
    } else {
      u = (lo * (-g_hi) + hi * g_lo) / denom;
      if (!(u > lo && u < hi)) u = 0.5 * (lo + hi);
    }
    f_u = f(u);
    const double g_u = f_u - target;
    if (g_u == 0.0 || std::abs(g_u) <= cfg.value_tol) return {u, f_u, it + 1};
    if (g_u > 0) {
      lo = u;
      g_lo = g_u;
      if (side == 1) g_hi *= 0.5;  // Illinois scaling of the stale endpoint
      side = 1;
    } else {
      hi = u;
      g_hi = g_u;
      if (side == -1) g_lo *= 0.5;
      side = -1;
    }
  }
  u = 0.5 * (lo + hi);
  return {u, f_u, it};
}

}  // namespace detail

// Standard bisection for a non-increasing f with a known bracket [lo, hi].
// Requires f(lo) >= target >= f(hi); a violated bracket raises BracketError
// carrying the endpoint values. A constant f equal to the target returns the
// first probe (the midpoint).
inline RootResult standard_bisection(const std::function<double(double)>& f,
                                     double target, double lo, double hi,
                                     const BisectionConfig& cfg = {}) {
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  if (f_lo < target || f_hi > target) {
    throw BracketError("standard_bisection: target not bracketed", f_lo, f_hi);
  }
  return detail::bisect_straddled(f, target, lo, hi, f_lo, f_hi, cfg);
}

// Bisection over [0, inf) for a non-increasing f with no known upper bound.
// Starting from a deterministic probe, the bracket is grown (or shrunk) by
// factors of two until one octave [u*2^i, u*2^(i+1)] straddles the target,
// then standard bisection finishes inside it. Exhausting the doubling cap
// means no u >= 0 attains the target (e.g. target > f(0+)).
inline RootResult unbounded_bisection(const std::function<double(double)>& f,
                                      double target,
                                      const BisectionConfig& cfg = {}) {
  double u = cfg.initial_probe > 0 ? cfg.initial_probe : 1.0;
  double fu = f(u);
  if (fu == target || std::abs(fu - target) <= cfg.value_tol)
    return {u, fu, 0};
  if (fu > target) {
    // Root lies above the probe: double until the value drops below target.
    for (int i = 0; i < cfg.doubling_cap; ++i) {
      const double hi = 2.0 * u;
      const double f_hi = f(hi);
      if (f_hi <= target)
        return detail::bisect_straddled(f, target, u, hi, fu, f_hi, cfg);
      u = hi;
      fu = f_hi;
    }
    throw NoBracketError(
        "unbounded_bisection: doubling cap reached, target unattained at " +
        std::to_string(u));
  }
  // Root lies below the probe: halve toward zero.
  for (int i = 0; i < cfg.doubling_cap; ++i) {
    const double lo = 0.5 * u;
    const double f_lo = f(lo);
    if (f_lo >= target)
      return detail::bisect_straddled(f, target, lo, u, f_lo, fu, cfg);
    u = lo;
    fu = f_lo;
  }
  throw NoBracketError(
      "unbounded_bisection: halving cap reached, target exceeds f(0+)");
}

// Unique positive root of a strictly decreasing map v on (0, inf) with
// v -> +inf as x -> 0+ and v -> -inf as x -> inf. Samples taken while the
// bracket grows must themselves be monotone; a violation indicates the caller
// passed a map outside the contract.
inline RootResult positive_root(const std::function<double(double)>& v,
                                double level,
                                const BisectionConfig& cfg = {}) {
  double u = cfg.initial_probe > 0 ? cfg.initial_probe : 1.0;
  double fu = v(u);
  if (fu == level || std::abs(fu - level) <= cfg.value_tol) return {u, fu, 0};
  const auto check_monotone = [](double f_left, double f_right) {
    if (f_right > f_left + 1e-9 * (std::abs(f_left) + std::abs(f_right) + 1.0))
      throw ContractViolation(
          "positive_root: map is not decreasing on the sampled bracket");
  };
  if (fu > level) {
    for (int i = 0; i < cfg.doubling_cap; ++i) {
      const double hi = 2.0 * u;
      const double f_hi = v(hi);
      check_monotone(fu, f_hi);
      if (f_hi <= level)
        return detail::bisect_straddled(v, level, u, hi, fu, f_hi, cfg);
      u = hi;
      fu = f_hi;
    }
    throw NoBracketError("positive_root: doubling cap reached");
  }
  for (int i = 0; i < cfg.doubling_cap; ++i) {
    const double lo = 0.5 * u;
    const double f_lo = v(lo);
    check_monotone(f_lo, fu);
    if (f_lo >= level)
      return detail::bisect_straddled(v, level, lo, u, f_lo, fu, cfg);
    u = lo;
    fu = f_lo;
  }
  throw NoBracketError("positive_root: halving cap reached");
}

// Principal-branch Lambert W: the w >= -1 with w*e^w = a, for a >= -1/e.
// Series seed near the branch point, log asymptotics for large arguments,
// Halley refinement elsewhere.
inline double lambert_w(double a) {
  constexpr double kInvE = 0.36787944117144233;
  constexpr double kE = 2.718281828459045;
  if (!(a >= -kInvE)) {
    if (a > -kInvE - 1e-14) {
      a = -kInvE;
    } else {
      throw std::domain_error("lambert_w: argument below -1/e");
    }
  }
  if (a == 0.0) return 0.0;

  const double ea1 = kE * a + 1.0;  // e*a + 1 >= 0 on the principal domain
  double w;
  if (ea1 <= 0.0) return -1.0;
  if (ea1 < 1e-3) {
    const double p = std::sqrt(2.0 * ea1);
    w = -1.0 +
        p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 - p * 43.0 / 540.0)));
    if (ea1 < 1e-12) return w;
  } else if (a < -0.2) {
    const double p = std::sqrt(2.0 * ea1);
    w = -1.0 + p * (1.0 - p / 3.0);
  } else if (a < 0.2) {
    w = a * (1.0 - a * (1.0 - 1.5 * a));
  } else if (a < 3.0) {
    w = std::log1p(a) * 0.8;
  } else {
    const double l1 = std::log(a);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }
  for (int it = 0; it < 48; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - a;
    const double wp1 = w + 1.0;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    const double step = f / denom;
    w -= step;
    if (std::abs(step) <= 1e-16 * (1.0 + std::abs(w))) break;
  }
  return w;
}

}  // namespace ucr
