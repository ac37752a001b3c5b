#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucr/errors.hpp"

namespace ucr::fp {

using Vec = std::vector<double>;

// Minimize H(x) = G(x) + sum_n A_n(x)/B_n(x) over a convex feasible set,
// with A_n >= 0 convex and B_n > 0 concave on it. The engine works on the
// surrogate W(x, y) = G(x) + sum_n [A_n(x)^2 y_n + 1/(4 B_n(x)^2 y_n)] whose
// x-gradient at the per-x optimal y coincides with the gradient of H.
struct RatioProblem {
  std::function<double(const Vec&)> g;
  std::vector<std::function<double(const Vec&)>> num;  // A_n
  std::vector<std::function<double(const Vec&)>> den;  // B_n
  std::function<bool(const Vec&)> feasible;
  // Minimizes W(x, y) over x for fixed y, warm-started at x0.
  std::function<Vec(const Vec& y, const Vec& x0)> subproblem;

  int n_ratios() const { return static_cast<int>(num.size()); }
};

struct AoOptions {
  double tol = 1e-3;            // relative surrogate decrease at convergence
  int max_iters = 200;
  double y_ceiling = 1e18;      // stands in for the unbounded optimum at A=0
  double monotone_slack = 1e-9; // relative increase tolerated before erroring
  // Characteristic magnitude of the surrogate's components. The surrogate
  // itself can sit near zero (e.g. a parametric objective at its root), where
  // purely relative tests lose meaning; when positive, this scale backstops
  // both the monotonicity slack and the convergence denominator.
  double scale = 0.0;
};

struct AoResult {
  Vec x;
  Vec y;
  std::vector<double> surrogate_trace;
  int iterations = 0;
  bool converged = false;
  bool y_clamped = false;  // some A_n hit zero and its y was clamped
};

namespace detail {

inline double eval_num(const RatioProblem& prob, int n, const Vec& x) {
  const double a = prob.num[n](x);
  if (a < 0)
    throw ContractViolation("fp: A_" + std::to_string(n) + " negative at x");
  return a;
}

inline double eval_den(const RatioProblem& prob, int n, const Vec& x) {
  const double b = prob.den[n](x);
  if (!(b > 0))
    throw ContractViolation("fp: B_" + std::to_string(n) +
                            " not positive at x");
  return b;
}

}  // namespace detail

// Per-ratio optimal auxiliaries y_n = 1/(2 A_n B_n). A zero numerator makes
// the optimum unbounded; the auxiliary is clamped to the configured ceiling
// and flagged.
inline Vec aux_update(const RatioProblem& prob, const Vec& x,
                      double y_ceiling = 1e18, bool* clamped = nullptr) {
  Vec y(prob.n_ratios());
  if (clamped) *clamped = false;
  for (int n = 0; n < prob.n_ratios(); ++n) {
    const double a = detail::eval_num(prob, n, x);
    const double b = detail::eval_den(prob, n, x);
    if (a == 0.0) {
      y[n] = y_ceiling;
      if (clamped) *clamped = true;
    } else {
      y[n] = std::min(1.0 / (2.0 * a * b), y_ceiling);
    }
  }
  return y;
}

inline double surrogate_value(const RatioProblem& prob, const Vec& x,
                              const Vec& y) {
  double w = prob.g ? prob.g(x) : 0.0;
  for (int n = 0; n < prob.n_ratios(); ++n) {
    if (!(y[n] > 0)) throw std::domain_error("fp: y_n must be positive");
    const double a = detail::eval_num(prob, n, x);
    const double b = detail::eval_den(prob, n, x);
    w += a * a * y[n] + 1.0 / (4.0 * b * b * y[n]);
  }
  return w;
}

// True objective H(x) = G(x) + sum A_n/B_n.
inline double objective_value(const RatioProblem& prob, const Vec& x) {
  double h = prob.g ? prob.g(x) : 0.0;
  for (int n = 0; n < prob.n_ratios(); ++n)
    h += detail::eval_num(prob, n, x) / detail::eval_den(prob, n, x);
  return h;
}

// Alternating minimization of W(x, y): closed-form y update, then the
// subproblem callback in x, until the relative surrogate decrease falls
// below tol. The surrogate trace must be non-increasing; an increase beyond
// the slack is a contract violation (the callback failed to minimize).
inline AoResult ao_minimize(const RatioProblem& prob, Vec x0,
                            const AoOptions& opt = {}) {
  AoResult res;
  if (prob.feasible && !prob.feasible(x0))
    throw std::invalid_argument("fp::ao_minimize: infeasible start");
  if (prob.n_ratios() == 0) {
    res.x = prob.subproblem({}, x0);
    res.y = {};
    res.surrogate_trace = {surrogate_value(prob, res.x, {})};
    res.iterations = 1;
    res.converged = true;
    return res;
  }
  Vec x = std::move(x0);
  double w_prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iters; ++it) {
    bool clamped = false;
    Vec y = aux_update(prob, x, opt.y_ceiling, &clamped);
    res.y_clamped = res.y_clamped || clamped;
    Vec x_next;
    try {
      x_next = prob.subproblem(y, x);
    } catch (const std::exception& e) {
      throw SolverError("fp::ao_minimize: subproblem failed at iteration " +
                        std::to_string(it) + ": " + e.what());
    }
    const double w = surrogate_value(prob, x_next, y);
    res.surrogate_trace.push_back(w);
    res.iterations = it + 1;
    x = std::move(x_next);
    res.y = std::move(y);
    if (std::isfinite(w_prev)) {
      const double slack_scale =
          std::max({std::abs(w_prev), std::abs(w), opt.scale, 1e-30});
      if (w > w_prev + opt.monotone_slack * slack_scale)
        throw ContractViolation(
            "fp::ao_minimize: surrogate increased at iteration " +
            std::to_string(it));
      const double conv_scale =
          std::max({std::abs(w_prev), std::abs(w), 1e-6 * opt.scale, 1e-30});
      if (std::abs(w_prev - w) <= opt.tol * conv_scale) {
        res.converged = true;
        res.x = std::move(x);
        return res;
      }
    }
    w_prev = w;
  }
  res.x = std::move(x);
  return res;
}

struct StationarityReport {
  double max_abs_mismatch = 0.0;
  double max_rel_mismatch = 0.0;
  bool boundary = false;  // some coordinate was differenced one-sided
};

// Central-difference check that dW/dx at y = y#(x) equals dH/dx, coordinate
// by coordinate. Coordinates whose +/- step leaves the feasible set are
// differenced one-sided and flagged.
inline StationarityReport stationarity_check(const RatioProblem& prob,
                                             const Vec& x, const Vec& y) {
  StationarityReport rep;
  const auto w_at = [&](const Vec& q) { return surrogate_value(prob, q, y); };
  const auto h_at = [&](const Vec& q) { return objective_value(prob, q); };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x[i]));
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    bool ok_p = !prob.feasible || prob.feasible(xp);
    bool ok_m = !prob.feasible || prob.feasible(xm);
    double dw, dh;
    if (ok_p && ok_m) {
      dw = (w_at(xp) - w_at(xm)) / (2 * h);
      dh = (h_at(xp) - h_at(xm)) / (2 * h);
    } else if (ok_p) {
      rep.boundary = true;
      dw = (w_at(xp) - w_at(x)) / h;
      dh = (h_at(xp) - h_at(x)) / h;
    } else if (ok_m) {
      rep.boundary = true;
      dw = (w_at(x) - w_at(xm)) / h;
      dh = (h_at(x) - h_at(xm)) / h;
    } else {
      continue;
    }
    const double mismatch = std::abs(dw - dh);
    rep.max_abs_mismatch = std::max(rep.max_abs_mismatch, mismatch);
    rep.max_rel_mismatch = std::max(
        rep.max_rel_mismatch, mismatch / std::max(1.0, std::abs(dh)));
  }
  return rep;
}

}  // namespace ucr::fp
