#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucr/errors.hpp"

namespace ucr {

// Per-frame processing workload and its mapping into CPU cycles. The frame
// cost is c1*s^{3/2} + c0 tera-FLOPs at resolution s (total pixel count); the
// pre-transmission share of the pipeline is 1/k_pre of the full load.
struct WorkloadModel {
  double c1 = 7e-10;
  double c0 = 0.083;
  double k_pre = 30.0;
  double cycles_per_flop = 1.0;

  static constexpr double kTera = 1e12;

  double frame_tflops(double s) const { return c1 * std::pow(s, 1.5) + c0; }

  // Full per-video cycle counts (energy side, both server and user).
  double total_cycles(double s, double frames) const {
    return frames * frame_tflops(s) * kTera * cycles_per_flop;
  }
  // Cycles overlapping the transmission window (delay side).
  double pre_cycles(double s, double frames) const {
    return total_cycles(s, frames) / k_pre;
  }
};

// Admissible resolutions for one user: either a continuous interval or a
// finite set of pixel counts (kept sorted ascending).
struct ResolutionDomain {
  bool discrete = false;
  double s_min = 0.0;
  double s_max = 0.0;
  std::vector<double> levels;

  static ResolutionDomain continuous(double lo, double hi) {
    ResolutionDomain d;
    d.discrete = false;
    d.s_min = lo;
    d.s_max = hi;
    return d;
  }
  static ResolutionDomain from_levels(std::vector<double> lv) {
    ResolutionDomain d;
    d.discrete = true;
    std::sort(lv.begin(), lv.end());
    d.levels = std::move(lv);
    d.s_min = d.levels.front();
    d.s_max = d.levels.back();
    return d;
  }

  bool singleton() const {
    return discrete ? levels.size() == 1 : s_min == s_max;
  }

  bool contains(double s, double rel_tol = 1e-9) const {
    if (!discrete)
      return s >= s_min * (1 - rel_tol) && s <= s_max * (1 + rel_tol);
    for (double lv : levels)
      if (std::abs(s - lv) <= rel_tol * lv) return true;
    return false;
  }

  double midpoint() const {
    if (!discrete) return 0.5 * (s_min + s_max);
    return levels[levels.size() / 2];
  }
};

// Physical constants, per-user link/workload parameters and resource budgets.
struct SystemParams {
  // Per-user (all length N).
  std::vector<double> g;         // channel power gain (dimensionless)
  std::vector<double> sigma2;    // noise PSD, W/Hz
  std::vector<double> mu;        // bits per pixel
  std::vector<double> nu;        // compression ratio, > 1
  std::vector<double> frames;    // frame count per video
  std::vector<double> p_cir;     // circuit power, W
  std::vector<double> kappa_vu;  // user switched capacitance
  std::vector<double> f_vu_max;  // user CPU cap, Hz
  std::vector<ResolutionDomain> s_domain;

  // Shared.
  double kappa_ms = 1e-27;
  double b_max = 20e9;
  double p_max = 30.0;
  double f_ms_max = 300e9;
  double c_e = 0.5;
  double c_t = 0.5;
  WorkloadModel workload;

  int n_users() const { return static_cast<int>(g.size()); }

  double pre_cycles(int n, double s) const {
    return workload.pre_cycles(s, frames[n]);
  }
  double total_cycles(int n, double s) const {
    return workload.total_cycles(s, frames[n]);
  }

  void validate() const {
    const std::size_t n = g.size();
    const auto check_len = [n](const auto& v, const char* name) {
      if (v.size() != n)
        throw std::invalid_argument(std::string("SystemParams: length of ") +
                                    name + " inconsistent with g");
    };
    check_len(sigma2, "sigma2");
    check_len(mu, "mu");
    check_len(nu, "nu");
    check_len(frames, "frames");
    check_len(p_cir, "p_cir");
    check_len(kappa_vu, "kappa_vu");
    check_len(f_vu_max, "f_vu_max");
    check_len(s_domain, "s_domain");
    const auto positive = [](double x, const char* name) {
      if (!(x > 0))
        throw std::invalid_argument(std::string("SystemParams: ") + name +
                                    " must be positive");
    };
    positive(kappa_ms, "kappa_ms");
    positive(b_max, "b_max");
    positive(p_max, "p_max");
    positive(f_ms_max, "f_ms_max");
    if (c_e < 0 || c_t < 0 || (c_e == 0 && c_t == 0))
      throw std::invalid_argument("SystemParams: cost weights invalid");
    for (std::size_t i = 0; i < n; ++i) {
      positive(g[i], "g");
      positive(sigma2[i], "sigma2");
      positive(mu[i], "mu");
      positive(frames[i], "frames");
      positive(kappa_vu[i], "kappa_vu");
      positive(f_vu_max[i], "f_vu_max");
      if (!(nu[i] > 1))
        throw std::invalid_argument("SystemParams: nu must exceed 1");
      if (p_cir[i] < 0)
        throw std::invalid_argument("SystemParams: p_cir must be >= 0");
      if (!(s_domain[i].s_min > 0) || s_domain[i].s_max < s_domain[i].s_min)
        throw std::invalid_argument("SystemParams: resolution domain invalid");
    }
  }
};

// Fitted logarithmic utility U(r, s) = kappa * ln(1 + ls*s + lr*r).
struct LogUtility {
  double kappa = 1.0;
  double ls = 0.0;  // 1/pixels
  double lr = 0.0;  // 1/bps

  double value(double r, double s) const {
    return kappa * std::log1p(ls * s + lr * r);
  }
  double d_dr(double r, double s) const {
    return kappa * lr / (1.0 + ls * s + lr * r);
  }
  double d_ds(double r, double s) const {
    return kappa * ls / (1.0 + ls * s + lr * r);
  }
};

// The decision vector of the resource-allocation problem.
struct Allocation {
  std::vector<double> b;     // bandwidths, Hz
  std::vector<double> p;     // transmit powers, W
  std::vector<double> s;     // resolutions, pixels
  std::vector<double> f_ms;  // server CPU shares, Hz
  std::vector<double> f_vu;  // user CPU frequencies, Hz
  double T = 0.0;            // epigraph delay bound, s

  int n_users() const { return static_cast<int>(b.size()); }
};

// KKT duals for the inner problem.
struct Multipliers {
  double alpha = 0.0;  // bandwidth sum
  double beta = 0.0;   // power sum
  double gamma = 0.0;  // server compute sum
  std::vector<double> delta;  // per-user compute caps
  std::vector<double> zeta;   // per-user delay epigraph
};

// Shannon rate b*log2(1 + g*p/(sigma2*b)); extended to 0 at b = 0 by
// continuity.
inline double rate_bp(double b, double p, double g, double sigma2) {
  if (b < 0 || p < 0)
    throw std::domain_error("rate: negative bandwidth or power");
  if (b == 0.0) return 0.0;
  return b * std::log2(1.0 + g * p / (sigma2 * b));
}

inline double rate(const SystemParams& params, int n, double b, double p) {
  return rate_bp(b, p, params.g[n], params.sigma2[n]);
}

// d r / d b at fixed p, in bps/Hz.
inline double rate_db(double b, double p, double g, double sigma2) {
  const double theta = g * p / (sigma2 * b);
  return std::log2(1.0 + theta) - theta / ((1.0 + theta) * M_LN2);
}

// d r / d p at fixed b, in bps/W.
inline double rate_dp(double b, double p, double g, double sigma2) {
  const double theta = g * p / (sigma2 * b);
  return g / (sigma2 * (1.0 + theta) * M_LN2);
}

inline double tx_seconds(const SystemParams& params, int n, double s,
                         double r) {
  return s * params.mu[n] * params.frames[n] / (r * params.nu[n]);
}

// Delay for user n: server processing + transmission + user processing.
inline double user_delay(const SystemParams& params, const Allocation& alloc,
                         int n) {
  const double r = rate(params, n, alloc.b[n], alloc.p[n]);
  if (r <= 0)
    throw std::domain_error("user_delay: zero rate (transmission term)");
  if (alloc.f_ms[n] <= 0)
    throw std::domain_error("user_delay: zero f_ms (server term)");
  if (alloc.f_vu[n] <= 0)
    throw std::domain_error("user_delay: zero f_vu (user term)");
  return params.pre_cycles(n, alloc.s[n]) / alloc.f_ms[n] +
         tx_seconds(params, n, alloc.s[n], r) +
         params.pre_cycles(n, alloc.s[n]) / alloc.f_vu[n];
}

inline double system_delay(const SystemParams& params,
                           const Allocation& alloc) {
  if (alloc.n_users() < 1)
    throw std::invalid_argument("system_delay: empty user set");
  double worst = 0.0;
  for (int n = 0; n < alloc.n_users(); ++n)
    worst = std::max(worst, user_delay(params, alloc, n));
  return worst;
}

inline double ms_energy(const SystemParams& params, int n, double s,
                        double f_ms) {
  return params.kappa_ms * params.total_cycles(n, s) * f_ms * f_ms;
}

inline double vu_energy(const SystemParams& params, int n, double s,
                        double f_vu) {
  return params.kappa_vu[n] * params.total_cycles(n, s) * f_vu * f_vu;
}

inline double tx_energy(const SystemParams& params, int n, double p, double s,
                        double r) {
  if (r <= 0) throw std::domain_error("tx_energy: zero rate");
  return (p + params.p_cir[n]) * s * params.mu[n] * params.frames[n] /
         (r * params.nu[n]);
}

inline double total_energy(const SystemParams& params,
                           const Allocation& alloc) {
  double e = 0.0;
  for (int n = 0; n < alloc.n_users(); ++n) {
    const double r = rate(params, n, alloc.b[n], alloc.p[n]);
    e += ms_energy(params, n, alloc.s[n], alloc.f_ms[n]) +
         tx_energy(params, n, alloc.p[n], alloc.s[n], r) +
         vu_energy(params, n, alloc.s[n], alloc.f_vu[n]);
  }
  return e;
}

// Weighted energy + delay cost. `delay` defaults to the exact system delay;
// pass the epigraph T to cost an epigraph-form point.
inline double system_cost(const SystemParams& params, const Allocation& alloc,
                          double delay = -1.0) {
  const double t = delay >= 0 ? delay : system_delay(params, alloc);
  return params.c_e * total_energy(params, alloc) + params.c_t * t;
}

inline double total_utility(const SystemParams& params,
                            const std::vector<LogUtility>& utilities,
                            const Allocation& alloc) {
  double u = 0.0;
  for (int n = 0; n < alloc.n_users(); ++n) {
    const double r = rate(params, n, alloc.b[n], alloc.p[n]);
    u += utilities[n].value(r, alloc.s[n]);
  }
  return u;
}

inline double ucr_value(const SystemParams& params,
                        const std::vector<LogUtility>& utilities,
                        const Allocation& alloc) {
  const double cost = system_cost(params, alloc);
  if (cost <= 0) throw std::domain_error("ucr: nonpositive cost");
  return total_utility(params, utilities, alloc) / cost;
}

struct ConstraintViolation {
  std::string id;
  double slack;  // negative amount by which the constraint fails
};

// Empty result iff the allocation satisfies every constraint of the problem
// (budget sums, resolution domains, per-user caps, delay epigraph).
inline std::vector<ConstraintViolation> check_feasibility(
    const SystemParams& params, const Allocation& alloc,
    double rel_tol = 1e-9) {
  std::vector<ConstraintViolation> out;
  const int n_users = alloc.n_users();
  double b_sum = 0.0, p_sum = 0.0, f_sum = 0.0;
  for (int n = 0; n < n_users; ++n) {
    b_sum += alloc.b[n];
    p_sum += alloc.p[n];
    f_sum += alloc.f_ms[n];
  }
  if (b_sum > params.b_max * (1 + rel_tol))
    out.push_back({"bandwidth-sum", params.b_max - b_sum});
  if (p_sum > params.p_max * (1 + rel_tol))
    out.push_back({"power-sum", params.p_max - p_sum});
  if (f_sum > params.f_ms_max * (1 + rel_tol))
    out.push_back({"server-compute-sum", params.f_ms_max - f_sum});
  for (int n = 0; n < n_users; ++n) {
    if (!params.s_domain[n].contains(alloc.s[n]))
      out.push_back({"resolution-domain[" + std::to_string(n) + "]", 0.0});
    if (alloc.f_vu[n] > params.f_vu_max[n] * (1 + rel_tol))
      out.push_back({"user-compute-cap[" + std::to_string(n) + "]",
                     params.f_vu_max[n] - alloc.f_vu[n]});
    const double t = user_delay(params, alloc, n);
    if (t > alloc.T * (1 + rel_tol))
      out.push_back({"delay-epigraph[" + std::to_string(n) + "]",
                     alloc.T - t});
  }
  return out;
}

}  // namespace ucr
