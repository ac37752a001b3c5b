#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ucr/errors.hpp"
#include "ucr/model.hpp"
#include "ucr/rootfind.hpp"

namespace ucr::p5 {

using Vec = std::vector<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// One inner convex problem: allocate (b, p, f_ms, f_vu, T) for fixed FP
// auxiliaries z, Dinkelbach ratio y and resolutions s. The comm/compute
// blocks can be frozen to given values, which turns the same cascade into
// the reduced solvers used by the partial-optimization baselines.
struct P5Instance {
  const SystemParams* params = nullptr;
  const std::vector<LogUtility>* utilities = nullptr;
  Vec z;
  double y = 0.0;
  Vec s;
  bool optimize_comm = true;
  bool optimize_compute = true;
  Vec fixed_b, fixed_p, fixed_f_ms, fixed_f_vu;

  int n_users() const { return params->n_users(); }

  void validate() const {
    if (!params || !utilities)
      throw std::invalid_argument("P5Instance: params/utilities unset");
    const int n = params->n_users();
    if (static_cast<int>(z.size()) != n || static_cast<int>(s.size()) != n)
      throw std::invalid_argument("P5Instance: z/s length mismatch");
    if (!(y > 0)) throw std::invalid_argument("P5Instance: y must be > 0");
    for (int i = 0; i < n; ++i) {
      if (!(z[i] > 0))
        throw std::invalid_argument("P5Instance: z entries must be > 0");
      if (!(s[i] > 0))
        throw std::invalid_argument("P5Instance: s entries must be > 0");
    }
    if (!optimize_comm &&
        (fixed_b.size() != z.size() || fixed_p.size() != z.size()))
      throw std::invalid_argument("P5Instance: fixed comm vectors missing");
    if (!optimize_compute &&
        (fixed_f_ms.size() != z.size() || fixed_f_vu.size() != z.size()))
      throw std::invalid_argument("P5Instance: fixed compute vectors missing");
  }
};

// Tolerance profile. Each nested search is one decade tighter than the layer
// consuming it so that bisection noise never masquerades as non-monotonicity
// upstream.
struct SolverConfig {
  double t_rel = 1e-6;      // |sum zeta - y*c_t| <= t_rel * y*c_t
  double eps5_rel = 1e-6;   // per-coordinate residual of the zeta system
  double zeta_rel = 1e-7;   // coordinate bisections: |t_n - T| <= zeta_rel*T
  double beta_rel = 1e-8;   // |sum p - p_max| <= beta_rel * p_max
  double alpha_rel = 1e-9;  // |sum b - b_max| <= alpha_rel * b_max
  double p_rel = 1e-10;     // |stationarity LHS - alpha| <= p_rel * alpha
  double bracket_rel = 1e-12;
  // The dual searches pin their roots by bracket width rather than by value:
  // sum-b can be flat in alpha exactly where sum-p is hyper-sensitive, so a
  // value-based exit would leak alpha noise into the power complementarity.
  double dual_locate_rel = 1e-11;
  int max_sweeps = 400;
  int stagnation_sweeps = 50;
  double stagnation_drop = 0.9;
  // Frequencies of users with zeta_n = 0 would collapse to 0 (infinite
  // delay); they are floored at this fraction of the respective cap. Kept far
  // below any KKT-stationary frequency so the floor never distorts the case
  // analysis of h_n.
  double freq_floor_frac = 1e-9;
  int doubling_cap = 64;
  double audit_fail_tol = 1e-3;  // hard failure threshold for the final audit
  double initial_T = -1.0;       // warm probe for the T search, if positive
  double initial_alpha = -1.0;   // warm probes for the dual searches
  double initial_beta = -1.0;
};

struct AcuteResult {
  Vec b, p, f_ms, f_vu;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  Vec delta;
};

struct KktReport {
  double stationarity_b = 0.0;
  double stationarity_p = 0.0;
  double stationarity_f_ms = 0.0;
  double stationarity_f_vu = 0.0;
  double stationarity_T = 0.0;
  double complementarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;

  double worst() const {
    return std::max({stationarity_b, stationarity_p, stationarity_f_ms,
                     stationarity_f_vu, stationarity_T, complementarity,
                     primal, dual});
  }
  std::string to_string() const {
    std::ostringstream os;
    os << "stat_b=" << stationarity_b << " stat_p=" << stationarity_p
       << " stat_fms=" << stationarity_f_ms
       << " stat_fvu=" << stationarity_f_vu << " stat_T=" << stationarity_T
       << " comp=" << complementarity << " primal=" << primal
       << " dual=" << dual;
    return os.str();
  }
};

// Counters over the nested bisection layers; serialized into result records
// as the solver's diagnostic dump.
struct Diagnostics {
  std::int64_t psi_evals = 0;
  std::int64_t p_solves = 0;
  std::int64_t alpha_searches = 0;
  std::int64_t beta_searches = 0;
  std::int64_t acute_evals = 0;
  std::int64_t sweeps = 0;
  std::int64_t t_iterations = 0;
};

struct P5Solution {
  Allocation alloc;
  Multipliers mult;
  double objective = 0.0;
  KktReport audit;
  Diagnostics diag;
  // Set when the T-stationarity root is numerically degenerate (sum zeta
  // jumps across y*c_t within one double ulp of T, as happens when frozen
  // compute pins the delays); the primal T is still bracket-exact but the
  // delay duals are not meaningful.
  bool t_degenerate = false;
};

// True P5 objective at a feasible point:
//   F(alloc | s, y) - y c_e sum_n { [(p+p_cir) s mu L]^2 z + 1/(4 (r nu)^2 z) }
inline double p5_objective(const P5Instance& inst, const Allocation& alloc) {
  const SystemParams& prm = *inst.params;
  double val = 0.0;
  for (int n = 0; n < inst.n_users(); ++n) {
    const double r = rate(prm, n, alloc.b[n], alloc.p[n]);
    val += (*inst.utilities)[n].value(r, alloc.s[n]);
    val -= inst.y * prm.c_e * (ms_energy(prm, n, alloc.s[n], alloc.f_ms[n]) +
                               vu_energy(prm, n, alloc.s[n], alloc.f_vu[n]));
    const double bits = alloc.s[n] * prm.mu[n] * prm.frames[n];
    const double a = (alloc.p[n] + prm.p_cir[n]) * bits;
    const double bden = r * prm.nu[n];
    val -= inst.y * prm.c_e *
           (a * a * inst.z[n] + 1.0 / (4.0 * bden * bden * inst.z[n]));
  }
  val -= inst.y * prm.c_t * alloc.T;
  return val;
}

class Solver {
 public:
  Solver(const P5Instance& inst, const SolverConfig& cfg = {})
      : inst_(inst), cfg_(cfg), prm_(*inst.params), util_(*inst.utilities) {
    inst_.validate();
    const int n = inst_.n_users();
    warm_p_.assign(n, -1.0);
    warm_zeta_.assign(n, -1.0);
    warm_gamma_root_.assign(n, -1.0);
    warm_alpha_ = cfg_.initial_alpha;
    warm_beta_ = cfg_.initial_beta;
  }

  const Diagnostics& diagnostics() const { return diag_; }

  // ---- closed-form reductions of the rate stationarity pair ---------------

  // Optimal SNR ratio g p/(sigma2 b) implied by the two stationarity
  // equations, as a function of p and the duals.
  double compute_psi(double p, double alpha, double beta, int n) const {
    ++diag_.psi_evals;
    const double bits = inst_.s[n] * prm_.mu[n] * prm_.frames[n];
    const double denom = beta + 2.0 * (p + prm_.p_cir[n]) * inst_.y *
                                    prm_.c_e * inst_.z[n] * bits * bits;
    if (!(denom > 0))
      throw std::domain_error("compute_psi: nonpositive denominator");
    const double q = prm_.g[n] * alpha / (denom * prm_.sigma2[n]);
    const double arg = (q - 1.0) / M_E;
    const double expo = 1.0 + lambert_w(arg);
    if (expo > 700.0) return kInf;
    return std::expm1(expo);
  }

  // Rate implied by p alone once b takes its stationarity-optimal value.
  double rate_bar(double p, double alpha, double beta, int n) const {
    return rate_from_psi(p, compute_psi(p, alpha, beta, n), n);
  }

  double rate_from_psi(double p, double psi, int n) const {
    const double c = prm_.g[n] * p / (prm_.sigma2[n] * M_LN2);
    if (!(psi > 0)) return c;              // psi -> 0 limit
    if (!std::isfinite(psi)) return 0.0;   // psi -> inf limit
    return c * std::log1p(psi) / psi;
  }

  // d r / d b as a function of the SNR ratio: log2(1+x) - x/((1+x) ln 2).
  static double phi(double x) {
    if (!std::isfinite(x)) return kInf;
    if (x <= 0) return 0.0;
    if (x < 1e-4) {
      // log1p(x) - x/(1+x) cancels at order x; sum the series directly.
      return (x * x * (0.5 + x * (-2.0 / 3.0 + x * 0.75))) / M_LN2;
    }
    return (std::log1p(x) - x / (1.0 + x)) / M_LN2;
  }

  // Marginal value of rate for user n: utility slope plus the surrogate
  // transmission-energy and delay-pressure terms.
  double rate_marginal(double r, double zeta_n, int n) const {
    const double bits = inst_.s[n] * prm_.mu[n] * prm_.frames[n];
    const double nu = prm_.nu[n];
    return util_[n].d_dr(r, inst_.s[n]) +
           inst_.y * prm_.c_e / (2.0 * inst_.z[n] * r * r * r * nu * nu) +
           zeta_n * bits / (r * r * nu);
  }

  // Left-hand side of the p-stationarity equation; decreasing in p.
  double p_stationarity_lhs(double p, double alpha, double beta, double zeta_n,
                            int n) const {
    const double psi = compute_psi(p, alpha, beta, n);
    const double ph = phi(psi);
    if (ph == 0.0) return 0.0;
    const double r = rate_from_psi(p, psi, n);
    if (!(r > 0)) return kInf;
    return rate_marginal(r, zeta_n, n) * ph;
  }

  // ---- per-user solves (Algorithm 1.2.1) ----------------------------------

  // Power satisfying the stationarity pair at the given duals, or nullopt if
  // the equation's root lies beyond the N*p_max bracket (alpha too small).
  std::optional<double> solve_p_tilde(double alpha, double beta, double zeta_n,
                                      int n) const {
    if (!(alpha > 0))
      throw std::invalid_argument("solve_p_tilde: alpha must be > 0");
    ++diag_.p_solves;
    const double lo0 = 1e-12 * prm_.p_max;
    const double hi0 = prm_.p_max * inst_.n_users();
    const auto f = [&](double p) {
      return p_stationarity_lhs(p, alpha, beta, zeta_n, n);
    };
    const double vtol = cfg_.p_rel * alpha;
    double probe = warm_p_[n] > 0 ? std::clamp(warm_p_[n], lo0, hi0)
                                  : prm_.p_max / inst_.n_users();
    auto root = bounded_root(f, alpha, lo0, hi0, probe, vtol);
    if (root) warm_p_[n] = *root;
    return root;
  }

  // Bandwidth paired with the solved power.
  double b_from_p(double p, double alpha, double beta, int n) const {
    const double psi = compute_psi(p, alpha, beta, n);
    return prm_.g[n] * p /
           (prm_.sigma2[n] * std::max(psi, 1e-300));
  }

  std::optional<double> solve_b_tilde(double alpha, double beta, double zeta_n,
                                      int n) const {
    auto p = solve_p_tilde(alpha, beta, zeta_n, n);
    if (!p) return std::nullopt;
    return b_from_p(*p, alpha, beta, n);
  }

  // ---- dual searches (Algorithms 1.2.2.1 and 1.2.2.2) ---------------------

  // Sum of tilde-bandwidths; +inf when some user's power equation is
  // unattainable at this alpha (consumed by the alpha search as "too small").
  double sum_b_tilde(double alpha, double beta, const Vec& zeta) const {
    double sum = 0.0;
    for (int n = 0; n < inst_.n_users(); ++n) {
      auto p = solve_p_tilde(alpha, beta, zeta[n], n);
      if (!p) return kInf;
      sum += b_from_p(*p, alpha, beta, n);
    }
    return sum;
  }

  double solve_alpha_breve(double beta, const Vec& zeta) const {
    ++diag_.alpha_searches;
    // The beta = 0 probe and the beta > 0 path track different alpha roots;
    // keep a warm start for each.
    double& warm = beta == 0.0 ? warm_alpha0_ : warm_alpha_;
    BisectionConfig bc;
    bc.abs_tol = 1e-300;
    bc.rel_tol = cfg_.dual_locate_rel;
    bc.value_tol = 0.0;  // pin by bracket, see dual_locate_rel
    bc.doubling_cap = cfg_.doubling_cap;
    bc.initial_probe = warm > 0 ? warm : alpha_cold_guess();
    const auto f = [&](double a) { return sum_b_tilde(a, beta, zeta); };
    const double root = unbounded_bisection(f, prm_.b_max, bc).root;
    warm = root;
    return root;
  }

  double sum_p_tilde(double alpha, double beta, const Vec& zeta) const {
    double sum = 0.0;
    for (int n = 0; n < inst_.n_users(); ++n) {
      auto p = solve_p_tilde(alpha, beta, zeta[n], n);
      if (!p) return kInf;
      sum += *p;
    }
    return sum;
  }

  double solve_beta_acute(const Vec& zeta) const {
    ++diag_.beta_searches;
    double s0;
    try {
      const double a0 = solve_alpha_breve(0.0, zeta);
      s0 = sum_p_tilde(a0, 0.0, zeta);
    } catch (const std::domain_error&) {
      s0 = kInf;  // e.g. c_e = 0 leaves the beta = 0 system degenerate
    }
    // Tie-break: an exactly met power budget keeps beta = 0.
    if (s0 <= prm_.p_max * (1.0 + cfg_.beta_rel)) return 0.0;
    BisectionConfig bc;
    bc.abs_tol = 1e-300;
    bc.rel_tol = cfg_.dual_locate_rel;
    bc.value_tol = cfg_.beta_rel * prm_.p_max;
    bc.doubling_cap = cfg_.doubling_cap;
    bc.initial_probe = warm_beta_ > 0 ? warm_beta_ : 1.0;
    const auto f = [&](double beta) {
      const double a = solve_alpha_breve(beta, zeta);
      return sum_p_tilde(a, beta, zeta);
    };
    const double root = unbounded_bisection(f, prm_.p_max, bc).root;
    warm_beta_ = root;
    return root;
  }

  // ---- compute bundle (Algorithm 1.1) -------------------------------------

  struct ComputeBundle {
    Vec f_ms, f_vu;
    double gamma = 0.0;
    Vec delta;
  };

  ComputeBundle solve_f_acute(const Vec& zeta) const {
    const int n_users = inst_.n_users();
    ComputeBundle out;
    out.f_ms.assign(n_users, 0.0);
    out.f_vu.assign(n_users, 0.0);
    out.delta.assign(n_users, 0.0);
    if (!inst_.optimize_compute) {
      out.f_ms = inst_.fixed_f_ms;
      out.f_vu = inst_.fixed_f_vu;
      return out;
    }
    const double yce = inst_.y * prm_.c_e;

    // User side: per-user cube root capped at the CPU limit.
    for (int n = 0; n < n_users; ++n) {
      if (zeta[n] <= 0.0) {
        out.f_vu[n] = cfg_.freq_floor_frac * prm_.f_vu_max[n];
        continue;
      }
      const double bc = prm_.pre_cycles(n, inst_.s[n]);
      const double gc = prm_.total_cycles(n, inst_.s[n]);
      const double unconstrained =
          yce > 0 ? std::cbrt(bc * zeta[n] / (2.0 * gc * yce * prm_.kappa_vu[n]))
                  : kInf;
      if (unconstrained > prm_.f_vu_max[n]) {
        out.f_vu[n] = prm_.f_vu_max[n];
        const double f = out.f_vu[n];
        out.delta[n] = zeta[n] * bc / (f * f) -
                       2.0 * yce * prm_.kappa_vu[n] * gc * f;
      } else {
        out.f_vu[n] = unconstrained;
      }
    }

    // Server side: gamma = 0 fast path, else bisection on the shared dual.
    double floor_budget = 0.0;
    std::vector<int> active;
    for (int n = 0; n < n_users; ++n) {
      if (zeta[n] <= 0.0) {
        out.f_ms[n] = cfg_.freq_floor_frac * prm_.f_ms_max;
        floor_budget += out.f_ms[n];
      } else {
        active.push_back(n);
      }
    }
    if (active.empty()) return out;
    const double budget = prm_.f_ms_max - floor_budget;
    double sum_unconstrained = 0.0;
    Vec u(n_users, 0.0);
    for (int n : active) {
      const double ac = prm_.pre_cycles(n, inst_.s[n]);
      const double fc = prm_.total_cycles(n, inst_.s[n]);
      u[n] = yce > 0
                 ? std::cbrt(ac * zeta[n] / (2.0 * fc * yce * prm_.kappa_ms))
                 : kInf;
      sum_unconstrained += u[n];
    }
    if (sum_unconstrained <= budget) {
      for (int n : active) out.f_ms[n] = u[n];
      return out;
    }
    // gamma > 0: sum of PositiveRoot(zeta A/x^2 - 2 y c_e kappa F x = gamma)
    // must meet the budget. At the root some active user has f >= budget/m,
    // so gamma is bounded by the max of the maps there.
    const auto v_map = [&](int n) {
      const double ac = prm_.pre_cycles(n, inst_.s[n]);
      const double fc = prm_.total_cycles(n, inst_.s[n]);
      return [this, n, ac, fc, yce, &zeta](double x) {
        return zeta[n] * ac / (x * x) -
               2.0 * yce * prm_.kappa_ms * fc * x;
      };
    };
    double gamma_hi = 0.0;
    const double f_ref = budget / static_cast<double>(active.size());
    for (int n : active) gamma_hi = std::max(gamma_hi, v_map(n)(f_ref));
    if (!(gamma_hi > 0))
      throw SolverError("solve_f_acute: gamma upper bound not positive");
    const auto sum_roots = [&](double gamma) {
      double sum = 0.0;
      for (int n : active) {
        BisectionConfig rc;
      rc.abs_tol = 1e-300;
        rc.rel_tol = cfg_.bracket_rel;
        rc.value_tol = 0.0;
        rc.initial_probe =
            warm_gamma_root_[n] > 0 ? warm_gamma_root_[n] : f_ref;
        const double root = positive_root(v_map(n), gamma, rc).root;
        warm_gamma_root_[n] = root;
        sum += root;
      }
      return sum;
    };
    BisectionConfig gc;
    gc.abs_tol = 1e-300;
    gc.rel_tol = cfg_.bracket_rel;
    gc.value_tol = cfg_.alpha_rel * prm_.f_ms_max;
    const double gamma = standard_bisection(sum_roots, budget, 0.0,
                                            gamma_hi, gc)
                             .root;
    out.gamma = gamma;
    for (int n : active) {
      BisectionConfig rc;
      rc.abs_tol = 1e-300;
      rc.rel_tol = cfg_.bracket_rel;
      rc.initial_probe = warm_gamma_root_[n] > 0 ? warm_gamma_root_[n] : f_ref;
      out.f_ms[n] = positive_root(v_map(n), gamma, rc).root;
    }
    return out;
  }

  // ---- Algorithm 1.2 + 1.1 assembly ---------------------------------------

  AcuteResult assemble_acute(const Vec& zeta) const {
    ++diag_.acute_evals;
    AcuteResult out;
    const int n_users = inst_.n_users();
    if (inst_.optimize_comm) {
      out.beta = solve_beta_acute(zeta);
      out.alpha = solve_alpha_breve(out.beta, zeta);
      out.b.assign(n_users, 0.0);
      out.p.assign(n_users, 0.0);
      for (int n = 0; n < n_users; ++n) {
        auto p = solve_p_tilde(out.alpha, out.beta, zeta[n], n);
        if (!p)
          throw SolverError("assemble_acute: power equation unattainable");
        out.p[n] = *p;
        out.b[n] = b_from_p(*p, out.alpha, out.beta, n);
      }
      // Clip hair-width budget overshoot left by the value tolerances.
      rescale_to_budget(out.b, prm_.b_max);
      if (out.beta > 0) rescale_to_budget(out.p, prm_.p_max);
    } else {
      out.b = inst_.fixed_b;
      out.p = inst_.fixed_p;
    }
    auto fc = solve_f_acute(zeta);
    out.f_ms = std::move(fc.f_ms);
    out.f_vu = std::move(fc.f_vu);
    out.gamma = fc.gamma;
    out.delta = std::move(fc.delta);
    if (inst_.optimize_compute) rescale_to_budget(out.f_ms, prm_.f_ms_max);
    return out;
  }

  double acute_delay(const AcuteResult& ac, int n) const {
    const double r = rate(prm_, n, ac.b[n], ac.p[n]);
    return prm_.pre_cycles(n, inst_.s[n]) / ac.f_ms[n] +
           tx_seconds(prm_, n, inst_.s[n], r) +
           prm_.pre_cycles(n, inst_.s[n]) / ac.f_vu[n];
  }

  // ---- zeta system (Algorithm 2.1) ----------------------------------------

  // Strict lower bound on user n's delay when its own zeta is zeroed: both
  // frequencies sit at the floor and the transmission time is nonnegative.
  double zeroed_delay_lower_bound(int n) const {
    if (!inst_.optimize_compute) {
      return prm_.pre_cycles(n, inst_.s[n]) / inst_.fixed_f_ms[n] +
             prm_.pre_cycles(n, inst_.s[n]) / inst_.fixed_f_vu[n];
    }
    return prm_.pre_cycles(n, inst_.s[n]) /
               (cfg_.freq_floor_frac * prm_.f_ms_max) +
           prm_.pre_cycles(n, inst_.s[n]) /
               (cfg_.freq_floor_frac * prm_.f_vu_max[n]);
  }

  // Complementarity residual map h(zeta | T), exactly as the case analysis
  // defines it: -zeta_n where zeroing the coordinate already meets the delay
  // bound, else the delay excess at the acute allocation.
  Vec h_vector(const Vec& zeta, double T) const {
    Vec h;
    eval_h(zeta, T, &h, nullptr);
    return h;
  }

  // Box edge for the Poincare-Miranda construction: the axis value of zeta_n
  // at which h_n crosses zero with every other coordinate zeroed.
  double zeta_upper(int n, double T) const {
    if (zeroed_delay_lower_bound(n) <= T) {
      Vec zeroed(inst_.n_users(), 0.0);
      if (acute_delay(assemble_acute(zeroed), n) <= T) return 0.0;
    }
    Vec axis(inst_.n_users(), 0.0);
    const auto f = [&](double zn) {
      axis[n] = zn;
      return acute_delay(assemble_acute(axis), n);
    };
    BisectionConfig bc;
    bc.abs_tol = 1e-300;
    bc.rel_tol = cfg_.bracket_rel;
    bc.value_tol = cfg_.zeta_rel * T;
    bc.doubling_cap = cfg_.doubling_cap;
    bc.initial_probe =
        warm_zeta_[n] > 0 ? warm_zeta_[n] : inst_.y * prm_.c_t;
    return unbounded_bisection(f, T, bc).root;
  }

  // Gauss-Seidel realization of the multivariate bisection: each sweep
  // re-solves h_n = 0 in zeta_n on [0, zeta_upper_n] holding the rest fixed.
  // The per-coordinate monotonicity of h_n licenses the scalar solves; the
  // box faces carry the sign conditions that guarantee the root exists.
  // sum_early_exit > 0 allows returning as soon as the iterates, moving
  // monotonically upward, push sum(zeta) past that cap: the sweeps increase
  // toward the fixed point there, so the cap certifies sum(zeta_grave) is
  // larger without settling the system. Callers that need the root itself
  // must leave it disabled.
  Vec solve_zeta_grave(double T, const Vec* hint = nullptr,
                       double sum_early_exit = -1.0) const {
    const int n_users = inst_.n_users();
    // h_n is non-increasing in zeta_n, so an edge solved at a smaller T is a
    // valid (wider) box for any larger T; recompute only when T shrinks.
    if (uppers_cache_.empty() || T < uppers_T_) {
      uppers_cache_.assign(n_users, 0.0);
      for (int n = 0; n < n_users; ++n) uppers_cache_[n] = zeta_upper(n, T);
      uppers_T_ = T;
    }
    const Vec& upper = uppers_cache_;

    Vec zeta(n_users, 0.0);
    for (int n = 0; n < n_users; ++n) {
      const double guess = hint && n < static_cast<int>(hint->size())
                               ? (*hint)[n]
                               : inst_.y * prm_.c_t / n_users;
      zeta[n] = std::clamp(guess, 0.0, upper[n]);
    }

    double best_resid = kInf;
    int sweeps_since_drop = 0;
    for (int sweep = 0; sweep < cfg_.max_sweeps; ++sweep) {
      ++diag_.sweeps;
      double move = 0.0;
      bool all_up = true;
      double sum = 0.0;
      for (int n = 0; n < n_users; ++n) {
        if (upper[n] <= 0.0) {
          zeta[n] = 0.0;
          continue;
        }
        const double old = zeta[n];
        zeta[n] = solve_coordinate(zeta, n, T, upper[n]);
        move = std::max(move,
                        std::abs(zeta[n] - old) / std::max(upper[n], 1e-300));
        all_up = all_up && zeta[n] >= old * (1.0 - 1e-12);
        sum += zeta[n];
      }
      if (sum_early_exit > 0 && all_up && sum > sum_early_exit) return zeta;
      if (move <= cfg_.zeta_rel) {
        const double resid = certification_residual(zeta, T);
        if (resid <= cfg_.eps5_rel) {
          warm_zeta_ = zeta;
          return zeta;
        }
        if (resid < cfg_.stagnation_drop * best_resid) {
          best_resid = resid;
          sweeps_since_drop = 0;
        } else if (++sweeps_since_drop >= cfg_.stagnation_sweeps) {
          throw SolverError(
              "solve_zeta_grave: sweep stagnation, residual " +
              std::to_string(resid));
        }
      }
    }
    throw SolverError("solve_zeta_grave: sweep cap reached");
  }

  // ---- T search (Algorithm 2.2) + final assembly --------------------------

  P5Solution solve_T_sharp() const {
    const double yct = inst_.y * prm_.c_t;
    Vec zeta_at_T;
    const auto f = [&](double T) {
      ++diag_.t_iterations;
      for (int n = 0; n < inst_.n_users(); ++n)
        if (min_achievable_delay(n) > T) return kInf;
      try {
        const Vec* hint = zeta_at_T.empty() ? nullptr : &zeta_at_T;
        zeta_at_T = solve_zeta_grave(T, hint, /*sum_early_exit=*/10.0 * yct);
      } catch (const NoBracketError&) {
        return kInf;  // T below the attainable delay floor
      } catch (const SolverError&) {
        // Near the joint feasibility edge the zeta system escalates without
        // settling; any such T is far below T# where sum(zeta) = y c_t.
        zeta_at_T.clear();
        return kInf;
      }
      double sum = 0.0;
      for (double zn : zeta_at_T) sum += zn;
      return sum;
    };
    BisectionConfig bc;
    bc.abs_tol = 1e-300;
    bc.rel_tol = cfg_.bracket_rel;
    bc.value_tol = cfg_.t_rel * yct;
    bc.doubling_cap = cfg_.doubling_cap;
    bc.initial_probe = cfg_.initial_T > 0 ? cfg_.initial_T : default_T_probe();
    const double t_sharp = unbounded_bisection(f, yct, bc).root;

    // f() leaves the zeta solution for the last probed T in zeta_at_T; make
    // sure it corresponds to t_sharp exactly.
    Vec zeta = solve_zeta_grave(t_sharp, zeta_at_T.empty() ? nullptr
                                                           : &zeta_at_T);
    P5Solution sol = package(zeta, t_sharp);

    double zeta_sum = 0.0;
    for (double zn : zeta) zeta_sum += zn;
    if (std::abs(zeta_sum - yct) > 1e3 * cfg_.t_rel * yct) {
      // Degenerate T root: sum(zeta) jumps across y*c_t faster than T can be
      // resolved (delays insensitive to zeta at the y*c_t scale, e.g. with
      // compute frozen). The primal T is bracket-exact; compare both sides
      // of the jump on the true objective and keep the better one.
      Vec zero(inst_.n_users(), 0.0);
      P5Solution slack_side = package(zero, t_sharp);
      if (slack_side.objective > sol.objective) sol = std::move(slack_side);
      sol.t_degenerate = true;
      sol.audit = kkt_audit(sol);
    }
    sol.diag = diag_;
    const double worst =
        sol.t_degenerate
            ? std::max({sol.audit.stationarity_b, sol.audit.stationarity_p,
                        sol.audit.stationarity_f_ms,
                        sol.audit.stationarity_f_vu, sol.audit.primal,
                        sol.audit.dual})
            : sol.audit.worst();
    if (worst > cfg_.audit_fail_tol)
      throw SolverError("solve_T_sharp: KKT audit failed: " +
                        sol.audit.to_string());
    return sol;
  }

  // Assemble the full primal/dual bundle for a given zeta and epigraph bound.
  P5Solution package(const Vec& zeta, double t_bound) const {
    AcuteResult ac = assemble_acute(zeta);
    P5Solution sol;
    sol.alloc.b = ac.b;
    sol.alloc.p = ac.p;
    sol.alloc.s = inst_.s;
    sol.alloc.f_ms = ac.f_ms;
    sol.alloc.f_vu = ac.f_vu;
    double worst_delay = 0.0;
    for (int n = 0; n < inst_.n_users(); ++n)
      worst_delay = std::max(worst_delay, acute_delay(ac, n));
    sol.alloc.T = std::max(t_bound, worst_delay);
    sol.mult.alpha = ac.alpha;
    sol.mult.beta = ac.beta;
    sol.mult.gamma = ac.gamma;
    sol.mult.delta = ac.delta;
    sol.mult.zeta = zeta;
    sol.objective = p5_objective(inst_, sol.alloc);
    sol.audit = kkt_audit(sol);
    return sol;
  }

  // ---- audit ---------------------------------------------------------------

  KktReport kkt_audit(const P5Solution& sol) const {
    KktReport rep;
    const Allocation& al = sol.alloc;
    const Multipliers& m = sol.mult;
    const double yce = inst_.y * prm_.c_e;
    const double yct = inst_.y * prm_.c_t;
    double zeta_sum = 0.0;
    double b_sum = 0.0, p_sum = 0.0, f_sum = 0.0;
    for (int n = 0; n < inst_.n_users(); ++n) {
      const double r = rate(prm_, n, al.b[n], al.p[n]);
      const double drdb = rate_db(al.b[n], al.p[n], prm_.g[n], prm_.sigma2[n]);
      const double drdp = rate_dp(al.b[n], al.p[n], prm_.g[n], prm_.sigma2[n]);
      const double mval = rate_marginal(r, m.zeta[n], n);
      const double bits = inst_.s[n] * prm_.mu[n] * prm_.frames[n];
      if (inst_.optimize_comm) {
        // d L / d b_n = -M dr/db + alpha
        rep.stationarity_b =
            std::max(rep.stationarity_b,
                     std::abs(-mval * drdb + m.alpha) / m.alpha);
        // d L / d p_n = -M dr/dp + 2 y c_e z bits^2 (p+p_cir) + beta
        const double tx_term =
            2.0 * yce * inst_.z[n] * bits * bits * (al.p[n] + prm_.p_cir[n]);
        const double scale_p =
            std::max({mval * drdp, tx_term, m.beta, 1e-300});
        rep.stationarity_p =
            std::max(rep.stationarity_p,
                     std::abs(-mval * drdp + tx_term + m.beta) / scale_p);
      }
      if (inst_.optimize_compute) {
        const double ac = prm_.pre_cycles(n, inst_.s[n]);
        const double fc = prm_.total_cycles(n, inst_.s[n]);
        const double gc = fc;
        const double bc = ac;
        const double ms1 = 2.0 * yce * prm_.kappa_ms * fc * al.f_ms[n];
        const double ms2 = m.zeta[n] * ac / (al.f_ms[n] * al.f_ms[n]);
        rep.stationarity_f_ms =
            std::max(rep.stationarity_f_ms,
                     std::abs(ms1 + m.gamma - ms2) /
                         std::max({ms1, ms2, m.gamma, 1e-300}));
        const double vu1 = 2.0 * yce * prm_.kappa_vu[n] * gc * al.f_vu[n];
        const double vu2 = m.zeta[n] * bc / (al.f_vu[n] * al.f_vu[n]);
        rep.stationarity_f_vu =
            std::max(rep.stationarity_f_vu,
                     std::abs(vu1 + m.delta[n] - vu2) /
                         std::max({vu1, vu2, m.delta[n], 1e-300}));
        if (m.delta[n] > 0)
          rep.complementarity = std::max(
              rep.complementarity,
              (m.delta[n] * std::abs(al.f_vu[n] - prm_.f_vu_max[n])) /
                  (std::max(m.delta[n], 1e-300) * prm_.f_vu_max[n]));
        if (m.delta[n] < 0) rep.dual = std::max(rep.dual, -m.delta[n]);
      }
      const double t = user_delay(prm_, al, n);
      rep.complementarity =
          std::max(rep.complementarity,
                   m.zeta[n] * std::abs(t - al.T) / (yct * al.T));
      rep.primal = std::max(rep.primal, (t - al.T) / al.T);
      if (m.zeta[n] < 0) rep.dual = std::max(rep.dual, -m.zeta[n]);
      zeta_sum += m.zeta[n];
      b_sum += al.b[n];
      p_sum += al.p[n];
      f_sum += al.f_ms[n];
    }
    rep.stationarity_T = std::abs(zeta_sum - yct) / yct;
    if (inst_.optimize_comm) {
      // alpha > 0 always: the bandwidth budget is tight.
      rep.complementarity = std::max(
          rep.complementarity, std::abs(b_sum - prm_.b_max) / prm_.b_max);
      if (m.beta > 0)
        rep.complementarity = std::max(
            rep.complementarity, std::abs(p_sum - prm_.p_max) / prm_.p_max);
      rep.primal =
          std::max(rep.primal, (p_sum - prm_.p_max) / prm_.p_max);
      rep.primal =
          std::max(rep.primal, (b_sum - prm_.b_max) / prm_.b_max);
      if (m.beta < 0) rep.dual = std::max(rep.dual, -m.beta);
    }
    if (inst_.optimize_compute) {
      if (m.gamma > 0)
        rep.complementarity =
            std::max(rep.complementarity,
                     std::abs(f_sum - prm_.f_ms_max) / prm_.f_ms_max);
      rep.primal =
          std::max(rep.primal, (f_sum - prm_.f_ms_max) / prm_.f_ms_max);
      if (m.gamma < 0) rep.dual = std::max(rep.dual, -m.gamma);
      for (int n = 0; n < inst_.n_users(); ++n)
        rep.primal = std::max(
            rep.primal, (al.f_vu[n] - prm_.f_vu_max[n]) / prm_.f_vu_max[n]);
    }
    rep.primal = std::max(rep.primal, 0.0);
    return rep;
  }

 private:
  // Monotone-decreasing root with a warm probe: expand around the probe by
  // factors of two, then bisect the straddling octave. hi0 only seeds the
  // probe clamp; the upward expansion is allowed past it because the
  // stationarity root exists for every positive target (the LHS decays to 0),
  // even though transient beta = 0 probes can push it far beyond N*p_max.
  // Roots below lo0 are clamped to lo0.
  std::optional<double> bounded_root(const std::function<double(double)>& f,
                                     double target, double lo0, double hi0,
                                     double probe, double value_tol) const {
    double u = std::clamp(probe, lo0, hi0);
    double fu = f(u);
    if (std::abs(fu - target) <= value_tol) return u;
    double lo, hi, flo, fhi;
    if (fu > target) {  // root to the right
      lo = u;
      flo = fu;
      hi = u;
      for (int i = 0;; ++i) {
        if (i > 2 * cfg_.doubling_cap) return std::nullopt;
        hi = 2.0 * hi;
        fhi = f(hi);
        if (std::abs(fhi - target) <= value_tol) return hi;
        if (fhi <= target) break;
        lo = hi;
        flo = fhi;
      }
    } else {  // root to the left
      hi = u;
      fhi = fu;
      lo = u;
      for (int i = 0;; ++i) {
        if (lo <= lo0 || i > 2 * cfg_.doubling_cap) return lo0;
        lo = std::max(0.5 * lo, lo0);
        flo = f(lo);
        if (std::abs(flo - target) <= value_tol) return lo;
        if (flo >= target) break;
        hi = lo;
        fhi = flo;
      }
      if (flo < target) return lo0;
    }
    BisectionConfig bc;
    bc.abs_tol = 1e-300;
    bc.rel_tol = cfg_.bracket_rel;
    bc.value_tol = value_tol;
    return detail::bisect_straddled(f, target, lo, hi, flo, fhi, bc).root;
  }

  // Rough scale for the first-ever alpha probe: the stationarity LHS of user
  // 0 at the equal-split point.
  double alpha_cold_guess() const {
    const int n_users = inst_.n_users();
    const double p0 = prm_.p_max / n_users;
    const double b0 = prm_.b_max / n_users;
    const double r0 = rate(prm_, 0, b0, p0);
    const double theta = prm_.g[0] * p0 / (prm_.sigma2[0] * b0);
    const double guess = rate_marginal(r0, inst_.y * prm_.c_t / n_users, 0) *
                         phi(theta);
    return guess > 0 && std::isfinite(guess) ? guess : 1.0;
  }

  // Delay floor with every resource thrown at user n; T below this is
  // unattainable no matter the multipliers.
  double min_achievable_delay(int n) const {
    const double r =
        inst_.optimize_comm
            ? rate(prm_, n, prm_.b_max, prm_.p_max)
            : rate(prm_, n, inst_.fixed_b[n], inst_.fixed_p[n]);
    const double f_ms =
        inst_.optimize_compute ? prm_.f_ms_max : inst_.fixed_f_ms[n];
    const double f_vu =
        inst_.optimize_compute ? prm_.f_vu_max[n] : inst_.fixed_f_vu[n];
    return tx_seconds(prm_, n, inst_.s[n], r) +
           prm_.pre_cycles(n, inst_.s[n]) / f_ms +
           prm_.pre_cycles(n, inst_.s[n]) / f_vu;
  }

  double default_T_probe() const {
    // Probe near the stationarity equilibrium rather than the feasibility
    // edge: with zeta ~ y*c_t/N per user, the compute frequencies follow the
    // cube-root laws, which puts the delay at the scale where sum(zeta)
    // actually crosses y*c_t.
    const int n_users = inst_.n_users();
    const double yce = inst_.y * prm_.c_e;
    const double zeta0 = inst_.y * prm_.c_t / n_users;
    double worst = 0.0;
    for (int n = 0; n < n_users; ++n) {
      const double b = inst_.optimize_comm ? prm_.b_max / n_users
                                           : inst_.fixed_b[n];
      const double p = inst_.optimize_comm ? prm_.p_max / n_users
                                           : inst_.fixed_p[n];
      double fm, fv;
      if (inst_.optimize_compute && yce > 0) {
        const double ac = prm_.pre_cycles(n, inst_.s[n]);
        const double fc = prm_.total_cycles(n, inst_.s[n]);
        fm = std::min(std::cbrt(ac * zeta0 / (2.0 * fc * yce * prm_.kappa_ms)),
                      prm_.f_ms_max / n_users);
        fv = std::min(
            std::cbrt(ac * zeta0 / (2.0 * fc * yce * prm_.kappa_vu[n])),
            prm_.f_vu_max[n]);
      } else if (inst_.optimize_compute) {
        fm = prm_.f_ms_max / n_users;
        fv = prm_.f_vu_max[n];
      } else {
        fm = inst_.fixed_f_ms[n];
        fv = inst_.fixed_f_vu[n];
      }
      const double r = rate(prm_, n, b, p);
      worst = std::max(worst, prm_.pre_cycles(n, inst_.s[n]) / fm +
                                  tx_seconds(prm_, n, inst_.s[n], r) +
                                  prm_.pre_cycles(n, inst_.s[n]) / fv);
    }
    return worst;
  }

  // Scalar solve of h_n = 0 in zeta_n given the other coordinates, inside
  // the Poincare-Miranda box edge [0, upper]. Expands geometrically from the
  // incumbent coordinate so that warm sweeps cost a couple of evaluations.
  double solve_coordinate(const Vec& zeta, int n, double T,
                          double upper) const {
    Vec work = zeta;
    // Case (a): zeroing the coordinate already meets the bound -> root at 0.
    double t_zero = kInf;
    if (zeroed_delay_lower_bound(n) <= T) {
      work[n] = 0.0;
      t_zero = acute_delay(assemble_acute(work), n);
      if (t_zero <= T) return 0.0;
    }
    const auto f = [&](double zn) {
      work[n] = zn;
      return acute_delay(assemble_acute(work), n);
    };
    const double vtol = cfg_.zeta_rel * T;
    double lo = 0.0, flo = t_zero;  // t(0) > T here, possibly by the bound
    double hi = upper, fhi = std::numeric_limits<double>::quiet_NaN();
    bool have_hi = false;
    double cur = zeta[n];
    if (cur > 0 && cur < upper) {
      double fu = f(cur);
      if (std::abs(fu - T) <= vtol) return cur;
      if (fu > T) {  // root to the right of the incumbent
        lo = cur;
        flo = fu;
        double u = cur;
        while (u < upper) {
          u = std::min(2.0 * u, upper);
          fu = f(u);
          if (std::abs(fu - T) <= vtol) return u;
          if (fu <= T) {
            hi = u;
            fhi = fu;
            have_hi = true;
            break;
          }
          lo = u;
          flo = fu;
        }
      } else {  // root to the left
        hi = cur;
        fhi = fu;
        have_hi = true;
        double u = cur;
        while (u > upper * 1e-18) {
          u *= 0.5;
          fu = f(u);
          if (std::abs(fu - T) <= vtol) return u;
          if (fu >= T) {
            lo = u;
            flo = fu;
            break;
          }
          hi = u;
          fhi = fu;
        }
      }
    }
    if (!have_hi) {
      // The box edge was solved on the axis; with the other coordinates
      // positive, the shared budgets shift resources away from user n and
      // the root can sit slightly past it. Expand upward until the delay
      // drops below T.
      fhi = f(hi);
      for (int grow = 0; fhi > T; ++grow) {
        if (grow >= cfg_.doubling_cap)
          throw SolverError(
              "solve_coordinate: delay bound unattainable in zeta_n");
        if (std::abs(fhi - T) <= vtol) return hi;
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        fhi = f(hi);
      }
      if (std::abs(fhi - T) <= vtol) return hi;
    }
    BisectionConfig bc;
    bc.abs_tol = 1e-300;
    bc.rel_tol = cfg_.bracket_rel;
    bc.value_tol = vtol;
    return detail::bisect_straddled(f, T, lo, hi, flo, fhi, bc).root;
  }

  void eval_h(const Vec& zeta, double T, Vec* h,
              std::vector<bool>* case_a_out) const {
    const int n_users = inst_.n_users();
    h->assign(n_users, 0.0);
    if (case_a_out) case_a_out->assign(n_users, false);
    std::optional<AcuteResult> at_zeta;
    for (int n = 0; n < n_users; ++n) {
      bool case_a = false;
      if (zeroed_delay_lower_bound(n) <= T) {
        Vec zeroed = zeta;
        zeroed[n] = 0.0;
        case_a = acute_delay(assemble_acute(zeroed), n) <= T;
      }
      if (case_a) {
        (*h)[n] = -zeta[n];
        if (case_a_out) (*case_a_out)[n] = true;
      } else {
        if (!at_zeta) at_zeta = assemble_acute(zeta);
        (*h)[n] = acute_delay(*at_zeta, n) - T;
      }
    }
  }

  // Max per-coordinate normalized residual of h at the candidate solution:
  // case-(a) entries are -zeta_n (scale y*c_t), case-(b) entries are delay
  // excesses (scale T).
  double certification_residual(const Vec& zeta, double T) const {
    Vec h;
    std::vector<bool> case_a;
    eval_h(zeta, T, &h, &case_a);
    const double yct = inst_.y * prm_.c_t;
    double worst = 0.0;
    for (int n = 0; n < inst_.n_users(); ++n) {
      const double scale = case_a[n] ? yct : T;
      worst = std::max(worst, std::abs(h[n]) / scale);
    }
    return worst;
  }

  static void rescale_to_budget(Vec& v, double budget) {
    double sum = 0.0;
    for (double x : v) sum += x;
    if (sum > budget) {
      const double k = budget / sum;
      for (double& x : v) x *= k;
    }
  }

  P5Instance inst_;
  SolverConfig cfg_;
  const SystemParams& prm_;
  const std::vector<LogUtility>& util_;

  mutable Diagnostics diag_;
  mutable double warm_alpha_ = -1.0;
  mutable double warm_alpha0_ = -1.0;
  mutable double warm_beta_ = -1.0;
  mutable Vec warm_p_;
  mutable Vec warm_zeta_;
  mutable Vec warm_gamma_root_;
  mutable Vec uppers_cache_;
  mutable double uppers_T_ = kInf;
};

}  // namespace ucr::p5
