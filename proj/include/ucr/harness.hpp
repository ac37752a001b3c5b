#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ucr/model.hpp"
#include "ucr/optimizer.hpp"
#include "ucr/scenario.hpp"

namespace ucr::sim {

using nlohmann::json;

struct PolicyResult {
  Allocation alloc;
  double ucr = 0.0;
  double energy = 0.0;
  double delay = 0.0;
  bool feasible = false;
  double kkt_worst = 0.0;
  opt::SolveResult solver;  // populated for the optimizing policies
  bool has_solver = false;
};

// Equal split of every budget, 2k resolution (or the nearest admissible
// level), full user CPU; T set to the resulting worst-case delay.
inline Allocation average_allocation(const SystemParams& params) {
  const int n = params.n_users();
  Allocation a;
  for (int i = 0; i < n; ++i) {
    a.b.push_back(params.b_max / n);
    a.p.push_back(params.p_max / n);
    const ResolutionDomain& dom = params.s_domain[i];
    double s = 2048.0 * 1080;
    if (!dom.contains(s)) {
      // nearest admissible level
      double best = dom.discrete ? dom.levels.front() : dom.s_min;
      if (dom.discrete) {
        for (double lv : dom.levels)
          if (std::abs(lv - s) < std::abs(best - s)) best = lv;
      } else {
        best = std::clamp(s, dom.s_min, dom.s_max);
      }
      s = best;
    }
    a.s.push_back(s);
    a.f_ms.push_back(params.f_ms_max / n);
    a.f_vu.push_back(params.f_vu_max[i]);
  }
  a.T = system_delay(params, a);
  return a;
}

// Named policies from the experiment matrix: "average" (no optimization),
// "opt-bps" (communication + resolution only), "opt-f" (compute only) and
// "full" (everything).
inline PolicyResult run_baseline(const std::string& name,
                                 const Scenario& scenario,
                                 const opt::OptimizerConfig& cfg = {}) {
  const SystemParams& p = scenario.params;
  PolicyResult out;
  if (name == "average") {
    out.alloc = average_allocation(p);
    out.ucr = ucr_value(p, scenario.utilities, out.alloc);
  } else if (name == "opt-bps" || name == "opt-f" || name == "full") {
    opt::VariableMask mask;
    Allocation start = average_allocation(p);
    if (name == "opt-bps") {
      mask.compute = false;
    } else if (name == "opt-f") {
      mask.comm = false;
      mask.resolution = false;
    } else {
      start = opt::initial_allocation(p);
    }
    out.solver = opt::dinkelbach_solve(p, scenario.utilities, cfg, mask,
                                       &start);
    out.has_solver = true;
    out.alloc = out.solver.alloc;
    out.ucr = ucr_value(p, scenario.utilities, out.alloc);
    out.kkt_worst = out.solver.audit.worst();
  } else {
    throw std::invalid_argument("run_baseline: unknown policy " + name);
  }
  out.energy = total_energy(p, out.alloc);
  out.delay = system_delay(p, out.alloc);
  out.feasible = check_feasibility(p, out.alloc).empty();
  return out;
}

struct SweepSpec {
  std::string param;  // b_max | p_max | f_ms_max | f_vu_max | s_min | c_t |
                      // n_users
  std::vector<double> values;
  std::vector<std::uint64_t> seeds = {1};
  std::vector<std::string> policies = {"full", "average"};
  int n_users = 5;
  bool shadow_fading = false;
  bool amplified = false;
  int workers = 0;  // 0 = hardware concurrency
};

struct SweepRow {
  std::string param;
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string policy;
  double ucr = std::nan("");
  double energy = std::nan("");
  double delay = std::nan("");
  bool feasible = false;
  double kkt_worst = std::nan("");
  std::string error;
};

inline ScenarioOverrides overrides_for(const SweepSpec& spec, double value) {
  ScenarioOverrides ov;
  ov.shadow_fading = spec.shadow_fading;
  ov.amplified = spec.amplified;
  if (spec.param == "b_max")
    ov.b_max = value;
  else if (spec.param == "p_max")
    ov.p_max = value;
  else if (spec.param == "f_ms_max")
    ov.f_ms_max = value;
  else if (spec.param == "f_vu_max")
    ov.f_vu_max = value;
  else if (spec.param == "s_min")
    ov.s_min = value;
  else if (spec.param == "c_t")
    ov.c_t = value;
  else if (spec.param != "n_users")
    throw std::invalid_argument("run_sweep: unknown parameter " + spec.param);
  return ov;
}

// Full sweep matrix: one row per (value, seed, policy). Rows execute on a
// worker pool; per-row failures are recorded in the row and the sweep
// continues. Output rows keep the input enumeration order regardless of
// scheduling.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec,
                                       const opt::OptimizerConfig& cfg = {}) {
  struct Task {
    double value;
    std::uint64_t seed;
    std::string policy;
  };
  std::vector<Task> tasks;
  for (double v : spec.values)
    for (std::uint64_t s : spec.seeds)
      for (const auto& pol : spec.policies) tasks.push_back({v, s, pol});
  std::vector<SweepRow> rows(tasks.size());

  const int n_workers =
      spec.workers > 0
          ? spec.workers
          : std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      SweepRow& row = rows[i];
      row.param = spec.param;
      row.value = t.value;
      row.seed = t.seed;
      row.policy = t.policy;
      try {
        const int users = spec.param == "n_users"
                              ? static_cast<int>(t.value)
                              : spec.n_users;
        Scenario sc = gen_scenario(t.seed, users, overrides_for(spec, t.value));
        PolicyResult pr = run_baseline(t.policy, sc, cfg);
        row.ucr = pr.ucr;
        row.energy = pr.energy;
        row.delay = pr.delay;
        row.feasible = pr.feasible;
        row.kkt_worst = pr.kkt_worst;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return rows;
}

// ---- serialization --------------------------------------------------------

inline json scenario_to_json(const Scenario& sc) {
  json users = json::array();
  for (int n = 0; n < sc.n_users; ++n) {
    users.push_back({
        {"g", sc.params.g[n]},
        {"distance_km", n < static_cast<int>(sc.distances_km.size())
                            ? sc.distances_km[n]
                            : 0.0},
        {"f_vu_max", sc.params.f_vu_max[n]},
        {"utility",
         {{"kappa", sc.utilities[n].kappa},
          {"ls", sc.utilities[n].ls},
          {"lr", sc.utilities[n].lr}}},
    });
  }
  const SystemParams& p = sc.params;
  return json{
      {"seed", sc.seed},
      {"n_users", sc.n_users},
      {"params",
       {{"b_max", p.b_max},
        {"p_max", p.p_max},
        {"f_ms_max", p.f_ms_max},
        {"kappa_ms", p.kappa_ms},
        {"kappa_vu", p.kappa_vu.empty() ? 1e-27 : p.kappa_vu[0]},
        {"mu", p.mu.empty() ? 16.0 : p.mu[0]},
        {"nu", p.nu.empty() ? 100.0 : p.nu[0]},
        {"frames", p.frames.empty() ? 90.0 : p.frames[0]},
        {"p_cir", p.p_cir.empty() ? 0.1 : p.p_cir[0]},
        {"noise_psd", p.sigma2.empty() ? 3.9810717055349565e-21 : p.sigma2[0]},
        {"c_e", p.c_e},
        {"c_t", p.c_t},
        {"resolution_levels",
         p.s_domain.empty() ? default_resolution_levels()
                            : p.s_domain[0].levels},
        {"workload",
         {{"c1", p.workload.c1},
          {"c0", p.workload.c0},
          {"k_pre", p.workload.k_pre},
          {"cycles_per_flop", p.workload.cycles_per_flop}}}}},
      {"users", users},
  };
}

inline Scenario scenario_from_json(const json& j) {
  Scenario sc;
  sc.seed = j.value("seed", 0ull);
  sc.n_users = j.at("n_users").get<int>();
  const json& jp = j.at("params");
  SystemParams& p = sc.params;
  p.b_max = jp.at("b_max").get<double>();
  p.p_max = jp.at("p_max").get<double>();
  p.f_ms_max = jp.at("f_ms_max").get<double>();
  p.kappa_ms = jp.value("kappa_ms", 1e-27);
  p.c_e = jp.value("c_e", 0.5);
  p.c_t = jp.value("c_t", 0.5);
  if (jp.contains("workload")) {
    p.workload.c1 = jp["workload"].value("c1", 7e-10);
    p.workload.c0 = jp["workload"].value("c0", 0.083);
    p.workload.k_pre = jp["workload"].value("k_pre", 30.0);
    p.workload.cycles_per_flop = jp["workload"].value("cycles_per_flop", 1.0);
  }
  std::vector<double> levels =
      jp.value("resolution_levels", default_resolution_levels());
  const double kappa_vu = jp.value("kappa_vu", 1e-27);
  const double mu = jp.value("mu", 16.0);
  const double nu = jp.value("nu", 100.0);
  const double frames = jp.value("frames", 90.0);
  const double p_cir = jp.value("p_cir", 0.1);
  const double sigma2 = jp.value("noise_psd", 3.9810717055349565e-21);
  const json& users = j.at("users");
  if (static_cast<int>(users.size()) != sc.n_users)
    throw std::invalid_argument("scenario json: users[] length != n_users");
  for (const auto& u : users) {
    p.g.push_back(u.at("g").get<double>());
    sc.distances_km.push_back(u.value("distance_km", 0.0));
    p.sigma2.push_back(sigma2);
    p.mu.push_back(mu);
    p.nu.push_back(nu);
    p.frames.push_back(frames);
    p.p_cir.push_back(p_cir);
    p.kappa_vu.push_back(kappa_vu);
    p.f_vu_max.push_back(u.value("f_vu_max", 50e9));
    p.s_domain.push_back(ResolutionDomain::from_levels(levels));
    const json& ju = u.at("utility");
    sc.utilities.push_back({ju.at("kappa").get<double>(),
                            ju.at("ls").get<double>(),
                            ju.at("lr").get<double>()});
  }
  p.validate();
  return sc;
}

inline json allocation_to_json(const Allocation& a) {
  return json{{"b", a.b},     {"p", a.p},         {"s", a.s},
              {"f_ms", a.f_ms}, {"f_vu", a.f_vu}, {"T", a.T}};
}

inline json audit_to_json(const p5::KktReport& r) {
  return json{{"stationarity_b", r.stationarity_b},
              {"stationarity_p", r.stationarity_p},
              {"stationarity_f_ms", r.stationarity_f_ms},
              {"stationarity_f_vu", r.stationarity_f_vu},
              {"stationarity_T", r.stationarity_T},
              {"complementarity", r.complementarity},
              {"primal", r.primal},
              {"dual", r.dual},
              {"worst", r.worst()}};
}

inline json result_to_json(const PolicyResult& pr) {
  json j{{"ucr", pr.ucr},
         {"energy_J", pr.energy},
         {"delay_s", pr.delay},
         {"feasible", pr.feasible},
         {"allocation", allocation_to_json(pr.alloc)}};
  if (pr.has_solver) {
    j["converged"] = pr.solver.converged;
    j["outer_iterations"] = pr.solver.outer_iterations;
    j["audit"] = audit_to_json(pr.solver.audit);
    j["trace"] = {{"y", pr.solver.trace.y},
                  {"p3_objective", pr.solver.trace.p3_objective},
                  {"p5_values", pr.solver.trace.p5_values},
                  {"wall_outer_s", pr.solver.trace.wall_outer_s},
                  {"wall_mid_s", pr.solver.trace.wall_mid_s},
                  {"wall_inner_s", pr.solver.trace.wall_inner_s}};
    j["diagnostics"] = {{"psi_evals", pr.solver.diag.psi_evals},
                        {"p_solves", pr.solver.diag.p_solves},
                        {"alpha_searches", pr.solver.diag.alpha_searches},
                        {"beta_searches", pr.solver.diag.beta_searches},
                        {"acute_evals", pr.solver.diag.acute_evals},
                        {"sweeps", pr.solver.diag.sweeps},
                        {"t_iterations", pr.solver.diag.t_iterations}};
    if (!pr.solver.warning.empty()) j["warning"] = pr.solver.warning;
  }
  return j;
}

inline std::string sweep_csv_header() {
  return "sweep_param,sweep_value,seed,policy,ucr,energy_J,delay_s";
}

inline std::string sweep_row_csv(const SweepRow& row) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << row.param << ',' << row.value << ',' << row.seed << ',' << row.policy
     << ',' << row.ucr << ',' << row.energy << ',' << row.delay;
  return os.str();
}

inline json sweep_row_json(const SweepRow& row) {
  json j{{"sweep_param", row.param}, {"sweep_value", row.value},
         {"seed", row.seed},         {"policy", row.policy},
         {"ucr", row.ucr},           {"energy_J", row.energy},
         {"delay_s", row.delay},     {"feasible", row.feasible},
         {"kkt_worst", row.kkt_worst}};
  if (!row.error.empty()) j["error"] = row.error;
  return j;
}

}  // namespace ucr::sim
