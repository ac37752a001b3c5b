// Command-line front end: solve a scenario, run a named baseline policy,
// execute a parameter sweep, or fit a utility curve from ratings data.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ucr/harness.hpp"
#include "ucr/optimizer.hpp"
#include "ucr/scenario.hpp"
#include "ucr/utility_fit.hpp"

namespace {

using nlohmann::json;

struct CommonOpts {
  std::string scenario_path;
  std::uint64_t seed = 1;
  int n_users = 5;
  bool shadow = false;
  std::string out;
  std::string format = "json";
  double eps1 = 1e-3, eps2 = 1e-3, eps3 = 1e-3;
  double tol_inner = 1.0;  // multiplies the inner solver's tolerance profile
  int workers = 0;
};

ucr::opt::OptimizerConfig make_config(const CommonOpts& o) {
  ucr::opt::OptimizerConfig cfg;
  cfg.eps1 = o.eps1;
  cfg.eps2 = o.eps2;
  cfg.eps3 = o.eps3;
  cfg.p5.t_rel *= o.tol_inner;
  cfg.p5.eps5_rel *= o.tol_inner;
  cfg.p5.zeta_rel *= o.tol_inner;
  cfg.p5.beta_rel *= o.tol_inner;
  cfg.p5.alpha_rel *= o.tol_inner;
  cfg.p5.p_rel *= o.tol_inner;
  return cfg;
}

ucr::sim::Scenario load_or_generate(const CommonOpts& o) {
  if (o.scenario_path.empty()) {
    ucr::sim::ScenarioOverrides ov;
    ov.shadow_fading = o.shadow;
    return ucr::sim::gen_scenario(o.seed, o.n_users, ov);
  }
  std::ifstream in(o.scenario_path);
  if (!in)
    throw std::invalid_argument("cannot open scenario file: " +
                                o.scenario_path);
  json j;
  in >> j;
  return ucr::sim::scenario_from_json(j);
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out)
    throw std::invalid_argument("cannot open output file: " + out_path);
  out << text << "\n";
}

std::string policy_csv(const ucr::sim::PolicyResult& pr,
                       const std::string& policy, std::uint64_t seed) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << ucr::sim::sweep_csv_header() << "\n";
  os << "-,0," << seed << ',' << policy << ',' << pr.ucr << ',' << pr.energy
     << ',' << pr.delay;
  return os.str();
}

int run_policy(const CommonOpts& o, const std::string& policy) {
  const auto scenario = load_or_generate(o);
  const auto cfg = make_config(o);
  const auto pr = ucr::sim::run_baseline(policy, scenario, cfg);
  if (o.format == "csv")
    emit(o.out, policy_csv(pr, policy, scenario.seed));
  else
    emit(o.out, ucr::sim::result_to_json(pr).dump(2));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Utility-cost-ratio optimizer for multi-user wireless VR "
               "delivery"};
  app.require_subcommand(0, 1);

  bool dump_defaults = false;
  app.add_flag("--dump-defaults", dump_defaults,
               "print the default scenario as JSON and exit");

  CommonOpts solve_opts, baseline_opts, sweep_opts, fit_opts;
  std::string baseline_name, sweep_path, fit_path;
  double fit_theta = 1.0;

  const auto add_common = [](CLI::App* cmd, CommonOpts& o,
                             bool with_scenario = true) {
    if (with_scenario)
      cmd->add_option("scenario", o.scenario_path,
                      "scenario JSON (omit to generate the default)");
    cmd->add_option("--seed", o.seed, "scenario seed when generating");
    cmd->add_option("--n-users", o.n_users, "user count when generating");
    cmd->add_flag("--shadow", o.shadow, "enable 8 dB shadow fading");
    cmd->add_option("--out", o.out, "output path (default stdout)");
    cmd->add_option("--format", o.format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--tol-eps1", o.eps1, "outer (ratio) tolerance");
    cmd->add_option("--tol-eps2", o.eps2, "mid (AO) tolerance");
    cmd->add_option("--tol-eps3", o.eps3, "inner (FP) tolerance");
    cmd->add_option("--tol-inner", o.tol_inner,
                    "scale factor on the KKT solver tolerance profile");
    cmd->add_option("--workers", o.workers, "sweep worker count");
  };

  auto* solve = app.add_subcommand("solve", "run the full solver");
  add_common(solve, solve_opts);

  auto* baseline = app.add_subcommand("baseline", "run a named policy");
  baseline->add_option("name", baseline_name,
                       "average | opt-bps | opt-f | full")
      ->required();
  add_common(baseline, baseline_opts);

  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  sweep->add_option("spec", sweep_path, "sweep spec JSON")->required();
  add_common(sweep, sweep_opts, /*with_scenario=*/false);
  sweep_opts.format = "csv";

  auto* fit = app.add_subcommand("fit-utility",
                                 "fit a logarithmic utility from ratings");
  fit->add_option("data", fit_path,
                  "CSV with rate_bps,resolution_pixels,score")
      ->required();
  fit->add_option("--theta", fit_theta,
                  "bitrate as a fraction of the wireless rate");
  fit->add_option("--out", fit_opts.out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Normalize CLI11's assorted parse-error codes onto the usage exit code;
    // --help stays 0.
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (dump_defaults) {
      const auto sc = ucr::sim::gen_scenario(1, 5);
      std::cout << ucr::sim::scenario_to_json(sc).dump(2) << "\n";
      return 0;
    }
    if (solve->parsed()) return run_policy(solve_opts, "full");
    if (baseline->parsed()) return run_policy(baseline_opts, baseline_name);
    if (sweep->parsed()) {
      std::ifstream in(sweep_path);
      if (!in)
        throw std::invalid_argument("cannot open sweep spec: " + sweep_path);
      json j;
      in >> j;
      ucr::sim::SweepSpec spec;
      spec.param = j.at("param").get<std::string>();
      spec.values = j.at("values").get<std::vector<double>>();
      if (j.contains("seeds"))
        spec.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
      if (j.contains("policies"))
        spec.policies = j["policies"].get<std::vector<std::string>>();
      spec.n_users = j.value("n_users", 5);
      spec.shadow_fading = j.value("shadow_fading", false);
      spec.amplified = j.value("amplified", false);
      spec.workers = sweep_opts.workers;
      const auto rows = ucr::sim::run_sweep(spec, make_config(sweep_opts));
      if (sweep_opts.format == "json") {
        json out = json::array();
        for (const auto& row : rows)
          out.push_back(ucr::sim::sweep_row_json(row));
        emit(sweep_opts.out, out.dump(2));
      } else {
        std::ostringstream os;
        os << ucr::sim::sweep_csv_header();
        for (const auto& row : rows) os << "\n" << ucr::sim::sweep_row_csv(row);
        emit(sweep_opts.out, os.str());
      }
      return 0;
    }
    if (fit->parsed()) {
      std::ifstream in(fit_path);
      if (!in)
        throw std::invalid_argument("cannot open ratings file: " + fit_path);
      const auto points = ucr::fit::load_rating_csv(in);
      const auto res = ucr::fit::fit_log_utility(points, fit_theta);
      json j{{"kappa", res.coeffs.kappa},
             {"ls", res.coeffs.ls},
             {"lr", res.coeffs.lr},
             {"rss", res.rss},
             {"r2", res.r2},
             {"alpha_norm", res.alpha_norm},
             {"degenerate", res.degenerate},
             {"converged", res.converged}};
      if (!res.warning.empty()) j["warning"] = res.warning;
      emit(fit_opts.out, j.dump(2));
      return 0;
    }
    std::cerr << app.help();
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 2;
  }
}
