#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucr/model.hpp"

namespace ucr::sim {

// Deterministic, platform-independent generator (splitmix64) so that a seed
// pins a scenario bit-for-bit across runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double uniform01() { return (next() >> 11) * 0x1.0p-53; }

  double normal() {
    // Box-Muller; one fresh pair per call keeps the stream position simple.
    double u1 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::uint64_t state_;
};

// Fitted utility presets, produced by the curve fitter from synthetic
// standing/seated-viewing style rating grids; assigned to users round-robin.
inline const std::vector<LogUtility>& utility_presets() {
  static const std::vector<LogUtility> presets = {
      {1.858188, 4.818084e-07, 2.100219e-10},
      {1.902940, 3.094324e-07, 1.482398e-10},
      {1.027029, 2.258403e-06, 3.263857e-10},
      {1.302717, 9.601217e-07, 3.192329e-10},
      {1.536699, 6.599625e-07, 3.509720e-10},
  };
  return presets;
}

struct ScenarioOverrides {
  std::optional<double> b_max;
  std::optional<double> p_max;
  std::optional<double> f_ms_max;
  std::optional<double> f_vu_max;   // applied to every user
  std::optional<double> s_min;      // trims the resolution set from below
  std::optional<double> c_t;        // with c_e = 1 - c_t
  std::optional<double> frames;
  bool shadow_fading = false;       // 8 dB lognormal shadowing
  bool amplified = false;           // 10x comm + server budgets (user sweep)
};

struct Scenario {
  std::uint64_t seed = 0;
  int n_users = 0;
  std::vector<double> distances_km;
  std::vector<double> shadow_db;
  SystemParams params;
  std::vector<LogUtility> utilities;
};

// Resolution grid: 4k, 3k, 2k, 1080p, 720p in total pixels.
inline std::vector<double> default_resolution_levels() {
  return {1280.0 * 720, 1920.0 * 1080, 2048.0 * 1080, 3072.0 * 1620,
          4096.0 * 2160};
}

// Urban macro-cell scenario: users dropped uniformly in a 500 m disc around
// the server, path loss 128.1 + 37.6 log10(d_km) dB, noise PSD -174 dBm/Hz,
// with the remaining parameters at their default values.
inline Scenario gen_scenario(std::uint64_t seed, int n_users,
                             const ScenarioOverrides& ov = {}) {
  if (n_users < 1)
    throw std::invalid_argument("gen_scenario: need at least one user");
  Scenario sc;
  sc.seed = seed;
  sc.n_users = n_users;
  Rng rng(seed);

  SystemParams& p = sc.params;
  p.b_max = ov.b_max.value_or(20e9);
  p.p_max = ov.p_max.value_or(30.0);
  p.f_ms_max = ov.f_ms_max.value_or(300e9);
  if (ov.amplified) {
    p.b_max *= 10;
    p.p_max *= 10;
    p.f_ms_max *= 10;
  }
  p.kappa_ms = 1e-27;
  p.c_t = ov.c_t.value_or(0.5);
  p.c_e = ov.c_t ? 1.0 - *ov.c_t : 0.5;

  std::vector<double> levels = default_resolution_levels();
  if (ov.s_min) {
    std::vector<double> trimmed;
    for (double lv : levels)
      if (lv >= *ov.s_min * (1 - 1e-12)) trimmed.push_back(lv);
    if (trimmed.empty()) trimmed.push_back(levels.back());
    levels = trimmed;
  }

  const double frames = ov.frames.value_or(90.0);
  const auto& presets = utility_presets();
  for (int i = 0; i < n_users; ++i) {
    const double d = std::max(0.01, 0.5 * std::sqrt(rng.uniform01()));
    const double x = ov.shadow_fading ? 8.0 * rng.normal() : 0.0;
    const double pl_db = 128.1 + 37.6 * std::log10(d) + x;
    sc.distances_km.push_back(d);
    sc.shadow_db.push_back(x);
    p.g.push_back(std::pow(10.0, -pl_db / 10.0));
    p.sigma2.push_back(3.9810717055349565e-21);  // -174 dBm/Hz in W/Hz
    p.mu.push_back(16.0);
    p.nu.push_back(100.0);
    p.frames.push_back(frames);
    p.p_cir.push_back(0.1);
    p.kappa_vu.push_back(1e-27);
    p.f_vu_max.push_back(ov.f_vu_max.value_or(50e9));
    p.s_domain.push_back(ResolutionDomain::from_levels(levels));
    sc.utilities.push_back(presets[i % presets.size()]);
  }
  p.validate();
  return sc;
}

}  // namespace ucr::sim
