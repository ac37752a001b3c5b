#include "ucr/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace {

using namespace ucr;
using opt::dinkelbach_solve;
using opt::initial_allocation;
using opt::optimize_resolution;
using opt::OptimizerConfig;
using opt::p3_objective;
using opt::VariableMask;

TEST(Initialization, EqualSplitRule) {
  SystemParams p = ucr::testing::make_params(5);
  Allocation a = initial_allocation(p);
  for (int n = 0; n < 5; ++n) {
    EXPECT_DOUBLE_EQ(a.b[n], p.b_max / 5);  // 20 GHz / 5 = 4 GHz each
    EXPECT_DOUBLE_EQ(a.p[n], p.p_max / 5);
    EXPECT_DOUBLE_EQ(a.f_ms[n], p.f_ms_max / 5);
    EXPECT_DOUBLE_EQ(a.f_vu[n], p.f_vu_max[n]);
    EXPECT_DOUBLE_EQ(a.s[n], p.s_domain[n].midpoint());
  }
  EXPECT_DOUBLE_EQ(a.T, system_delay(p, a));
}

TEST(YUpdate, RatioOfUtilityToCost) {
  SystemParams p = ucr::testing::make_params(3);
  auto utils = ucr::testing::make_utilities(3);
  Allocation a = initial_allocation(p);
  const double u = total_utility(p, utils, a);
  const double c = p.c_e * total_energy(p, a) + p.c_t * a.T;
  // The Dinkelbach update is exactly U/C; p3_objective vanishes there.
  EXPECT_NEAR(p3_objective(p, utils, a, u / c), 0.0, 1e-9 * u);
}

TEST(Resolution, ClampsAtDelayCeiling) {
  SystemParams p = ucr::testing::make_params(1, 7, /*discrete=*/false);
  auto utils = ucr::testing::make_utilities(1);
  Allocation a = initial_allocation(p);
  // y = 0 makes utility the only objective: s rises to the ceiling.
  auto rs = optimize_resolution(p, utils, a, 0.0);
  const double v_or_max = rs.s[0];
  EXPECT_GT(v_or_max, 0.0);
  Allocation b = a;
  b.s[0] = rs.s[0];
  EXPECT_LE(user_delay(p, b, 0), a.T * (1 + 1e-6));
  // Tighten T below the current delay at s_min: conflict flagged.
  Allocation c = a;
  c.s[0] = p.s_domain[0].s_min;
  c.T = user_delay(p, c, 0) * 0.5;
  auto rs2 = optimize_resolution(p, utils, c, 0.0);
  EXPECT_TRUE(rs2.delay_conflict);
  EXPECT_DOUBLE_EQ(rs2.s[0], p.s_domain[0].s_min);
}

TEST(Resolution, DiscretePicksBetterNeighbour) {
  SystemParams p = ucr::testing::make_params(1, 7, /*discrete=*/true);
  auto utils = ucr::testing::make_utilities(1);
  Allocation a = initial_allocation(p);
  a.T *= 10;  // plenty of delay slack
  auto rs = optimize_resolution(p, utils, a, 0.0);
  // Zero cost weight on s means utility decides: the top level wins.
  EXPECT_DOUBLE_EQ(rs.s[0], p.s_domain[0].levels.back());
  EXPECT_TRUE(p.s_domain[0].contains(rs.s[0]));
}

TEST(Resolution, InteriorPointIsStationary) {
  SystemParams p = ucr::testing::make_params(1, 11, /*discrete=*/false);
  auto utils = ucr::testing::make_utilities(1, 12);
  Allocation a = initial_allocation(p);
  a.T *= 100;  // remove the delay ceiling from the picture
  // A large y makes the energy term bite, pulling the peak inside.
  const double y = 1e-6;
  auto rs = optimize_resolution(p, utils, a, y);
  const double s = rs.s[0];
  if (s > p.s_domain[0].s_min * 1.001 && s < p.s_domain[0].s_max * 0.999) {
    const double r = rate(p, 0, a.b[0], a.p[0]);
    const auto value = [&](double sq) {
      return utils[0].value(r, sq) -
             y * p.c_e *
                 (ms_energy(p, 0, sq, a.f_ms[0]) +
                  tx_energy(p, 0, a.p[0], sq, r) +
                  vu_energy(p, 0, sq, a.f_vu[0]));
    };
    const double h = 1e-4 * s;
    const double grad = (value(s + h) - value(s - h)) / (2 * h);
    const double curv = std::abs(value(s + h) - 2 * value(s) + value(s - h)) /
                        (h * h);
    EXPECT_LE(std::abs(grad), 10 * curv * h + 1e-12);
  }
}

TEST(Dinkelbach, DefaultScenarioConverges) {
  SystemParams p = ucr::testing::make_params(5);
  auto utils = ucr::testing::make_utilities(5);
  OptimizerConfig cfg;
  auto res = dinkelbach_solve(p, utils, cfg);
  EXPECT_TRUE(res.converged);
  EXPECT_LE(res.outer_iterations, 30);

  // y trace non-decreasing.
  for (std::size_t i = 1; i < res.trace.y.size(); ++i)
    EXPECT_GE(res.trace.y[i], res.trace.y[i - 1] * (1 - 1e-9));

  // Final allocation feasible, final UCR equals final y within eps1.
  EXPECT_TRUE(check_feasibility(p, res.alloc).empty());
  const double ucr = ucr_value(p, utils, res.alloc);
  EXPECT_NEAR(ucr, res.ucr, cfg.eps1 * res.ucr);

  // Mid-level objective non-decreasing within each outer iteration.
  for (const auto& mids : res.trace.p3_objective) {
    for (std::size_t j = 1; j < mids.size(); ++j)
      EXPECT_GE(mids[j], mids[j - 1] - 1e-9 * (std::abs(mids[j - 1]) + 1.0));
  }

  // Inner P5 optimal values non-decreasing within each FP loop.
  for (const auto& mids : res.trace.p5_values)
    for (const auto& inner : mids)
      for (std::size_t k = 1; k < inner.size(); ++k)
        EXPECT_GE(inner[k], inner[k - 1] - 1e-9 * (std::abs(inner[k - 1]) + 1));
}

TEST(Dinkelbach, BeatsInitialPoint) {
  SystemParams p = ucr::testing::make_params(4, 19);
  auto utils = ucr::testing::make_utilities(4, 23);
  Allocation a = initial_allocation(p);
  const double ucr0 = ucr_value(p, utils, a);
  auto res = dinkelbach_solve(p, utils);
  EXPECT_GT(res.ucr, ucr0);
}

TEST(Dinkelbach, SingletonResolutionSkipsMidAo) {
  SystemParams p = ucr::testing::make_params(2, 3);
  for (auto& d : p.s_domain)
    d = ResolutionDomain::from_levels({2048.0 * 1080});
  auto utils = ucr::testing::make_utilities(2, 3);
  auto res = dinkelbach_solve(p, utils);
  EXPECT_TRUE(res.converged);
  // One P4 solve per outer iteration: each mid list has exactly one entry.
  for (const auto& mids : res.trace.p3_objective)
    EXPECT_EQ(mids.size(), 1u);
}

TEST(Dinkelbach, FrozenComputeMask) {
  SystemParams p = ucr::testing::make_params(2, 5);
  auto utils = ucr::testing::make_utilities(2, 5);
  VariableMask mask;
  mask.compute = false;
  Allocation start = initial_allocation(p);
  auto res = dinkelbach_solve(p, utils, {}, mask, &start);
  EXPECT_TRUE(res.converged);
  for (int n = 0; n < 2; ++n) {
    EXPECT_DOUBLE_EQ(res.alloc.f_ms[n], start.f_ms[n]);
    EXPECT_DOUBLE_EQ(res.alloc.f_vu[n], start.f_vu[n]);
  }
  EXPECT_TRUE(check_feasibility(p, res.alloc).empty());
}

TEST(Dinkelbach, SingleUserScenario) {
  SystemParams p = ucr::testing::make_params(1, 31);
  auto utils = ucr::testing::make_utilities(1, 31);
  auto res = dinkelbach_solve(p, utils);
  EXPECT_TRUE(res.converged);
  EXPECT_TRUE(check_feasibility(p, res.alloc).empty());
  EXPECT_LE(res.audit.worst(), 1e-5);
}

TEST(Dinkelbach, SkewedCostWeights) {
  SystemParams p = ucr::testing::make_params(3, 33);
  auto utils = ucr::testing::make_utilities(3, 33);
  for (double ct : {0.1, 0.9}) {
    p.c_t = ct;
    p.c_e = 1.0 - ct;
    auto res = dinkelbach_solve(p, utils);
    EXPECT_TRUE(res.converged) << "c_t=" << ct;
    EXPECT_TRUE(check_feasibility(p, res.alloc).empty());
    EXPECT_LE(res.audit.worst(), 1e-5) << "c_t=" << ct;
  }
}

TEST(Dinkelbach, FrozenCommMask) {
  SystemParams p = ucr::testing::make_params(2, 9);
  auto utils = ucr::testing::make_utilities(2, 9);
  VariableMask mask;
  mask.comm = false;
  mask.resolution = false;
  Allocation start = initial_allocation(p);
  auto res = dinkelbach_solve(p, utils, {}, mask, &start);
  EXPECT_TRUE(res.converged);
  for (int n = 0; n < 2; ++n) {
    EXPECT_DOUBLE_EQ(res.alloc.b[n], start.b[n]);
    EXPECT_DOUBLE_EQ(res.alloc.p[n], start.p[n]);
    EXPECT_DOUBLE_EQ(res.alloc.s[n], start.s[n]);
  }
  EXPECT_GE(res.ucr, ucr_value(p, utils, start) * (1 - 1e-9));
}

}  // namespace
