#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "dmfg/mfg.hpp"

using namespace dmfg;

namespace {

struct Problem {
  Grid2D g = Grid2D::square(3.0, 33);
  DynamicsSpec dyn = dynamics_preset("grushin_exp", 0.55, 0.05);
  CouplingSpec coupling;
  MfgConfig cfg{HjbConfig{TimeMesh{1.0, 17}}, {}, {}};
  DensityField m0 = DensityField::gaussian(g, -1.0, -0.5, 0.1);

  explicit Problem(const std::string& name = "nonlocal_smooth") {
    CouplingParams p;
    p.c1 = 0.5;
    p.c_T = 0.5;
    p.delta = 0.75;
    p.g0.kind = "target_well";
    p.g0.kappa = 3.0;
    p.g0.width = 1.5;
    p.g0.center = {1.0, 1.0};
    coupling = builtin_coupling(name, p);
    cfg.fixed_point.d1.method = D1Method::exact;
  }
};

}  // namespace

TEST(Picard, DecoupledConvergesAtOnce) {
  Problem s("decoupled");
  MfgSolution sol = picard_solve(s.dyn, s.coupling, s.m0, s.cfg);
  EXPECT_TRUE(sol.converged);
  EXPECT_EQ(sol.iters, 1u);
  ASSERT_EQ(sol.residual_history.size(), 1u);
  EXPECT_EQ(sol.residual_history[0], 0.0);
}

TEST(Picard, PsiIgnoresMeasureWhenDecoupled) {
  Problem s("decoupled");
  DensityPath a = DensityPath::constant(s.m0, s.cfg.hjb.mesh);
  DensityPath b = DensityPath::constant(DensityField::gaussian(s.g, 1.0, 1.0, 0.2), s.cfg.hjb.mesh);
  PsiResult ra = psi_full(a, s.m0, s.dyn, s.coupling, s.cfg);
  PsiResult rb = psi_full(b, s.m0, s.dyn, s.coupling, s.cfg);
  for (std::size_t k = 0; k < s.cfg.hjb.mesh.nt; ++k)
    for (std::size_t n = 0; n < s.g.size(); ++n) {
      ASSERT_EQ(ra.u[k][n], rb.u[k][n]);
      ASSERT_EQ(ra.fpe.path.field(k)[n], rb.fpe.path.field(k)[n]);
    }
}

TEST(Picard, ResidualDecreasesAndSolutionIsConsistent) {
  Problem s;
  MfgSolution sol = picard_solve(s.dyn, s.coupling, s.m0, s.cfg);
  ASSERT_TRUE(sol.converged);
  EXPECT_LE(sol.residual_history.back(), s.cfg.fixed_point.tol_d1);
  for (std::size_t k = 2; k < sol.residual_history.size(); ++k)
    EXPECT_LT(sol.residual_history[k], sol.residual_history[k - 1]) << "iteration " << k + 1;
  EXPECT_EQ(sol.epsilon, 0.05);
  for (std::size_t n = 0; n < s.g.size(); ++n) EXPECT_EQ(sol.m.field(0)[n], s.m0.field()[n]);
  EXPECT_LT(sol.fpe.mass_error_max, 1e-8);
  EXPECT_FALSE(sol.fpe.positivity_violated);
  // u is the value for the measure that produced m, so solving the FPE again reproduces m
  DensityPath again = solve_fpe_forward(s.m0, sol.u, s.dyn, s.cfg.hjb);
  for (std::size_t k = 0; k < s.cfg.hjb.mesh.nt; ++k)
    for (std::size_t n = 0; n < s.g.size(); ++n) ASSERT_EQ(again.field(k)[n], sol.m.field(k)[n]);
}

TEST(Picard, TwoStartsAgree) {
  Problem s;
  MfgSolution a = picard_solve(s.dyn, s.coupling, s.m0, s.cfg);
  DensityPath other = DensityPath::constant(DensityField::gaussian(s.g, 1.5, 1.5, 0.3), s.cfg.hjb.mesh);
  MfgSolution b = picard_solve(s.dyn, s.coupling, s.m0, s.cfg, other);
  ASSERT_TRUE(a.converged);
  ASSERT_TRUE(b.converged);
  EXPECT_LE(max_d1_over_time(a.m, b.m, s.cfg.fixed_point.d1), 2.0 * s.cfg.fixed_point.tol_d1);
}

TEST(Picard, ReportsNonConvergence) {
  Problem s;
  s.cfg.fixed_point.max_outer_iters = 2;
  s.cfg.fixed_point.tol_d1 = 1e-9;
  MfgSolution sol = picard_solve(s.dyn, s.coupling, s.m0, s.cfg);
  EXPECT_FALSE(sol.converged);
  EXPECT_EQ(sol.residual_history.size(), 2u);
  EXPECT_TRUE(std::any_of(sol.warnings.begin(), sol.warnings.end(),
                          [](const std::string& w) { return w.find("did not reach") != std::string::npos; }));
}

TEST(Picard, WarnsOnUndeclaredMonotonicity) {
  Problem s("decoupled");
  s.coupling.monotone = false;
  MfgSolution sol = picard_solve(s.dyn, s.coupling, s.m0, s.cfg);
  ASSERT_FALSE(sol.warnings.empty());
  EXPECT_NE(sol.warnings.front().find("monotone"), std::string::npos);
}

TEST(Picard, ConfigValidation) {
  Problem s;
  s.cfg.fixed_point.theta = 0.0;
  EXPECT_THROW(picard_solve(s.dyn, s.coupling, s.m0, s.cfg), ConfigError);
  s.cfg.fixed_point.theta = 0.5;
  DensityPath wrong = DensityPath::constant(s.m0, TimeMesh{1.0, 9});
  EXPECT_THROW(picard_solve(s.dyn, s.coupling, s.m0, s.cfg, wrong), InputError);
}

TEST(Sweep, RepeatedEpsilonHasZeroDelta) {
  Problem s;
  s.cfg.fixed_point.eps_schedule = {0.05, 0.05};
  SweepResult r = eps_sweep(s.dyn, s.coupling, s.m0, s.cfg, 1);
  ASSERT_FALSE(r.aborted) << r.message;
  ASSERT_EQ(r.levels.size(), 3u);
  EXPECT_TRUE(std::isnan(r.levels[0].sup_norm_delta));
  EXPECT_EQ(r.levels[1].sup_norm_delta, 0.0);
  EXPECT_EQ(r.levels[1].d1_delta, 0.0);
  EXPECT_EQ(r.levels[2].epsilon, 0.0);
  EXPECT_GT(r.levels[2].sup_norm_delta, 0.0);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  Problem s;
  s.cfg.fixed_point.eps_schedule = {0.1, 0.05};
  SweepResult a = eps_sweep(s.dyn, s.coupling, s.m0, s.cfg, 1);
  SweepResult b = eps_sweep(s.dyn, s.coupling, s.m0, s.cfg, 3);
  ASSERT_EQ(a.levels.size(), b.levels.size());
  for (std::size_t l = 0; l < a.levels.size(); ++l)
    for (std::size_t k = 0; k < s.cfg.hjb.mesh.nt; ++k)
      for (std::size_t n = 0; n < s.g.size(); ++n) ASSERT_EQ(a.levels[l].solution.u[k][n], b.levels[l].solution.u[k][n]);
}

TEST(Sweep, RejectsIncreasingSchedule) {
  Problem s;
  s.cfg.fixed_point.eps_schedule = {0.05, 0.1};
  EXPECT_THROW(eps_sweep(s.dyn, s.coupling, s.m0, s.cfg), ConfigError);
  s.cfg.fixed_point.eps_schedule = {};
  EXPECT_THROW(eps_sweep(s.dyn, s.coupling, s.m0, s.cfg), ConfigError);
}

TEST(Sweep, StopsAtFirstUnconvergedLevel) {
  Problem s;
  s.cfg.fixed_point.eps_schedule = {0.1, 0.05};
  s.cfg.fixed_point.max_outer_iters = 1;
  s.cfg.fixed_point.tol_d1 = 1e-12;
  SweepResult r = eps_sweep(s.dyn, s.coupling, s.m0, s.cfg, 2);
  EXPECT_TRUE(r.aborted);
  EXPECT_TRUE(r.levels.empty());
  EXPECT_NE(r.message.find("did not converge"), std::string::npos);
}
