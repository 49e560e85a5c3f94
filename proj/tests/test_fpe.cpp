#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dmfg/fpe.hpp"

using namespace dmfg;

namespace {

DynamicsSpec const_dyn(double s1, double s2, double h, double eps) {
  DynamicsSpec d;
  d.sigma1 = [s1](double, double) { return s1; };
  d.sigma2 = [s2](double, double) { return s2; };
  d.h = [h](double) { return h; };
  d.epsilon = eps;
  return d;
}

ValuePath static_value(const Grid2D& g, const TimeMesh& mesh, const std::function<double(double, double)>& fn) {
  ValuePath u(g, mesh);
  const ScalarField f = ScalarField::sample(g, fn);
  for (std::size_t k = 0; k < mesh.nt; ++k) u[k] = f;
  return u;
}

double l1_to_gaussian(const ScalarField& m, double var) {
  const Grid2D& g = m.grid();
  double e = 0.0;
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      const double r2 = g.x1(i) * g.x1(i) + g.x2(j) * g.x2(j);
      const double exact = std::exp(-r2 / (2 * var)) / (2 * std::numbers::pi * var);
      e += g.weight(i, j) * std::abs(m(i, j) - exact);
    }
  return e;
}

}  // namespace

TEST(Fpe, HeatKernel) {
  const Grid2D g = Grid2D::square(4.0, 65);
  const TimeMesh mesh{1.0, 101};
  const double v0 = 0.1, s = 0.5, eps = 0.05;
  const DynamicsSpec d = const_dyn(s, s, 1.0, eps);
  const FpeResult r =
      solve_fpe(DensityField::gaussian(g, 0, 0, v0), static_value(g, mesh, [](double, double) { return 0.3; }), d,
                HjbConfig{mesh});
  for (std::size_t k : {std::size_t(25), std::size_t(50), std::size_t(100)}) {
    const double var = v0 + (2 * eps + s * s) * mesh.t(k);
    EXPECT_LT(l1_to_gaussian(r.path.field(k), var), 2e-2) << k;
  }
  EXPECT_LT(r.diagnostics.boundary_mass_max, 1e-6);
  EXPECT_TRUE(r.diagnostics.warnings.empty());
}

TEST(Fpe, MassConservedUnderDriftAndDegeneracy) {
  const Grid2D g = Grid2D::square(4.0, 49);
  const TimeMesh mesh{1.0, 81};
  const ValuePath u = static_value(g, mesh, [](double a, double b) { return 0.4 * std::sin(a) * std::cos(b) + 0.1 * a * b; });
  for (const char* name : {"grushin_exp", "sin_sigma", "nondegenerate", "fully_degenerate_x2"}) {
    const FpeResult r = solve_fpe(DensityField::gaussian(g, -1, 0.5, 0.2), u, dynamics_preset(name, 0.5, 0.01),
                                  HjbConfig{mesh});
    for (std::size_t k = 0; k < mesh.nt; ++k)
      EXPECT_NEAR(DensityField::integrate(r.path.field(k)), 1.0, 1e-8) << name;
    EXPECT_LE(r.diagnostics.mass_drift_max, 1e-10) << name;
    EXPECT_GE(r.diagnostics.min_density, -1e-12) << name;
    EXPECT_FALSE(r.diagnostics.positivity_violated) << name;
    EXPECT_NO_THROW(r.path.density(mesh.nt - 1));
  }
}

TEST(Fpe, DeadDirectionDoesNotMove) {
  const Grid2D g = Grid2D::square(3.0, 41);
  const TimeMesh mesh{1.0, 41};
  const DensityField m0 = DensityField::gaussian(g, 0.5, -0.7, 0.15);
  const FpeResult r = solve_fpe(m0, static_value(g, mesh, [](double, double b) { return b; }),
                                dynamics_preset("fully_degenerate_x2", 0.6, 0.0), HjbConfig{mesh});
  const auto marginal = [&g](const ScalarField& m) {
    std::vector<double> out(g.n2(), 0.0);
    for (std::size_t i = 0; i < g.n1(); ++i)
      for (std::size_t j = 0; j < g.n2(); ++j) out[j] += (i == 0 || i + 1 == g.n1() ? 0.5 : 1.0) * g.dx1() * m(i, j);
    return out;
  };
  const auto ref = marginal(m0.field());
  for (std::size_t k = 0; k < mesh.nt; ++k) {
    const auto mk = marginal(r.path.field(k));
    for (std::size_t j = 0; j < g.n2(); ++j) EXPECT_NEAR(mk[j], ref[j], 1e-10);
  }
}

TEST(Fpe, DriftTransportsMassTowardLowValue) {
  const Grid2D g = Grid2D::square(4.0, 41);
  const TimeMesh mesh{1.0, 41};
  // u = x1: feedback -1 along x1, so the mean moves left at unit speed
  const FpeResult r = solve_fpe(DensityField::gaussian(g, 1.0, 0.0, 0.1),
                                static_value(g, mesh, [](double a, double) { return a; }),
                                dynamics_preset("nondegenerate", 0.0), HjbConfig{mesh});
  double mean = 0.0;
  const ScalarField& m = r.path.field(mesh.nt - 1);
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) mean += g.weight(i, j) * g.x1(i) * m(i, j);
  EXPECT_NEAR(mean, 0.0, 1e-3);
}

TEST(Fpe, SabotageBreaksPositivity) {
  const Grid2D g = Grid2D::square(4.0, 41);
  const TimeMesh mesh{1.0, 81};
  FpeOptions bad;
  bad.sabotage_upwind = true;
  const FpeResult r = solve_fpe(DensityField::gaussian(g, 1.0, 0.0, 0.1),
                                static_value(g, mesh, [](double a, double b) { return 0.25 * a * a + 0.2 * b; }),
                                dynamics_preset("grushin_exp", 0.3, 0.0), HjbConfig{mesh}, bad);
  EXPECT_TRUE(r.diagnostics.positivity_violated);
  EXPECT_LT(r.diagnostics.min_density, -1e-12);
}

TEST(Fpe, CflAndMeshErrors) {
  const Grid2D g = Grid2D::square(4.0, 41);
  const TimeMesh mesh{1.0, 3};
  EXPECT_THROW(solve_fpe(DensityField::gaussian(g, 0, 0, 0.2),
                         static_value(g, mesh, [](double a, double) { return 5 * a; }),
                         dynamics_preset("nondegenerate", 0.0), HjbConfig{mesh}),
               ConfigError);
  EXPECT_THROW(solve_fpe(DensityField::gaussian(g, 0, 0, 0.2), static_value(g, mesh, [](double, double) { return 0; }),
                         dynamics_preset("nondegenerate", 0.0), HjbConfig{TimeMesh{1.0, 5}}),
               InputError);
  HjbConfig expl{TimeMesh{1.0, 11}};
  expl.diffusion = DiffusionTreatment::explicit_;
  EXPECT_THROW(solve_fpe(DensityField::gaussian(g, 0, 0, 0.2),
                         static_value(g, expl.mesh, [](double, double) { return 0; }),
                         dynamics_preset("nondegenerate", 1.0, 0.5), expl),
               ConfigError);
}

TEST(Fpe, BoundaryMassWarning) {
  const Grid2D g = Grid2D::square(1.0, 21);
  const TimeMesh mesh{1.0, 21};
  const FpeResult r = solve_fpe(DensityField::gaussian(g, 0, 0, 0.3),
                                static_value(g, mesh, [](double, double) { return 0; }),
                                dynamics_preset("nondegenerate", 1.0), HjbConfig{mesh});
  ASSERT_EQ(r.diagnostics.warnings.size(), 1u);
  EXPECT_NE(r.diagnostics.warnings[0].find("boundary mass"), std::string::npos);
}

TEST(Fpe, DensityGrowthWithinBarrier) {
  const Grid2D g = Grid2D::square(4.0, 49);
  const TimeMesh mesh{1.0, 161};
  const DynamicsSpec d = dynamics_preset("grushin_exp", 0.5, 0.02);
  const ValuePath u = static_value(g, mesh, [](double a, double b) { return 0.25 * (a * a + b * b); });
  const FpeResult r = solve_fpe(DensityField::gaussian(g, 1.0, 1.0, 0.3), u, d, HjbConfig{mesh});
  const double lap = degenerate_laplacian(u[0], d).sup_norm();
  const CoefficientBounds cb = measure_coefficients(d, g);
  const double ct = 2.0 * (lap + cb.sigma_sup * cb.sigma_sup + cb.sigma_d1 * cb.sigma_d1 + cb.sigma_sup * cb.sigma_d2);
  double mx = 0.0;
  for (std::size_t k = 0; k < mesh.nt; ++k) mx = std::max(mx, r.path.field(k).sup_norm());
  EXPECT_LE(mx / r.path.field(0).sup_norm(), std::exp(ct * mesh.T));
}

TEST(SecondMoment, Examples) {
  const Grid2D fine = Grid2D::square(0.1, 161);
  EXPECT_NEAR(second_moment(DensityField::gaussian(fine, 0, 0, 1e-4)), 2e-4, 0.05 * 2e-4);
  const Grid2D box = Grid2D::square(1.0, 201);
  EXPECT_NEAR(second_moment(DensityField::uniform(box)), 2.0 / 3.0, 1e-4);
  const Grid2D g = Grid2D::square(4.0, 81);
  const double a = second_moment(DensityField::gaussian(g, 0.0, 0.0, 0.1));
  const double b = second_moment(DensityField::gaussian(g, 1.0, 0.0, 0.1));
  EXPECT_NEAR(b - a, 1.0, 1e-9);
}
