#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dmfg/measures.hpp"
#include "ot_oracle.hpp"

using namespace dmfg;

namespace {

DensityField random_density(const Grid2D& g, std::mt19937_64& rng, double sparsity = 0.0) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> v(g.size());
  for (auto& x : v) x = U(rng) < sparsity ? 0.0 : U(rng);
  return DensityField::normalized(g, v);
}

DensityField point_mass(const Grid2D& g, std::size_t i, std::size_t j) {
  std::vector<double> v(g.size(), 0.0);
  v[g.index(i, j)] = 1.0;
  return DensityField::normalized(g, v);
}

DensityField shifted(const DensityField& m, int di, int dj) {
  const Grid2D& g = m.grid();
  std::vector<double> v(g.size(), 0.0);
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      const auto a = static_cast<long>(i) + di, b = static_cast<long>(j) + dj;
      if (a < 0 || b < 0 || a >= static_cast<long>(g.n1()) || b >= static_cast<long>(g.n2())) continue;
      v[g.index(a, b)] = m.grid().weight(i, j) * m(i, j);
    }
  // shift the node masses, then convert back to a density
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) v[g.index(i, j)] /= g.weight(i, j);
  return DensityField::normalized(g, v);
}

}  // namespace

TEST(W1Exact, FrozenLinearProgramValue) {
  // reference value from an independent LP solve of this fixture
  const Grid2D g = Grid2D::square(1.0, 8);
  std::vector<double> a(g.size()), b(g.size());
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      a[g.index(i, j)] = 1.0 + i + 2.0 * j;
      b[g.index(i, j)] = (8.0 - i) * (1.0 + j % 3);
    }
  const DensityField mu = DensityField::normalized(g, a), nu = DensityField::normalized(g, b);
  EXPECT_NEAR(wasserstein1_exact(mu, nu), 0.43843778913598014, 1e-9);
  EXPECT_NEAR(oracle::min_cost_flow(to_measure(mu), to_measure(nu)), 0.43843778913598014, 1e-9);
}

TEST(W1Exact, TrivialCases) {
  const Grid2D g = Grid2D::square(1.0, 8);
  std::mt19937_64 rng(3);
  const DensityField m = random_density(g, rng);
  EXPECT_EQ(wasserstein1_exact(m, m), 0.0);
  const DensityField p = point_mass(g, 1, 2), q = point_mass(g, 6, 5);
  EXPECT_NEAR(wasserstein1_exact(p, q), std::hypot(5 * g.dx1(), 3 * g.dx2()), 1e-12);
}

TEST(W1Exact, MatchesMinCostFlowOracle) {
  const Grid2D g = Grid2D::square(1.0, 8);
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 25; ++rep) {
    const DensityField mu = random_density(g, rng, rep % 3 == 0 ? 0.5 : 0.0);
    const DensityField nu = random_density(g, rng, rep % 4 == 0 ? 0.6 : 0.0);
    EXPECT_NEAR(wasserstein1_exact(mu, nu), oracle::min_cost_flow(to_measure(mu), to_measure(nu)), 1e-9) << rep;
  }
}

TEST(W1Exact, SizeGuard) {
  const Grid2D g = Grid2D::square(1.0, 65);
  const DensityField u = DensityField::uniform(g);
  try {
    wasserstein1_exact(u, DensityField::gaussian(g, 0, 0, 0.1));
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("sinkhorn"), std::string::npos);
  }
}

TEST(W1Exact, MetricAxioms) {
  const Grid2D g = Grid2D::square(1.0, 8);
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const DensityField a = random_density(g, rng), b = random_density(g, rng), c = random_density(g, rng);
    const double ab = wasserstein1_exact(a, b), ba = wasserstein1_exact(b, a);
    EXPECT_NEAR(ab, ba, 1e-9);
    EXPECT_LE(ab, wasserstein1_exact(a, c) + wasserstein1_exact(c, b) + 1e-8);
    EXPECT_GT(ab, 0.0);
  }
}

TEST(W1Exact, TranslationProperties) {
  const Grid2D g = Grid2D::square(2.0, 12);
  std::vector<double> a(g.size(), 0.0), b(g.size(), 0.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  for (std::size_t i = 2; i < 7; ++i)
    for (std::size_t j = 2; j < 7; ++j) {
      a[g.index(i, j)] = U(rng);
      b[g.index(i, j)] = U(rng);
    }
  const DensityField mu = DensityField::normalized(g, a), nu = DensityField::normalized(g, b);
  const double base = wasserstein1_exact(mu, nu);
  EXPECT_NEAR(wasserstein1_exact(shifted(mu, 3, 2), shifted(nu, 3, 2)), base, 1e-9);
  const double v = std::hypot(2 * g.dx1(), 1 * g.dx2());
  EXPECT_NEAR(wasserstein1_exact(mu, shifted(mu, 2, 1)), v, 1e-9);
  EXPECT_LE(std::abs(wasserstein1_exact(mu, shifted(nu, 2, 1)) - base), v + 1e-9);
}

TEST(Sinkhorn, IdenticalAndTwoPoint) {
  const Grid2D g = Grid2D::square(1.0, 8);
  std::mt19937_64 rng(21);
  const DensityField m = random_density(g, rng);
  const SinkhornResult same = wasserstein1_sinkhorn(m, m, default_sinkhorn_reg(g));
  EXPECT_GE(same.value, 0.0);
  EXPECT_LE(same.value, 1e-3);
  EXPECT_NEAR(same.debiased, 0.0, 1e-3);
  const DensityField p = point_mass(g, 0, 0), q = point_mass(g, 7, 3);
  const double d = std::hypot(7 * g.dx1(), 3 * g.dx2());
  EXPECT_NEAR(wasserstein1_sinkhorn(p, q, default_sinkhorn_reg(g)).value, d, 0.02 * d);
  EXPECT_THROW(wasserstein1_sinkhorn(p, q, 0.0), InputError);
}

TEST(Sinkhorn, CloseToExactAndAboveIt) {
  const Grid2D g = Grid2D::square(1.0, 8);
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const DensityField mu = random_density(g, rng), nu = random_density(g, rng);
    const double exact = wasserstein1_exact(mu, nu);
    const SinkhornResult s = wasserstein1_sinkhorn(mu, nu, default_sinkhorn_reg(g));
    EXPECT_GE(s.value, exact - 1e-9);
    EXPECT_LE(std::abs(s.value - exact), 0.02 * exact);
  }
}

TEST(Sinkhorn, ConvergesAsRegShrinks) {
  const Grid2D g = Grid2D::square(1.0, 8);
  std::mt19937_64 rng(41);
  const DensityField mu = random_density(g, rng), nu = random_density(g, rng);
  const double exact = wasserstein1_exact(mu, nu);
  double prev = std::numeric_limits<double>::infinity();
  for (double reg : {0.2, 0.05, 0.01, 0.002}) {
    const double gap = wasserstein1_sinkhorn(mu, nu, reg).value - exact;
    EXPECT_GE(gap, -1e-9);
    EXPECT_LE(gap, prev + 1e-12);
    prev = gap;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Sinkhorn, NonConvergenceReportsMarginals) {
  const Grid2D g = Grid2D::square(1.0, 8);
  std::mt19937_64 rng(51);
  const DensityField mu = random_density(g, rng), nu = random_density(g, rng);
  try {
    wasserstein1_sinkhorn(mu, nu, 1e-4, 2);
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_NE(std::string(e.what()).find("marginal"), std::string::npos);
  }
}

TEST(D1, UncoarsenedEqualsExact) {
  const Grid2D g = Grid2D::square(1.0, 10);
  std::mt19937_64 rng(61);
  D1Options exact;
  exact.method = D1Method::exact;
  exact.max_nodes_per_axis = 10;
  D1Options sk;
  sk.max_nodes_per_axis = 10;
  for (int rep = 0; rep < 5; ++rep) {
    const DensityField mu = random_density(g, rng), nu = random_density(g, rng);
    const double w = wasserstein1_exact(mu, nu);
    EXPECT_NEAR(d1_distance(mu, nu, exact), w, 1e-9);
    EXPECT_NEAR(d1_distance(mu, nu, sk), w, 0.02 * w);
  }
  const DensityField m = random_density(g, rng);
  EXPECT_EQ(d1_distance(m, m), 0.0);
}

TEST(D1, CoarseningErrorBoundedByBlockSize) {
  const Grid2D g = Grid2D::square(4.0, 65);
  const DensityField a = DensityField::gaussian(g, -1.0, 0.0, 0.2), b = DensityField::gaussian(g, 1.0, 0.5, 0.3);
  D1Options coarse;
  coarse.method = D1Method::exact;
  const double d16 = d1_distance(a, b, coarse);
  coarse.max_nodes_per_axis = 33;
  const double d33 = d1_distance(a, b, coarse);
  // blocks of 5 and 2 nodes: each atom moves by at most half a block diagonal
  EXPECT_NEAR(d16, d33, std::hypot(2.5 * g.dx1(), 2.5 * g.dx2()) * 2);
  EXPECT_NEAR(d33, std::hypot(2.0, 0.5), 0.1);
}

TEST(Holder, StaticPathAndErrors) {
  const Grid2D g = Grid2D::square(1.0, 9);
  const DensityPath p = DensityPath::constant(DensityField::gaussian(g, 0, 0, 0.1), TimeMesh{1.0, 17});
  const HolderEstimate h = holder_halftime_estimate(p);
  EXPECT_FALSE(h.slope.has_value());
  EXPECT_EQ(h.max_ratio, 0.0);
  EXPECT_GE(h.pairs.size(), 4u);
  EXPECT_THROW(holder_halftime_estimate(DensityPath::constant(DensityField::uniform(g), TimeMesh{1.0, 3})),
               InputError);
}

TEST(Holder, TranslatingPathHasSlopeOne) {
  // m_t = point mass moving at speed 2 along x1: d1 = 2 |t - s|
  const Grid2D g = Grid2D::square(2.0, 33);
  const TimeMesh mesh{1.0, 9};
  DensityPath p(g, mesh);
  for (std::size_t k = 0; k < mesh.nt; ++k) p.field(k) = point_mass(g, 8 + 2 * k, 16).field();
  D1Options o;
  o.max_nodes_per_axis = 33;
  const HolderEstimate h = holder_halftime_estimate(p, o);
  ASSERT_TRUE(h.slope.has_value());
  EXPECT_NEAR(*h.slope, 1.0, 1e-3);
  EXPECT_NEAR(h.max_ratio, 2.0, 1e-3);
}
