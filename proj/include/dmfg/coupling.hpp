#pragma once

#include <array>
#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "dmfg/errors.hpp"
#include "dmfg/expression.hpp"
#include "dmfg/grid.hpp"

namespace dmfg {

/// Running cost F(., m) and terminal cost G(., m_T), evaluated on the whole grid
/// at once so that nonlocal terms are computed once per slice.
struct CouplingSpec {
  /// Arguments are nonnegative grid densities; unit mass is not required so that
  /// monotonicity can be probed with unnormalised perturbations.
  std::function<ScalarField(const ScalarField&)> running;
  std::function<ScalarField(const ScalarField&)> terminal;
  bool monotone = false;          ///< F and G nondecreasing in m
  double lipschitz_in_m = 0.0;    ///< declared d1-Lipschitz constant of m -> F(., m)
  bool measure_independent = false;

  ScalarField F(const ScalarField& m) const { return running(m); }
  ScalarField G(const ScalarField& m) const { return terminal(m); }
  ScalarField F(const DensityField& m) const { return running(m.field()); }
  ScalarField G(const DensityField& m) const { return terminal(m.field()); }
};

/// Spatial potential f0 / g0 used by the built-in couplings.
struct PotentialSpec {
  std::string kind = "zero";  ///< zero | constant | target_well | quadratic_well | expression
  double value = 0.0;         ///< constant
  double kappa = 1.0;         ///< target_well depth
  double width = 1.0;         ///< target_well length scale
  std::array<double, 2> center{0.0, 0.0};  ///< target_well centre / quadratic_well offset a
  std::string expression;

  bool operator==(const PotentialSpec&) const = default;
};

inline PlaneFn make_potential(const PotentialSpec& p) {
  if (p.kind == "zero") return [](double, double) { return 0.0; };
  if (p.kind == "constant") return [v = p.value](double, double) { return v; };
  if (p.kind == "target_well") {
    if (!(p.width > 0.0)) throw ConfigError("target_well: width must be > 0");
    return [p](double a, double b) {
      const double r1 = a - p.center[0], r2 = b - p.center[1];
      return p.kappa * (1.0 - std::exp(-(r1 * r1 + r2 * r2) / (2.0 * p.width * p.width)));
    };
  }
  if (p.kind == "quadratic_well") {
    // 1/2 min(|x - a|^2, |x + a|^2)
    return [c = p.center](double a, double b) {
      const double p1 = (a - c[0]) * (a - c[0]) + (b - c[1]) * (b - c[1]);
      const double p2 = (a + c[0]) * (a + c[0]) + (b + c[1]) * (b + c[1]);
      return 0.5 * std::min(p1, p2);
    };
  }
  if (p.kind == "expression") return compile_expression(p.expression);
  throw ConfigError("unknown potential kind '" + p.kind + "'");
}

/// Parameters of builtin_coupling. Unused fields are ignored by a given name.
struct CouplingParams {
  double c1 = 0.0;      ///< running-cost weight of the measure term
  double c_T = 0.0;     ///< terminal weight of the measure term
  double delta = 0.5;   ///< Gaussian kernel width (nonlocal_smooth)
  double power = 1.0;   ///< exponent (local_power)
  PotentialSpec f0;
  PotentialSpec g0;

  bool operator==(const CouplingParams&) const = default;
};

/// (K_delta * m)(x) with the isotropic Gaussian kernel, by separable trapezoidal quadrature.
inline ScalarField gaussian_smooth(const ScalarField& m, double delta) {
  const Grid2D& g = m.grid();
  const std::size_t n1 = g.n1(), n2 = g.n2();
  const double norm = 1.0 / (2.0 * std::numbers::pi * delta * delta);
  const auto kernel_1d = [&](double d) { return std::exp(-d * d / (2.0 * delta * delta)); };
  std::vector<double> k1(n1 * n1), k2(n2 * n2);
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n1; ++b) {
      const double w = (b == 0 || b + 1 == n1) ? 0.5 * g.dx1() : g.dx1();
      k1[a * n1 + b] = kernel_1d(g.x1(a) - g.x1(b)) * w;
    }
  for (std::size_t a = 0; a < n2; ++a)
    for (std::size_t b = 0; b < n2; ++b) {
      const double w = (b == 0 || b + 1 == n2) ? 0.5 * g.dx2() : g.dx2();
      k2[a * n2 + b] = kernel_1d(g.x2(a) - g.x2(b)) * w;
    }
  // tmp(i, l) = sum_k K1(x_i - y_k) w_k m(k, l)
  std::vector<double> tmp(n1 * n2, 0.0);
  const auto mv = m.values();
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t k = 0; k < n1; ++k) {
      const double c = k1[i * n1 + k];
      if (c == 0.0) continue;
      const double* src = mv.data() + k * n2;
      double* dst = tmp.data() + i * n2;
      for (std::size_t l = 0; l < n2; ++l) dst[l] += c * src[l];
    }
  ScalarField out(g);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      double s = 0.0;
      const double* row = tmp.data() + i * n2;
      const double* kr = k2.data() + j * n2;
      for (std::size_t l = 0; l < n2; ++l) s += kr[l] * row[l];
      out(i, j) = norm * s;
    }
  return out;
}

/// Built-in couplings:
///   nonlocal_smooth  F = c1 (K_delta * m) + f0,   G = c_T (K_delta * m_T) + g0
///   local_power      F = c1 m^power + f0,         G = c_T m_T^power + g0
///   decoupled        F = f0,                      G = g0
inline CouplingSpec builtin_coupling(const std::string& name, const CouplingParams& p) {
  const PlaneFn f0 = make_potential(p.f0);
  const PlaneFn g0 = make_potential(p.g0);
  CouplingSpec c;
  if (name == "decoupled") {
    c.running = [f0](const ScalarField& m) { return ScalarField::sample(m.grid(), f0); };
    c.terminal = [g0](const ScalarField& m) { return ScalarField::sample(m.grid(), g0); };
    c.monotone = true;
    c.lipschitz_in_m = 0.0;
    c.measure_independent = true;
    return c;
  }
  if (p.c1 < 0.0 || p.c_T < 0.0) throw ConfigError(name + ": c1 and c_T must be >= 0 for a monotone coupling");
  if (name == "nonlocal_smooth") {
    if (!(p.delta > 0.0)) throw ConfigError("nonlocal_smooth: delta must be > 0");
    const auto build = [delta = p.delta](double weight, PlaneFn base) {
      return [delta, weight, base](const ScalarField& m) {
        ScalarField out = ScalarField::sample(m.grid(), base);
        if (weight != 0.0) {
          const ScalarField conv = gaussian_smooth(m, delta);
          for (std::size_t k = 0; k < out.grid().size(); ++k) out[k] += weight * conv[k];
        }
        return out;
      };
    };
    c.running = build(p.c1, f0);
    c.terminal = build(p.c_T, g0);
    c.monotone = true;
    // |grad K_delta| <= e^{-1/2} / (2 pi delta^3)
    c.lipschitz_in_m = std::max(p.c1, p.c_T) * std::exp(-0.5) / (2.0 * std::numbers::pi * std::pow(p.delta, 3));
    return c;
  }
  if (name == "local_power") {
    if (!(p.power > 0.0)) throw ConfigError("local_power: power must be > 0");
    const auto build = [power = p.power](double weight, PlaneFn base) {
      return [power, weight, base](const ScalarField& m) {
        ScalarField out = ScalarField::sample(m.grid(), base);
        for (std::size_t k = 0; k < out.grid().size(); ++k)
          out[k] += weight * std::pow(std::max(m[k], 0.0), power);
        return out;
      };
    };
    c.running = build(p.c1, f0);
    c.terminal = build(p.c_T, g0);
    c.monotone = true;
    c.lipschitz_in_m = std::numeric_limits<double>::infinity();  // local couplings are not d1-Lipschitz
    return c;
  }
  throw ConfigError("unknown coupling '" + name + "'");
}

/// Spot check of monotonicity: F(x, m + bump) >= F(x, m) and G likewise at every node.
/// The raised measure is deliberately left unnormalised.
inline bool monotonicity_spot_check(const CouplingSpec& c, const DensityField& m, const ScalarField& bump,
                                    double tol = 1e-12) {
  for (double b : bump.values())
    if (b < 0.0) throw InputError("monotonicity_spot_check: bump must be nonnegative");
  ScalarField raised = m.field();
  for (std::size_t k = 0; k < raised.grid().size(); ++k) raised[k] += bump[k];
  for (const auto* fn : {&c.running, &c.terminal}) {
    const ScalarField lo = (*fn)(m.field());
    const ScalarField hi = (*fn)(raised);
    for (std::size_t k = 0; k < lo.grid().size(); ++k)
      if (hi[k] < lo[k] - tol) return false;
  }
  return true;
}

}  // namespace dmfg
