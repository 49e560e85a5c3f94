#pragma once

// Forward solver for
//   dm/dt - (eps Laplacian + L*) m - div_G(m D_G u) = 0,   m(., 0) = m0
// in flux form on the dual cells of the trapezoidal rule. The transport term is
// div(m W) with W = (du/dx1, h(x1)^2 du/dx2); face velocities come from differences
// of u across the face and the density is taken from the upwind side. Diffusion is
// implicit (or explicit) with the mass-conserving operator of diffusion.hpp.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dmfg/diffusion.hpp"
#include "dmfg/dynamics.hpp"
#include "dmfg/errors.hpp"
#include "dmfg/grid.hpp"
#include "dmfg/hjb.hpp"
#include "dmfg/paths.hpp"

namespace dmfg {

struct FpeOptions {
  /// Takes the density from the downwind side of every face. Only for checking that
  /// the verification suite notices a broken scheme.
  bool sabotage_upwind = false;
  double boundary_mass_budget = 1e-6;
};

struct FpeDiagnostics {
  double mass_drift_max = 0.0;     ///< largest per-step change of the total mass
  double mass_error_max = 0.0;     ///< largest |mass - 1| over slices
  double min_density = 0.0;        ///< most negative value seen before clamping
  double boundary_mass_max = 0.0;
  bool positivity_violated = false;
  std::vector<double> second_moments;
  std::vector<std::string> warnings;
};

struct FpeResult {
  DensityPath path;
  FpeDiagnostics diagnostics;
};

/// Trapezoidal second moment of a (not necessarily validated) density slice.
inline double second_moment(const ScalarField& m) {
  const Grid2D& g = m.grid();
  double s = 0.0;
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      const double a = g.x1(i), b = g.x2(j);
      s += g.weight(i, j) * (a * a + b * b) * m(i, j);
    }
  return s;
}

inline double second_moment(const DensityField& m) { return second_moment(m.field()); }

namespace detail {

inline double trapezoid_mass(const Grid2D& g, const double* m) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) s += g.weight(i, j) * m[g.index(i, j)];
  return s;
}

inline double boundary_mass(const Grid2D& g, const double* m) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j)
      if (i == 0 || j == 0 || i + 1 == g.n1() || j + 1 == g.n2()) s += g.weight(i, j) * m[g.index(i, j)];
  return s;
}

/// Explicit transport increment dt * div(m W); returns the largest outflow CFL number.
inline double transport_increment(const ScalarField& u, const std::vector<double>& h2, const double* m, double dt,
                                  bool downwind, double* out) {
  const Grid2D& g = u.grid();
  const std::size_t n1 = g.n1(), n2 = g.n2();
  const auto uv = u.values();
  std::fill(out, out + g.size(), 0.0);
  std::vector<double> outflow(g.size(), 0.0);
  const auto face = [&](std::size_t a, std::size_t b, double w, double area_inv_a, double area_inv_b) {
    // flux of m W from b into a is positive when W > 0 (mass moves against the gradient)
    const double wp = std::max(w, 0.0), wm = std::min(w, 0.0);
    const double flux = downwind ? wp * m[a] + wm * m[b] : wp * m[b] + wm * m[a];
    out[a] += dt * flux * area_inv_a;
    out[b] -= dt * flux * area_inv_b;
    outflow[a] += -wm * area_inv_a;
    outflow[b] += wp * area_inv_b;
  };
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      const std::size_t k = i * n2 + j;
      const double vol1 = (i == 0 || i + 1 == n1) ? 0.5 * g.dx1() : g.dx1();
      const double vol2 = (j == 0 || j + 1 == n2) ? 0.5 * g.dx2() : g.dx2();
      if (i + 1 < n1) {
        const std::size_t kn = k + n2;
        const double vol1n = (i + 2 == n1) ? 0.5 * g.dx1() : g.dx1();
        const double w = (uv[kn] - uv[k]) / g.dx1();
        face(k, kn, w, 1.0 / vol1, 1.0 / vol1n);
      }
      if (j + 1 < n2) {
        const std::size_t kn = k + 1;
        const double vol2n = (j + 2 == n2) ? 0.5 * g.dx2() : g.dx2();
        const double w = h2[i] * (uv[kn] - uv[k]) / g.dx2();
        face(k, kn, w, 1.0 / vol2, 1.0 / vol2n);
      }
    }
  double cfl = 0.0;
  for (double o : outflow) cfl = std::max(cfl, o * dt);
  return cfl;
}

}  // namespace detail

/// Solves the density equation forward, driven by the value path u_path.
inline FpeResult solve_fpe(const DensityField& m0, const ValuePath& u_path, const DynamicsSpec& dyn,
                           const HjbConfig& cfg, const FpeOptions& opt = {}) {
  cfg.mesh.validate();
  if (!(cfg.mesh == u_path.mesh())) throw InputError("solve_fpe_forward: value path uses a different time mesh");
  detail::require_same_grid(m0.grid(), u_path.grid(), "solve_fpe_forward");
  if (dyn.epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
  const Grid2D& g = m0.grid();
  const std::size_t nt = cfg.mesh.nt;
  const double dt = cfg.mesh.dt();

  if (cfg.diffusion == DiffusionTreatment::explicit_) {
    const double a = max_diffusivity(g, dyn);
    const double dx = std::min(g.dx1(), g.dx2());
    if (a > 0.0 && dt > dx * dx / (4.0 * a))
      throw ConfigError("CFL violated: explicit diffusion bound dt <= dx^2 / (4 (eps + max sigma^2 / 2)) requires dt <= " +
                        format_number(dx * dx / (4.0 * a)));
  }
  const SparseMatrix A = assemble_diffusion(g, dyn, DiffusionForm::density);
  std::optional<ImplicitStep> implicit;
  if (cfg.diffusion == DiffusionTreatment::implicit) implicit.emplace(A, dt, cfg.linear_solver_tol, cfg.max_inner_iters);

  std::vector<double> h2(g.n1());
  for (std::size_t i = 0; i < g.n1(); ++i) h2[i] = dyn.h(g.x1(i)) * dyn.h(g.x1(i));

  FpeResult res{DensityPath(g, cfg.mesh), {}};
  auto& diag = res.diagnostics;
  res.path.field(0) = m0.field();
  diag.second_moments.push_back(second_moment(m0));
  diag.boundary_mass_max = m0.boundary_mass();

  std::vector<double> incr(g.size());
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(g.size()));
  double mass_prev = detail::trapezoid_mass(g, m0.values().data());
  for (std::size_t k = 0; k + 1 < nt; ++k) {
    const double* m = res.path.field(k).values().data();
    const double cfl = detail::transport_increment(u_path[k], h2, m, dt, opt.sabotage_upwind, incr.data());
    if (cfl > 1.0 + 1e-12)
      throw ConfigError("CFL violated: transport outflow dt * |W| / vol = " + format_number(cfl) +
                        " exceeds 1 at t = " + format_number(cfg.mesh.t(k)));
    for (std::size_t n = 0; n < g.size(); ++n) rhs[static_cast<Eigen::Index>(n)] = m[n] + incr[n];
    Eigen::VectorXd next;
    if (implicit) {
      next = implicit->solve(rhs);
    } else {
      next = rhs + dt * (A * Eigen::Map<const Eigen::VectorXd>(m, static_cast<Eigen::Index>(g.size())));
    }
    auto dst = res.path.field(k + 1).values();
    double mn = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
      dst[n] = next[static_cast<Eigen::Index>(n)];
      if (!std::isfinite(dst[n])) throw SolverError("solve_fpe_forward: non-finite density");
      mn = std::min(mn, dst[n]);
    }
    diag.min_density = std::min(diag.min_density, mn);
    const double mass = detail::trapezoid_mass(g, dst.data());
    const double drift = std::abs(mass - mass_prev);
    diag.mass_drift_max = std::max(diag.mass_drift_max, drift);
    if (drift > 1e-8)
      throw ConservationError("solve_fpe_forward: mass drift " + format_number(drift) + " in one step (conservation bug)");
    if (mn < 0.0) {
      if (mn >= -DensityField::kNegativeTolerance) {
        for (double& v : dst) v = std::max(v, 0.0);
        const double clamped = detail::trapezoid_mass(g, dst.data());
        for (double& v : dst) v *= mass / clamped;
      } else {
        diag.positivity_violated = true;
      }
    }
    mass_prev = detail::trapezoid_mass(g, dst.data());
    diag.mass_error_max = std::max(diag.mass_error_max, std::abs(mass_prev - 1.0));
    diag.second_moments.push_back(second_moment(res.path.field(k + 1)));
    diag.boundary_mass_max = std::max(diag.boundary_mass_max, detail::boundary_mass(g, dst.data()));
  }
  if (diag.boundary_mass_max > opt.boundary_mass_budget)
    diag.warnings.push_back("boundary mass " + format_number(diag.boundary_mass_max) + " exceeds budget " +
                            format_number(opt.boundary_mass_budget) + "; enlarge the box");
  return res;
}

inline DensityPath solve_fpe_forward(const DensityField& m0, const ValuePath& u_path, const DynamicsSpec& dyn,
                                     const HjbConfig& cfg, const FpeOptions& opt = {}) {
  return solve_fpe(m0, u_path, dyn, cfg, opt).path;
}

}  // namespace dmfg
