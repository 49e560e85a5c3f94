#pragma once

// Backward solver for
//   -du/dt - (eps Laplacian + L) u + 1/2 |D_G u|^2 = F(x, m_t),   u(., T) = G(., m_T)
// with a frozen density path. IMEX: the diffusion is implicit (or explicit under a
// parabolic CFL bound), the Hamiltonian is explicit through a monotone flux whose
// x2 slopes carry the weight h(x1)^2.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dmfg/coupling.hpp"
#include "dmfg/diffusion.hpp"
#include "dmfg/dynamics.hpp"
#include "dmfg/errors.hpp"
#include "dmfg/grid.hpp"
#include "dmfg/operators.hpp"
#include "dmfg/paths.hpp"

namespace dmfg {

enum class HamiltonianFlux { godunov, engquist_osher };
enum class DiffusionTreatment { implicit, explicit_ };

inline std::string to_string(HamiltonianFlux f) {
  return f == HamiltonianFlux::godunov ? "godunov" : "engquist_osher";
}
inline std::string to_string(DiffusionTreatment d) {
  return d == DiffusionTreatment::implicit ? "implicit" : "explicit";
}

struct HjbConfig {
  TimeMesh mesh;
  HamiltonianFlux flux = HamiltonianFlux::godunov;
  DiffusionTreatment diffusion = DiffusionTreatment::implicit;
  double linear_solver_tol = 1e-12;
  int max_inner_iters = 5;
};

/// Lipschitz constant of a field: max over adjacent node pairs (axes and diagonals)
/// of |difference| / distance, restricted to nodes inside `frame`.
inline double lipschitz_estimate(const ScalarField& u, double frame = 0.0) {
  const Grid2D& g = u.grid();
  const double dd = std::hypot(g.dx1(), g.dx2());
  double best = 0.0;
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      if (!g.inside_frame(i, j, frame)) continue;
      const double v = u(i, j);
      const auto consider = [&](std::size_t a, std::size_t b, double dist) {
        if (g.inside_frame(a, b, frame)) best = std::max(best, std::abs(u(a, b) - v) / dist);
      };
      if (i + 1 < g.n1()) consider(i + 1, j, g.dx1());
      if (j + 1 < g.n2()) consider(i, j + 1, g.dx2());
      if (i + 1 < g.n1() && j + 1 < g.n2()) consider(i + 1, j + 1, dd);
      if (i + 1 < g.n1() && j > 0) consider(i + 1, j - 1, dd);
    }
  return best;
}

namespace detail {

/// Monotone numerical Hamiltonian 1/2 (p1^2 + h^2 p2^2) at every node, Neumann closure.
/// Also reports the largest local transport CFL number dt-free: |p1|/dx1 + h^2 |p2|/dx2.
inline double numerical_hamiltonian(const ScalarField& u, const std::vector<double>& h2, HamiltonianFlux flux,
                                    std::vector<double>& out) {
  const Grid2D& g = u.grid();
  const std::size_t n1 = g.n1(), n2 = g.n2();
  const double inv1 = 1.0 / g.dx1(), inv2 = 1.0 / g.dx2();
  double speed = 0.0;
  const auto axis = [flux](double pm, double pp) {
    const double a = std::max(pm, 0.0), b = std::min(pp, 0.0);
    if (flux == HamiltonianFlux::godunov) return 0.5 * std::max(a * a, b * b);
    return 0.5 * (a * a + b * b);
  };
  const auto vals = u.values();
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      const std::size_t k = i * n2 + j;
      const double c = vals[k];
      const double p1m = i > 0 ? (c - vals[k - n2]) * inv1 : 0.0;
      const double p1p = i + 1 < n1 ? (vals[k + n2] - c) * inv1 : 0.0;
      const double p2m = j > 0 ? (c - vals[k - 1]) * inv2 : 0.0;
      const double p2p = j + 1 < n2 ? (vals[k + 1] - c) * inv2 : 0.0;
      out[k] = axis(p1m, p1p) + h2[i] * axis(p2m, p2p);
      const double s1 = std::max(std::max(p1m, 0.0), -std::min(p1p, 0.0)) * inv1;
      const double s2 = h2[i] * std::max(std::max(p2m, 0.0), -std::min(p2p, 0.0)) * inv2;
      const double s = flux == HamiltonianFlux::godunov ? s1 + s2
                                                        : (std::max(p1m, 0.0) - std::min(p1p, 0.0)) * inv1 +
                                                              h2[i] * (std::max(p2m, 0.0) - std::min(p2p, 0.0)) * inv2;
      speed = std::max(speed, s);
    }
  return speed;
}

inline Eigen::Map<const Eigen::VectorXd> as_vector(const ScalarField& f) {
  return {f.values().data(), static_cast<Eigen::Index>(f.values().size())};
}

}  // namespace detail

/// A-priori bound on |D_G u| used by the transport CFL check:
/// (Lip(G) + T max_t Lip(F_t)) * max(1, sup h^2).
inline double a_priori_gradient_bound(const ScalarField& terminal, const std::vector<ScalarField>& running,
                                      const DynamicsSpec& dyn, double T) {
  double lf = 0.0;
  for (const auto& f : running) lf = std::max(lf, lipschitz_estimate(f));
  double hs = 0.0;
  const Grid2D& g = terminal.grid();
  for (std::size_t i = 0; i < g.n1(); ++i) hs = std::max(hs, std::abs(dyn.h(g.x1(i))));
  return (lipschitz_estimate(terminal) + T * lf) * std::max(1.0, hs * hs);
}

/// Validates the time step against the transport and (if explicit) parabolic CFL bounds.
inline void check_hjb_cfl(const Grid2D& g, const DynamicsSpec& dyn, const HjbConfig& cfg, double grad_bound) {
  const double dt = cfg.mesh.dt();
  const double dx = std::min(g.dx1(), g.dx2());
  if (grad_bound > 0.0 && dt > dx / (2.0 * grad_bound))
    throw ConfigError("CFL violated: transport bound dt <= dx / (2 max|D_G u|) requires dt <= " +
                      format_number(dx / (2.0 * grad_bound)) + ", got dt = " + format_number(dt));
  if (cfg.diffusion == DiffusionTreatment::explicit_) {
    const double a = max_diffusivity(g, dyn);
    if (a > 0.0 && dt > dx * dx / (4.0 * a))
      throw ConfigError("CFL violated: explicit diffusion bound dt <= dx^2 / (4 (eps + max sigma^2 / 2)) requires dt <= " +
                        format_number(dx * dx / (4.0 * a)) + ", got dt = " + format_number(dt));
  }
}

/// Solves the value equation backward from u(., T) = G(., m_T).
inline ValuePath solve_hjb_backward(const DynamicsSpec& dyn, const CouplingSpec& coupling, const DensityPath& m_path,
                                    const HjbConfig& cfg) {
  cfg.mesh.validate();
  if (!(cfg.mesh == m_path.mesh())) throw InputError("solve_hjb_backward: density path uses a different time mesh");
  if (dyn.epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
  const Grid2D& g = m_path.grid();
  const std::size_t nt = cfg.mesh.nt;
  const double dt = cfg.mesh.dt();
  const double T = cfg.mesh.T;

  std::vector<ScalarField> running;
  running.reserve(nt);
  for (std::size_t k = 0; k < nt; ++k) running.push_back(coupling.F(m_path.field(k)));
  ValuePath u(g, cfg.mesh);
  u[nt - 1] = coupling.G(m_path.field(nt - 1));
  u[nt - 1].require_finite("terminal cost");

  check_hjb_cfl(g, dyn, cfg, a_priori_gradient_bound(u[nt - 1], running, dyn, T));

  const SparseMatrix D = assemble_diffusion(g, dyn, DiffusionForm::value);
  std::optional<ImplicitStep> implicit;
  if (cfg.diffusion == DiffusionTreatment::implicit) implicit.emplace(D, dt, cfg.linear_solver_tol, cfg.max_inner_iters);

  std::vector<double> h2(g.n1());
  for (std::size_t i = 0; i < g.n1(); ++i) h2[i] = dyn.h(g.x1(i)) * dyn.h(g.x1(i));

  std::vector<double> ham(g.size());
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(g.size()));
  double f_sup = 0.0;
  for (const auto& f : running) f_sup = std::max(f_sup, f.sup_norm());

  for (std::size_t k = nt - 1; k-- > 0;) {
    const ScalarField& next = u[k + 1];
    const double speed = detail::numerical_hamiltonian(next, h2, cfg.flux, ham);
    if (speed * dt > 1.0 + 1e-12)
      throw SolverError("CFL violated during solve at t = " + format_number(cfg.mesh.t(k)) +
                        ": dt * (|p1|/dx1 + h^2 |p2|/dx2) = " + format_number(speed * dt));
    const auto nv = next.values();
    for (std::size_t n = 0; n < g.size(); ++n)
      rhs[static_cast<Eigen::Index>(n)] = nv[n] - dt * ham[n] + dt * running[k][n];
    Eigen::VectorXd sol;
    if (implicit) {
      sol = implicit->solve(rhs);
    } else {
      sol = rhs + dt * (D * detail::as_vector(next));
    }
    auto dst = u[k].values();
    for (std::size_t n = 0; n < g.size(); ++n) dst[n] = sol[static_cast<Eigen::Index>(n)];
    u[k].require_finite("solve_hjb_backward");
  }

  const double bound = u[nt - 1].sup_norm() + T * f_sup + 1e-6;
  if (u.sup_norm() > bound)
    throw SolverError("solve_hjb_backward: maximum principle violated, |u| = " + format_number(u.sup_norm()) +
                      " > |G| + T |F| = " + format_number(bound));
  return u;
}

/// The scheme's own spatial operator applied to a field: F + (eps Lap + L) G - H_num(G),
/// with the Neumann-assembled diffusion and the monotone numerical Hamiltonian.
/// sup |.| over the running costs is the barrier constant C1 of the time-shift bound
/// |u(t) - u(T)| <= C1 (T - t), which the discrete scheme satisfies exactly.
inline ScalarField scheme_generator(const ScalarField& G, const ScalarField& F, const DynamicsSpec& dyn,
                                    HamiltonianFlux flux = HamiltonianFlux::godunov) {
  const Grid2D& g = G.grid();
  const SparseMatrix D = assemble_diffusion(g, dyn, DiffusionForm::value);
  std::vector<double> h2(g.n1());
  for (std::size_t i = 0; i < g.n1(); ++i) h2[i] = dyn.h(g.x1(i)) * dyn.h(g.x1(i));
  std::vector<double> ham(g.size());
  detail::numerical_hamiltonian(G, h2, flux, ham);
  const Eigen::VectorXd dg = D * detail::as_vector(G);
  ScalarField out(g);
  for (std::size_t n = 0; n < g.size(); ++n) out[n] = F[n] + dg[static_cast<Eigen::Index>(n)] - ham[n];
  return out;
}

/// Brute-force Hopf-Lax formula u(x, t) = min_y [G(y) + |x - y|^2 / (2 (T - t))]
/// over all grid nodes y. Exact viscosity solution of -u_t + 1/2 |Du|^2 = 0 on the plane.
inline ScalarField hopf_lax_oracle(const ScalarField& terminal, double t, double T) {
  if (!(t < T)) throw InputError("hopf_lax_oracle: requires t < T");
  const Grid2D& g = terminal.grid();
  const double inv = 1.0 / (2.0 * (T - t));
  std::vector<double> y1(g.n1()), y2(g.n2());
  for (std::size_t i = 0; i < g.n1(); ++i) y1[i] = g.x1(i);
  for (std::size_t j = 0; j < g.n2(); ++j) y2[j] = g.x2(j);
  ScalarField out(g);
  const auto tv = terminal.values();
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < g.n1(); ++a) {
        const double d1 = (g.x1(i) - y1[a]) * (g.x1(i) - y1[a]) * inv;
        if (d1 >= best) continue;
        const double* row = tv.data() + a * g.n2();
        for (std::size_t b = 0; b < g.n2(); ++b) {
          const double d2 = (g.x2(j) - y2[b]) * (g.x2(j) - y2[b]) * inv;
          best = std::min(best, row[b] + d1 + d2);
        }
      }
      out(i, j) = best;
    }
  return out;
}

/// Pointwise residual -du/dt - eps Lap u - L u + 1/2 |D_G u|^2 - F(., m_t) at interior
/// time slices k = 1..nt-2 (centred time differences). Entry k-1 holds slice k.
inline std::vector<ScalarField> pde_residual(const ValuePath& u, const DynamicsSpec& dyn,
                                             const CouplingSpec& coupling, const DensityPath& m_path) {
  if (u.nt() < 3) throw InputError("pde_residual: needs nt >= 3");
  if (!(u.mesh() == m_path.mesh())) throw InputError("pde_residual: time meshes differ");
  const double dt = u.dt();
  std::vector<ScalarField> out;
  out.reserve(u.nt() - 2);
  for (std::size_t k = 1; k + 1 < u.nt(); ++k) {
    const ScalarField& s = u[k];
    const ScalarField lap = laplacian(s);
    const ScalarField Lu = apply_L(s, dyn);
    const ScalarField H = hamiltonian(degenerate_gradient(s, dyn));
    const ScalarField F = coupling.F(m_path.field(k));
    ScalarField r(s.grid());
    for (std::size_t n = 0; n < s.grid().size(); ++n) {
      const double ut = (u[k + 1][n] - u[k - 1][n]) / (2.0 * dt);
      r[n] = -ut - dyn.epsilon * lap[n] - Lu[n] + H[n] - F[n];
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dmfg
