#pragma once

// Grushin-type differential operators on a Grid2D.
//
// Stencil policy shared by every operator here: centred differences at interior
// nodes, second-order one-sided differences on the boundary rows/columns. All
// operators are exact on quadratics (first derivatives) and cubics (second
// derivatives) up to rounding.

#include <cmath>
#include <vector>

#include "dmfg/dynamics.hpp"
#include "dmfg/grid.hpp"

namespace dmfg {

namespace detail {

// First derivative along a strided line of n samples with spacing dx.
inline double line_d1(const double* v, std::size_t k, std::size_t n, std::size_t stride, double dx) {
  if (k == 0) return (-3.0 * v[0] + 4.0 * v[stride] - v[2 * stride]) / (2.0 * dx);
  if (k + 1 == n) {
    const double* e = v + k * stride;
    return (3.0 * e[0] - 4.0 * e[-static_cast<std::ptrdiff_t>(stride)] +
            e[-2 * static_cast<std::ptrdiff_t>(stride)]) /
           (2.0 * dx);
  }
  const double* c = v + k * stride;
  return (c[stride] - c[-static_cast<std::ptrdiff_t>(stride)]) / (2.0 * dx);
}

inline double line_d2(const double* v, std::size_t k, std::size_t n, std::size_t stride, double dx) {
  const double h2 = dx * dx;
  const auto s = static_cast<std::ptrdiff_t>(stride);
  if (k == 0) return (2.0 * v[0] - 5.0 * v[s] + 4.0 * v[2 * s] - v[3 * s]) / h2;
  const double* c = v + k * stride;
  if (k + 1 == n) return (2.0 * c[0] - 5.0 * c[-s] + 4.0 * c[-2 * s] - c[-3 * s]) / h2;
  return (c[s] - 2.0 * c[0] + c[-s]) / h2;
}

inline double d1_x1(const ScalarField& f, std::size_t i, std::size_t j) {
  const Grid2D& g = f.grid();
  return line_d1(f.values().data() + j, i, g.n1(), g.n2(), g.dx1());
}
inline double d1_x2(const ScalarField& f, std::size_t i, std::size_t j) {
  const Grid2D& g = f.grid();
  return line_d1(f.values().data() + g.index(i, 0), j, g.n2(), 1, g.dx2());
}
inline double d2_x1(const ScalarField& f, std::size_t i, std::size_t j) {
  const Grid2D& g = f.grid();
  return line_d2(f.values().data() + j, i, g.n1(), g.n2(), g.dx1());
}
inline double d2_x2(const ScalarField& f, std::size_t i, std::size_t j) {
  const Grid2D& g = f.grid();
  return line_d2(f.values().data() + g.index(i, 0), j, g.n2(), 1, g.dx2());
}

inline std::vector<double> sample_h(const DynamicsSpec& dyn, const Grid2D& g) {
  std::vector<double> h(g.n1());
  for (std::size_t i = 0; i < g.n1(); ++i) h[i] = dyn.h(g.x1(i));
  return h;
}

}  // namespace detail

/// D_G u = (d/dx1 u, h(x1) d/dx2 u).
inline VectorField degenerate_gradient(const ScalarField& u, const DynamicsSpec& dyn) {
  u.require_finite("degenerate_gradient");
  const Grid2D& g = u.grid();
  const auto h = detail::sample_h(dyn, g);
  VectorField out(g);
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      out.c1(i, j) = detail::d1_x1(u, i, j);
      out.c2(i, j) = h[i] * detail::d1_x2(u, i, j);
    }
  return out;
}

/// div_G v = d/dx1 v1 + h(x1) d/dx2 v2.
inline ScalarField degenerate_divergence(const VectorField& v, const DynamicsSpec& dyn) {
  v.c1.require_finite("degenerate_divergence");
  v.c2.require_finite("degenerate_divergence");
  const Grid2D& g = v.grid();
  const auto h = detail::sample_h(dyn, g);
  ScalarField out(g);
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j)
      out(i, j) = detail::d1_x1(v.c1, i, j) + h[i] * detail::d1_x2(v.c2, i, j);
  return out;
}

/// Delta_G u = d2/dx1^2 u + h(x1)^2 d2/dx2^2 u.
inline ScalarField degenerate_laplacian(const ScalarField& u, const DynamicsSpec& dyn) {
  u.require_finite("degenerate_laplacian");
  const Grid2D& g = u.grid();
  const auto h = detail::sample_h(dyn, g);
  ScalarField out(g);
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j)
      out(i, j) = detail::d2_x1(u, i, j) + h[i] * h[i] * detail::d2_x2(u, i, j);
  return out;
}

/// Plain Laplacian (the eps-regularisation term).
inline ScalarField laplacian(const ScalarField& u) {
  u.require_finite("laplacian");
  const Grid2D& g = u.grid();
  ScalarField out(g);
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) out(i, j) = detail::d2_x1(u, i, j) + detail::d2_x2(u, i, j);
  return out;
}

/// L u = 1/2 tr(sigma sigma' D^2 u) = 1/2 (sigma1^2 u_11 + sigma2^2 u_22).
inline ScalarField apply_L(const ScalarField& u, const DynamicsSpec& dyn) {
  u.require_finite("apply_L");
  const Grid2D& g = u.grid();
  ScalarField out(g);
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      const double s1 = dyn.sigma1(g.x1(i), g.x2(j));
      const double s2 = dyn.sigma2(g.x1(i), g.x2(j));
      out(i, j) = 0.5 * (s1 * s1 * detail::d2_x1(u, i, j) + s2 * s2 * detail::d2_x2(u, i, j));
    }
  return out;
}

/// Divergence-form adjoint L* m = 1/2 (d2/dx1^2 (sigma1^2 m) + d2/dx2^2 (sigma2^2 m)).
inline ScalarField apply_L_star(const ScalarField& m, const DynamicsSpec& dyn) {
  m.require_finite("apply_L_star");
  const Grid2D& g = m.grid();
  ScalarField q1(g), q2(g);
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      const double s1 = dyn.sigma1(g.x1(i), g.x2(j));
      const double s2 = dyn.sigma2(g.x1(i), g.x2(j));
      q1(i, j) = s1 * s1 * m(i, j);
      q2(i, j) = s2 * s2 * m(i, j);
    }
  ScalarField out(g);
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j)
      out(i, j) = 0.5 * (detail::d2_x1(q1, i, j) + detail::d2_x2(q2, i, j));
  return out;
}

inline ScalarField apply_L_star(const DensityField& m, const DynamicsSpec& dyn) {
  return apply_L_star(m.field(), dyn);
}

/// H(p) = 1/2 |p|^2, pointwise.
inline ScalarField hamiltonian(const VectorField& p) {
  p.c1.require_finite("hamiltonian");
  p.c2.require_finite("hamiltonian");
  ScalarField out(p.grid());
  for (std::size_t k = 0; k < out.grid().size(); ++k)
    out[k] = 0.5 * (p.c1[k] * p.c1[k] + p.c2[k] * p.c2[k]);
  return out;
}

/// alpha* = -D_G u.
inline VectorField optimal_feedback(const ScalarField& u, const DynamicsSpec& dyn) {
  VectorField a = degenerate_gradient(u, dyn);
  for (auto& v : a.c1.values()) v = -v;
  for (auto& v : a.c2.values()) v = -v;
  return a;
}

/// Trapezoidal inner product.
inline double inner(const ScalarField& a, const ScalarField& b) {
  detail::require_same_grid(a.grid(), b.grid(), "inner");
  const Grid2D& g = a.grid();
  double s = 0.0;
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) s += g.weight(i, j) * a(i, j) * b(i, j);
  return s;
}

inline double inner(const VectorField& a, const VectorField& b) {
  return inner(a.c1, b.c1) + inner(a.c2, b.c2);
}

/// Discrete commutator <u, h d2 v2 - d2(h v2)>: the term by which
/// <D_G u, v> + <u, div_G v> departs from zero for fields vanishing near the boundary.
inline double duality_commutator(const ScalarField& u, const VectorField& v, const DynamicsSpec& dyn) {
  const Grid2D& g = u.grid();
  const auto h = detail::sample_h(dyn, g);
  ScalarField hv(g);
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) hv(i, j) = h[i] * v.c2(i, j);
  ScalarField c(g);
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j)
      c(i, j) = h[i] * detail::d1_x2(v.c2, i, j) - detail::d1_x2(hv, i, j);
  return inner(u, c);
}

}  // namespace dmfg
