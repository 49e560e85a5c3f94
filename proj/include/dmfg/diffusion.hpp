#pragma once

// Assembled diffusion operators with homogeneous Neumann closure, and the implicit
// solver used by the IMEX time steppers.
//
// Value equation (non-divergence form):
//   (D u)_i = a_i (u_{i+1} - 2 u_i + u_{i-1}) / dx^2,   ghost u_{-1} = u_1
// Density equation (flux form on the dual cells of the trapezoidal rule):
//   (A m)_i = (J_{i+1/2} - J_{i-1/2}) / vol_i,  J_{i+1/2} = (a_{i+1} m_{i+1} - a_i m_i) / dx,
//   with zero flux through the box boundary.
// Here a = eps + sigma_k^2 / 2 per axis. A is the trapezoidal-weighted adjoint of D,
// and the weighted column sums of A vanish, so A conserves mass exactly.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "dmfg/dynamics.hpp"
#include "dmfg/errors.hpp"
#include "dmfg/grid.hpp"

namespace dmfg {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

enum class DiffusionForm { value, density };

/// Assembles D (value form) or A (density form) on `g` for dynamics `dyn`.
inline SparseMatrix assemble_diffusion(const Grid2D& g, const DynamicsSpec& dyn, DiffusionForm form) {
  const std::size_t n1 = g.n1(), n2 = g.n2();
  std::vector<double> a1(g.size()), a2(g.size());
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      a1[g.index(i, j)] = dyn.diffusivity1(g.x1(i), g.x2(j));
      a2[g.index(i, j)] = dyn.diffusivity2(g.x1(i), g.x2(j));
    }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * g.size());
  const auto add_axis = [&](const std::vector<double>& a, std::size_t n, std::size_t lines, double dx,
                            auto node) {
    const double inv = 1.0 / (dx * dx);
    for (std::size_t line = 0; line < lines; ++line) {
      for (std::size_t k = 0; k < n; ++k) {
        const int row = static_cast<int>(node(k, line));
        if (form == DiffusionForm::value) {
          const double c = a[row] * inv;
          if (k == 0) {
            const int nb = static_cast<int>(node(1, line));
            trip.emplace_back(row, nb, 2.0 * c);
            trip.emplace_back(row, row, -2.0 * c);
          } else if (k + 1 == n) {
            const int nb = static_cast<int>(node(n - 2, line));
            trip.emplace_back(row, nb, 2.0 * c);
            trip.emplace_back(row, row, -2.0 * c);
          } else {
            trip.emplace_back(row, static_cast<int>(node(k - 1, line)), c);
            trip.emplace_back(row, static_cast<int>(node(k + 1, line)), c);
            trip.emplace_back(row, row, -2.0 * c);
          }
        } else {
          // flux form: sum over the faces of the dual cell
          const double vol_scale = (k == 0 || k + 1 == n) ? 2.0 : 1.0;
          if (k > 0) {
            const int nb = static_cast<int>(node(k - 1, line));
            trip.emplace_back(row, nb, vol_scale * a[nb] * inv);
            trip.emplace_back(row, row, -vol_scale * a[row] * inv);
          }
          if (k + 1 < n) {
            const int nb = static_cast<int>(node(k + 1, line));
            trip.emplace_back(row, nb, vol_scale * a[nb] * inv);
            trip.emplace_back(row, row, -vol_scale * a[row] * inv);
          }
        }
      }
    }
  };
  add_axis(a1, n1, n2, g.dx1(), [&](std::size_t k, std::size_t line) { return g.index(k, line); });
  add_axis(a2, n2, n1, g.dx2(), [&](std::size_t k, std::size_t line) { return g.index(line, k); });
  SparseMatrix M(static_cast<int>(g.size()), static_cast<int>(g.size()));
  M.setFromTriplets(trip.begin(), trip.end());
  M.prune(0.0);
  return M;
}

/// Largest diffusivity over the grid (max over axes of eps + sigma_k^2 / 2).
inline double max_diffusivity(const Grid2D& g, const DynamicsSpec& dyn) {
  double m = 0.0;
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j)
      m = std::max({m, dyn.diffusivity1(g.x1(i), g.x2(j)), dyn.diffusivity2(g.x1(i), g.x2(j))});
  return m;
}

/// Factorised (I - dt M) with residual-checked solves and iterative refinement.
class ImplicitStep {
 public:
  ImplicitStep(const SparseMatrix& M, double dt, double tol, int max_refine)
      : op_(M), dt_(dt), tol_(tol), max_refine_(max_refine) {
    identity_ = M.nonZeros() == 0;
    if (identity_) return;
    system_ = SparseMatrix(M.rows(), M.cols());
    system_.setIdentity();
    system_ -= dt * M;
    system_.makeCompressed();
    lu_ = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
    lu_->compute(system_);
    if (lu_->info() != Eigen::Success) throw SolverError("implicit diffusion: factorisation failed");
  }

  /// Solves (I - dt M) x = b.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    if (identity_) return b;
    Eigen::VectorXd x = lu_->solve(b);
    const double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
    double res = (b - system_ * x).lpNorm<Eigen::Infinity>();
    for (int it = 0; it < max_refine_ && res > tol_ * scale; ++it) {
      x += lu_->solve(b - system_ * x);
      res = (b - system_ * x).lpNorm<Eigen::Infinity>();
    }
    if (!(res <= tol_ * scale))
      throw SolverError("implicit diffusion: linear solve did not converge, residual " + format_number(res) +
                        " > " + format_number(tol_ * scale));
    return x;
  }

  const SparseMatrix& op() const noexcept { return op_; }
  double dt() const noexcept { return dt_; }

 private:
  SparseMatrix op_;
  SparseMatrix system_;
  std::unique_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
  double dt_;
  double tol_;
  int max_refine_;
  bool identity_ = false;
};

}  // namespace dmfg
