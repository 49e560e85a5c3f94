#pragma once

// Kantorovich-Rubinstein (W1) distances between grid measures.
//
//   wasserstein1_exact    transportation simplex on the spanning-tree basis, exact LP optimum
//   wasserstein1_sinkhorn annealed, log-stabilised entropic OT with a feasible rounded plan
//   d1_distance           block-coarsened W1 of the signed difference, for path comparisons
//   holder_halftime_estimate  d1(m_s, m_t) / |s - t|^{1/2} over dyadic time pairs

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dmfg/errors.hpp"
#include "dmfg/grid.hpp"
#include "dmfg/paths.hpp"

namespace dmfg {

using Point = std::array<double, 2>;

/// A finitely supported measure: atoms at `points` with nonnegative `masses`.
struct DiscreteMeasure {
  std::vector<Point> points;
  std::vector<double> masses;

  double total() const { return std::accumulate(masses.begin(), masses.end(), 0.0); }
};

/// The node masses w_ij m_ij of a density, dropping empty nodes.
inline DiscreteMeasure to_measure(const DensityField& m) {
  DiscreteMeasure out;
  const Grid2D& g = m.grid();
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      const double w = g.weight(i, j) * m(i, j);
      if (w > 0.0) {
        out.points.push_back({g.x1(i), g.x2(j)});
        out.masses.push_back(w);
      }
    }
  return out;
}

inline double euclid(const Point& p, const Point& q) { return std::hypot(p[0] - q[0], p[1] - q[1]); }

namespace detail {

/// Transportation simplex: min sum c_ij x_ij s.t. row sums a, column sums b, x >= 0.
/// Basis kept as a spanning tree over rows 0..n-1 and columns n..n+m-1.
class TransportSimplex {
 public:
  TransportSimplex(std::vector<double> a, std::vector<double> b, std::vector<double> cost)
      : n_(a.size()), m_(b.size()), a_(std::move(a)), b_(std::move(b)), c_(std::move(cost)) {}

  double solve() {
    if (n_ == 0 || m_ == 0) return 0.0;
    initial_basis();
    const std::size_t cells = n_ * m_;
    const std::size_t block = std::max<std::size_t>(
        std::min<std::size_t>(cells, 64), static_cast<std::size_t>(std::sqrt(static_cast<double>(cells))));
    double cmax = 0.0;
    for (double v : c_) cmax = std::max(cmax, std::abs(v));
    const double tol = 1e-13 * std::max(1.0, cmax);
    std::size_t cursor = 0;
    const std::size_t max_pivots = 50 * (n_ + m_) * (n_ + m_) + 1000;
    for (std::size_t pivot = 0; pivot < max_pivots; ++pivot) {
      compute_potentials();
      // block search pricing
      std::size_t best = cells;
      double best_r = -tol;
      std::size_t scanned = 0;
      while (scanned < cells) {
        const std::size_t end = std::min(scanned + block, cells);
        for (; scanned < end; ++scanned) {
          const std::size_t cell = (cursor + scanned) % cells;
          const std::size_t i = cell / m_, j = cell % m_;
          const double r = c_[cell] - pot_[i] - pot_[n_ + j];
          if (r < best_r) {
            best_r = r;
            best = cell;
          }
        }
        if (best != cells) break;
      }
      if (best == cells) return objective();
      cursor = (best + 1) % cells;
      pivot_on(best / m_, best % m_);
    }
    throw SolverError("wasserstein1_exact: simplex pivot limit reached");
  }

 private:
  struct Edge {
    std::size_t row, col;  // col already offset by n
    double flow;
    bool alive;
  };

  void add_edge(std::size_t i, std::size_t j, double flow) {
    const std::size_t id = edges_.size();
    edges_.push_back({i, n_ + j, flow, true});
    adj_[i].push_back(id);
    adj_[n_ + j].push_back(id);
  }

  void initial_basis() {
    adj_.assign(n_ + m_, {});
    edges_.clear();
    std::vector<double> ra = a_, rb = b_;
    std::size_t i = 0, j = 0;
    for (;;) {
      const double x = std::max(0.0, std::min(ra[i], rb[j]));
      add_edge(i, j, x);
      ra[i] -= x;
      rb[j] -= x;
      if (i + 1 == n_ && j + 1 == m_) break;
      if (j + 1 == m_ || (i + 1 < n_ && ra[i] <= rb[j])) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  std::size_t other(std::size_t e, std::size_t node) const {
    return edges_[e].row == node ? edges_[e].col : edges_[e].row;
  }

  double edge_cost(std::size_t e) const { return c_[edges_[e].row * m_ + (edges_[e].col - n_)]; }

  void compute_potentials() {
    pot_.assign(n_ + m_, 0.0);
    parent_.assign(n_ + m_, npos);
    parent_edge_.assign(n_ + m_, npos);
    depth_.assign(n_ + m_, 0);
    std::vector<std::size_t> stack{0};
    std::vector<char> seen(n_ + m_, 0);
    seen[0] = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t e : adj_[v]) {
        if (!edges_[e].alive) continue;
        const std::size_t w = other(e, v);
        if (seen[w]) continue;
        seen[w] = 1;
        parent_[w] = v;
        parent_edge_[w] = e;
        depth_[w] = depth_[v] + 1;
        // u_i + v_j = c_ij
        pot_[w] = edge_cost(e) - pot_[v];
        stack.push_back(w);
      }
    }
  }

  void pivot_on(std::size_t i, std::size_t j) {
    // tree path between row node i and column node n+j
    std::size_t x = i, y = n_ + j;
    std::vector<std::size_t> from_x, from_y;
    while (depth_[x] > depth_[y]) {
      from_x.push_back(parent_edge_[x]);
      x = parent_[x];
    }
    while (depth_[y] > depth_[x]) {
      from_y.push_back(parent_edge_[y]);
      y = parent_[y];
    }
    while (x != y) {
      from_x.push_back(parent_edge_[x]);
      x = parent_[x];
      from_y.push_back(parent_edge_[y]);
      y = parent_[y];
    }
    // Cycle: entering (i, j) is +. Walking from column j back to row i the tree
    // edges alternate -, +, -, ..., -.
    std::vector<std::size_t> path(from_y.begin(), from_y.end());
    path.insert(path.end(), from_x.rbegin(), from_x.rend());
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = npos;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const double f = edges_[path[k]].flow;
      if (f < theta) {
        theta = f;
        leaving = path[k];
      }
    }
    theta = std::max(theta, 0.0);
    for (std::size_t k = 0; k < path.size(); ++k) edges_[path[k]].flow += (k % 2 == 0 ? -theta : theta);
    edges_[leaving].alive = false;
    edges_[leaving].flow = 0.0;
    add_edge(i, j, theta);
    if (edges_.size() > 8 * (n_ + m_)) compact();
  }

  void compact() {
    std::vector<Edge> keep;
    for (const auto& e : edges_)
      if (e.alive) keep.push_back(e);
    edges_ = std::move(keep);
    adj_.assign(n_ + m_, {});
    for (std::size_t id = 0; id < edges_.size(); ++id) {
      adj_[edges_[id].row].push_back(id);
      adj_[edges_[id].col].push_back(id);
    }
  }

  double objective() const {
    double s = 0.0;
    for (const auto& e : edges_)
      if (e.alive && e.flow > 0.0) s += e.flow * c_[e.row * m_ + (e.col - n_)];
    return s;
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t n_, m_;
  std::vector<double> a_, b_, c_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<double> pot_;
  std::vector<std::size_t> parent_, parent_edge_, depth_;
};

inline std::vector<double> cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  std::vector<double> c(mu.points.size() * nu.points.size());
  for (std::size_t i = 0; i < mu.points.size(); ++i)
    for (std::size_t j = 0; j < nu.points.size(); ++j) c[i * nu.points.size() + j] = euclid(mu.points[i], nu.points[j]);
  return c;
}

/// Rescales nu so that both measures carry the same total (guards rounding drift).
inline void balance(const DiscreteMeasure& mu, DiscreteMeasure& nu) {
  const double ta = mu.total(), tb = nu.total();
  if (tb > 0.0)
    for (double& v : nu.masses) v *= ta / tb;
}

}  // namespace detail

/// Exact W1 between two discrete measures of equal total mass (LP optimum).
inline double transport_exact(const DiscreteMeasure& mu, DiscreteMeasure nu) {
  if (mu.points.empty() || nu.points.empty()) return 0.0;
  detail::balance(mu, nu);
  detail::TransportSimplex lp(mu.masses, nu.masses, detail::cost_matrix(mu, nu));
  return lp.solve();
}

inline constexpr std::size_t kExactNodeLimit = 4096;

/// Exact W1 between two densities on the same grid.
inline double wasserstein1_exact(const DensityField& mu, const DensityField& nu) {
  detail::require_same_grid(mu.grid(), nu.grid(), "wasserstein1_exact");
  if (mu.grid().size() > kExactNodeLimit)
    throw InputError("wasserstein1_exact: " + std::to_string(mu.grid().size()) + " nodes exceed the " +
                     std::to_string(kExactNodeLimit) + "-node LP limit; coarsen the grid or use wasserstein1_sinkhorn");
  const auto a = mu.values(), b = nu.values();
  if (std::equal(a.begin(), a.end(), b.begin())) return 0.0;
  return transport_exact(to_measure(mu), to_measure(nu));
}

struct SinkhornOptions {
  double reg = 1e-3;              ///< final regularisation, absolute units of the cost
  int iters = 2000;               ///< iteration cap per annealing level
  double level_tol = 1e-6;        ///< relative marginal error that ends an intermediate level
  double final_tol = 1e-10;       ///< relative marginal error required at the final level
  double failure_tol = 1e-3;      ///< relative marginal error above which the solve is reported as failed
};

struct SinkhornResult {
  double value = 0.0;         ///< cost of the rounded (exactly feasible) plan, >= the LP optimum
  double debiased = 0.0;      ///< value(mu, nu) - (value(mu, mu) + value(nu, nu)) / 2
  double marginal_error = 0.0;
  int iterations = 0;
};

namespace detail {

/// Annealed log-stabilised Sinkhorn; returns the cost of the rounded plan.
/// The entropic bias of the unrounded plan is O(reg log n).
inline SinkhornResult sinkhorn_core(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const SinkhornOptions& opt) {
  const std::size_t n = mu.points.size(), m = nu.points.size();
  SinkhornResult res;
  if (n == 0 || m == 0) return res;
  const std::vector<double> C = cost_matrix(mu, nu);
  const std::vector<double>& a = mu.masses;
  const std::vector<double>& b = nu.masses;
  const double total = mu.total();
  double cmax = 0.0;
  for (double v : C) cmax = std::max(cmax, v);
  if (cmax == 0.0) return res;

  std::vector<double> f(n, 0.0), g(m, 0.0), u(n, 1.0), v(m, 1.0), K(n * m);
  double reg = std::max(cmax, opt.reg);
  const auto rebuild = [&] {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) K[i * m + j] = std::exp((f[i] + g[j] - C[i * m + j]) / reg);
  };
  const auto absorb = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      f[i] += reg * std::log(u[i]);
      u[i] = 1.0;
    }
    for (std::size_t j = 0; j < m; ++j) {
      g[j] += reg * std::log(v[j]);
      v[j] = 1.0;
    }
  };
  std::vector<double> kv(n), ktu(m);
  const auto row_error = [&] {
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += K[i * m + j] * v[j];
      err += std::abs(u[i] * s - a[i]);
    }
    return err / total;
  };
  rebuild();
  double err = 1.0;
  for (;;) {
    const bool final_level = reg <= opt.reg;
    const double tol = final_level ? opt.final_tol : opt.level_tol;
    for (int it = 0; it < opt.iters; ++it) {
      ++res.iterations;
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        const double* row = K.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) s += row[j] * v[j];
        kv[i] = s;
      }
      bool bad = false;
      for (std::size_t i = 0; i < n; ++i) {
        u[i] = a[i] / kv[i];
        if (!std::isfinite(u[i]) || u[i] == 0.0) bad = true;
      }
      std::fill(ktu.begin(), ktu.end(), 0.0);
      if (!bad) {
        for (std::size_t i = 0; i < n; ++i) {
          const double* row = K.data() + i * m;
          const double ui = u[i];
          for (std::size_t j = 0; j < m; ++j) ktu[j] += row[j] * ui;
        }
        for (std::size_t j = 0; j < m; ++j) {
          v[j] = b[j] / ktu[j];
          if (!std::isfinite(v[j]) || v[j] == 0.0) bad = true;
        }
      }
      if (bad) {
        // underflow: restart the level from the last absorbed potentials
        std::fill(u.begin(), u.end(), 1.0);
        std::fill(v.begin(), v.end(), 1.0);
        rebuild();
        if (it > 0 && res.iterations > 1) {
          bool any_zero_row = false;
          for (std::size_t i = 0; i < n && !any_zero_row; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += K[i * m + j];
            any_zero_row = s == 0.0;
          }
          if (any_zero_row) throw SolverError("wasserstein1_sinkhorn: kernel underflow, increase reg");
        }
        continue;
      }
      double big = 0.0;
      for (double x : u) big = std::max(big, std::abs(std::log(x)));
      for (double x : v) big = std::max(big, std::abs(std::log(x)));
      if (big > 30.0) {
        absorb();
        rebuild();
      }
      if (it % 10 == 9 || it + 1 == opt.iters) {
        err = row_error();
        if (err <= tol) break;
      }
    }
    absorb();
    if (!final_level) reg = std::max(opt.reg, 0.5 * reg);
    rebuild();
    if (final_level) break;
  }
  err = row_error();
  res.marginal_error = err;
  if (err > opt.failure_tol) {
    // column marginals are exact after the last v-update; report the row violation
    throw SolverError("wasserstein1_sinkhorn: scaling iterations did not converge, row marginal L1 violation " +
                      format_number(err * total) + ", column violation 0");
  }
  // Round to an exactly feasible plan (row shrink, column shrink, rank-one fix-up).
  std::vector<double> P(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) P[i * m + j] = K[i * m + j] * u[i] * v[j];
  std::vector<double> r(n, 0.0), c(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) r[i] += P[i * m + j];
  for (std::size_t i = 0; i < n; ++i) {
    const double s = r[i] > a[i] ? a[i] / r[i] : 1.0;
    for (std::size_t j = 0; j < m; ++j) P[i * m + j] *= s;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) c[j] += P[i * m + j];
  for (std::size_t j = 0; j < m; ++j) {
    const double s = c[j] > b[j] ? b[j] / c[j] : 1.0;
    for (std::size_t i = 0; i < n; ++i) P[i * m + j] *= s;
  }
  std::fill(r.begin(), r.end(), 0.0);
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      r[i] += P[i * m + j];
      c[j] += P[i * m + j];
    }
  double ea_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = std::max(a[i] - r[i], 0.0);
    ea_sum += r[i];
  }
  for (std::size_t j = 0; j < m; ++j) c[j] = std::max(b[j] - c[j], 0.0);
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double p = P[i * m + j];
      if (ea_sum > 0.0) p += r[i] * c[j] / ea_sum;
      value += p * C[i * m + j];
    }
  res.value = value;
  return res;
}

}  // namespace detail

/// Entropic W1 estimate between discrete measures. `opt.reg` is in cost units.
inline SinkhornResult transport_sinkhorn(const DiscreteMeasure& mu, DiscreteMeasure nu, const SinkhornOptions& opt,
                                         bool debias = true) {
  if (!(opt.reg > 0.0)) throw InputError("wasserstein1_sinkhorn: reg must be > 0");
  detail::balance(mu, nu);
  SinkhornResult res = detail::sinkhorn_core(mu, nu, opt);
  if (debias) {
    const double self_a = detail::sinkhorn_core(mu, mu, opt).value;
    const double self_b = detail::sinkhorn_core(nu, nu, opt).value;
    res.debiased = res.value - 0.5 * (self_a + self_b);
  } else {
    res.debiased = res.value;
  }
  return res;
}

/// Entropic W1 between two densities; `reg` is absolute (cost units).
inline SinkhornResult wasserstein1_sinkhorn(const DensityField& mu, const DensityField& nu, double reg, int iters = 2000) {
  detail::require_same_grid(mu.grid(), nu.grid(), "wasserstein1_sinkhorn");
  SinkhornOptions opt;
  opt.reg = reg;
  opt.iters = iters;
  return transport_sinkhorn(to_measure(mu), to_measure(nu), opt);
}

/// Default final regularisation: 1e-3 of the grid diameter.
inline double default_sinkhorn_reg(const Grid2D& g) { return 1e-3 * g.diameter(); }

enum class D1Method { sinkhorn, exact };

struct D1Options {
  D1Method method = D1Method::sinkhorn;
  std::size_t max_nodes_per_axis = 16;  ///< block-coarsening target
  double reg_fraction = 1e-3;           ///< Sinkhorn reg as a fraction of the grid diameter
  int iters = 2000;
};

/// Sums node masses over rectangular blocks so that each axis has at most
/// `max_nodes` blocks; atoms sit at the block centroids.
struct Coarsening {
  std::size_t f1, f2, c1, c2;
  std::vector<Point> centers;

  Coarsening(const Grid2D& g, std::size_t max_nodes) {
    f1 = (g.n1() + max_nodes - 1) / max_nodes;
    f2 = (g.n2() + max_nodes - 1) / max_nodes;
    c1 = (g.n1() + f1 - 1) / f1;
    c2 = (g.n2() + f2 - 1) / f2;
    centers.resize(c1 * c2);
    for (std::size_t a = 0; a < c1; ++a)
      for (std::size_t b = 0; b < c2; ++b) {
        const std::size_t i0 = a * f1, i1 = std::min(g.n1(), i0 + f1) - 1;
        const std::size_t j0 = b * f2, j1 = std::min(g.n2(), j0 + f2) - 1;
        centers[a * c2 + b] = {0.5 * (g.x1(i0) + g.x1(i1)), 0.5 * (g.x2(j0) + g.x2(j1))};
      }
  }

  std::vector<double> aggregate(const ScalarField& m) const {
    const Grid2D& g = m.grid();
    std::vector<double> out(c1 * c2, 0.0);
    for (std::size_t i = 0; i < g.n1(); ++i)
      for (std::size_t j = 0; j < g.n2(); ++j) out[(i / f1) * c2 + j / f2] += g.weight(i, j) * m(i, j);
    return out;
  }
};

/// W1 between two density slices via the signed difference on a coarsened grid:
/// W1(mu, nu) = W1((mu - nu)^+, (mu - nu)^-). Identical inputs give exactly 0.
inline double d1_distance(const ScalarField& mu, const ScalarField& nu, const D1Options& opt = {}) {
  detail::require_same_grid(mu.grid(), nu.grid(), "d1_distance");
  const auto a = mu.values(), b = nu.values();
  if (std::equal(a.begin(), a.end(), b.begin())) return 0.0;
  const Coarsening coarse(mu.grid(), opt.max_nodes_per_axis);
  const auto ma = coarse.aggregate(mu), mb = coarse.aggregate(nu);
  // atoms below `floor` carry no measurable cost but wreck the Sinkhorn potentials
  double floor = 0.0;
  for (std::size_t k = 0; k < ma.size(); ++k) floor += std::abs(ma[k]) + std::abs(mb[k]);
  floor *= 1e-15;
  DiscreteMeasure pos, neg;
  for (std::size_t k = 0; k < ma.size(); ++k) {
    const double d = ma[k] - mb[k];
    if (std::abs(d) <= floor) continue;
    if (d > 0.0) {
      pos.points.push_back(coarse.centers[k]);
      pos.masses.push_back(d);
    } else if (d < 0.0) {
      neg.points.push_back(coarse.centers[k]);
      neg.masses.push_back(-d);
    }
  }
  const double p = pos.total(), q = neg.total();
  if (pos.points.empty() || neg.points.empty() || p < 1e-300) return 0.0;
  const double scale = 0.5 * (p + q);
  for (double& v : pos.masses) v /= p;
  for (double& v : neg.masses) v /= q;
  if (opt.method == D1Method::exact) return scale * transport_exact(pos, neg);
  SinkhornOptions so;
  so.reg = opt.reg_fraction * mu.grid().diameter();
  so.iters = opt.iters;
  return scale * transport_sinkhorn(pos, neg, so, false).value;
}

inline double d1_distance(const DensityField& mu, const DensityField& nu, const D1Options& opt = {}) {
  return d1_distance(mu.field(), nu.field(), opt);
}

/// max over time slices of d1(a_t, b_t).
inline double max_d1_over_time(const DensityPath& a, const DensityPath& b, const D1Options& opt = {}) {
  if (a.nt() != b.nt()) throw InputError("max_d1_over_time: paths differ in length");
  double best = 0.0;
  for (std::size_t k = 0; k < a.nt(); ++k) best = std::max(best, d1_distance(a.field(k), b.field(k), opt));
  return best;
}

struct HolderPair {
  std::size_t s, t;
  double distance;
};

struct HolderEstimate {
  std::optional<double> slope;  ///< least-squares slope of log d1 vs log |s - t|
  double max_ratio = 0.0;       ///< max d1 / |s - t|^{1/2}
  std::vector<HolderPair> pairs;
};

/// Dyadic lags 1, 2, 4, ... time steps, at most `per_lag` evenly spread pairs per lag.
inline HolderEstimate holder_halftime_estimate(const DensityPath& path, const D1Options& opt = {},
                                               std::size_t per_lag = 4) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t last = path.nt() - 1;
  for (std::size_t lag = 1; lag <= last; lag *= 2) {
    const std::size_t starts = (last - lag) / lag + 1;  // k = 0, lag, 2 lag, ...
    const std::size_t take = std::min(per_lag, starts);
    for (std::size_t q = 0; q < take; ++q) {
      const std::size_t idx = take == 1 ? 0 : q * (starts - 1) / (take - 1);
      pairs.emplace_back(idx * lag, idx * lag + lag);
    }
  }
  if (pairs.size() < 4) throw InputError("holder_halftime_estimate: fewer than 4 usable time pairs");
  HolderEstimate est;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  std::vector<double> lags_seen;
  for (auto [s, t] : pairs) {
    const double d = d1_distance(path.field(s), path.field(t), opt);
    const double gap = path.mesh().t(t) - path.mesh().t(s);
    est.pairs.push_back({s, t, d});
    est.max_ratio = std::max(est.max_ratio, d / std::sqrt(gap));
    if (d > 0.0) {
      const double x = std::log(gap), y = std::log(d);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++used;
      if (std::find(lags_seen.begin(), lags_seen.end(), gap) == lags_seen.end()) lags_seen.push_back(gap);
    }
  }
  if (used >= 2 && lags_seen.size() >= 2) {
    const double nn = static_cast<double>(used);
    est.slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  }
  return est;
}

}  // namespace dmfg
