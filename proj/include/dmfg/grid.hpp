#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dmfg/errors.hpp"

namespace dmfg {

/// Uniform node-centred discretisation of the box [x1_min,x1_max] x [x2_min,x2_max].
///
/// Node (i, j) sits at (x1_min + i*dx1, x2_min + j*dx2). Storage is row-major with
/// the x1 index outermost: flat index = i*n2 + j.
class Grid2D {
 public:
  Grid2D(double x1_min, double x1_max, double x2_min, double x2_max, std::size_t n1,
         std::size_t n2)
      : x1_min_(x1_min), x1_max_(x1_max), x2_min_(x2_min), x2_max_(x2_max), n1_(n1), n2_(n2) {
    if (!(x1_min < x1_max) || !(x2_min < x2_max))
      throw ConfigError("grid bounds must satisfy x_min < x_max on both axes");
    if (n1 < 4 || n2 < 4) throw ConfigError("grid node counts must satisfy n1 >= 4 and n2 >= 4");
    dx1_ = (x1_max - x1_min) / static_cast<double>(n1 - 1);
    dx2_ = (x2_max - x2_min) / static_cast<double>(n2 - 1);
  }

  /// Square box [-half_width, half_width]^2 with n nodes per axis.
  static Grid2D square(double half_width, std::size_t n) {
    return Grid2D(-half_width, half_width, -half_width, half_width, n, n);
  }

  double x1_min() const noexcept { return x1_min_; }
  double x1_max() const noexcept { return x1_max_; }
  double x2_min() const noexcept { return x2_min_; }
  double x2_max() const noexcept { return x2_max_; }
  std::size_t n1() const noexcept { return n1_; }
  std::size_t n2() const noexcept { return n2_; }
  double dx1() const noexcept { return dx1_; }
  double dx2() const noexcept { return dx2_; }
  std::size_t size() const noexcept { return n1_ * n2_; }

  double x1(std::size_t i) const noexcept {
    return i + 1 == n1_ ? x1_max_ : x1_min_ + static_cast<double>(i) * dx1_;
  }
  double x2(std::size_t j) const noexcept {
    return j + 1 == n2_ ? x2_max_ : x2_min_ + static_cast<double>(j) * dx2_;
  }
  std::size_t index(std::size_t i, std::size_t j) const noexcept { return i * n2_ + j; }

  /// Trapezoidal quadrature weight of node (i, j): the area of its dual cell.
  double weight(std::size_t i, std::size_t j) const noexcept {
    const double w1 = (i == 0 || i + 1 == n1_) ? 0.5 * dx1_ : dx1_;
    const double w2 = (j == 0 || j + 1 == n2_) ? 0.5 * dx2_ : dx2_;
    return w1 * w2;
  }

  std::vector<double> weights() const {
    std::vector<double> w(size());
    for (std::size_t i = 0; i < n1_; ++i)
      for (std::size_t j = 0; j < n2_; ++j) w[index(i, j)] = weight(i, j);
    return w;
  }

  double diameter() const noexcept { return std::hypot(x1_max_ - x1_min_, x2_max_ - x2_min_); }

  /// True if node (i, j) lies inside the box shrunk by `frame` (fraction of each axis
  /// length) on every side. frame = 0 accepts every node.
  bool inside_frame(std::size_t i, std::size_t j, double frame) const noexcept {
    if (frame <= 0.0) return true;
    const double m1 = frame * (x1_max_ - x1_min_);
    const double m2 = frame * (x2_max_ - x2_min_);
    const double a = x1(i), b = x2(j);
    constexpr double slack = 1e-12;
    return a >= x1_min_ + m1 - slack && a <= x1_max_ - m1 + slack && b >= x2_min_ + m2 - slack &&
           b <= x2_max_ - m2 + slack;
  }

  bool operator==(const Grid2D& o) const noexcept {
    return x1_min_ == o.x1_min_ && x1_max_ == o.x1_max_ && x2_min_ == o.x2_min_ &&
           x2_max_ == o.x2_max_ && n1_ == o.n1_ && n2_ == o.n2_;
  }

 private:
  double x1_min_, x1_max_, x2_min_, x2_max_;
  std::size_t n1_, n2_;
  double dx1_ = 0.0, dx2_ = 0.0;
};

namespace detail {

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw InputError(std::string(what) + ": non-finite value");
}

inline void require_same_grid(const Grid2D& a, const Grid2D& b, const char* what) {
  if (!(a == b)) throw InputError(std::string(what) + ": grids differ");
}

}  // namespace detail

/// Grid-sampled real function.
class ScalarField {
 public:
  explicit ScalarField(Grid2D grid, double fill = 0.0) : grid_(grid), values_(grid.size(), fill) {}
  ScalarField(Grid2D grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw InputError("ScalarField: size mismatch");
  }

  template <class Fn>
  static ScalarField sample(const Grid2D& grid, Fn&& fn) {
    ScalarField f(grid);
    for (std::size_t i = 0; i < grid.n1(); ++i)
      for (std::size_t j = 0; j < grid.n2(); ++j) f(i, j) = fn(grid.x1(i), grid.x2(j));
    return f;
  }

  const Grid2D& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values_[grid_.index(i, j)]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return values_[grid_.index(i, j)]; }
  double operator[](std::size_t k) const noexcept { return values_[k]; }
  double& operator[](std::size_t k) noexcept { return values_[k]; }

  bool all_finite() const noexcept {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }
  void require_finite(const char* what) const { detail::require_finite(values_, what); }

  double sup_norm() const noexcept {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  Grid2D grid_;
  std::vector<double> values_;
};

/// Grid-sampled planar vector field, stored as two component arrays.
struct VectorField {
  ScalarField c1;
  ScalarField c2;

  explicit VectorField(const Grid2D& grid) : c1(grid), c2(grid) {}
  VectorField(ScalarField a, ScalarField b) : c1(std::move(a)), c2(std::move(b)) {
    detail::require_same_grid(c1.grid(), c2.grid(), "VectorField");
  }
  const Grid2D& grid() const noexcept { return c1.grid(); }
};

/// Nonnegative grid density of unit trapezoidal mass.
class DensityField {
 public:
  static constexpr double kNegativeTolerance = 1e-12;
  static constexpr double kMassTolerance = 1e-8;

  /// Validates the invariants; small negatives (>= -1e-12) are clamped to zero.
  DensityField(Grid2D grid, std::vector<double> values) : field_(grid, std::move(values)) {
    field_.require_finite("DensityField");
    for (double& v : field_.values()) {
      if (v < -kNegativeTolerance) throw InputError("DensityField: negative density value");
      if (v < 0.0) v = 0.0;
    }
    const double mass = integrate(field_);
    if (std::abs(mass - 1.0) > kMassTolerance)
      throw InputError("DensityField: mass " + format_number(mass) + " differs from 1");
  }

  /// Clamps negatives and rescales to unit mass.
  static DensityField normalized(const Grid2D& grid, std::vector<double> values) {
    double mass = 0.0;
    for (std::size_t i = 0; i < grid.n1(); ++i)
      for (std::size_t j = 0; j < grid.n2(); ++j) {
        double& v = values[grid.index(i, j)];
        if (!std::isfinite(v)) throw InputError("DensityField: non-finite value");
        if (v < 0.0) v = 0.0;
        mass += grid.weight(i, j) * v;
      }
    if (!(mass > 0.0)) throw InputError("DensityField: zero total mass");
    for (double& v : values) v /= mass;
    return DensityField(grid, std::move(values));
  }

  template <class Fn>
  static DensityField from_function(const Grid2D& grid, Fn&& fn) {
    const ScalarField f = ScalarField::sample(grid, fn);
    return normalized(grid, std::vector<double>(f.values().begin(), f.values().end()));
  }

  static DensityField uniform(const Grid2D& grid) {
    const double area = (grid.x1_max() - grid.x1_min()) * (grid.x2_max() - grid.x2_min());
    return DensityField(grid, std::vector<double>(grid.size(), 1.0 / area));
  }

  /// Isotropic Gaussian N(mean, variance I) truncated to the box and renormalised.
  static DensityField gaussian(const Grid2D& grid, double mean1, double mean2, double variance) {
    if (!(variance > 0.0)) throw InputError("gaussian density: variance must be positive");
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.n1(); ++i)
      for (std::size_t j = 0; j < grid.n2(); ++j) {
        const double a = grid.x1(i) - mean1, b = grid.x2(j) - mean2;
        v[grid.index(i, j)] = std::exp(-(a * a + b * b) / (2.0 * variance));
      }
    return normalized(grid, std::move(v));
  }

  static double integrate(const ScalarField& f) {
    const Grid2D& g = f.grid();
    double s = 0.0;
    for (std::size_t i = 0; i < g.n1(); ++i)
      for (std::size_t j = 0; j < g.n2(); ++j) s += g.weight(i, j) * f(i, j);
    return s;
  }

  const Grid2D& grid() const noexcept { return field_.grid(); }
  const ScalarField& field() const noexcept { return field_; }
  std::span<const double> values() const noexcept { return field_.values(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return field_(i, j); }
  double mass() const { return integrate(field_); }

  /// Node masses w_ij * m_ij (the discrete measure carried by the density).
  std::vector<double> node_masses() const {
    const Grid2D& g = grid();
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < g.n1(); ++i)
      for (std::size_t j = 0; j < g.n2(); ++j) out[g.index(i, j)] = g.weight(i, j) * field_(i, j);
    return out;
  }

  /// Mass carried by the outermost ring of nodes.
  double boundary_mass() const {
    const Grid2D& g = grid();
    double s = 0.0;
    for (std::size_t i = 0; i < g.n1(); ++i)
      for (std::size_t j = 0; j < g.n2(); ++j)
        if (i == 0 || j == 0 || i + 1 == g.n1() || j + 1 == g.n2()) s += g.weight(i, j) * field_(i, j);
    return s;
  }

 private:
  ScalarField field_;
};

/// Unit direction vector in the plane.
class Direction {
 public:
  Direction(double eta1, double eta2) : eta1_(eta1), eta2_(eta2) {
    if (std::abs(eta1 * eta1 + eta2 * eta2 - 1.0) > 1e-12)
      throw InputError("Direction: eta1^2 + eta2^2 must equal 1");
  }
  static Direction from_angle(double theta) { return Direction(std::cos(theta), std::sin(theta)); }
  static Direction normalize(double a, double b) {
    const double n = std::hypot(a, b);
    return Direction(a / n, b / n);
  }
  double eta1() const noexcept { return eta1_; }
  double eta2() const noexcept { return eta2_; }

  /// Axes plus both diagonals.
  static std::vector<Direction> lattice_set() {
    const double r = 1.0 / std::sqrt(2.0);
    return {Direction(1.0, 0.0), Direction(0.0, 1.0), Direction(r, r), Direction(r, -r)};
  }

 private:
  double eta1_, eta2_;
};

/// Bilinear interpolation of a field at an arbitrary point (clamped to the box).
inline double interpolate(const ScalarField& f, double a, double b) {
  const Grid2D& g = f.grid();
  double s = (a - g.x1_min()) / g.dx1();
  double t = (b - g.x2_min()) / g.dx2();
  s = std::clamp(s, 0.0, static_cast<double>(g.n1() - 1));
  t = std::clamp(t, 0.0, static_cast<double>(g.n2() - 1));
  std::size_t i = std::min(static_cast<std::size_t>(s), g.n1() - 2);
  std::size_t j = std::min(static_cast<std::size_t>(t), g.n2() - 2);
  const double tx = s - static_cast<double>(i), ty = t - static_cast<double>(j);
  const double v00 = f(i, j), v10 = f(i + 1, j), v01 = f(i, j + 1), v11 = f(i + 1, j + 1);
  // Written as increments so that constant fields interpolate exactly.
  return v00 + tx * (v10 - v00) + ty * (v01 - v00) + tx * ty * (v11 - v10 - v01 + v00);
}

/// CSV dump `x1,x2,value`, row-major over the grid, 17 significant digits.
inline std::string to_csv(const ScalarField& f) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "x1,x2,value\n";
  const Grid2D& g = f.grid();
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) os << g.x1(i) << ',' << g.x2(j) << ',' << f(i, j) << '\n';
  return os.str();
}

inline void write_csv(const ScalarField& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << to_csv(f);
}

/// Reads a field dump back onto `grid`; node order and coordinates must match.
inline ScalarField read_csv(const Grid2D& grid, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("x1,x2,value", 0) != 0) throw InputError(path + ": missing x1,x2,value header");
  std::vector<double> vals;
  vals.reserve(grid.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
      throw InputError(path + ": malformed row");
    const std::size_t k = vals.size();
    if (k >= grid.size()) throw InputError(path + ": too many rows for grid");
    const std::size_t i = k / grid.n2(), j = k % grid.n2();
    const double tol = 1e-9 * std::max(grid.dx1(), grid.dx2());
    if (std::abs(std::stod(a) - grid.x1(i)) > tol || std::abs(std::stod(b) - grid.x2(j)) > tol)
      throw InputError(path + ": node coordinates do not match the grid");
    vals.push_back(std::stod(c));
  }
  if (vals.size() != grid.size()) throw InputError(path + ": row count does not match grid");
  return ScalarField(grid, std::move(vals));
}

/// Reads a field dump whose grid is not known in advance; the grid is recovered from
/// the node coordinates.
inline ScalarField read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<std::array<double, 2>> nodes;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',')) throw InputError(path + ": malformed row");
    nodes.push_back({std::stod(a), std::stod(b)});
  }
  if (nodes.size() < 4) throw InputError(path + ": too few rows for a grid");
  std::size_t n2 = 0;
  while (n2 < nodes.size() && nodes[n2][0] == nodes[0][0]) ++n2;
  if (n2 < 2 || nodes.size() % n2 != 0) throw InputError(path + ": rows are not a row-major grid");
  const Grid2D grid(nodes.front()[0], nodes.back()[0], nodes.front()[1], nodes.back()[1], nodes.size() / n2, n2);
  return read_csv(grid, path);
}

}  // namespace dmfg
