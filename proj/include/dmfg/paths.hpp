#pragma once

#include <cmath>
#include <vector>

#include "dmfg/errors.hpp"
#include "dmfg/grid.hpp"

namespace dmfg {

/// Uniform time mesh t_k = k*dt, k = 0..nt-1, t_{nt-1} = T.
struct TimeMesh {
  double T = 1.0;
  std::size_t nt = 2;

  double dt() const { return T / static_cast<double>(nt - 1); }
  double t(std::size_t k) const { return k + 1 == nt ? T : static_cast<double>(k) * dt(); }

  void validate() const {
    if (!(T > 0.0)) throw ConfigError("time horizon T must be > 0");
    if (nt < 2) throw ConfigError("time mesh needs nt >= 2");
  }
  bool operator==(const TimeMesh&) const = default;
};

/// Value function sampled on the time mesh; slice k approximates u(., t_k).
class ValuePath {
 public:
  ValuePath(Grid2D grid, TimeMesh mesh) : grid_(grid), mesh_(mesh), slices_(mesh.nt, ScalarField(grid)) {
    mesh_.validate();
  }

  const Grid2D& grid() const noexcept { return grid_; }
  const TimeMesh& mesh() const noexcept { return mesh_; }
  std::size_t nt() const noexcept { return mesh_.nt; }
  double dt() const { return mesh_.dt(); }
  const ScalarField& operator[](std::size_t k) const { return slices_.at(k); }
  ScalarField& operator[](std::size_t k) { return slices_.at(k); }
  const ScalarField& terminal() const { return slices_.back(); }

  double sup_norm() const {
    double m = 0.0;
    for (const auto& s : slices_) m = std::max(m, s.sup_norm());
    return m;
  }

 private:
  Grid2D grid_;
  TimeMesh mesh_;
  std::vector<ScalarField> slices_;
};

/// Density sampled on the time mesh. Slices are stored raw so that a defective
/// scheme can still be inspected; density(k) re-validates the invariants.
class DensityPath {
 public:
  DensityPath(Grid2D grid, TimeMesh mesh) : grid_(grid), mesh_(mesh), slices_(mesh.nt, ScalarField(grid)) {
    mesh_.validate();
  }

  /// The time-constant path t -> m.
  static DensityPath constant(const DensityField& m, TimeMesh mesh) {
    DensityPath p(m.grid(), mesh);
    for (std::size_t k = 0; k < mesh.nt; ++k) p.slices_[k] = m.field();
    return p;
  }

  const Grid2D& grid() const noexcept { return grid_; }
  const TimeMesh& mesh() const noexcept { return mesh_; }
  std::size_t nt() const noexcept { return mesh_.nt; }
  double dt() const { return mesh_.dt(); }
  const ScalarField& field(std::size_t k) const { return slices_.at(k); }
  ScalarField& field(std::size_t k) { return slices_.at(k); }
  DensityField density(std::size_t k) const {
    const auto v = slices_.at(k).values();
    return DensityField(grid_, std::vector<double>(v.begin(), v.end()));
  }

  /// Convex combination (1 - theta) * this + theta * other, slice by slice.
  DensityPath blend(const DensityPath& other, double theta) const {
    DensityPath out(grid_, mesh_);
    for (std::size_t k = 0; k < nt(); ++k) {
      auto& dst = out.slices_[k];
      const auto a = slices_[k].values();
      const auto b = other.slices_[k].values();
      for (std::size_t n = 0; n < a.size(); ++n) dst[n] = (1.0 - theta) * a[n] + theta * b[n];
    }
    return out;
  }

 private:
  Grid2D grid_;
  TimeMesh mesh_;
  std::vector<ScalarField> slices_;
};

}  // namespace dmfg
