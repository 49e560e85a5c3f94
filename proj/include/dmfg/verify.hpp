#pragma once

// Estimators of the regularity constants of solved fields, and the property suite
// that checks their stability across a vanishing-viscosity sweep.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dmfg/coupling.hpp"
#include "dmfg/dynamics.hpp"
#include "dmfg/fpe.hpp"
#include "dmfg/grid.hpp"
#include "dmfg/hjb.hpp"
#include "dmfg/measures.hpp"
#include "dmfg/mfg.hpp"
#include "dmfg/paths.hpp"

namespace dmfg {

/// max over nodes and adjacent time slices of |u(k+1) - u(k)| / dt.
inline double time_lipschitz_estimate(const ValuePath& u, double frame = 0.0) {
  const Grid2D& g = u.grid();
  double best = 0.0;
  for (std::size_t k = 0; k + 1 < u.nt(); ++k) {
    const double dt = u.mesh().t(k + 1) - u.mesh().t(k);
    for (std::size_t i = 0; i < g.n1(); ++i)
      for (std::size_t j = 0; j < g.n2(); ++j)
        if (g.inside_frame(i, j, frame)) best = std::max(best, std::abs(u[k + 1](i, j) - u[k](i, j)) / dt);
  }
  return best;
}

namespace detail {

/// Samples u at x + m * step along eta. Directions parallel to a node offset in
/// {-1, 0, 1}^2 use exact node values with step = that offset; any other direction
/// uses bilinear interpolation with step min(dx1, dx2).
class DirectionalStencil {
 public:
  DirectionalStencil(const Grid2D& g, const Direction& eta) : g_(g), eta_(eta) {
    for (int o1 = -1; o1 <= 1 && !lattice_; ++o1)
      for (int o2 = -1; o2 <= 1 && !lattice_; ++o2) {
        if (o1 == 0 && o2 == 0) continue;
        const double v1 = o1 * g.dx1(), v2 = o2 * g.dx2();
        const double len = std::hypot(v1, v2);
        if (std::abs(v1 / len - eta.eta1()) < 1e-12 && std::abs(v2 / len - eta.eta2()) < 1e-12) {
          lattice_ = true;
          o1_ = o1;
          o2_ = o2;
          step_ = len;
        }
      }
    if (!lattice_) step_ = std::min(g.dx1(), g.dx2());
  }

  double step() const noexcept { return step_; }

  /// u at node (i, j) shifted by m steps, or nullopt when that leaves the box.
  std::optional<double> at(const ScalarField& u, std::size_t i, std::size_t j, int m) const {
    if (lattice_) {
      const long a = static_cast<long>(i) + static_cast<long>(m) * o1_;
      const long b = static_cast<long>(j) + static_cast<long>(m) * o2_;
      if (a < 0 || b < 0 || a >= static_cast<long>(g_.n1()) || b >= static_cast<long>(g_.n2())) return std::nullopt;
      return u(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    }
    const double a = g_.x1(i) + m * step_ * eta_.eta1(), b = g_.x2(j) + m * step_ * eta_.eta2();
    const double tol = 1e-12 * g_.diameter();
    if (a < g_.x1_min() - tol || a > g_.x1_max() + tol || b < g_.x2_min() - tol || b > g_.x2_max() + tol)
      return std::nullopt;
    return interpolate(u, a, b);
  }

 private:
  const Grid2D& g_;
  Direction eta_;
  bool lattice_ = false;
  int o1_ = 0, o2_ = 0;
  double step_ = 0.0;
};

inline std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace detail

/// max over framed nodes of [u(x + s eta) - 2 u(x) + u(x - s eta)] / s^2 for s in {step, 2 step}.
/// Returns -inf when no stencil fits.
inline double semiconcavity_estimate(const ScalarField& u, const Direction& eta, double frame = 0.0) {
  const Grid2D& g = u.grid();
  const detail::DirectionalStencil st(g, eta);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      if (!g.inside_frame(i, j, frame)) continue;
      for (int s : {1, 2}) {
        const auto p = st.at(u, i, j, s), m = st.at(u, i, j, -s);
        if (!p || !m) continue;
        const double len = s * st.step();
        best = std::max(best, (*p - 2.0 * u(i, j) + *m) / (len * len));
      }
    }
  return best;
}

/// Largest semiconcavity estimate over the axes and diagonals.
inline double semiconcavity_estimate(const ScalarField& u, double frame = 0.0) {
  double best = -std::numeric_limits<double>::infinity();
  for (const Direction& d : Direction::lattice_set()) best = std::max(best, semiconcavity_estimate(u, d, frame));
  return best;
}

/// max over framed nodes of |u(x + 2s) - 2 u(x + s) + 2 u(x - s) - u(x - 2s)| / (2 s^3) along eta.
inline double third_difference_estimate(const ScalarField& u, const Direction& eta, double frame = 0.0) {
  const Grid2D& g = u.grid();
  const detail::DirectionalStencil st(g, eta);
  const double s3 = st.step() * st.step() * st.step();
  double best = 0.0;
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      if (!g.inside_frame(i, j, frame)) continue;
      const auto p2 = st.at(u, i, j, 2), p1 = st.at(u, i, j, 1), m1 = st.at(u, i, j, -1), m2 = st.at(u, i, j, -2);
      if (!p2 || !m2) continue;
      best = std::max(best, std::abs(*p2 - 2.0 * *p1 + 2.0 * *m1 - *m2) / (2.0 * s3));
    }
  return best;
}

struct AeResidualReport {
  double tol = 0.0;
  double fraction_below = 0.0;
  double q50 = 0.0, q90 = 0.0, q99 = 0.0;
  std::size_t nodes = 0;
};

/// Distribution of |HJE residual| over interior space-time nodes (box boundary and the
/// frame excluded, first and last slice excluded).
inline AeResidualReport ae_residual_report(const ValuePath& u, const DynamicsSpec& dyn, const CouplingSpec& coupling,
                                           const DensityPath& m_path, double tol, double frame = 0.0) {
  const std::vector<ScalarField> res = pde_residual(u, dyn, coupling, m_path);
  const Grid2D& g = u.grid();
  std::vector<double> r;
  for (const auto& s : res)
    for (std::size_t i = 1; i + 1 < g.n1(); ++i)
      for (std::size_t j = 1; j + 1 < g.n2(); ++j)
        if (g.inside_frame(i, j, frame)) r.push_back(std::abs(s(i, j)));
  AeResidualReport out;
  out.tol = tol;
  out.nodes = r.size();
  if (r.empty()) return out;
  out.fraction_below = static_cast<double>(std::count_if(r.begin(), r.end(), [tol](double v) { return v <= tol; })) /
                       static_cast<double>(r.size());
  const auto quantile = [&](double q) {
    const std::size_t k = std::min(r.size() - 1, static_cast<std::size_t>(std::ceil(q * static_cast<double>(r.size()))) - 1);
    std::nth_element(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(k), r.end());
    return r[k];
  };
  out.q50 = quantile(0.5);
  out.q90 = quantile(0.9);
  out.q99 = quantile(0.99);
  return out;
}

/// Thresholds of the property suite.
struct SuiteTolerances {
  double frame = 0.1;
  double mass_tol = 1e-8;
  double drift_tol = 1e-10;
  double positivity_tol = 1e-12;
  double lipschitz_band = 0.2;
  double semiconcavity_band = 0.3;
  double holder_band = 0.3;
  double holder_min_slope = 0.45;
  double moment_factor = 3.0;
  double viscosity_factor = 3.0;
  bool operator==(const SuiteTolerances&) const = default;
};

/// One level of a sweep as the suite sees it.
struct SuiteLevel {
  double epsilon;
  ValuePath u;
  DensityPath m;
};

struct SuiteInputs {
  std::vector<SuiteLevel> levels;  ///< decreasing epsilon; a final eps = 0 level enables the viscosity check
  std::optional<ValuePath> u0_refined;  ///< eps = 0 value on a refined grid, restricted to the coarse nodes
  D1Options d1{D1Method::exact};
};

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::vector<std::pair<std::string, double>> measured;
  std::string note;
};

struct SuiteReport {
  std::vector<PropertyResult> properties;
  bool all_pass() const {
    return std::all_of(properties.begin(), properties.end(), [](const PropertyResult& p) { return p.pass; });
  }
  const PropertyResult& get(const std::string& name) const {
    for (const auto& p : properties)
      if (p.name == name) return p;
    throw InputError("no property named '" + name + "'");
  }
};

/// max / min - 1 over positive values; 0 when every value is 0, inf when the signs mix.
inline double relative_spread(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*hi == 0.0 && *lo == 0.0) return 0.0;
  if (!(*lo > 0.0)) return std::numeric_limits<double>::infinity();
  return *hi / *lo - 1.0;
}

/// Mass, positivity, second-moment and regularity properties of a sweep.
inline SuiteReport lemma_suite(const SuiteInputs& in, const SuiteTolerances& tol = {}) {
  if (in.levels.empty()) throw InputError("lemma_suite: no levels");
  SuiteReport rep;
  std::vector<const SuiteLevel*> sched;
  const SuiteLevel* inviscid = nullptr;
  for (const auto& l : in.levels) (l.epsilon > 0.0 ? sched.push_back(&l) : void(inviscid = &l));

  {
    PropertyResult p{"mass_conservation", true, {}, ""};
    double err = 0.0, drift = 0.0;
    for (const auto& l : in.levels) {
      double prev = 0.0;
      for (std::size_t k = 0; k < l.m.nt(); ++k) {
        const double mass = DensityField::integrate(l.m.field(k));
        err = std::max(err, std::abs(mass - 1.0));
        if (k > 0) drift = std::max(drift, std::abs(mass - prev));
        prev = mass;
      }
    }
    p.pass = err <= tol.mass_tol && drift <= tol.drift_tol;
    p.measured = {{"max_mass_error", err}, {"max_step_drift", drift}};
    rep.properties.push_back(p);
  }
  {
    PropertyResult p{"positivity", true, {}, ""};
    double mn = std::numeric_limits<double>::infinity();
    for (const auto& l : in.levels)
      for (std::size_t k = 0; k < l.m.nt(); ++k)
        for (double v : l.m.field(k).values()) mn = std::min(mn, v);
    p.pass = mn >= -tol.positivity_tol;
    p.measured = {{"min_density", mn}};
    rep.properties.push_back(p);
  }
  {
    PropertyResult p{"second_moment", true, {}, ""};
    double worst = 0.0;
    for (const auto& l : in.levels) {
      const double m0 = second_moment(l.m.field(0));
      double sup = 0.0;
      for (std::size_t k = 0; k < l.m.nt(); ++k) sup = std::max(sup, second_moment(l.m.field(k)));
      worst = std::max(worst, sup / (m0 + 1.0));
      p.measured.push_back({"sup_m2_eps_" + detail::short_number(l.epsilon), sup});
    }
    p.measured.push_back({"max_ratio_to_initial_plus_one", worst});
    p.pass = worst <= tol.moment_factor;
    rep.properties.push_back(p);
  }

  const auto band = [&](const std::string& name, double limit, auto&& measure) {
    PropertyResult p{name, true, {}, ""};
    std::vector<double> vals;
    bool finite = true;
    for (const SuiteLevel* l : sched) {
      const double v = measure(*l);
      finite = finite && std::isfinite(v);
      vals.push_back(v);
      p.measured.push_back({"eps_" + detail::short_number(l->epsilon), v});
    }
    if (inviscid) p.measured.push_back({"eps_0", measure(*inviscid)});
    const double spread = relative_spread(vals);
    p.measured.push_back({"relative_spread", spread});
    p.pass = finite && spread < limit;
    if (sched.size() < 2) p.note = "fewer than two positive-epsilon levels; spread is trivially 0";
    rep.properties.push_back(p);
  };
  band("spatial_lipschitz", tol.lipschitz_band, [&](const SuiteLevel& l) {
    double best = 0.0;
    for (std::size_t k = 0; k < l.u.nt(); ++k) best = std::max(best, lipschitz_estimate(l.u[k], tol.frame));
    return best;
  });
  band("temporal_lipschitz", tol.lipschitz_band,
       [&](const SuiteLevel& l) { return time_lipschitz_estimate(l.u, tol.frame); });
  band("semiconcavity", tol.semiconcavity_band, [&](const SuiteLevel& l) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < l.u.nt(); ++k) best = std::max(best, semiconcavity_estimate(l.u[k], tol.frame));
    return best;
  });

  {
    PropertyResult p{"holder_half_in_time", true, {}, ""};
    std::vector<double> ratios;
    double min_slope = std::numeric_limits<double>::infinity();
    bool all_moving = true;
    for (const SuiteLevel* l : sched) {
      const HolderEstimate h = holder_halftime_estimate(l->m, in.d1);
      ratios.push_back(h.max_ratio);
      p.measured.push_back({"ratio_eps_" + detail::short_number(l->epsilon), h.max_ratio});
      if (h.slope) {
        min_slope = std::min(min_slope, *h.slope);
        p.measured.push_back({"slope_eps_" + detail::short_number(l->epsilon), *h.slope});
      } else {
        all_moving = false;
      }
    }
    const double spread = relative_spread(ratios);
    p.measured.push_back({"relative_spread", spread});
    // a static path is trivially Holder; the slope only applies to paths that move
    const bool slope_ok = !all_moving || min_slope >= tol.holder_min_slope;
    p.pass = spread < tol.holder_band && slope_ok &&
             std::all_of(ratios.begin(), ratios.end(), [](double r) { return std::isfinite(r); });
    if (!all_moving) p.note = "some level has a static density path; slope not fitted there";
    rep.properties.push_back(p);
  }

  {
    PropertyResult p{"vanishing_viscosity", true, {}, ""};
    std::vector<double> deltas;
    for (std::size_t k = 1; k < sched.size(); ++k) {
      deltas.push_back(sup_norm_difference(sched[k - 1]->u, sched[k]->u, tol.frame));
      p.measured.push_back({"delta_" + std::to_string(k), deltas.back()});
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < deltas.size(); ++k) decreasing = decreasing && deltas[k] < deltas[k - 1];
    // identical fields (for instance a decoupled zero problem) count as converged
    const bool all_zero = std::all_of(deltas.begin(), deltas.end(), [](double d) { return d == 0.0; });
    p.pass = decreasing || all_zero;
    if (inviscid && !sched.empty()) {
      const double gap = sup_norm_difference(sched.back()->u, inviscid->u, tol.frame);
      p.measured.push_back({"delta_to_eps_0", gap});
      if (in.u0_refined) {
        const double refine = sup_norm_difference(inviscid->u, *in.u0_refined, tol.frame);
        p.measured.push_back({"eps_0_refinement_error", refine});
        p.pass = p.pass && gap <= tol.viscosity_factor * refine;
      } else {
        p.note = "no refined eps = 0 solution; limit gap not checked";
      }
    } else {
      p.note = "no eps = 0 level; limit gap not checked";
    }
    rep.properties.push_back(p);
  }
  return rep;
}

}  // namespace dmfg
