#pragma once

// Particle simulation of the controlled dynamics
//   dX1 = a1 ds + sqrt(2 eps + sigma1^2) dB1,   dX2 = h(X1) a2 ds + sqrt(2 eps + sigma2^2) dB2
// under the feedback a = -D_G u, and Monte Carlo estimates of the cost it incurs.
// Particles are reflected at the box boundary. Every particle draws from its own
// generator seeded by (seed, particle index, stream), so results do not depend on
// how particles are split across threads.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "dmfg/coupling.hpp"
#include "dmfg/dynamics.hpp"
#include "dmfg/errors.hpp"
#include "dmfg/grid.hpp"
#include "dmfg/measures.hpp"
#include "dmfg/operators.hpp"
#include "dmfg/paths.hpp"

namespace dmfg {

struct EnsembleConfig {
  std::size_t n_particles = 10000;
  std::uint64_t seed = 0;
  double dt_sde = 0.0;  ///< 0 means a quarter of the value path's time step
  std::size_t threads = 1;
};

struct ParticleEnsemble {
  std::size_t n_particles = 0;
  std::uint64_t seed = 0;
  double dt_sde = 0.0;
  std::vector<double> times;                   ///< recording times: t0, then the mesh times after t0
  std::vector<std::vector<Point>> positions;   ///< positions[r][p] at times[r]

  const std::vector<Point>& at_time(double t) const {
    for (std::size_t r = 0; r < times.size(); ++r)
      if (std::abs(times[r] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return positions[r];
    throw InputError("ParticleEnsemble: no recorded slice at t = " + format_number(t));
  }
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

namespace detail {

enum class Stream : std::uint32_t { dynamics = 1, sampling = 2, bootstrap = 3 };

inline std::mt19937_64 particle_rng(std::uint64_t seed, std::size_t index, Stream stream) {
  const auto idx = static_cast<std::uint64_t>(index);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

inline double reflect(double x, double lo, double hi) {
  if (x >= lo && x <= hi) return x;
  const double len = hi - lo;
  double y = std::fmod(x - lo, 2.0 * len);
  if (y < 0.0) y += 2.0 * len;
  return lo + (y <= len ? y : 2.0 * len - y);
}

/// Runs body(p) for p in [0, n) on up to `threads` threads in contiguous chunks.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::future<void>> jobs;
  const auto run = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) body(p);
  };
  for (std::size_t t = 1; t < threads; ++t) {
    const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo < hi) jobs.push_back(std::async(std::launch::async, run, lo, hi));
  }
  run(0, std::min(n, chunk));
  for (auto& j : jobs) j.get();
}

/// Pairwise sum, so the result depends only on the order of the values.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += v[k];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

/// Feedback and cost fields of one time slice.
struct SliceFields {
  ScalarField g1, g2;  ///< du/dx1 and h du/dx2
  ScalarField F;       ///< running cost, empty for simulation only
};

/// Integration plan: breakpoints t0 < mesh times after t0, with the sub-step count per segment.
struct StepPlan {
  std::vector<double> times;
  std::vector<std::size_t> steps;
  double dt_sde = 0.0;
};

inline StepPlan make_plan(const TimeMesh& mesh, double t0, double dt_sde) {
  if (!(t0 >= 0.0 && t0 < mesh.T)) throw InputError("simulate_paths: t0 must lie in [0, T)");
  const double dt = mesh.dt();
  if (dt_sde == 0.0) dt_sde = 0.25 * dt;
  if (!(dt_sde > 0.0)) throw ConfigError("dt_sde must be > 0");
  if (dt_sde > dt * (1.0 + 1e-12))
    throw ConfigError("dt_sde = " + format_number(dt_sde) + " exceeds the value path step " + format_number(dt) +
                      " (the feedback would be stale)");
  StepPlan plan;
  plan.dt_sde = dt_sde;
  plan.times.push_back(t0);
  for (std::size_t k = 0; k < mesh.nt; ++k) {
    const double t = mesh.t(k);
    if (t > t0 + 1e-12 * mesh.T) {
      const double len = t - plan.times.back();
      plan.steps.push_back(static_cast<std::size_t>(std::ceil(len / dt_sde - 1e-9)));
      plan.times.push_back(t);
    }
  }
  return plan;
}

/// Linear-in-time interpolation weight of the mesh slice pair around t.
inline std::pair<std::size_t, double> time_bracket(const TimeMesh& mesh, double t) {
  const double s = std::clamp(t / mesh.dt(), 0.0, static_cast<double>(mesh.nt - 1));
  const std::size_t k = std::min(static_cast<std::size_t>(s), mesh.nt - 2);
  return {k, s - static_cast<double>(k)};
}

inline double interp_time(const std::vector<SliceFields>& f, ScalarField SliceFields::*member, std::size_t k,
                          double w, double a, double b) {
  const double v0 = interpolate(f[k].*member, a, b);
  if (w == 0.0) return v0;
  return v0 + w * (interpolate(f[k + 1].*member, a, b) - v0);
}

inline std::vector<SliceFields> slice_fields(const ValuePath& u, const DynamicsSpec& dyn,
                                             const CouplingSpec* coupling, const DensityPath* m) {
  std::vector<SliceFields> out;
  out.reserve(u.nt());
  for (std::size_t k = 0; k < u.nt(); ++k) {
    VectorField gr = degenerate_gradient(u[k], dyn);
    SliceFields s{std::move(gr.c1), std::move(gr.c2), ScalarField(u.grid())};
    if (coupling) s.F = coupling->F(m->field(k));
    out.push_back(std::move(s));
  }
  return out;
}

/// Simulates one particle from x; calls record(r, x) at every breakpoint and returns
/// the accumulated running cost (zero when the F fields are absent).
template <class Record>
double simulate_one(const StepPlan& plan, const std::vector<SliceFields>& f, const TimeMesh& mesh,
                    const DynamicsSpec& dyn, const Grid2D& g, bool with_cost, Point x, std::mt19937_64& rng,
                    Record&& record) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double cost = 0.0;
  record(0, x);
  for (std::size_t seg = 0; seg < plan.steps.size(); ++seg) {
    const double a = plan.times[seg], b = plan.times[seg + 1];
    const std::size_t n = plan.steps[seg];
    const double h = (b - a) / static_cast<double>(n);
    const double sq = std::sqrt(h);
    for (std::size_t s = 0; s < n; ++s) {
      const double t = a + static_cast<double>(s) * h;
      const auto [k, w] = time_bracket(mesh, t);
      const double p1 = interp_time(f, &SliceFields::g1, k, w, x[0], x[1]);
      const double p2 = interp_time(f, &SliceFields::g2, k, w, x[0], x[1]);
      if (with_cost) cost += h * (0.5 * (p1 * p1 + p2 * p2) + interp_time(f, &SliceFields::F, k, w, x[0], x[1]));
      const double hx = dyn.h(x[0]);
      const double n1 = dyn.noise1(x[0], x[1]), n2 = dyn.noise2(x[0], x[1]);
      const double z1 = normal(rng), z2 = normal(rng);
      x[0] = reflect(x[0] - p1 * h + n1 * sq * z1, g.x1_min(), g.x1_max());
      x[1] = reflect(x[1] - hx * p2 * h + n2 * sq * z2, g.x2_min(), g.x2_max());
    }
    record(seg + 1, x);
  }
  return cost;
}

}  // namespace detail

/// Simulates particles started at `starts` (one per particle) from t0 under the feedback of u_path.
inline ParticleEnsemble simulate_ensemble(const DynamicsSpec& dyn, const ValuePath& u_path,
                                          const std::vector<Point>& starts, double t0, const EnsembleConfig& cfg) {
  if (starts.empty()) throw InputError("simulate_paths: no particles");
  const Grid2D& g = u_path.grid();
  const detail::StepPlan plan = detail::make_plan(u_path.mesh(), t0, cfg.dt_sde);
  const auto fields = detail::slice_fields(u_path, dyn, nullptr, nullptr);
  ParticleEnsemble ens;
  ens.n_particles = starts.size();
  ens.seed = cfg.seed;
  ens.dt_sde = plan.dt_sde;
  ens.times = plan.times;
  ens.positions.assign(plan.times.size(), std::vector<Point>(starts.size()));
  detail::parallel_for(starts.size(), cfg.threads, [&](std::size_t p) {
    auto rng = detail::particle_rng(cfg.seed, p, detail::Stream::dynamics);
    detail::simulate_one(plan, fields, u_path.mesh(), dyn, g, false, starts[p], rng,
                         [&](std::size_t r, const Point& x) { ens.positions[r][p] = x; });
  });
  for (const auto& slice : ens.positions)
    for (const auto& x : slice)
      if (!std::isfinite(x[0]) || !std::isfinite(x[1])) throw SolverError("simulate_paths: non-finite particle position");
  return ens;
}

/// All cfg.n_particles particles start at x0.
inline ParticleEnsemble simulate_paths(const DynamicsSpec& dyn, const ValuePath& u_path, const Point& x0, double t0,
                                       const EnsembleConfig& cfg) {
  return simulate_ensemble(dyn, u_path, std::vector<Point>(cfg.n_particles, x0), t0, cfg);
}

/// Monte Carlo estimate of the cost of the feedback control started at (x0, t0):
/// E[ int_t0^T 1/2 |a|^2 + F(X_s, m_s) ds + G(X_T, m_T) ].
inline McEstimate mc_value(const DynamicsSpec& dyn, const CouplingSpec& coupling, const DensityPath& m_path,
                           const ValuePath& u_path, const Point& x0, double t0, const EnsembleConfig& cfg) {
  if (!(m_path.mesh() == u_path.mesh())) throw InputError("mc_value: density and value paths use different time meshes");
  detail::require_same_grid(m_path.grid(), u_path.grid(), "mc_value");
  if (cfg.n_particles < 2) throw InputError("mc_value: need at least 2 particles");
  const Grid2D& g = u_path.grid();
  const detail::StepPlan plan = detail::make_plan(u_path.mesh(), t0, cfg.dt_sde);
  const auto fields = detail::slice_fields(u_path, dyn, &coupling, &m_path);
  const ScalarField G = coupling.G(m_path.field(m_path.nt() - 1));
  std::vector<double> payoff(cfg.n_particles);
  detail::parallel_for(cfg.n_particles, cfg.threads, [&](std::size_t p) {
    auto rng = detail::particle_rng(cfg.seed, p, detail::Stream::dynamics);
    Point last = x0;
    const double run = detail::simulate_one(plan, fields, u_path.mesh(), dyn, g, true, x0, rng,
                                            [&](std::size_t, const Point& x) { last = x; });
    payoff[p] = run + interpolate(G, last[0], last[1]);
  });
  // shift by the first sample so that constant payoffs come out exact
  const double c0 = payoff[0];
  std::vector<double> dev(payoff.size()), sq(payoff.size());
  for (std::size_t p = 0; p < payoff.size(); ++p) dev[p] = payoff[p] - c0;
  const double n = static_cast<double>(payoff.size());
  const double mean_dev = detail::pairwise_sum(dev.data(), dev.size()) / n;
  for (std::size_t p = 0; p < payoff.size(); ++p) sq[p] = (dev[p] - mean_dev) * (dev[p] - mean_dev);
  const double var = detail::pairwise_sum(sq.data(), sq.size()) / (n - 1.0);
  return {c0 + mean_dev, std::sqrt(var / n), payoff.size()};
}

/// i.i.d. samples from the node-mass measure of m, jittered uniformly within each dual cell.
inline std::vector<Point> sample_density(const DensityField& m, std::size_t n, std::uint64_t seed) {
  const Grid2D& g = m.grid();
  const std::vector<double> w = m.node_masses();
  std::vector<double> cdf(w.size());
  std::partial_sum(w.begin(), w.end(), cdf.begin());
  const double total = cdf.back();
  std::vector<Point> out(n);
  for (std::size_t p = 0; p < n; ++p) {
    auto rng = detail::particle_rng(seed, p, detail::Stream::sampling);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double r = uni(rng) * total;
    std::size_t k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    k = std::min(k, w.size() - 1);
    const std::size_t i = k / g.n2(), j = k % g.n2();
    const double a = std::clamp(g.x1(i) + (uni(rng) - 0.5) * g.dx1(), g.x1_min(), g.x1_max());
    const double b = std::clamp(g.x2(j) + (uni(rng) - 0.5) * g.dx2(), g.x2_min(), g.x2_max());
    out[p] = {a, b};
  }
  return out;
}

/// Silverman's rule in two dimensions: h_k = std_k * n^(-1/6).
inline std::array<double, 2> silverman_bandwidth(const std::vector<Point>& pts) {
  if (pts.empty()) throw InputError("empirical_density: empty ensemble");
  const double n = static_cast<double>(pts.size());
  std::array<double, 2> out{};
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (const auto& p : pts) mean += p[c];
    mean /= n;
    double var = 0.0;
    for (const auto& p : pts) var += (p[c] - mean) * (p[c] - mean);
    var /= std::max(1.0, n - 1.0);
    out[c] = std::sqrt(var) * std::pow(n, -1.0 / 6.0);
  }
  return out;
}

/// Kernel density estimate on g: particles are deposited on the nodes bilinearly, the
/// node masses are spread with a Gaussian of the Silverman bandwidths (each node's
/// kernel renormalised inside the box), and the result is divided by the cell areas.
inline DensityField empirical_density(const std::vector<Point>& pts, const Grid2D& g,
                                      std::optional<std::array<double, 2>> bandwidth = std::nullopt) {
  if (pts.empty()) throw InputError("empirical_density: empty ensemble");
  const std::array<double, 2> bw = bandwidth ? *bandwidth : silverman_bandwidth(pts);
  const std::size_t n1 = g.n1(), n2 = g.n2();
  std::vector<double> q(g.size(), 0.0);
  const double wp = 1.0 / static_cast<double>(pts.size());
  for (const auto& p : pts) {
    const double s = std::clamp((p[0] - g.x1_min()) / g.dx1(), 0.0, static_cast<double>(n1 - 1));
    const double t = std::clamp((p[1] - g.x2_min()) / g.dx2(), 0.0, static_cast<double>(n2 - 1));
    const std::size_t i = std::min(static_cast<std::size_t>(s), n1 - 2);
    const std::size_t j = std::min(static_cast<std::size_t>(t), n2 - 2);
    const double a = s - static_cast<double>(i), b = t - static_cast<double>(j);
    q[g.index(i, j)] += wp * (1 - a) * (1 - b);
    q[g.index(i + 1, j)] += wp * a * (1 - b);
    q[g.index(i, j + 1)] += wp * (1 - a) * b;
    q[g.index(i + 1, j + 1)] += wp * a * b;
  }
  // separable spreading; a kernel narrower than half a cell is the identity
  const auto spread_matrix = [](std::size_t n, double dx, double h) {
    std::vector<double> K(n * n, 0.0);
    for (std::size_t src = 0; src < n; ++src) {
      if (h < 0.5 * dx) {
        K[src * n + src] = 1.0;
        continue;
      }
      double s = 0.0;
      for (std::size_t dst = 0; dst < n; ++dst) {
        const double d = (static_cast<double>(dst) - static_cast<double>(src)) * dx / h;
        K[src * n + dst] = std::exp(-0.5 * d * d);
        s += K[src * n + dst];
      }
      for (std::size_t dst = 0; dst < n; ++dst) K[src * n + dst] /= s;
    }
    return K;
  };
  const std::vector<double> K1 = spread_matrix(n1, g.dx1(), bw[0]);
  const std::vector<double> K2 = spread_matrix(n2, g.dx2(), bw[1]);
  std::vector<double> tmp(g.size(), 0.0), out(g.size(), 0.0);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      const double v = q[g.index(i, j)];
      if (v == 0.0) continue;
      for (std::size_t l = 0; l < n2; ++l) tmp[g.index(i, l)] += v * K2[j * n2 + l];
    }
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t l = 0; l < n2; ++l) {
      const double v = tmp[g.index(i, l)];
      if (v == 0.0) continue;
      for (std::size_t k = 0; k < n1; ++k) out[g.index(k, l)] += v * K1[i * n1 + k];
    }
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) out[g.index(i, j)] /= g.weight(i, j);
  return DensityField::normalized(g, std::move(out));
}

inline DensityField empirical_density(const ParticleEnsemble& ens, double t, const Grid2D& g) {
  return empirical_density(ens.at_time(t), g);
}

/// d1 between the KDE of an ensemble slice and a reference density, with the two
/// error scales it is judged against.
struct KdeComparison {
  double d1 = 0.0;
  double bandwidth = 0.0;        ///< |(h1, h2)|, a bound on the d1 shift caused by the smoothing
  double bootstrap_error = 0.0;  ///< rms d1 between resampled and original KDEs
};

inline KdeComparison compare_with_density(const std::vector<Point>& pts, const DensityField& ref,
                                          const D1Options& opt = {}, std::size_t resamples = 20,
                                          std::uint64_t seed = 0) {
  const auto bw = silverman_bandwidth(pts);
  const DensityField kde = empirical_density(pts, ref.grid(), bw);
  KdeComparison out;
  out.d1 = d1_distance(kde, ref, opt);
  out.bandwidth = std::hypot(bw[0], bw[1]);
  double ss = 0.0;
  std::vector<Point> boot(pts.size());
  for (std::size_t r = 0; r < resamples; ++r) {
    auto rng = detail::particle_rng(seed, r, detail::Stream::bootstrap);
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    for (auto& b : boot) b = pts[pick(rng)];
    const double d = d1_distance(empirical_density(boot, ref.grid(), bw), kde, opt);
    ss += d * d;
  }
  if (resamples > 0) out.bootstrap_error = std::sqrt(ss / static_cast<double>(resamples));
  return out;
}

}  // namespace dmfg
