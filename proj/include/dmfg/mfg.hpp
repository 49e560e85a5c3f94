#pragma once

// The map psi: mu -> u[mu] -> m[u] and its damped Picard iteration, plus the
// vanishing-viscosity sweep over a decreasing list of epsilons.

#include <cmath>
#include <exception>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dmfg/coupling.hpp"
#include "dmfg/dynamics.hpp"
#include "dmfg/errors.hpp"
#include "dmfg/fpe.hpp"
#include "dmfg/hjb.hpp"
#include "dmfg/measures.hpp"
#include "dmfg/paths.hpp"

namespace dmfg {

struct FixedPointConfig {
  double theta = 0.5;
  std::size_t max_outer_iters = 60;
  double tol_d1 = 1e-3;
  std::vector<double> eps_schedule{0.1, 0.05, 0.025, 0.0125};
  D1Options d1{};
  double frame = 0.1;  ///< boundary frame excluded from the sweep's sup-norm deltas

  void validate() const {
    std::vector<std::string> errs;
    if (!(theta > 0.0 && theta <= 1.0)) errs.push_back("fixed_point.theta must lie in (0, 1]");
    if (!(tol_d1 > 0.0)) errs.push_back("fixed_point.tol_d1 must be > 0");
    if (max_outer_iters == 0) errs.push_back("fixed_point.max_outer_iters must be >= 1");
    if (!errs.empty()) throw ConfigError(errs);
  }
};

/// Everything one MFG solve needs besides dynamics, coupling and m0.
struct MfgConfig {
  HjbConfig hjb;
  FixedPointConfig fixed_point;
  FpeOptions fpe;
};

struct PsiResult {
  ValuePath u;
  FpeResult fpe;
};

/// psi(mu) with the explicit initial density m0: HJB driven by mu, then FPE driven by u.
inline PsiResult psi_full(const DensityPath& mu, const DensityField& m0, const DynamicsSpec& dyn,
                          const CouplingSpec& coupling, const MfgConfig& cfg) {
  ValuePath u = solve_hjb_backward(dyn, coupling, mu, cfg.hjb);
  FpeResult f = solve_fpe(m0, u, dyn, cfg.hjb, cfg.fpe);
  return {std::move(u), std::move(f)};
}

/// psi(mu); the initial density is taken from slice 0 of mu.
inline DensityPath psi_map(const DensityPath& mu, const DynamicsSpec& dyn, const CouplingSpec& coupling,
                           const MfgConfig& cfg) {
  return psi_full(mu, mu.density(0), dyn, coupling, cfg).fpe.path;
}

struct MfgSolution {
  ValuePath u;
  DensityPath m;
  std::vector<double> residual_history;
  double epsilon = 0.0;
  bool converged = false;
  std::size_t iters = 0;
  FpeDiagnostics fpe;
  std::vector<std::string> warnings;
};

/// Damped Picard iteration m^{k+1} = (1 - theta) m^k + theta psi(m^k).
///
/// The first application m^1 = psi(m^0) is a warm start and is not counted. The
/// residual of iteration k is max_t d1(m^{k+1}_t, m^k_t) = theta max_t d1(psi(m^k)_t, m^k_t).
/// On return u solves the HJB with the final iterate and m = psi(final iterate), so
/// (u, m) is a consistent HJB/FPE pair. Without convergence the iterate with the
/// smallest residual is returned and converged = false.
inline MfgSolution picard_solve(const DynamicsSpec& dyn, const CouplingSpec& coupling, const DensityField& m0,
                                const MfgConfig& cfg, const std::optional<DensityPath>& initial = std::nullopt) {
  cfg.fixed_point.validate();
  const FixedPointConfig& fp = cfg.fixed_point;
  std::vector<std::string> warnings;
  if (!coupling.monotone) warnings.push_back("coupling is not declared monotone; uniqueness is not guaranteed");
  DensityPath mu = initial ? *initial : DensityPath::constant(m0, cfg.hjb.mesh);
  if (!(mu.mesh() == cfg.hjb.mesh)) throw InputError("picard_solve: initial path uses a different time mesh");
  detail::require_same_grid(mu.grid(), m0.grid(), "picard_solve");

  PsiResult cur = psi_full(mu, m0, dyn, coupling, cfg);
  mu = cur.fpe.path;  // warm start
  std::vector<double> history;
  std::optional<MfgSolution> best;
  double best_res = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= fp.max_outer_iters; ++it) {
    cur = psi_full(mu, m0, dyn, coupling, cfg);
    const double res = fp.theta * max_d1_over_time(cur.fpe.path, mu, fp.d1);
    history.push_back(res);
    if (res <= fp.tol_d1) {
      MfgSolution s{std::move(cur.u), std::move(cur.fpe.path), history, dyn.epsilon, true, it,
                    std::move(cur.fpe.diagnostics), warnings};
      for (const auto& w : s.fpe.warnings) s.warnings.push_back(w);
      return s;
    }
    if (res < best_res) {
      best_res = res;
      best = MfgSolution{cur.u, cur.fpe.path, {}, dyn.epsilon, false, it, cur.fpe.diagnostics, warnings};
    }
    mu = mu.blend(cur.fpe.path, fp.theta);
  }
  MfgSolution s = std::move(*best);
  s.residual_history = history;
  s.iters = fp.max_outer_iters;
  s.warnings.push_back("Picard iteration did not reach tol_d1 = " + format_number(fp.tol_d1) + " in " +
                       std::to_string(fp.max_outer_iters) + " iterations; returning the best iterate");
  for (const auto& w : s.fpe.warnings) s.warnings.push_back(w);
  return s;
}

/// max over time slices and framed nodes of |a - b|.
inline double sup_norm_difference(const ValuePath& a, const ValuePath& b, double frame = 0.0) {
  if (!(a.mesh() == b.mesh())) throw InputError("sup_norm_difference: time meshes differ");
  const Grid2D& g = a.grid();
  double m = 0.0;
  for (std::size_t k = 0; k < a.nt(); ++k)
    for (std::size_t i = 0; i < g.n1(); ++i)
      for (std::size_t j = 0; j < g.n2(); ++j)
        if (g.inside_frame(i, j, frame)) m = std::max(m, std::abs(a[k](i, j) - b[k](i, j)));
  return m;
}

struct SweepLevel {
  double epsilon;
  MfgSolution solution;
  double sup_norm_delta;  ///< |u^{eps_{i-1}} - u^{eps_i}| over space-time; NaN at the first level
  double d1_delta;        ///< max_t d1(m^{eps_{i-1}}_t, m^{eps_i}_t); NaN at the first level
};

struct SweepResult {
  std::vector<SweepLevel> levels;  ///< the schedule in order, then eps = 0 last
  bool aborted = false;
  std::string message;
  std::exception_ptr failure;  ///< set when a level threw rather than failing to converge
};

/// Solves the MFG at every epsilon of the schedule and at eps = 0. Levels are
/// independent (no warm start across levels) and may run on up to `threads` threads;
/// results do not depend on the thread count. A level that fails to converge stops
/// the sweep; the levels before it are returned.
inline SweepResult eps_sweep(const DynamicsSpec& dyn, const CouplingSpec& coupling, const DensityField& m0,
                             const MfgConfig& cfg, std::size_t threads = 1) {
  cfg.fixed_point.validate();
  std::vector<double> eps = cfg.fixed_point.eps_schedule;
  if (eps.empty()) throw ConfigError("eps_schedule must not be empty");
  for (std::size_t k = 0; k < eps.size(); ++k) {
    if (eps[k] < 0.0) throw ConfigError("eps_schedule entries must be >= 0");
    if (k > 0 && eps[k] > eps[k - 1]) throw ConfigError("eps_schedule must be decreasing");
  }
  eps.push_back(0.0);

  std::vector<std::optional<MfgSolution>> sols(eps.size());
  std::vector<std::string> errors(eps.size());
  std::vector<std::exception_ptr> failures(eps.size());
  const auto run = [&](std::size_t k) {
    try {
      sols[k] = picard_solve(dyn.with_epsilon(eps[k]), coupling, m0, cfg);
    } catch (const std::exception& e) {
      errors[k] = e.what();
      failures[k] = std::current_exception();
    }
  };
  const std::size_t nthreads = std::max<std::size_t>(1, threads);
  for (std::size_t start = 0; start < eps.size(); start += nthreads) {
    std::vector<std::future<void>> jobs;
    const std::size_t stop = std::min(eps.size(), start + nthreads);
    for (std::size_t k = start + 1; k < stop; ++k) jobs.push_back(std::async(std::launch::async, run, k));
    run(start);
    for (auto& j : jobs) j.get();
  }

  SweepResult out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < eps.size(); ++k) {
    if (!errors[k].empty()) {
      out.aborted = true;
      out.message = "level eps = " + format_number(eps[k]) + " failed: " + errors[k];
      out.failure = failures[k];
      break;
    }
    if (!sols[k]->converged) {
      out.aborted = true;
      out.message = "level eps = " + format_number(eps[k]) + " did not converge";
      break;
    }
    double du = nan, dm = nan;
    if (k > 0) {
      du = sup_norm_difference(out.levels.back().solution.u, sols[k]->u, cfg.fixed_point.frame);
      dm = max_d1_over_time(out.levels.back().solution.m, sols[k]->m, cfg.fixed_point.d1);
    }
    out.levels.push_back({eps[k], std::move(*sols[k]), du, dm});
  }
  return out;
}

}  // namespace dmfg
