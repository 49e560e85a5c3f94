// Acceptance suite: one PASS/FAIL line per criterion. Exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "dmfg/dmfg.hpp"
#include "ot_oracle.hpp"

using namespace dmfg;

namespace {

struct Line {
  int id;
  std::string title;
  bool pass;
  std::string detail;
};

std::vector<Line> lines;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Runs one criterion; an exception counts as a failure with its message as detail.
void criterion(int id, const std::string& title, const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool pass = false;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("C%02d %s  %s: %s [%.1fs]\n", id, pass ? "PASS" : "FAIL", title.c_str(), detail.c_str(), secs);
  std::fflush(stdout);
  lines.push_back({id, title, pass, detail});
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::map<std::string, RunConfig> shipped_configs() {
  std::map<std::string, RunConfig> out;
  for (const auto& e : std::filesystem::directory_iterator(DMFG_CONFIG_DIR))
    if (e.path().extension() == ".json") out.emplace(e.path().stem().string(), load_config(e.path().string()));
  return out;
}

SweepResult sweep_of(const RunConfig& c, bool sabotage = false) {
  prevalidate(c);
  MfgConfig m = make_mfg_config(c);
  m.fpe.sabotage_upwind = sabotage;
  SweepResult r = eps_sweep(make_dynamics(c), make_coupling(c), make_initial_density(c, make_grid(c)), m, threads());
  if (r.failure) std::rethrow_exception(r.failure);
  return r;
}

const MfgSolution& level(const SweepResult& s, double eps) {
  for (const auto& l : s.levels)
    if (l.epsilon == eps) return l.solution;
  throw InputError("sweep has no level at eps = " + format_number(eps));
}

struct MassPositivity {
  double mass_error = 0.0, drift = 0.0, min_density = 0.0, moment_ratio = 0.0;
};

MassPositivity mass_positivity(const std::vector<const FpeDiagnostics*>& diags) {
  MassPositivity r;
  for (const FpeDiagnostics* d : diags) {
    r.mass_error = std::max(r.mass_error, d->mass_error_max);
    r.drift = std::max(r.drift, d->mass_drift_max);
    r.min_density = std::min(r.min_density, d->min_density);
    const double m0 = d->second_moments.front();
    const double sup = *std::max_element(d->second_moments.begin(), d->second_moments.end());
    r.moment_ratio = std::max(r.moment_ratio, sup / (m0 + 1.0));
  }
  return r;
}

double l1_to_gaussian(const ScalarField& m, double mean1, double mean2, double var) {
  const Grid2D& g = m.grid();
  double e = 0.0;
  for (std::size_t i = 0; i < g.n1(); ++i)
    for (std::size_t j = 0; j < g.n2(); ++j) {
      const double a = g.x1(i) - mean1, b = g.x2(j) - mean2;
      const double exact = std::exp(-(a * a + b * b) / (2 * var)) / (2 * std::numbers::pi * var);
      e += g.weight(i, j) * std::abs(m(i, j) - exact);
    }
  return e;
}

RunConfig with_resolution(RunConfig c, std::size_t n, std::size_t nt) {
  c.grid.n1 = c.grid.n2 = n;
  c.time.nt = nt;
  return c;
}

}  // namespace

int main() {
  const auto configs = shipped_configs();
  std::printf("acceptance: %zu shipped configs, %zu threads\n", configs.size(), threads());

  // Sweeps of every shipped configuration; criteria 1, 2, 7 read them, 3-6 and 10-14 reuse them.
  std::map<std::string, SweepResult> sweeps;
  std::map<std::string, std::string> sweep_errors;
  for (const auto& [name, c] : configs) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      sweeps.emplace(name, sweep_of(c));
      std::printf("  swept %-18s %zu levels%s [%.1fs]\n", name.c_str(), sweeps.at(name).levels.size(),
                  sweeps.at(name).aborted ? (" (aborted: " + sweeps.at(name).message + ")").c_str() : "",
                  seconds_since(t0));
    } catch (const std::exception& e) {
      sweep_errors[name] = e.what();
      std::printf("  swept %-18s failed: %s\n", name.c_str(), e.what());
    }
    std::fflush(stdout);
  }
  const auto all_diags = [&] {
    std::vector<const FpeDiagnostics*> d;
    for (const auto& [name, s] : sweeps)
      for (const auto& l : s.levels) d.push_back(&l.solution.fpe);
    return d;
  };
  const auto sweeps_complete = [&](std::string& detail) {
    for (const auto& [name, msg] : sweep_errors) detail += name + " failed (" + msg + "); ";
    for (const auto& [name, s] : sweeps)
      if (s.aborted) detail += name + " aborted (" + s.message + "); ";
    return detail.empty();
  };

  criterion(1, "mass conservation on all shipped configs", [&](std::string& d) {
    const bool complete = sweeps_complete(d);
    const MassPositivity r = mass_positivity(all_diags());
    d += fmt("max |mass - 1| = %.2e (<= 1e-8), max step drift = %.2e (<= 1e-10)", r.mass_error, r.drift);
    return complete && r.mass_error <= 1e-8 && r.drift <= 1e-10;
  });

  criterion(2, "positivity before clamping on all shipped configs", [&](std::string& d) {
    const bool complete = sweeps_complete(d);
    const MassPositivity r = mass_positivity(all_diags());
    d += fmt("min density = %.3e (>= -1e-12)", r.min_density);
    return complete && r.min_density >= -1e-12;
  });

  const RunConfig& gd = configs.at("grushin_default");
  std::optional<SuiteReport> suite;
  const auto grushin_suite = [&]() -> const SuiteReport& {
    if (!suite) {
      const SweepResult& s = sweeps.at("grushin_default");
      SuiteInputs in;
      in.d1 = make_mfg_config(gd).fixed_point.d1;
      for (const auto& l : s.levels) in.levels.push_back({l.epsilon, l.solution.u, l.solution.m});
      const RunConfig rc = refined(gd);
      const MfgSolution fine = picard_solve(make_dynamics(rc, 0.0), make_coupling(rc),
                                            make_initial_density(rc, make_grid(rc)), make_mfg_config(rc));
      if (!fine.converged) throw SolverError("refined eps = 0 solve did not converge");
      in.u0_refined = restrict_to_coarse(fine.u, make_grid(gd), make_mesh(gd));
      suite = lemma_suite(in, gd.verify.tol);
    }
    return *suite;
  };
  const auto measured = [](const PropertyResult& p, const std::string& key) {
    for (const auto& [k, v] : p.measured)
      if (k == key) return v;
    throw InputError(p.name + " has no measurement " + key);
  };

  criterion(3, "Lipschitz constants stable across eps (grushin_default)", [&](std::string& d) {
    const auto& s = grushin_suite().get("spatial_lipschitz");
    const auto& t = grushin_suite().get("temporal_lipschitz");
    d = fmt("spatial spread %.1f%%, temporal spread %.1f%% (< 20%%)", 100 * measured(s, "relative_spread"),
            100 * measured(t, "relative_spread"));
    return s.pass && t.pass;
  });

  criterion(4, "semiconcavity stable across eps, axes and diagonals (grushin_default)", [&](std::string& d) {
    const auto& p = grushin_suite().get("semiconcavity");
    d = fmt("C_eps from %.4f (eps 0.1) to %.4f (eps 0.0125), spread %.2f%% (< 30%%)", measured(p, "eps_0.1"),
            measured(p, "eps_0.0125"), 100 * measured(p, "relative_spread"));
    return p.pass;
  });

  criterion(5, "vanishing viscosity (grushin_default)", [&](std::string& d) {
    const auto& p = grushin_suite().get("vanishing_viscosity");
    d = fmt("du = %.4f, %.4f, %.4f; |u^0.0125 - u^0| = %.4f <= 3 x refinement error %.4f", measured(p, "delta_1"),
            measured(p, "delta_2"), measured(p, "delta_3"), measured(p, "delta_to_eps_0"),
            measured(p, "eps_0_refinement_error"));
    return p.pass;
  });

  criterion(6, "Holder-1/2 ratio finite and stable, slope >= 0.45 (grushin_default)", [&](std::string& d) {
    const auto& p = grushin_suite().get("holder_half_in_time");
    double slope = std::numeric_limits<double>::infinity();
    for (const auto& [k, v] : p.measured)
      if (k.rfind("slope_", 0) == 0) slope = std::min(slope, v);
    d = fmt("ratio %.3f .. %.3f, spread %.1f%% (< 30%%), min slope %.3f", measured(p, "ratio_eps_0.0125"),
            measured(p, "ratio_eps_0.1"), 100 * measured(p, "relative_spread"), slope);
    return p.pass;
  });

  criterion(7, "second moment bound on all shipped configs", [&](std::string& d) {
    const bool complete = sweeps_complete(d);
    const MassPositivity r = mass_positivity(all_diags());
    d += fmt("max sup_t m2 / (m2(0) + 1) = %.3f (<= 3)", r.moment_ratio);
    return complete && r.moment_ratio <= 3.0;
  });

  criterion(8, "Hopf-Lax at 128^2 x 256 steps", [&](std::string& d) {
    const RunConfig& c = configs.at("hopf_lax");
    const Grid2D g = make_grid(c);
    const auto t0 = std::chrono::steady_clock::now();
    const HjbConfig hc = make_mfg_config(c).hjb;
    const ValuePath u = solve_hjb_backward(make_dynamics(c, 0.0), make_coupling(c),
                                           DensityPath::constant(make_initial_density(c, g), hc.mesh), hc);
    const double secs = seconds_since(t0);
    double err = 0.0;
    for (std::size_t k = 0; k + 1 < u.nt(); ++k) {
      const ScalarField exact = hopf_lax_oracle(u.terminal(), hc.mesh.t(k), hc.mesh.T);
      for (std::size_t i = 0; i < g.n1(); ++i)
        for (std::size_t j = 0; j < g.n2(); ++j)
          if (g.inside_frame(i, j, 0.1)) err = std::max(err, std::abs(u[k](i, j) - exact(i, j)));
    }
    d = fmt("%zu cells, %zu steps, max error outside frame %.4f (<= 5e-2), solve %.1fs (< 120s)", g.n1() - 1,
            hc.mesh.nt - 1, err, secs);
    return g.n1() - 1 == 128 && hc.mesh.nt - 1 == 256 && err <= 5e-2 && secs < 120.0;
  });

  criterion(9, "heat kernel L1 at 128^2", [&](std::string& d) {
    const RunConfig& c = configs.at("heat_kernel");
    const Grid2D g = make_grid(c);
    const MfgConfig m = make_mfg_config(c);
    const DynamicsSpec dyn = make_dynamics(c);
    const FpeResult r = solve_fpe(make_initial_density(c, g), ValuePath(g, m.hjb.mesh), dyn, m.hjb, m.fpe);
    // generator eps Lap + 1/2 sigma^2 Lap with sigma = scale: variance grows by (2 eps + scale^2) t
    const double rate = 2.0 * c.dynamics.epsilon + c.dynamics.scale * c.dynamics.scale;
    double worst = 0.0;
    std::size_t k = 1;
    for (; k < m.hjb.mesh.nt && r.path.density(k).boundary_mass() <= 1e-6; ++k)
      worst = std::max(worst, l1_to_gaussian(r.path.field(k), c.initial.mean[0], c.initial.mean[1],
                                             c.initial.variance + rate * m.hjb.mesh.t(k)));
    const double t_end = m.hjb.mesh.t(k - 1);
    d = fmt("%zu cells, max L1 error %.2e (<= 2e-2) over t <= %.3f, where boundary mass stays <= 1e-6", g.n1() - 1,
            worst, t_end);
    return g.n1() - 1 == 128 && c.coupling.name == "decoupled" && k > 1 && worst <= 2e-2;
  });

  criterion(10, "Monte Carlo matches the PDE value at 5 probes (grushin_default)", [&](std::string& d) {
    const MfgSolution& sol = level(sweeps.at("grushin_default"), gd.dynamics.epsilon);
    const DynamicsSpec dyn = make_dynamics(gd);
    const CouplingSpec coupling = make_coupling(gd);
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = gd.mc.probes.size() == 5 && gd.mc.n >= 100000;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& p : gd.mc.probes) {
      const json r = mc_probe(dyn, coupling, sol, {p[0], p[1]}, p[2], {gd.mc.n, gd.mc.seed, gd.mc.dt_sde, threads()},
                              0.05);
      ok = ok && r["pass"].get<bool>();
      worst = std::max(worst, r["abs_diff"].get<double>() - 3.0 * r["mc_stderr"].get<double>());
    }
    const double secs = seconds_since(t0);
    d = fmt("%zu probes, n = %zu, max(|mc - pde| - 3 se) = %.4f (<= 0.05), %.1fs (< 180s)", gd.mc.probes.size(),
            gd.mc.n, worst, secs);
    return ok && secs < 180.0;
  });

  criterion(11, "particle KDE matches the FPE at T/4, T/2, T (grushin_default)", [&](std::string& d) {
    const MfgSolution& sol = level(sweeps.at("grushin_default"), gd.dynamics.epsilon);
    const json r = kde_consistency(make_dynamics(gd), sol, make_initial_density(gd, make_grid(gd)), {0.25, 0.5, 1.0},
                                   gd.mc, make_mfg_config(gd).fixed_point.d1, threads());
    bool ok = true;
    for (const auto& e : r) {
      ok = ok && e["pass"].get<bool>();
      d += fmt("t=%.2f: d1 %.4f <= %.4f; ", e["t"].get<double>(), e["d1"].get<double>(),
               e["bandwidth"].get<double>() + 3 * e["bootstrap_error"].get<double>());
    }
    return ok;
  });

  criterion(12, "Picard from two starts agrees (grushin_default)", [&](std::string& d) {
    const MfgSolution& a = level(sweeps.at("grushin_default"), gd.dynamics.epsilon);
    const Grid2D g = make_grid(gd);
    const MfgConfig m = make_mfg_config(gd);
    const DensityPath other = DensityPath::constant(DensityField::gaussian(g, 1.5, 1.5, 0.5), m.hjb.mesh);
    const MfgSolution b = picard_solve(make_dynamics(gd), make_coupling(gd), make_initial_density(gd, g), m, other);
    const double dist = max_d1_over_time(a.m, b.m, D1Options{D1Method::exact});
    d = fmt("max_t d1 = %.2e (<= 2 tol_d1 = %.0e), iterations %zu and %zu", dist, 2 * m.fixed_point.tol_d1, a.iters,
            b.iters);
    return a.converged && b.converged && dist <= 2 * m.fixed_point.tol_d1;
  });

  criterion(13, "Sinkhorn within 2% of exact; exact LP matches min-cost flow", [&](std::string& d) {
    const Grid2D g = Grid2D::square(1.0, 8);
    std::mt19937_64 rng(20240917);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst_rel = 0.0, worst_lp = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> a(g.size()), b(g.size());
      for (auto& v : a) v = U(rng);
      for (auto& v : b) v = U(rng);
      const DensityField mu = DensityField::normalized(g, a), nu = DensityField::normalized(g, b);
      const double exact = wasserstein1_exact(mu, nu);
      const double sk = wasserstein1_sinkhorn(mu, nu, default_sinkhorn_reg(g)).value;
      worst_rel = std::max(worst_rel, std::abs(sk - exact) / exact);
      worst_lp = std::max(worst_lp, std::abs(exact - oracle::min_cost_flow(to_measure(mu), to_measure(nu))));
    }
    d = fmt("100 pairs on 8x8: max relative Sinkhorn gap %.3f%% (<= 2%%), max |LP - flow| %.1e (<= 1e-9)",
            100 * worst_rel, worst_lp);
    return worst_rel <= 0.02 && worst_lp <= 1e-9;
  });

  criterion(14, "inviscid grushin_exp residual small almost everywhere", [&](std::string& d) {
    const RunConfig& c = configs.at("grushin_residual");
    const auto fraction = [&](const RunConfig& rc, const MfgSolution& s) {
      const Grid2D g = make_grid(rc);
      const double tol = 5.0 * (g.dx1() + make_mesh(rc).dt());
      return ae_residual_report(s.u, make_dynamics(rc, 0.0), make_coupling(rc), s.m, tol, rc.verify.tol.frame)
          .fraction_below;
    };
    const MfgSolution& fine = level(sweeps.at("grushin_residual"), 0.0);
    const RunConfig coarse_cfg = with_resolution(c, 65, 65);
    prevalidate(coarse_cfg);
    const MfgSolution coarse = picard_solve(make_dynamics(coarse_cfg, 0.0), make_coupling(coarse_cfg),
                                            make_initial_density(coarse_cfg, make_grid(coarse_cfg)),
                                            make_mfg_config(coarse_cfg));
    const double f64 = fraction(coarse_cfg, coarse), f128 = fraction(c, fine);
    d = fmt("fraction with |residual| <= 5(dx + dt): %.4f at 64^2, %.4f at 128^2 (>= 0.99, non-decreasing)", f64,
            f128);
    return c.grid.n1 == 129 && coarse.converged && fine.converged && f128 >= 0.99 && f128 >= f64;
  });

  criterion(15, "--sabotage-upwind breaks criterion 1 or 2", [&](std::string& d) {
    std::vector<std::string> caught;
    for (const auto& [name, c] : configs) {
      std::vector<double> eps = c.fixed_point.eps_schedule;
      eps.push_back(0.0);
      MfgConfig m = make_mfg_config(c);
      m.fpe.sabotage_upwind = true;
      m.fixed_point.max_outer_iters = 2;  // the scheme is under test here, not convergence
      const Grid2D g = make_grid(c);
      for (double e : eps) {
        try {
          const MfgSolution s = picard_solve(make_dynamics(c, e), make_coupling(c), make_initial_density(c, g), m);
          const MassPositivity r = mass_positivity({&s.fpe});
          if (r.mass_error > 1e-8 || r.drift > 1e-10) {
            caught.push_back(name + fmt(" eps=%g: mass", e));
            break;
          }
          if (r.min_density < -1e-12) {
            caught.push_back(name + fmt(" eps=%g: min density %.1e", e, r.min_density));
            break;
          }
        } catch (const ConservationError&) {
          caught.push_back(name + fmt(" eps=%g: mass drift guard", e));
          break;
        }
      }
    }
    d = caught.empty() ? "no shipped config fails under sabotage" : "caught by ";
    for (std::size_t k = 0; k < caught.size(); ++k) d += (k ? "; " : "") + caught[k];
    return !caught.empty();
  });

  std::size_t passed = 0;
  for (const auto& l : lines) passed += l.pass;
  std::printf("acceptance: %zu/%zu criteria passed\n", passed, lines.size());
  return passed == lines.size() ? 0 : 1;
}
