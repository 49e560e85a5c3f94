#pragma once

// A full run: eps sweep, refined inviscid solve, Monte Carlo probes, particle/density
// consistency and the property suite, with every artifact under one directory.
//
//   config.json        the configuration as run
//   summary.json       deterministic results (no timings, no absolute paths)
//   timings.json       wall-clock seconds per stage
//   verify_report.json the property suite
//   levels/level_K/    u_NNN.csv, m_NNN.csv per time slice (output.fields = true)
//   refined/           u0_NNN.csv, the refined eps = 0 value on the coarse nodes

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dmfg/config.hpp"
#include "dmfg/mfg.hpp"
#include "dmfg/sde.hpp"
#include "dmfg/verify.hpp"

namespace dmfg {

namespace fs = std::filesystem;

struct RunOptions {
  std::string out_dir;  ///< overrides output.dir when non-empty
  std::size_t threads = 1;
  bool sabotage_upwind = false;
};

struct RunSummary {
  json summary;
  json timings;
  bool pass = false;
  std::string dir;
};

namespace detail {

/// Calls fn and re-throws library errors with the stage name in front.
template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    if (e.errors().empty()) throw ConfigError(stage + ": " + e.what());
    std::vector<std::string> errs;
    for (const auto& m : e.errors()) errs.push_back(stage + ": " + m);
    throw ConfigError(errs);
  } catch (const SolverError& e) {
    throw SolverError(stage + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(stage + ": " + e.what());
  }
}

inline std::string slice_file(const std::string& prefix, std::size_t k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu.csv", prefix.c_str(), k);
  return buf;
}

inline void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw InputError("cannot open " + p.string() + " for writing");
  out << j.dump(2) << "\n";
}

inline json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InputError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace detail

// Field paths on disk.

inline void write_slices(const ValuePath& u, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < u.nt(); ++k) write_csv(u[k], (dir / detail::slice_file(prefix, k)).string());
}

inline void write_slices(const DensityPath& m, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < m.nt(); ++k) write_csv(m.field(k), (dir / detail::slice_file(prefix, k)).string());
}

inline ValuePath read_value_slices(const Grid2D& g, const TimeMesh& mesh, const fs::path& dir,
                                   const std::string& prefix) {
  ValuePath u(g, mesh);
  for (std::size_t k = 0; k < mesh.nt; ++k) u[k] = read_csv(g, (dir / detail::slice_file(prefix, k)).string());
  return u;
}

inline DensityPath read_density_slices(const Grid2D& g, const TimeMesh& mesh, const fs::path& dir,
                                       const std::string& prefix) {
  DensityPath m(g, mesh);
  for (std::size_t k = 0; k < mesh.nt; ++k) m.field(k) = read_csv(g, (dir / detail::slice_file(prefix, k)).string());
  return m;
}

/// A whole path in one file: header `t,x1,x2,value`, slices in time order.
inline void write_path_csv(const TimeMesh& mesh, const std::function<const ScalarField&(std::size_t)>& slice,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << std::setprecision(17) << "t,x1,x2,value\n";
  for (std::size_t k = 0; k < mesh.nt; ++k) {
    const ScalarField& f = slice(k);
    const Grid2D& g = f.grid();
    for (std::size_t i = 0; i < g.n1(); ++i)
      for (std::size_t j = 0; j < g.n2(); ++j)
        out << mesh.t(k) << ',' << g.x1(i) << ',' << g.x2(j) << ',' << f(i, j) << '\n';
  }
}

inline std::vector<ScalarField> read_path_csv(const Grid2D& g, const TimeMesh& mesh, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,x1,x2,value", 0) != 0) throw InputError(path + ": missing t,x1,x2,value header");
  std::vector<double> vals;
  vals.reserve(g.size() * mesh.nt);
  const double tol = 1e-9 * std::max({g.dx1(), g.dx2(), mesh.dt()});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double t, a, b, v;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &t, &a, &b, &v) != 4) throw InputError(path + ": malformed row");
    const std::size_t n = vals.size();
    if (n >= g.size() * mesh.nt) throw InputError(path + ": more rows than grid nodes times slices");
    const std::size_t k = n / g.size(), i = (n % g.size()) / g.n2(), j = n % g.n2();
    if (std::abs(t - mesh.t(k)) > tol || std::abs(a - g.x1(i)) > tol || std::abs(b - g.x2(j)) > tol)
      throw InputError(path + ": row " + std::to_string(n + 1) + " does not match the grid and time mesh");
    vals.push_back(v);
  }
  if (vals.size() != g.size() * mesh.nt) throw InputError(path + ": row count does not match grid and time mesh");
  std::vector<ScalarField> out;
  for (std::size_t k = 0; k < mesh.nt; ++k)
    out.emplace_back(g, std::vector<double>(vals.begin() + static_cast<std::ptrdiff_t>(k * g.size()),
                                            vals.begin() + static_cast<std::ptrdiff_t>((k + 1) * g.size())));
  return out;
}

/// The nodes of a grid refined by two (2n - 1 nodes per axis, 2nt - 1 slices) that
/// coincide with the coarse space-time nodes.
inline ValuePath restrict_to_coarse(const ValuePath& fine, const Grid2D& coarse, const TimeMesh& mesh) {
  const Grid2D& f = fine.grid();
  if (f.n1() != 2 * coarse.n1() - 1 || f.n2() != 2 * coarse.n2() - 1 || fine.nt() != 2 * mesh.nt - 1)
    throw InputError("restrict_to_coarse: fine path is not a factor-two refinement");
  ValuePath out(coarse, mesh);
  for (std::size_t k = 0; k < mesh.nt; ++k)
    for (std::size_t i = 0; i < coarse.n1(); ++i)
      for (std::size_t j = 0; j < coarse.n2(); ++j) out[k](i, j) = fine[2 * k](2 * i, 2 * j);
  return out;
}

/// u(x, t) by bilinear interpolation in space and linear interpolation in time.
inline double value_at(const ValuePath& u, double a, double b, double t) {
  const auto [k, w] = detail::time_bracket(u.mesh(), t);
  const double v0 = interpolate(u[k], a, b);
  return w == 0.0 ? v0 : v0 + w * (interpolate(u[k + 1], a, b) - v0);
}

// JSON summaries.

inline json grid_json(const Grid2D& g, const TimeMesh& mesh) {
  return {{"x1_min", g.x1_min()}, {"x1_max", g.x1_max()}, {"x2_min", g.x2_min()}, {"x2_max", g.x2_max()},
          {"n1", g.n1()},         {"n2", g.n2()},         {"dx1", g.dx1()},       {"dx2", g.dx2()},
          {"T", mesh.T},          {"nt", mesh.nt},        {"dt", mesh.dt()}};
}

inline json hjb_json(const ValuePath& u, const DynamicsSpec& dyn, const CouplingSpec& coupling, const DensityPath& m,
                     double frame) {
  double lip = 0.0;
  for (std::size_t k = 0; k < u.nt(); ++k) lip = std::max(lip, lipschitz_estimate(u[k], frame));
  json j = {{"sup_norm", u.sup_norm()}, {"lipschitz_estimate", lip}, {"residual_median", nullptr}};
  if (u.nt() >= 3) j["residual_median"] = ae_residual_report(u, dyn, coupling, m, 0.0, frame).q50;
  return j;
}

inline json fpe_json(const FpeDiagnostics& d) {
  return {{"mass_drift_max", d.mass_drift_max},       {"mass_error_max", d.mass_error_max},
          {"min_density", d.min_density},             {"boundary_mass_max", d.boundary_mass_max},
          {"positivity_violated", d.positivity_violated}, {"second_moments", d.second_moments}};
}

inline json mfg_json(const MfgSolution& s) {
  return {{"epsilon", s.epsilon},
          {"converged", s.converged},
          {"iters", s.iters},
          {"residuals", s.residual_history},
          {"warnings", s.warnings}};
}

inline json suite_json(const SuiteReport& r) {
  json props = json::array();
  for (const auto& p : r.properties) {
    json measured = json::object();
    for (const auto& [k, v] : p.measured) measured[k] = v;
    json e = {{"name", p.name}, {"pass", p.pass}, {"measured", measured}};
    if (!p.note.empty()) e["note"] = p.note;
    props.push_back(e);
  }
  return {{"pass", r.all_pass()}, {"properties", props}};
}

// Stages.

/// Monte Carlo cost of the feedback control against the PDE value at one probe.
inline json mc_probe(const DynamicsSpec& dyn, const CouplingSpec& coupling, const MfgSolution& sol, const Point& x0,
                     double t0, const EnsembleConfig& ec, double slack) {
  const McEstimate est = mc_value(dyn, coupling, sol.m, sol.u, x0, t0, ec);
  const double pde = value_at(sol.u, x0[0], x0[1], t0);
  const double diff = std::abs(est.mean - pde);
  return {{"x0", {x0[0], x0[1]}},   {"t0", t0},       {"n", est.n},           {"seed", ec.seed},
          {"mc_mean", est.mean},    {"mc_stderr", est.std_error}, {"pde_value", pde}, {"abs_diff", diff},
          {"pass", diff <= 3.0 * est.std_error + slack}};
}

/// Particles sampled from m0 and driven by the solution's feedback, compared with the
/// density at fractions of T: pass when d1 <= bandwidth + 3 bootstrap error.
inline json kde_consistency(const DynamicsSpec& dyn, const MfgSolution& sol, const DensityField& m0,
                            const std::vector<double>& fractions, const McBlock& mc, const D1Options& d1,
                            std::size_t threads) {
  const TimeMesh& mesh = sol.u.mesh();
  std::vector<std::size_t> slices;
  for (double f : fractions) {
    const double s = f * static_cast<double>(mesh.nt - 1);
    const double k = std::round(s);
    if (std::abs(s - k) > 1e-9) throw ConfigError("mc.consistency_times: " + detail::short_number(f) +
                                                  " T is not a time mesh node");
    slices.push_back(static_cast<std::size_t>(k));
  }
  const std::vector<Point> starts = sample_density(m0, mc.n, mc.seed);
  const ParticleEnsemble ens = simulate_ensemble(dyn, sol.u, starts, 0.0, {mc.n, mc.seed, mc.dt_sde, threads});
  json out = json::array();
  for (std::size_t s = 0; s < slices.size(); ++s) {
    const double t = mesh.t(slices[s]);
    const KdeComparison c = compare_with_density(ens.at_time(t), sol.m.density(slices[s]), d1, mc.bootstrap, mc.seed);
    out.push_back({{"t", t},
                   {"d1", c.d1},
                   {"bandwidth", c.bandwidth},
                   {"bootstrap_error", c.bootstrap_error},
                   {"pass", c.d1 <= c.bandwidth + 3.0 * c.bootstrap_error}});
  }
  return out;
}

inline D1Options d1_options(const RunConfig& c) { return make_mfg_config(c).fixed_point.d1; }

/// Rebuilds the suite inputs from a run directory written with output.fields = true.
inline SuiteInputs load_suite_inputs(const fs::path& dir) {
  const RunConfig c = parse_config(detail::read_json(dir / "config.json").dump());
  const json summary = detail::read_json(dir / "summary.json");
  const Grid2D g = make_grid(c);
  const TimeMesh mesh = make_mesh(c);
  SuiteInputs in;
  in.d1 = d1_options(c);
  if (!summary.contains("sweep") || !summary["sweep"].contains("levels"))
    throw InputError(dir.string() + ": summary.json has no sweep levels");
  for (const auto& l : summary["sweep"]["levels"]) {
    if (!l.contains("dir")) throw InputError(dir.string() + ": run was written without field dumps (output.fields)");
    const fs::path ld = dir / l["dir"].get<std::string>();
    in.levels.push_back({l["epsilon"].get<double>(), read_value_slices(g, mesh, ld, "u"),
                         read_density_slices(g, mesh, ld, "m")});
  }
  if (summary.contains("refined") && summary["refined"].contains("dir"))
    in.u0_refined = read_value_slices(g, mesh, dir / summary["refined"]["dir"].get<std::string>(), "u0");
  return in;
}

inline SuiteReport verify_run_dir(const fs::path& dir, const SuiteTolerances& tol) {
  return lemma_suite(load_suite_inputs(dir), tol);
}

inline RunSummary run_pipeline(RunConfig c, const RunOptions& opt = {}) {
  if (!opt.out_dir.empty()) c.output_dir = opt.out_dir;
  RunSummary rs;
  rs.dir = c.output_dir;
  const fs::path dir(c.output_dir);
  detail::Stopwatch clock;
  json& S = rs.summary;
  json& timings = rs.timings;

  detail::in_stage("config", [&] { prevalidate(c); });
  const Grid2D g = make_grid(c);
  const TimeMesh mesh = make_mesh(c);
  const CouplingSpec coupling = make_coupling(c);
  const DensityField m0 = make_initial_density(c, g);
  MfgConfig mcfg = make_mfg_config(c);
  mcfg.fpe.sabotage_upwind = opt.sabotage_upwind;
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    if (!out) throw ConfigError("cannot write to output directory " + dir.string());
    out << serialize(c);
  }
  S["name"] = c.name;
  S["config_hash"] = config_hash(c);
  S["sabotage_upwind"] = opt.sabotage_upwind;
  S["grid"] = grid_json(g, mesh);
  timings["config"] = clock.lap();

  const SweepResult sweep = detail::in_stage("sweep", [&] {
    SweepResult r = eps_sweep(make_dynamics(c), coupling, m0, mcfg, opt.threads);
    if (r.failure) std::rethrow_exception(r.failure);
    return r;
  });
  json levels = json::array();
  for (std::size_t k = 0; k < sweep.levels.size(); ++k) {
    const SweepLevel& l = sweep.levels[k];
    json e = mfg_json(l.solution);
    e["sup_norm_delta"] = std::isfinite(l.sup_norm_delta) ? json(l.sup_norm_delta) : json(nullptr);
    e["d1_delta"] = std::isfinite(l.d1_delta) ? json(l.d1_delta) : json(nullptr);
    e["hjb"] = hjb_json(l.solution.u, make_dynamics(c, l.epsilon), coupling, l.solution.m, c.verify.tol.frame);
    e["fpe"] = fpe_json(l.solution.fpe);
    if (c.dump_fields) {
      const std::string sub = "levels/level_" + std::to_string(k);
      write_slices(l.solution.u, dir / sub, "u");
      write_slices(l.solution.m, dir / sub, "m");
      e["dir"] = sub;
    }
    levels.push_back(e);
  }
  S["sweep"] = {{"aborted", sweep.aborted}, {"message", sweep.message}, {"levels", levels}};
  timings["sweep"] = clock.lap();

  SuiteInputs suite_in;
  suite_in.d1 = mcfg.fixed_point.d1;
  for (const auto& l : sweep.levels) suite_in.levels.push_back({l.epsilon, l.solution.u, l.solution.m});
  const bool have_inviscid = !sweep.levels.empty() && sweep.levels.back().epsilon == 0.0;
  if (c.verify.refine && have_inviscid) {
    detail::in_stage("refine", [&] {
      const RunConfig rc = refined(c);
      const Grid2D rg = make_grid(rc);
      MfgConfig rm = make_mfg_config(rc);
      rm.fpe.sabotage_upwind = opt.sabotage_upwind;
      const MfgSolution fine = picard_solve(make_dynamics(rc, 0.0), coupling, make_initial_density(rc, rg), rm);
      suite_in.u0_refined = restrict_to_coarse(fine.u, g, mesh);
      json e = mfg_json(fine);
      e["n1"] = rg.n1();
      e["n2"] = rg.n2();
      e["nt"] = rc.time.nt;
      e["refinement_error"] = sup_norm_difference(sweep.levels.back().solution.u, *suite_in.u0_refined,
                                                  c.verify.tol.frame);
      if (c.dump_fields) {
        write_slices(*suite_in.u0_refined, dir / "refined", "u0");
        e["dir"] = "refined";
      }
      S["refined"] = e;
    });
    timings["refine"] = clock.lap();
  }

  // The probes use the solution at dynamics.epsilon; it is usually one of the sweep levels.
  const MfgSolution* sol = nullptr;
  std::optional<MfgSolution> extra;
  for (const auto& l : sweep.levels)
    if (l.epsilon == c.dynamics.epsilon) sol = &l.solution;
  if (!sol && !sweep.aborted) {
    extra = detail::in_stage("solve-mfg", [&] { return picard_solve(make_dynamics(c), coupling, m0, mcfg); });
    S["solution"] = mfg_json(*extra);
    if (extra->converged) sol = &*extra;
    timings["solve-mfg"] = clock.lap();
  }

  bool mc_pass = false, kde_pass = false;
  if (sol) {
    const DynamicsSpec dyn = make_dynamics(c);
    json probes = json::array();
    detail::in_stage("mc-validate", [&] {
      for (const auto& p : c.mc.probes)
        probes.push_back(mc_probe(dyn, coupling, *sol, {p[0], p[1]}, p[2], {c.mc.n, c.mc.seed, c.mc.dt_sde, opt.threads},
                                  c.mc.slack));
    });
    mc_pass = std::all_of(probes.begin(), probes.end(), [](const json& p) { return p["pass"].get<bool>(); });
    S["mc"] = {{"epsilon", sol->epsilon}, {"pass", mc_pass}, {"probes", probes}};
    timings["mc-validate"] = clock.lap();

    json cons = detail::in_stage("consistency", [&] {
      return kde_consistency(dyn, *sol, m0, c.mc.consistency_times, c.mc, suite_in.d1, opt.threads);
    });
    kde_pass = std::all_of(cons.begin(), cons.end(), [](const json& p) { return p["pass"].get<bool>(); });
    S["consistency"] = {{"pass", kde_pass}, {"times", cons}};
    timings["consistency"] = clock.lap();
  } else {
    S["mc"] = {{"pass", false}, {"skipped", "no converged solution at dynamics.epsilon"}};
    S["consistency"] = {{"pass", false}, {"skipped", "no converged solution at dynamics.epsilon"}};
  }

  bool verify_pass = false;
  if (!suite_in.levels.empty()) {
    const SuiteReport rep = detail::in_stage("verify", [&] { return lemma_suite(suite_in, c.verify.tol); });
    verify_pass = rep.all_pass();
    S["verify"] = suite_json(rep);
    detail::write_json(dir / "verify_report.json", S["verify"]);
  } else {
    S["verify"] = {{"pass", false}, {"skipped", "the sweep produced no levels"}};
  }
  timings["verify"] = clock.lap();

  const bool sweep_pass = !sweep.aborted;
  rs.pass = sweep_pass && mc_pass && kde_pass && verify_pass;
  S["rollup"] = {{"sweep", sweep_pass}, {"mc", mc_pass}, {"consistency", kde_pass}, {"verify", verify_pass},
                 {"pass", rs.pass}};
  detail::write_json(dir / "summary.json", S);
  detail::write_json(dir / "timings.json", timings);
  return rs;
}

}  // namespace dmfg
