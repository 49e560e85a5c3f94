#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "dmfg/dmfg.hpp"

using namespace dmfg;

namespace {

enum Exit { kPass = 0, kPropertyFailure = 1, kConfigError = 2, kSolverError = 3 };

struct Globals {
  std::string config;
  std::string out;
  std::size_t threads = 1;
  std::optional<std::uint64_t> seed;
  bool sabotage = false;
};

RunConfig load(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required for this subcommand");
  RunConfig c = load_config(g.config);
  if (g.seed) c.mc.seed = *g.seed;
  if (!g.out.empty()) c.output_dir = g.out;
  prevalidate(c);
  return c;
}

MfgConfig solver_config(const RunConfig& c, const Globals& g) {
  MfgConfig m = make_mfg_config(c);
  m.fpe.sabotage_upwind = g.sabotage;
  return m;
}

void emit(const json& j, const fs::path& dir, const std::string& file) {
  std::cout << j.dump(2) << "\n";
  if (!dir.empty()) {
    fs::create_directories(dir);
    detail::write_json(dir / file, j);
  }
}

std::vector<double> parse_numbers(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(flag + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError(flag + ": expected a comma-separated list of numbers");
  return out;
}

int solve_hjb(const Globals& g, const std::string& m_path) {
  const RunConfig c = load(g);
  const Grid2D grid = make_grid(c);
  const TimeMesh mesh = make_mesh(c);
  const DynamicsSpec dyn = make_dynamics(c);
  const CouplingSpec coupling = make_coupling(c);
  DensityPath m = DensityPath::constant(make_initial_density(c, grid), mesh);
  if (!m_path.empty()) {
    auto slices = read_path_csv(grid, mesh, m_path);
    for (std::size_t k = 0; k < mesh.nt; ++k) m.field(k) = std::move(slices[k]);
  }
  const ValuePath u = solve_hjb_backward(dyn, coupling, m, make_mfg_config(c).hjb);
  const fs::path dir(c.output_dir);
  write_slices(u, dir, "u");
  write_path_csv(mesh, [&](std::size_t k) -> const ScalarField& { return u[k]; }, (dir / "u_path.csv").string());
  json j = hjb_json(u, dyn, coupling, m, c.verify.tol.frame);
  j["grid"] = grid_json(grid, mesh);
  emit(j, dir, "summary.json");
  return kPass;
}

int solve_fpe_cmd(const Globals& g, const std::string& u_path) {
  const RunConfig c = load(g);
  const Grid2D grid = make_grid(c);
  const TimeMesh mesh = make_mesh(c);
  ValuePath u(grid, mesh);
  if (!u_path.empty()) {
    auto slices = read_path_csv(grid, mesh, u_path);
    for (std::size_t k = 0; k < mesh.nt; ++k) u[k] = std::move(slices[k]);
  }
  const MfgConfig mc = solver_config(c, g);
  const FpeResult r = solve_fpe(make_initial_density(c, grid), u, make_dynamics(c), mc.hjb, mc.fpe);
  const fs::path dir(c.output_dir);
  write_slices(r.path, dir, "m");
  write_path_csv(mesh, [&](std::size_t k) -> const ScalarField& { return r.path.field(k); },
                 (dir / "m_path.csv").string());
  json j = fpe_json(r.diagnostics);
  j["warnings"] = r.diagnostics.warnings;
  j["grid"] = grid_json(grid, mesh);
  emit(j, dir, "summary.json");
  return kPass;
}

json sweep_json(const SweepResult& s) {
  json levels = json::array(), deltas = json::array();
  for (const auto& l : s.levels) {
    levels.push_back(mfg_json(l.solution));
    if (std::isfinite(l.sup_norm_delta)) deltas.push_back(l.sup_norm_delta);
  }
  return {{"converged", !s.aborted}, {"message", s.message}, {"eps_deltas", deltas}, {"levels", levels}};
}

int sweep(const RunConfig& c, const Globals& g, const std::vector<double>& schedule) {
  MfgConfig mc = solver_config(c, g);
  mc.fixed_point.eps_schedule = schedule;
  const SweepResult s =
      eps_sweep(make_dynamics(c), make_coupling(c), make_initial_density(c, make_grid(c)), mc, g.threads);
  if (s.failure) std::rethrow_exception(s.failure);
  emit(sweep_json(s), c.output_dir, "summary.json");
  return s.aborted ? kPropertyFailure : kPass;
}

int solve_mfg(const Globals& g, const std::string& eps) {
  RunConfig c = load(g);
  std::vector<double> schedule = eps.empty() ? std::vector<double>{c.dynamics.epsilon} : parse_numbers(eps, "--eps");
  if (schedule.size() > 1) {
    c.fixed_point.eps_schedule = schedule;
    if (const auto errs = validation_errors(c); !errs.empty()) throw ConfigError(errs);
    prevalidate(c);
    return sweep(c, g, schedule);
  }
  c.dynamics.epsilon = schedule[0];
  prevalidate(c);
  const Grid2D grid = make_grid(c);
  const MfgSolution s = picard_solve(make_dynamics(c), make_coupling(c), make_initial_density(c, grid),
                                     solver_config(c, g));
  const fs::path dir(c.output_dir);
  write_slices(s.u, dir, "u");
  write_slices(s.m, dir, "m");
  json j = mfg_json(s);
  j["eps_deltas"] = json::array();
  j["fpe"] = fpe_json(s.fpe);
  j["grid"] = grid_json(grid, make_mesh(c));
  emit(j, dir, "summary.json");
  return s.converged ? kPass : kPropertyFailure;
}

int mc_validate(const Globals& g, const std::string& x0_text, double t0, std::size_t n) {
  RunConfig c = load(g);
  const auto x0 = parse_numbers(x0_text, "--x0");
  if (x0.size() != 2) throw ConfigError("--x0: expected two numbers x1,x2");
  if (n > 0) c.mc.n = n;
  if (c.mc.n < 2) throw ConfigError("--n must be >= 2");
  const Grid2D grid = make_grid(c);
  const DynamicsSpec dyn = make_dynamics(c);
  const CouplingSpec coupling = make_coupling(c);
  const MfgSolution s = picard_solve(dyn, coupling, make_initial_density(c, grid), solver_config(c, g));
  if (!s.converged) throw SolverError("mc-validate: the MFG solve did not converge");
  json j = mc_probe(dyn, coupling, s, {x0[0], x0[1]}, t0, {c.mc.n, c.mc.seed, c.mc.dt_sde, g.threads}, c.mc.slack);
  emit(j, g.out, "mc.json");
  return j["pass"].get<bool>() ? kPass : kPropertyFailure;
}

int w1(const std::string& a, const std::string& b, bool exact, std::optional<double> reg) {
  const ScalarField fa = read_csv(a), fb = read_csv(b);
  if (!(fa.grid() == fb.grid())) throw InputError("w1: the two fields live on different grids");
  const auto as_density = [](const ScalarField& f) {
    return DensityField(f.grid(), std::vector<double>(f.values().begin(), f.values().end()));
  };
  const DensityField da = as_density(fa), db = as_density(fb);
  const double v = exact ? wasserstein1_exact(da, db)
                         : wasserstein1_sinkhorn(da, db, reg.value_or(default_sinkhorn_reg(fa.grid()))).value;
  std::printf("%.17g\n", v);
  return kPass;
}

int verify(const Globals& g, const std::string& run, const std::string& tol_file) {
  const RunConfig c = parse_config(detail::read_json(fs::path(run) / "config.json").dump());
  const VerifyBlock v = tol_file.empty() ? c.verify : load_tolerances(tol_file, c.verify);
  const SuiteReport r = verify_run_dir(run, v.tol);
  emit(suite_json(r), g.out, "verify_report.json");
  return r.all_pass() ? kPass : kPropertyFailure;
}

int run(const Globals& g) {
  const RunConfig c = load(g);
  const RunSummary s = run_pipeline(c, {c.output_dir, g.threads, g.sabotage});
  std::cout << s.summary["rollup"].dump(2) << "\n" << "written to " << s.dir << "\n";
  return s.pass ? kPass : kPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Degenerate mean field game lab"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--out", g.out, "Output directory (overrides output.dir)");
  app.add_option("--threads", g.threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Overrides mc.seed");
  app.add_flag("--sabotage-upwind", g.sabotage, "Take the downwind density in the FPE (negative control)");

  std::string m_path, u_path, eps, x0, a, b, run_dir, tol_file;
  double t0 = 0.0;
  std::size_t n = 0;
  bool exact = false;
  std::optional<double> reg;

  auto* hjb = app.add_subcommand("solve-hjb", "Solve the value equation for a given density path");
  hjb->add_option("--m-path", m_path, "Density path CSV (t,x1,x2,value); default: m0 frozen in time");
  auto* fpe = app.add_subcommand("solve-fpe", "Solve the density equation for a given value path");
  fpe->add_option("--u-path", u_path, "Value path CSV (t,x1,x2,value); default: u = 0");
  auto* mfg = app.add_subcommand("solve-mfg", "Solve the coupled system by damped Picard iteration");
  mfg->add_option("--eps", eps, "Viscosity, or a decreasing comma-separated schedule");
  auto* sw = app.add_subcommand("sweep-eps", "Solve along the configured epsilon schedule and at eps = 0");
  auto* mc = app.add_subcommand("mc-validate", "Compare the PDE value with a Monte Carlo estimate");
  mc->add_option("--x0", x0, "Start point x1,x2")->required();
  mc->add_option("--t0", t0, "Start time");
  mc->add_option("--n", n, "Particles (default mc.n)");
  auto* w = app.add_subcommand("w1", "Wasserstein-1 distance between two density dumps");
  w->add_option("--a", a)->required()->check(CLI::ExistingFile);
  w->add_option("--b", b)->required()->check(CLI::ExistingFile);
  auto* ex = w->add_flag("--exact", exact, "Exact transport LP");
  w->add_option("--reg", reg, "Sinkhorn regularization")->excludes(ex);
  auto* ver = app.add_subcommand("verify", "Run the property suite on a run directory");
  ver->add_option("--run", run_dir)->required()->check(CLI::ExistingDirectory);
  ver->add_option("--tol-file", tol_file, "Tolerances (JSON with verify-block keys)")->check(CLI::ExistingFile);
  auto* full = app.add_subcommand("run", "Full pipeline: sweep, Monte Carlo, consistency, verify");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*hjb) return solve_hjb(g, m_path);
    if (*fpe) return solve_fpe_cmd(g, u_path);
    if (*mfg) return solve_mfg(g, eps);
    if (*sw) {
      const RunConfig c = load(g);
      return sweep(c, g, c.fixed_point.eps_schedule);
    }
    if (*mc) return mc_validate(g, x0, t0, n);
    if (*w) return w1(a, b, exact, reg);
    if (*ver) return verify(g, run_dir, tol_file);
    if (*full) return run(g);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverError;
  }
  return kConfigError;
}
