#pragma once

// Run configuration: a JSON document with one object per block. Parsing collects
// every problem it finds and rejects unknown keys; serialize() writes the canonical
// form, so parse(serialize(c)) == c.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "dmfg/coupling.hpp"
#include "dmfg/dynamics.hpp"
#include "dmfg/errors.hpp"
#include "dmfg/grid.hpp"
#include "dmfg/hjb.hpp"
#include "dmfg/mfg.hpp"
#include "dmfg/verify.hpp"

namespace dmfg {

using json = nlohmann::json;

struct GridBlock {
  double x1_min = -5.0, x1_max = 5.0, x2_min = -5.0, x2_max = 5.0;
  std::size_t n1 = 81, n2 = 81;
  bool operator==(const GridBlock&) const = default;
};

struct TimeBlock {
  double T = 1.0;
  std::size_t nt = 33;
  bool operator==(const TimeBlock&) const = default;
};

struct DynamicsBlock {
  std::string preset = "grushin_exp";  ///< empty when the expressions are used
  double scale = 1.0;
  std::string sigma1, sigma2, h;
  double epsilon = 0.0;
  bool operator==(const DynamicsBlock&) const = default;
};

struct CouplingBlock {
  std::string name = "nonlocal_smooth";
  CouplingParams params;
  bool operator==(const CouplingBlock&) const = default;
};

struct InitialBlock {
  std::string kind = "gaussian";  ///< gaussian | uniform | expression
  std::array<double, 2> mean{0.0, 0.0};
  double variance = 0.1;
  std::string expression;
  bool operator==(const InitialBlock&) const = default;
};

struct HjbBlock {
  std::string flux = "godunov";
  std::string diffusion = "implicit";
  double linear_solver_tol = 1e-12;
  int max_inner_iters = 5;
  bool operator==(const HjbBlock&) const = default;
};

struct FixedPointBlock {
  double theta = 0.5;
  double tol_d1 = 1e-3;
  std::size_t max_outer_iters = 60;
  std::vector<double> eps_schedule{0.1, 0.05, 0.025, 0.0125};
  std::string d1_method = "exact";
  std::size_t d1_max_nodes = 16;
  double d1_reg_fraction = 1e-3;
  bool operator==(const FixedPointBlock&) const = default;
};

struct FpeBlock {
  double boundary_mass_budget = 1e-6;
  bool operator==(const FpeBlock&) const = default;
};

struct McBlock {
  std::size_t n = 100000;
  std::uint64_t seed = 1;
  double dt_sde = 0.0;  ///< 0: a quarter of the PDE step
  std::vector<std::array<double, 3>> probes;  ///< (x1, x2, t0)
  double slack = 0.05;                        ///< |mc - pde| <= 3 se + slack
  std::vector<double> consistency_times;      ///< fractions of T for the SDE/FPE comparison
  std::size_t bootstrap = 20;
  bool operator==(const McBlock&) const = default;
};

struct VerifyBlock {
  SuiteTolerances tol;
  bool refine = true;  ///< also solve eps = 0 on the refined grid for the limit check
  bool operator==(const VerifyBlock&) const = default;
};

struct RunConfig {
  std::string name = "run";
  GridBlock grid;
  TimeBlock time;
  DynamicsBlock dynamics;
  CouplingBlock coupling;
  InitialBlock initial;
  HjbBlock hjb;
  FixedPointBlock fixed_point;
  FpeBlock fpe;
  McBlock mc;
  VerifyBlock verify;
  std::string output_dir = "runs/run";
  bool dump_fields = true;  ///< per-slice CSVs of every level; verify --run needs them
  bool operator==(const RunConfig&) const = default;
};

namespace detail {

/// Walks a JSON object, recording type errors and unknown keys under a dotted path.
class BlockReader {
 public:
  BlockReader(const json& obj, std::string path, std::vector<std::string>& errs)
      : obj_(obj), path_(std::move(path)), errs_(errs) {
    if (!obj_.is_object()) errs_.push_back(path_ + ": expected an object");
  }
  ~BlockReader() {
    if (!obj_.is_object()) return;
    for (const auto& [key, v] : obj_.items())
      if (!seen_.count(key)) errs_.push_back(where(key) + ": unknown key");
  }
  BlockReader(const BlockReader&) = delete;
  BlockReader& operator=(const BlockReader&) = delete;

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_number()) out = v->get<double>();
      else errs_.push_back(where(key) + ": expected a number");
    }
  }
  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (v->is_number_integer() && (v->get<long long>() >= 0 || std::is_signed_v<Int>)) out = v->get<Int>();
      else errs_.push_back(where(key) + ": expected a non-negative integer");
    }
  }
  void text(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (v->is_string()) out = v->get<std::string>();
      else errs_.push_back(where(key) + ": expected a string");
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (v->is_boolean()) out = v->get<bool>();
      else errs_.push_back(where(key) + ": expected true or false");
    }
  }
  template <std::size_t N>
  void tuple(const std::string& key, std::array<double, N>& out) {
    if (const json* v = find(key)) read_tuple(*v, where(key), out);
  }
  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) {
        errs_.push_back(where(key) + ": expected an array of numbers");
        return;
      }
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) {
          errs_.push_back(where(key) + ": expected an array of numbers");
          return;
        }
        out.push_back(e.get<double>());
      }
    }
  }
  template <std::size_t N>
  void tuples(const std::string& key, std::vector<std::array<double, N>>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) {
        errs_.push_back(where(key) + ": expected an array");
        return;
      }
      out.clear();
      for (std::size_t k = 0; k < v->size(); ++k) {
        std::array<double, N> t{};
        if (read_tuple((*v)[k], where(key) + "[" + std::to_string(k) + "]", t)) out.push_back(t);
      }
    }
  }

 private:
  template <std::size_t N>
  bool read_tuple(const json& v, const std::string& at, std::array<double, N>& out) {
    if (!v.is_array() || v.size() != N ||
        !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
      errs_.push_back(at + ": expected " + std::to_string(N) + " numbers");
      return false;
    }
    for (std::size_t k = 0; k < N; ++k) out[k] = v[k].get<double>();
    return true;
  }

  const json& obj_;
  std::string path_;
  std::vector<std::string>& errs_;
  std::set<std::string> seen_;
};

inline void read_potential(const json& j, const std::string& path, PotentialSpec& p, std::vector<std::string>& errs) {
  BlockReader r(j, path, errs);
  r.text("kind", p.kind);
  r.number("value", p.value);
  r.number("kappa", p.kappa);
  r.number("width", p.width);
  r.tuple("center", p.center);
  r.text("expression", p.expression);
}

inline json write_potential(const PotentialSpec& p) {
  return {{"kind", p.kind},   {"value", p.value},   {"kappa", p.kappa},
          {"width", p.width}, {"center", p.center}, {"expression", p.expression}};
}

inline void read_verify_block(BlockReader& r, VerifyBlock& v) {
  auto& t = v.tol;
  r.number("frame", t.frame);
  r.number("mass_tol", t.mass_tol);
  r.number("drift_tol", t.drift_tol);
  r.number("positivity_tol", t.positivity_tol);
  r.number("lipschitz_band", t.lipschitz_band);
  r.number("semiconcavity_band", t.semiconcavity_band);
  r.number("holder_band", t.holder_band);
  r.number("holder_min_slope", t.holder_min_slope);
  r.number("moment_factor", t.moment_factor);
  r.number("viscosity_factor", t.viscosity_factor);
  r.boolean("refine", v.refine);
}

inline constexpr std::array<const char*, 12> kBlocks = {"name",  "grid", "time",        "dynamics", "coupling", "initial",
                                                        "hjb",   "fixed_point", "fpe", "mc",       "verify",   "output"};

}  // namespace detail

/// Semantic checks; returns every violated rule.
inline std::vector<std::string> validation_errors(const RunConfig& c) {
  std::vector<std::string> errs;
  const auto& g = c.grid;
  if (g.n1 < 4) errs.push_back("grid.n1 = " + std::to_string(g.n1) + " violates n1 >= 4");
  if (g.n2 < 4) errs.push_back("grid.n2 = " + std::to_string(g.n2) + " violates n2 >= 4");
  if (!(g.x1_min < g.x1_max)) errs.push_back("grid: x1_min < x1_max is required");
  if (!(g.x2_min < g.x2_max)) errs.push_back("grid: x2_min < x2_max is required");
  if (!(c.time.T > 0.0)) errs.push_back("time.T must be > 0");
  if (c.time.nt < 2) errs.push_back("time.nt must be >= 2");
  if (!c.dynamics.preset.empty()) {
    const auto& names = dynamics_preset_names();
    if (std::find(names.begin(), names.end(), c.dynamics.preset) == names.end())
      errs.push_back("dynamics.preset '" + c.dynamics.preset + "' is not a known preset");
  } else if (c.dynamics.sigma1.empty() || c.dynamics.sigma2.empty() || c.dynamics.h.empty()) {
    errs.push_back("dynamics: either preset or all of sigma1, sigma2, h must be given");
  }
  if (c.dynamics.epsilon < 0.0) errs.push_back("dynamics.epsilon must be >= 0");
  const auto& fp = c.fixed_point;
  if (fp.eps_schedule.empty()) errs.push_back("fixed_point.eps_schedule must not be empty");
  for (std::size_t k = 0; k < fp.eps_schedule.size(); ++k) {
    if (!(fp.eps_schedule[k] > 0.0)) errs.push_back("fixed_point.eps_schedule entries must be > 0");
    if (k > 0 && !(fp.eps_schedule[k] < fp.eps_schedule[k - 1]))
      errs.push_back("fixed_point.eps_schedule must be strictly decreasing (entry " + std::to_string(k) + ")");
  }
  if (!(fp.theta > 0.0 && fp.theta <= 1.0)) errs.push_back("fixed_point.theta must lie in (0, 1]");
  if (!(fp.tol_d1 > 0.0)) errs.push_back("fixed_point.tol_d1 must be > 0");
  if (fp.max_outer_iters == 0) errs.push_back("fixed_point.max_outer_iters must be >= 1");
  if (fp.d1_method != "exact" && fp.d1_method != "sinkhorn")
    errs.push_back("fixed_point.d1_method must be 'exact' or 'sinkhorn'");
  if (fp.d1_max_nodes < 2) errs.push_back("fixed_point.d1_max_nodes must be >= 2");
  if (c.hjb.flux != "godunov" && c.hjb.flux != "engquist_osher")
    errs.push_back("hjb.flux must be 'godunov' or 'engquist_osher'");
  if (c.hjb.diffusion != "implicit" && c.hjb.diffusion != "explicit")
    errs.push_back("hjb.diffusion must be 'implicit' or 'explicit'");
  if (c.initial.kind != "gaussian" && c.initial.kind != "uniform" && c.initial.kind != "expression")
    errs.push_back("initial.kind must be gaussian, uniform or expression");
  if (c.initial.kind == "gaussian" && !(c.initial.variance > 0.0)) errs.push_back("initial.variance must be > 0");
  if (c.mc.n < 2) errs.push_back("mc.n must be >= 2");
  if (c.mc.dt_sde < 0.0) errs.push_back("mc.dt_sde must be >= 0");
  for (const auto& p : c.mc.probes)
    if (!(p[2] >= 0.0 && p[2] < c.time.T)) errs.push_back("mc.probes: t0 must lie in [0, T)");
  for (double f : c.mc.consistency_times)
    if (!(f > 0.0 && f <= 1.0)) errs.push_back("mc.consistency_times are fractions of T in (0, 1]");
  if (c.output_dir.empty()) errs.push_back("output.dir must not be empty");
  return errs;
}

inline RunConfig parse_config_json(const json& j) {
  std::vector<std::string> errs;
  RunConfig c;
  if (!j.is_object()) throw ConfigError("config: expected a JSON object at the top level");
  for (const auto& [key, v] : j.items())
    if (std::find_if(detail::kBlocks.begin(), detail::kBlocks.end(), [&](const char* b) { return key == b; }) ==
        detail::kBlocks.end())
      errs.push_back(key + ": unknown key");
  if (j.contains("name")) {
    if (j["name"].is_string()) c.name = j["name"].get<std::string>();
    else errs.push_back("name: expected a string");
  }
  const auto block = [&](const char* key, auto&& fn) {
    if (j.contains(key)) {
      detail::BlockReader r(j.at(key), key, errs);
      fn(r);
    }
  };
  block("grid", [&](detail::BlockReader& r) {
    r.number("x1_min", c.grid.x1_min);
    r.number("x1_max", c.grid.x1_max);
    r.number("x2_min", c.grid.x2_min);
    r.number("x2_max", c.grid.x2_max);
    r.integer("n1", c.grid.n1);
    r.integer("n2", c.grid.n2);
  });
  block("time", [&](detail::BlockReader& r) {
    r.number("T", c.time.T);
    r.integer("nt", c.time.nt);
  });
  block("dynamics", [&](detail::BlockReader& r) {
    r.text("preset", c.dynamics.preset);
    r.number("scale", c.dynamics.scale);
    r.text("sigma1", c.dynamics.sigma1);
    r.text("sigma2", c.dynamics.sigma2);
    r.text("h", c.dynamics.h);
    r.number("epsilon", c.dynamics.epsilon);
    const json& d = j.at("dynamics");
    if (d.is_object() && (d.contains("sigma1") || d.contains("sigma2") || d.contains("h"))) {
      if (d.contains("preset")) errs.push_back("dynamics: give either preset or expressions, not both");
      if (d.contains("scale")) errs.push_back("dynamics.scale only applies to presets");
      c.dynamics.preset.clear();
    }
  });
  block("coupling", [&](detail::BlockReader& r) {
    auto& p = c.coupling.params;
    r.text("name", c.coupling.name);
    r.number("c1", p.c1);
    r.number("c_T", p.c_T);
    r.number("delta", p.delta);
    r.number("power", p.power);
    if (const json* f = r.find("f0")) detail::read_potential(*f, "coupling.f0", p.f0, errs);
    if (const json* g = r.find("g0")) detail::read_potential(*g, "coupling.g0", p.g0, errs);
  });
  block("initial", [&](detail::BlockReader& r) {
    r.text("kind", c.initial.kind);
    r.tuple("mean", c.initial.mean);
    r.number("variance", c.initial.variance);
    r.text("expression", c.initial.expression);
  });
  block("hjb", [&](detail::BlockReader& r) {
    r.text("flux", c.hjb.flux);
    r.text("diffusion", c.hjb.diffusion);
    r.number("linear_solver_tol", c.hjb.linear_solver_tol);
    r.integer("max_inner_iters", c.hjb.max_inner_iters);
  });
  block("fixed_point", [&](detail::BlockReader& r) {
    auto& f = c.fixed_point;
    r.number("theta", f.theta);
    r.number("tol_d1", f.tol_d1);
    r.integer("max_outer_iters", f.max_outer_iters);
    r.numbers("eps_schedule", f.eps_schedule);
    r.text("d1_method", f.d1_method);
    r.integer("d1_max_nodes", f.d1_max_nodes);
    r.number("d1_reg_fraction", f.d1_reg_fraction);
  });
  block("fpe", [&](detail::BlockReader& r) { r.number("boundary_mass_budget", c.fpe.boundary_mass_budget); });
  block("mc", [&](detail::BlockReader& r) {
    r.integer("n", c.mc.n);
    r.integer("seed", c.mc.seed);
    r.number("dt_sde", c.mc.dt_sde);
    r.tuples("probes", c.mc.probes);
    r.number("slack", c.mc.slack);
    r.numbers("consistency_times", c.mc.consistency_times);
    r.integer("bootstrap", c.mc.bootstrap);
  });
  block("verify", [&](detail::BlockReader& r) { detail::read_verify_block(r, c.verify); });
  block("output", [&](detail::BlockReader& r) {
    r.text("dir", c.output_dir);
    r.boolean("fields", c.dump_fields);
  });
  if (errs.empty()) errs = validation_errors(c);
  if (!errs.empty()) throw ConfigError(errs);
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config_json(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// A tolerance file holds the keys of a verify block at its top level; keys it omits
/// keep their values from `base`.
inline VerifyBlock load_tolerances(const std::string& path, VerifyBlock base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tolerance file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + " is not valid JSON: " + e.what());
  }
  std::vector<std::string> errs;
  {
    detail::BlockReader r(j, "", errs);
    detail::read_verify_block(r, base);
  }
  if (!errs.empty()) throw ConfigError(errs);
  return base;
}

inline json to_json(const RunConfig& c) {
  json j;
  j["name"] = c.name;
  j["grid"] = {{"x1_min", c.grid.x1_min}, {"x1_max", c.grid.x1_max}, {"x2_min", c.grid.x2_min},
               {"x2_max", c.grid.x2_max}, {"n1", c.grid.n1},         {"n2", c.grid.n2}};
  j["time"] = {{"T", c.time.T}, {"nt", c.time.nt}};
  if (!c.dynamics.preset.empty()) {
    j["dynamics"] = {{"preset", c.dynamics.preset}, {"scale", c.dynamics.scale}, {"epsilon", c.dynamics.epsilon}};
  } else {
    j["dynamics"] = {{"sigma1", c.dynamics.sigma1}, {"sigma2", c.dynamics.sigma2}, {"h", c.dynamics.h},
                     {"epsilon", c.dynamics.epsilon}};
  }
  const auto& p = c.coupling.params;
  j["coupling"] = {{"name", c.coupling.name}, {"c1", p.c1},  {"c_T", p.c_T},
                   {"delta", p.delta},        {"power", p.power}, {"f0", detail::write_potential(p.f0)},
                   {"g0", detail::write_potential(p.g0)}};
  j["initial"] = {{"kind", c.initial.kind},
                  {"mean", c.initial.mean},
                  {"variance", c.initial.variance},
                  {"expression", c.initial.expression}};
  j["hjb"] = {{"flux", c.hjb.flux},
              {"diffusion", c.hjb.diffusion},
              {"linear_solver_tol", c.hjb.linear_solver_tol},
              {"max_inner_iters", c.hjb.max_inner_iters}};
  const auto& f = c.fixed_point;
  j["fixed_point"] = {{"theta", f.theta},         {"tol_d1", f.tol_d1},       {"max_outer_iters", f.max_outer_iters},
                      {"eps_schedule", f.eps_schedule}, {"d1_method", f.d1_method}, {"d1_max_nodes", f.d1_max_nodes},
                      {"d1_reg_fraction", f.d1_reg_fraction}};
  j["fpe"] = {{"boundary_mass_budget", c.fpe.boundary_mass_budget}};
  j["mc"] = {{"n", c.mc.n},         {"seed", c.mc.seed},   {"dt_sde", c.mc.dt_sde},
             {"probes", c.mc.probes}, {"slack", c.mc.slack}, {"consistency_times", c.mc.consistency_times},
             {"bootstrap", c.mc.bootstrap}};
  const auto& t = c.verify.tol;
  j["verify"] = {{"frame", t.frame},
                 {"mass_tol", t.mass_tol},
                 {"drift_tol", t.drift_tol},
                 {"positivity_tol", t.positivity_tol},
                 {"lipschitz_band", t.lipschitz_band},
                 {"semiconcavity_band", t.semiconcavity_band},
                 {"holder_band", t.holder_band},
                 {"holder_min_slope", t.holder_min_slope},
                 {"moment_factor", t.moment_factor},
                 {"viscosity_factor", t.viscosity_factor},
                 {"refine", c.verify.refine}};
  j["output"] = {{"dir", c.output_dir}, {"fields", c.dump_fields}};
  return j;
}

inline std::string serialize(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

/// Hash of the canonical form with the output block reset, so that the same problem
/// written to two directories hashes alike.
inline std::string config_hash(RunConfig c) {
  const RunConfig defaults;
  c.output_dir = defaults.output_dir;
  c.dump_fields = defaults.dump_fields;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(serialize(c))));
  return buf;
}

// Builders from the configuration to solver objects.

inline Grid2D make_grid(const RunConfig& c) {
  return Grid2D(c.grid.x1_min, c.grid.x1_max, c.grid.x2_min, c.grid.x2_max, c.grid.n1, c.grid.n2);
}

inline TimeMesh make_mesh(const RunConfig& c) { return TimeMesh{c.time.T, c.time.nt}; }

inline DynamicsSpec make_dynamics(const RunConfig& c, double epsilon) {
  if (!c.dynamics.preset.empty()) return dynamics_preset(c.dynamics.preset, c.dynamics.scale, epsilon);
  return dynamics_from_expressions(c.dynamics.sigma1, c.dynamics.sigma2, c.dynamics.h, epsilon);
}

inline DynamicsSpec make_dynamics(const RunConfig& c) { return make_dynamics(c, c.dynamics.epsilon); }

inline CouplingSpec make_coupling(const RunConfig& c) { return builtin_coupling(c.coupling.name, c.coupling.params); }

inline DensityField make_initial_density(const RunConfig& c, const Grid2D& g) {
  if (c.initial.kind == "uniform") return DensityField::uniform(g);
  if (c.initial.kind == "gaussian")
    return DensityField::gaussian(g, c.initial.mean[0], c.initial.mean[1], c.initial.variance);
  const PlaneFn fn = compile_expression(c.initial.expression);
  return DensityField::from_function(g, fn);
}

inline MfgConfig make_mfg_config(const RunConfig& c) {
  MfgConfig m{HjbConfig{make_mesh(c)}, {}, {}};
  m.hjb.flux = c.hjb.flux == "godunov" ? HamiltonianFlux::godunov : HamiltonianFlux::engquist_osher;
  m.hjb.diffusion = c.hjb.diffusion == "implicit" ? DiffusionTreatment::implicit : DiffusionTreatment::explicit_;
  m.hjb.linear_solver_tol = c.hjb.linear_solver_tol;
  m.hjb.max_inner_iters = c.hjb.max_inner_iters;
  auto& f = m.fixed_point;
  f.theta = c.fixed_point.theta;
  f.tol_d1 = c.fixed_point.tol_d1;
  f.max_outer_iters = c.fixed_point.max_outer_iters;
  f.eps_schedule = c.fixed_point.eps_schedule;
  f.frame = c.verify.tol.frame;
  f.d1.method = c.fixed_point.d1_method == "exact" ? D1Method::exact : D1Method::sinkhorn;
  f.d1.max_nodes_per_axis = c.fixed_point.d1_max_nodes;
  f.d1.reg_fraction = c.fixed_point.d1_reg_fraction;
  m.fpe.boundary_mass_budget = c.fpe.boundary_mass_budget;
  return m;
}

/// The same configuration on the grid refined by a factor of two in space and time.
inline RunConfig refined(const RunConfig& c) {
  RunConfig r = c;
  r.grid.n1 = 2 * c.grid.n1 - 1;
  r.grid.n2 = 2 * c.grid.n2 - 1;
  r.time.nt = 2 * c.time.nt - 1;
  return r;
}

/// Builds every solver object once and checks the a-priori CFL bounds at every
/// epsilon of the schedule, using the initial density as the frozen measure.
inline void prevalidate(const RunConfig& c) {
  std::vector<std::string> errs;
  try {
    const Grid2D g = make_grid(c);
    const MfgConfig mc = make_mfg_config(c);
    mc.hjb.mesh.validate();
    const CouplingSpec coupling = make_coupling(c);
    const DensityField m0 = make_initial_density(c, g);
    const ScalarField G = coupling.G(m0);
    const std::vector<ScalarField> F{coupling.F(m0)};
    std::vector<double> eps = c.fixed_point.eps_schedule;
    eps.push_back(0.0);
    eps.push_back(c.dynamics.epsilon);
    for (double e : eps) {
      const DynamicsSpec dyn = make_dynamics(c, e);
      try {
        check_hjb_cfl(g, dyn, mc.hjb, a_priori_gradient_bound(G, F, dyn, c.time.T));
      } catch (const ConfigError& err) {
        errs.push_back("eps = " + detail::short_number(e) + ": " + err.what());
      }
    }
  } catch (const ConfigError& err) {
    errs.push_back(err.what());
  } catch (const InputError& err) {
    errs.push_back(err.what());
  }
  if (!errs.empty()) throw ConfigError(errs);
}

}  // namespace dmfg
