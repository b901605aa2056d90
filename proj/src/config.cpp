#include "nova/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace nova {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

json opt_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_opt_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number()) throw ConfigError(where + "." + key + " must be a number");
  return j.at(key).get<double>();
}

json step_to_json(const StepSchedule& s) {
  switch (s.kind) {
    case StepSchedule::Kind::kConstant:
      return {{"kind", "constant"},
              {"gamma", s.gamma},
              {"gamma_max", s.gamma_max},
              {"L_grad_U", s.L_grad_U},
              {"c_tilde", s.c_tilde}};
    case StepSchedule::Kind::kDiminishingRecursive:
      return {{"kind", "diminishing-recursive"}, {"gamma0", s.gamma0}, {"eps", s.eps}};
    case StepSchedule::Kind::kDiminishingCustom:
      if (s.custom_label.empty()) throw ConfigError("a user-supplied step rule cannot be serialized");
      return {{"kind", "diminishing-custom"}, {"rule", s.custom_label}, {"gamma0", s.gamma0}, {"eps", s.eps}};
  }
  return {};
}

// Range checks that need the problem (constant rule) happen in resolve().
StepSchedule step_from_json(const json& j) {
  const std::string where = "step";
  check_keys(j, {"kind", "gamma", "gamma_max", "L_grad_U", "c_tilde", "gamma0", "eps", "rule"}, where);
  std::string kind = "diminishing-recursive";
  read(j, "kind", kind, where);
  StepSchedule s;
  s.kind = parse_step_kind(kind);
  read(j, "gamma", s.gamma, where);
  read(j, "gamma_max", s.gamma_max, where);
  read(j, "L_grad_U", s.L_grad_U, where);
  read(j, "c_tilde", s.c_tilde, where);
  read(j, "gamma0", s.gamma0, where);
  read(j, "eps", s.eps, where);
  if (s.kind == StepSchedule::Kind::kDiminishingCustom) {
    std::string rule;
    read(j, "rule", rule, where);
    if (rule != "harmonic") throw ConfigError("step.rule must be 'harmonic' for diminishing-custom");
    s = StepSchedule::harmonic(s.gamma0, s.eps);
  } else if (s.kind == StepSchedule::Kind::kDiminishingRecursive) {
    s.validate();
  }
  return s;
}

}  // namespace

json to_json(const SurrogateRecipe& r) {
  json cons = json::array();
  for (const auto& c : r.constraints)
    cons.push_back({{"kind", c.kind}, {"L", opt_number(c.L)}, {"curvature_bound", opt_number(c.curvature_bound)}});
  const auto& o = r.objective;
  return {{"objective",
           {{"kind", o.kind},
            {"tau", o.tau},
            {"strong_modulus", o.strong_modulus},
            {"joint", o.joint},
            {"convex_sets", o.convex_sets},
            {"product_case", o.product_case},
            {"factor_kind", o.factor_kind}}},
          {"constraints", cons}};
}

SurrogateRecipe surrogate_recipe_from_json(const json& j) {
  check_keys(j, {"objective", "constraints"}, "surrogate");
  SurrogateRecipe r;
  if (j.contains("objective")) {
    const json& o = j.at("objective");
    const std::string w = "surrogate.objective";
    check_keys(o, {"kind", "tau", "strong_modulus", "joint", "convex_sets", "product_case", "factor_kind"}, w);
    read(o, "kind", r.objective.kind, w);
    read(o, "tau", r.objective.tau, w);
    read(o, "strong_modulus", r.objective.strong_modulus, w);
    read(o, "joint", r.objective.joint, w);
    read(o, "convex_sets", r.objective.convex_sets, w);
    read(o, "product_case", r.objective.product_case, w);
    read(o, "factor_kind", r.objective.factor_kind, w);
    static const std::set<std::string> kinds{"proximal", "block-convex", "sum-utility", "product"};
    if (!kinds.count(r.objective.kind)) throw ConfigError("unknown objective surrogate kind '" + r.objective.kind + "'");
  }
  if (j.contains("constraints")) {
    if (!j.at("constraints").is_array()) throw ConfigError("surrogate.constraints must be an array");
    for (const auto& c : j.at("constraints")) {
      const std::string w = "surrogate.constraints[]";
      check_keys(c, {"kind", "L", "curvature_bound"}, w);
      ConstraintRecipe cr;
      read(c, "kind", cr.kind, w);
      static const std::set<std::string> kinds{"dc", "lipschitz", "bilinear", "identity-convex"};
      if (!kinds.count(cr.kind)) throw ConfigError("unknown constraint surrogate kind '" + cr.kind + "'");
      cr.L = read_opt_number(c, "L", w);
      cr.curvature_bound = read_opt_number(c, "curvature_bound", w);
      r.constraints.push_back(cr);
    }
  }
  return r;
}

json to_json(const RunConfig& c) {
  const NovaConfig& n = c.nova;
  json j;
  j["problem"] = {{"id", c.problem}, {"params", c.problem_params}};
  if (c.surrogate) j["surrogate"] = to_json(*c.surrogate);
  if (c.random_x0) j["x0"] = "random";
  else if (c.x0) j["x0"] = to_std(*c.x0);
  j["seed"] = c.seed;
  j["step"] = step_to_json(n.step);
  j["stop_tol"] = n.stop_tol;
  j["max_outer"] = n.max_outer;
  j["diagnostics"] = {{"descent", n.diagnostics.descent},
                      {"feasibility", n.diagnostics.feasibility},
                      {"monotonicity", n.diagnostics.monotonicity}};
  j["use_blocks"] = n.use_blocks;
  j["record_wall_time"] = n.record_wall_time;
  j["inner"] = {{"method", n.inner.method ? json(to_string(*n.inner.method)) : json(nullptr)},
                {"tol", n.inner.tol},
                {"max_iter", n.inner.max_iter}};
  j["dual"] = {{"rule", to_string(n.dual.rule)},
               {"alpha0", n.dual.alpha0},
               {"tol", n.dual.tol},
               {"max_iter", n.dual.max_iter},
               {"warm_start", n.dual.warm_start}};
  j["primal"] = {{"step", to_string(n.primal.step)}, {"beta0", n.primal.beta0}, {"tol", n.primal.tol}, {"max_iter", n.primal.max_iter}};
  j["simulate"] = {{"mode", to_string(c.simulate.mode)},
                   {"topology", to_string(c.simulate.topology)},
                   {"agents", c.simulate.agents ? json(*c.simulate.agents) : json(nullptr)},
                   {"mean_latency_ms", c.simulate.mean_latency_ms}};
  j["output"] = {{"trace", c.output.trace},
                 {"trace_format", c.output.trace_format == TraceFormat::kCsv ? "csv" : "json"},
                 {"roundlog", c.output.roundlog}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j,
             {"problem", "surrogate", "x0", "seed", "step", "stop_tol", "max_outer", "diagnostics", "use_blocks",
              "record_wall_time", "inner", "dual", "primal", "simulate", "output"},
             "config");
  RunConfig c;
  if (j.contains("problem")) {
    const json& p = j.at("problem");
    if (p.is_string()) {
      c.problem = p.get<std::string>();
    } else {
      check_keys(p, {"id", "params"}, "problem");
      read(p, "id", c.problem, "problem");
      if (p.contains("params")) c.problem_params = p.at("params");
    }
  }
  if (j.contains("surrogate")) c.surrogate = surrogate_recipe_from_json(j.at("surrogate"));
  if (j.contains("x0")) {
    const json& x = j.at("x0");
    if (x.is_string()) {
      if (x.get<std::string>() != "random") throw ConfigError("x0 must be an array of numbers or \"random\"");
      c.random_x0 = true;
    } else if (!x.is_null()) {
      std::vector<double> v;
      read(j, "x0", v, "config");
      c.x0 = to_vector(v);
    }
  }
  read(j, "seed", c.seed, "config");
  NovaConfig& n = c.nova;
  if (j.contains("step")) n.step = step_from_json(j.at("step"));
  read(j, "stop_tol", n.stop_tol, "config");
  read(j, "max_outer", n.max_outer, "config");
  if (!(n.stop_tol > 0)) throw ConfigError("stop_tol must be positive");
  if (n.max_outer < 1) throw ConfigError("max_outer must be at least 1");
  if (j.contains("diagnostics")) {
    const json& d = j.at("diagnostics");
    check_keys(d, {"descent", "feasibility", "monotonicity"}, "diagnostics");
    read(d, "descent", n.diagnostics.descent, "diagnostics");
    read(d, "feasibility", n.diagnostics.feasibility, "diagnostics");
    read(d, "monotonicity", n.diagnostics.monotonicity, "diagnostics");
  }
  read(j, "use_blocks", n.use_blocks, "config");
  read(j, "record_wall_time", n.record_wall_time, "config");
  if (j.contains("inner")) {
    const json& in = j.at("inner");
    check_keys(in, {"method", "tol", "max_iter"}, "inner");
    if (in.contains("method") && !in.at("method").is_null()) {
      std::string m;
      read(in, "method", m, "inner");
      n.inner.method = parse_inner_method(m);
    }
    read(in, "tol", n.inner.tol, "inner");
    read(in, "max_iter", n.inner.max_iter, "inner");
  }
  if (j.contains("dual")) {
    const json& d = j.at("dual");
    check_keys(d, {"rule", "alpha0", "tol", "max_iter", "warm_start"}, "dual");
    std::string rule = to_string(n.dual.rule);
    read(d, "rule", rule, "dual");
    n.dual.rule = parse_dual_rule(rule);
    read(d, "alpha0", n.dual.alpha0, "dual");
    read(d, "tol", n.dual.tol, "dual");
    read(d, "max_iter", n.dual.max_iter, "dual");
    read(d, "warm_start", n.dual.warm_start, "dual");
    if (n.dual.alpha0 < 0) throw ConfigError("dual.alpha0 must be nonnegative");
    if (n.dual.rule == DualStepRule::Kind::kSummableDiminishing && !(n.dual.alpha0 > 0))
      throw ConfigError("dual.alpha0 must be positive for the summable-diminishing rule");
  }
  if (j.contains("primal")) {
    const json& p = j.at("primal");
    check_keys(p, {"step", "beta0", "tol", "max_iter"}, "primal");
    if (p.contains("step")) {
      std::string step;
      read(p, "step", step, "primal");
      n.primal.step = parse_master_step(step);
    }
    read(p, "beta0", n.primal.beta0, "primal");
    read(p, "tol", n.primal.tol, "primal");
    read(p, "max_iter", n.primal.max_iter, "primal");
    if (!(n.primal.beta0 > 0)) throw ConfigError("primal.beta0 must be positive");
    if (!(n.primal.tol > 0)) throw ConfigError("primal.tol must be positive");
  }
  if (j.contains("simulate")) {
    const json& s = j.at("simulate");
    check_keys(s, {"mode", "topology", "agents", "mean_latency_ms"}, "simulate");
    std::string mode = to_string(c.simulate.mode), topo = to_string(c.simulate.topology);
    read(s, "mode", mode, "simulate");
    read(s, "topology", topo, "simulate");
    c.simulate.mode = parse_distributed_mode(mode);
    c.simulate.topology = parse_topology_kind(topo);
    if (s.contains("agents") && !s.at("agents").is_null()) {
      int a = 0;
      read(s, "agents", a, "simulate");
      c.simulate.agents = a;
    }
    read(s, "mean_latency_ms", c.simulate.mean_latency_ms, "simulate");
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, {"trace", "trace_format", "roundlog"}, "output");
    read(o, "trace", c.output.trace, "output");
    std::string fmt = "csv";
    read(o, "trace_format", fmt, "output");
    c.output.trace_format = parse_trace_format(fmt);
    read(o, "roundlog", c.output.roundlog, "output");
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << to_json(cfg).dump(2) << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

ResolvedRun resolve(const RunConfig& cfg) {
  ResolvedRun r;
  r.bench = make_benchmark(cfg.problem, cfg.problem_params);
  const ProblemSpec& p = r.bench.problem;
  r.recipe = cfg.surrogate ? *cfg.surrogate : r.bench.recipe;
  if (cfg.random_x0) {
    r.x0 = sample_feasible_points(p, 1, cfg.seed).front();
  } else {
    r.x0 = cfg.x0 ? *cfg.x0 : r.bench.default_x0;
  }
  if (r.x0.size() != p.dim)
    throw ConfigError("x0 has " + std::to_string(r.x0.size()) + " entries, problem dimension is " +
                      std::to_string(p.dim));
  const double res = feasibility_residual(p, r.x0);
  if (res > kFeasibilityTol) throw InputError("x0 is infeasible (feasibility residual " + std::to_string(res) + ")");
  r.nova = cfg.nova;
  StepSchedule& s = r.nova.step;
  if (s.kind == StepSchedule::Kind::kConstant) {
    const double c_decl = build_surrogates(p, r.recipe, r.x0).objective.strong_convexity;
    if (!(s.c_tilde > 0)) s.c_tilde = c_decl;
    if (s.c_tilde > c_decl * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "step.c_tilde = " << s.c_tilde << " exceeds the surrogate's declared modulus " << c_decl;
      throw ParameterError(os.str());
    }
    if (!(s.L_grad_U > 0)) s.L_grad_U = p.lipschitz_grad_U ? *p.lipschitz_grad_U : estimate_lipschitz_grad(p, 2000, cfg.seed);
  }
  s.validate();
  return r;
}

}  // namespace nova
