#include "nova/cli.hpp"

#include "nova/config.hpp"
#include "nova/grid_oracle.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace nova {

using nlohmann::json;

namespace {

std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index k = 0; k < v.size(); ++k) os << (k ? ", " : "") << format_double(v[k]);
  os << ")";
  return os.str();
}

Vector parse_list(const std::string& s, int dim, const char* what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      v.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad number in ") + what + ": '" + cell + "'");
    }
  }
  if (static_cast<int>(v.size()) == 1 && dim > 1) v.assign(dim, v.front());
  if (static_cast<int>(v.size()) != dim)
    throw ConfigError(std::string(what) + " needs " + std::to_string(dim) + " entries");
  return to_vector(v);
}

RunConfig load_or_default(const std::string& config_path, const std::string& problem) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  if (!problem.empty()) {
    cfg.problem = problem;
    if (config_path.empty()) cfg.problem_params = json::object();
  }
  return cfg;
}

void print_result(std::ostream& out, const ProblemSpec& p, const NovaResult& r) {
  out << "status: " << to_string(r.status) << "\n";
  out << "outer iterations: " << r.trace.rows.size() << "\n";
  out << "x: " << format_vector(r.x) << "\n";
  out << "U(x): " << format_double(p.objective.value(r.x)) << "\n";
  out << "max g(x): " << format_double(max_constraint(p, r.x)) << "\n";
  out << "multipliers: " << format_vector(r.multipliers) << "\n";
  out << "kkt residual: " << format_double(r.final_kkt) << "\n";
  if (!r.message.empty()) out << "message: " << r.message << "\n";
  for (const auto& d : r.diagnostic_failures) out << "diagnostic: " << d << "\n";
}

int status_exit_code(const NovaResult& r) {
  return r.status == NovaStatus::kStationary ? kExitOk : kExitConvergence;
}

json roundlog_json(const DistributedResult& res, const Topology& topo, DistributedMode mode) {
  json rounds = json::array();
  for (const auto& r : res.rounds) {
    rounds.push_back({{"outer", r.outer},
                      {"round", r.round},
                      {"messages", r.messages},
                      {"payload_floats", r.payload_floats},
                      {"agent_cost", r.agent_cost},
                      {"snapshot", to_std(r.snapshot)},
                      {"latency_ms", r.latency_ms}});
  }
  return {{"mode", to_string(mode)},
          {"topology", to_string(topo.kind)},
          {"agents", topo.agents},
          {"seed", topo.seed},
          {"total_messages", res.total_messages},
          {"total_payload_floats", res.total_payload_floats},
          {"simulated_latency_ms", res.simulated_latency_ms},
          {"rounds", rounds}};
}

int cmd_list(std::ostream& out) {
  for (const auto& id : benchmark_ids()) {
    const BenchmarkProblem b = make_benchmark(id);
    out << b.id << "  " << std::left << std::setw(15) << b.name << " dim=" << b.problem.dim
        << " m=" << b.problem.num_constraints() << " blocks=" << b.problem.layout().count() << "  " << b.summary
        << "\n";
  }
  return kExitOk;
}

int cmd_run(const std::string& config, const std::string& problem, std::string trace, const std::string& format,
            std::ostream& out) {
  RunConfig cfg = load_or_default(config, problem);
  if (!trace.empty()) cfg.output.trace = trace;
  if (!format.empty()) cfg.output.trace_format = parse_trace_format(format);
  const ResolvedRun run = resolve(cfg);
  const NovaResult r = nova_run(run.bench.problem, run.recipe, run.nova, run.x0);
  print_result(out, run.bench.problem, r);
  if (!cfg.output.trace.empty() && !r.trace.rows.empty())
    emit_trace(r.trace, cfg.output.trace, cfg.output.trace_format);
  return status_exit_code(r);
}

int cmd_simulate(const std::string& config, const std::string& problem, const std::string& mode, int agents,
                 const std::string& topology, const std::string& roundlog, const std::string& trace,
                 std::ostream& out) {
  RunConfig cfg = load_or_default(config, problem);
  if (!mode.empty()) cfg.simulate.mode = parse_distributed_mode(mode);
  if (agents > 0) cfg.simulate.agents = agents;
  if (!topology.empty()) cfg.simulate.topology = parse_topology_kind(topology);
  if (!roundlog.empty()) cfg.output.roundlog = roundlog;
  if (!trace.empty()) cfg.output.trace = trace;
  const ResolvedRun run = resolve(cfg);
  Topology topo;
  topo.kind = cfg.simulate.topology;
  topo.agents = cfg.simulate.agents ? *cfg.simulate.agents : run.bench.problem.layout().count();
  topo.seed = cfg.seed;
  topo.mean_latency_ms = cfg.simulate.mean_latency_ms;
  const DistributedResult res = run_distributed(run.bench.problem, run.recipe, run.nova, cfg.simulate.mode, topo, run.x0);
  print_result(out, run.bench.problem, res.result);
  out << "rounds: " << res.rounds.size() << "\n";
  out << "messages: " << res.total_messages << " (" << res.total_payload_floats << " floats)\n";
  out << "simulated latency: " << format_double(res.simulated_latency_ms) << " ms\n";
  if (!cfg.output.roundlog.empty()) {
    std::ofstream f(cfg.output.roundlog);
    if (!f) throw IoError("cannot open '" + cfg.output.roundlog + "' for writing");
    f << roundlog_json(res, topo, cfg.simulate.mode).dump(2) << "\n";
    if (!f) throw IoError("failed writing '" + cfg.output.roundlog + "'");
  }
  if (!cfg.output.trace.empty() && !res.result.trace.rows.empty())
    emit_trace(res.result.trace, cfg.output.trace, cfg.output.trace_format);
  return status_exit_code(res.result);
}

int cmd_verify(const std::string& problem, int samples, int anchors, std::uint64_t seed, std::ostream& out) {
  std::vector<std::string> ids = problem.empty() ? benchmark_ids() : std::vector<std::string>{problem};
  bool all = true;
  for (const auto& id : ids) {
    const BenchmarkProblem b = make_benchmark(id);
    const ProblemSpec& p = b.problem;
    std::vector<Vector> ys{b.default_x0};
    if (anchors > 1)
      for (const auto& y : sample_feasible_points(p, anchors - 1, seed)) ys.push_back(y);
    for (const auto& builder : b.builders) {
      bool ok = true;
      std::string detail;
      for (std::size_t a = 0; a < ys.size(); ++a) {
        const SurrogateModel m = build_surrogates(p, builder.recipe, ys[a]);
        const auto rep = verify_objective_surrogate(p.objective, m.objective, p.set, samples, seed + a, p.blocks);
        if (!rep.pass()) {
          ok = false;
          detail += " objective@" + std::to_string(a) + "[" + rep.summary() + "]";
        }
        for (int j = 0; j < p.num_constraints(); ++j) {
          const auto cr =
              verify_constraint_surrogate(p.constraints[j].g, m.constraints[j], p.set, samples, seed + a, p.blocks);
          if (!cr.pass()) {
            ok = false;
            detail += " g" + std::to_string(j) + "@" + std::to_string(a) + "[" + cr.summary() + "]";
          }
        }
      }
      out << b.id << " " << std::left << std::setw(36) << builder.name << (ok ? "PASS" : "FAIL") << detail << "\n";
      all = all && ok;
    }
  }
  return all ? kExitOk : kExitFailure;
}

int cmd_grid(const std::string& problem, double resolution, const std::string& lo_s, const std::string& hi_s,
             std::ostream& out) {
  const BenchmarkProblem b = make_benchmark(problem.empty() ? "P2" : problem);
  const ProblemSpec& p = b.problem;
  if (p.dim > 3) throw UnsupportedError("grid oracle supports dimension <= 3, " + b.id + " has " + std::to_string(p.dim));
  Vector lo, hi;
  if (b.oracle_bounds) std::tie(lo, hi) = *b.oracle_bounds;
  if (!lo_s.empty()) lo = parse_list(lo_s, p.dim, "--lo");
  if (!hi_s.empty()) hi = parse_list(hi_s, p.dim, "--hi");
  if (lo.size() == 0 || hi.size() == 0) throw ConfigError("grid bounds are required for " + b.id);
  const GridOracleResult r = grid_oracle(p, resolution, lo, hi);
  out << "scanned " << r.points_scanned << " points, " << r.feasible_points << " feasible\n";
  if (!r.found) {
    out << "no feasible grid point\n";
    return kExitOk;
  }
  out << "best point: " << format_vector(r.point) << "\n";
  out << "best value: " << format_double(r.value) << "\n";
  return kExitOk;
}

int cmd_check_oracles(std::ostream& out) {
  bool all = true;
  for (const auto& id : benchmark_ids()) {
    const BenchmarkProblem b = make_benchmark(id);
    const GradientCheck c = check_gradients(b.problem, 50, 0);
    out << id << " gradients " << (c.pass ? "PASS" : "FAIL") << " worst relative error "
        << format_double(c.worst_relative_error);
    if (!c.pass) out << " in " << c.worst_function;
    out << "\n";
    all = all && c.pass;
  }
  return all ? kExitOk : kExitFailure;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"nova: inner convex approximation solver"};
  app.require_subcommand(0, 1);
  bool check_oracles = false;
  app.add_flag("--check-oracles", check_oracles, "Check every registry problem's gradients by finite differences");

  std::string config, problem, trace, trace_format, mode, topology, roundlog, lo, hi;
  int agents = 0, samples = 10000, anchors = 3;
  std::uint64_t seed = 0;
  double resolution = 0.01;

  auto* list = app.add_subcommand("list-problems", "List the benchmark registry");
  auto* run = app.add_subcommand("run", "Run the solver and optionally write a trace");
  run->add_option("--config", config, "Run configuration (JSON)");
  run->add_option("--problem", problem, "Registry problem id (overrides the config)");
  run->add_option("--trace", trace, "Trace output path");
  run->add_option("--trace-format", trace_format, "csv or json");
  auto* sim = app.add_subcommand("simulate", "Run with a simulated multi-agent inner solver");
  sim->add_option("--config", config, "Run configuration (JSON)");
  sim->add_option("--problem", problem, "Registry problem id (overrides the config)");
  sim->add_option("--mode", mode, "dual or primal");
  sim->add_option("--agents", agents, "Agent count (defaults to the block count)");
  sim->add_option("--topology", topology, "cluster-head or fully-decentralized-stub");
  sim->add_option("--roundlog", roundlog, "Round log output path (JSON)");
  sim->add_option("--trace", trace, "Trace output path");
  auto* ver = app.add_subcommand("verify-surrogate", "Check the surrogate contracts of every builder");
  ver->add_option("--problem", problem, "Registry problem id (default: all)");
  ver->add_option("--samples", samples, "Samples per check");
  ver->add_option("--anchors", anchors, "Anchors per builder");
  ver->add_option("--seed", seed, "Sampling seed");
  auto* grid = app.add_subcommand("grid-oracle", "Exhaustive grid scan (dimension <= 3)");
  grid->add_option("--problem", problem, "Registry problem id");
  grid->add_option("--resolution", resolution, "Grid spacing");
  grid->add_option("--lo", lo, "Lower bounds, comma separated");
  grid->add_option("--hi", hi, "Upper bounds, comma separated");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (check_oracles) return cmd_check_oracles(out);
    if (list->parsed()) return cmd_list(out);
    if (run->parsed()) return cmd_run(config, problem, trace, trace_format, out);
    if (sim->parsed()) return cmd_simulate(config, problem, mode, agents, topology, roundlog, trace, out);
    if (ver->parsed()) return cmd_verify(problem, samples, anchors, seed, out);
    if (grid->parsed()) return cmd_grid(problem, resolution, lo, hi, out);
    out << app.help();
    return kExitConfig;
  } catch (const ConvergenceError& e) {
    err << "convergence error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const InfeasibilityError& e) {
    err << "convergence error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const ParameterError& e) {
    err << "parameter error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NovaError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace nova
