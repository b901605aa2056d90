#include "nova/benchmarks.hpp"
#include "nova/config.hpp"
#include "nova/grid_oracle.hpp"
#include "nova/nova.hpp"
#include "nova/sim.hpp"
#include "nova/trace_io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using nlohmann::json;
using namespace nova;

namespace {

json result_json(const NovaResult& r) {
  json iterates = json::array();
  for (const Vector& x : r.iterates) iterates.push_back(to_std(x));
  return {{"status", to_string(r.status)},
          {"x", to_std(r.x)},
          {"multipliers", to_std(r.multipliers)},
          {"final_kkt", r.final_kkt},
          {"c_tilde", r.c_tilde},
          {"L_grad_U", r.L_grad_U},
          {"iterations", r.trace.rows.size()},
          {"trace", json::parse(trace_to_json(r.trace))},
          {"iterates", iterates},
          {"set_residuals", r.set_residuals},
          {"diagnostic_failures", r.diagnostic_failures},
          {"message", r.message}};
}

std::string run(const std::string& config) {
  const ResolvedRun rr = resolve(run_config_from_json(json::parse(config)));
  return result_json(nova_run(rr.bench.problem, rr.recipe, rr.nova, rr.x0)).dump();
}

std::string simulate(const std::string& config) {
  const RunConfig cfg = run_config_from_json(json::parse(config));
  const ResolvedRun rr = resolve(cfg);
  Topology topo;
  topo.kind = cfg.simulate.topology;
  topo.agents = cfg.simulate.agents ? *cfg.simulate.agents : rr.bench.problem.layout().count();
  topo.seed = cfg.seed;
  topo.mean_latency_ms = cfg.simulate.mean_latency_ms;
  const DistributedResult d = run_distributed(rr.bench.problem, rr.recipe, rr.nova, cfg.simulate.mode, topo, rr.x0);
  json rounds = json::array();
  for (const RoundLog& r : d.rounds)
    rounds.push_back({{"outer", r.outer},
                      {"round", r.round},
                      {"messages", r.messages},
                      {"payload_floats", r.payload_floats},
                      {"agent_cost", r.agent_cost},
                      {"snapshot", to_std(r.snapshot)},
                      {"latency_ms", r.latency_ms}});
  json out = result_json(d.result);
  out["agents"] = topo.agents;
  out["total_messages"] = d.total_messages;
  out["total_payload_floats"] = d.total_payload_floats;
  out["simulated_latency_ms"] = d.simulated_latency_ms;
  out["rounds"] = rounds;
  return out.dump();
}

py::dict problem_info(const std::string& id) {
  const BenchmarkProblem b = make_benchmark(id);
  py::dict d;
  d["id"] = b.id;
  d["name"] = b.name;
  d["summary"] = b.summary;
  d["dim"] = b.problem.dim;
  d["constraints"] = b.problem.num_constraints();
  d["blocks"] = b.problem.layout().count();
  d["default_x0"] = b.default_x0;
  std::vector<std::string> builders;
  for (const auto& nb : b.builders) builders.push_back(nb.name);
  d["builders"] = builders;
  if (b.reference_point) d["reference_point"] = *b.reference_point;
  if (b.reference_value) d["reference_value"] = *b.reference_value;
  return d;
}

py::dict grid(const std::string& id, double resolution, std::optional<Vector> lo, std::optional<Vector> hi) {
  const BenchmarkProblem b = make_benchmark(id);
  if ((!lo || !hi) && !b.oracle_bounds) throw UnsupportedError("grid oracle needs bounds for " + id);
  const GridOracleResult r =
      grid_oracle(b.problem, resolution, lo ? *lo : b.oracle_bounds->first, hi ? *hi : b.oracle_bounds->second);
  py::dict d;
  d["found"] = r.found;
  d["point"] = r.found ? py::cast(r.point) : py::none();
  d["value"] = r.found ? py::cast(r.value) : py::none();
  d["points_scanned"] = r.points_scanned;
  d["feasible_points"] = r.feasible_points;
  return d;
}

std::vector<double> step_sequence(double gamma0, double epsilon, int count) {
  const StepSchedule s = StepSchedule::diminishing(gamma0, epsilon);
  std::vector<double> out;
  double g = s.initial();
  out.push_back(g);
  for (int nu = 1; nu < count; ++nu) out.push_back(g = step_next(s, nu, g));
  return out;
}

py::dict verify(const std::string& id, int samples, std::uint64_t seed) {
  const BenchmarkProblem b = make_benchmark(id);
  const ProblemSpec& p = b.problem;
  py::dict d;
  for (const NamedRecipe& nb : b.builders) {
    const SurrogateModel m = build_surrogates(p, nb.recipe, b.default_x0);
    bool ok = verify_objective_surrogate(p.objective, m.objective, p.set, samples, seed, p.blocks).pass();
    for (int j = 0; j < p.num_constraints(); ++j)
      ok = ok && verify_constraint_surrogate(p.constraints[j].g, m.constraints[j], p.set, samples, seed, p.blocks).pass();
    d[py::str(nb.name)] = ok;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_nova, m) {
  m.doc() = "Inner convex approximation solver";

  py::object base = py::module_::import("builtins").attr("RuntimeError");
  static py::exception<NovaError> nova_error(m, "NovaError", base.ptr());
  static py::exception<InputError> input_error(m, "InputError", nova_error.ptr());
  static py::exception<ParameterError> parameter_error(m, "ParameterError", nova_error.ptr());
  static py::exception<ConfigError> config_error(m, "ConfigError", nova_error.ptr());
  static py::exception<ConvergenceError> convergence_error(m, "ConvergenceError", nova_error.ptr());
  static py::exception<InfeasibilityError> infeasibility_error(m, "InfeasibilityError", nova_error.ptr());
  static py::exception<IoError> io_error(m, "IoError", nova_error.ptr());
  static py::exception<UnsupportedError> unsupported_error(m, "UnsupportedError", nova_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      py::set_error(input_error, e.what());
    } catch (const ParameterError& e) {
      py::set_error(parameter_error, e.what());
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const InfeasibilityError& e) {
      py::set_error(infeasibility_error, e.what());
    } catch (const ConvergenceError& e) {
      py::set_error(convergence_error, e.what());
    } catch (const IoError& e) {
      py::set_error(io_error, e.what());
    } catch (const UnsupportedError& e) {
      py::set_error(unsupported_error, e.what());
    } catch (const NovaError& e) {
      py::set_error(nova_error, e.what());
    } catch (const json::exception& e) {
      py::set_error(config_error, e.what());
    }
  });

  m.def("list_problems", &benchmark_ids);
  m.def("problem_info", &problem_info, py::arg("problem"));
  m.def("run_json", &run, py::arg("config"), "Run the outer loop; config and result are JSON text.");
  m.def("simulate_json", &simulate, py::arg("config"));
  m.def("grid_oracle", &grid, py::arg("problem"), py::arg("resolution") = 0.01, py::arg("lo") = py::none(),
        py::arg("hi") = py::none());
  m.def("step_sequence", &step_sequence, py::arg("gamma0"), py::arg("epsilon"), py::arg("count"));
  m.def("verify_surrogates", &verify, py::arg("problem"), py::arg("samples") = 1000, py::arg("seed") = 0);
  m.def("sample_feasible_points",
        [](const std::string& id, int count, std::uint64_t seed) {
          return sample_feasible_points(make_benchmark(id).problem, count, seed);
        },
        py::arg("problem"), py::arg("count"), py::arg("seed") = 0);
}
