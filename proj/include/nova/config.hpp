#pragma once

// Run configuration: one JSON document describing a problem, its surrogates,
// the solver settings and where to write outputs.

#include "nova/benchmarks.hpp"
#include "nova/sim.hpp"
#include "nova/trace_io.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace nova {

struct SimulateConfig {
  DistributedMode mode = DistributedMode::kDual;
  Topology::Kind topology = Topology::Kind::kClusterHead;
  /// Defaults to the problem's block count.
  std::optional<int> agents;
  double mean_latency_ms = 1.0;
};

struct OutputConfig {
  std::string trace;  // empty: no trace file
  TraceFormat trace_format = TraceFormat::kCsv;
  std::string roundlog;
};

struct RunConfig {
  std::string problem = "P2";
  nlohmann::json problem_params = nlohmann::json::object();
  /// Empty: the problem's default recipe.
  std::optional<SurrogateRecipe> surrogate;
  /// Empty: the problem's default start. "random": a seeded feasible sample.
  std::optional<Vector> x0;
  bool random_x0 = false;
  std::uint64_t seed = 0;
  NovaConfig nova;
  SimulateConfig simulate;
  OutputConfig output;
};

nlohmann::json to_json(const RunConfig& cfg);
/// ConfigError on schema violations (unknown keys, wrong types, bad enums).
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

nlohmann::json to_json(const SurrogateRecipe& r);
SurrogateRecipe surrogate_recipe_from_json(const nlohmann::json& j);

/// The problem, recipe and start point a config refers to, with the step
/// schedule checked against them (constant steps need 2 c > gamma_max L;
/// missing L and c are filled from the problem and the surrogate at x0).
struct ResolvedRun {
  BenchmarkProblem bench;
  SurrogateRecipe recipe;
  Vector x0;
  NovaConfig nova;
};
ResolvedRun resolve(const RunConfig& cfg);

}  // namespace nova
