#pragma once

// Registry of desk-scale benchmark problems with their surrogate recipes.

#include "nova/nova.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nova {

struct NamedRecipe {
  std::string name;
  SurrogateRecipe recipe;
};

struct BenchmarkProblem {
  std::string id;    // P1, P2, ...
  std::string name;  // reverse-ball, ...
  std::string summary;
  ProblemSpec problem;
  /// Recipe used by default for runs.
  SurrogateRecipe recipe;
  /// Every surrogate builder that applies to this problem.
  std::vector<NamedRecipe> builders;
  /// Surrogate family used for each constraint by the default recipe.
  std::vector<std::string> constraint_families;
  Vector default_x0;
  std::optional<Vector> reference_point;
  std::optional<double> reference_value;
  /// Box scanned by the grid oracle (dimension <= 3 only).
  std::optional<std::pair<Vector, Vector>> oracle_bounds;
  /// Parameters after defaults were filled in.
  nlohmann::json params;
};

/// Registry ids in order.
std::vector<std::string> benchmark_ids();

/// Builds a registry problem by id or name. Recognized parameters:
///   P1: A (2x2), A_shift, b, d, box, tau
///   P3: agents, constraints (1 or 2), seed
/// ConfigError for an unknown id or parameter.
BenchmarkProblem make_benchmark(const std::string& id, const nlohmann::json& params = nlohmann::json::object());

/// A constant schedule that satisfies 2 c > gamma_max L for the default recipe:
/// gamma = gamma_max = min(1, 1.9 c / L).
StepSchedule suggested_constant_schedule(const BenchmarkProblem& b);

}  // namespace nova
