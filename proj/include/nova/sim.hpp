#pragma once

// Simulated multi-agent execution of the distributed inner solvers. Agents
// own blocks; a synchronous bus carries multipliers or slack allocations
// down and per-block values up. The harness only observes the solver, so
// its iterates are the ones nova_run produces.

#include "nova/nova.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nova {

enum class DistributedMode { kDual, kPrimal };
const char* to_string(DistributedMode m);
DistributedMode parse_distributed_mode(const std::string& s);

struct Topology {
  enum class Kind { kClusterHead, kDecentralizedStub };
  Kind kind = Kind::kClusterHead;
  int agents = 1;
  std::uint64_t seed = 0;
  /// Mean of the exponential per-message latency, in milliseconds.
  double mean_latency_ms = 1.0;
};
const char* to_string(Topology::Kind k);
Topology::Kind parse_topology_kind(const std::string& s);

struct RoundLog {
  int outer = 0;  // outer iteration nu
  int round = 0;  // inner round within nu
  long messages = 0;
  long payload_floats = 0;
  std::vector<int> agent_cost;  // inner iterations per agent
  /// Dual mode: lambda. Primal mode: t_1, ..., t_I concatenated.
  Vector snapshot;
  /// Slowest message of the round; reported only.
  double latency_ms = 0.0;

  bool operator==(const RoundLog&) const = default;
};

/// Messages and payload of one round under the accounting convention.
/// Cluster head, dual: one broadcast of m floats plus I uploads of m floats.
/// Cluster head, primal: I allocations down and I multiplier vectors up.
/// Decentralized stub: every agent exchanges m floats with both ring
/// neighbours. A single agent sends nothing.
struct MessageCount {
  long messages = 0;
  long payload_floats = 0;
};
MessageCount round_messages(const Topology& topo, DistributedMode mode, int m);

struct DistributedResult {
  NovaResult result;
  std::vector<RoundLog> rounds;
  long total_messages = 0;
  long total_payload_floats = 0;
  double simulated_latency_ms = 0.0;
};

/// Runs the outer loop with the inner problem solved by dual or primal
/// decomposition, one agent per block. ConfigError when the surrogates at x0
/// do not separate (the message names the surrogate) or when the agent
/// count differs from the block count.
DistributedResult run_distributed(const ProblemSpec& p, const SurrogateRecipe& recipe, const NovaConfig& cfg,
                                  DistributedMode mode, const Topology& topo, const Vector& x0);

}  // namespace nova
