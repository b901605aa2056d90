#include "nova/sim.hpp"

#include <algorithm>
#include <random>

namespace nova {

const char* to_string(DistributedMode m) { return m == DistributedMode::kDual ? "dual" : "primal"; }

DistributedMode parse_distributed_mode(const std::string& s) {
  if (s == "dual") return DistributedMode::kDual;
  if (s == "primal") return DistributedMode::kPrimal;
  throw ConfigError("unknown distributed mode '" + s + "' (expected dual or primal)");
}

const char* to_string(Topology::Kind k) {
  return k == Topology::Kind::kClusterHead ? "cluster-head" : "fully-decentralized-stub";
}

Topology::Kind parse_topology_kind(const std::string& s) {
  if (s == "cluster-head") return Topology::Kind::kClusterHead;
  if (s == "fully-decentralized-stub") return Topology::Kind::kDecentralizedStub;
  throw ConfigError("unknown topology '" + s + "'");
}

MessageCount round_messages(const Topology& topo, DistributedMode mode, int m) {
  const long I = topo.agents;
  MessageCount c;
  if (I <= 1) return c;
  if (topo.kind == Topology::Kind::kDecentralizedStub) {
    c.messages = 2 * I;
    c.payload_floats = 2 * I * m;
    return c;
  }
  if (mode == DistributedMode::kDual) {
    c.messages = I + 1;
    c.payload_floats = (I + 1) * m;
  } else {
    c.messages = 2 * I;
    c.payload_floats = 2 * I * m;
  }
  return c;
}

DistributedResult run_distributed(const ProblemSpec& p, const SurrogateRecipe& recipe, const NovaConfig& cfg,
                                  DistributedMode mode, const Topology& topo, const Vector& x0) {
  if (topo.agents < 1) throw ConfigError("agent count must be at least 1");
  if (!(topo.mean_latency_ms >= 0)) throw ConfigError("mean latency must be nonnegative");
  p.validate();
  const int nb = p.layout().count();
  if (topo.agents != nb)
    throw ConfigError("topology has " + std::to_string(topo.agents) + " agents but the problem has " +
                      std::to_string(nb) + " blocks");
  if (x0.size() != p.dim) throw InputError("x0 has the wrong dimension");
  // Fails with the offending surrogate named when the model does not split.
  make_subproblem(p, build_surrogates(p, recipe, x0)).decompose();

  NovaConfig c = cfg;
  c.inner.method = mode == DistributedMode::kDual ? InnerMethod::kDualAscent : InnerMethod::kPrimalDecomposition;
  c.use_blocks = true;

  const int m = p.num_constraints();
  const MessageCount per_round = round_messages(topo, mode, m);
  std::mt19937_64 rng(topo.seed);
  std::exponential_distribution<double> latency(topo.mean_latency_ms > 0 ? 1.0 / topo.mean_latency_ms : 1.0);

  DistributedResult out;
  auto log_round = [&](int nu, int round, const std::vector<int>& cost, Vector snapshot) {
    RoundLog r;
    r.outer = nu;
    r.round = round;
    r.messages = per_round.messages;
    r.payload_floats = per_round.payload_floats;
    r.agent_cost = cost;
    r.snapshot = std::move(snapshot);
    for (long k = 0; k < r.messages; ++k)
      r.latency_ms = std::max(r.latency_ms, topo.mean_latency_ms > 0 ? latency(rng) : 0.0);
    out.total_messages += r.messages;
    out.total_payload_floats += r.payload_floats;
    out.simulated_latency_ms += r.latency_ms;
    out.rounds.push_back(std::move(r));
  };

  NovaHooks hooks;
  hooks.dual_round = [&](int nu, const DualRound& dr) {
    log_round(nu, dr.round, dr.state->block_iterations, dr.state->lambda);
  };
  hooks.primal_round = [&](int nu, const PrimalRound& pr) {
    Vector snap(static_cast<Eigen::Index>(pr.t->size()) * m);
    for (std::size_t i = 0; i < pr.t->size(); ++i) snap.segment(static_cast<Eigen::Index>(i) * m, m) = (*pr.t)[i];
    log_round(nu, pr.round, pr.block_iterations, std::move(snap));
  };
  out.result = nova_run(p, recipe, c, x0, hooks);
  return out;
}

}  // namespace nova
