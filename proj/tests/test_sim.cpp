#include "doctest.h"
#include "support.hpp"

#include "nova/sim.hpp"

#include <cstdlib>

using namespace nova;
using namespace nova::testing;

namespace {

Topology cluster(int agents) {
  Topology t;
  t.agents = agents;
  t.seed = 11;
  return t;
}

NovaConfig constant_config(const BenchmarkProblem& b) {
  NovaConfig cfg;
  cfg.step = suggested_constant_schedule(b);
  return cfg;
}

struct ThreadsGuard {
  explicit ThreadsGuard(const char* value) { setenv("NOVA_THREADS", value, 1); }
  ~ThreadsGuard() { unsetenv("NOVA_THREADS"); }
};

}  // namespace

TEST_SUITE("sim") {
  TEST_CASE("message accounting per round") {
    const Topology one = cluster(1);
    CHECK(round_messages(one, DistributedMode::kDual, 3).messages == 0);
    CHECK(round_messages(one, DistributedMode::kPrimal, 3).payload_floats == 0);

    const Topology four = cluster(4);
    const MessageCount dual = round_messages(four, DistributedMode::kDual, 2);
    CHECK(dual.messages == 5);
    CHECK(dual.payload_floats == 10);
    const MessageCount primal = round_messages(four, DistributedMode::kPrimal, 2);
    CHECK(primal.messages == 8);
    CHECK(primal.payload_floats == 16);

    Topology ring = four;
    ring.kind = Topology::Kind::kDecentralizedStub;
    for (DistributedMode mode : {DistributedMode::kDual, DistributedMode::kPrimal}) {
      const MessageCount c = round_messages(ring, mode, 2);
      CHECK(c.messages == 8);
      CHECK(c.payload_floats == 16);
    }
  }

  TEST_CASE("dual harness reproduces the direct run bit for bit") {
    const BenchmarkProblem b = make_benchmark("P3");
    const NovaConfig cfg = constant_config(b);
    const DistributedResult sim = run_distributed(b.problem, b.recipe, cfg, DistributedMode::kDual, cluster(4), b.default_x0);

    NovaConfig direct = cfg;
    direct.inner.method = InnerMethod::kDualAscent;
    direct.use_blocks = true;
    const NovaResult ref = nova_run(b.problem, b.recipe, direct, b.default_x0);

    CHECK(sim.result.status == ref.status);
    CHECK(sim.result.x == ref.x);
    CHECK(sim.result.trace == ref.trace);
    REQUIRE(sim.result.iterates.size() == ref.iterates.size());
    for (std::size_t k = 0; k < ref.iterates.size(); ++k) CHECK(sim.result.iterates[k] == ref.iterates[k]);

    const long I = 4, m = b.problem.num_constraints();
    const long rounds = static_cast<long>(sim.rounds.size());
    CHECK(rounds > 0);
    CHECK(sim.total_messages == rounds * (I + 1));
    CHECK(sim.total_payload_floats == rounds * (I + 1) * m);
    double latency = 0.0;
    for (const RoundLog& r : sim.rounds) {
      CHECK(r.agent_cost.size() == 4);
      CHECK(r.snapshot.size() == m);
      CHECK(r.snapshot.minCoeff() >= 0.0);
      latency += r.latency_ms;
    }
    CHECK(sim.simulated_latency_ms == doctest::Approx(latency));
    // Round indices restart at 0 for every outer iteration.
    CHECK(sim.rounds.front().round == 0);
    CHECK(sim.rounds.front().outer == 0);
  }

  TEST_CASE("primal harness keeps every round feasible") {
    const BenchmarkProblem b = make_benchmark("P2");
    const DistributedResult sim =
        run_distributed(b.problem, b.recipe, constant_config(b), DistributedMode::kPrimal, cluster(2), b.default_x0);
    CHECK(sim.result.status == NovaStatus::kStationary);
    CHECK((sim.result.x - vec({1, 1})).norm() <= 1e-4);
    const int m = b.problem.num_constraints();
    for (const RoundLog& r : sim.rounds) {
      REQUIRE(r.snapshot.size() == 2 * m);
      for (int j = 0; j < m; ++j) CHECK(r.snapshot[j] + r.snapshot[m + j] <= 1e-12);
    }
    for (const Vector& x : sim.result.iterates) CHECK(max_constraint(b.problem, x) <= 1e-9);
    CHECK(sim.total_messages == static_cast<long>(sim.rounds.size()) * 4);
  }

  TEST_CASE("a single agent exchanges no messages") {
    const BenchmarkProblem b = make_benchmark("P2");
    ProblemSpec p = b.problem;
    p.blocks = BlockLayout::single(p.dim);
    for (DistributedMode mode : {DistributedMode::kDual, DistributedMode::kPrimal}) {
      const DistributedResult sim = run_distributed(p, b.recipe, constant_config(b), mode, cluster(1), b.default_x0);
      CHECK(sim.total_messages == 0);
      CHECK(sim.total_payload_floats == 0);
      CHECK(sim.simulated_latency_ms == 0.0);
      CHECK(sim.result.status == NovaStatus::kStationary);
    }
  }

  TEST_CASE("runs are deterministic across repeats and thread counts") {
    const BenchmarkProblem b = make_benchmark("P3");
    const NovaConfig cfg = constant_config(b);
    DistributedResult a, c;
    {
      ThreadsGuard one("1");
      a = run_distributed(b.problem, b.recipe, cfg, DistributedMode::kDual, cluster(4), b.default_x0);
    }
    {
      ThreadsGuard four("4");
      c = run_distributed(b.problem, b.recipe, cfg, DistributedMode::kDual, cluster(4), b.default_x0);
    }
    CHECK(a.result.trace == c.result.trace);
    CHECK(a.result.x == c.result.x);
    CHECK(a.rounds == c.rounds);
    CHECK(a.simulated_latency_ms == c.simulated_latency_ms);
  }

  TEST_CASE("configuration errors") {
    const BenchmarkProblem p3 = make_benchmark("P3");
    CHECK_THROWS_WITH_AS(
        run_distributed(p3.problem, p3.recipe, NovaConfig{}, DistributedMode::kDual, cluster(3), p3.default_x0),
        doctest::Contains("4 blocks"), ConfigError);
    CHECK_THROWS_AS(
        run_distributed(p3.problem, p3.recipe, NovaConfig{}, DistributedMode::kDual, cluster(0), p3.default_x0),
        ConfigError);

    const BenchmarkProblem p4 = make_benchmark("P4");
    CHECK_THROWS_WITH_AS(
        run_distributed(p4.problem, p4.recipe, NovaConfig{}, DistributedMode::kDual, cluster(2), p4.default_x0),
        doctest::Contains("product"), ConfigError);

    CHECK(parse_distributed_mode("primal") == DistributedMode::kPrimal);
    CHECK_THROWS_AS(parse_distributed_mode("gossip"), ConfigError);
    CHECK(parse_topology_kind("fully-decentralized-stub") == Topology::Kind::kDecentralizedStub);
    CHECK_THROWS_AS(parse_topology_kind("star"), ConfigError);
  }

  TEST_CASE("decentralized stub counts ring exchanges") {
    const BenchmarkProblem b = make_benchmark("P1");
    Topology ring = cluster(2);
    ring.kind = Topology::Kind::kDecentralizedStub;
    const DistributedResult sim =
        run_distributed(b.problem, b.recipe, constant_config(b), DistributedMode::kDual, ring, b.default_x0);
    const long m = b.problem.num_constraints();
    CHECK(sim.total_messages == static_cast<long>(sim.rounds.size()) * 4);
    CHECK(sim.total_payload_floats == static_cast<long>(sim.rounds.size()) * 4 * m);
  }
}
