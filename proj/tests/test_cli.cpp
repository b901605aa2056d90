#include "doctest.h"
#include "support.hpp"

#include "nova/cli.hpp"
#include "nova/config.hpp"
#include "nova/trace_io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace nova;
using namespace nova::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "nova");
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("nova_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

ConvergenceTrace sample_trace(int rows) {
  ConvergenceTrace t;
  for (int k = 0; k < rows; ++k) {
    TraceRow r;
    r.nu = k;
    r.U = 1.0 / (k + 3.0);
    r.gamma = 0.1 * (k + 1);
    r.bestresp_dist = std::ldexp(1.0, -k);
    r.max_g = -0.3333333333333333 * k;
    r.descent_lhs = -1e-17 * k;
    r.descent_rhs = -2e-17 * k;
    r.kkt = 1e-300 * (k + 1);
    r.inner_iters = 7 * k;
    r.wall_ms = 0.0;
    t.rows.push_back(r);
  }
  return t;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("list-problems names the registry") {
    const Outcome o = cli({"list-problems"});
    CHECK(o.code == kExitOk);
    for (const char* id : {"P1", "P2", "P3", "P4"}) CHECK(o.out.find(id) != std::string::npos);
  }

  TEST_CASE("run writes a trace with the canonical header") {
    const fs::path dir = scratch_dir();
    const fs::path trace = dir / "p2.csv";
    const Outcome o = cli({"run", "--problem", "P2", "--trace", trace.string()});
    CHECK(o.code == kExitOk);
    CHECK(o.out.find("status: stationary") != std::string::npos);
    const std::string text = slurp(trace);
    CHECK(text.substr(0, text.find('\n')) == kTraceHeader);
    const ConvergenceTrace t = read_trace(trace.string(), TraceFormat::kCsv);
    REQUIRE(!t.rows.empty());
    CHECK(t.rows.back().bestresp_dist <= 1e-6);

    const fs::path js = dir / "p2.json";
    CHECK(cli({"run", "--problem", "P2", "--trace", js.string(), "--trace-format", "json"}).code == kExitOk);
    CHECK(read_trace(js.string(), TraceFormat::kJson) == t);
    fs::remove_all(dir);
  }

  TEST_CASE("trace files are byte-identical across runs and thread counts") {
    const fs::path dir = scratch_dir();
    const fs::path a = dir / "a.csv", b = dir / "b.csv", c = dir / "c.csv";
    REQUIRE(cli({"run", "--problem", "P3", "--trace", a.string()}).code != kExitConfig);
    REQUIRE(cli({"run", "--problem", "P3", "--trace", b.string()}).code != kExitConfig);
    setenv("NOVA_THREADS", "4", 1);
    REQUIRE(cli({"simulate", "--problem", "P1", "--trace", c.string()}).code == kExitOk);
    const fs::path d = dir / "d.csv";
    unsetenv("NOVA_THREADS");
    REQUIRE(cli({"simulate", "--problem", "P1", "--trace", d.string()}).code == kExitOk);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(c) == slurp(d));
    CHECK(!slurp(a).empty());
    fs::remove_all(dir);
  }

  TEST_CASE("a constant step violating 2c > gamma_max L is rejected") {
    const fs::path dir = scratch_dir();
    const fs::path cfg = dir / "bad.json";
    write_file(cfg, R"({"problem": "P2", "step": {"kind": "constant", "gamma": 1.0, "gamma_max": 1.0,
                        "L_grad_U": 2.0, "c_tilde": 0.4}})");
    const Outcome o = cli({"run", "--config", cfg.string()});
    CHECK(o.code == kExitConfig);
    CHECK(o.err.find("2*c_tilde > gamma_max*L_grad_U") != std::string::npos);
    fs::remove_all(dir);
  }

  TEST_CASE("configuration errors exit with code 2") {
    CHECK(cli({"run", "--problem", "P9"}).code == kExitConfig);
    CHECK(cli({"run", "--config", "/nonexistent/run.json"}).code == kExitConfig);
    CHECK(cli({"simulate", "--problem", "P4"}).code == kExitConfig);
    CHECK(cli({"simulate", "--problem", "P3", "--agents", "3"}).code == kExitConfig);
    CHECK(cli({"grid-oracle", "--problem", "P3"}).code == kExitConfig);
    CHECK(cli({"run", "--bogus"}).code == kExitConfig);
    CHECK(cli({}).code == kExitConfig);
    CHECK(cli({"--help"}).code == kExitOk);

    const fs::path dir = scratch_dir();
    const fs::path cfg = dir / "unknown_key.json";
    write_file(cfg, R"({"problem": "P2", "stepsize": 0.1})");
    const Outcome o = cli({"run", "--config", cfg.string()});
    CHECK(o.code == kExitConfig);
    CHECK(o.err.find("stepsize") != std::string::npos);
    write_file(cfg, "{not json");
    CHECK(cli({"run", "--config", cfg.string()}).code == kExitConfig);
    fs::remove_all(dir);
  }

  TEST_CASE("non-convergence exits with code 3") {
    const fs::path dir = scratch_dir();
    const fs::path cfg = dir / "short.json";
    write_file(cfg, R"({"problem": "P2", "max_outer": 1})");
    const Outcome o = cli({"run", "--config", cfg.string()});
    CHECK(o.code == kExitConvergence);
    CHECK(o.out.find("status: max-iter") != std::string::npos);
    fs::remove_all(dir);
  }

  TEST_CASE("grid-oracle") {
    const Outcome o = cli({"grid-oracle", "--problem", "P2", "--resolution", "0.01"});
    CHECK(o.code == kExitOk);
    CHECK(o.out.find("best point: (1, 1)") != std::string::npos);
    CHECK(o.out.find("best value: 2") != std::string::npos);
    const Outcome none = cli({"grid-oracle", "--problem", "P2", "--lo", "0.1", "--hi", "0.5"});
    CHECK(none.code == kExitOk);
    CHECK(none.out.find("no feasible grid point") != std::string::npos);
  }

  TEST_CASE("grid_oracle errors") {
    const BenchmarkProblem p3 = make_benchmark("P3");
    const Vector lo = Vector::Constant(p3.problem.dim, -1), hi = Vector::Constant(p3.problem.dim, 1);
    CHECK_THROWS_AS(grid_oracle(p3.problem, 0.5, lo, hi), UnsupportedError);
    const BenchmarkProblem p2 = make_benchmark("P2");
    CHECK_THROWS_AS(grid_oracle(p2.problem, 0.0, vec({0, 0}), vec({1, 1})), ParameterError);
    CHECK_THROWS_AS(grid_oracle(p2.problem, 1e-6, vec({0, 0}), vec({100, 100})), ParameterError);
  }

  TEST_CASE("verify-surrogate passes every builder") {
    const Outcome o = cli({"verify-surrogate", "--problem", "P2", "--samples", "500", "--anchors", "2"});
    CHECK(o.code == kExitOk);
    CHECK(o.out.find("PASS") != std::string::npos);
    CHECK(o.out.find("FAIL") == std::string::npos);
  }

  TEST_CASE("gradient oracles pass the finite-difference check") {
    const Outcome o = cli({"--check-oracles"});
    CHECK(o.code == kExitOk);
    CHECK(o.out.find("FAIL") == std::string::npos);
  }

  TEST_CASE("simulate writes a round log") {
    const fs::path dir = scratch_dir();
    const fs::path log = dir / "rounds.json";
    const Outcome o = cli({"simulate", "--problem", "P2", "--mode", "primal", "--roundlog", log.string()});
    CHECK(o.code == kExitOk);
    const nlohmann::json j = nlohmann::json::parse(slurp(log));
    CHECK(j.at("mode") == "primal");
    CHECK(j.at("agents") == 2);
    CHECK(j.at("rounds").size() > 0);
    long total = 0;
    for (const auto& r : j.at("rounds")) total += r.at("messages").get<long>();
    CHECK(total == j.at("total_messages").get<long>());
    fs::remove_all(dir);
  }

  TEST_CASE("run config round-trips through JSON") {
    RunConfig cfg;
    cfg.problem = "P3";
    cfg.seed = 42;
    cfg.x0 = Vector::Constant(8, 0.25);
    cfg.nova.step = StepSchedule::constant(0.4, 0.5, 1.5, 2.0);
    cfg.nova.stop_tol = 1e-7;
    cfg.nova.max_outer = 77;
    cfg.nova.inner.method = InnerMethod::kPrimalDecomposition;
    cfg.nova.dual.rule = DualStepRule::Kind::kSummableDiminishing;
    cfg.nova.dual.alpha0 = 0.3;
    cfg.nova.primal.step = MasterStep::kHarmonic;
    cfg.nova.primal.beta0 = 2.0;
    cfg.simulate.mode = DistributedMode::kPrimal;
    cfg.simulate.topology = Topology::Kind::kDecentralizedStub;
    cfg.simulate.agents = 4;
    cfg.output.trace = "out.csv";
    cfg.output.trace_format = TraceFormat::kJson;

    const fs::path dir = scratch_dir();
    const fs::path path = dir / "cfg.json";
    save_run_config(cfg, path.string());
    const RunConfig back = load_run_config(path.string());
    CHECK(to_json(back) == to_json(cfg));
    CHECK(back.nova.primal.step == MasterStep::kHarmonic);
    CHECK(*back.x0 == *cfg.x0);
    fs::remove_all(dir);
  }

  TEST_CASE("trace serialization") {
    SUBCASE("one row gives a header and one line") {
      const std::string csv = trace_to_csv(sample_trace(1));
      CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    }
    SUBCASE("csv and json parse back exactly") {
      const ConvergenceTrace t = sample_trace(5);
      CHECK(parse_trace_csv(trace_to_csv(t)) == t);
      CHECK(parse_trace_json(trace_to_json(t)) == t);
      CHECK(nlohmann::json::parse(trace_to_json(t)).size() == 5);
    }
    SUBCASE("unconstrained rows keep -inf") {
      ConvergenceTrace t = sample_trace(2);
      t.rows[1].max_g = -std::numeric_limits<double>::infinity();
      CHECK(parse_trace_json(trace_to_json(t)) == t);
      CHECK(parse_trace_csv(trace_to_csv(t)) == t);
    }
    SUBCASE("emit errors") {
      CHECK_THROWS_AS(emit_trace(ConvergenceTrace{}, "/tmp/never.csv", TraceFormat::kCsv), InputError);
      CHECK_THROWS_AS(emit_trace(sample_trace(1), "/nonexistent/dir/t.csv", TraceFormat::kCsv), IoError);
    }
    SUBCASE("format names") {
      CHECK(parse_trace_format("json") == TraceFormat::kJson);
      CHECK_THROWS_AS(parse_trace_format("xml"), ConfigError);
    }
  }
}
