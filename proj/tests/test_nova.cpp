#include "doctest.h"
#include "support.hpp"

using namespace nova;
using namespace nova::testing;

namespace {

NovaConfig constant_config(const BenchmarkProblem& b) {
  NovaConfig cfg;
  cfg.step = suggested_constant_schedule(b);
  return cfg;
}

}  // namespace

TEST_SUITE("nova") {
  TEST_CASE("step schedule recursion") {
    const StepSchedule s = StepSchedule::diminishing(1.0, 0.5);
    const double g1 = step_next(s, 1, s.initial());
    const double g2 = step_next(s, 2, g1);
    CHECK(g1 == 0.5);
    CHECK(g2 == 0.375);
    const StepSchedule c = StepSchedule::constant(0.3, 0.5, 1.0, 1.0);
    CHECK(step_next(c, 7, 0.3) == 0.3);
  }

  TEST_CASE("diminishing steps are positive, decreasing and behave like 1/(eps nu)") {
    for (double eps : {0.1, 0.5, 0.9}) {
      const StepSchedule s = StepSchedule::diminishing(1.0, eps);
      double g = s.initial();
      for (int nu = 1; nu <= 10000; ++nu) {
        const double next = step_next(s, nu, g);
        REQUIRE(next > 0.0);
        REQUIRE(next < g);
        g = next;
      }
      CHECK(10000 * g == doctest::Approx(1.0 / eps).epsilon(0.2));
    }
  }

  TEST_CASE("harmonic custom rule") {
    const StepSchedule s = StepSchedule::harmonic(0.8, 0.25);
    CHECK(s.custom_label == "harmonic");
    double g = s.initial();
    for (int nu = 1; nu <= 5; ++nu) {
      g = step_next(s, nu, g);
      CHECK(g == doctest::Approx(0.8 / (1 + 0.25 * nu)));
    }
  }

  TEST_CASE("constant step validation cites the admissibility inequality") {
    CHECK_THROWS_WITH_AS(StepSchedule::constant(1.0, 1.0, 1.0, 0.4),
                         doctest::Contains("2*c_tilde > gamma_max*L_grad_U"), ParameterError);
    CHECK_NOTHROW(StepSchedule::constant(1.0, 1.0, 1.0, 0.6).validate());
    CHECK_THROWS_AS(StepSchedule::constant(0.8, 0.5, 1.0, 1.0), ParameterError);
    CHECK_THROWS_AS(StepSchedule::diminishing(1.0, 1.0).validate(), ParameterError);
    CHECK_THROWS_AS(StepSchedule::diminishing(1.5, 0.1).validate(), ParameterError);
  }

  TEST_CASE("descent check") {
    SUBCASE("zero displacement") {
      const DescentCheck d = descent_check(vec({4, 4}), vec({2, 2}), vec({2, 2}), 2.0);
      CHECK(d.lhs == 0.0);
      CHECK(d.rhs == 0.0);
      CHECK(d.pass);
    }
    SUBCASE("P2 at (2,2)") {
      const double t = p2_best_response_coordinate();
      const double d = 2.0 - t;
      const DescentCheck r = descent_check(vec({4, 4}), vec({t, t}), vec({2, 2}), 2.0);
      CHECK(r.lhs == doctest::Approx(-8 * d));
      CHECK(r.rhs == doctest::Approx(-4 * d * d));
      CHECK(r.lhs == doctest::Approx(-5.16601).epsilon(1e-5));
      CHECK(r.rhs == doctest::Approx(-1.66798).epsilon(1e-5));
      CHECK(r.pass);
    }
    SUBCASE("ascent direction fails") {
      const Vector g = vec({1, -2});
      const Vector x = vec({0.5, 0.5});
      for (double c : {1e-3, 1.0, 10.0}) CHECK_FALSE(descent_check(g, x + g, x, c).pass);
    }
  }

  TEST_CASE("P2 from its optimum stops immediately") {
    const BenchmarkProblem b = make_benchmark("P2");
    const NovaResult r = nova_run(b.problem, b.recipe, NovaConfig{}, vec({1, 1}));
    CHECK(r.status == NovaStatus::kStationary);
    REQUIRE(r.trace.rows.size() == 1);
    CHECK(r.trace.rows[0].nu == 0);
    CHECK(r.trace.rows[0].bestresp_dist <= 1e-6);
    CHECK((r.x - vec({1, 1})).norm() <= 1e-6);
    CHECK(r.final_kkt <= 1e-5);
  }

  TEST_CASE("P2 first step with gamma 0.5") {
    const BenchmarkProblem b = make_benchmark("P2");
    NovaConfig cfg;
    cfg.step = StepSchedule::constant(0.5, 1.0, 2.0, 2.0);
    cfg.max_outer = 1;
    const NovaResult r = nova_run(b.problem, b.recipe, cfg, vec({2, 2}));
    REQUIRE(r.iterates.size() >= 2);
    const double expected = 2.0 + 0.5 * (p2_best_response_coordinate() - 2.0);
    CHECK(r.iterates[1][0] == doctest::Approx(expected).epsilon(1e-8));
    CHECK(r.iterates[1][1] == doctest::Approx(1.67712).epsilon(1e-5));
    CHECK(r.status == NovaStatus::kMaxIter);
    CHECK(r.trace.rows[0].gamma == 0.5);
    CHECK(r.trace.rows[0].U == 8.0);
  }

  TEST_CASE("P2 with the diminishing schedule reaches the optimum") {
    const BenchmarkProblem b = make_benchmark("P2");
    NovaConfig cfg;
    cfg.step = StepSchedule::diminishing(1.0, 0.1);
    cfg.max_outer = 500;
    const NovaResult r = nova_run(b.problem, b.recipe, cfg, vec({2, 2}));
    CHECK((r.x - vec({1, 1})).norm() <= 1e-3);
    for (const Vector& x : r.iterates) CHECK(1 - x[0] * x[1] <= 1e-9);
    for (const TraceRow& row : r.trace.rows) CHECK(row.max_g <= 1e-9);
  }

  TEST_CASE("constant-step runs are feasible, descending and monotone") {
    for (const std::string id : {"P1", "P2", "P3"}) {
      const BenchmarkProblem b = make_benchmark(id);
      const NovaConfig cfg = constant_config(b);
      for (const Vector& x0 : sample_feasible_points(b.problem, 3, 8)) {
        CAPTURE(id);
        const NovaResult r = nova_run(b.problem, b.recipe, cfg, x0);
        CHECK(r.status == NovaStatus::kStationary);
        CHECK(r.diagnostic_failures.empty());
        for (const TraceRow& row : r.trace.rows) {
          CHECK(row.max_g <= 1e-9);
          CHECK(row.descent_lhs <= row.descent_rhs + 1e-8 * (1 + std::abs(row.descent_rhs)));
        }
        for (double res : r.set_residuals) CHECK(res <= 1e-9);
        CHECK(monotonicity_check(r.trace, cfg.step).pass);
        CHECK(r.final_kkt <= 1e-5);
      }
    }
  }

  TEST_CASE("monotonicity check") {
    const StepSchedule c = StepSchedule::constant(0.5, 1.0, 1.0, 1.0);
    ConvergenceTrace t;
    t.rows = {{0, 5.0, 0.5, 1.0}, {1, 4.0, 0.5, 0.5}, {2, 3.9, 0.5, 0.1}};
    CHECK(monotonicity_check(t, c).pass);
    t.rows[2].U = 4.5;
    const MonotonicityCheck bad = monotonicity_check(t, c);
    CHECK_FALSE(bad.pass);
    CHECK(bad.worst > 0.0);
    const MonotonicityCheck skipped = monotonicity_check(t, StepSchedule::diminishing(1.0, 0.1));
    CHECK(skipped.skipped);
    CHECK(skipped.pass);
  }

  TEST_CASE("run errors") {
    const BenchmarkProblem b = make_benchmark("P2");
    SUBCASE("infeasible start") { CHECK_THROWS_AS(nova_run(b.problem, b.recipe, NovaConfig{}, vec({0.5, 0.5})), InputError); }
    SUBCASE("invalid constant step") {
      NovaConfig cfg;
      cfg.step.kind = StepSchedule::Kind::kConstant;
      cfg.step.gamma = 1.0;
      cfg.step.L_grad_U = 2.0;
      cfg.step.c_tilde = 0.4;
      CHECK_THROWS_AS(nova_run(b.problem, b.recipe, cfg, vec({2, 2})), ParameterError);
    }
    SUBCASE("inner failure keeps the partial trace") {
      NovaConfig cfg;
      cfg.inner.max_iter = 2;
      cfg.dual.max_iter = 2;
      const NovaResult r = nova_run(b.problem, b.recipe, cfg, vec({2, 2}));
      CHECK(r.status == NovaStatus::kInnerFailure);
      CHECK(r.message.find("outer iteration 0") != std::string::npos);
      CHECK((r.x - vec({2, 2})).norm() == 0.0);
    }
  }

  TEST_CASE("inner method selection") {
    NovaConfig cfg;
    CHECK(effective_inner_method(make_benchmark("P2").problem, cfg) == InnerMethod::kDualAscent);
    const ProblemSpec free = make_problem(1, Expr(1, terms::sq_dist(vec({0}), 1.0)), {}, ConvexSet::free(1));
    CHECK(effective_inner_method(free, cfg) == InnerMethod::kProjectedGradient);
    cfg.inner.method = InnerMethod::kPrimalDecomposition;
    CHECK(effective_inner_method(free, cfg) == InnerMethod::kPrimalDecomposition);
  }

  TEST_CASE("unconstrained problems run on projected gradient") {
    const ProblemSpec p = make_problem(2, Expr(2, {terms::sq_dist(vec({0.5, -0.5}), 1.0), terms::sin(0, 0.3)}), {},
                                       ConvexSet::box(2, -1, 1));
    SurrogateRecipe recipe;
    recipe.objective.kind = "proximal";
    recipe.objective.tau = {2.0};
    NovaConfig cfg;
    cfg.step = StepSchedule::diminishing(1.0, 0.05);
    const NovaResult r = nova_run(p, recipe, cfg, vec({0, 0}));
    CHECK(r.status == NovaStatus::kStationary);
    CHECK(r.final_kkt <= 1e-5);
  }

  TEST_CASE("wall time is recorded only on request") {
    const BenchmarkProblem b = make_benchmark("P1");
    NovaConfig cfg = constant_config(b);
    for (const auto& row : nova_run(b.problem, b.recipe, cfg, b.default_x0).trace.rows) CHECK(row.wall_ms == 0.0);
    cfg.record_wall_time = true;
    double total = 0.0;
    for (const auto& row : nova_run(b.problem, b.recipe, cfg, b.default_x0).trace.rows) total += row.wall_ms;
    CHECK(total > 0.0);
  }

  TEST_CASE("limit values are no worse than the grid oracle") {
    for (const std::string id : {"P2", "P4"}) {
      const BenchmarkProblem b = make_benchmark(id);
      REQUIRE(b.oracle_bounds);
      const double res = 0.01;
      const auto oracle = grid_oracle(b.problem, res, b.oracle_bounds->first, b.oracle_bounds->second);
      REQUIRE(oracle.found);
      const NovaResult r = nova_run(b.problem, b.recipe, constant_config(b), b.default_x0);
      CAPTURE(id);
      CHECK(b.problem.objective.value(r.x) <= oracle.value + 10 * res);
    }
  }
}
