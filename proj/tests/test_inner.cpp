#include "doctest.h"
#include "support.hpp"

using namespace nova;
using namespace nova::testing;

namespace {

Subproblem p2_subproblem(const Vector& y) {
  const BenchmarkProblem b = make_benchmark("P2");
  return make_subproblem(b.problem, build_surrogates(b.problem, b.recipe, y));
}

// Quadratic-penalty continuation: an independent route to the subproblem solution.
Vector penalty_solution(const Subproblem& s) {
  Vector x = s.anchor;
  for (double rho = 1e2; rho <= 1e10; rho *= 10) {
    auto value = [&](const Vector& z) {
      double v = s.objective.value.value(z);
      for (const auto& g : s.constraints) v += 0.5 * rho * std::pow(std::max(0.0, g.value.value(z)), 2);
      return v;
    };
    auto grad = [&](const Vector& z) {
      Vector gr = s.objective.value.gradient(z);
      for (const auto& g : s.constraints) gr += rho * std::max(0.0, g.value.value(z)) * g.value.gradient(z);
      return gr;
    };
    auto project = [&](const Vector& z) { return s.set.project(z); };
    x = minimize_projected(value, grad, project, x, 1.0, s.objective.strong_convexity, 1e-10, 200000).x;
  }
  return x;
}

}  // namespace

TEST_SUITE("inner") {
  TEST_CASE("unconstrained quadratic") {
    const Subproblem s = make_subproblem(Expr(2, terms::sq_dist(vec({3, -1}), 1.0)), 2.0, {}, ConvexSet::free(2),
                                         vec({0, 0}));
    for (InnerMethod m : {InnerMethod::kProjectedGradient, InnerMethod::kDualAscent}) {
      const InnerSolution sol = solve_subproblem(s, m, 1e-10, 10000);
      CHECK((sol.point - vec({3, -1})).norm() <= 1e-9);
      CHECK(sol.multipliers.size() == 0);
    }
  }

  TEST_CASE("x^2 on [1,2] lands on the boundary") {
    const Subproblem s =
        make_subproblem(Expr(1, terms::sq_dist(vec({0}), 1.0)), 2.0, {}, ConvexSet::box(1, 1, 2), vec({1.5}));
    CHECK(solve_subproblem(s, InnerMethod::kProjectedGradient, 1e-10, 10000).point[0] == doctest::Approx(1.0));
  }

  TEST_CASE("P2 subproblem at (2,2) against the closed form") {
    const Subproblem s = p2_subproblem(vec({2, 2}));
    const double t = p2_best_response_coordinate();
    const double mu = 2 * t / (4 - t);  // stationarity 2t + mu (t - 4) = 0
    for (InnerMethod m : {InnerMethod::kDualAscent, InnerMethod::kProjectedGradient}) {
      CAPTURE(to_string(m));
      const InnerSolution sol = solve_subproblem(s, m, 1e-9, 100000);
      CHECK(sol.point[0] == doctest::Approx(t).epsilon(1e-8));
      CHECK(sol.point[1] == doctest::Approx(t).epsilon(1e-8));
      CHECK(sol.point[0] == doctest::Approx(1.35425).epsilon(1e-5));
      REQUIRE(sol.multipliers.size() == 1);
      CHECK(sol.multipliers[0] > 0);
      CHECK(sol.multipliers[0] == doctest::Approx(mu).epsilon(1e-5));
    }
  }

  TEST_CASE("projection onto the surrogate feasible set") {
    SUBCASE("a feasible point projects to itself") {
      const Subproblem s = p2_subproblem(vec({2, 2}));
      const Vector u = vec({2, 2});
      CHECK((projection_onto_sublevel(s, u, 1e-12) - u).norm() <= 1e-9);
    }
    SUBCASE("half line") {
      const Subproblem s = make_subproblem(Expr(1, terms::sq_dist(vec({0}), 1.0)), 2.0,
                                           {Expr(1, terms::linear(vec({1}), vec({0})))}, ConvexSet::free(1),
                                           vec({-1}));
      CHECK(projection_onto_sublevel(s, vec({3}), 1e-12)[0] == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("ball intersected with a half plane") {
      const Expr ball(2, {terms::sq_dist(vec({0, 0}), 1.0), terms::constant(-1.0)});
      const Expr half(2, terms::linear(vec({-1, 0}), vec({0.5, 0})));
      const Subproblem s = make_subproblem(Expr(2, terms::sq_dist(vec({0, 0}), 1.0)), 2.0, {ball, half},
                                           ConvexSet::free(2), vec({0.75, 0}));
      Vector mu;
      const Vector x = projection_onto_sublevel(s, vec({2, 0}), 1e-12, &mu);
      CHECK((x - vec({1, 0})).norm() <= 1e-8);
      CHECK(mu[1] == doctest::Approx(0.0).epsilon(1e-8));
    }
  }

  TEST_CASE("kkt residual of the original problem") {
    SUBCASE("unconstrained minimum") {
      const ProblemSpec p = make_problem(2, Expr(2, terms::sq_dist(vec({0, 0}), 1.0)), {}, ConvexSet::free(2));
      CHECK(kkt_residual_original(p, vec({0, 0}), Vector()) == 0.0);
    }
    const BenchmarkProblem b = make_benchmark("P2");
    SUBCASE("P2 optimum with mu = 2") { CHECK(kkt_residual_original(b.problem, vec({1, 1}), vec({2})) <= 1e-14); }
    SUBCASE("P2 at (2,2) with mu = 0") {
      // x - P_K(x - (4,4)) = (2,2) - (0.1,0.1); the constraint value -3 times mu = 0 adds nothing.
      CHECK(kkt_residual_original(b.problem, vec({2, 2}), vec({0})) ==
            doctest::Approx(std::sqrt(2.0) * 1.9).epsilon(1e-12));
    }
    SUBCASE("negative multipliers are penalized") {
      CHECK(kkt_residual_original(b.problem, vec({1, 1}), vec({-1})) > 1.0);
    }
  }

  TEST_CASE("inner solution invariants across registry anchors") {
    for (const std::string id : {"P1", "P2", "P3"}) {
      const BenchmarkProblem b = make_benchmark(id);
      for (const auto& y : sample_feasible_points(b.problem, 4, 21)) {
        CAPTURE(id);
        const Subproblem s = make_subproblem(b.problem, build_surrogates(b.problem, b.recipe, y));
        const InnerSolution sol = solve_subproblem(s, InnerMethod::kDualAscent, 1e-9, 200000);
        CHECK(s.max_constraint(sol.point) <= 1e-8);
        CHECK(s.set.distance(sol.point) <= 1e-12);
        for (int j = 0; j < s.m(); ++j) {
          CHECK(sol.multipliers[j] >= 0.0);
          CHECK(std::abs(sol.multipliers[j] * s.constraints[j].value.value(sol.point)) <= 1e-6);
        }
        // The anchor is feasible, so the minimizer cannot be worse.
        CHECK(s.objective_value(sol.point) <= s.objective_value(y) + 1e-12);
        // Descent direction for the original objective.
        const DescentCheck dc = descent_check(b.problem.objective.gradient(y), sol.point, y,
                                              s.objective.strong_convexity);
        CHECK(dc.pass);
        // Fixed-point characterization: x = P_X(x - rho grad U~(x)).
        for (double rho : {1e-3, 1e-1, 1.0}) {
          const Vector moved = sol.point - rho * s.objective.value.gradient(sol.point);
          CHECK((projection_onto_sublevel(s, moved, 1e-10) - sol.point).norm() <= 1e-6);
        }
      }
    }
  }

  TEST_CASE("dual ascent agrees with penalty continuation") {
    for (const std::string id : {"P1", "P2", "P3"}) {
      const BenchmarkProblem b = make_benchmark(id);
      const Vector y = sample_feasible_points(b.problem, 1, 2).front();
      CAPTURE(id);
      const Subproblem s = make_subproblem(b.problem, build_surrogates(b.problem, b.recipe, y));
      const Vector dual = solve_subproblem(s, InnerMethod::kDualAscent, 1e-10, 200000).point;
      CHECK((dual - penalty_solution(s)).norm() <= 1e-5);
    }
  }

  TEST_CASE("projected gradient and dual ascent agree without constraints") {
    const Expr U(3, {terms::sq_dist(vec({1, -2, 0.5}), 1.5), terms::linear(vec({0.3, 0.1, -0.2}), vec({0, 0, 0}))});
    const Subproblem s = make_subproblem(U, 3.0, {}, ConvexSet::box(3, -1, 1), vec({0, 0, 0}));
    const Vector a = solve_subproblem(s, InnerMethod::kProjectedGradient, 1e-10, 10000).point;
    const Vector c = solve_subproblem(s, InnerMethod::kDualAscent, 1e-10, 10000).point;
    CHECK((a - c).norm() <= 1e-5);
  }

  TEST_CASE("errors") {
    SUBCASE("an empty surrogate set is reported as infeasible") {
      const Subproblem s = make_subproblem(Expr(1, terms::sq_dist(vec({0}), 1.0)), 2.0,
                                           {Expr(1, {terms::sq_dist(vec({0}), 1.0), terms::constant(1.0)})},
                                           ConvexSet::free(1), vec({0}));
      DualOptions opt;
      opt.rule.alpha0 = 1.0;
      opt.ceiling = 1e4;
      CHECK_THROWS_AS(dual_solve(s, opt), InfeasibilityError);
    }
    SUBCASE("an exhausted budget carries the best iterate") {
      const Subproblem s = p2_subproblem(vec({2, 2}));
      try {
        solve_subproblem(s, InnerMethod::kDualAscent, 1e-12, 2);
        FAIL("expected a convergence error");
      } catch (const ConvergenceError& e) {
        CHECK(e.best_iterate().size() == 2);
      }
    }
  }
}
