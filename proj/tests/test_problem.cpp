#include "doctest.h"
#include "support.hpp"

#include <random>

using namespace nova;
using namespace nova::testing;

TEST_SUITE("problem") {
  TEST_CASE("feasibility residual on a box with a bilinear constraint") {
    const ProblemSpec p = make_problem(2, Expr(2, terms::sq_dist(vec({0, 0}), 1.0)),
                                       {Expr(2, {terms::bilinear(0, 1, 1.0), terms::constant(-1.0)})},
                                       ConvexSet::box(2, 0.0, 1.0));
    CHECK(feasibility_residual(p, vec({1, 1})) == doctest::Approx(0.0));
    CHECK(feasibility_residual(p, vec({2, 1})) == doctest::Approx(2.0));
    CHECK_THROWS_AS(feasibility_residual(p, vec({1, 1, 1})), InputError);
  }

  TEST_CASE("feasibility residual of the reverse ball constraint") {
    const ProblemSpec p = make_problem(2, Expr(2, terms::sq_dist(vec({0, 0}), 1.0)),
                                       {Expr(2, {terms::constant(1.0), terms::sq_dist(vec({0, 0}), -1.0)})},
                                       ConvexSet::free(2));
    CHECK(feasibility_residual(p, vec({0.5, 0})) == doctest::Approx(0.75).epsilon(1e-14));
  }

  TEST_CASE("lipschitz estimate of a unit quadratic stays within the safety band") {
    const ProblemSpec p = make_problem(2, Expr(2, terms::sq_dist(vec({0, 0}), 0.5)), {}, ConvexSet::box(2, -1, 1));
    for (std::uint64_t seed : {0u, 1u, 17u}) {
      const double L = estimate_lipschitz_grad(p, 500, seed);
      CHECK(L >= 1.0 - 1e-12);
      CHECK(L <= 1.5 + 1e-12);
      CHECK(L == estimate_lipschitz_grad(p, 500, seed));
    }
  }

  TEST_CASE("lipschitz estimate of a constant is zero") {
    const ProblemSpec p = make_problem(2, Expr(2, terms::constant(3.0)), {}, ConvexSet::box(2, -1, 1));
    CHECK(estimate_lipschitz_grad(p, 200, 0) == 0.0);
  }

  TEST_CASE("lipschitz estimate of x^4 against a brute-force pairwise scan") {
    const auto value = [](const Vector& x) { return std::pow(x[0], 4); };
    const auto grad = [](const Vector& x) { return Vector::Constant(1, 4 * std::pow(x[0], 3)); };
    const ProblemSpec p = make_problem(
        1, Expr(1, terms::custom(value, grad, Curvature::kConvex, 12.0, std::vector<int>{0})), {},
        ConvexSet::box(1, -1, 1));
    double brute = 0.0;
    const int n = 400;
    for (int a = 0; a <= n; ++a)
      for (int b = a + 1; b <= n; ++b) {
        const double u = -1 + 2.0 * a / n, v = -1 + 2.0 * b / n;
        brute = std::max(brute, std::abs(4 * (u * u * u - v * v * v)) / (v - u));
      }
    const double est = estimate_lipschitz_grad(p, 5000, 3);
    CHECK(brute == doctest::Approx(12.0).epsilon(0.01));
    CHECK(est <= 1.5 * 12.0 + 1e-9);
    CHECK(est >= 0.8 * brute);
  }

  TEST_CASE("slater check") {
    SUBCASE("interior point exists") {
      CHECK(slater_check({Expr(1, {terms::linear(vec({1}), vec({0}), -1.0)})}, ConvexSet::box(1, 0, 2), 100));
    }
    SUBCASE("x^2 has no strictly feasible point") {
      CHECK_FALSE(slater_check({Expr(1, terms::sq_dist(vec({0}), 1.0))}, ConvexSet::free(1), 1000));
    }
    SUBCASE("P2 subproblem anchored at (2,2)") {
      const BenchmarkProblem b = make_benchmark("P2");
      const Vector y = vec({2, 2});
      const SurrogateModel m = build_surrogates(b.problem, b.recipe, y);
      CHECK(m.constraints[0].value.value(y) == doctest::Approx(-3.0));
      CHECK(slater_check({m.constraints[0].value}, b.problem.set, 100, 0, {y}));
    }
  }

  TEST_CASE("registry gradients match finite differences") {
    for (const auto& id : benchmark_ids()) {
      CAPTURE(id);
      const GradientCheck c = check_gradients(make_benchmark(id).problem, 50, 0, 1e-6, 1e-5);
      CHECK(c.pass);
      CHECK(c.worst_relative_error <= 1e-5);
    }
  }

  TEST_CASE("check_gradients flags a wrong oracle") {
    const auto value = [](const Vector& x) { return x.squaredNorm(); };
    const auto grad = [](const Vector& x) { return Vector(3.0 * x); };
    const ProblemSpec p = make_problem(2, make_expr(2, value, grad, Curvature::kConvex), {}, ConvexSet::box(2, -1, 1));
    const GradientCheck c = check_gradients(p, 10, 0);
    CHECK_FALSE(c.pass);
    CHECK(c.worst_function == "objective");
  }

  TEST_CASE("projection invariants on every set kind") {
    std::vector<ConvexSet> sets{ConvexSet::box(vec({-1, 0, 2}), vec({1, 0.5, 4})), ConvexSet::ball(vec({1, -1, 0}), 2.0),
                                ConvexSet::nonneg_orthant(3), ConvexSet::simplex(3, 2.0),
                                ConvexSet::product({ConvexSet::box(1, 0, 1), ConvexSet::ball(vec({0, 0}), 1.0)})};
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal(0.0, 3.0);
    const auto draw = [&] {
      Vector u(3);
      for (int k = 0; k < 3; ++k) u[k] = normal(rng);
      return u;
    };
    for (const auto& s : sets) {
      CAPTURE(s.describe());
      for (int t = 0; t < 200; ++t) {
        const Vector u = draw(), v = draw();
        const Vector pu = s.project(u), pv = s.project(v);
        CHECK(s.contains(pu, 1e-10));
        CHECK((pu - pv).norm() <= (u - v).norm() + 1e-12);
        CHECK((s.project(pu) - pu).norm() <= 1e-12);
      }
    }
  }

  TEST_CASE("box splits along blocks and projects blockwise") {
    const ConvexSet box = ConvexSet::box(vec({-1, -2, -3}), vec({1, 2, 3}));
    const auto parts = box.split({1, 2});
    REQUIRE(parts);
    const Vector u = vec({5, -5, 1});
    const Vector p = box.project(u);
    CHECK((*parts)[0].project(u.head(1))[0] == p[0]);
    CHECK(((*parts)[1].project(u.tail(2)) - p.tail(2)).norm() == 0.0);
    CHECK_FALSE(ConvexSet::ball(vec({0, 0, 0}), 1).split({1, 2}));
  }

  TEST_CASE("sampled feasible points are feasible") {
    for (const auto& id : {"P1", "P2", "P3"}) {
      const BenchmarkProblem b = make_benchmark(id);
      for (const auto& x : sample_feasible_points(b.problem, 20, 11)) {
        CHECK(max_constraint(b.problem, x) <= kFeasibilityTol);
        CHECK(b.problem.set.distance(x) <= kFeasibilityTol);
        CHECK(feasibility_residual(b.problem, x) <= 1e-12);
      }
    }
  }
}
