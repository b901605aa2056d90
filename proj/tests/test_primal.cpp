#include "doctest.h"
#include "support.hpp"

#include <random>

using namespace nova;
using namespace nova::testing;

namespace {

// 1/2 (x - 3)^2 with g~(x) = x on [0, 10].
BlockDecomposition shifted_block() {
  return make_subproblem(Expr(1, terms::sq_dist(vec({3}), 0.5)), 1.0, {Expr(1, terms::linear(vec({1}), vec({0})))},
                         ConvexSet::box(1, 0, 10), vec({0}), BlockLayout::single(1))
      .decompose();
}

DualOptions tight() {
  DualOptions o;
  o.tol = 1e-11;
  o.feas_tol = 1e-11;
  o.rule.alpha0 = 1.0;
  return o;
}

BlockPrimalSolution with_mu(std::initializer_list<double> mu) {
  BlockPrimalSolution s;
  s.mu = vec(mu);
  return s;
}

double master_sum(const std::vector<Vector>& t, int j) {
  double s = 0.0;
  for (const auto& ti : t) s += ti[j];
  return s;
}

}  // namespace

TEST_SUITE("primal") {
  TEST_CASE("block subproblem") {
    const BlockDecomposition d = shifted_block();
    SUBCASE("huge budget leaves the constraint inactive") {
      const BlockPrimalSolution s = block_subproblem(d, 0, vec({1e6}), tight());
      CHECK(s.x[0] == doctest::Approx(3.0));
      CHECK(s.mu[0] == 0.0);
    }
    SUBCASE("budget 2 binds with multiplier 1") {
      const BlockPrimalSolution s = block_subproblem(d, 0, vec({2}), tight());
      CHECK(s.x[0] == doctest::Approx(2.0).epsilon(1e-9));
      CHECK(s.mu[0] == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(s.x[0] <= 2.0 + 1e-8);
      CHECK(std::abs(s.mu[0] * (s.x[0] - 2.0)) <= 1e-6);
    }
    SUBCASE("budget touching the unconstrained minimizer") {
      const BlockPrimalSolution s = block_subproblem(d, 0, vec({3}), tight());
      CHECK(s.x[0] == doctest::Approx(3.0).epsilon(1e-9));
      CHECK(s.mu[0] == doctest::Approx(0.0).epsilon(1e-6));
    }
    SUBCASE("an impossible budget names the block") {
      CHECK_THROWS_WITH_AS(block_subproblem(d, 0, vec({-1}), tight()), doctest::Contains("block 0"),
                           InfeasibilityError);
    }
  }

  TEST_CASE("master subgradient") {
    const auto zero = master_subgradient({with_mu({0}), with_mu({0})});
    CHECK(zero[0][0] == 0.0);
    CHECK(zero[1][0] == 0.0);
    CHECK(master_subgradient({with_mu({1})})[0][0] == -1.0);
    const auto two = master_subgradient({with_mu({2}), with_mu({0})});
    CHECK(two[0][0] == -2.0);
    CHECK(two[1][0] == 0.0);
    // A step along -subgradient moves budget toward block 1 and away from block 2 after projection.
    std::vector<Vector> t{vec({0}), vec({0})};
    for (int i = 0; i < 2; ++i) t[i] -= 0.5 * two[i];
    t = project_master(t);
    CHECK(t[0][0] > 0.0);
    CHECK(t[1][0] < 0.0);
  }

  TEST_CASE("projection onto the master set") {
    auto a = project_master({vec({1}), vec({1})});
    CHECK(a[0][0] == 0.0);
    CHECK(a[1][0] == 0.0);
    auto b = project_master({vec({3}), vec({0}), vec({0})});
    CHECK(b[0][0] == 2.0);
    CHECK(b[1][0] == -1.0);
    CHECK(b[2][0] == -1.0);
    const std::vector<Vector> inside{vec({-1, 0.5}), vec({0.5, -2})};
    const auto c = project_master(inside);
    for (int i = 0; i < 2; ++i) CHECK(c[i] == inside[i]);
  }

  TEST_CASE("master projection is idempotent and non-expansive") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 2.0);
    const auto draw = [&] {
      std::vector<Vector> t(4, Vector(2));
      for (auto& ti : t)
        for (int j = 0; j < 2; ++j) ti[j] = n(rng);
      return t;
    };
    const auto dist = [](const std::vector<Vector>& a, const std::vector<Vector>& b) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
      return std::sqrt(s);
    };
    for (int k = 0; k < 200; ++k) {
      const auto u = draw(), v = draw();
      const auto pu = project_master(u), pv = project_master(v);
      CHECK(dist(project_master(pu), pu) <= 1e-15);
      CHECK(dist(pu, pv) <= dist(u, v) + 1e-12);
      for (int j = 0; j < 2; ++j) CHECK(master_sum(pu, j) <= 1e-12);
    }
  }

  TEST_CASE("no shared constraints: one round of block minimization") {
    const Expr U(2, terms::sq_dist(vec({1, -2}), 1.0));
    const auto d =
        make_subproblem(U, 2.0, {}, ConvexSet::box(2, -1, 1), vec({0, 0}), BlockLayout({1, 1})).decompose();
    const PrimalResult r = primal_solve(d, PrimalOptions{});
    CHECK(r.rounds == 0);
    CHECK((r.solution.point - vec({1, -1})).norm() <= 1e-10);
  }

  TEST_CASE("P3: every master round is feasible and the result matches the dual optimum") {
    const BenchmarkProblem b = make_benchmark("P3");
    for (const Vector& y : sample_feasible_points(b.problem, 3, 50)) {
      const Subproblem s = make_subproblem(b.problem, build_surrogates(b.problem, b.recipe, y));
      const BlockDecomposition d = s.decompose();
      REQUIRE(d.blocks() == 4);

      DualOptions dopt;
      dopt.rule = default_dual_rule(d);
      const DualResult dual = dual_solve(d, dopt);
      const double dual_opt = s.objective_value(dual.solution.point);

      PrimalOptions popt;
      popt.block.rule.alpha0 = 1.0;
      int rounds = 0;
      bool first = true;
      popt.observer = [&](const PrimalRound& r) {
        ++rounds;
        for (int j = 0; j < d.m; ++j) {
          CHECK(master_sum(*r.t, j) <= 1e-12);
          CHECK((*r.shared_values)[j] <= 1e-9);
          CHECK((*r.shared_values)[j] <= master_sum(*r.t, j) + 1e-8 * d.blocks());
        }
        CHECK(s.max_constraint(*r.point) <= 1e-9);
        if (first) {
          // Initial budgets come from the anchor: their sum is g(y) <= 0 when the anchor budget is feasible.
          for (int j = 0; j < d.m; ++j)
            CHECK(master_sum(*r.t, j) == doctest::Approx(std::min(0.0, b.problem.constraints[j].g.value(y))));
          first = false;
        }
      };
      const PrimalResult p = primal_solve(d, popt);
      CHECK(rounds >= 1);
      CHECK(std::abs(p.objective - dual_opt) <= 1e-3);
    }
  }

  TEST_CASE("both master rules split a shared budget evenly") {
    // min 1/2 (x1 - 3)^2 + 1/2 (x2 - 3)^2 s.t. x1 + x2 <= 2: x = (1, 1), value 4, multiplier 2.
    const Expr U(2, terms::sq_dist(vec({3, 3}), 0.5));
    const Expr g(2, terms::linear(vec({1, 1}), vec({1, 1})));
    const auto d = make_subproblem(U, 1.0, {g}, ConvexSet::box(2, -5, 5), vec({1, 1}), BlockLayout({1, 1})).decompose();
    for (MasterStep step : {MasterStep::kBundle, MasterStep::kHarmonic}) {
      CAPTURE(std::string(to_string(step)));
      PrimalOptions o;
      o.step = step;
      o.max_iter = 20000;
      const PrimalResult r = primal_solve(d, o);
      CHECK(r.objective == doctest::Approx(4.0).epsilon(1e-4));
      CHECK((r.solution.point - vec({1, 1})).norm() <= 1e-3);
      CHECK(r.solution.multipliers[0] == doctest::Approx(2.0).epsilon(1e-3));
    }
    CHECK(parse_master_step("bundle") == MasterStep::kBundle);
    CHECK(parse_master_step("harmonic") == MasterStep::kHarmonic);
    CHECK_THROWS_AS(parse_master_step("newton"), ConfigError);
  }

  TEST_CASE("beta0 must be positive") {
    PrimalOptions o;
    o.beta0 = 0.0;
    CHECK_THROWS_AS(primal_solve(shifted_block(), o), ParameterError);
  }
}
