#pragma once

// Problem description: minimize U(x) subject to g_j(x) <= 0 and x in K.

#include "nova/convex_set.hpp"
#include "nova/expr.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nova {

struct Constraint {
  Expr g;
  /// Optional declared split g = plus - minus with both parts convex.
  std::optional<Expr> dc_plus;
  std::optional<Expr> dc_minus;
  std::string label;
};

struct ProblemSpec {
  std::string name;
  int dim = 0;
  Expr objective;
  std::vector<Constraint> constraints;
  ConvexSet set;
  std::optional<BlockLayout> blocks;
  std::optional<double> lipschitz_grad_U;
  /// Factors of U = f1 * f2 when the objective is declared as a product.
  std::optional<std::pair<Expr, Expr>> product_factors;

  int num_constraints() const { return static_cast<int>(constraints.size()); }
  /// The declared blocks, or one block spanning every coordinate.
  BlockLayout layout() const { return blocks ? *blocks : BlockLayout::single(dim); }
  /// Per-block sets; ConfigError if the set does not factor along the blocks.
  std::vector<ConvexSet> block_sets() const;
  /// Throws InputError on inconsistent dimensions.
  void validate() const;
};

/// max_j g_j(x); -inf when there are no constraints.
double max_constraint(const ProblemSpec& p, const Vector& x);
std::vector<double> constraint_values(const ProblemSpec& p, const Vector& x);

/// max(0, max_j g_j(x)) + ||x - P_K(x)||.
double feasibility_residual(const ProblemSpec& p, const Vector& x);

/// max_j g_j(x) <= kFeasibilityTol and ||x - P_K(x)|| <= kFeasibilityTol.
bool is_feasible(const ProblemSpec& p, const Vector& x);

/// Sampled difference quotients of grad U times a safety factor. Each sample
/// is paired with a second sample and with a small local perturbation.
double estimate_lipschitz_grad(const ProblemSpec& p, int samples, std::uint64_t seed,
                               double safety = 1.5);

struct GradientCheck {
  bool pass = true;
  double worst_relative_error = 0.0;
  std::string worst_function;  // "objective" or "constraint <j>"
  Vector worst_point;
};

/// Central finite differences (step h) of every oracle at `points` sampled
/// points of K; relative error is measured as ||g - fd|| / max(1, ||fd||).
GradientCheck check_gradients(const ProblemSpec& p, int points = 50, std::uint64_t seed = 0,
                              double h = 1e-6, double rel_tol = 1e-5);

/// True if a sampled point x of `set` (or one of the hints) has
/// max_j constraints_j(x) < -delta. False means "not verified".
bool slater_check(const std::vector<Expr>& constraints, const ConvexSet& set, int trials,
                  std::uint64_t seed = 0, const std::vector<Vector>& hints = {}, double delta = 1e-8);

/// Random points of K that are feasible for the problem (rejection sampling).
std::vector<Vector> sample_feasible_points(const ProblemSpec& p, int count, std::uint64_t seed,
                                           int max_draws = 1000000);

}  // namespace nova
