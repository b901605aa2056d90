#pragma once

// Convex approximations of the objective and constraints around an anchor y.
//
// Objective surrogates must be strongly convex and gradient-consistent at y.
// Constraint surrogates must be convex, tangent to g_j at y (value and
// gradient) and upper-bound g_j on K; the upper bound is what keeps every
// iterate feasible.

#include "nova/problem.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nova {

struct SurrogateObjective {
  Vector anchor;
  Expr value;
  double strong_convexity = 0.0;
  bool separable = false;
  /// Local-coordinate pieces summing to `value`, one per block.
  std::optional<std::vector<Expr>> per_block;
  std::string kind;
};

struct SurrogateConstraint {
  Vector anchor;
  Expr value;
  std::optional<std::vector<Expr>> per_block;
  /// Lipschitz constant of the surrogate itself on K, when bounded.
  std::optional<double> lipschitz;
  std::string kind;
};

// ---- constraint builders ----

/// g(y) + grad g(y)^T (x - y) + (L/2) ||x - y||^2.
SurrogateConstraint lipschitz_quadratic_surrogate(const Expr& g, double L, const Vector& y);

/// plus(x) - minus(y) - grad minus(y)^T (x - y).
SurrogateConstraint dc_linearize(const Expr& plus, const Expr& minus, const Vector& y);

/// (g + b/2 ||x||^2, b/2 ||x||^2) for a curvature bound b.
std::pair<Expr, Expr> hessian_shift_dc_split(const Expr& g, double curvature_bound);

/// Surrogate of sign * x_i1 * x_i2 via x_i1 x_i2 = 1/2 (x_i1 + x_i2)^2 - 1/2 (x_i1^2 + x_i2^2).
SurrogateConstraint bilinear_surrogate(int i1, int i2, const Vector& y, int sign);

/// Splits g into convex parts using term curvature tags and builtin dc parts.
/// ConfigError if some term has unknown curvature and no builtin split.
std::pair<Expr, Expr> dc_decompose(const Expr& g);

/// Upper bound on sup_{x in set} ||grad f(x)||. Exact for a convex,
/// coordinate-separable f on a box (the bound is attained at the ends of each
/// interval); otherwise ||grad f(y)|| + smoothness * sup ||x - y||.
/// nullopt when neither applies.
std::optional<double> gradient_bound_on_set(const Expr& f, const ConvexSet& set, const Vector& y);

// ---- objective builders ----

/// Per-block options shared by the block-convex and sum-utility builders.
struct BlockRegularization {
  /// tau_i; one entry is broadcast to every block.
  std::vector<double> tau{1.0};
  /// Optional H_i; identity when empty.
  std::vector<Matrix> H;
  /// Declared uniform positive-definiteness floor of each H_i.
  std::vector<double> H_floor;
  /// Declared strong-convexity modulus of the block function itself.
  std::vector<double> strong_modulus;
};

SurrogateObjective proximal_linear_objective(const Expr& U, const BlockLayout& layout,
                                             const std::vector<double>& tau, const Vector& y);

/// Sum over blocks of U(x_i, y_-i) + tau_i/2 (x_i - y_i)^T H_i (x_i - y_i).
/// With joint = true: U(x) + sum tau_i/2 ||x_i - y_i||^2 (U jointly convex).
SurrogateObjective block_convex_objective(const Expr& U, const BlockLayout& layout,
                                          const BlockRegularization& reg, const Vector& y, bool joint = false);

/// utilities[j] are the f_j with U = sum f_j; convex_sets[i] lists the j kept
/// exactly in block i, the rest are linearized.
SurrogateObjective sum_utility_objective(const std::vector<Expr>& utilities, const BlockLayout& layout,
                                         const std::vector<std::vector<int>>& convex_sets,
                                         const BlockRegularization& reg, const Vector& y);

enum class ProductCase { kConvexPositive, kPositive, kGeneral };

struct ProductOptions {
  ProductCase kind = ProductCase::kConvexPositive;
  double tau = 1.0;
  std::optional<Matrix> H;
  double H_floor = 1.0;
  double strong_modulus = 0.0;
  /// Inner surrogates of the factors (positive and general cases).
  std::function<SurrogateObjective(const Expr&, const Vector&)> factor1;
  std::function<SurrogateObjective(const Expr&, const Vector&)> factor2;
};

SurrogateObjective product_objective(const Expr& f1, const Expr& f2, const ProductOptions& opt, const Vector& y,
                                     const BlockLayout& layout);

// ---- verification ----

struct SurrogateCheck {
  std::string name;
  bool pass = true;
  double worst = 0.0;  // worst violation magnitude (<= 0 means none)
};

struct SurrogateReport {
  std::vector<SurrogateCheck> checks;
  bool pass() const;
  const SurrogateCheck* find(const std::string& name) const;
  std::string summary() const;
};

/// C2, C5, C1 (midpoint convexity), C3 (upper bound) and block separability.
/// Half the samples are drawn from K, half near the anchor.
SurrogateReport verify_constraint_surrogate(const Expr& g, const SurrogateConstraint& s, const ConvexSet& set,
                                            int samples, std::uint64_t seed,
                                            const std::optional<BlockLayout>& layout = std::nullopt);

/// B2 and B1 (monotone-gradient strong convexity), plus separability.
SurrogateReport verify_objective_surrogate(const Expr& U, const SurrogateObjective& s, const ConvexSet& set,
                                           int samples, std::uint64_t seed,
                                           const std::optional<BlockLayout>& layout = std::nullopt);

// ---- recipes ----

struct ConstraintRecipe {
  std::string kind = "dc";  // dc | lipschitz | bilinear | identity-convex
  std::optional<double> L;
  std::optional<double> curvature_bound;
};

struct ObjectiveRecipe {
  std::string kind = "proximal";  // proximal | block-convex | sum-utility | product
  std::vector<double> tau{1.0};
  std::vector<double> strong_modulus;
  bool joint = false;
  /// sum-utility: objective term indices kept exactly, per block.
  std::vector<std::vector<int>> convex_sets;
  /// product: convex-positive | positive | general.
  std::string product_case = "convex-positive";
  /// product: inner surrogate of each factor, identity | proximal.
  std::string factor_kind = "proximal";
};

struct SurrogateRecipe {
  ObjectiveRecipe objective;
  /// One per constraint; a single entry is broadcast to every constraint.
  std::vector<ConstraintRecipe> constraints;
};

struct SurrogateModel {
  SurrogateObjective objective;
  std::vector<SurrogateConstraint> constraints;
};

/// Builds every surrogate at anchor y. Throws InputError if y is infeasible
/// (residual above kFeasibilityTol) and ConfigError for unusable recipes.
SurrogateModel build_surrogates(const ProblemSpec& p, const SurrogateRecipe& recipe, const Vector& y,
                                bool check_anchor = true);

/// Constraint surrogate for one recipe entry.
SurrogateConstraint build_constraint_surrogate(const ProblemSpec& p, int j, const ConstraintRecipe& r,
                                               const Vector& y);

}  // namespace nova
