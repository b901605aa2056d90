#pragma once

// Strongly convex subproblems: minimize U~(x; y) s.t. g~_j(x; y) <= 0, x in K.

#include "nova/problem.hpp"
#include "nova/surrogates.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nova {

/// Block-separable view of a subproblem, in local block coordinates.
struct BlockDecomposition {
  BlockLayout layout;
  std::vector<Expr> objective;                 // [block]
  std::vector<std::vector<Expr>> constraints;  // [block][constraint]
  std::vector<ConvexSet> sets;                 // [block]
  Vector anchor;
  double strong_convexity = 0.0;
  /// Lipschitz constant of the constraint map (g~_1, ..., g~_m) on K.
  std::optional<double> constraint_lipschitz;
  int m = 0;

  int blocks() const { return layout.count(); }
};

struct Subproblem {
  SurrogateObjective objective;
  std::vector<SurrogateConstraint> constraints;
  ConvexSet set;
  Vector anchor;
  /// Block partition used by the distributed solvers.
  std::optional<BlockLayout> layout;

  int dim() const { return static_cast<int>(anchor.size()); }
  int m() const { return static_cast<int>(constraints.size()); }
  double objective_value(const Vector& x) const { return objective.value.value(x); }
  /// max_j g~_j(x); -inf when m = 0.
  double max_constraint(const Vector& x) const;
  std::vector<Expr> constraint_exprs() const;

  /// Decomposition along `layout`; ConfigError naming the first surrogate
  /// that does not separate.
  BlockDecomposition decompose() const;
  /// Single-block decomposition of the same subproblem.
  BlockDecomposition centralized() const;
};

/// Subproblem of `p` at anchor y built from surrogates.
Subproblem make_subproblem(const ProblemSpec& p, const SurrogateModel& model);

/// Subproblem from raw convex functions; per-block pieces are derived by
/// splitting the expressions along `layout` when given.
Subproblem make_subproblem(const Expr& objective, double strong_convexity, const std::vector<Expr>& constraints,
                           const ConvexSet& set, const Vector& anchor,
                           const std::optional<BlockLayout>& layout = std::nullopt);

/// sup-bound of ||grad f|| on `set` from the gradient at y and the smoothness.
std::optional<double> lipschitz_on_set(const Expr& f, const ConvexSet& set, const Vector& y);

struct InnerSolution {
  Vector point;
  Vector multipliers;
  int inner_iterations = 0;
  double primal_residual = 0.0;
  double stationarity_residual = 0.0;
};

enum class InnerMethod { kProjectedGradient, kDualAscent, kPrimalDecomposition };

const char* to_string(InnerMethod m);
InnerMethod parse_inner_method(const std::string& s);

// ---- projected gradient ----

struct ProjectedGradientResult {
  Vector x;
  int iterations = 0;
  /// Gradient-mapping norm ||x - P(x - g/L)|| * L at the returned point.
  double residual = 0.0;
  bool converged = false;
};

/// Accelerated projected gradient with backtracking and function-value
/// restart. `curvature` is an initial Lipschitz guess for the gradient,
/// `modulus` a known strong-convexity constant (0 if none).
ProjectedGradientResult minimize_projected(const std::function<double(const Vector&)>& value,
                                           const std::function<Vector(const Vector&)>& gradient,
                                           const std::function<Vector(const Vector&)>& project, Vector x0,
                                           double curvature, double modulus, double tol, int max_iter);

// ---- subproblem solves ----

/// Solves the subproblem centrally (one block). ConvergenceError when the
/// budget runs out; InfeasibilityError when the multipliers diverge.
InnerSolution solve_subproblem(const Subproblem& s, InnerMethod method, double tol, int max_iter);

/// argmin over the subproblem's feasible set of 1/2 ||x - u||^2.
Vector projection_onto_sublevel(const Subproblem& s, const Vector& u, double tol, Vector* multipliers = nullptr);

/// ||x - P_K(x - grad U - sum mu_j grad g_j)|| + sum max(0, -mu_j) + sum |mu_j g_j(x)|.
double kkt_residual_original(const ProblemSpec& p, const Vector& x, const Vector& mu);

/// Nonnegative least-squares multipliers for constraints with value >= -active_tol,
/// fitted on the coordinates not pinned at a bound of a box set.
Vector least_squares_multipliers(const Vector& grad_objective, const std::vector<Vector>& constraint_grads,
                                 const std::vector<double>& constraint_values, const ConvexSet& set,
                                 const Vector& x, double active_tol = 1e-7);

}  // namespace nova
