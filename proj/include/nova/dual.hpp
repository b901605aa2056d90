#pragma once

// Dual decomposition of a block-separable subproblem: blocks minimize their
// Lagrangian pieces independently, the multipliers follow projected ascent.

#include "nova/inner.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace nova {

struct DualStepRule {
  enum class Kind { kConstantRange, kSummableDiminishing, kBisection };
  Kind kind = Kind::kConstantRange;
  /// Constant-range: the step (0 means 1 / L_dual). Summable: alpha0 / (n + 1).
  double alpha0 = 0.0;
  std::optional<double> L_dual;

  /// Step for round n. ParameterError when a constant step leaves (0, 2/L).
  double step(int n) const;
  void validate() const;
};

const char* to_string(DualStepRule::Kind k);
DualStepRule::Kind parse_dual_rule(const std::string& s);

struct DualState {
  Vector lambda;
  double alpha = 0.0;
  std::vector<Vector> block_solutions;
  Vector dual_grad;
  double dual_value = 0.0;
  std::vector<int> block_iterations;
  double block_residual = 0.0;  // worst block stationarity residual
};

/// One evaluation of the dual function; round 0 is the initial multiplier.
struct DualRound {
  int round = 0;
  const DualState* state = nullptr;
};

struct DualOptions {
  DualStepRule rule;
  /// Stop when ||lambda' - lambda|| / alpha <= tol ...
  double tol = 1e-8;
  /// ... and the recovered point violates the constraints by at most feas_tol.
  double feas_tol = 1e-10;
  int max_iter = 100000;
  double block_tol = 1e-12;
  int block_max_iter = 20000;
  double ceiling = 1e8;
  std::optional<Vector> lambda0;
  std::optional<std::vector<Vector>> warm_blocks;
  std::function<void(const DualRound&)> observer;
};

struct DualResult {
  InnerSolution solution;
  DualState state;
  int rounds = 0;
};

/// argmin over K_i of U~_i + lambda^T g~^i, to gradient-mapping tolerance tol.
Vector block_lagrangian_min(const BlockDecomposition& d, int block, const Vector& lambda, double tol,
                            int max_iter = 20000, const Vector* warm = nullptr, int* iterations = nullptr,
                            double* residual = nullptr);

/// Solves every block (in parallel) and aggregates in block order.
DualState evaluate_dual(const BlockDecomposition& d, const Vector& lambda, double block_tol,
                        const std::vector<Vector>* warm = nullptr, int block_max_iter = 20000);

/// sum_i [U~_i(x_i) + lambda^T g~^i(x_i)].
double dual_value(const BlockDecomposition& d, const std::vector<Vector>& xs, const Vector& lambda);
/// sum_i g~^i(x_i).
Vector dual_gradient(const BlockDecomposition& d, const std::vector<Vector>& xs);

/// L^2 sqrt(m) / c.
double dual_lipschitz_constant(double L_gtilde, int m, double c_tilde);

/// [lambda + alpha * grad]_+.
Vector multiplier_update(const Vector& lambda, double alpha, const Vector& grad);

/// Projected dual ascent (or bisection when m = 1 and requested).
/// ConvergenceError at max_iter; InfeasibilityError when ||lambda||_inf
/// exceeds the ceiling.
DualResult dual_solve(const BlockDecomposition& d, const DualOptions& opt);
InnerSolution dual_solve(const Subproblem& s, const DualOptions& opt);

/// The default rule for a decomposition: constant 1 / L_dual when the
/// constraint Lipschitz constant is known, otherwise `fallback_alpha`.
DualStepRule default_dual_rule(const BlockDecomposition& d, double fallback_alpha = 1.0);

}  // namespace nova
