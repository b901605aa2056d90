#pragma once

// Outer loop: solve the convex subproblem at x, then move a fraction gamma
// of the way toward its solution. Every iterate stays feasible.

#include "nova/dual.hpp"
#include "nova/primal.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nova {

struct StepSchedule {
  enum class Kind { kConstant, kDiminishingRecursive, kDiminishingCustom };
  Kind kind = Kind::kDiminishingRecursive;
  double gamma = 0.5;      // constant step
  double gamma_max = 1.0;  // constant: admissible upper bound
  double gamma0 = 1.0;     // diminishing: first step
  double eps = 0.1;        // diminishing-recursive: decay
  double L_grad_U = 0.0;   // constant: Lipschitz constant of grad U
  double c_tilde = 0.0;    // constant: strong convexity of the objective surrogate
  /// diminishing-custom: gamma^nu from (nu, gamma^{nu-1}).
  std::function<double(int, double)> custom;
  /// Name of a built-in custom rule ("harmonic": gamma0 / (1 + eps nu)); empty
  /// for user-supplied functions.
  std::string custom_label;

  static StepSchedule constant(double gamma, double gamma_max, double L_grad_U, double c_tilde);
  static StepSchedule diminishing(double gamma0, double eps);
  static StepSchedule custom_rule(double gamma0, std::function<double(int, double)> rule);
  static StepSchedule harmonic(double gamma0, double eps);

  double initial() const { return kind == Kind::kConstant ? gamma : gamma0; }
  /// ParameterError on out-of-range values; for the constant rule this
  /// includes the requirement 2 c_tilde > gamma_max L_grad_U.
  void validate() const;
};

const char* to_string(StepSchedule::Kind k);
StepSchedule::Kind parse_step_kind(const std::string& s);

/// gamma^{nu} given gamma^{nu-1}.
double step_next(const StepSchedule& s, int nu, double prev_gamma);

struct DiagnosticsFlags {
  bool descent = true;
  bool feasibility = true;
  bool monotonicity = true;
};

struct InnerConfig {
  /// nullopt: dual-ascent when there are constraints, projected gradient otherwise.
  std::optional<InnerMethod> method;
  double tol = 1e-8;
  int max_iter = 100000;
};

struct DualConfig {
  DualStepRule::Kind rule = DualStepRule::Kind::kConstantRange;
  double alpha0 = 0.0;  // 0: 1 / L_dual
  double tol = 1e-8;
  int max_iter = 100000;
  bool warm_start = true;
};

struct PrimalConfig {
  MasterStep step = MasterStep::kBundle;
  double beta0 = 1.0;
  double tol = 1e-6;
  int max_iter = 5000;
};

struct NovaConfig {
  StepSchedule step;
  double stop_tol = 1e-6;
  int max_outer = 1000;
  DiagnosticsFlags diagnostics;
  InnerConfig inner;
  DualConfig dual;
  PrimalConfig primal;
  /// Solve the subproblem block by block when the surrogates separate.
  bool use_blocks = true;
  /// Fill wall_ms in the trace. Off by default so traces are reproducible.
  bool record_wall_time = false;
};

struct TraceRow {
  int nu = 0;
  double U = 0.0;
  double gamma = 0.0;
  double bestresp_dist = 0.0;
  double max_g = 0.0;
  double descent_lhs = 0.0;
  double descent_rhs = 0.0;
  double kkt = 0.0;
  int inner_iters = 0;
  double wall_ms = 0.0;

  bool operator==(const TraceRow&) const = default;
};

struct ConvergenceTrace {
  std::vector<TraceRow> rows;
  bool operator==(const ConvergenceTrace&) const = default;
};

enum class NovaStatus { kStationary, kMaxIter, kInnerFailure };
const char* to_string(NovaStatus s);

struct NovaResult {
  Vector x;
  Vector multipliers;
  ConvergenceTrace trace;
  /// x^0, x^1, ...; the last entry is the returned point.
  std::vector<Vector> iterates;
  /// Set-distance of each iterate (same indexing as iterates).
  std::vector<double> set_residuals;
  NovaStatus status = NovaStatus::kMaxIter;
  double final_kkt = 0.0;
  double c_tilde = 0.0;
  double L_grad_U = 0.0;
  std::vector<std::string> diagnostic_failures;
  std::string message;
};

/// Callbacks into the inner solvers, used by the simulation harness.
struct NovaHooks {
  std::function<void(int nu, const DualRound&)> dual_round;
  std::function<void(int nu, const PrimalRound&)> primal_round;
  std::function<void(int nu, const InnerSolution&)> inner_done;
};

/// Runs the outer loop from a feasible x0. InputError if x0 is infeasible;
/// ParameterError if the step schedule is invalid. Inner failures end the
/// run with status kInnerFailure and the partial trace.
NovaResult nova_run(const ProblemSpec& p, const SurrogateRecipe& recipe, const NovaConfig& cfg, const Vector& x0,
                    const NovaHooks& hooks = {});

struct DescentCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = true;
};

/// lhs = grad U(x)^T (xhat - x), rhs = -c ||xhat - x||^2,
/// pass iff lhs <= rhs + 1e-8 (1 + |rhs|).
DescentCheck descent_check(const Vector& grad_U_at_x, const Vector& xhat, const Vector& x, double c_tilde);

struct MonotonicityCheck {
  bool pass = true;
  bool skipped = false;
  double worst = 0.0;  // largest excess over the bound
  int worst_row = -1;
};

/// Per-row bound U(x^{nu+1}) <= U(x^nu) - gamma (c - gamma L / 2) d_nu^2 + 1e-7.
/// Skipped for diminishing schedules.
MonotonicityCheck monotonicity_check(const ConvergenceTrace& trace, const StepSchedule& schedule);

/// The solver used for a given problem/config pair.
InnerMethod effective_inner_method(const ProblemSpec& p, const NovaConfig& cfg);

}  // namespace nova
