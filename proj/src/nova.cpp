#include "nova/nova.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace nova {

const char* to_string(StepSchedule::Kind k) {
  switch (k) {
    case StepSchedule::Kind::kConstant: return "constant";
    case StepSchedule::Kind::kDiminishingRecursive: return "diminishing-recursive";
    case StepSchedule::Kind::kDiminishingCustom: return "diminishing-custom";
  }
  return "constant";
}

StepSchedule::Kind parse_step_kind(const std::string& s) {
  if (s == "constant") return StepSchedule::Kind::kConstant;
  if (s == "diminishing-recursive" || s == "diminishing") return StepSchedule::Kind::kDiminishingRecursive;
  if (s == "diminishing-custom") return StepSchedule::Kind::kDiminishingCustom;
  throw ConfigError("unknown step schedule '" + s + "'");
}

const char* to_string(NovaStatus s) {
  switch (s) {
    case NovaStatus::kStationary: return "stationary";
    case NovaStatus::kMaxIter: return "max-iter";
    case NovaStatus::kInnerFailure: return "inner-failure";
  }
  return "max-iter";
}

StepSchedule StepSchedule::constant(double gamma, double gamma_max, double L_grad_U, double c_tilde) {
  StepSchedule s;
  s.kind = Kind::kConstant;
  s.gamma = gamma;
  s.gamma_max = gamma_max;
  s.L_grad_U = L_grad_U;
  s.c_tilde = c_tilde;
  s.validate();
  return s;
}

StepSchedule StepSchedule::diminishing(double gamma0, double eps) {
  StepSchedule s;
  s.kind = Kind::kDiminishingRecursive;
  s.gamma0 = gamma0;
  s.eps = eps;
  s.validate();
  return s;
}

StepSchedule StepSchedule::custom_rule(double gamma0, std::function<double(int, double)> rule) {
  StepSchedule s;
  s.kind = Kind::kDiminishingCustom;
  s.gamma0 = gamma0;
  s.custom = std::move(rule);
  s.validate();
  return s;
}

StepSchedule StepSchedule::harmonic(double gamma0, double eps) {
  if (!(eps > 0)) throw ParameterError("harmonic rule needs eps > 0");
  StepSchedule s = custom_rule(gamma0, [gamma0, eps](int nu, double) { return gamma0 / (1.0 + eps * nu); });
  s.eps = eps;
  s.custom_label = "harmonic";
  return s;
}

void StepSchedule::validate() const {
  switch (kind) {
    case Kind::kConstant: {
      if (!(gamma_max > 0 && gamma_max <= 1)) throw ParameterError("gamma_max must lie in (0, 1]");
      if (!(gamma > 0 && gamma <= gamma_max)) throw ParameterError("constant gamma must lie in (0, gamma_max]");
      if (!(L_grad_U > 0)) throw ParameterError("constant step needs L_grad_U > 0");
      if (!(c_tilde > 0)) throw ParameterError("constant step needs c_tilde > 0");
      if (!(2.0 * c_tilde > gamma_max * L_grad_U)) {
        std::ostringstream os;
        os << "constant step requires 2*c_tilde > gamma_max*L_grad_U, got 2*" << c_tilde << " = " << 2.0 * c_tilde
           << " <= " << gamma_max << "*" << L_grad_U << " = " << gamma_max * L_grad_U;
        throw ParameterError(os.str());
      }
      break;
    }
    case Kind::kDiminishingRecursive:
      if (!(gamma0 > 0 && gamma0 <= 1)) throw ParameterError("gamma0 must lie in (0, 1]");
      if (!(eps > 0 && eps < 1)) throw ParameterError("eps must lie in (0, 1)");
      break;
    case Kind::kDiminishingCustom:
      if (!(gamma0 > 0 && gamma0 <= 1)) throw ParameterError("gamma0 must lie in (0, 1]");
      if (!custom) throw ParameterError("diminishing-custom schedule needs a rule");
      break;
  }
}

double step_next(const StepSchedule& s, int nu, double prev_gamma) {
  switch (s.kind) {
    case StepSchedule::Kind::kConstant: return s.gamma;
    case StepSchedule::Kind::kDiminishingRecursive: return prev_gamma * (1.0 - s.eps * prev_gamma);
    case StepSchedule::Kind::kDiminishingCustom: {
      const double g = s.custom(nu, prev_gamma);
      if (!(g > 0 && g <= 1)) throw ParameterError("custom step rule produced gamma outside (0, 1]");
      return g;
    }
  }
  return prev_gamma;
}

DescentCheck descent_check(const Vector& grad_U_at_x, const Vector& xhat, const Vector& x, double c_tilde) {
  const Vector d = xhat - x;
  DescentCheck c;
  c.lhs = grad_U_at_x.dot(d);
  c.rhs = -c_tilde * d.squaredNorm();
  c.pass = c.lhs <= c.rhs + 1e-8 * (1.0 + std::abs(c.rhs));
  return c;
}

MonotonicityCheck monotonicity_check(const ConvergenceTrace& trace, const StepSchedule& s) {
  MonotonicityCheck out;
  if (s.kind != StepSchedule::Kind::kConstant) {
    out.skipped = true;
    return out;
  }
  const double g = s.gamma;
  for (std::size_t k = 0; k + 1 < trace.rows.size(); ++k) {
    const TraceRow& r = trace.rows[k];
    const double bound =
        r.U - g * (s.c_tilde - g * s.L_grad_U / 2.0) * r.bestresp_dist * r.bestresp_dist + 1e-7;
    const double excess = trace.rows[k + 1].U - bound;
    if (excess > out.worst || out.worst_row < 0) {
      if (excess > 0 || out.worst_row < 0) {
        out.worst = std::max(out.worst, excess);
        if (excess > 0) out.worst_row = static_cast<int>(k);
      }
    }
    if (excess > 0) out.pass = false;
  }
  return out;
}

InnerMethod effective_inner_method(const ProblemSpec& p, const NovaConfig& cfg) {
  if (cfg.inner.method) return *cfg.inner.method;
  return p.num_constraints() > 0 ? InnerMethod::kDualAscent : InnerMethod::kProjectedGradient;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Best multiplier certificate at x: the subproblem multipliers, or a
// least-squares refit on the original problem, whichever is smaller.
std::pair<Vector, double> certify(const ProblemSpec& p, const Vector& x, const Vector& mu_sub) {
  const int m = p.num_constraints();
  Vector mu = mu_sub.size() == m ? mu_sub : Vector::Zero(m);
  double best = kkt_residual_original(p, x, mu);
  if (m > 0) {
    std::vector<Vector> grads;
    std::vector<double> vals;
    for (const auto& c : p.constraints) {
      grads.push_back(c.g.gradient(x));
      vals.push_back(c.g.value(x));
    }
    const Vector fit = least_squares_multipliers(p.objective.gradient(x), grads, vals, p.set, x);
    const double r = kkt_residual_original(p, x, fit);
    if (r < best) {
      best = r;
      mu = fit;
    }
  }
  return {mu, best};
}

}  // namespace

NovaResult nova_run(const ProblemSpec& p, const SurrogateRecipe& recipe, const NovaConfig& cfg, const Vector& x0,
                    const NovaHooks& hooks) {
  p.validate();
  if (x0.size() != p.dim) throw InputError("x0 has the wrong dimension");
  const double res0 = feasibility_residual(p, x0);
  if (res0 > kFeasibilityTol)
    throw InputError("x0 is infeasible (feasibility residual " + std::to_string(res0) + ")");
  if (!(cfg.stop_tol > 0)) throw ParameterError("stop_tol must be positive");
  if (cfg.max_outer < 1) throw ParameterError("max_outer must be at least 1");

  NovaResult out;
  StepSchedule sched = cfg.step;
  // The constant rule is validated against the declared surrogate constant.
  {
    const SurrogateModel probe = build_surrogates(p, recipe, x0);
    out.c_tilde = probe.objective.strong_convexity;
  }
  if (sched.kind == StepSchedule::Kind::kConstant) {
    if (!(sched.c_tilde > 0)) sched.c_tilde = out.c_tilde;
    if (!(sched.L_grad_U > 0))
      sched.L_grad_U = p.lipschitz_grad_U ? *p.lipschitz_grad_U : estimate_lipschitz_grad(p, 2000, 0);
  }
  sched.validate();
  out.L_grad_U = sched.L_grad_U > 0 ? sched.L_grad_U : p.lipschitz_grad_U.value_or(0.0);

  const InnerMethod method = effective_inner_method(p, cfg);
  const int m = p.num_constraints();
  std::optional<Vector> warm_lambda;
  std::optional<std::vector<Vector>> warm_blocks;

  Vector x = x0;
  double gamma = sched.initial();
  out.iterates.push_back(x);
  out.set_residuals.push_back(p.set.distance(x));
  Vector last_mu = Vector::Zero(m);
  bool stopped = false;

  for (int nu = 0; nu < cfg.max_outer; ++nu) {
    const auto t0 = std::chrono::steady_clock::now();
    InnerSolution sol;
    try {
      const SurrogateModel model = build_surrogates(p, recipe, x);
      const Subproblem sub = make_subproblem(p, model);
      if (method == InnerMethod::kProjectedGradient) {
        sol = solve_subproblem(sub, method, cfg.inner.tol, cfg.inner.max_iter);
      } else {
        BlockDecomposition d;
        if (cfg.use_blocks) {
          try {
            d = sub.decompose();
          } catch (const ConfigError&) {
            if (method == InnerMethod::kPrimalDecomposition) throw;
            d = sub.centralized();
          }
        } else {
          d = sub.centralized();
        }
        DualOptions dopt;
        dopt.rule.kind = cfg.dual.rule;
        dopt.rule.alpha0 = cfg.dual.alpha0;
        if (dopt.rule.kind != DualStepRule::Kind::kSummableDiminishing && cfg.dual.alpha0 == 0.0) {
          const DualStepRule def = default_dual_rule(d);
          dopt.rule.L_dual = def.L_dual;
          dopt.rule.alpha0 = def.alpha0;
        } else if (d.m > 0 && d.constraint_lipschitz && *d.constraint_lipschitz > 0) {
          dopt.rule.L_dual = dual_lipschitz_constant(*d.constraint_lipschitz, d.m, d.strong_convexity);
        }
        if (dopt.rule.kind == DualStepRule::Kind::kBisection && d.m != 1)
          throw ConfigError("bisection dual rule requires exactly one constraint");
        dopt.tol = cfg.dual.tol;
        dopt.feas_tol = std::min(cfg.dual.tol, 1e-10);
        dopt.max_iter = cfg.dual.max_iter;
        if (method == InnerMethod::kDualAscent) {
          if (cfg.dual.warm_start) {
            dopt.lambda0 = warm_lambda;
            if (warm_blocks && static_cast<int>(warm_blocks->size()) == d.blocks()) dopt.warm_blocks = warm_blocks;
          }
          if (hooks.dual_round) dopt.observer = [&, nu](const DualRound& r) { hooks.dual_round(nu, r); };
          DualResult r = dual_solve(d, dopt);
          sol = r.solution;
          warm_lambda = r.state.lambda;
          warm_blocks = r.state.block_solutions;
        } else {
          PrimalOptions popt;
          popt.step = cfg.primal.step;
          popt.beta0 = cfg.primal.beta0;
          popt.tol = cfg.primal.tol;
          popt.max_iter = cfg.primal.max_iter;
          popt.block = dopt;
          if (hooks.primal_round) popt.observer = [&, nu](const PrimalRound& r) { hooks.primal_round(nu, r); };
          sol = primal_solve(d, popt).solution;
        }
      }
    } catch (const NovaError& e) {
      out.status = NovaStatus::kInnerFailure;
      out.message = std::string("outer iteration ") + std::to_string(nu) + ": " + e.what();
      stopped = true;
      break;
    }
    if (hooks.inner_done) hooks.inner_done(nu, sol);

    const Vector gradU = p.objective.gradient(x);
    const DescentCheck dc = descent_check(gradU, sol.point, x, out.c_tilde);
    const Vector mu = sol.multipliers.size() == m ? sol.multipliers : Vector::Zero(m);
    TraceRow row;
    row.nu = nu;
    row.U = p.objective.value(x);
    row.gamma = gamma;
    row.bestresp_dist = (sol.point - x).norm();
    row.max_g = max_constraint(p, x);
    row.descent_lhs = dc.lhs;
    row.descent_rhs = dc.rhs;
    row.kkt = kkt_residual_original(p, x, mu);
    row.inner_iters = sol.inner_iterations;
    row.wall_ms = cfg.record_wall_time ? elapsed_ms(t0) : 0.0;
    out.trace.rows.push_back(row);
    last_mu = mu;

    if (cfg.diagnostics.descent && !dc.pass) {
      std::ostringstream os;
      os << "descent inequality violated at nu=" << nu << " (lhs " << dc.lhs << ", rhs " << dc.rhs << ")";
      out.diagnostic_failures.push_back(os.str());
    }
    if (cfg.diagnostics.feasibility && !is_feasible(p, x)) {
      std::ostringstream os;
      os << "iterate " << nu << " infeasible (max g " << row.max_g << ", set distance " << p.set.distance(x) << ")";
      out.diagnostic_failures.push_back(os.str());
    }

    if (row.bestresp_dist <= cfg.stop_tol) {
      out.status = NovaStatus::kStationary;
      stopped = true;
      break;
    }
    x = x + gamma * (sol.point - x);
    out.iterates.push_back(x);
    out.set_residuals.push_back(p.set.distance(x));
    gamma = step_next(sched, nu + 1, gamma);
  }
  if (!stopped) out.status = NovaStatus::kMaxIter;

  out.x = x;
  auto [mu, kkt] = certify(p, x, last_mu);
  out.multipliers = mu;
  out.final_kkt = kkt;

  if (cfg.diagnostics.monotonicity) {
    const MonotonicityCheck mc = monotonicity_check(out.trace, sched);
    if (!mc.skipped && !mc.pass) {
      std::ostringstream os;
      os << "monotone decrease bound violated at row " << mc.worst_row << " by " << mc.worst;
      out.diagnostic_failures.push_back(os.str());
    }
  }
  return out;
}

}  // namespace nova
