#include "nova/dual.hpp"

#include <algorithm>
#include <cmath>

namespace nova {

const char* to_string(DualStepRule::Kind k) {
  switch (k) {
    case DualStepRule::Kind::kConstantRange: return "constant-range";
    case DualStepRule::Kind::kSummableDiminishing: return "summable-diminishing";
    case DualStepRule::Kind::kBisection: return "bisection";
  }
  return "constant-range";
}

DualStepRule::Kind parse_dual_rule(const std::string& s) {
  if (s == "constant-range") return DualStepRule::Kind::kConstantRange;
  if (s == "summable-diminishing") return DualStepRule::Kind::kSummableDiminishing;
  if (s == "bisection") return DualStepRule::Kind::kBisection;
  throw ConfigError("unknown dual step rule '" + s + "'");
}

void DualStepRule::validate() const {
  if (alpha0 < 0) throw ParameterError("dual alpha0 must be positive");
  if (L_dual && !(*L_dual > 0)) throw ParameterError("dual Lipschitz constant must be positive");
  switch (kind) {
    case Kind::kConstantRange:
      if (alpha0 == 0.0 && !L_dual) throw ParameterError("constant-range dual step needs alpha0 or L_dual");
      if (alpha0 > 0 && L_dual && !(alpha0 < 2.0 / *L_dual))
        throw ParameterError("constant dual step must satisfy alpha < 2 / L_dual (alpha = " + std::to_string(alpha0) +
                             ", 2/L = " + std::to_string(2.0 / *L_dual) + ")");
      break;
    case Kind::kSummableDiminishing:
      if (!(alpha0 > 0)) throw ParameterError("summable-diminishing dual step needs alpha0 > 0");
      break;
    case Kind::kBisection:
      break;
  }
}

double DualStepRule::step(int n) const {
  switch (kind) {
    case Kind::kConstantRange:
      return alpha0 > 0 ? alpha0 : 1.0 / *L_dual;
    case Kind::kSummableDiminishing:
      return alpha0 / (n + 1.0);
    case Kind::kBisection:
      return alpha0 > 0 ? alpha0 : (L_dual ? 1.0 / *L_dual : 1.0);
  }
  return alpha0;
}

double dual_lipschitz_constant(double L_gtilde, int m, double c_tilde) {
  if (!(L_gtilde > 0) || m <= 0 || !(c_tilde > 0))
    throw ParameterError("dual Lipschitz constant needs L > 0, m > 0, c > 0");
  return L_gtilde * L_gtilde * std::sqrt(static_cast<double>(m)) / c_tilde;
}

Vector multiplier_update(const Vector& lambda, double alpha, const Vector& grad) {
  return (lambda + alpha * grad).cwiseMax(0.0);
}

DualStepRule default_dual_rule(const BlockDecomposition& d, double fallback_alpha) {
  DualStepRule r;
  if (d.m > 0 && d.constraint_lipschitz && *d.constraint_lipschitz > 0) {
    r.L_dual = dual_lipschitz_constant(*d.constraint_lipschitz, d.m, d.strong_convexity);
  } else {
    r.alpha0 = fallback_alpha;
  }
  return r;
}

Vector block_lagrangian_min(const BlockDecomposition& d, int block, const Vector& lambda, double tol, int max_iter,
                            const Vector* warm, int* iterations, double* residual) {
  const Expr& f = d.objective.at(block);
  const auto& cons = d.constraints.at(block);
  const ConvexSet& set = d.sets.at(block);
  if (lambda.size() != d.m) throw InputError("multiplier vector has the wrong length");
  auto value = [&](const Vector& x) {
    double v = f.value(x);
    for (int j = 0; j < d.m; ++j)
      if (lambda[j] != 0.0) v += lambda[j] * cons[j].value(x);
    return v;
  };
  Vector gj;
  auto grad = [&](const Vector& x) {
    Vector g = f.gradient(x);
    for (int j = 0; j < d.m; ++j)
      if (lambda[j] != 0.0) {
        gj.setZero(x.size());
        cons[j].add_gradient(x, gj);
        g += lambda[j] * gj;
      }
    return g;
  };
  double curv = f.smoothness();
  for (int j = 0; j < d.m; ++j) curv += lambda[j] * cons[j].smoothness();
  const Vector x0 = warm ? *warm : d.layout.slice(d.anchor, block);
  auto project = [&](const Vector& x) { return set.project(x); };
  auto r = minimize_projected(value, grad, project, x0, curv, d.strong_convexity, tol, max_iter);
  if (iterations) *iterations = r.iterations;
  if (residual) *residual = r.residual;
  if (!r.converged && r.residual > 1e3 * tol)
    throw ConvergenceError("block " + std::to_string(block) + " Lagrangian minimization did not converge", r.x,
                           r.residual);
  return r.x;
}

double dual_value(const BlockDecomposition& d, const std::vector<Vector>& xs, const Vector& lambda) {
  double v = 0.0;
  for (int i = 0; i < d.blocks(); ++i) {
    v += d.objective[i].value(xs[i]);
    for (int j = 0; j < d.m; ++j) v += lambda[j] * d.constraints[i][j].value(xs[i]);
  }
  return v;
}

Vector dual_gradient(const BlockDecomposition& d, const std::vector<Vector>& xs) {
  Vector g = Vector::Zero(d.m);
  for (int i = 0; i < d.blocks(); ++i)
    for (int j = 0; j < d.m; ++j) g[j] += d.constraints[i][j].value(xs[i]);
  return g;
}

DualState evaluate_dual(const BlockDecomposition& d, const Vector& lambda, double block_tol,
                        const std::vector<Vector>* warm, int block_max_iter) {
  const int nb = d.blocks();
  DualState s;
  s.lambda = lambda;
  s.block_solutions.resize(nb);
  s.block_iterations.assign(nb, 0);
  std::vector<double> res(nb, 0.0);
  parallel_for(nb, [&](std::size_t i) {
    const Vector* w = warm ? &(*warm)[i] : nullptr;
    s.block_solutions[i] = block_lagrangian_min(d, static_cast<int>(i), lambda, block_tol, block_max_iter, w,
                                                &s.block_iterations[i], &res[i]);
  });
  s.dual_grad = dual_gradient(d, s.block_solutions);
  s.dual_value = dual_value(d, s.block_solutions, lambda);
  s.block_residual = *std::max_element(res.begin(), res.end());
  return s;
}

namespace {

InnerSolution assemble(const BlockDecomposition& d, const DualState& s, int rounds) {
  InnerSolution out;
  out.point = d.layout.concat(s.block_solutions);
  out.multipliers = s.lambda;
  out.inner_iterations = rounds;
  out.primal_residual = d.m > 0 ? std::max(0.0, s.dual_grad.maxCoeff()) : 0.0;
  out.stationarity_residual = s.block_residual;
  return out;
}

DualResult bisection_solve(const BlockDecomposition& d, const DualOptions& opt) {
  DualResult res;
  int rounds = 0;
  auto eval = [&](double lam, const std::vector<Vector>* warm) {
    DualState s = evaluate_dual(d, Vector::Constant(1, lam), opt.block_tol, warm, opt.block_max_iter);
    if (opt.observer) opt.observer({rounds, &s});
    ++rounds;
    return s;
  };
  DualState lo = eval(0.0, opt.warm_blocks ? &*opt.warm_blocks : nullptr);
  if (lo.dual_grad[0] <= opt.feas_tol) {
    res.state = lo;
    res.rounds = rounds;
    res.solution = assemble(d, lo, rounds);
    return res;
  }
  double lam_lo = 0.0;
  double lam_hi = opt.lambda0 && (*opt.lambda0)[0] > 0 ? (*opt.lambda0)[0] : 1.0;
  DualState hi = eval(lam_hi, &lo.block_solutions);
  while (hi.dual_grad[0] > 0) {
    lam_lo = lam_hi;
    lo = hi;
    lam_hi *= 2.0;
    if (lam_hi > opt.ceiling) throw InfeasibilityError("multiplier exceeded the ceiling during bisection bracketing");
    hi = eval(lam_hi, &lo.block_solutions);
  }
  // Invariant: g(lam_lo) > 0 >= g(lam_hi); keep the feasible side.
  for (int it = 0; it < opt.max_iter; ++it) {
    const double gap = lam_hi - lam_lo;
    // x(lam_hi) is feasible; stop once it is also (nearly) active.
    if (-hi.dual_grad[0] <= opt.feas_tol || gap <= 1e-15 * (1.0 + lam_hi)) break;
    const double mid = 0.5 * (lam_lo + lam_hi);
    DualState s = eval(mid, &hi.block_solutions);
    if (s.dual_grad[0] > 0) {
      lam_lo = mid;
      lo = std::move(s);
    } else {
      lam_hi = mid;
      hi = std::move(s);
    }
  }
  res.state = hi;
  res.state.alpha = lam_hi - lam_lo;
  res.rounds = rounds;
  res.solution = assemble(d, hi, rounds);
  return res;
}

}  // namespace

DualResult dual_solve(const BlockDecomposition& d, const DualOptions& opt) {
  if (!(opt.tol > 0)) throw ParameterError("dual tolerance must be positive");
  if (d.m == 0) {
    DualResult r;
    r.state = evaluate_dual(d, Vector(), opt.block_tol, opt.warm_blocks ? &*opt.warm_blocks : nullptr,
                            opt.block_max_iter);
    if (opt.observer) opt.observer({0, &r.state});
    r.solution = assemble(d, r.state, 0);
    return r;
  }
  if (opt.rule.kind == DualStepRule::Kind::kBisection) {
    if (d.m != 1) throw ConfigError("bisection dual rule requires exactly one shared constraint");
    return bisection_solve(d, opt);
  }
  opt.rule.validate();

  Vector lambda = opt.lambda0 ? *opt.lambda0 : Vector::Zero(d.m);
  if (lambda.size() != d.m) throw InputError("initial multipliers have the wrong length");
  lambda = lambda.cwiseMax(0.0);
  DualState state =
      evaluate_dual(d, lambda, opt.block_tol, opt.warm_blocks ? &*opt.warm_blocks : nullptr, opt.block_max_iter);
  if (opt.observer) opt.observer({0, &state});
  // Shrinks the step when the dual value drops; only triggers when no
  // Lipschitz bound was available to size the step.
  double shrink = 1.0;
  for (int n = 0; n < opt.max_iter; ++n) {
    const double alpha = opt.rule.step(n) * shrink;
    state.alpha = alpha;
    const Vector next = multiplier_update(lambda, alpha, state.dual_grad);
    const double move = (next - lambda).norm() / alpha;
    const double infeas = std::max(0.0, state.dual_grad.maxCoeff());
    if (move <= opt.tol && infeas <= opt.feas_tol) {
      DualResult r;
      r.rounds = n;
      r.solution = assemble(d, state, n);
      r.state = std::move(state);
      return r;
    }
    if (next.lpNorm<Eigen::Infinity>() > opt.ceiling)
      throw InfeasibilityError("dual multipliers exceeded " + std::to_string(opt.ceiling) +
                               "; the subproblem looks infeasible");
    DualState trial = evaluate_dual(d, next, opt.block_tol, &state.block_solutions, opt.block_max_iter);
    if (!opt.rule.L_dual && opt.rule.kind == DualStepRule::Kind::kConstantRange &&
        trial.dual_value < state.dual_value - 1e-12 * (1.0 + std::abs(state.dual_value)) && shrink > 1e-12) {
      shrink *= 0.5;
      --n;
      continue;
    }
    lambda = next;
    state = std::move(trial);
    state.alpha = alpha;
    if (opt.observer) opt.observer({n + 1, &state});
  }
  const InnerSolution partial = assemble(d, state, opt.max_iter);
  throw ConvergenceError("dual ascent reached max_iter", partial.point,
                         (multiplier_update(lambda, state.alpha, state.dual_grad) - lambda).norm() / state.alpha);
}

InnerSolution dual_solve(const Subproblem& s, const DualOptions& opt) {
  const BlockDecomposition d = s.decompose();
  DualOptions o = opt;
  if (o.rule.kind == DualStepRule::Kind::kConstantRange && o.rule.alpha0 == 0.0 && !o.rule.L_dual)
    o.rule = default_dual_rule(d);
  return dual_solve(d, o).solution;
}

}  // namespace nova
