#include "nova/inner.hpp"

#include "nova/dual.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cfloat>
#include <cmath>

namespace nova {

double Subproblem::max_constraint(const Vector& x) const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& c : constraints) m = std::max(m, c.value.value(x));
  return m;
}

std::vector<Expr> Subproblem::constraint_exprs() const {
  std::vector<Expr> out;
  for (const auto& c : constraints) out.push_back(c.value);
  return out;
}

namespace {

std::optional<double> combined_lipschitz(const std::vector<SurrogateConstraint>& cons) {
  double s = 0.0;
  for (const auto& c : cons) {
    if (!c.lipschitz) return std::nullopt;
    s += *c.lipschitz * *c.lipschitz;
  }
  return std::sqrt(s);
}

}  // namespace

BlockDecomposition Subproblem::centralized() const {
  BlockDecomposition d;
  d.layout = BlockLayout::single(dim());
  d.objective = {objective.value};
  d.constraints.resize(1);
  for (const auto& c : constraints) d.constraints[0].push_back(c.value);
  d.sets = {set};
  d.anchor = anchor;
  d.strong_convexity = objective.strong_convexity;
  d.constraint_lipschitz = combined_lipschitz(constraints);
  d.m = m();
  return d;
}

BlockDecomposition Subproblem::decompose() const {
  if (!layout || layout->count() <= 1) return centralized();
  const BlockLayout& l = *layout;
  const int nb = l.count();
  BlockDecomposition d;
  d.layout = l;
  auto obj = objective.per_block;
  if (!obj || static_cast<int>(obj->size()) != nb) obj = objective.value.split(l);
  if (!obj) throw ConfigError("objective surrogate '" + objective.kind + "' is not separable across the blocks");
  d.objective = *obj;
  d.constraints.assign(nb, {});
  for (int j = 0; j < m(); ++j) {
    auto parts = constraints[j].per_block;
    if (!parts || static_cast<int>(parts->size()) != nb) parts = constraints[j].value.split(l);
    if (!parts)
      throw ConfigError("constraint surrogate " + std::to_string(j) + " ('" + constraints[j].kind +
                        "') is not separable across the blocks");
    for (int i = 0; i < nb; ++i) d.constraints[i].push_back((*parts)[i]);
  }
  auto sets = set.split(l.sizes());
  if (!sets) throw ConfigError("convex set " + set.describe() + " is not a Cartesian product over the blocks");
  d.sets = *sets;
  d.anchor = anchor;
  d.strong_convexity = objective.strong_convexity;
  d.constraint_lipschitz = combined_lipschitz(constraints);
  d.m = m();
  return d;
}

std::optional<double> lipschitz_on_set(const Expr& f, const ConvexSet& set, const Vector& y) {
  return gradient_bound_on_set(f, set, y);
}

Subproblem make_subproblem(const ProblemSpec& p, const SurrogateModel& model) {
  Subproblem s;
  s.objective = model.objective;
  s.constraints = model.constraints;
  s.set = p.set;
  s.anchor = model.objective.anchor;
  if (p.blocks && p.blocks->count() > 1) s.layout = p.blocks;
  return s;
}

Subproblem make_subproblem(const Expr& objective, double strong_convexity, const std::vector<Expr>& constraints,
                           const ConvexSet& set, const Vector& anchor, const std::optional<BlockLayout>& layout) {
  if (!(strong_convexity > 0)) throw ParameterError("subproblem objective must be strongly convex (c > 0)");
  Subproblem s;
  s.objective = {anchor, objective, strong_convexity, false, std::nullopt, "given"};
  if (layout && layout->count() > 1) {
    s.objective.per_block = objective.split(*layout);
    s.objective.separable = s.objective.per_block.has_value();
  }
  for (const auto& g : constraints) {
    SurrogateConstraint c{anchor, g, std::nullopt, lipschitz_on_set(g, set, anchor), "given"};
    if (layout && layout->count() > 1) c.per_block = g.split(*layout);
    s.constraints.push_back(std::move(c));
  }
  s.set = set;
  s.anchor = anchor;
  s.layout = layout;
  return s;
}

const char* to_string(InnerMethod m) {
  switch (m) {
    case InnerMethod::kProjectedGradient: return "projected-gradient";
    case InnerMethod::kDualAscent: return "dual-ascent";
    case InnerMethod::kPrimalDecomposition: return "primal-decomposition";
  }
  return "dual-ascent";
}

InnerMethod parse_inner_method(const std::string& s) {
  if (s == "projected-gradient") return InnerMethod::kProjectedGradient;
  if (s == "dual-ascent") return InnerMethod::kDualAscent;
  if (s == "primal-decomposition") return InnerMethod::kPrimalDecomposition;
  throw ConfigError("unknown inner method '" + s + "'");
}

ProjectedGradientResult minimize_projected(const std::function<double(const Vector&)>& value,
                                           const std::function<Vector(const Vector&)>& gradient,
                                           const std::function<Vector(const Vector&)>& project, Vector x0,
                                           double curvature, double modulus, double tol, int max_iter) {
  double L = (std::isfinite(curvature) && curvature > 0) ? curvature : 1.0;
  ProjectedGradientResult out;
  Vector x = project(x0);
  Vector gx = gradient(x);
  double fx = value(x);
  auto mapping = [&](const Vector& z, const Vector& gz) { return L * (z - project(z - gz / L)).norm(); };
  out.residual = mapping(x, gx);
  if (out.residual <= tol) {
    out.x = std::move(x);
    out.converged = true;
    return out;
  }
  Vector y = x, gy = gx, x_prev = x;
  double fy = fx, f_prev = fx, t = 1.0;
  Vector best_x = x;
  double best_res = out.residual;
  for (int k = 1; k <= max_iter; ++k) {
    Vector z, gz, d;
    double fz = 0.0;
    for (int bt = 0; bt < 80; ++bt) {
      z = project(y - gy / L);
      d = z - y;
      fz = value(z);
      gz = gradient(z);
      const double dd = d.squaredNorm();
      const double slack = 8.0 * DBL_EPSILON * (std::abs(fy) + std::abs(fz) + 1.0);
      // Near the optimum the value test is lost in rounding; the curvature
      // test along d keeps L from collapsing there.
      const bool value_ok = fz <= fy + gy.dot(d) + 0.5 * L * dd + slack;
      const bool grad_ok = d.dot(gz - gy) <= L * dd;
      if (value_ok && grad_ok) break;
      L *= 2.0;
    }
    out.iterations = k;
    const double res = mapping(z, gz);
    if (res <= tol) {
      out.residual = res;
      out.x = std::move(z);
      out.converged = true;
      return out;
    }
    if (res < best_res) {
      best_res = res;
      best_x = z;
    }
    if (fz > f_prev) {
      // Restart: drop momentum.
      t = 1.0;
      y = z;
      gy = gz;
      fy = fz;
    } else {
      double beta;
      if (modulus > 0 && modulus < L) {
        const double q = std::sqrt(modulus / L);
        beta = (1.0 - q) / (1.0 + q);
      } else {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        beta = (t - 1.0) / t_next;
        t = t_next;
      }
      y = z + beta * (z - x_prev);
      if (beta == 0.0) {
        gy = gz;
        fy = fz;
      } else {
        y = project(y);
        gy = gradient(y);
        fy = value(y);
      }
    }
    x_prev = z;
    f_prev = fz;
    L = std::max(L / 1.1, 1e-12);
  }
  out.x = std::move(best_x);
  out.residual = best_res;
  return out;
}

Vector least_squares_multipliers(const Vector& grad_objective, const std::vector<Vector>& constraint_grads,
                                 const std::vector<double>& constraint_values, const ConvexSet& set,
                                 const Vector& x, double active_tol) {
  const int m = static_cast<int>(constraint_grads.size());
  Vector mu = Vector::Zero(m);
  std::vector<int> active;
  for (int j = 0; j < m; ++j)
    if (constraint_values[j] >= -active_tol) active.push_back(j);
  std::vector<int> free;
  const bool boxed = set.kind() == SetKind::kBox || set.kind() == SetKind::kNonnegOrthant;
  for (int k = 0; k < x.size(); ++k) {
    if (boxed && (std::abs(x[k] - set.lower()[k]) <= 1e-9 || std::abs(x[k] - set.upper()[k]) <= 1e-9)) continue;
    free.push_back(k);
  }
  if (active.empty() || free.empty()) return mu;
  // Active-set NNLS: drop the most negative coefficient until all are >= 0.
  while (!active.empty()) {
    Matrix G(free.size(), active.size());
    Vector rhs(free.size());
    for (std::size_t r = 0; r < free.size(); ++r) {
      rhs[r] = -grad_objective[free[r]];
      for (std::size_t c = 0; c < active.size(); ++c) G(r, c) = constraint_grads[active[c]][free[r]];
    }
    const Vector sol = G.completeOrthogonalDecomposition().solve(rhs);
    int worst = -1;
    for (int c = 0; c < sol.size(); ++c)
      if (sol[c] < 0 && (worst < 0 || sol[c] < sol[worst])) worst = c;
    if (worst < 0) {
      for (std::size_t c = 0; c < active.size(); ++c) mu[active[c]] = sol[c];
      return mu;
    }
    active.erase(active.begin() + worst);
  }
  return mu;
}

double kkt_residual_original(const ProblemSpec& p, const Vector& x, const Vector& mu) {
  if (x.size() != p.dim) throw InputError("kkt residual: point has the wrong dimension");
  if (mu.size() != p.num_constraints()) throw InputError("kkt residual: multiplier vector has the wrong length");
  Vector lag = p.objective.gradient(x);
  double sign = 0.0, comp = 0.0;
  for (int j = 0; j < p.num_constraints(); ++j) {
    lag += mu[j] * p.constraints[j].g.gradient(x);
    sign += std::max(0.0, -mu[j]);
    comp += std::abs(mu[j] * p.constraints[j].g.value(x));
  }
  return (x - p.set.project(x - lag)).norm() + sign + comp;
}

Vector projection_onto_sublevel(const Subproblem& s, const Vector& u, double tol, Vector* multipliers) {
  if (u.size() != s.dim()) throw InputError("projection: point has the wrong dimension");
  if (s.m() == 0) {
    if (multipliers) *multipliers = Vector();
    return s.set.project(u);
  }
  Subproblem proj = s;
  proj.objective = {s.anchor, Expr(s.dim(), terms::sq_dist(u, 0.5)), 1.0, false, std::nullopt, "distance"};
  proj.layout.reset();
  DualOptions opt;
  opt.tol = tol;
  opt.feas_tol = std::min(tol, 1e-10);
  opt.rule = default_dual_rule(proj.centralized());
  InnerSolution sol = dual_solve(proj, opt);
  if (multipliers) *multipliers = sol.multipliers;
  return sol.point;
}

InnerSolution solve_subproblem(const Subproblem& s, InnerMethod method, double tol, int max_iter) {
  const Expr& f = s.objective.value;
  const double c = s.objective.strong_convexity;
  if (!(c > 0)) throw ParameterError("subproblem objective must be strongly convex");
  if (method == InnerMethod::kDualAscent || method == InnerMethod::kPrimalDecomposition) {
    const BlockDecomposition d = s.centralized();
    DualOptions opt;
    opt.tol = tol;
    opt.feas_tol = std::min(tol, 1e-10);
    opt.max_iter = max_iter;
    opt.rule = default_dual_rule(d);
    return dual_solve(d, opt).solution;
  }

  auto value = [&](const Vector& x) { return f.value(x); };
  auto grad = [&](const Vector& x) { return f.gradient(x); };
  InnerSolution out;
  if (s.m() == 0) {
    auto project = [&](const Vector& x) { return s.set.project(x); };
    auto r = minimize_projected(value, grad, project, s.anchor, f.smoothness(), c, tol, max_iter);
    if (!r.converged)
      throw ConvergenceError("projected gradient did not reach tolerance", r.x, r.residual);
    out.point = r.x;
    out.multipliers = Vector();
    out.inner_iterations = r.iterations;
    out.stationarity_residual = r.residual;
    return out;
  }

  // Projected gradient over X(y): each projection is itself a dual solve.
  double Lhat = f.smoothness();
  if (!std::isfinite(Lhat)) {
    const Vector g0 = f.gradient(s.anchor);
    Vector probe = s.anchor;
    probe.array() += 1e-4;
    Lhat = std::max(c, (f.gradient(probe) - g0).norm() / (probe - s.anchor).norm());
  }
  const double rho = 1.0 / (c + Lhat);
  const double proj_tol = std::min(1e-12, 1e-2 * tol * rho);
  Vector x = s.anchor;
  double step = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < max_iter; ++it) {
    const Vector next = projection_onto_sublevel(s, x - rho * f.gradient(x), proj_tol);
    step = (next - x).norm() / rho;
    x = next;
    if (step <= tol) break;
  }
  if (step > tol) throw ConvergenceError("projected gradient over the surrogate set did not converge", x, step);
  std::vector<Vector> grads;
  std::vector<double> vals;
  for (const auto& g : s.constraints) {
    grads.push_back(g.value.gradient(x));
    vals.push_back(g.value.value(x));
  }
  out.point = x;
  out.multipliers = least_squares_multipliers(f.gradient(x), grads, vals, s.set, x);
  out.inner_iterations = it + 1;
  out.primal_residual = std::max(0.0, s.max_constraint(x));
  out.stationarity_residual = step;
  return out;
}

}  // namespace nova
