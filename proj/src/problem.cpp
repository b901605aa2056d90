#include "nova/problem.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nova {

std::vector<ConvexSet> ProblemSpec::block_sets() const {
  const BlockLayout l = layout();
  auto parts = set.split(l.sizes());
  if (!parts) throw ConfigError("convex set " + set.describe() + " does not factor along the block partition");
  return *parts;
}

void ProblemSpec::validate() const {
  if (dim <= 0) throw InputError("problem dimension must be positive");
  if (objective.dim() != dim) throw InputError("objective dimension does not match the problem");
  if (set.dim() != dim) throw InputError("convex set dimension does not match the problem");
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    const auto& c = constraints[j];
    if (c.g.dim() != dim) throw InputError("constraint " + std::to_string(j) + " has the wrong dimension");
    if (c.dc_plus.has_value() != c.dc_minus.has_value())
      throw InputError("constraint " + std::to_string(j) + ": dc split needs both parts");
  }
  if (blocks && blocks->dim() != dim) throw InputError("block sizes do not sum to the problem dimension");
  if (lipschitz_grad_U && !(*lipschitz_grad_U > 0)) throw ParameterError("lipschitz_grad_U must be positive");
}

double max_constraint(const ProblemSpec& p, const Vector& x) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& c : p.constraints) m = std::max(m, c.g.value(x));
  return m;
}

std::vector<double> constraint_values(const ProblemSpec& p, const Vector& x) {
  std::vector<double> v;
  v.reserve(p.constraints.size());
  for (const auto& c : p.constraints) v.push_back(c.g.value(x));
  return v;
}

double feasibility_residual(const ProblemSpec& p, const Vector& x) {
  if (x.size() != p.dim)
    throw InputError("point of size " + std::to_string(x.size()) + " for a problem of dimension " +
                     std::to_string(p.dim));
  return std::max(0.0, max_constraint(p, x)) + p.set.distance(x);
}

bool is_feasible(const ProblemSpec& p, const Vector& x) {
  return max_constraint(p, x) <= kFeasibilityTol && p.set.distance(x) <= kFeasibilityTol;
}

double estimate_lipschitz_grad(const ProblemSpec& p, int samples, std::uint64_t seed, double safety) {
  if (samples < 1) throw ParameterError("estimate_lipschitz_grad needs at least one sample");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double best = 0.0;
  auto ratio = [&](const Vector& u, const Vector& v) {
    const double d = (u - v).norm();
    if (d < 1e-12) return;
    best = std::max(best, (p.objective.gradient(u) - p.objective.gradient(v)).norm() / d);
  };
  for (int s = 0; s < samples; ++s) {
    Vector u, v;
    try {
      u = p.set.sample(rng);
      v = p.set.sample(rng);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("set sampler failed: ") + e.what());
    }
    ratio(u, v);
    Vector dir(p.dim);
    for (int k = 0; k < p.dim; ++k) dir[k] = gauss(rng);
    ratio(u, p.set.project(u + 1e-4 * dir / std::max(dir.norm(), 1e-300)));
  }
  return safety * best;
}

GradientCheck check_gradients(const ProblemSpec& p, int points, std::uint64_t seed, double h, double rel_tol) {
  GradientCheck out;
  std::mt19937_64 rng(seed);
  auto check = [&](const Expr& f, const Vector& x, const std::string& label) {
    const Vector g = f.gradient(x);
    Vector fd(x.size());
    for (int k = 0; k < x.size(); ++k) {
      Vector xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      fd[k] = (f.value(xp) - f.value(xm)) / (2 * h);
    }
    const double err = (g - fd).norm() / std::max(1.0, fd.norm());
    if (err > out.worst_relative_error) {
      out.worst_relative_error = err;
      out.worst_function = label;
      out.worst_point = x;
    }
  };
  for (int s = 0; s < points; ++s) {
    const Vector x = p.set.sample(rng);
    check(p.objective, x, "objective");
    for (std::size_t j = 0; j < p.constraints.size(); ++j)
      check(p.constraints[j].g, x, "constraint " + std::to_string(j));
  }
  out.pass = out.worst_relative_error <= rel_tol;
  return out;
}

bool slater_check(const std::vector<Expr>& constraints, const ConvexSet& set, int trials, std::uint64_t seed,
                  const std::vector<Vector>& hints, double delta) {
  auto strictly_feasible = [&](const Vector& x) {
    if (!set.contains(x, 0.0)) return false;
    for (const auto& g : constraints)
      if (!(g.value(x) < -delta)) return false;
    return true;
  };
  for (const auto& h : hints)
    if (strictly_feasible(h)) return true;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < trials; ++t)
    if (strictly_feasible(set.sample(rng))) return true;
  return false;
}

std::vector<Vector> sample_feasible_points(const ProblemSpec& p, int count, std::uint64_t seed, int max_draws) {
  std::mt19937_64 rng(seed);
  std::vector<Vector> out;
  for (int d = 0; d < max_draws && static_cast<int>(out.size()) < count; ++d) {
    Vector x = p.set.sample(rng);
    if (is_feasible(p, x)) out.push_back(std::move(x));
  }
  if (static_cast<int>(out.size()) < count)
    throw ConfigError("could not sample " + std::to_string(count) + " feasible points for " + p.name);
  return out;
}

}  // namespace nova
