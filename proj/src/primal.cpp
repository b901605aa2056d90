#include "nova/primal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

namespace nova {

namespace {

// Single-block decomposition of block i with constraints g~^i_j - t_ij.
BlockDecomposition budget_block(const BlockDecomposition& d, int block, const Vector& t_i) {
  BlockDecomposition b;
  const Range r = d.layout.range(block);
  b.layout = BlockLayout::single(r.size);
  b.objective = {d.objective[block]};
  b.constraints.resize(1);
  for (int j = 0; j < d.m; ++j) b.constraints[0].push_back(d.constraints[block][j].plus_constant(-t_i[j]));
  b.sets = {d.sets[block]};
  b.anchor = d.layout.slice(d.anchor, block);
  b.strong_convexity = d.strong_convexity;
  b.m = d.m;
  return b;
}

// Minimum over K_i of sum_j max(0, g~^i_j - t_ij)^2. Zero (to rounding) iff
// the budget admits a point.
double budget_violation(const BlockDecomposition& b, const Vector& start, Vector* best) {
  const auto& cons = b.constraints[0];
  auto value = [&](const Vector& x) {
    double v = 0.0;
    for (const auto& g : cons) {
      const double e = std::max(0.0, g.value(x));
      v += e * e;
    }
    return v;
  };
  auto grad = [&](const Vector& x) {
    Vector out = Vector::Zero(x.size());
    for (const auto& g : cons) {
      const double e = g.value(x);
      if (e > 0) out += 2.0 * e * g.gradient(x);
    }
    return out;
  };
  auto project = [&](const Vector& x) { return b.sets[0].project(x); };
  if (value(start) == 0.0) {
    if (best) *best = start;
    return 0.0;
  }
  auto r = minimize_projected(value, grad, project, start, 1.0, 0.0, 1e-14, 5000);
  if (best) *best = r.x;
  double worst = 0.0;
  for (const auto& g : cons) worst = std::max(worst, g.value(r.x));
  return worst;
}


// Euclidean projection onto the probability simplex.
Vector project_simplex(const Vector& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double candidate = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - candidate > 0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

// Weights on the simplex minimizing tau/2 ||G w||^2 + err . w (the dual of
// the proximal bundle step).
Vector bundle_weights(const Matrix& G, const Vector& err, double tau) {
  const Eigen::Index k = G.cols();
  if (k == 1) return Vector::Ones(1);
  const Matrix gram = tau * (G.transpose() * G);
  auto value = [&](const Vector& w) { return 0.5 * w.dot(gram * w) + err.dot(w); };
  auto grad = [&](const Vector& w) { return Vector(gram * w + err); };
  const Vector w0 = Vector::Constant(k, 1.0 / static_cast<double>(k));
  return minimize_projected(value, grad, project_simplex, w0, gram.trace() + 1e-12, 0.0, 1e-14, 20000).x;
}

}  // namespace

BlockPrimalSolution block_subproblem(const BlockDecomposition& d, int block, const Vector& t_i, const DualOptions& opt,
                                     const Vector* warm_x, const Vector* warm_mu) {
  if (t_i.size() != d.m) throw InputError("slack vector has the wrong length");
  BlockDecomposition b = budget_block(d, block, t_i);
  const Vector start = warm_x ? *warm_x : b.anchor;
  if (d.m > 0) {
    Vector feasible;
    const double viol = budget_violation(b, start, &feasible);
    if (viol > opt.feas_tol)
      throw InfeasibilityError("block " + std::to_string(block) + " has no point within its slack budget (violation " +
                               std::to_string(viol) + ")");
  }
  // Augmented Lagrangian on the block budget; tiny blocks make each inner
  // minimization cheap and the multipliers come out sharp.
  const auto& cons = b.constraints[0];
  const Expr& obj = b.objective[0];
  const int m = d.m;
  Vector lambda = (warm_mu && warm_mu->size() == m) ? Vector(warm_mu->cwiseMax(0.0)) : Vector(Vector::Zero(m));
  double rho = 10.0;
  double prev_res = std::numeric_limits<double>::infinity();
  Vector x = start;
  int iterations = 0;
  const double feas = std::min(opt.feas_tol, 1e-10);
  auto shifted = [&](const Vector& z, Vector* gv) {
    Vector out(m);
    for (int j = 0; j < m; ++j) {
      const double gj = cons[j].value(z);
      if (gv) (*gv)[j] = gj;
      out[j] = std::max(0.0, lambda[j] + rho * gj);
    }
    return out;
  };
  auto value = [&](const Vector& z) {
    const Vector s = shifted(z, nullptr);
    return obj.value(z) + (s.squaredNorm() - lambda.squaredNorm()) / (2.0 * rho);
  };
  auto grad = [&](const Vector& z) {
    const Vector s = shifted(z, nullptr);
    Vector g = obj.gradient(z);
    for (int j = 0; j < m; ++j)
      if (s[j] > 0) g += s[j] * cons[j].gradient(z);
    return g;
  };
  auto project = [&](const Vector& z) { return b.sets[0].project(z); };
  bool done = m == 0;
  bool polish = false;
  for (int round = 0; round < 200 && !(done && round > 0); ++round) {
    // Loose inner solves while the multipliers are still far off.
    const double inner_tol = (m == 0 || polish) ? opt.block_tol : std::max(opt.block_tol, std::min(1e-4, 1e-2 * prev_res));
    const auto r = minimize_projected(value, grad, project, x, 1.0 + rho, d.strong_convexity, inner_tol,
                                      opt.block_max_iter);
    iterations += r.iterations;
    x = r.x;
    if (m == 0) break;
    Vector gx(m);
    const Vector next = shifted(x, &gx);
    const double res = (next - lambda).norm() / rho;
    lambda = next;
    if (lambda.maxCoeff() > opt.ceiling)
      throw InfeasibilityError("block " + std::to_string(block) + ": multipliers exceeded the ceiling");
    done = res <= opt.tol && gx.maxCoeff() <= feas && inner_tol <= opt.block_tol;
    polish = polish || res <= 10.0 * opt.tol;
    if (!done && res > 0.25 * prev_res) rho = std::min(rho * 10.0, 1e6);
    prev_res = res;
  }
  if (!done) throw ConvergenceError("block " + std::to_string(block) + " budget solve did not converge", x, prev_res);
  BlockPrimalSolution out;
  out.x = x;
  out.mu = lambda;
  out.objective = obj.value(x);
  out.iterations = iterations;
  return out;
}

std::vector<Vector> master_subgradient(const std::vector<BlockPrimalSolution>& blocks) {
  std::vector<Vector> g;
  g.reserve(blocks.size());
  for (const auto& b : blocks) g.push_back(-b.mu);
  return g;
}

std::vector<Vector> project_master(std::vector<Vector> t) {
  if (t.empty()) return t;
  const int m = static_cast<int>(t.front().size());
  const double count = static_cast<double>(t.size());
  for (int j = 0; j < m; ++j) {
    double sum = 0.0;
    for (const auto& ti : t) sum += ti[j];
    if (sum > 0) {
      const double shift = sum / count;
      for (auto& ti : t) ti[j] -= shift;
    }
  }
  return t;
}

const char* to_string(MasterStep s) { return s == MasterStep::kHarmonic ? "harmonic" : "bundle"; }

MasterStep parse_master_step(const std::string& s) {
  if (s == "bundle") return MasterStep::kBundle;
  if (s == "harmonic") return MasterStep::kHarmonic;
  throw ConfigError("unknown primal master step '" + s + "'");
}

PrimalResult primal_solve(const BlockDecomposition& d, const PrimalOptions& opt) {
  if (!(opt.beta0 > 0)) throw ParameterError("primal beta0 must be positive");
  if (!(opt.tol > 0)) throw ParameterError("primal tol must be positive");
  const int nb = d.blocks();
  const int m = d.m;
  using Sols = std::vector<BlockPrimalSolution>;

  auto solve_all = [&](const std::vector<Vector>& t, const Sols* warm) {
    Sols sols(nb);
    parallel_for(nb, [&](std::size_t i) {
      const Vector* wx = warm ? &(*warm)[i].x : nullptr;
      const Vector* wm = warm ? &(*warm)[i].mu : nullptr;
      sols[i] = block_subproblem(d, static_cast<int>(i), t[i], opt.block, wx, wm);
    });
    return sols;
  };
  auto assemble = [&](const Sols& sols) {
    std::vector<Vector> xs;
    for (const auto& s : sols) xs.push_back(s.x);
    return d.layout.concat(xs);
  };
  auto objective = [](const Sols& sols) {
    double v = 0.0;
    for (const auto& s : sols) v += s.objective;
    return v;
  };
  auto mean_mu = [&](const Sols& sols) {
    Vector mu = Vector::Zero(m);
    for (const auto& s : sols) mu += s.mu;
    return nb > 0 ? Vector(mu / nb) : mu;
  };

  int n = 0;  // master rounds after the initial allocation
  double best_obj = std::numeric_limits<double>::infinity();
  Sols best;
  std::vector<Vector> best_t;
  auto record = [&](const std::vector<Vector>& t, const Sols& sols) {
    const double obj = objective(sols);
    if (opt.observer) {
      const Vector x = assemble(sols);
      std::vector<Vector> xs;
      for (const auto& s : sols) xs.push_back(s.x);
      const Vector shared = dual_gradient(d, xs);
      PrimalRound pr;
      pr.round = n;
      pr.t = &t;
      pr.point = &x;
      pr.shared_values = &shared;
      for (const auto& s : sols) pr.block_iterations.push_back(s.iterations);
      pr.objective = obj;
      opt.observer(pr);
    }
    if (obj < best_obj) {
      best_obj = obj;
      best = sols;
      best_t = t;
    }
  };
  // One master round: every block solves for its budget. Empty when some
  // block cannot meet its budget or cannot be solved to tolerance for it
  // (budgets at the edge of a block's feasible range).
  auto evaluate = [&](const std::vector<Vector>& t, const Sols& warm) -> std::optional<Sols> {
    ++n;
    try {
      Sols sols = solve_all(t, &warm);
      record(t, sols);
      return sols;
    } catch (const InfeasibilityError&) {
      return std::nullopt;
    } catch (const ConvergenceError&) {
      return std::nullopt;
    }
  };

  // Feasible start: each block's budget is its own value at the anchor.
  std::vector<Vector> t(nb);
  for (int i = 0; i < nb; ++i) {
    t[i] = Vector(m);
    const Vector yi = d.layout.slice(d.anchor, i);
    for (int j = 0; j < m; ++j) t[i][j] = d.constraints[i][j].value(yi);
  }
  t = project_master(std::move(t));
  Sols sols = solve_all(t, nullptr);
  record(t, sols);

  bool converged = m == 0;
  if (!converged && opt.step == MasterStep::kHarmonic) {
    for (; !converged && n < opt.max_iter;) {
      double beta = opt.beta0 / (n + 1.0);
      const auto sub = master_subgradient(sols);
      std::optional<Sols> next;
      std::vector<Vector> cand;
      // Halve toward the previous allocation while some block is infeasible.
      for (int tries = 0; tries < 40 && !next && n < opt.max_iter; ++tries, beta *= 0.5) {
        cand.assign(nb, Vector());
        for (int i = 0; i < nb; ++i) cand[i] = t[i] - beta * sub[i];
        cand = project_master(std::move(cand));
        next = evaluate(cand, sols);
        if (next) break;
      }
      if (!next) break;
      double move = 0.0, norm = 0.0;
      for (int i = 0; i < nb; ++i) {
        move += (cand[i] - t[i]).squaredNorm();
        norm += t[i].squaredNorm();
      }
      t = std::move(cand);
      sols = std::move(*next);
      // Normalizing by the step keeps a halved step from reading as convergence.
      converged = std::sqrt(move) / beta <= opt.tol * (1.0 + std::sqrt(norm));
    }
  } else if (!converged) {
    const int dim = nb * m;
    auto flat = [&](const std::vector<Vector>& v) {
      Vector f(dim);
      for (int i = 0; i < nb; ++i) f.segment(i * m, m) = v[i];
      return f;
    };
    auto unflat = [&](const Vector& f) {
      std::vector<Vector> v(nb);
      for (int i = 0; i < nb; ++i) v[i] = f.segment(i * m, m);
      return v;
    };
    // Subgradient of the master restricted to {sum_i t_i = 0}.
    auto tangent = [&](const Sols& s) {
      const Vector mean = mean_mu(s);
      Vector g(dim);
      for (int i = 0; i < nb; ++i) g.segment(i * m, m) = mean - s[i].mu;
      return g;
    };

    // Spare budget never raises a block's cost: hand it out evenly.
    Vector x = flat(t);
    bool spare = false;
    for (int j = 0; j < m; ++j) {
      double sum = 0.0;
      for (int i = 0; i < nb; ++i) sum += t[i][j];
      if (sum < 0) {
        spare = true;
        for (int i = 0; i < nb; ++i) x[i * m + j] -= sum / nb;
      }
    }
    if (spare) {
      const auto full = unflat(x);
      auto s = evaluate(full, sols);
      if (s) {
        t = full;
        sols = std::move(*s);
      } else {
        x = flat(t);
      }
    }

    // Proximal bundle: cutting-plane model of the master plus a quadratic
    // term around the center x.
    struct Cut {
      Vector t, g;
      double f;
    };
    double f = objective(sols);
    std::vector<Cut> bundle{{x, tangent(sols), f}};
    const std::size_t bundle_cap = static_cast<std::size_t>(2 * dim + 4);
    double tau = opt.beta0;
    int nulls = 0;
    while (!converged && n < opt.max_iter) {
      const auto k = static_cast<Eigen::Index>(bundle.size());
      Matrix G(dim, k);
      Vector err(k);
      for (Eigen::Index c = 0; c < k; ++c) {
        const Cut& cut = bundle[static_cast<std::size_t>(c)];
        G.col(c) = cut.g;
        err[c] = std::max(0.0, f - cut.f - cut.g.dot(x - cut.t));
      }
      const Vector w = bundle_weights(G, err, tau);
      const Vector agg = G * w;
      const double agg_err = err.dot(w);
      const double predicted = tau * agg.squaredNorm() + agg_err;
      // The second test is the resolution of the block solves.
      if ((agg.norm() <= opt.tol && agg_err <= opt.tol) || predicted <= 1e-10 * (1.0 + std::abs(f))) {
        converged = true;
        break;
      }
      const Vector center = x;
      const double f_center = f;
      const Vector y = x - tau * agg;
      const auto ty = unflat(y);
      auto s = evaluate(ty, sols);
      if (!s) {
        tau *= 0.25;
        continue;
      }
      const double fy = objective(*s);
      const Cut fresh{y, tangent(*s), fy};
      if (fy <= f - 0.1 * predicted) {
        if (fy <= f - 0.5 * predicted) tau *= 2.0;
        x = y;
        t = ty;
        f = fy;
        sols = std::move(*s);
        nulls = 0;
      } else if (++nulls % 3 == 0) {
        tau *= 0.5;
      }
      // Keep cuts the model used, fold the rest into the aggregate.
      std::vector<Cut> kept;
      for (Eigen::Index c = 0; c < k; ++c)
        if (w[c] > 1e-12) kept.push_back(bundle[static_cast<std::size_t>(c)]);
      if (kept.size() + 2 > bundle_cap) {
        kept.clear();
        kept.push_back(Cut{center, agg, f_center - agg_err});
      }
      kept.push_back(fresh);
      bundle = std::move(kept);
    }
  }

  if (!converged) throw ConvergenceError("primal decomposition reached max_iter", assemble(best), best_obj);
  PrimalResult res;
  res.t = best_t;
  res.objective = best_obj;
  res.rounds = n;
  res.solution.point = assemble(best);
  res.solution.multipliers = mean_mu(best);
  res.solution.inner_iterations = n;
  std::vector<Vector> xs;
  for (const auto& s : best) xs.push_back(s.x);
  res.solution.primal_residual = m > 0 ? std::max(0.0, dual_gradient(d, xs).maxCoeff()) : 0.0;
  return res;
}

}  // namespace nova
