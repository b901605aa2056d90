#include "nova/surrogates.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace nova {

namespace {

Vector zeros(int n) { return Vector::Zero(n); }

std::vector<double> broadcast(const std::vector<double>& v, int count, double fallback, const char* what) {
  if (v.empty()) return std::vector<double>(count, fallback);
  if (v.size() == 1) return std::vector<double>(count, v.front());
  if (static_cast<int>(v.size()) != count)
    throw ConfigError(std::string(what) + " needs one entry or one per block");
  return v;
}

std::optional<std::vector<Expr>> try_split(const Expr& e, const BlockLayout& layout) {
  if (layout.count() <= 1) return std::vector<Expr>{e};
  return e.split(layout);
}

double min_eigenvalue(const Matrix& H) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (H + H.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void check_anchor_size(const Expr& f, const Vector& y) {
  if (y.size() != f.dim()) throw InputError("anchor has the wrong dimension");
}

}  // namespace

SurrogateConstraint lipschitz_quadratic_surrogate(const Expr& g, double L, const Vector& y) {
  if (!(L > 0)) throw ParameterError("Lipschitz surrogate needs L > 0");
  check_anchor_size(g, y);
  const int n = g.dim();
  Expr v(n, terms::linear(g.gradient(y), y, g.value(y)));
  v += Expr(n, terms::sq_dist(y, 0.5 * L));
  return {y, v, std::nullopt, std::nullopt, "lipschitz"};
}

SurrogateConstraint dc_linearize(const Expr& plus, const Expr& minus, const Vector& y) {
  check_anchor_size(plus, y);
  const int n = plus.dim();
  Expr v = plus;
  if (!minus.empty()) v += Expr(n, terms::linear(-minus.gradient(y), y, -minus.value(y)));
  return {y, v, std::nullopt, std::nullopt, "dc"};
}

std::pair<Expr, Expr> hessian_shift_dc_split(const Expr& g, double curvature_bound) {
  if (!(curvature_bound > 0)) throw ParameterError("curvature bound must be positive");
  const int n = g.dim();
  Expr shift(n, terms::sq_dist(zeros(n), 0.5 * curvature_bound));
  return {g + shift, shift};
}

SurrogateConstraint bilinear_surrogate(int i1, int i2, const Vector& y, int sign) {
  if (i1 == i2) throw ParameterError("bilinear surrogate needs two distinct coordinates");
  if (sign != 1 && sign != -1) throw ParameterError("bilinear sign must be +1 or -1");
  const int n = static_cast<int>(y.size());
  if (i1 < 0 || i2 < 0 || i1 >= n || i2 >= n) throw ParameterError("bilinear index out of range");
  auto parts = terms::bilinear(i1, i2, static_cast<double>(sign))->dc_parts();
  SurrogateConstraint s = dc_linearize(Expr(n, parts->first), Expr(n, parts->second), y);
  s.kind = "bilinear";
  return s;
}

std::pair<Expr, Expr> dc_decompose(const Expr& g) {
  const int n = g.dim();
  Expr plus(n), minus(n);
  for (const auto& t : g.terms()) {
    const Curvature c = t->curvature();
    if (c == Curvature::kConstant || c == Curvature::kLinear || c == Curvature::kConvex) {
      plus += Expr(n, t);
    } else if (c == Curvature::kConcave) {
      minus += Expr(n, terms::scaled(t, -1.0));
    } else if (auto parts = t->dc_parts()) {
      plus += Expr(n, parts->first);
      minus += Expr(n, parts->second);
    } else {
      throw ConfigError("term '" + t->name() +
                        "' has unknown curvature and no builtin dc split; supply a curvature bound");
    }
  }
  return {plus, minus};
}

std::optional<double> gradient_bound_on_set(const Expr& f, const ConvexSet& set, const Vector& y) {
  const Curvature cv = f.curvature();
  const bool convex = cv == Curvature::kConvex || cv == Curvature::kLinear || cv == Curvature::kConstant;
  if (convex && set.kind() == SetKind::kBox && set.lower().allFinite() && set.upper().allFinite() &&
      f.split(BlockLayout(std::vector<int>(f.dim(), 1)))) {
    // Each partial derivative is nondecreasing in its own coordinate.
    const Vector lo = f.gradient(set.lower()).cwiseAbs();
    const Vector hi = f.gradient(set.upper()).cwiseAbs();
    return lo.cwiseMax(hi).norm();
  }
  auto D = set.max_distance_from(y);
  const double smooth = f.smoothness();
  if (!D || !std::isfinite(smooth)) return std::nullopt;
  return f.gradient(y).norm() + smooth * *D;
}

SurrogateObjective proximal_linear_objective(const Expr& U, const BlockLayout& layout,
                                             const std::vector<double>& tau_in, const Vector& y) {
  check_anchor_size(U, y);
  const int n = U.dim();
  const auto tau = broadcast(tau_in, layout.count(), 1.0, "tau");
  Expr v(n, terms::linear(U.gradient(y), y));
  double c = std::numeric_limits<double>::infinity();
  for (int i = 0; i < layout.count(); ++i) {
    if (!(tau[i] > 0)) throw ParameterError("proximal surrogate needs tau > 0 on every block");
    std::vector<int> idx(layout.range(i).size);
    for (int k = 0; k < layout.range(i).size; ++k) idx[k] = layout.range(i).offset + k;
    v += Expr(n, terms::sq_dist(y, 0.5 * tau[i], idx));
    c = std::min(c, tau[i]);
  }
  SurrogateObjective s{y, v, c, false, std::nullopt, "proximal"};
  s.per_block = try_split(v, layout);
  s.separable = s.per_block.has_value();
  return s;
}

namespace {

// tau_i/2 (x_i - y_i)^T H_i (x_i - y_i) for every block; returns the implied
// strong-convexity contribution per block.
std::vector<double> add_block_prox(Expr& v, const BlockLayout& layout, const BlockRegularization& reg,
                                   const Vector& y) {
  const int nb = layout.count();
  const auto tau = broadcast(reg.tau, nb, 1.0, "tau");
  const auto modulus = broadcast(reg.strong_modulus, nb, 0.0, "strong_modulus");
  if (!reg.H.empty() && static_cast<int>(reg.H.size()) != nb) throw ConfigError("H needs one matrix per block");
  std::vector<double> floor = broadcast(reg.H_floor, nb, 1.0, "H_floor");
  std::vector<double> contrib(nb);
  for (int i = 0; i < nb; ++i) {
    if (tau[i] < 0) throw ParameterError("tau must be nonnegative");
    if (modulus[i] < 0) throw ParameterError("strong-convexity modulus must be nonnegative");
    if (tau[i] == 0 && modulus[i] <= 0)
      throw ParameterError("tau = 0 on block " + std::to_string(i) +
                           " requires a declared block strong-convexity modulus");
    const Range r = layout.range(i);
    Matrix H = reg.H.empty() ? Matrix::Identity(r.size, r.size) : reg.H[i];
    if (reg.H.empty()) {
      floor[i] = 1.0;
    } else if (reg.H_floor.empty()) {
      floor[i] = min_eigenvalue(H);
    }
    if (tau[i] > 0 && !(floor[i] > 0)) throw ParameterError("H must be uniformly positive definite");
    if (tau[i] > 0) v += Expr(v.dim(), terms::quad_form(r, H, y.segment(r.offset, r.size), 0.5 * tau[i]));
    contrib[i] = tau[i] * floor[i] + modulus[i];
  }
  return contrib;
}

}  // namespace

SurrogateObjective block_convex_objective(const Expr& U, const BlockLayout& layout, const BlockRegularization& reg,
                                          const Vector& y, bool joint) {
  check_anchor_size(U, y);
  const int n = U.dim();
  Expr v(n);
  if (joint) {
    v = U;
  } else {
    for (int i = 0; i < layout.count(); ++i)
      v += Expr(n, terms::fixed_others(U, y, layout.range(i), Curvature::kConvex));
  }
  const auto contrib = add_block_prox(v, layout, reg, y);
  SurrogateObjective s{y, v, *std::min_element(contrib.begin(), contrib.end()), false, std::nullopt,
                       joint ? "block-convex-joint" : "block-convex"};
  s.per_block = try_split(v, layout);
  s.separable = s.per_block.has_value();
  return s;
}

SurrogateObjective sum_utility_objective(const std::vector<Expr>& utilities, const BlockLayout& layout,
                                         const std::vector<std::vector<int>>& convex_sets,
                                         const BlockRegularization& reg, const Vector& y) {
  if (utilities.empty()) throw ConfigError("sum-utility surrogate needs at least one utility");
  const int n = utilities.front().dim();
  check_anchor_size(utilities.front(), y);
  if (static_cast<int>(convex_sets.size()) != layout.count())
    throw ConfigError("sum-utility surrogate needs one index set per block");
  const int nf = static_cast<int>(utilities.size());
  Expr v(n);
  for (int i = 0; i < layout.count(); ++i) {
    std::vector<bool> kept(nf, false);
    for (int j : convex_sets[i]) {
      if (j < 0 || j >= nf) throw ParameterError("sum-utility index " + std::to_string(j) + " out of range");
      kept[j] = true;
    }
    const Range r = layout.range(i);
    Vector a = Vector::Zero(n);
    for (int j = 0; j < nf; ++j) {
      if (kept[j]) {
        v += Expr(n, terms::fixed_others(utilities[j], y, r, Curvature::kConvex));
      } else {
        a.segment(r.offset, r.size) += utilities[j].gradient(y).segment(r.offset, r.size);
      }
    }
    v += Expr(n, terms::linear(a, y));
  }
  const auto contrib = add_block_prox(v, layout, reg, y);
  SurrogateObjective s{y, v, *std::min_element(contrib.begin(), contrib.end()), false, std::nullopt,
                       "sum-utility"};
  s.per_block = try_split(v, layout);
  s.separable = s.per_block.has_value();
  return s;
}

SurrogateObjective product_objective(const Expr& f1, const Expr& f2, const ProductOptions& opt, const Vector& y,
                                     const BlockLayout& layout) {
  check_anchor_size(f1, y);
  const int n = f1.dim();
  const double v1 = f1.value(y), v2 = f2.value(y);
  const Range all{0, n};
  auto prox = [&](double tau) {
    const Matrix H = opt.H ? *opt.H : Matrix::Identity(n, n);
    return Expr(n, terms::quad_form(all, H, y, 0.5 * tau));
  };
  const double floor = opt.H ? opt.H_floor : 1.0;
  Expr v(n);
  double c = 0.0;
  switch (opt.kind) {
    case ProductCase::kConvexPositive: {
      if (!(v1 > 0 && v2 > 0)) throw ConfigError("convex-positive product surrogate needs positive factors at y");
      if (opt.tau < 0) throw ParameterError("tau must be nonnegative");
      v = f1.scaled(v2) + f2.scaled(v1);
      if (opt.tau > 0) v += prox(opt.tau);
      c = opt.tau * floor + opt.strong_modulus;
      break;
    }
    case ProductCase::kPositive: {
      if (!opt.factor1 || !opt.factor2) throw ConfigError("positive product surrogate needs factor surrogates");
      if (!(v1 > 0 && v2 > 0)) throw ConfigError("positive product surrogate needs positive factors at y");
      const SurrogateObjective s1 = opt.factor1(f1, y), s2 = opt.factor2(f2, y);
      v = s1.value.scaled(v2) + s2.value.scaled(v1);
      c = v2 * s1.strong_convexity + v1 * s2.strong_convexity + opt.strong_modulus;
      break;
    }
    case ProductCase::kGeneral: {
      if (!opt.factor1 || !opt.factor2) throw ConfigError("general product surrogate needs factor surrogates");
      // h1 = f~1 * f2(y): kept when the weight is positive, otherwise replaced
      // by its proximal linearization. Same for h2.
      auto piece = [&](const Expr& f, double weight,
                       const std::function<SurrogateObjective(const Expr&, const Vector&)>& inner) {
        if (weight > 0) {
          const SurrogateObjective s = inner(f, y);
          c += weight * s.strong_convexity;
          return s.value.scaled(weight);
        }
        if (!(opt.tau > 0)) throw ParameterError("general product surrogate needs tau > 0");
        c += opt.tau * floor;
        return Expr(n, terms::linear(weight * f.gradient(y), y)) + prox(opt.tau);
      };
      v = piece(f1, v2, opt.factor1) + piece(f2, v1, opt.factor2);
      c += opt.strong_modulus;
      break;
    }
  }
  if (!(c > 0)) throw ParameterError("product surrogate is not strongly convex; increase tau");
  SurrogateObjective s{y, v, c, false, std::nullopt, "product"};
  s.per_block = try_split(v, layout);
  s.separable = s.per_block.has_value();
  return s;
}

// ---- verification ----

bool SurrogateReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const SurrogateCheck& c) { return c.pass; });
}

const SurrogateCheck* SurrogateReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::string SurrogateReport::summary() const {
  std::ostringstream os;
  for (const auto& c : checks) os << c.name << "=" << (c.pass ? "pass" : "FAIL") << "(" << c.worst << ") ";
  return os.str();
}

namespace {

std::vector<Vector> verification_points(const ConvexSet& set, const Vector& y, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> pts;
  pts.reserve(samples);
  const double scale = 0.1 * (1.0 + y.norm());
  for (int s = 0; s < samples; ++s) {
    if (s % 2 == 0) {
      pts.push_back(set.sample(rng));
    } else {
      Vector d(y.size());
      for (int k = 0; k < y.size(); ++k) d[k] = gauss(rng);
      pts.push_back(set.project(y + scale * unit(rng) * d / std::max(d.norm(), 1e-300)));
    }
  }
  return pts;
}

SurrogateCheck separability_check(const Expr& full, const std::optional<std::vector<Expr>>& parts,
                                  const std::optional<BlockLayout>& layout, const std::vector<Vector>& pts) {
  SurrogateCheck c{"separability", true, 0.0};
  if (!parts || !layout || layout->count() != static_cast<int>(parts->size())) return c;
  for (const auto& x : pts) {
    double sum = 0.0;
    for (int i = 0; i < layout->count(); ++i) sum += (*parts)[i].value(layout->slice(x, i));
    const double v = full.value(x);
    const double err = std::abs(sum - v) / (1.0 + std::abs(v));
    c.worst = std::max(c.worst, err);
  }
  c.pass = c.worst <= 1e-12;
  return c;
}

}  // namespace

SurrogateReport verify_constraint_surrogate(const Expr& g, const SurrogateConstraint& s, const ConvexSet& set,
                                            int samples, std::uint64_t seed,
                                            const std::optional<BlockLayout>& layout) {
  SurrogateReport r;
  const Vector& y = s.anchor;
  const double c2 = std::abs(s.value.value(y) - g.value(y));
  r.checks.push_back({"C2", c2 <= 1e-9, c2});
  const double c5 = (s.value.gradient(y) - g.gradient(y)).norm();
  r.checks.push_back({"C5", c5 <= 1e-7, c5});

  const auto pts = verification_points(set, y, samples, seed);
  SurrogateCheck c1{"C1", true, -std::numeric_limits<double>::infinity()};
  SurrogateCheck c3{"C3", true, -std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Vector& u = pts[k];
    const Vector& w = pts[(k + 1) % pts.size()];
    const double su = s.value.value(u), sw = s.value.value(w);
    c1.worst = std::max(c1.worst, s.value.value(0.5 * (u + w)) - 0.5 * (su + sw));
    c3.worst = std::max(c3.worst, g.value(u) - su);
  }
  c1.pass = c1.worst <= 1e-10;
  c3.pass = c3.worst <= 1e-10;
  r.checks.push_back(c1);
  r.checks.push_back(c3);
  r.checks.push_back(separability_check(s.value, s.per_block, layout, pts));
  return r;
}

SurrogateReport verify_objective_surrogate(const Expr& U, const SurrogateObjective& s, const ConvexSet& set,
                                           int samples, std::uint64_t seed,
                                           const std::optional<BlockLayout>& layout) {
  SurrogateReport r;
  const Vector& y = s.anchor;
  const double b2 = (s.value.gradient(y) - U.gradient(y)).norm();
  r.checks.push_back({"B2", b2 <= 1e-7, b2});

  const auto pts = verification_points(set, y, samples, seed);
  SurrogateCheck b1{"B1", true, -std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Vector& u = pts[k];
    const Vector& w = pts[(k + 1) % pts.size()];
    const Vector d = u - w;
    const double lhs = d.dot(s.value.gradient(u) - s.value.gradient(w));
    b1.worst = std::max(b1.worst, s.strong_convexity * d.squaredNorm() - lhs);
  }
  b1.pass = s.strong_convexity > 0 && b1.worst <= 1e-10;
  r.checks.push_back(b1);
  r.checks.push_back(separability_check(s.value, s.per_block, layout, pts));
  return r;
}

// ---- recipes ----

SurrogateConstraint build_constraint_surrogate(const ProblemSpec& p, int j, const ConstraintRecipe& r,
                                               const Vector& y) {
  const Constraint& c = p.constraints.at(j);
  SurrogateConstraint s;
  if (r.kind == "lipschitz") {
    const double L = r.L ? *r.L : c.g.smoothness();
    if (!std::isfinite(L)) throw ConfigError("constraint " + std::to_string(j) + ": lipschitz surrogate needs L");
    if (L == 0.0) {
      // Tangent plane; an upper bound when g is concave.
      s = dc_linearize(Expr(p.dim), c.g.scaled(-1.0), y);
      s.kind = "lipschitz";
    } else {
      s = lipschitz_quadratic_surrogate(c.g, L, y);
    }
  } else if (r.kind == "dc" || r.kind == "bilinear") {
    std::pair<Expr, Expr> parts;
    if (r.curvature_bound) {
      parts = hessian_shift_dc_split(c.g, *r.curvature_bound);
    } else if (c.dc_plus) {
      parts = {*c.dc_plus, *c.dc_minus};
    } else {
      parts = dc_decompose(c.g);
    }
    s = dc_linearize(parts.first, parts.second, y);
    s.kind = r.kind;
  } else if (r.kind == "identity-convex") {
    const Curvature cv = c.g.curvature();
    if (cv != Curvature::kConvex && cv != Curvature::kLinear && cv != Curvature::kConstant)
      throw ConfigError("constraint " + std::to_string(j) + " is not declared convex; identity surrogate invalid");
    s = {y, c.g, std::nullopt, std::nullopt, "identity-convex"};
  } else {
    throw ConfigError("unknown constraint surrogate kind '" + r.kind + "'");
  }
  const BlockLayout layout = p.layout();
  s.per_block = try_split(s.value, layout);
  s.lipschitz = gradient_bound_on_set(s.value, p.set, y);
  return s;
}

namespace {

SurrogateObjective build_objective(const ProblemSpec& p, const ObjectiveRecipe& r, const Vector& y) {
  const BlockLayout layout = p.layout();
  BlockRegularization reg;
  reg.tau = r.tau;
  reg.strong_modulus = r.strong_modulus;
  if (r.kind == "proximal") return proximal_linear_objective(p.objective, layout, r.tau, y);
  if (r.kind == "block-convex") return block_convex_objective(p.objective, layout, reg, y, r.joint);
  if (r.kind == "sum-utility") {
    std::vector<Expr> utilities;
    for (const auto& t : p.objective.terms()) utilities.emplace_back(p.dim, t);
    return sum_utility_objective(utilities, layout, r.convex_sets, reg, y);
  }
  if (r.kind == "product") {
    if (!p.product_factors) throw ConfigError("product surrogate needs a problem declared as a product");
    ProductOptions opt;
    if (r.product_case == "convex-positive") opt.kind = ProductCase::kConvexPositive;
    else if (r.product_case == "positive") opt.kind = ProductCase::kPositive;
    else if (r.product_case == "general") opt.kind = ProductCase::kGeneral;
    else throw ConfigError("unknown product case '" + r.product_case + "'");
    opt.tau = r.tau.empty() ? 1.0 : r.tau.front();
    opt.strong_modulus = r.strong_modulus.empty() ? 0.0 : r.strong_modulus.front();
    const std::string fk = r.factor_kind;
    const double tau = opt.tau;
    auto factor = [fk, tau](const Expr& f, const Vector& a) {
      if (fk == "identity") {
        const Curvature cv = f.curvature();
        if (cv != Curvature::kConvex && cv != Curvature::kLinear)
          throw ConfigError("identity factor surrogate needs a convex factor");
        Expr v = f;
        if (tau > 0) v += Expr(f.dim(), terms::sq_dist(a, 0.5 * tau));
        return SurrogateObjective{a, v, tau, false, std::nullopt, "identity"};
      }
      if (fk == "proximal") return proximal_linear_objective(f, BlockLayout::single(f.dim()), {tau}, a);
      throw ConfigError("unknown factor surrogate kind '" + fk + "'");
    };
    opt.factor1 = factor;
    opt.factor2 = factor;
    return product_objective(p.product_factors->first, p.product_factors->second, opt, y, layout);
  }
  throw ConfigError("unknown objective surrogate kind '" + r.kind + "'");
}

}  // namespace

SurrogateModel build_surrogates(const ProblemSpec& p, const SurrogateRecipe& recipe, const Vector& y,
                                bool check_anchor) {
  if (y.size() != p.dim) throw InputError("anchor has the wrong dimension");
  if (check_anchor) {
    const double res = feasibility_residual(p, y);
    if (res > kFeasibilityTol)
      throw InputError("anchor is infeasible (residual " + std::to_string(res) + ")");
  }
  const int m = p.num_constraints();
  if (!(recipe.constraints.size() == 1 || static_cast<int>(recipe.constraints.size()) == m ||
        (m == 0 && recipe.constraints.empty())))
    throw ConfigError("surrogate recipe needs one constraint entry or one per constraint");
  SurrogateModel model;
  model.objective = build_objective(p, recipe.objective, y);
  for (int j = 0; j < m; ++j) {
    const ConstraintRecipe& r = recipe.constraints.size() == 1 ? recipe.constraints.front() : recipe.constraints[j];
    model.constraints.push_back(build_constraint_surrogate(p, j, r, y));
  }
  return model;
}

}  // namespace nova
