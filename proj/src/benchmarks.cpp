#include "nova/benchmarks.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace nova {

using nlohmann::json;

namespace {

void reject_unknown(const json& params, const std::set<std::string>& known, const std::string& id) {
  if (params.is_null()) return;
  if (!params.is_object()) throw ConfigError(id + ": problem params must be a JSON object");
  for (auto it = params.begin(); it != params.end(); ++it)
    if (!known.count(it.key())) throw ConfigError(id + ": unknown problem parameter '" + it.key() + "'");
}

Vector vec_param(const json& params, const char* key, const Vector& fallback) {
  if (!params.is_object() || !params.contains(key)) return fallback;
  const auto v = params.at(key).get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != fallback.size())
    throw ConfigError(std::string("parameter '") + key + "' has the wrong length");
  return to_vector(v);
}

template <class T>
T num_param(const json& params, const char* key, T fallback) {
  if (!params.is_object() || !params.contains(key)) return fallback;
  return params.at(key).get<T>();
}

ConstraintRecipe constraint(const std::string& kind, std::optional<double> L = std::nullopt,
                            std::optional<double> curvature = std::nullopt) {
  ConstraintRecipe r;
  r.kind = kind;
  r.L = L;
  r.curvature_bound = curvature;
  return r;
}

ObjectiveRecipe objective(const std::string& kind, std::vector<double> tau, std::vector<double> modulus = {}) {
  ObjectiveRecipe r;
  r.kind = kind;
  r.tau = std::move(tau);
  r.strong_modulus = std::move(modulus);
  return r;
}

SurrogateRecipe recipe(ObjectiveRecipe o, ConstraintRecipe c) { return {std::move(o), {std::move(c)}}; }

BenchmarkProblem reverse_ball(const json& params) {
  reject_unknown(params, {"A", "A_shift", "b", "d", "box", "tau"}, "P1");
  Matrix A(2, 2);
  A << 1.0, 0.0, 0.0, -1.0;
  if (params.is_object() && params.contains("A")) {
    const auto rows = params.at("A").get<std::vector<std::vector<double>>>();
    if (rows.size() != 2 || rows[0].size() != 2 || rows[1].size() != 2) throw ConfigError("P1: A must be 2x2");
    A << rows[0][0], rows[0][1], rows[1][0], rows[1][1];
    if ((A - A.transpose()).norm() > 0) throw ConfigError("P1: A must be symmetric");
  }
  A += num_param(params, "A_shift", 0.0) * Matrix::Identity(2, 2);
  const Vector b = vec_param(params, "b", Vector::Map(std::vector<double>{-0.4, 0.2}.data(), 2));
  const Vector d = vec_param(params, "d", Vector::Map(std::vector<double>{0.5, -1.2}.data(), 2));
  const double box = num_param(params, "box", 1.5);
  const double tau = num_param(params, "tau", 1.0);
  if (!(box > 0)) throw ConfigError("P1: box must be positive");

  BenchmarkProblem bp;
  bp.id = "P1";
  bp.name = "reverse-ball";
  bp.summary = "min 1/2 x'Ax + b'x, A indefinite, s.t. 1 - ||x - d||^2 <= 0, x in a box";
  ProblemSpec& p = bp.problem;
  p.name = "reverse-ball";
  p.dim = 2;
  p.objective = Expr(2, terms::quadratic(A, b));
  Constraint c;
  c.g = Expr(2, terms::constant(1.0)) + Expr(2, terms::sq_dist(d, -1.0));
  c.dc_plus = Expr(2, terms::constant(1.0));
  c.dc_minus = Expr(2, terms::sq_dist(d, 1.0));
  c.label = "outside unit ball around d";
  p.constraints = {c};
  p.set = ConvexSet::box(2, -box, box);
  p.blocks = BlockLayout({1, 1});
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  p.lipschitz_grad_U = es.eigenvalues().cwiseAbs().maxCoeff();

  bp.recipe = recipe(objective("proximal", {tau}), constraint("dc"));
  bp.builders = {
      {"proximal+dc", bp.recipe},
      {"proximal+lipschitz", recipe(objective("proximal", {tau}), constraint("lipschitz", 1.0))},
      {"proximal+hessian-shift", recipe(objective("proximal", {tau}), constraint("dc", std::nullopt, 2.0))},
      {"proximal-wide+lipschitz-tangent", recipe(objective("proximal", {2.0 * tau}), constraint("lipschitz", 0.0))},
  };
  bp.constraint_families = {"dc (concave part linearized)"};
  bp.default_x0 = Vector::Constant(2, 0.0);
  bp.default_x0 << -box, box;
  if (!is_feasible(p, bp.default_x0)) {
    const auto pts = sample_feasible_points(p, 1, 0);
    bp.default_x0 = pts.front();
  }
  bp.oracle_bounds = std::make_pair(Vector::Constant(2, -box), Vector::Constant(2, box));
  bp.params = {{"A", {{A(0, 0), A(0, 1)}, {A(1, 0), A(1, 1)}}}, {"b", to_std(b)}, {"d", to_std(d)},
               {"box", box},   {"tau", tau}};
  return bp;
}

BenchmarkProblem bilinear_floor(const json& params) {
  reject_unknown(params, {}, "P2");
  BenchmarkProblem bp;
  bp.id = "P2";
  bp.name = "bilinear-floor";
  bp.summary = "min x1^2 + x2^2 s.t. 1 - x1 x2 <= 0, x in [0.1, 10]^2";
  ProblemSpec& p = bp.problem;
  p.name = "bilinear-floor";
  p.dim = 2;
  const Vector zero = Vector::Zero(2);
  p.objective = Expr(2, {terms::sq_dist(zero, 1.0, {0}), terms::sq_dist(zero, 1.0, {1})});
  Constraint c;
  c.g = Expr(2, {terms::constant(1.0), terms::bilinear(0, 1, -1.0)});
  c.label = "product floor";
  p.constraints = {c};
  p.set = ConvexSet::box(2, 0.1, 10.0);
  p.blocks = BlockLayout({1, 1});
  p.lipschitz_grad_U = 2.0;

  bp.recipe = recipe(objective("block-convex", {0.0}, {2.0}), constraint("bilinear"));
  ObjectiveRecipe sum = objective("sum-utility", {0.0}, {2.0});
  sum.convex_sets = {{0}, {1}};
  ObjectiveRecipe joint = objective("block-convex", {0.0}, {2.0});
  joint.joint = true;
  bp.builders = {
      {"block-convex+bilinear", bp.recipe},
      {"proximal+bilinear", recipe(objective("proximal", {1.0}), constraint("bilinear"))},
      {"block-convex-prox+lipschitz", recipe(objective("block-convex", {1.0}), constraint("lipschitz", 1.0))},
      {"sum-utility+dc", recipe(sum, constraint("dc"))},
      {"block-convex-joint+hessian-shift", recipe(joint, constraint("dc", std::nullopt, 1.0))},
  };
  bp.constraint_families = {"bilinear (rewritten as a difference of convex squares)"};
  bp.default_x0 = Vector::Constant(2, 2.0);
  bp.reference_point = Vector::Ones(2);
  bp.reference_value = 2.0;
  bp.oracle_bounds = std::make_pair(Vector::Constant(2, 0.1), Vector::Constant(2, 3.0));
  bp.params = json::object();
  return bp;
}

BenchmarkProblem shared_budget(const json& params) {
  reject_unknown(params, {"agents", "constraints", "seed"}, "P3");
  const int I = num_param(params, "agents", 4);
  const int m = num_param(params, "constraints", 2);
  const auto seed = num_param<std::uint64_t>(params, "seed", 7);
  if (I < 1 || I > 64) throw ConfigError("P3: agents must lie in [1, 64]");
  if (m < 1 || m > 2) throw ConfigError("P3: constraints must be 1 or 2");
  const int n = 2 * I;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  BenchmarkProblem bp;
  bp.id = "P3";
  bp.name = "shared-budget";
  bp.summary = "min sum_i x_i'Q_i x_i + b_i'x_i s.t. sum_i (c_ij - ||x_i - d_ij||^2) <= 0, per-block boxes";
  ProblemSpec& p = bp.problem;
  p.name = "shared-budget";
  p.dim = n;
  std::vector<TermPtr> obj;
  Vector b(n);
  double min_eig = 1.5;
  json qs = json::array();
  for (int i = 0; i < I; ++i) {
    const double theta = uni(0.0, M_PI);
    const double e1 = uni(1.0, 1.5), e2 = uni(1.0, 1.5);
    min_eig = std::min({min_eig, e1, e2});
    Matrix R(2, 2);
    R << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    Matrix Q = R * Eigen::Vector2d(e1, e2).asDiagonal() * R.transpose();
    Q = 0.5 * (Q + Q.transpose());
    obj.push_back(terms::quad_form(Range{2 * i, 2}, Q, Vector::Zero(2), 1.0));
    b[2 * i] = uni(-0.5, 0.5);
    b[2 * i + 1] = uni(-0.5, 0.5);
    qs.push_back({{Q(0, 0), Q(0, 1)}, {Q(1, 0), Q(1, 1)}});
  }
  obj.push_back(terms::linear(b, Vector::Zero(n)));
  p.objective = Expr(n, obj);
  json ds = json::array(), cs = json::array();
  for (int j = 0; j < m; ++j) {
    Vector d(n);
    double total = 0.0;
    for (int i = 0; i < I; ++i) {
      d[2 * i] = uni(-0.6, 0.6);
      d[2 * i + 1] = uni(-0.6, 0.6);
      total += 1.2;
    }
    Constraint c;
    c.g = Expr(n, terms::constant(total)) + Expr(n, terms::sq_dist(d, -1.0));
    c.dc_plus = Expr(n, terms::constant(total));
    c.dc_minus = Expr(n, terms::sq_dist(d, 1.0));
    c.label = "shared budget " + std::to_string(j);
    p.constraints.push_back(c);
    ds.push_back(to_std(d));
    cs.push_back(1.2);
  }
  p.set = ConvexSet::box(n, -2.0, 2.0);
  p.blocks = BlockLayout(std::vector<int>(I, 2));
  // grad U = 2 Q x + b, eigenvalues of Q within [1, 1.5].
  p.lipschitz_grad_U = 3.0;
  const double modulus = 2.0;

  bp.recipe = recipe(objective("block-convex", {0.0}, {modulus}), constraint("dc"));
  ObjectiveRecipe sum = objective("sum-utility", {0.0}, {modulus});
  for (int i = 0; i < I; ++i) sum.convex_sets.push_back({i});
  bp.builders = {
      {"block-convex+dc", bp.recipe},
      {"proximal+dc", recipe(objective("proximal", {3.0}), constraint("dc"))},
      {"block-convex-prox+lipschitz-tangent", recipe(objective("block-convex", {1.0}), constraint("lipschitz", 0.0))},
      {"sum-utility+lipschitz", recipe(sum, constraint("lipschitz", 0.5))},
  };
  bp.constraint_families = std::vector<std::string>(m, "dc (concave part linearized)");
  bp.default_x0 = sample_feasible_points(p, 1, seed).front();
  bp.params = {{"agents", I}, {"constraints", m}, {"seed", seed}, {"Q", qs}, {"b", to_std(b)}, {"d", ds},
               {"c", cs}, {"min_eigenvalue", min_eig}};
  return bp;
}

BenchmarkProblem product_floor(const json& params) {
  reject_unknown(params, {}, "P4");
  BenchmarkProblem bp;
  bp.id = "P4";
  bp.name = "product-floor";
  bp.summary = "min (x1^2 + 1)(x2^2 + 1) s.t. 1 - x1 x2 <= 0, x in [0.1, 3]^2";
  ProblemSpec& p = bp.problem;
  p.name = "product-floor";
  p.dim = 2;
  const Vector zero = Vector::Zero(2);
  const Expr f1(2, {terms::sq_dist(zero, 1.0, {0}), terms::constant(1.0)});
  const Expr f2(2, {terms::sq_dist(zero, 1.0, {1}), terms::constant(1.0)});
  p.objective = Expr(2, terms::product(f1, f2));
  p.product_factors = std::make_pair(f1, f2);
  Constraint c;
  c.g = Expr(2, {terms::constant(1.0), terms::bilinear(0, 1, -1.0)});
  c.label = "product floor";
  p.constraints = {c};
  p.set = ConvexSet::box(2, 0.1, 3.0);
  p.blocks = BlockLayout({1, 1});
  // Largest Hessian eigenvalue on the box, attained at (3, 3): 20 + 36.
  p.lipschitz_grad_U = 56.0;

  ObjectiveRecipe convex_pos = objective("product", {1.0});
  ObjectiveRecipe positive = objective("product", {1.0});
  positive.product_case = "positive";
  ObjectiveRecipe general = objective("product", {1.0});
  general.product_case = "general";
  ObjectiveRecipe identity = objective("product", {1.0});
  identity.product_case = "positive";
  identity.factor_kind = "identity";
  bp.recipe = recipe(convex_pos, constraint("bilinear"));
  bp.builders = {
      {"product-convex-positive+bilinear", bp.recipe},
      {"product-positive+bilinear", recipe(positive, constraint("bilinear"))},
      {"product-positive-identity+bilinear", recipe(identity, constraint("bilinear"))},
      {"product-general+bilinear", recipe(general, constraint("bilinear"))},
      {"proximal+lipschitz", recipe(objective("proximal", {5.0}), constraint("lipschitz", 1.0))},
  };
  bp.constraint_families = {"bilinear (rewritten as a difference of convex squares)"};
  bp.default_x0 = Vector::Constant(2, 2.0);
  bp.reference_point = Vector::Ones(2);
  bp.reference_value = 4.0;
  bp.oracle_bounds = std::make_pair(Vector::Constant(2, 0.1), Vector::Constant(2, 3.0));
  bp.params = json::object();
  return bp;
}

}  // namespace

std::vector<std::string> benchmark_ids() { return {"P1", "P2", "P3", "P4"}; }

BenchmarkProblem make_benchmark(const std::string& id, const json& params) {
  BenchmarkProblem bp;
  if (id == "P1" || id == "reverse-ball") bp = reverse_ball(params);
  else if (id == "P2" || id == "bilinear-floor") bp = bilinear_floor(params);
  else if (id == "P3" || id == "shared-budget") bp = shared_budget(params);
  else if (id == "P4" || id == "product-floor") bp = product_floor(params);
  else throw ConfigError("unknown problem '" + id + "'");
  bp.problem.validate();
  return bp;
}

StepSchedule suggested_constant_schedule(const BenchmarkProblem& b) {
  const double c = build_surrogates(b.problem, b.recipe, b.default_x0).objective.strong_convexity;
  const double L = b.problem.lipschitz_grad_U ? *b.problem.lipschitz_grad_U : estimate_lipschitz_grad(b.problem, 2000, 0);
  const double g = std::min(1.0, 1.9 * c / L);
  return StepSchedule::constant(g, g, L, c);
}

}  // namespace nova
