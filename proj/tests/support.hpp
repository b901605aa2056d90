#pragma once

#include "nova/benchmarks.hpp"
#include "nova/grid_oracle.hpp"
#include "nova/nova.hpp"

#include <cmath>
#include <initializer_list>
#include <vector>

namespace nova::testing {

inline Vector vec(std::initializer_list<double> v) { return to_vector(std::vector<double>(v)); }

inline ProblemSpec make_problem(int dim, Expr objective, std::vector<Expr> constraints, ConvexSet set) {
  ProblemSpec p;
  p.name = "test";
  p.dim = dim;
  p.objective = std::move(objective);
  for (auto& g : constraints) p.constraints.push_back({std::move(g), std::nullopt, std::nullopt, ""});
  p.set = std::move(set);
  return p;
}

/// Central finite-difference gradient of f at x.
template <class F>
Vector fd_gradient(const F& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector a = x, b = x;
    a[k] += h;
    b[k] -= h;
    g[k] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

/// P2 subproblem at (2,2) in closed form: U~ = ||x||^2, g~ = 1/2 ||x||^2 - 4 x1 - 4 x2 + 9.
inline double p2_best_response_coordinate() { return 4.0 - std::sqrt(7.0); }

}  // namespace nova::testing
