#pragma once

// Primal decomposition: each block gets a slack budget t_i for the shared
// constraints (sum_i t_i <= 0); a master loop moves budget along -mu_i.

#include "nova/dual.hpp"

#include <functional>
#include <string>
#include <vector>

namespace nova {

struct BlockPrimalSolution {
  Vector x;
  Vector mu;
  double objective = 0.0;
  int iterations = 0;
};

/// min U~_i s.t. g~^i(x_i) <= t_i, x_i in K_i. InfeasibilityError naming the
/// block when the budget admits no point.
BlockPrimalSolution block_subproblem(const BlockDecomposition& d, int block, const Vector& t_i,
                                     const DualOptions& opt, const Vector* warm_x = nullptr,
                                     const Vector* warm_mu = nullptr);

/// Partial subgradients of the master function: -mu_i per block.
std::vector<Vector> master_subgradient(const std::vector<BlockPrimalSolution>& blocks);

/// Projection onto {sum_i t_i <= 0}, coordinatewise.
std::vector<Vector> project_master(std::vector<Vector> t);

struct PrimalRound {
  int round = 0;
  const std::vector<Vector>* t = nullptr;
  const Vector* point = nullptr;        // assembled block solutions
  const Vector* shared_values = nullptr;  // sum_i g~^i(x_i)
  std::vector<int> block_iterations;
  double objective = 0.0;
};

/// Master step. kBundle: descent along the minimum-norm element of nearby
/// subgradients with backtracking, budgets kept fully allocated after the
/// first round. kHarmonic: projected subgradient with beta0 / (n + 1).
enum class MasterStep { kBundle, kHarmonic };
const char* to_string(MasterStep s);
MasterStep parse_master_step(const std::string& s);

struct PrimalOptions {
  MasterStep step = MasterStep::kBundle;
  double beta0 = 1.0;  // harmonic: beta0 / (n + 1); bundle: first trial step
  double tol = 1e-6;
  int max_iter = 5000;
  DualOptions block;
  std::function<void(const PrimalRound&)> observer;
};

struct PrimalResult {
  InnerSolution solution;
  std::vector<Vector> t;
  double objective = 0.0;
  int rounds = 0;
};

/// Master loop over slack allocations starting from t_i = g~^i(anchor_i).
/// Harmonic: a step is halved while some block is infeasible for its budget;
/// stops when ||t+ - t|| / beta <= tol (1 + ||t||). Bundle: stops when the
/// sampling radius and the minimum-norm subgradient both fall below tol.
/// Every round reported to the observer is feasible; the best round is
/// returned. Block budgets are solved by an augmented Lagrangian.
PrimalResult primal_solve(const BlockDecomposition& d, const PrimalOptions& opt);

}  // namespace nova
