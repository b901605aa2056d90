#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nova {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class NovaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong dimensions, infeasible starting point, bad file.
class InputError : public NovaError {
 public:
  using NovaError::NovaError;
};

/// A numeric parameter violates its documented range.
class ParameterError : public NovaError {
 public:
  using NovaError::NovaError;
};

/// A run or surrogate configuration is inconsistent with the problem.
class ConfigError : public NovaError {
 public:
  using NovaError::NovaError;
};

/// An iterative solver exhausted its budget. Carries the best iterate found.
class ConvergenceError : public NovaError {
 public:
  ConvergenceError(const std::string& what, Vector best, double residual)
      : NovaError(what), best_(std::move(best)), residual_(residual) {}

  const Vector& best_iterate() const { return best_; }
  double residual() const { return residual_; }

 private:
  Vector best_;
  double residual_;
};

/// A convex subproblem looks infeasible (multipliers diverge, phase-1 fails).
class InfeasibilityError : public NovaError {
 public:
  using NovaError::NovaError;
};

class IoError : public NovaError {
 public:
  using NovaError::NovaError;
};

class UnsupportedError : public NovaError {
 public:
  using NovaError::NovaError;
};

/// Tolerance under which a point counts as feasible for the original problem.
inline constexpr double kFeasibilityTol = 1e-9;

/// Worker count for parallel sections, read from NOVA_THREADS (default 1).
int worker_threads();

/// Runs body(i) for i in [0, count) on up to worker_threads() threads.
/// Each index is processed exactly once; callers write results into
/// per-index slots and reduce afterwards in index order.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

/// Converts a std::vector<double> to an Eigen vector.
Vector to_vector(const std::vector<double>& v);
std::vector<double> to_std(const Vector& v);

}  // namespace nova
