#pragma once

// Exhaustive grid scan used as an independent reference on small problems.

#include "nova/problem.hpp"

namespace nova {

struct GridOracleResult {
  bool found = false;  // false: no feasible grid point
  Vector point;
  double value = 0.0;
  long points_scanned = 0;
  long feasible_points = 0;
};

/// Scans lo + k * resolution (per coordinate, up to hi) and returns the
/// feasible point of least U; ties go to the lexicographically smallest
/// point. UnsupportedError when dim > 3, ParameterError for a bad
/// resolution, non-finite bounds or a grid above ~1e8 points.
GridOracleResult grid_oracle(const ProblemSpec& p, double resolution, const Vector& lo, const Vector& hi);

}  // namespace nova
