#include "nova/grid_oracle.hpp"

#include <cmath>

namespace nova {

namespace {

// (value, point) ordering: smaller value, then lexicographically smaller point.
bool better(double v, const Vector& x, double best_v, const Vector& best_x) {
  if (v != best_v) return v < best_v;
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (x[k] != best_x[k]) return x[k] < best_x[k];
  return false;
}

}  // namespace

GridOracleResult grid_oracle(const ProblemSpec& p, double resolution, const Vector& lo, const Vector& hi) {
  if (p.dim > 3) throw UnsupportedError("grid oracle supports dimension <= 3, got " + std::to_string(p.dim));
  if (!(resolution > 0) || !std::isfinite(resolution)) throw ParameterError("grid resolution must be positive");
  if (lo.size() != p.dim || hi.size() != p.dim) throw ParameterError("grid bounds have the wrong dimension");
  if (!lo.allFinite() || !hi.allFinite()) throw ParameterError("grid bounds must be finite");

  std::vector<long> counts(p.dim);
  double total = 1.0;
  for (int k = 0; k < p.dim; ++k) {
    if (hi[k] < lo[k]) throw ParameterError("grid upper bound below lower bound");
    counts[k] = static_cast<long>(std::floor((hi[k] - lo[k]) / resolution + 1e-9)) + 1;
    total *= static_cast<double>(counts[k]);
  }
  if (total > 1e8) throw ParameterError("grid has more than 1e8 points; coarsen the resolution");

  // One slab per index of the first coordinate; slabs are reduced in order.
  const long slabs = counts[0];
  std::vector<GridOracleResult> partial(slabs);
  parallel_for(static_cast<std::size_t>(slabs), [&](std::size_t s) {
    GridOracleResult& r = partial[s];
    Vector x(p.dim);
    std::vector<long> idx(p.dim, 0);
    idx[0] = static_cast<long>(s);
    while (true) {
      for (int k = 0; k < p.dim; ++k) x[k] = lo[k] + static_cast<double>(idx[k]) * resolution;
      ++r.points_scanned;
      if (is_feasible(p, x)) {
        ++r.feasible_points;
        const double v = p.objective.value(x);
        if (!r.found || better(v, x, r.value, r.point)) {
          r.found = true;
          r.value = v;
          r.point = x;
        }
      }
      int k = p.dim - 1;
      while (k >= 1 && ++idx[k] == counts[k]) idx[k--] = 0;
      if (k < 1) break;
    }
  });
  GridOracleResult out;
  for (const auto& r : partial) {
    out.points_scanned += r.points_scanned;
    out.feasible_points += r.feasible_points;
    if (r.found && (!out.found || better(r.value, r.point, out.value, out.point))) {
      out.found = true;
      out.value = r.value;
      out.point = r.point;
    }
  }
  return out;
}

}  // namespace nova
