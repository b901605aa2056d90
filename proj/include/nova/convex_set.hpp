#pragma once

// Closed convex sets described by a projection oracle.

#include "nova/common.hpp"

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nova {

enum class SetKind { kBox, kBall, kNonnegOrthant, kSimplex, kProduct, kCustom };

const char* to_string(SetKind k);

class ConvexSet {
 public:
  using ProjectFn = std::function<Vector(const Vector&)>;
  using ContainsFn = std::function<bool(const Vector&, double)>;
  using SampleFn = std::function<Vector(std::mt19937_64&)>;

  ConvexSet() = default;

  /// lo <= x <= hi componentwise; infinite bounds allowed.
  static ConvexSet box(Vector lo, Vector hi);
  static ConvexSet box(int dim, double lo, double hi);
  /// All of R^n.
  static ConvexSet free(int dim);
  static ConvexSet ball(Vector center, double radius);
  static ConvexSet nonneg_orthant(int dim);
  /// {x >= 0, sum x = total}.
  static ConvexSet simplex(int dim, double total = 1.0);
  static ConvexSet product(std::vector<ConvexSet> parts);
  /// User-supplied projection. contains defaults to ||x - project(x)|| <= tol;
  /// without a sampler, sample() projects Gaussian draws.
  static ConvexSet custom(int dim, ProjectFn project, ContainsFn contains = {}, SampleFn sample = {});

  int dim() const { return dim_; }
  SetKind kind() const { return kind_; }

  Vector project(const Vector& u) const;
  bool contains(const Vector& x, double tol = 1e-12) const;
  /// ||x - project(x)||.
  double distance(const Vector& x) const { return (x - project(x)).norm(); }
  /// A point of the set drawn from rng. Unbounded directions are sampled
  /// within sample_radius of the origin (or of the finite bound).
  Vector sample(std::mt19937_64& rng) const;

  /// Per-block sets whose Cartesian product is this set, or nullopt if the
  /// set does not factor along the given sizes.
  std::optional<std::vector<ConvexSet>> split(const std::vector<int>& sizes) const;

  /// sup_{x in set} ||x - y||, nullopt when unbounded.
  std::optional<double> max_distance_from(const Vector& y) const;

  /// Finite bounding box, if any (used by the grid oracle).
  std::optional<std::pair<Vector, Vector>> bounding_box() const;

  /// Box bounds when kind() == kBox.
  const Vector& lower() const { return lo_; }
  const Vector& upper() const { return hi_; }
  const Vector& center() const { return center_; }
  double radius() const { return radius_; }
  const std::vector<ConvexSet>& parts() const { return parts_; }

  std::string describe() const;

  static constexpr double kSampleRadius = 10.0;

 private:
  SetKind kind_ = SetKind::kBox;
  int dim_ = 0;
  Vector lo_, hi_;        // box
  Vector center_;         // ball
  double radius_ = 0.0;   // ball radius or simplex total
  std::vector<ConvexSet> parts_;
  std::shared_ptr<const ProjectFn> project_fn_;
  std::shared_ptr<const ContainsFn> contains_fn_;
  std::shared_ptr<const SampleFn> sample_fn_;
};

/// Euclidean projection onto {x >= 0, sum x = total}.
Vector project_simplex(const Vector& u, double total);

}  // namespace nova
