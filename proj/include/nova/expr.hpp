#pragma once

// Smooth scalar functions composed as sums of builtin primitives.
//
// An Expr is the oracle type used everywhere in the library: it evaluates a
// value and gradient, carries a declared curvature tag and a gradient
// Lipschitz bound, and knows how to split itself across a block partition
// when each of its terms touches a single block (or is coordinate-separable).

#include "nova/common.hpp"

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nova {

enum class Curvature { kConstant, kLinear, kConvex, kConcave, kUnknown };

const char* to_string(Curvature c);

/// Curvature of a sum of two functions with the given tags.
Curvature combine(Curvature a, Curvature b);
/// Curvature of s * f.
Curvature scale_curvature(Curvature c, double s);

/// Contiguous coordinate range [offset, offset + size).
struct Range {
  int offset = 0;
  int size = 0;
  bool contains(int k) const { return k >= offset && k < offset + size; }
};

/// Partition of the coordinates 0..n-1 into consecutive blocks.
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<int> sizes);
  static BlockLayout single(int dim) { return BlockLayout({dim}); }

  int count() const { return static_cast<int>(sizes_.size()); }
  int dim() const { return dim_; }
  const std::vector<int>& sizes() const { return sizes_; }
  Range range(int i) const { return {offsets_[i], sizes_[i]}; }
  /// Block holding coordinate k.
  int block_of(int k) const;

  Vector slice(const Vector& x, int i) const { return x.segment(offsets_[i], sizes_[i]); }
  Vector concat(const std::vector<Vector>& parts) const;

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  int dim_ = 0;
};

class Term;
using TermPtr = std::shared_ptr<const Term>;

class Term {
 public:
  virtual ~Term() = default;

  virtual double value(const Vector& x) const = 0;
  virtual void add_gradient(const Vector& x, Vector& grad) const = 0;
  /// Lipschitz constant of the gradient over the whole space; +inf if unknown.
  virtual double smoothness() const = 0;
  virtual Curvature curvature() const = 0;
  /// Coordinates the term reads; nullopt means "possibly all of them".
  virtual std::optional<std::vector<int>> support() const = 0;
  /// Splits a term whose support spans several blocks into pieces that each
  /// touch one block (global coordinates). nullopt if it cannot be split.
  virtual std::optional<std::vector<TermPtr>> separate(const BlockLayout&) const {
    return std::nullopt;
  }
  /// Builtin difference-of-convex parts (plus, minus) with term = plus - minus.
  virtual std::optional<std::pair<TermPtr, TermPtr>> dc_parts() const { return std::nullopt; }
  /// For a term supported inside `block`: the same function of the block's
  /// local coordinates, or nullptr when the term has no local form.
  virtual TermPtr localize(Range) const { return nullptr; }
  virtual std::string name() const = 0;
};

class Expr {
 public:
  Expr() = default;
  explicit Expr(int dim) : dim_(dim) {}
  Expr(int dim, std::vector<TermPtr> terms);
  Expr(int dim, TermPtr term) : Expr(dim, std::vector<TermPtr>{std::move(term)}) {}

  int dim() const { return dim_; }
  const std::vector<TermPtr>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  void add_gradient(const Vector& x, Vector& grad) const;
  double smoothness() const;
  Curvature curvature() const;
  /// Union of term supports; nullopt if any term has unknown support.
  std::optional<std::vector<int>> support() const;

  Expr operator+(const Expr& other) const;
  Expr& operator+=(const Expr& other);
  Expr scaled(double s) const;
  Expr plus_constant(double c) const;

  /// Splits into per-block functions of the local block coordinates whose sum
  /// equals this expression. Constant terms are shared evenly across blocks.
  std::optional<std::vector<Expr>> split(const BlockLayout& layout) const;

  /// Human-readable list of the terms.
  std::string describe() const;

 private:
  int dim_ = 0;
  std::vector<TermPtr> terms_;
};

/// Factories for the builtin primitives. Vectors passed as "center" or "d"
/// have the full problem dimension unless stated otherwise.
namespace terms {

TermPtr constant(double c);
/// a^T (x - center) + c
TermPtr linear(Vector a, Vector center, double c = 0.0);
/// 1/2 x^T A x + b^T x + c, A symmetric.
TermPtr quadratic(Matrix A, Vector b, double c = 0.0);
/// weight * sum_{k in indices} (x_k - d_k)^2; empty indices means all.
TermPtr sq_dist(Vector d, double weight, std::vector<int> indices = {});
/// weight * x_i * x_j, i != j.
TermPtr bilinear(int i, int j, double weight);
/// weight * exp(scale * x_i)
TermPtr exp(int i, double weight, double scale = 1.0);
/// weight * log(scale * x_i + shift); NaN outside the domain.
TermPtr log(int i, double weight, double scale = 1.0, double shift = 0.0);
/// weight * sin(scale * x_i)
TermPtr sin(int i, double weight, double scale = 1.0);
/// f1(x) * f2(x)
TermPtr product(Expr f1, Expr f2);
/// U(x_block, anchor_rest): U with every coordinate outside the block frozen.
TermPtr fixed_others(Expr U, Vector anchor, Range block, Curvature block_curvature);
/// scale * (x_block - center_block)^T H (x_block - center_block); H symmetric.
TermPtr quad_form(Range block, Matrix H, Vector center_block, double scale);
/// s * t
TermPtr scaled(TermPtr t, double s);

using ValueFn = std::function<double(const Vector&)>;
using GradFn = std::function<Vector(const Vector&)>;
/// User oracle. Unknown support keeps it out of multi-block splits.
TermPtr custom(ValueFn value, GradFn grad, Curvature curvature,
               double smoothness = std::numeric_limits<double>::infinity(),
               std::optional<std::vector<int>> support = std::nullopt, std::string label = "custom");

}  // namespace terms

/// Convenience: an Expr from a custom value/gradient pair.
Expr make_expr(int dim, terms::ValueFn value, terms::GradFn grad,
               Curvature curvature = Curvature::kUnknown,
               double smoothness = std::numeric_limits<double>::infinity());

}  // namespace nova
