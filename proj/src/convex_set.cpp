#include "nova/convex_set.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nova {

const char* to_string(SetKind k) {
  switch (k) {
    case SetKind::kBox: return "box";
    case SetKind::kBall: return "ball";
    case SetKind::kNonnegOrthant: return "nonneg-orthant";
    case SetKind::kSimplex: return "simplex";
    case SetKind::kProduct: return "product";
    case SetKind::kCustom: return "custom";
  }
  return "custom";
}

Vector project_simplex(const Vector& u, double total) {
  // Sort-based threshold search.
  const int n = static_cast<int>(u.size());
  std::vector<double> s(u.data(), u.data() + n);
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (int k = 0; k < n; ++k) {
    cum += s[k];
    const double t = (cum - total) / (k + 1);
    if (k == n - 1 || s[k + 1] <= t) {
      theta = t;
      break;
    }
  }
  return (u.array() - theta).max(0.0).matrix();
}

ConvexSet ConvexSet::box(Vector lo, Vector hi) {
  if (lo.size() != hi.size()) throw InputError("box: bound sizes differ");
  for (int k = 0; k < lo.size(); ++k)
    if (!(lo[k] <= hi[k])) throw InputError("box: lower bound exceeds upper bound");
  ConvexSet s;
  s.kind_ = SetKind::kBox;
  s.dim_ = static_cast<int>(lo.size());
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

ConvexSet ConvexSet::box(int dim, double lo, double hi) {
  return box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

ConvexSet ConvexSet::free(int dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return box(dim, -inf, inf);
}

ConvexSet ConvexSet::ball(Vector center, double radius) {
  if (!(radius > 0)) throw ParameterError("ball radius must be positive");
  ConvexSet s;
  s.kind_ = SetKind::kBall;
  s.dim_ = static_cast<int>(center.size());
  s.center_ = std::move(center);
  s.radius_ = radius;
  return s;
}

ConvexSet ConvexSet::nonneg_orthant(int dim) {
  ConvexSet s = box(dim, 0.0, std::numeric_limits<double>::infinity());
  s.kind_ = SetKind::kNonnegOrthant;
  return s;
}

ConvexSet ConvexSet::simplex(int dim, double total) {
  if (!(total > 0)) throw ParameterError("simplex total must be positive");
  ConvexSet s;
  s.kind_ = SetKind::kSimplex;
  s.dim_ = dim;
  s.radius_ = total;
  return s;
}

ConvexSet ConvexSet::product(std::vector<ConvexSet> parts) {
  ConvexSet s;
  s.kind_ = SetKind::kProduct;
  for (const auto& p : parts) s.dim_ += p.dim();
  s.parts_ = std::move(parts);
  return s;
}

ConvexSet ConvexSet::custom(int dim, ProjectFn project, ContainsFn contains, SampleFn sample) {
  if (!project) throw InputError("custom set needs a projection oracle");
  ConvexSet s;
  s.kind_ = SetKind::kCustom;
  s.dim_ = dim;
  s.project_fn_ = std::make_shared<const ProjectFn>(std::move(project));
  if (contains) s.contains_fn_ = std::make_shared<const ContainsFn>(std::move(contains));
  if (sample) s.sample_fn_ = std::make_shared<const SampleFn>(std::move(sample));
  return s;
}

Vector ConvexSet::project(const Vector& u) const {
  if (u.size() != dim_) throw InputError("projection: point has the wrong dimension");
  switch (kind_) {
    case SetKind::kBox:
    case SetKind::kNonnegOrthant:
      return u.cwiseMax(lo_).cwiseMin(hi_);
    case SetKind::kBall: {
      const Vector r = u - center_;
      const double n = r.norm();
      if (n <= radius_) return u;
      return center_ + (radius_ / n) * r;
    }
    case SetKind::kSimplex:
      return project_simplex(u, radius_);
    case SetKind::kProduct: {
      Vector out(dim_);
      int off = 0;
      for (const auto& p : parts_) {
        out.segment(off, p.dim()) = p.project(u.segment(off, p.dim()));
        off += p.dim();
      }
      return out;
    }
    case SetKind::kCustom:
      return (*project_fn_)(u);
  }
  return u;
}

bool ConvexSet::contains(const Vector& x, double tol) const {
  if (x.size() != dim_) return false;
  switch (kind_) {
    case SetKind::kBox:
    case SetKind::kNonnegOrthant:
      for (int k = 0; k < dim_; ++k)
        if (x[k] < lo_[k] - tol || x[k] > hi_[k] + tol) return false;
      return true;
    case SetKind::kBall:
      return (x - center_).norm() <= radius_ + tol;
    case SetKind::kSimplex:
      return x.minCoeff() >= -tol && std::abs(x.sum() - radius_) <= tol * std::max(1, dim_);
    case SetKind::kProduct: {
      int off = 0;
      for (const auto& p : parts_) {
        if (!p.contains(x.segment(off, p.dim()), tol)) return false;
        off += p.dim();
      }
      return true;
    }
    case SetKind::kCustom:
      if (contains_fn_) return (*contains_fn_)(x, tol);
      return distance(x) <= tol;
  }
  return false;
}

Vector ConvexSet::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  switch (kind_) {
    case SetKind::kBox:
    case SetKind::kNonnegOrthant: {
      Vector x(dim_);
      for (int k = 0; k < dim_; ++k) {
        double lo = lo_[k], hi = hi_[k];
        if (!std::isfinite(lo) && !std::isfinite(hi)) {
          lo = -kSampleRadius;
          hi = kSampleRadius;
        } else if (!std::isfinite(lo)) {
          lo = hi - kSampleRadius;
        } else if (!std::isfinite(hi)) {
          hi = lo + kSampleRadius;
        }
        x[k] = lo + (hi - lo) * unit(rng);
      }
      return x;
    }
    case SetKind::kBall: {
      Vector dir(dim_);
      for (int k = 0; k < dim_; ++k) dir[k] = gauss(rng);
      const double n = dir.norm();
      if (n == 0.0) return center_;
      const double r = radius_ * std::pow(unit(rng), 1.0 / dim_);
      return center_ + (r / n) * dir;
    }
    case SetKind::kSimplex: {
      // Uniform on the simplex via normalized exponentials.
      Vector e(dim_);
      for (int k = 0; k < dim_; ++k) e[k] = -std::log(1.0 - unit(rng));
      return radius_ * e / e.sum();
    }
    case SetKind::kProduct: {
      Vector out(dim_);
      int off = 0;
      for (const auto& p : parts_) {
        out.segment(off, p.dim()) = p.sample(rng);
        off += p.dim();
      }
      return out;
    }
    case SetKind::kCustom: {
      if (sample_fn_) return (*sample_fn_)(rng);
      Vector u(dim_);
      for (int k = 0; k < dim_; ++k) u[k] = kSampleRadius * gauss(rng);
      return project(u);
    }
  }
  return Vector::Zero(dim_);
}

std::optional<std::vector<ConvexSet>> ConvexSet::split(const std::vector<int>& sizes) const {
  const int total = std::accumulate(sizes.begin(), sizes.end(), 0);
  if (total != dim_) return std::nullopt;
  if (sizes.size() == 1) return std::vector<ConvexSet>{*this};
  std::vector<ConvexSet> out;
  switch (kind_) {
    case SetKind::kBox:
    case SetKind::kNonnegOrthant: {
      int off = 0;
      for (int s : sizes) {
        ConvexSet b = box(lo_.segment(off, s), hi_.segment(off, s));
        b.kind_ = kind_;
        out.push_back(std::move(b));
        off += s;
      }
      return out;
    }
    case SetKind::kProduct: {
      // Each requested block must be a union of consecutive parts, or lie
      // inside a single part that can itself be split.
      std::size_t part = 0;
      int part_off = 0;  // consumed coordinates inside parts_[part]
      for (int s : sizes) {
        if (part >= parts_.size()) return std::nullopt;
        const ConvexSet& p = parts_[part];
        if (part_off == 0 && s >= p.dim()) {
          std::vector<ConvexSet> group;
          int got = 0;
          while (got < s && part < parts_.size()) {
            got += parts_[part].dim();
            group.push_back(parts_[part]);
            ++part;
          }
          if (got != s) return std::nullopt;
          out.push_back(group.size() == 1 ? group.front() : product(std::move(group)));
        } else {
          if (part_off + s > p.dim()) return std::nullopt;
          std::vector<int> sub{part_off, s, p.dim() - part_off - s};
          std::vector<int> nz;
          for (int v : sub)
            if (v > 0) nz.push_back(v);
          auto pieces = p.split(nz);
          if (!pieces) return std::nullopt;
          out.push_back((*pieces)[part_off > 0 ? 1 : 0]);
          part_off += s;
          if (part_off == p.dim()) {
            ++part;
            part_off = 0;
          }
        }
      }
      return out;
    }
    default:
      return std::nullopt;
  }
}

std::optional<double> ConvexSet::max_distance_from(const Vector& y) const {
  switch (kind_) {
    case SetKind::kBox:
    case SetKind::kNonnegOrthant: {
      double s = 0.0;
      for (int k = 0; k < dim_; ++k) {
        if (!std::isfinite(lo_[k]) || !std::isfinite(hi_[k])) return std::nullopt;
        const double d = std::max(std::abs(y[k] - lo_[k]), std::abs(hi_[k] - y[k]));
        s += d * d;
      }
      return std::sqrt(s);
    }
    case SetKind::kBall:
      return (y - center_).norm() + radius_;
    case SetKind::kSimplex: {
      double best = 0.0;
      for (int k = 0; k < dim_; ++k) {
        Vector v = Vector::Zero(dim_);
        v[k] = radius_;
        best = std::max(best, (v - y).norm());
      }
      return best;
    }
    case SetKind::kProduct: {
      double s = 0.0;
      int off = 0;
      for (const auto& p : parts_) {
        auto d = p.max_distance_from(y.segment(off, p.dim()));
        if (!d) return std::nullopt;
        s += *d * *d;
        off += p.dim();
      }
      return std::sqrt(s);
    }
    case SetKind::kCustom:
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<std::pair<Vector, Vector>> ConvexSet::bounding_box() const {
  switch (kind_) {
    case SetKind::kBox:
    case SetKind::kNonnegOrthant:
      if (!lo_.allFinite() || !hi_.allFinite()) return std::nullopt;
      return std::make_pair(lo_, hi_);
    case SetKind::kBall:
      return std::make_pair<Vector, Vector>(center_.array() - radius_, center_.array() + radius_);
    case SetKind::kSimplex:
      return std::make_pair<Vector, Vector>(Vector::Zero(dim_), Vector::Constant(dim_, radius_));
    case SetKind::kProduct: {
      Vector lo(dim_), hi(dim_);
      int off = 0;
      for (const auto& p : parts_) {
        auto b = p.bounding_box();
        if (!b) return std::nullopt;
        lo.segment(off, p.dim()) = b->first;
        hi.segment(off, p.dim()) = b->second;
        off += p.dim();
      }
      return std::make_pair(lo, hi);
    }
    case SetKind::kCustom:
      return std::nullopt;
  }
  return std::nullopt;
}

std::string ConvexSet::describe() const {
  std::ostringstream os;
  os << to_string(kind_) << "(dim=" << dim_;
  if (kind_ == SetKind::kBall) os << ", radius=" << radius_;
  if (kind_ == SetKind::kSimplex) os << ", total=" << radius_;
  if (kind_ == SetKind::kProduct) os << ", parts=" << parts_.size();
  os << ")";
  return os.str();
}

}  // namespace nova
