#include "nova/expr.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace nova {

const char* to_string(Curvature c) {
  switch (c) {
    case Curvature::kConstant: return "constant";
    case Curvature::kLinear: return "linear";
    case Curvature::kConvex: return "convex";
    case Curvature::kConcave: return "concave";
    case Curvature::kUnknown: return "unknown";
  }
  return "unknown";
}

Curvature combine(Curvature a, Curvature b) {
  if (a == Curvature::kConstant) return b;
  if (b == Curvature::kConstant) return a;
  if (a == Curvature::kLinear) return b;
  if (b == Curvature::kLinear) return a;
  if (a == b) return a;
  return Curvature::kUnknown;
}

Curvature scale_curvature(Curvature c, double s) {
  if (s == 0.0) return Curvature::kConstant;
  if (s > 0.0) return c;
  if (c == Curvature::kConvex) return Curvature::kConcave;
  if (c == Curvature::kConcave) return Curvature::kConvex;
  return c;
}

BlockLayout::BlockLayout(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  offsets_.reserve(sizes_.size());
  for (int s : sizes_) {
    if (s <= 0) throw InputError("block sizes must be positive");
    offsets_.push_back(dim_);
    dim_ += s;
  }
}

int BlockLayout::block_of(int k) const {
  for (int i = 0; i < count(); ++i)
    if (range(i).contains(k)) return i;
  throw InputError("coordinate " + std::to_string(k) + " outside block layout");
}

Vector BlockLayout::concat(const std::vector<Vector>& parts) const {
  Vector out(dim_);
  for (int i = 0; i < count(); ++i) out.segment(offsets_[i], sizes_[i]) = parts[i];
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> iota_indices(int n) {
  std::vector<int> idx(n);
  for (int k = 0; k < n; ++k) idx[k] = k;
  return idx;
}

double spectral_radius(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Curvature matrix_curvature(const Matrix& A) {
  if (A.size() == 0 || A.isZero(0.0)) return Curvature::kLinear;
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo >= -1e-14 * std::max(1.0, hi)) return Curvature::kConvex;
  if (hi <= 1e-14 * std::max(1.0, -lo)) return Curvature::kConcave;
  return Curvature::kUnknown;
}

class ConstantTerm final : public Term {
 public:
  explicit ConstantTerm(double c) : c_(c) {}
  double value(const Vector&) const override { return c_; }
  void add_gradient(const Vector&, Vector&) const override {}
  double smoothness() const override { return 0.0; }
  Curvature curvature() const override { return Curvature::kConstant; }
  std::optional<std::vector<int>> support() const override { return std::vector<int>{}; }
  TermPtr localize(Range) const override { return std::make_shared<ConstantTerm>(c_); }
  std::string name() const override {
    std::ostringstream os;
    os << "constant(" << c_ << ")";
    return os.str();
  }

 private:
  double c_;
};

class LinearTerm final : public Term {
 public:
  LinearTerm(Vector a, Vector center, double c) : a_(std::move(a)), center_(std::move(center)), c_(c) {
    if (a_.size() != center_.size()) throw InputError("linear term: size mismatch");
  }
  double value(const Vector& x) const override { return a_.dot(x - center_) + c_; }
  void add_gradient(const Vector&, Vector& g) const override { g += a_; }
  double smoothness() const override { return 0.0; }
  Curvature curvature() const override { return Curvature::kLinear; }
  std::optional<std::vector<int>> support() const override {
    std::vector<int> s;
    for (int k = 0; k < a_.size(); ++k)
      if (a_[k] != 0.0) s.push_back(k);
    return s;
  }
  std::optional<std::vector<TermPtr>> separate(const BlockLayout& layout) const override {
    std::vector<TermPtr> parts;
    for (int i = 0; i < layout.count(); ++i) {
      Vector ai = Vector::Zero(a_.size());
      const Range r = layout.range(i);
      ai.segment(r.offset, r.size) = a_.segment(r.offset, r.size);
      parts.push_back(std::make_shared<LinearTerm>(ai, center_, 0.0));
    }
    if (c_ != 0.0) parts.push_back(std::make_shared<ConstantTerm>(c_));
    return parts;
  }
  TermPtr localize(Range r) const override {
    return std::make_shared<LinearTerm>(a_.segment(r.offset, r.size), Vector::Zero(r.size), c_ - a_.dot(center_));
  }
  std::string name() const override { return "linear"; }

 private:
  Vector a_, center_;
  double c_;
};

class QuadraticTerm final : public Term {
 public:
  QuadraticTerm(Matrix A, Vector b, double c) : A_(std::move(A)), b_(std::move(b)), c_(c) {
    if (A_.rows() != A_.cols() || A_.rows() != b_.size())
      throw InputError("quadratic term: A must be square and match b");
    A_ = 0.5 * (A_ + A_.transpose()).eval();
    smooth_ = spectral_radius(A_);
    curv_ = matrix_curvature(A_);
  }
  double value(const Vector& x) const override { return 0.5 * x.dot(A_ * x) + b_.dot(x) + c_; }
  void add_gradient(const Vector& x, Vector& g) const override { g += A_ * x + b_; }
  double smoothness() const override { return smooth_; }
  Curvature curvature() const override { return curv_; }
  std::optional<std::vector<int>> support() const override {
    std::vector<int> s;
    for (int k = 0; k < b_.size(); ++k)
      if (b_[k] != 0.0 || !A_.row(k).isZero(0.0)) s.push_back(k);
    return s;
  }
  std::optional<std::vector<TermPtr>> separate(const BlockLayout& layout) const override {
    const int n = static_cast<int>(b_.size());
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if (A_(r, c) != 0.0 && layout.block_of(r) != layout.block_of(c)) return std::nullopt;
    std::vector<TermPtr> parts;
    for (int i = 0; i < layout.count(); ++i) {
      const Range r = layout.range(i);
      Matrix Ai = Matrix::Zero(n, n);
      Vector bi = Vector::Zero(n);
      Ai.block(r.offset, r.offset, r.size, r.size) = A_.block(r.offset, r.offset, r.size, r.size);
      bi.segment(r.offset, r.size) = b_.segment(r.offset, r.size);
      parts.push_back(std::make_shared<QuadraticTerm>(Ai, bi, 0.0));
    }
    if (c_ != 0.0) parts.push_back(std::make_shared<ConstantTerm>(c_));
    return parts;
  }
  TermPtr localize(Range r) const override {
    return std::make_shared<QuadraticTerm>(A_.block(r.offset, r.offset, r.size, r.size), b_.segment(r.offset, r.size),
                                           c_);
  }
  std::string name() const override { return "quadratic"; }

 private:
  Matrix A_;
  Vector b_;
  double c_;
  double smooth_ = 0.0;
  Curvature curv_ = Curvature::kUnknown;
};

class SqDistTerm final : public Term {
 public:
  SqDistTerm(Vector d, double w, std::vector<int> idx) : d_(std::move(d)), w_(w), idx_(std::move(idx)) {
    if (idx_.empty()) idx_ = iota_indices(static_cast<int>(d_.size()));
    for (int k : idx_)
      if (k < 0 || k >= d_.size()) throw InputError("sq_dist: index out of range");
  }
  double value(const Vector& x) const override {
    double s = 0.0;
    for (int k : idx_) {
      const double r = x[k] - d_[k];
      s += r * r;
    }
    return w_ * s;
  }
  void add_gradient(const Vector& x, Vector& g) const override {
    for (int k : idx_) g[k] += 2.0 * w_ * (x[k] - d_[k]);
  }
  double smoothness() const override { return 2.0 * std::abs(w_); }
  Curvature curvature() const override {
    return w_ > 0 ? Curvature::kConvex : (w_ < 0 ? Curvature::kConcave : Curvature::kConstant);
  }
  std::optional<std::vector<int>> support() const override { return idx_; }
  TermPtr localize(Range r) const override {
    std::vector<int> idx;
    for (int k : idx_) idx.push_back(k - r.offset);
    return std::make_shared<SqDistTerm>(d_.segment(r.offset, r.size), w_, idx);
  }
  std::optional<std::vector<TermPtr>> separate(const BlockLayout& layout) const override {
    std::vector<std::vector<int>> groups(layout.count());
    for (int k : idx_) groups[layout.block_of(k)].push_back(k);
    std::vector<TermPtr> parts;
    for (auto& g : groups)
      if (!g.empty()) parts.push_back(std::make_shared<SqDistTerm>(d_, w_, g));
    return parts;
  }
  std::string name() const override {
    std::ostringstream os;
    os << "sq_dist(w=" << w_ << ")";
    return os.str();
  }

 private:
  Vector d_;
  double w_;
  std::vector<int> idx_;
};

class BilinearTerm final : public Term {
 public:
  BilinearTerm(int i, int j, double w) : i_(i), j_(j), w_(w) {
    if (i == j) throw ParameterError("bilinear term needs two distinct coordinates");
  }
  double value(const Vector& x) const override { return w_ * x[i_] * x[j_]; }
  void add_gradient(const Vector& x, Vector& g) const override {
    g[i_] += w_ * x[j_];
    g[j_] += w_ * x[i_];
  }
  double smoothness() const override { return std::abs(w_); }
  Curvature curvature() const override { return w_ == 0.0 ? Curvature::kConstant : Curvature::kUnknown; }
  std::optional<std::vector<int>> support() const override { return std::vector<int>{i_, j_}; }
  std::optional<std::pair<TermPtr, TermPtr>> dc_parts() const override;
  std::string name() const override {
    std::ostringstream os;
    os << "bilinear(" << i_ << "," << j_ << ",w=" << w_ << ")";
    return os.str();
  }
  int i() const { return i_; }
  int j() const { return j_; }

 private:
  int i_, j_;
  double w_;
};

// Quadratic restricted to two coordinates: a*(x_i^2 + x_j^2)/2 + b*x_i*x_j.
// Used for the difference-of-convex parts of a bilinear term.
class PairQuadTerm final : public Term {
 public:
  PairQuadTerm(int i, int j, double diag, double off) : i_(i), j_(j), diag_(diag), off_(off) {}
  double value(const Vector& x) const override {
    return 0.5 * diag_ * (x[i_] * x[i_] + x[j_] * x[j_]) + off_ * x[i_] * x[j_];
  }
  void add_gradient(const Vector& x, Vector& g) const override {
    g[i_] += diag_ * x[i_] + off_ * x[j_];
    g[j_] += diag_ * x[j_] + off_ * x[i_];
  }
  double smoothness() const override { return std::abs(diag_) + std::abs(off_); }
  Curvature curvature() const override {
    // Eigenvalues diag +- off.
    const double lo = diag_ - std::abs(off_), hi = diag_ + std::abs(off_);
    if (lo >= 0) return hi == 0 ? Curvature::kConstant : Curvature::kConvex;
    if (hi <= 0) return Curvature::kConcave;
    return Curvature::kUnknown;
  }
  std::optional<std::vector<int>> support() const override { return std::vector<int>{i_, j_}; }
  std::optional<std::vector<TermPtr>> separate(const BlockLayout& layout) const override {
    if (off_ != 0.0) return std::nullopt;
    const Vector zero = Vector::Zero(layout.dim());
    return std::vector<TermPtr>{terms::sq_dist(zero, 0.5 * diag_, {i_}), terms::sq_dist(zero, 0.5 * diag_, {j_})};
  }
  std::string name() const override { return "pair_quadratic"; }

 private:
  int i_, j_;
  double diag_, off_;
};

std::optional<std::pair<TermPtr, TermPtr>> BilinearTerm::dc_parts() const {
  const double a = std::abs(w_);
  // x_i x_j = 1/2 (x_i + x_j)^2 - 1/2 (x_i^2 + x_j^2)
  auto sum_sq = std::make_shared<PairQuadTerm>(i_, j_, a, a);   // a/2 (x_i + x_j)^2
  auto sq_sum = std::make_shared<PairQuadTerm>(i_, j_, a, 0.0); // a/2 (x_i^2 + x_j^2)
  if (w_ >= 0) return std::make_pair<TermPtr, TermPtr>(sum_sq, sq_sum);
  return std::make_pair<TermPtr, TermPtr>(sq_sum, sum_sq);
}

class ScalarMapTerm final : public Term {
 public:
  enum class Kind { kExp, kLog, kSin };
  ScalarMapTerm(Kind kind, int i, double w, double a, double b) : kind_(kind), i_(i), w_(w), a_(a), b_(b) {}
  double value(const Vector& x) const override {
    const double t = a_ * x[i_];
    switch (kind_) {
      case Kind::kExp: return w_ * std::exp(t);
      case Kind::kLog: return t + b_ > 0 ? w_ * std::log(t + b_) : std::numeric_limits<double>::quiet_NaN();
      case Kind::kSin: return w_ * std::sin(t);
    }
    return 0.0;
  }
  void add_gradient(const Vector& x, Vector& g) const override {
    const double t = a_ * x[i_];
    switch (kind_) {
      case Kind::kExp: g[i_] += w_ * a_ * std::exp(t); break;
      case Kind::kLog:
        g[i_] += t + b_ > 0 ? w_ * a_ / (t + b_) : std::numeric_limits<double>::quiet_NaN();
        break;
      case Kind::kSin: g[i_] += w_ * a_ * std::cos(t); break;
    }
  }
  double smoothness() const override {
    return kind_ == Kind::kSin ? std::abs(w_) * a_ * a_ : kInf;
  }
  Curvature curvature() const override {
    if (w_ == 0.0 || a_ == 0.0) return Curvature::kConstant;
    switch (kind_) {
      case Kind::kExp: return w_ > 0 ? Curvature::kConvex : Curvature::kConcave;
      case Kind::kLog: return w_ > 0 ? Curvature::kConcave : Curvature::kConvex;
      case Kind::kSin: return Curvature::kUnknown;
    }
    return Curvature::kUnknown;
  }
  std::optional<std::vector<int>> support() const override { return std::vector<int>{i_}; }
  std::string name() const override {
    switch (kind_) {
      case Kind::kExp: return "exp";
      case Kind::kLog: return "log";
      case Kind::kSin: return "sin";
    }
    return "?";
  }

 private:
  Kind kind_;
  int i_;
  double w_, a_, b_;
};

class ProductTerm final : public Term {
 public:
  ProductTerm(Expr f1, Expr f2) : f1_(std::move(f1)), f2_(std::move(f2)) {}
  double value(const Vector& x) const override { return f1_.value(x) * f2_.value(x); }
  void add_gradient(const Vector& x, Vector& g) const override {
    const double v1 = f1_.value(x), v2 = f2_.value(x);
    g += v2 * f1_.gradient(x) + v1 * f2_.gradient(x);
  }
  double smoothness() const override { return kInf; }
  Curvature curvature() const override { return Curvature::kUnknown; }
  std::optional<std::vector<int>> support() const override {
    auto s1 = f1_.support(), s2 = f2_.support();
    if (!s1 || !s2) return std::nullopt;
    std::set<int> u(s1->begin(), s1->end());
    u.insert(s2->begin(), s2->end());
    return std::vector<int>(u.begin(), u.end());
  }
  std::string name() const override { return "product"; }

 private:
  Expr f1_, f2_;
};

class FixedOthersTerm final : public Term {
 public:
  // Terms of U that live inside the block are kept as they are, terms that
  // avoid it are folded into a constant, and only the rest see the anchor.
  FixedOthersTerm(Expr U, Vector anchor, Range block, Curvature curv)
      : anchor_(std::move(anchor)), block_(block), curv_(curv), smooth_(U.smoothness()) {
    const int n = U.dim();
    inside_ = Expr(n);
    mixed_ = Expr(n);
    std::vector<int> sizes;
    if (block_.offset > 0) sizes.push_back(block_.offset);
    sizes.push_back(block_.size);
    if (block_.offset + block_.size < n) sizes.push_back(n - block_.offset - block_.size);
    const BlockLayout three(sizes);
    auto classify = [&](const TermPtr& t) -> bool {
      auto s = t->support();
      if (!s) return false;
      bool in = false, out = false;
      for (int k : *s) (block_.contains(k) ? in : out) = true;
      if (in && out) return false;
      if (in) inside_ += Expr(n, t);
      else konst_ += t->value(anchor_);
      return true;
    };
    for (const auto& t : U.terms()) {
      if (classify(t)) continue;
      auto parts = t->separate(three);
      const bool ok = parts && std::all_of(parts->begin(), parts->end(),
                                           [](const TermPtr& p) { return p->support().has_value(); });
      if (!ok) {
        mixed_ += Expr(n, t);
        continue;
      }
      for (const auto& p : *parts) classify(p);
    }
  }
  double value(const Vector& x) const override {
    double v = inside_.value(x) + konst_;
    if (!mixed_.empty()) v += mixed_.value(merge(x));
    return v;
  }
  void add_gradient(const Vector& x, Vector& g) const override {
    inside_.add_gradient(x, g);
    if (!mixed_.empty()) {
      const Vector full = mixed_.gradient(merge(x));
      g.segment(block_.offset, block_.size) += full.segment(block_.offset, block_.size);
    }
  }
  double smoothness() const override { return smooth_; }
  Curvature curvature() const override { return curv_; }
  std::optional<std::vector<int>> support() const override {
    std::vector<int> s(block_.size);
    for (int k = 0; k < block_.size; ++k) s[k] = block_.offset + k;
    return s;
  }
  TermPtr localize(Range r) const override;
  std::string name() const override { return "fixed_others"; }

 private:
  Vector merge(const Vector& x) const {
    Vector z = anchor_;
    z.segment(block_.offset, block_.size) = x.segment(block_.offset, block_.size);
    return z;
  }
  Vector anchor_;
  Range block_;
  Curvature curv_;
  double smooth_;
  Expr inside_, mixed_;
  double konst_ = 0.0;
};

// Sum of local terms plus a constant, with declared curvature and smoothness.
class LocalSumTerm final : public Term {
 public:
  LocalSumTerm(Expr local, double konst, Curvature curv, double smooth)
      : local_(std::move(local)), konst_(konst), curv_(curv), smooth_(smooth) {}
  double value(const Vector& x) const override { return local_.value(x) + konst_; }
  void add_gradient(const Vector& x, Vector& g) const override { local_.add_gradient(x, g); }
  double smoothness() const override { return smooth_; }
  Curvature curvature() const override { return curv_; }
  std::optional<std::vector<int>> support() const override {
    std::vector<int> s(local_.dim());
    for (int k = 0; k < local_.dim(); ++k) s[k] = k;
    return s;
  }
  std::string name() const override { return "fixed_others"; }

 private:
  Expr local_;
  double konst_;
  Curvature curv_;
  double smooth_;
};

TermPtr FixedOthersTerm::localize(Range r) const {
  if (!mixed_.empty() || r.offset != block_.offset || r.size != block_.size) return nullptr;
  Expr local(r.size);
  for (const auto& t : inside_.terms()) {
    TermPtr lt = t->localize(r);
    if (!lt) return nullptr;
    local += Expr(r.size, lt);
  }
  return std::make_shared<LocalSumTerm>(local, konst_, curv_, smooth_);
}

class QuadFormTerm final : public Term {
 public:
  QuadFormTerm(Range block, Matrix H, Vector center, double scale)
      : block_(block), H_(std::move(H)), center_(std::move(center)), scale_(scale) {
    if (H_.rows() != block_.size || H_.cols() != block_.size || center_.size() != block_.size)
      throw InputError("quad_form: matrix/center must match block size");
    H_ = 0.5 * (H_ + H_.transpose()).eval();
    smooth_ = 2.0 * std::abs(scale_) * spectral_radius(H_);
    curv_ = scale_curvature(matrix_curvature(H_), scale_);
  }
  // Element loops: blocks are small and this is the innermost kernel.
  double value(const Vector& x) const override {
    double s = 0.0;
    for (int a = 0; a < block_.size; ++a) {
      const double ra = x[block_.offset + a] - center_[a];
      double row = 0.0;
      for (int b = 0; b < block_.size; ++b) row += H_(a, b) * (x[block_.offset + b] - center_[b]);
      s += ra * row;
    }
    return scale_ * s;
  }
  void add_gradient(const Vector& x, Vector& g) const override {
    for (int a = 0; a < block_.size; ++a) {
      double row = 0.0;
      for (int b = 0; b < block_.size; ++b) row += H_(a, b) * (x[block_.offset + b] - center_[b]);
      g[block_.offset + a] += 2.0 * scale_ * row;
    }
  }
  double smoothness() const override { return smooth_; }
  Curvature curvature() const override { return curv_; }
  std::optional<std::vector<int>> support() const override {
    std::vector<int> s(block_.size);
    for (int k = 0; k < block_.size; ++k) s[k] = block_.offset + k;
    return s;
  }
  TermPtr localize(Range r) const override {
    return std::make_shared<QuadFormTerm>(Range{block_.offset - r.offset, block_.size}, H_, center_, scale_);
  }
  std::string name() const override { return "quad_form"; }

 private:
  Range block_;
  Matrix H_;
  Vector center_;
  double scale_;
  double smooth_ = 0.0;
  Curvature curv_ = Curvature::kUnknown;
};

class ScaledTerm final : public Term {
 public:
  ScaledTerm(TermPtr t, double s) : t_(std::move(t)), s_(s) {}
  double value(const Vector& x) const override { return s_ * t_->value(x); }
  void add_gradient(const Vector& x, Vector& g) const override {
    Vector tmp = Vector::Zero(g.size());
    t_->add_gradient(x, tmp);
    g += s_ * tmp;
  }
  double smoothness() const override { return std::abs(s_) * t_->smoothness(); }
  Curvature curvature() const override { return scale_curvature(t_->curvature(), s_); }
  std::optional<std::vector<int>> support() const override { return t_->support(); }
  std::optional<std::vector<TermPtr>> separate(const BlockLayout& layout) const override {
    auto parts = t_->separate(layout);
    if (!parts) return std::nullopt;
    for (auto& p : *parts) p = std::make_shared<ScaledTerm>(p, s_);
    return parts;
  }
  TermPtr localize(Range r) const override {
    TermPtr local = t_->localize(r);
    return local ? std::make_shared<ScaledTerm>(local, s_) : nullptr;
  }
  std::optional<std::pair<TermPtr, TermPtr>> dc_parts() const override {
    auto parts = t_->dc_parts();
    if (!parts) return std::nullopt;
    const double a = std::abs(s_);
    TermPtr p = std::make_shared<ScaledTerm>(parts->first, a);
    TermPtr m = std::make_shared<ScaledTerm>(parts->second, a);
    if (s_ >= 0) return std::make_pair(p, m);
    return std::make_pair(m, p);
  }
  std::string name() const override {
    std::ostringstream os;
    os << s_ << "*" << t_->name();
    return os.str();
  }

 private:
  TermPtr t_;
  double s_;
};

class CustomTerm final : public Term {
 public:
  CustomTerm(terms::ValueFn v, terms::GradFn g, Curvature c, double smooth,
             std::optional<std::vector<int>> support, std::string label)
      : v_(std::move(v)), g_(std::move(g)), c_(c), smooth_(smooth), support_(std::move(support)),
        label_(std::move(label)) {}
  double value(const Vector& x) const override { return v_(x); }
  void add_gradient(const Vector& x, Vector& g) const override { g += g_(x); }
  double smoothness() const override { return smooth_; }
  Curvature curvature() const override { return c_; }
  std::optional<std::vector<int>> support() const override { return support_; }
  std::string name() const override { return label_; }

 private:
  terms::ValueFn v_;
  terms::GradFn g_;
  Curvature c_;
  double smooth_;
  std::optional<std::vector<int>> support_;
  std::string label_;
};

// A global-coordinate term whose support lies inside one block, viewed as a
// function of that block's local coordinates.
class EmbeddedTerm final : public Term {
 public:
  EmbeddedTerm(TermPtr t, int dim, Range block) : t_(std::move(t)), dim_(dim), block_(block) {}
  double value(const Vector& x) const override { return t_->value(lift(x)); }
  void add_gradient(const Vector& x, Vector& g) const override {
    Vector full = Vector::Zero(dim_);
    t_->add_gradient(lift(x), full);
    g += full.segment(block_.offset, block_.size);
  }
  double smoothness() const override { return t_->smoothness(); }
  Curvature curvature() const override { return t_->curvature(); }
  std::optional<std::vector<int>> support() const override {
    auto s = t_->support();
    if (!s) return std::nullopt;
    for (int& k : *s) k -= block_.offset;
    return s;
  }
  std::optional<std::pair<TermPtr, TermPtr>> dc_parts() const override {
    auto parts = t_->dc_parts();
    if (!parts) return std::nullopt;
    return std::make_pair<TermPtr, TermPtr>(std::make_shared<EmbeddedTerm>(parts->first, dim_, block_),
                                            std::make_shared<EmbeddedTerm>(parts->second, dim_, block_));
  }
  std::string name() const override { return t_->name(); }

 private:
  Vector lift(const Vector& x) const {
    Vector full = Vector::Zero(dim_);
    full.segment(block_.offset, block_.size) = x;
    return full;
  }
  TermPtr t_;
  int dim_;
  Range block_;
};

}  // namespace

namespace terms {

TermPtr constant(double c) { return std::make_shared<ConstantTerm>(c); }
TermPtr linear(Vector a, Vector center, double c) {
  return std::make_shared<LinearTerm>(std::move(a), std::move(center), c);
}
TermPtr quadratic(Matrix A, Vector b, double c) {
  return std::make_shared<QuadraticTerm>(std::move(A), std::move(b), c);
}
TermPtr sq_dist(Vector d, double weight, std::vector<int> indices) {
  return std::make_shared<SqDistTerm>(std::move(d), weight, std::move(indices));
}
TermPtr bilinear(int i, int j, double weight) { return std::make_shared<BilinearTerm>(i, j, weight); }
TermPtr exp(int i, double weight, double scale) {
  return std::make_shared<ScalarMapTerm>(ScalarMapTerm::Kind::kExp, i, weight, scale, 0.0);
}
TermPtr log(int i, double weight, double scale, double shift) {
  return std::make_shared<ScalarMapTerm>(ScalarMapTerm::Kind::kLog, i, weight, scale, shift);
}
TermPtr sin(int i, double weight, double scale) {
  return std::make_shared<ScalarMapTerm>(ScalarMapTerm::Kind::kSin, i, weight, scale, 0.0);
}
TermPtr product(Expr f1, Expr f2) { return std::make_shared<ProductTerm>(std::move(f1), std::move(f2)); }
TermPtr fixed_others(Expr U, Vector anchor, Range block, Curvature block_curvature) {
  return std::make_shared<FixedOthersTerm>(std::move(U), std::move(anchor), block, block_curvature);
}
TermPtr quad_form(Range block, Matrix H, Vector center_block, double scale) {
  return std::make_shared<QuadFormTerm>(block, std::move(H), std::move(center_block), scale);
}
TermPtr scaled(TermPtr t, double s) { return std::make_shared<ScaledTerm>(std::move(t), s); }
TermPtr custom(ValueFn value, GradFn grad, Curvature curvature, double smoothness,
               std::optional<std::vector<int>> support, std::string label) {
  return std::make_shared<CustomTerm>(std::move(value), std::move(grad), curvature, smoothness,
                                      std::move(support), std::move(label));
}

}  // namespace terms

Expr make_expr(int dim, terms::ValueFn value, terms::GradFn grad, Curvature curvature, double smoothness) {
  return Expr(dim, terms::custom(std::move(value), std::move(grad), curvature, smoothness));
}

Expr::Expr(int dim, std::vector<TermPtr> terms) : dim_(dim), terms_(std::move(terms)) {}

double Expr::value(const Vector& x) const {
  if (x.size() != dim_)
    throw InputError("expression of dimension " + std::to_string(dim_) + " evaluated at a point of size " +
                     std::to_string(x.size()));
  double s = 0.0;
  for (const auto& t : terms_) s += t->value(x);
  return s;
}

Vector Expr::gradient(const Vector& x) const {
  Vector g = Vector::Zero(dim_);
  add_gradient(x, g);
  return g;
}

void Expr::add_gradient(const Vector& x, Vector& grad) const {
  if (x.size() != dim_) throw InputError("gradient evaluated at a point of the wrong size");
  for (const auto& t : terms_) t->add_gradient(x, grad);
}

double Expr::smoothness() const {
  double s = 0.0;
  for (const auto& t : terms_) s += t->smoothness();
  return s;
}

Curvature Expr::curvature() const {
  Curvature c = Curvature::kConstant;
  for (const auto& t : terms_) c = combine(c, t->curvature());
  return c;
}

std::optional<std::vector<int>> Expr::support() const {
  std::set<int> u;
  for (const auto& t : terms_) {
    auto s = t->support();
    if (!s) return std::nullopt;
    u.insert(s->begin(), s->end());
  }
  return std::vector<int>(u.begin(), u.end());
}

Expr Expr::operator+(const Expr& other) const {
  Expr out = *this;
  out += other;
  return out;
}

Expr& Expr::operator+=(const Expr& other) {
  if (dim_ == 0) dim_ = other.dim_;
  if (other.dim_ != dim_ && !other.terms_.empty()) throw InputError("adding expressions of different dimension");
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  return *this;
}

Expr Expr::scaled(double s) const {
  std::vector<TermPtr> ts;
  ts.reserve(terms_.size());
  for (const auto& t : terms_) ts.push_back(terms::scaled(t, s));
  return Expr(dim_, std::move(ts));
}

Expr Expr::plus_constant(double c) const {
  Expr out = *this;
  out.terms_.push_back(terms::constant(c));
  return out;
}

std::optional<std::vector<Expr>> Expr::split(const BlockLayout& layout) const {
  if (layout.dim() != dim_) throw InputError("block layout does not match expression dimension");
  const int nb = layout.count();
  std::vector<Expr> out;
  for (int i = 0; i < nb; ++i) out.emplace_back(layout.range(i).size);
  if (nb == 1) {
    out[0] = *this;
    return out;
  }

  // Assign one term to its block; returns false if it spans several blocks.
  auto place = [&](const TermPtr& t) -> bool {
    auto s = t->support();
    if (!s) return false;
    if (s->empty()) {
      const double c = t->value(Vector::Zero(dim_)) / nb;
      for (auto& e : out) e += Expr(e.dim(), terms::constant(c));
      return true;
    }
    const int b = layout.block_of(s->front());
    for (int k : *s)
      if (layout.block_of(k) != b) return false;
    TermPtr local = t->localize(layout.range(b));
    if (!local) local = std::make_shared<EmbeddedTerm>(t, dim_, layout.range(b));
    out[b] += Expr(layout.range(b).size, local);
    return true;
  };

  for (const auto& t : terms_) {
    if (place(t)) continue;
    auto parts = t->separate(layout);
    if (!parts) return std::nullopt;
    for (const auto& p : *parts)
      if (!place(p)) return std::nullopt;
  }
  return out;
}

std::string Expr::describe() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < terms_.size(); ++k) os << (k ? " + " : "") << terms_[k]->name();
  if (terms_.empty()) os << "0";
  return os.str();
}

}  // namespace nova
