#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "sketchnewton/errors.hpp"
#include "sketchnewton/linalg.hpp"

namespace sketchnewton {

/// Hessian of the regularizer/barrier g, kept in a structured form so that
/// its inverse can be applied in closed form.
class RegularizerHessian {
 public:
  enum class Structure { ScaledIdentity, Diagonal, DiagonalPlusRankOne };

  static RegularizerHessian scaled_identity(Eigen::Index d, double scale) {
    RegularizerHessian h;
    h.structure_ = Structure::ScaledIdentity;
    h.diagonal_ = Vector::Constant(d, scale);
    return h;
  }

  static RegularizerHessian diagonal(Vector diag) {
    RegularizerHessian h;
    h.structure_ = Structure::Diagonal;
    h.diagonal_ = std::move(diag);
    return h;
  }

  /// diag(diag) + weight * u u^T with weight >= 0.
  static RegularizerHessian diagonal_plus_rank_one(Vector diag, double weight, Vector u) {
    RegularizerHessian h;
    h.structure_ = Structure::DiagonalPlusRankOne;
    h.diagonal_ = std::move(diag);
    h.weight_ = weight;
    h.u_ = std::move(u);
    return h;
  }

  Structure structure() const noexcept { return structure_; }
  Eigen::Index dim() const noexcept { return diagonal_.size(); }
  const Vector& diag() const noexcept { return diagonal_; }
  double rank_one_weight() const noexcept { return weight_; }
  const Vector& rank_one_vector() const noexcept { return u_; }

  Matrix dense() const {
    Matrix g = diagonal_.asDiagonal();
    if (structure_ == Structure::DiagonalPlusRankOne) g.noalias() += weight_ * u_ * u_.transpose();
    return g;
  }

  void add_to(Matrix& m) const {
    m.diagonal() += diagonal_;
    if (structure_ == Structure::DiagonalPlusRankOne) m.noalias() += weight_ * u_ * u_.transpose();
  }

  Vector apply(const Vector& v) const {
    Vector out = diagonal_.cwiseProduct(v);
    if (structure_ == Structure::DiagonalPlusRankOne) out += weight_ * u_.dot(v) * u_;
    return out;
  }

  /// G^{-1} v; Sherman-Morrison for the rank-one structure.
  Vector solve(const Vector& v) const {
    if (v.size() != dim()) throw DimensionMismatch("regularizer hessian solve: size mismatch");
    Vector out = v.cwiseQuotient(diagonal_);
    if (structure_ == Structure::DiagonalPlusRankOne) {
      const Vector d_inv_u = u_.cwiseQuotient(diagonal_);
      const double denom = 1.0 + weight_ * u_.dot(d_inv_u);
      out -= (weight_ * u_.dot(out) / denom) * d_inv_u;
    }
    return out;
  }

 private:
  Structure structure_ = Structure::ScaledIdentity;
  Vector diagonal_;
  double weight_ = 0.0;
  Vector u_;
};

/// f(x) = f0(x) + g(x) with an n x d square root B(x) of the Hessian of f0
/// (B^T B = hess f0) and a structured, mu-strongly convex Hessian of g.
class CompositeObjective {
 public:
  virtual ~CompositeObjective() = default;

  virtual std::string_view family() const = 0;
  /// Optimization variable dimension.
  virtual Eigen::Index dim() const = 0;
  /// Row count of the Hessian square root.
  virtual Eigen::Index sqrt_rows() const = 0;
  virtual double mu() const = 0;
  virtual bool in_domain(const Vector& x) const = 0;
  virtual Vector initial_point() const = 0;

  double value(const Vector& x) const {
    require_domain(x, "value");
    return value_unchecked(x);
  }
  Vector grad(const Vector& x) const {
    require_domain(x, "grad");
    return grad_unchecked(x);
  }
  Matrix hess_sqrt(const Vector& x) const {
    require_domain(x, "hess_sqrt");
    return hess_sqrt_unchecked(x);
  }
  RegularizerHessian g_hess(const Vector& x) const {
    require_domain(x, "g_hess");
    return g_hess_unchecked(x);
  }

  /// f(x), or +inf outside the domain.
  double value_or_inf(const Vector& x) const {
    if (!in_domain(x)) return std::numeric_limits<double>::infinity();
    const double v = value_unchecked(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  }

  /// Full d x d Hessian B^T B + G.
  Matrix hessian(const Vector& x) const {
    const Matrix b = hess_sqrt(x);
    Matrix h = Matrix::Zero(dim(), dim());
    h.selfadjointView<Eigen::Lower>().rankUpdate(b.transpose());
    h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
    g_hess_unchecked(x).add_to(h);
    return h;
  }

 protected:
  virtual double value_unchecked(const Vector& x) const = 0;
  virtual Vector grad_unchecked(const Vector& x) const = 0;
  virtual Matrix hess_sqrt_unchecked(const Vector& x) const = 0;
  virtual RegularizerHessian g_hess_unchecked(const Vector& x) const = 0;

  void require_domain(const Vector& x, const char* what) const {
    if (x.size() != dim()) {
      throw DimensionMismatch(std::string(what) + ": point has " + std::to_string(x.size()) +
                              " entries, expected " + std::to_string(dim()));
    }
    if (!in_domain(x)) throw OutOfDomain(std::string(what) + ": point outside the domain of " +
                                         std::string(family()));
  }
};

namespace detail {

inline void require(bool ok, const char* message) {
  if (!ok) throw InvalidParams(message);
}

// log(1 + exp(-t)) without overflow.
inline double softplus_neg(double t) {
  return t > 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

}  // namespace detail

/// 1/2 ||Ax - b||^2 + mu/2 ||x||^2.
class RidgeProblem : public CompositeObjective {
 public:
  RidgeProblem(Matrix a, Vector b, double mu) : a_(std::move(a)), b_(std::move(b)), mu_(mu) {
    detail::require(a_.rows() >= 1 && a_.cols() >= 1, "ridge: empty data matrix");
    detail::require(b_.size() == a_.rows(), "ridge: response length must match rows of A");
    detail::require(mu_ > 0.0, "ridge: mu must be positive");
  }

  std::string_view family() const override { return "ridge"; }
  Eigen::Index dim() const override { return a_.cols(); }
  Eigen::Index sqrt_rows() const override { return a_.rows(); }
  double mu() const override { return mu_; }
  bool in_domain(const Vector& x) const override { return x.size() == dim() && x.allFinite(); }
  Vector initial_point() const override { return Vector::Zero(dim()); }

  const Matrix& data() const noexcept { return a_; }
  const Vector& response() const noexcept { return b_; }

  /// Closed-form minimizer (A^T A + mu I)^{-1} A^T b.
  Vector closed_form_solution() const {
    Matrix h = a_.transpose() * a_;
    h.diagonal().array() += mu_;
    return h.ldlt().solve(a_.transpose() * b_);
  }

 protected:
  double value_unchecked(const Vector& x) const override {
    return 0.5 * (a_ * x - b_).squaredNorm() + 0.5 * mu_ * x.squaredNorm();
  }
  Vector grad_unchecked(const Vector& x) const override {
    return a_.transpose() * (a_ * x - b_) + mu_ * x;
  }
  Matrix hess_sqrt_unchecked(const Vector&) const override { return a_; }
  RegularizerHessian g_hess_unchecked(const Vector&) const override {
    return RegularizerHessian::scaled_identity(dim(), mu_);
  }

 private:
  Matrix a_;
  Vector b_;
  double mu_;
};

/// sum_i log(1 + exp(-y_i a_i^T x)) + mu/2 ||x||^2 with labels y_i in {-1, +1}.
class LogisticProblem : public CompositeObjective {
 public:
  LogisticProblem(Matrix a, Vector y, double mu) : a_(std::move(a)), y_(std::move(y)), mu_(mu) {
    detail::require(a_.rows() >= 1 && a_.cols() >= 1, "logistic: empty data matrix");
    detail::require(y_.size() == a_.rows(), "logistic: label count must match rows of A");
    detail::require(mu_ > 0.0, "logistic: mu must be positive");
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      detail::require(y_[i] == 1.0 || y_[i] == -1.0, "logistic: labels must be -1 or +1");
    }
  }

  std::string_view family() const override { return "logistic"; }
  Eigen::Index dim() const override { return a_.cols(); }
  Eigen::Index sqrt_rows() const override { return a_.rows(); }
  double mu() const override { return mu_; }
  bool in_domain(const Vector& x) const override { return x.size() == dim() && x.allFinite(); }
  Vector initial_point() const override { return Vector::Zero(dim()); }

  const Matrix& data() const noexcept { return a_; }
  const Vector& labels() const noexcept { return y_; }

 protected:
  double value_unchecked(const Vector& x) const override {
    const Vector margins = y_.cwiseProduct(a_ * x);
    double total = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) total += detail::softplus_neg(margins[i]);
    return total + 0.5 * mu_ * x.squaredNorm();
  }
  Vector grad_unchecked(const Vector& x) const override {
    const Vector margins = y_.cwiseProduct(a_ * x);
    Vector weights(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
      weights[i] = -y_[i] / (1.0 + std::exp(margins[i]));
    }
    return a_.transpose() * weights + mu_ * x;
  }
  Matrix hess_sqrt_unchecked(const Vector& x) const override {
    const Vector margins = y_.cwiseProduct(a_ * x);
    // h_i = e^{z/2} / (1 + e^z) = 1 / (2 cosh(z/2)).
    Vector h(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) h[i] = 0.5 / std::cosh(0.5 * margins[i]);
    return h.asDiagonal() * a_;
  }
  RegularizerHessian g_hess_unchecked(const Vector&) const override {
    return RegularizerHessian::scaled_identity(dim(), mu_);
  }

 private:
  Matrix a_;
  Vector y_;
  double mu_;
};

/// Logistic regression whose feature matrix is an n x n kernel Gram matrix.
class KernelLogisticProblem : public LogisticProblem {
 public:
  KernelLogisticProblem(Matrix k, Vector y, double mu) : LogisticProblem(check_kernel(std::move(k)), std::move(y), mu) {}

  std::string_view family() const override { return "kernel_logistic"; }

 private:
  static Matrix check_kernel(Matrix k) {
    detail::require(k.rows() == k.cols(), "kernel logistic: Gram matrix must be square");
    const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
    detail::require((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale,
                    "kernel logistic: Gram matrix must be symmetric");
    return k;
  }
};

/// Log-barrier portfolio problem:
///   -r^T x + alpha <x, A^T A x> - mu sum_i log x_i - mu log(1 - <1, x>).
class PortfolioProblem : public CompositeObjective {
 public:
  PortfolioProblem(Matrix a, Vector r, double alpha, double mu)
      : a_(std::move(a)), r_(std::move(r)), alpha_(alpha), mu_(mu) {
    detail::require(a_.rows() >= 1 && a_.cols() >= 1, "portfolio: empty factor matrix");
    detail::require(r_.size() == a_.cols(), "portfolio: returns length must match columns of A");
    detail::require(alpha_ > 0.0, "portfolio: alpha must be positive");
    detail::require(mu_ > 0.0, "portfolio: mu must be positive");
  }

  std::string_view family() const override { return "portfolio"; }
  Eigen::Index dim() const override { return a_.cols(); }
  Eigen::Index sqrt_rows() const override { return a_.rows(); }
  double mu() const override { return mu_; }
  bool in_domain(const Vector& x) const override {
    return x.size() == dim() && x.allFinite() && (x.array() > 0.0).all() && x.sum() < 1.0;
  }
  Vector initial_point() const override {
    return Vector::Constant(dim(), 1.0 / (2.0 * static_cast<double>(dim())));
  }

 protected:
  double value_unchecked(const Vector& x) const override {
    return -r_.dot(x) + alpha_ * (a_ * x).squaredNorm() - mu_ * x.array().log().sum() -
           mu_ * std::log(1.0 - x.sum());
  }
  Vector grad_unchecked(const Vector& x) const override {
    const double slack = 1.0 - x.sum();
    Vector g = -r_ + 2.0 * alpha_ * (a_.transpose() * (a_ * x));
    g.array() += -mu_ / x.array() + mu_ / slack;
    return g;
  }
  // The quadratic term alpha <x, Sigma x> has Hessian 2 alpha A^T A.
  Matrix hess_sqrt_unchecked(const Vector&) const override { return std::sqrt(2.0 * alpha_) * a_; }
  RegularizerHessian g_hess_unchecked(const Vector& x) const override {
    const double slack = 1.0 - x.sum();
    return RegularizerHessian::diagonal_plus_rank_one(mu_ * x.array().square().inverse().matrix(),
                                                      mu_ / (slack * slack), Vector::Ones(dim()));
  }

 private:
  Matrix a_;
  Vector r_;
  double alpha_;
  double mu_;
};

/// Barrier subproblem of the dual Lasso. The variable lives in R^n (n = rows of A):
///   -sum_j log(lambda - <a_j, x>) - sum_j log(lambda + <a_j, x>) + mu/2 ||y - x||^2
/// where a_j are the d columns of A. The Hessian square root has d rows.
class DualLassoProblem : public CompositeObjective {
 public:
  DualLassoProblem(Matrix a, Vector y, double lambda, double mu)
      : a_(std::move(a)), y_(std::move(y)), lambda_(lambda), mu_(mu) {
    detail::require(a_.rows() >= 1 && a_.cols() >= 1, "dual lasso: empty data matrix");
    detail::require(y_.size() == a_.rows(), "dual lasso: y length must match rows of A");
    detail::require(lambda_ > 0.0, "dual lasso: lambda must be positive");
    detail::require(mu_ > 0.0, "dual lasso: mu must be positive");
  }

  std::string_view family() const override { return "dual_lasso"; }
  Eigen::Index dim() const override { return a_.rows(); }
  Eigen::Index sqrt_rows() const override { return a_.cols(); }
  double mu() const override { return mu_; }
  bool in_domain(const Vector& x) const override {
    if (x.size() != dim() || !x.allFinite()) return false;
    return (a_.transpose() * x).cwiseAbs().maxCoeff() < lambda_;
  }
  Vector initial_point() const override { return Vector::Zero(dim()); }

 protected:
  double value_unchecked(const Vector& x) const override {
    const Vector u = a_.transpose() * x;
    return -(lambda_ - u.array()).log().sum() - (lambda_ + u.array()).log().sum() +
           0.5 * mu_ * (y_ - x).squaredNorm();
  }
  Vector grad_unchecked(const Vector& x) const override {
    const Vector u = a_.transpose() * x;
    const Vector w = ((lambda_ - u.array()).inverse() - (lambda_ + u.array()).inverse()).matrix();
    return a_ * w + mu_ * (x - y_);
  }
  // Row j is sqrt((lambda - u_j)^-2 + (lambda + u_j)^-2) a_j^T.
  Matrix hess_sqrt_unchecked(const Vector& x) const override {
    const Vector u = a_.transpose() * x;
    const Vector w =
        ((lambda_ - u.array()).square().inverse() + (lambda_ + u.array()).square().inverse()).sqrt().matrix();
    return w.asDiagonal() * a_.transpose();
  }
  RegularizerHessian g_hess_unchecked(const Vector&) const override {
    return RegularizerHessian::scaled_identity(dim(), mu_);
  }

 private:
  Matrix a_;
  Vector y_;
  double lambda_;
  double mu_;
};

/// Barrier subproblem of projecting v onto {x : Ax < b}:
///   -sum_i log(b_i - a_i^T x) + mu/2 ||x - v||^2.
class PolyProjProblem : public CompositeObjective {
 public:
  PolyProjProblem(Matrix a, Vector b, Vector v, double mu, Vector x0)
      : a_(std::move(a)), b_(std::move(b)), v_(std::move(v)), mu_(mu), x0_(std::move(x0)) {
    detail::require(a_.rows() >= 1 && a_.cols() >= 1, "polyproj: empty constraint matrix");
    detail::require(b_.size() == a_.rows(), "polyproj: b length must match rows of A");
    detail::require(v_.size() == a_.cols(), "polyproj: anchor length must match columns of A");
    detail::require(mu_ > 0.0, "polyproj: mu must be positive");
    detail::require(x0_.size() == a_.cols() && in_domain(x0_), "polyproj: x0 must be strictly feasible");
  }

  std::string_view family() const override { return "polyproj"; }
  Eigen::Index dim() const override { return a_.cols(); }
  Eigen::Index sqrt_rows() const override { return a_.rows(); }
  double mu() const override { return mu_; }
  bool in_domain(const Vector& x) const override {
    return x.size() == dim() && x.allFinite() && ((b_ - a_ * x).array() > 0.0).all();
  }
  Vector initial_point() const override { return x0_; }

 protected:
  double value_unchecked(const Vector& x) const override {
    return -(b_ - a_ * x).array().log().sum() + 0.5 * mu_ * (x - v_).squaredNorm();
  }
  Vector grad_unchecked(const Vector& x) const override {
    const Vector inv_slack = (b_ - a_ * x).array().inverse().matrix();
    return a_.transpose() * inv_slack + mu_ * (x - v_);
  }
  Matrix hess_sqrt_unchecked(const Vector& x) const override {
    const Vector inv_slack = (b_ - a_ * x).array().inverse().matrix();
    return inv_slack.asDiagonal() * a_;
  }
  RegularizerHessian g_hess_unchecked(const Vector&) const override {
    return RegularizerHessian::scaled_identity(dim(), mu_);
  }

 private:
  Matrix a_;
  Vector b_;
  Vector v_;
  double mu_;
  Vector x0_;
};

/// sum_i s_i / (s_i + mu) over the eigenvalues s_i of B^T B.
inline double effective_dimension_of(const Matrix& hess_sqrt, double mu) {
  if (!(mu > 0.0)) throw InvalidParams("effective_dimension: mu must be positive");
  Matrix gram = Matrix::Zero(hess_sqrt.cols(), hess_sqrt.cols());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(hess_sqrt.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  double total = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double s = std::max(0.0, eig.eigenvalues()[i]);
    total += s / (s + mu);
  }
  return total;
}

/// Local effective dimension trace(hess f0 (hess f0 + mu I)^{-1}) at x.
inline double effective_dimension(const CompositeObjective& problem, const Vector& x, double mu) {
  return effective_dimension_of(problem.hess_sqrt(x), mu);
}

inline double effective_dimension(const CompositeObjective& problem, const Vector& x) {
  return effective_dimension(problem, x, problem.mu());
}

}  // namespace sketchnewton
