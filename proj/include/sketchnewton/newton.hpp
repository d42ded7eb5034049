#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "sketchnewton/errors.hpp"
#include "sketchnewton/linalg.hpp"
#include "sketchnewton/problems.hpp"
#include "sketchnewton/sketch.hpp"

namespace sketchnewton {

/// Largest Armijo fraction a admissible for sampling precision eps:
/// 1 - ((1 + eps) / (1 - eps))^2 / 2.
inline double max_armijo_fraction(double eps) {
  const double ratio = (1.0 + eps) / (1.0 - eps);
  return 1.0 - 0.5 * ratio * ratio;
}

struct LineSearchParams {
  double a = 0.1;
  double b = 0.5;
  int max_shrinks = 60;

  void validate() const {
    if (!(a > 0.0 && a <= 1.0)) throw InvalidParams("line search: a must lie in (0, 1]");
    if (!(b > 0.0 && b < 1.0)) throw InvalidParams("line search: b must lie in (0, 1)");
    if (max_shrinks < 0) throw InvalidParams("line search: max_shrinks must be non-negative");
  }

  void validate(double eps) const {
    validate();
    if (a > max_armijo_fraction(eps)) {
      throw InvalidParams("line search: a = " + std::to_string(a) + " exceeds the bound " +
                          std::to_string(max_armijo_fraction(eps)) + " for eps = " + std::to_string(eps));
    }
  }
};

/// alpha(tau) = 0.57 + 16^tau / 15.
inline double alpha_tau(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidParams("alpha_tau: tau must lie in [0, 1]");
  return 0.57 + std::pow(16.0, tau) / 15.0;
}

/// alpha(tau, eps) = (1 + eps)^{1/2} / (1 - eps)^{(1 + tau)/2} * alpha(tau).
inline double alpha_tau_eps(double tau, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidParams("alpha_tau_eps: eps must lie in (0, 1)");
  return std::sqrt(1.0 + eps) / std::pow(1.0 - eps, 0.5 * (1.0 + tau)) * alpha_tau(tau);
}

/// Scalars governing both phases of the sketched Newton methods.
struct PhaseConstants {
  double eps = 0.125;
  double a = 0.1;
  double b = 0.5;
  double eta = 0.0;            ///< phase-1 / phase-2 decrement threshold
  double nu = 0.0;             ///< guaranteed phase-1 decrease
  double tau = 0.0;
  double alpha_tau = 0.0;      ///< alpha(tau)
  double alpha_tau_eps = 0.0;  ///< alpha(tau, eps)
};

inline PhaseConstants phase_constants(double eps, double a, double b, double tau) {
  if (!(eps > 0.0 && eps < 0.25)) throw InvalidParams("phase_constants: eps must lie in (0, 1/4)");
  LineSearchParams{a, b, 0}.validate(eps);
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidParams("phase_constants: tau must lie in [0, 1]");
  const double ratio = (1.0 + eps) / (1.0 - eps);
  PhaseConstants c;
  c.eps = eps;
  c.a = a;
  c.b = b;
  c.tau = tau;
  c.eta = 0.125 * (1.0 - 0.5 * ratio * ratio - a) / (ratio * ratio * ratio);
  c.nu = a * b * c.eta * c.eta / (1.0 + ratio * c.eta);
  c.alpha_tau = alpha_tau(tau);
  c.alpha_tau_eps = alpha_tau_eps(tau, eps);
  return c;
}

/// Which linear-algebra route realizes H_S^{-1}.
enum class SolvePath { Auto, Direct, Woodbury };

/// Factored form of H_S = (S B)^T (S B) + G: either a d x d Cholesky factor or
/// a Woodbury capacitance handle of size m x m.
class SketchedHessian {
 public:
  SketchedHessian(Matrix sketched_sqrt, RegularizerHessian g, SolvePath path = SolvePath::Auto)
      : sb_(std::move(sketched_sqrt)), g_(std::move(g)) {
    if (sb_.cols() != g_.dim()) throw DimensionMismatch("sketched hessian: dimension mismatch");
    use_woodbury_ = path == SolvePath::Woodbury || (path == SolvePath::Auto && sb_.rows() < sb_.cols());
    if (use_woodbury_) {
      woodbury_ = WoodburySolver(sb_, [g = g_](const Vector& v) { return g.solve(v); });
    } else {
      direct_ = SpdFactorization(dense());
    }
  }

  bool uses_woodbury() const noexcept { return use_woodbury_; }
  Eigen::Index sketch_rows() const noexcept { return sb_.rows(); }
  const Matrix& sketched_sqrt() const noexcept { return sb_; }

  Vector solve(const Vector& r) const { return use_woodbury_ ? woodbury_.solve(r) : direct_.solve(r); }

  Matrix dense() const {
    Matrix h = Matrix::Zero(sb_.cols(), sb_.cols());
    h.selfadjointView<Eigen::Lower>().rankUpdate(sb_.transpose());
    h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
    g_.add_to(h);
    return h;
  }

 private:
  Matrix sb_;
  RegularizerHessian g_;
  bool use_woodbury_ = false;
  SpdFactorization direct_;
  WoodburySolver woodbury_;
};

inline SketchedHessian sketched_hessian(const CompositeObjective& problem, const Vector& x,
                                        const SketchOperator& op, SolvePath path = SolvePath::Auto) {
  const Matrix b = problem.hess_sqrt(x);
  return SketchedHessian(op.apply(b), problem.g_hess(x), path);
}

struct NewtonStep {
  Vector direction;
  double decrement = 0.0;
  std::int64_t sketch_rows = 0;
};

namespace detail {

inline NewtonStep step_from(const Vector& grad, const SketchedHessian& h) {
  NewtonStep step;
  step.direction = -h.solve(grad);
  step.sketch_rows = h.sketch_rows();
  double inner = -grad.dot(step.direction);
  if (inner < 0.0) {
    if (inner < -1e-12 * std::max(1.0, grad.squaredNorm())) {
      throw NotPositiveDefinite("newton step: sketched Hessian produced an ascent direction");
    }
    inner = 0.0;
  }
  step.decrement = std::sqrt(inner);
  return step;
}

}  // namespace detail

/// v = -H_S(x)^{-1} grad f(x) and the sketched decrement sqrt(-<grad f(x), v>).
inline NewtonStep newton_step(const CompositeObjective& problem, const Vector& x, const SketchOperator& op,
                              SolvePath path = SolvePath::Auto) {
  const Vector g = problem.grad(x);
  return detail::step_from(g, sketched_hessian(problem, x, op, path));
}

inline NewtonStep exact_newton_step(const CompositeObjective& problem, const Vector& x,
                                    SolvePath path = SolvePath::Auto) {
  return newton_step(problem, x, draw_sketch({SketchKind::Identity, 0, 0}, problem.sqrt_rows()), path);
}

/// Exact Newton decrement sqrt(grad^T H^{-1} grad) through a dense solve.
inline double exact_decrement(const CompositeObjective& problem, const Vector& x) {
  const Vector g = problem.grad(x);
  const SpdFactorization h(problem.hessian(x));
  return std::sqrt(std::max(0.0, g.dot(h.solve(g))));
}

struct LineSearchResult {
  double step = 1.0;
  Vector x_new;
  double f_new = 0.0;
  int shrinks = 0;
};

/// Backtracking from s = 1 until f(x + s v) <= f(x) + a s <grad f(x), v>;
/// points outside the domain count as violations.
inline LineSearchResult backtracking_line_search(const CompositeObjective& problem, const Vector& x,
                                                 const Vector& direction, double f_x, const Vector& grad,
                                                 const LineSearchParams& params, double initial_step = 1.0) {
  const double slope = grad.dot(direction);
  if (slope > 0.0) throw InvalidParams("line search: direction is not a descent direction");
  LineSearchResult result;
  if (direction.squaredNorm() == 0.0) {
    result.step = initial_step;
    result.x_new = x;
    result.f_new = f_x;
    return result;
  }
  double s = initial_step;
  for (int shrink = 0; shrink <= params.max_shrinks; ++shrink) {
    Vector candidate = x + s * direction;
    const double f_candidate = problem.value_or_inf(candidate);
    if (f_candidate <= f_x + params.a * s * slope) {
      result.step = s;
      result.x_new = std::move(candidate);
      result.f_new = f_candidate;
      result.shrinks = shrink;
      return result;
    }
    s *= params.b;
  }
  throw LineSearchStalled("line search: Armijo condition not met after " +
                          std::to_string(params.max_shrinks) + " shrinks");
}

inline LineSearchResult backtracking_line_search(const CompositeObjective& problem, const Vector& x,
                                                 const NewtonStep& step, const LineSearchParams& params) {
  return backtracking_line_search(problem, x, step.direction, problem.value(x), problem.grad(x), params);
}

/// Smallest t >= 0 with (1 + tau)^t log(1 / (alpha^{1/tau} eta)) >= log(1 / (alpha^{1/tau} sqrt(delta))).
/// For tau == 0 the linear-rate count ceil(log(1/delta) / log(25/16)) is returned.
inline std::int64_t iteration_bound(double tau, double alpha, double delta, double eta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidParams("iteration_bound: delta must lie in (0, 1)");
  if (tau == 0.0) {
    return static_cast<std::int64_t>(std::ceil(std::log(1.0 / delta) / std::log(25.0 / 16.0)));
  }
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidParams("iteration_bound: tau must lie in [0, 1]");
  if (!(alpha > 0.0 && eta > 0.0)) throw InvalidParams("iteration_bound: alpha and eta must be positive");
  const double scale = std::pow(alpha, 1.0 / tau);
  if (!(eta * scale < 1.0) || !(std::sqrt(delta) * scale < 1.0)) {
    throw InvalidParams("iteration_bound: requires eta * alpha^{1/tau} < 1 and sqrt(delta) * alpha^{1/tau} < 1");
  }
  const double lhs_log = std::log(1.0 / (scale * eta));
  const double rhs = std::log(1.0 / (scale * std::sqrt(delta)));
  std::int64_t t = 0;
  double growth = 1.0;
  while (growth * lhs_log < rhs) {
    growth *= 1.0 + tau;
    ++t;
  }
  return t;
}

}  // namespace sketchnewton
