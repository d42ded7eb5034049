#pragma once

// Independent oracles shared by the unit and acceptance tests.

#include <cmath>
#include <functional>
#include <memory>

#include "sketchnewton.hpp"

namespace testutil {

using sketchnewton::CounterRng;
using sketchnewton::Matrix;
using sketchnewton::Vector;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, CounterRng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  return m;
}

inline Vector random_vector(Eigen::Index n, CounterRng& rng, double scale = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

inline Vector random_labels(Eigen::Index n, CounterRng& rng) {
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.rademacher();
  return y;
}

// H_n by the recursive block definition [[H, H], [H, -H]].
inline Matrix sylvester_hadamard(Eigen::Index n) {
  Matrix h = Matrix::Ones(1, 1);
  while (h.rows() < n) {
    const Eigen::Index k = h.rows();
    Matrix next(2 * k, 2 * k);
    next << h, h, h, -h;
    h = next;
  }
  return h;
}

// Central differences with step scaled to |x_i|.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    Vector xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    g[i] = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

inline Matrix fd_hessian(const std::function<Vector(const Vector&)>& grad, const Vector& x, double h = 1e-6) {
  const Eigen::Index d = x.size();
  Matrix hess(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    Vector xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    hess.col(i) = (grad(xp) - grad(xm)) / (2.0 * step);
  }
  return 0.5 * (hess + hess.transpose());
}

// Ridge optimum by normal equations through a generic dense solver.
inline Vector ridge_optimum(const Matrix& a, const Vector& b, double mu) {
  const Matrix h = a.transpose() * a + mu * Matrix::Identity(a.cols(), a.cols());
  return h.fullPivLu().solve(a.transpose() * b);
}

// Exact-Newton reference solution driven to machine precision.
inline Vector reference_solution(const sketchnewton::CompositeObjective& p) {
  sketchnewton::SolverConfig c;
  c.method = sketchnewton::Method::ExactNewton;
  c.decrement_stop = 1e-12;
  c.max_iters = 500;
  return sketchnewton::solve_exact_newton(p, c).x_final;
}

// Labels from a noisy planted linear model.
inline sketchnewton::LogisticProblem make_logistic(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double mu,
                                                   double feature_scale = 1.0) {
  CounterRng rng(seed, 91);
  const Matrix a = random_matrix(n, d, rng, feature_scale / std::sqrt(static_cast<double>(d)));
  const Vector w = random_vector(d, rng, 2.0);
  Vector y(n);
  const Vector z = a * w;
  for (Eigen::Index i = 0; i < n; ++i) y[i] = (z[i] + 0.5 * rng.normal()) >= 0.0 ? 1.0 : -1.0;
  return sketchnewton::LogisticProblem(a, y, mu);
}

inline sketchnewton::RidgeProblem make_ridge(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double mu) {
  CounterRng rng(seed, 92);
  const Matrix a = random_matrix(n, d, rng);
  const Vector b = a * random_vector(d, rng) + 0.1 * random_vector(n, rng);
  return sketchnewton::RidgeProblem(a, b, mu);
}

struct ProblemCase {
  std::unique_ptr<sketchnewton::CompositeObjective> problem;
  std::function<Vector(CounterRng&)> random_point;  // strictly in-domain
};

// One small instance of each family plus an in-domain point sampler.
inline std::vector<ProblemCase> all_families(std::uint64_t seed, Eigen::Index n = 12, Eigen::Index d = 5) {
  using namespace sketchnewton;
  CounterRng rng(seed, 77);
  std::vector<ProblemCase> out;
  {
    Matrix a = random_matrix(n, d, rng);
    Vector b = random_vector(n, rng);
    out.push_back({std::make_unique<RidgeProblem>(a, b, 0.3),
                   [d](CounterRng& r) { return random_vector(d, r); }});
  }
  {
    Matrix a = random_matrix(n, d, rng);
    Vector y = random_labels(n, rng);
    out.push_back({std::make_unique<LogisticProblem>(a, y, 0.2),
                   [d](CounterRng& r) { return random_vector(d, r); }});
  }
  {
    Matrix x = random_matrix(n, 3, rng);
    Matrix k = gaussian_kernel(x, x, 1.5);
    k = 0.5 * (k + k.transpose()).eval();
    Vector y = random_labels(n, rng);
    out.push_back({std::make_unique<KernelLogisticProblem>(k, y, 0.1),
                   [n](CounterRng& r) { return random_vector(n, r); }});
  }
  {
    Matrix a = random_matrix(n, d, rng);
    Vector ret = random_vector(d, rng, 0.1);
    out.push_back({std::make_unique<PortfolioProblem>(a, ret, 0.7, 0.05), [d](CounterRng& r) {
                     Vector w(d + 1);
                     for (Eigen::Index i = 0; i <= d; ++i) w[i] = 0.2 + r.uniform();
                     w /= w.sum();
                     return Vector(w.head(d));
                   }});
  }
  {
    // variable dimension = rows of A
    const Eigen::Index rows = d, cols = n;
    Matrix a = random_matrix(rows, cols, rng);
    Vector y = random_vector(rows, rng);
    const double lambda = 2.0;
    const double bound = lambda / (0.5 + a.colwise().norm().maxCoeff());
    out.push_back({std::make_unique<DualLassoProblem>(a, y, lambda, 0.4), [rows, bound](CounterRng& r) {
                     Vector x(rows);
                     for (Eigen::Index i = 0; i < rows; ++i) x[i] = (2.0 * r.uniform() - 1.0) * bound / std::sqrt(double(rows));
                     return x;
                   }});
  }
  {
    Matrix a = random_matrix(n, d, rng);
    Vector b = Vector::Ones(n);
    Vector v = random_vector(d, rng);
    const double radius = 0.5 / a.rowwise().norm().maxCoeff();
    out.push_back({std::make_unique<PolyProjProblem>(a, b, v, 0.6, Vector::Zero(d)), [d, radius](CounterRng& r) {
                     Vector x = random_vector(d, r);
                     return Vector(x * (radius * r.uniform() / x.norm()));
                   }});
  }
  return out;
}

}  // namespace testutil
