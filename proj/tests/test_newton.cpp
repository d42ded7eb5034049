#include <gtest/gtest.h>

#include <cmath>

#include "sketchnewton/newton.hpp"
#include "test_util.hpp"

using namespace sketchnewton;

namespace {

// f = 1/2 ||x||^2 written as ridge with A = 0 rows and mu = 1 is not allowed
// (A must be non-empty), so use A = 0 (1 x d).
RidgeProblem half_norm_squared(Eigen::Index d) { return RidgeProblem(Matrix::Zero(1, d), Vector::Zero(1), 1.0); }

RidgeProblem tiny_ridge() {
  Vector b(2);
  b << 1, 0;
  return RidgeProblem(Matrix::Identity(2, 2), b, 1.0);
}

}  // namespace

TEST(AlphaTau, Examples) {
  EXPECT_NEAR(alpha_tau(0.0), 0.57 + 1.0 / 15.0, 1e-15);
  EXPECT_LE(alpha_tau(0.0), 16.0 / 25.0);
  EXPECT_NEAR(alpha_tau(1.0), 0.57 + 16.0 / 15.0, 1e-15);
  EXPECT_THROW(alpha_tau(1.5), InvalidParams);
  EXPECT_THROW(alpha_tau(-0.1), InvalidParams);
}

TEST(AlphaTauEps, ClosedForm) {
  const double eps = 0.125;
  EXPECT_NEAR(alpha_tau_eps(0.0, eps), std::sqrt(1.125) / std::sqrt(0.875) * alpha_tau(0.0), 1e-14);
  EXPECT_NEAR(alpha_tau_eps(1.0, eps), std::sqrt(1.125) / 0.875 * alpha_tau(1.0), 1e-14);
}

TEST(PhaseConstants, EighthExample) {
  const PhaseConstants c = phase_constants(0.125, 0.1, 0.5, 0.0);
  // Independent arithmetic: gamma = (9/7)^2.
  const double r = 9.0 / 7.0;
  const double gamma = r * r;
  EXPECT_NEAR(gamma, 1.65306, 1e-5);
  const double eta = 0.125 * (1.0 - gamma / 2.0 - 0.1) / (r * r * r);
  EXPECT_NEAR(c.eta, eta, 1e-15);
  EXPECT_NEAR(c.eta, 4.3210e-3, 5e-8);
  const double nu = 0.05 * eta * eta / (1.0 + r * eta);
  EXPECT_NEAR(c.nu, nu, 1e-20);
  EXPECT_NEAR(c.nu, 9.28e-7, 1e-9);
  EXPECT_LE(c.eta, 1.0 / 16.0);
}

TEST(PhaseConstants, InvalidInputs) {
  EXPECT_THROW(phase_constants(0.3, 0.1, 0.5, 0.0), InvalidParams);
  EXPECT_THROW(phase_constants(0.125, 0.5, 0.5, 0.0), InvalidParams);  // a above the Armijo bound
  EXPECT_THROW(phase_constants(0.125, 0.1, 1.0, 0.0), InvalidParams);
  EXPECT_THROW(phase_constants(0.125, 0.1, 0.5, 2.0), InvalidParams);
  EXPECT_NEAR(max_armijo_fraction(0.125), 1.0 - 0.5 * (81.0 / 49.0), 1e-15);
}

TEST(IterationBound, LinearRate) {
  EXPECT_EQ(iteration_bound(0.0, alpha_tau(0.0), 1e-6, 0.004), 31);
  EXPECT_EQ(std::ceil(std::log(1e6) / std::log(25.0 / 16.0)), 31.0);
}

TEST(IterationBound, QuadraticExampleByDirectCheck) {
  const double alpha = 2.0, eta = 1.0 / 32.0, delta = eta * eta;
  const auto holds = [&](int t) {
    return std::pow(2.0, t) * std::log(1.0 / (alpha * eta)) >= std::log(1.0 / (alpha * std::sqrt(delta)));
  };
  const std::int64_t expected = holds(0) ? 0 : 1;
  ASSERT_TRUE(holds(1));
  EXPECT_EQ(iteration_bound(1.0, alpha, delta, eta), expected);
}

TEST(SketchedHessian, IdentityEqualsTrueHessian) {
  for (auto& c : testutil::all_families(21, 10, 4)) {
    const CompositeObjective& p = *c.problem;
    const Vector x = p.initial_point();
    const SketchOperator id = draw_sketch({SketchKind::Identity, 0, 0}, p.sqrt_rows());
    const SketchedHessian h = sketched_hessian(p, x, id);
    EXPECT_LE((h.dense() - p.hessian(x)).norm(), 1e-12 * (1.0 + p.hessian(x).norm())) << p.family();
  }
}

TEST(SketchedHessian, WoodburyAndDirectAgree) {
  for (auto& c : testutil::all_families(22, 40, 12)) {
    const CompositeObjective& p = *c.problem;
    CounterRng rng(23);
    const Vector x = c.random_point(rng);
    const SketchOperator op = draw_sketch({SketchKind::SJLT, 5, 9}, p.sqrt_rows());
    const SketchedHessian direct = sketched_hessian(p, x, op, SolvePath::Direct);
    const SketchedHessian wood = sketched_hessian(p, x, op, SolvePath::Woodbury);
    EXPECT_FALSE(direct.uses_woodbury());
    EXPECT_TRUE(wood.uses_woodbury());
    EXPECT_TRUE(sketched_hessian(p, x, op).uses_woodbury());  // m < d selects Woodbury
    const Vector r = testutil::random_vector(p.dim(), rng);
    const Vector a = direct.solve(r);
    EXPECT_LE((a - wood.solve(r)).norm(), 1e-8 * a.norm()) << p.family();
  }
}

TEST(NewtonStep, TinyRidgeExample) {
  const RidgeProblem p = tiny_ridge();
  const NewtonStep s = exact_newton_step(p, Vector::Zero(2));
  EXPECT_NEAR(s.direction[0], 0.5, 1e-15);
  EXPECT_NEAR(s.direction[1], 0.0, 1e-15);
  EXPECT_NEAR(s.decrement, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_LE((s.direction - p.closed_form_solution()).norm(), 1e-15);
  const NewtonStep t = newton_step(p, Vector::Zero(2), draw_sketch({SketchKind::Identity, 0, 0}, 2));
  EXPECT_EQ(t.direction, s.direction);
}

TEST(NewtonStep, ZeroAtOptimum) {
  CounterRng rng(31);
  const RidgeProblem p(testutil::random_matrix(20, 4, rng), testutil::random_vector(20, rng), 0.5);
  const Vector xs = p.closed_form_solution();
  const NewtonStep s = exact_newton_step(p, xs);
  EXPECT_LE(s.direction.norm(), 1e-12);
  EXPECT_LE(s.decrement, 1e-6);
}

TEST(NewtonStep, ExactDecrementMatchesDenseOracle) {
  for (auto& c : testutil::all_families(32, 10, 4)) {
    const CompositeObjective& p = *c.problem;
    CounterRng rng(33);
    const Vector x = c.random_point(rng);
    const Vector g = p.grad(x);
    const double oracle = std::sqrt(g.dot(p.hessian(x).fullPivLu().solve(g)));
    EXPECT_NEAR(exact_newton_step(p, x).decrement, oracle, 1e-9 * (1.0 + oracle)) << p.family();
    EXPECT_NEAR(exact_decrement(p, x), oracle, 1e-9 * (1.0 + oracle)) << p.family();
  }
}

// On the event ||C_S - I|| <= e/2 the decrement sandwich
// sqrt(1 - e) lambda <= lambda~ <= sqrt(1 + e) lambda holds deterministically;
// e = 2 * embedding_quality is the smallest such e. Strong regularization keeps
// the effective dimension below one so that m = 16 embeds well.
TEST(NewtonStep, SketchedDecrementSandwich) {
  CounterRng rng(40);
  const LogisticProblem p(testutil::random_matrix(20, 4, rng), testutil::random_labels(20, rng), 20.0);
  CounterRng xr(41);
  const Vector x = testutil::random_vector(4, xr, 0.3);
  const double lambda = exact_decrement(p, x);
  const Matrix h_inv_half = [&] {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(p.hessian(x));
    return Matrix(eig.eigenvectors() * eig.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                  eig.eigenvectors().transpose());
  }();
  const Matrix m = p.hess_sqrt(x) * h_inv_half;
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SketchOperator op = draw_sketch({SketchKind::SJLT, 16, seed}, 20);
    const double e = 2.0 * embedding_quality(op, m);
    const NewtonStep s = newton_step(p, x, op);
    if (e <= 1.0) {
      EXPECT_GE(s.decrement, std::sqrt(1.0 - e) * lambda * (1.0 - 1e-10)) << seed;
      EXPECT_LE(s.decrement, std::sqrt(1.0 + e) * lambda * (1.0 + 1e-10)) << seed;
    }
    if (e <= 0.5) ++good;
  }
  RecordProperty("quality_le_half", good);
  EXPECT_GE(good, 90);
}

TEST(LineSearch, QuadraticFullStep) {
  const RidgeProblem p = half_norm_squared(2);
  Vector x(2);
  x << 1, 0;
  const LineSearchResult r = backtracking_line_search(p, x, Vector(-x), p.value(x), p.grad(x), LineSearchParams{});
  EXPECT_EQ(r.step, 1.0);
  EXPECT_EQ(r.shrinks, 0);
  EXPECT_LE(r.x_new.norm(), 1e-15);
}

TEST(LineSearch, ZeroDirection) {
  const RidgeProblem p = half_norm_squared(2);
  Vector x(2);
  x << 1, 2;
  NewtonStep step;
  step.direction = Vector::Zero(2);
  const LineSearchResult r = backtracking_line_search(p, x, step, LineSearchParams{});
  EXPECT_EQ(r.step, 1.0);
  EXPECT_EQ(r.x_new, x);
}

TEST(LineSearch, ErrorsAndDomainGuard) {
  const RidgeProblem p = half_norm_squared(2);
  Vector x(2);
  x << 1, 0;
  EXPECT_THROW(backtracking_line_search(p, x, x, p.value(x), p.grad(x), LineSearchParams{}), InvalidParams);
  LineSearchParams stiff;
  stiff.max_shrinks = 2;
  // A huge step overshoots and needs many halvings.
  EXPECT_THROW(backtracking_line_search(p, x, Vector(-1e6 * x), p.value(x), p.grad(x), stiff), LineSearchStalled);

  const PortfolioProblem port(Matrix::Identity(2, 2), Vector::Zero(2), 1.0, 1.0);
  const Vector x0 = port.initial_point();
  Vector dir(2);
  dir << 10.0, 10.0;  // descent, but x0 + dir leaves the simplex
  const Vector g = port.grad(x0);
  ASSERT_LT(g.dot(dir), 0.0);
  const LineSearchResult r = backtracking_line_search(port, x0, dir, port.value(x0), g, LineSearchParams{});
  EXPECT_TRUE(port.in_domain(r.x_new));
  EXPECT_LT(r.step, 0.05);
}

TEST(LineSearch, ArmijoConditionHolds) {
  for (auto& c : testutil::all_families(50, 15, 5)) {
    const CompositeObjective& p = *c.problem;
    const Vector x = p.initial_point();
    const NewtonStep s = newton_step(p, x, draw_sketch({SketchKind::SJLT, 8, 1}, p.sqrt_rows()));
    const LineSearchParams params;
    const LineSearchResult r = backtracking_line_search(p, x, s, params);
    EXPECT_TRUE(p.in_domain(r.x_new));
    EXPECT_LE(r.f_new, p.value(x) + params.a * r.step * p.grad(x).dot(s.direction) + 1e-12) << p.family();
  }
}
