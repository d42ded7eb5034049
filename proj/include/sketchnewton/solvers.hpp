#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sketchnewton/errors.hpp"
#include "sketchnewton/linalg.hpp"
#include "sketchnewton/newton.hpp"
#include "sketchnewton/problems.hpp"
#include "sketchnewton/rng.hpp"
#include "sketchnewton/sketch.hpp"

namespace sketchnewton {

enum class Method { EffDimNS, AdaptiveNS, AdaptiveNSPractical, ExactNewton, GD, NAG };

inline std::string_view to_string(Method method) {
  switch (method) {
    case Method::EffDimNS: return "effdim";
    case Method::AdaptiveNS: return "adaptive";
    case Method::AdaptiveNSPractical: return "adaptive_practical";
    case Method::ExactNewton: return "newton";
    case Method::GD: return "gd";
    case Method::NAG: return "nag";
  }
  return "unknown";
}

inline Method parse_method(std::string_view name) {
  if (name == "effdim" || name == "effdim_ns" || name == "ns") return Method::EffDimNS;
  if (name == "adaptive" || name == "adaptive_ns") return Method::AdaptiveNS;
  if (name == "adaptive_practical" || name == "practical" || name == "ns_ada") return Method::AdaptiveNSPractical;
  if (name == "newton" || name == "exact_newton" || name == "ne") return Method::ExactNewton;
  if (name == "gd") return Method::GD;
  if (name == "nag") return Method::NAG;
  throw ConfigError("unknown solver method '" + std::string(name) + "'");
}

inline bool is_second_order(Method method) { return method != Method::GD && method != Method::NAG; }

struct SolverConfig {
  Method method = Method::AdaptiveNSPractical;
  SketchKind sketch = SketchKind::SJLT;
  std::int64_t m1_bar = 0;   ///< phase-1 sketch size (EffDimNS)
  std::int64_t m2_bar = 0;   ///< phase-2 sketch size (EffDimNS)
  std::int64_t m0_bar = 100; ///< initial sketch size (adaptive variants)
  double tau = 0.0;
  double delta = 1e-6;
  double eps = 0.125;
  LineSearchParams line_search;
  double c1 = 2.0;
  double c2 = 1.0;
  std::int64_t max_iters = 0;  ///< 0 selects 500 (second order) or 100000 (first order)
  double decrement_stop = 1e-6;
  std::optional<double> reference_value;  ///< first-order stop: (f - ref) / (1 + |ref|) < first_order_tol
  double first_order_tol = 1e-6;
  double grad_tol = 1e-10;
  bool diagnostics = false;
  bool record_iterates = false;
  std::uint64_t seed = 0;

  std::int64_t iteration_limit() const {
    if (max_iters > 0) return max_iters;
    return is_second_order(method) ? 500 : 100000;
  }

  void validate() const {
    line_search.validate();
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("solver: tau must lie in [0, 1]");
    if (!(decrement_stop > 0.0)) throw ConfigError("solver: decrement_stop must be positive");
    switch (method) {
      case Method::EffDimNS:
        if (m1_bar < 1 || m2_bar < 1) throw ConfigError("solver: effdim needs m1_bar, m2_bar >= 1");
        if (!(delta > 0.0 && delta < 0.5)) throw ConfigError("solver: delta must lie in (0, 1/2)");
        break;
      case Method::AdaptiveNS:
        if (m0_bar < 1) throw ConfigError("solver: m0_bar must be at least 1");
        if (!(delta > 0.0 && delta < 0.5)) throw ConfigError("solver: delta must lie in (0, 1/2)");
        break;
      case Method::AdaptiveNSPractical:
        if (m0_bar < 1) throw ConfigError("solver: m0_bar must be at least 1");
        if (!(c1 > 0.0 && c2 > 0.0)) throw ConfigError("solver: c1 and c2 must be positive");
        break;
      default:
        break;
    }
  }
};

enum class Termination { DecrementBelowThreshold, TargetReached, MaxIters, Stalled };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::DecrementBelowThreshold: return "decrement_below_threshold";
    case Termination::TargetReached: return "target_reached";
    case Termination::MaxIters: return "max_iters";
    case Termination::Stalled: return "stalled";
  }
  return "unknown";
}

struct IterationRecord {
  std::int64_t iter = 0;
  double f = 0.0;
  double decrement = std::numeric_limits<double>::quiet_NaN();        ///< sketched decrement at x_t
  double exact_decrement = std::numeric_limits<double>::quiet_NaN();  ///< diagnostics only
  double effective_dim = std::numeric_limits<double>::quiet_NaN();    ///< diagnostics only
  std::int64_t sketch_m = 0;
  double step = 0.0;
  bool accepted = false;
  int phase = 0;
  double seconds = 0.0;
  Vector x;  ///< iterate x_t, only with record_iterates
};

struct SolveResult {
  Vector x_final;
  Termination termination = Termination::MaxIters;
  std::vector<IterationRecord> trace;
  double total_seconds = 0.0;
  std::string message;
};

namespace detail {

class SolveSession {
 public:
  SolveSession(const CompositeObjective& problem, const SolverConfig& config)
      : problem_(problem), config_(config), start_(std::chrono::steady_clock::now()) {}

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  /// Next independent draw; the Identity sketch is used at or beyond m >= n.
  SketchOperator draw(std::int64_t m) {
    const std::int64_t n = problem_.sqrt_rows();
    const std::uint64_t seed = derive_seed(config_.seed, draws_++);
    if (config_.sketch == SketchKind::Identity || m >= n) return draw_sketch({SketchKind::Identity, n, seed}, n);
    return draw_sketch({config_.sketch, m, seed}, n);
  }

  NewtonStep step_at(const Vector& x, const Vector& grad, std::int64_t m) {
    const SketchOperator op = draw(m);
    return step_from(grad, sketched_hessian(problem_, x, op));
  }

  IterationRecord record(std::int64_t iter, const Vector& x, double f) const {
    IterationRecord rec;
    rec.iter = iter;
    rec.f = f;
    if (config_.diagnostics) {
      rec.exact_decrement = exact_decrement(problem_, x);
      rec.effective_dim = effective_dimension(problem_, x);
    }
    if (config_.record_iterates) rec.x = x;
    return rec;
  }

  void push(IterationRecord rec) {
    rec.seconds = elapsed();
    result_.trace.push_back(std::move(rec));
  }

  SolveResult finish(Vector x, Termination termination, std::string message = {}) {
    result_.x_final = std::move(x);
    result_.termination = termination;
    result_.message = std::move(message);
    result_.total_seconds = elapsed();
    return std::move(result_);
  }

 private:
  const CompositeObjective& problem_;
  const SolverConfig& config_;
  std::chrono::steady_clock::time_point start_;
  std::uint64_t draws_ = 0;
  SolveResult result_;
};

inline std::int64_t capped_double(std::int64_t m, std::int64_t n) { return std::min(2 * m, std::max<std::int64_t>(n, 1)); }

}  // namespace detail

/// Fixed two-phase sketch sizes: m1_bar while the sketched decrement exceeds
/// eta, m2_bar afterwards. Returns once lambda~^2 <= 3 delta / 4.
inline SolveResult solve_effdim_ns(const CompositeObjective& problem, const SolverConfig& config) {
  config.validate();
  const PhaseConstants pc = phase_constants(config.eps, config.line_search.a, config.line_search.b, config.tau);
  detail::SolveSession session(problem, config);
  Vector x = problem.initial_point();
  double f = problem.value(x);
  std::int64_t m = config.m1_bar;
  for (std::int64_t t = 0; t < config.iteration_limit(); ++t) {
    IterationRecord rec = session.record(t, x, f);
    NewtonStep step;
    Vector g;
    try {
      g = problem.grad(x);
      step = session.step_at(x, g, m);
    } catch (const NotPositiveDefinite& e) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::Stalled, e.what());
    }
    rec.decrement = step.decrement;
    rec.sketch_m = step.sketch_rows;
    rec.phase = step.decrement > pc.eta ? 1 : 2;
    if (step.decrement * step.decrement <= 0.75 * config.delta) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::DecrementBelowThreshold);
    }
    LineSearchResult ls;
    try {
      ls = backtracking_line_search(problem, x, step.direction, f, g, config.line_search);
    } catch (const LineSearchStalled& e) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::Stalled, e.what());
    }
    rec.step = ls.step;
    rec.accepted = true;
    session.push(std::move(rec));
    x = std::move(ls.x_new);
    f = ls.f_new;
    m = step.decrement > pc.eta ? config.m1_bar : config.m2_bar;
  }
  return session.finish(std::move(x), Termination::MaxIters);
}

/// Adaptive sketch size with the phase-1 decrease test f(x_nsk) - f(x) <= -nu
/// and the phase-2 test lambda~(x_nsk) <= alpha(tau, eps) lambda~(x)^{1 + tau}
/// (evaluated with a fresh sketch whose direction is reused on acceptance).
/// Rejected steps keep x and double m, capped at n. Returns once
/// lambda~^2 <= delta / d.
inline SolveResult solve_adaptive_ns(const CompositeObjective& problem, const SolverConfig& config) {
  config.validate();
  const PhaseConstants pc = phase_constants(config.eps, config.line_search.a, config.line_search.b, config.tau);
  detail::SolveSession session(problem, config);
  const std::int64_t n = problem.sqrt_rows();
  const double exit_threshold = config.delta / static_cast<double>(problem.dim());
  Vector x = problem.initial_point();
  double f = problem.value(x);
  Vector g = problem.grad(x);
  std::int64_t m = std::min(config.m0_bar, n);
  std::optional<NewtonStep> carried;

  for (std::int64_t t = 0; t < config.iteration_limit(); ++t) {
    IterationRecord rec = session.record(t, x, f);
    NewtonStep step;
    try {
      if (carried) {
        step = std::move(*carried);
        carried.reset();
      } else {
        step = session.step_at(x, g, m);
      }
    } catch (const NotPositiveDefinite& e) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::Stalled, e.what());
    }
    rec.decrement = step.decrement;
    rec.sketch_m = step.sketch_rows;
    rec.phase = step.decrement > pc.eta ? 1 : 2;
    if (step.decrement * step.decrement <= exit_threshold) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::DecrementBelowThreshold);
    }

    LineSearchResult ls;
    try {
      ls = backtracking_line_search(problem, x, step.direction, f, g, config.line_search);
    } catch (const LineSearchStalled& e) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::Stalled, e.what());
    }
    rec.step = ls.step;

    if (rec.phase == 1) {
      if (ls.f_new - f <= -pc.nu) {
        rec.accepted = true;
        x = std::move(ls.x_new);
        f = ls.f_new;
        g = problem.grad(x);
      } else {
        m = detail::capped_double(m, n);
      }
    } else {
      const Vector g_new = problem.grad(ls.x_new);
      NewtonStep fresh;
      try {
        fresh = session.step_at(ls.x_new, g_new, m);
      } catch (const NotPositiveDefinite& e) {
        session.push(std::move(rec));
        return session.finish(std::move(x), Termination::Stalled, e.what());
      }
      if (fresh.decrement <= pc.alpha_tau_eps * std::pow(step.decrement, 1.0 + config.tau)) {
        rec.accepted = true;
        x = std::move(ls.x_new);
        f = ls.f_new;
        g = g_new;
        carried = std::move(fresh);
      } else {
        m = detail::capped_double(m, n);
      }
    }
    session.push(std::move(rec));
  }
  return session.finish(std::move(x), Termination::MaxIters);
}

/// Practical adaptive variant: every line-searched step is accepted, and m
/// doubles whenever lambda~_{t+1} > c1 lambda~_t min(1, c2 lambda~_t^tau).
/// Returns once lambda~ < decrement_stop.
inline SolveResult solve_adaptive_practical(const CompositeObjective& problem, const SolverConfig& config) {
  config.validate();
  const PhaseConstants pc = phase_constants(config.eps, config.line_search.a, config.line_search.b, config.tau);
  detail::SolveSession session(problem, config);
  const std::int64_t n = problem.sqrt_rows();
  Vector x = problem.initial_point();
  double f = problem.value(x);
  std::int64_t m = std::min(config.m0_bar, n);
  double previous = std::numeric_limits<double>::quiet_NaN();

  for (std::int64_t t = 0; t < config.iteration_limit(); ++t) {
    IterationRecord rec = session.record(t, x, f);
    NewtonStep step;
    Vector g;
    try {
      g = problem.grad(x);
      step = session.step_at(x, g, m);
    } catch (const NotPositiveDefinite& e) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::Stalled, e.what());
    }
    rec.decrement = step.decrement;
    rec.sketch_m = step.sketch_rows;
    rec.phase = step.decrement > pc.eta ? 1 : 2;
    if (t > 0 && step.decrement > config.c1 * previous * std::min(1.0, config.c2 * std::pow(previous, config.tau))) {
      m = detail::capped_double(m, n);
    }
    if (step.decrement < config.decrement_stop) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::DecrementBelowThreshold);
    }
    LineSearchResult ls;
    try {
      ls = backtracking_line_search(problem, x, step.direction, f, g, config.line_search);
    } catch (const LineSearchStalled& e) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::Stalled, e.what());
    }
    rec.step = ls.step;
    rec.accepted = true;
    session.push(std::move(rec));
    x = std::move(ls.x_new);
    f = ls.f_new;
    previous = step.decrement;
  }
  return session.finish(std::move(x), Termination::MaxIters);
}

/// Damped Newton with the exact Hessian; stops once lambda < decrement_stop.
inline SolveResult solve_exact_newton(const CompositeObjective& problem, const SolverConfig& config) {
  SolverConfig exact = config;
  exact.sketch = SketchKind::Identity;
  exact.validate();
  detail::SolveSession session(problem, exact);
  Vector x = problem.initial_point();
  double f = problem.value(x);
  for (std::int64_t t = 0; t < exact.iteration_limit(); ++t) {
    IterationRecord rec = session.record(t, x, f);
    NewtonStep step;
    Vector g;
    try {
      g = problem.grad(x);
      step = session.step_at(x, g, problem.sqrt_rows());
    } catch (const NotPositiveDefinite& e) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::Stalled, e.what());
    }
    rec.decrement = step.decrement;
    rec.exact_decrement = step.decrement;
    rec.sketch_m = step.sketch_rows;
    if (step.decrement < exact.decrement_stop) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::DecrementBelowThreshold);
    }
    LineSearchResult ls;
    try {
      ls = backtracking_line_search(problem, x, step.direction, f, g, exact.line_search);
    } catch (const LineSearchStalled& e) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::Stalled, e.what());
    }
    rec.step = ls.step;
    rec.accepted = true;
    session.push(std::move(rec));
    x = std::move(ls.x_new);
    f = ls.f_new;
  }
  return session.finish(std::move(x), Termination::MaxIters);
}

namespace detail {

inline bool first_order_done(const SolverConfig& config, double f, const Vector& g) {
  if (config.reference_value) {
    const double ref = *config.reference_value;
    return (f - ref) / (1.0 + std::abs(ref)) < config.first_order_tol;
  }
  return g.norm() <= config.grad_tol;
}

}  // namespace detail

/// Gradient descent with Armijo backtracking; each search starts from the
/// previous accepted step divided by b.
inline SolveResult solve_gd(const CompositeObjective& problem, const SolverConfig& config) {
  config.validate();
  detail::SolveSession session(problem, config);
  Vector x = problem.initial_point();
  double f = problem.value(x);
  double s = 1.0;
  for (std::int64_t t = 0; t < config.iteration_limit(); ++t) {
    IterationRecord rec = session.record(t, x, f);
    const Vector g = problem.grad(x);
    if (detail::first_order_done(config, f, g)) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::TargetReached);
    }
    LineSearchResult ls;
    try {
      ls = backtracking_line_search(problem, x, Vector(-g), f, g, config.line_search, s / config.line_search.b);
    } catch (const LineSearchStalled& e) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::Stalled, e.what());
    }
    rec.step = ls.step;
    rec.accepted = true;
    session.push(std::move(rec));
    x = std::move(ls.x_new);
    f = ls.f_new;
    s = ls.step;
  }
  return session.finish(std::move(x), Termination::MaxIters);
}

/// Accelerated gradient with constant momentum (1 - sqrt(mu s)) / (1 + sqrt(mu s)),
/// where s is the current backtracked step, and a function-value restart that
/// drops the momentum whenever the objective would increase.
inline SolveResult solve_nag(const CompositeObjective& problem, const SolverConfig& config) {
  config.validate();
  detail::SolveSession session(problem, config);
  Vector x = problem.initial_point();
  double f = problem.value(x);
  Vector y = x;
  double s = 1.0;
  for (std::int64_t t = 0; t < config.iteration_limit(); ++t) {
    IterationRecord rec = session.record(t, x, f);
    const Vector gx = problem.grad(x);
    if (detail::first_order_done(config, f, gx)) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::TargetReached);
    }
    LineSearchResult ls;
    try {
      const double f_y = problem.value(y);
      const Vector g_y = problem.grad(y);
      ls = backtracking_line_search(problem, y, Vector(-g_y), f_y, g_y, config.line_search, s / config.line_search.b);
      if (ls.f_new > f) {
        // Restart from x with a plain gradient step.
        ls = backtracking_line_search(problem, x, Vector(-gx), f, gx, config.line_search, ls.step);
        y = x;
      }
    } catch (const LineSearchStalled& e) {
      session.push(std::move(rec));
      return session.finish(std::move(x), Termination::Stalled, e.what());
    }
    s = ls.step;
    const double root = std::sqrt(std::min(1.0, problem.mu() * s));
    const double momentum = (1.0 - root) / (1.0 + root);
    Vector extrapolated = ls.x_new + momentum * (ls.x_new - x);
    y = problem.in_domain(extrapolated) ? std::move(extrapolated) : ls.x_new;
    rec.step = ls.step;
    rec.accepted = true;
    session.push(std::move(rec));
    x = std::move(ls.x_new);
    f = ls.f_new;
  }
  return session.finish(std::move(x), Termination::MaxIters);
}

inline SolveResult solve(const CompositeObjective& problem, const SolverConfig& config) {
  switch (config.method) {
    case Method::EffDimNS: return solve_effdim_ns(problem, config);
    case Method::AdaptiveNS: return solve_adaptive_ns(problem, config);
    case Method::AdaptiveNSPractical: return solve_adaptive_practical(problem, config);
    case Method::ExactNewton: return solve_exact_newton(problem, config);
    case Method::GD: return solve_gd(problem, config);
    case Method::NAG: return solve_nag(problem, config);
  }
  throw ConfigError("unknown solver method");
}

/// Phase sketch sizes for the fixed-size method from the effective dimension,
/// using the high-probability scalings with every hidden constant set to 1.
/// t_bar is the iteration budget the failure probability is split over.
struct OracleSketchSizes {
  std::int64_t m1 = 0;
  std::int64_t m2 = 0;
};

inline OracleSketchSizes oracle_sketch_sizes(double d_mu, SketchKind kind, double tau, double delta, double p0,
                                             double t_bar, std::int64_t n) {
  if (!(d_mu > 0.0 && delta > 0.0 && p0 > 0.0 && t_bar >= 1.0)) {
    throw InvalidParams("oracle_sketch_sizes: invalid arguments");
  }
  double m1 = 0.0;
  double m2 = 0.0;
  const double delta_tau = std::pow(delta, -tau);
  if (kind == SketchKind::SJLT) {
    m1 = d_mu * d_mu * t_bar / p0;
    m2 = delta_tau * m1;
  } else {
    const double log_b = std::log(d_mu * t_bar / p0);
    m1 = d_mu + std::log(t_bar / p0) * log_b;
    m2 = delta_tau * (d_mu + std::log(t_bar / (p0 * std::pow(delta, 0.5 * tau))) * log_b);
  }
  const auto clamp = [n](double v) {
    return static_cast<std::int64_t>(std::clamp(std::ceil(v), 1.0, static_cast<double>(n)));
  };
  return {clamp(m1), clamp(m2)};
}

}  // namespace sketchnewton
