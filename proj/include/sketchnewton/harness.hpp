#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sketchnewton/data_io.hpp"
#include "sketchnewton/errors.hpp"
#include "sketchnewton/linalg.hpp"
#include "sketchnewton/problems.hpp"
#include "sketchnewton/rng.hpp"
#include "sketchnewton/solvers.hpp"

namespace sketchnewton {

/// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutputDirEnv = "SKETCHNEWTON_OUT_DIR";

/// Fixed leading CSV columns of every trace file.
inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> columns = {"iter",     "seconds", "f",        "rel_err", "decrement",
                                                   "sketch_m", "step_s",  "accepted", "test_err"};
  return columns;
}

struct ProblemConfig {
  std::string family = "ridge";  ///< ridge | logistic | kernel_logistic | portfolio | dual_lasso | polyproj
  std::optional<std::string> data_path;
  std::optional<SyntheticSpec> synthetic;
  double mu = 1.0;
  std::optional<double> kernel_h;
  std::string label_rule = "identity";  ///< identity | parity | sign | map
  std::map<double, double> label_map;    ///< used with label_rule == "map"
  std::optional<Eigen::Index> feature_count;
  std::optional<Eigen::Index> max_rows;  ///< keep the first max_rows records of the data file
  std::optional<double> test_ratio;      ///< training fraction of a seeded split; none = no test set
  std::uint64_t split_seed = 0;
  double alpha = 1.0;                    ///< portfolio risk weight
  std::optional<double> lambda;          ///< dual lasso bound; default 0.5 ||A^T y||_inf
  std::uint64_t aux_seed = 0;            ///< seed for generated r / y / v vectors of barrier problems
};

struct NamedSolver {
  std::string name;
  SolverConfig config;
};

struct ExperimentConfig {
  ProblemConfig problem;
  std::vector<NamedSolver> solvers;
  double eps_ref = 5e-7;
  std::string output_dir = "out";
  bool write_csv = true;
  bool write_json = true;
  bool parallel = false;

  void validate() const {
    if (solvers.empty()) throw ConfigError("experiment: at least one solver is required");
    if (!(problem.mu > 0.0)) throw ConfigError("experiment: mu must be positive");
    if (!(eps_ref > 0.0)) throw ConfigError("experiment: eps_ref must be positive");
    if (!problem.data_path && !problem.synthetic) throw ConfigError("experiment: problem needs data or synthetic");
    std::map<std::string, int> seen;
    for (const auto& s : solvers) {
      if (s.name.empty()) throw ConfigError("experiment: solver names must be non-empty");
      if (++seen[s.name] > 1) throw ConfigError("experiment: duplicate solver name '" + s.name + "'");
      s.config.validate();
    }
  }
};

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

inline SpectrumKind parse_spectrum(const std::string& s) {
  if (s == "flat") return SpectrumKind::Flat;
  if (s == "polynomial") return SpectrumKind::Polynomial;
  if (s == "exponential") return SpectrumKind::Exponential;
  throw ConfigError("unknown spectrum '" + s + "'");
}

inline std::string to_string(SpectrumKind s) {
  switch (s) {
    case SpectrumKind::Flat: return "flat";
    case SpectrumKind::Polynomial: return "polynomial";
    case SpectrumKind::Exponential: return "exponential";
  }
  return "flat";
}

}  // namespace detail

inline nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"n", s.n},         {"d", s.d},         {"spectrum", detail::to_string(s.spectrum)},
          {"decay", s.decay}, {"scale", s.scale}, {"noise_sd", s.noise_sd},
          {"seed", s.seed}};
}

inline SyntheticSpec synthetic_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.n = detail::get_or<Eigen::Index>(j, "n", s.n);
  s.d = detail::get_or<Eigen::Index>(j, "d", s.d);
  s.spectrum = detail::parse_spectrum(detail::get_or<std::string>(j, "spectrum", "flat"));
  s.decay = detail::get_or<double>(j, "decay", s.decay);
  s.scale = detail::get_or<double>(j, "scale", s.scale);
  s.noise_sd = detail::get_or<double>(j, "noise_sd", s.noise_sd);
  s.seed = detail::get_or<std::uint64_t>(j, "seed", s.seed);
  return s;
}

inline nlohmann::json to_json(const NamedSolver& s) {
  const SolverConfig& c = s.config;
  nlohmann::json j = {{"name", s.name},
                      {"method", std::string(to_string(c.method))},
                      {"sketch", std::string(to_string(c.sketch))},
                      {"m0", c.m0_bar},
                      {"m1", c.m1_bar},
                      {"m2", c.m2_bar},
                      {"tau", c.tau},
                      {"delta", c.delta},
                      {"eps", c.eps},
                      {"a", c.line_search.a},
                      {"b", c.line_search.b},
                      {"max_shrinks", c.line_search.max_shrinks},
                      {"c1", c.c1},
                      {"c2", c.c2},
                      {"max_iters", c.max_iters},
                      {"decrement_stop", c.decrement_stop},
                      {"first_order_tol", c.first_order_tol},
                      {"grad_tol", c.grad_tol},
                      {"diagnostics", c.diagnostics},
                      {"seed", c.seed}};
  j["reference_value"] = c.reference_value ? nlohmann::json(*c.reference_value) : nlohmann::json();
  return j;
}

inline NamedSolver solver_from_json(const nlohmann::json& j) {
  NamedSolver s;
  SolverConfig& c = s.config;
  c.method = parse_method(detail::get_or<std::string>(j, "method", std::string(to_string(c.method))));
  s.name = detail::get_or<std::string>(j, "name", std::string(to_string(c.method)));
  c.sketch = parse_sketch_kind(detail::get_or<std::string>(j, "sketch", std::string(to_string(c.sketch))));
  c.m0_bar = detail::get_or<std::int64_t>(j, "m0", c.m0_bar);
  c.m1_bar = detail::get_or<std::int64_t>(j, "m1", c.m1_bar);
  c.m2_bar = detail::get_or<std::int64_t>(j, "m2", c.m2_bar);
  c.tau = detail::get_or<double>(j, "tau", c.tau);
  c.delta = detail::get_or<double>(j, "delta", c.delta);
  c.eps = detail::get_or<double>(j, "eps", c.eps);
  c.line_search.a = detail::get_or<double>(j, "a", c.line_search.a);
  c.line_search.b = detail::get_or<double>(j, "b", c.line_search.b);
  c.line_search.max_shrinks = detail::get_or<int>(j, "max_shrinks", c.line_search.max_shrinks);
  c.c1 = detail::get_or<double>(j, "c1", c.c1);
  c.c2 = detail::get_or<double>(j, "c2", c.c2);
  c.max_iters = detail::get_or<std::int64_t>(j, "max_iters", c.max_iters);
  c.decrement_stop = detail::get_or<double>(j, "decrement_stop", c.decrement_stop);
  c.first_order_tol = detail::get_or<double>(j, "first_order_tol", c.first_order_tol);
  c.grad_tol = detail::get_or<double>(j, "grad_tol", c.grad_tol);
  c.diagnostics = detail::get_or<bool>(j, "diagnostics", c.diagnostics);
  c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
  if (j.contains("reference_value") && !j.at("reference_value").is_null()) {
    c.reference_value = j.at("reference_value").get<double>();
  }
  return s;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  const ProblemConfig& p = c.problem;
  nlohmann::json problem = {{"family", p.family},       {"mu", p.mu},
                            {"label_rule", p.label_rule}, {"split_seed", p.split_seed},
                            {"alpha", p.alpha},         {"aux_seed", p.aux_seed}};
  problem["data"] = p.data_path ? nlohmann::json(*p.data_path) : nlohmann::json();
  problem["synthetic"] = p.synthetic ? to_json(*p.synthetic) : nlohmann::json();
  problem["kernel_h"] = p.kernel_h ? nlohmann::json(*p.kernel_h) : nlohmann::json();
  problem["features"] = p.feature_count ? nlohmann::json(*p.feature_count) : nlohmann::json();
  problem["max_rows"] = p.max_rows ? nlohmann::json(*p.max_rows) : nlohmann::json();
  problem["test_ratio"] = p.test_ratio ? nlohmann::json(*p.test_ratio) : nlohmann::json();
  problem["lambda"] = p.lambda ? nlohmann::json(*p.lambda) : nlohmann::json();
  nlohmann::json label_map = nlohmann::json::object();
  for (const auto& [from, to] : p.label_map) label_map[detail::format_real(from)] = to;
  problem["label_map"] = label_map;

  nlohmann::json solvers = nlohmann::json::array();
  for (const auto& s : c.solvers) solvers.push_back(to_json(s));
  nlohmann::json formats = nlohmann::json::array();
  if (c.write_csv) formats.push_back("csv");
  if (c.write_json) formats.push_back("json");
  return {{"problem", problem},
          {"solvers", solvers},
          {"metrics", {{"eps_ref", c.eps_ref}}},
          {"output", {{"directory", c.output_dir}, {"formats", formats}}},
          {"parallel", c.parallel}};
}

inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig c;
    const nlohmann::json& p = j.at("problem");
    ProblemConfig& pc = c.problem;
    pc.family = detail::get_or<std::string>(p, "family", pc.family);
    if (p.contains("data") && !p.at("data").is_null()) pc.data_path = p.at("data").get<std::string>();
    if (p.contains("synthetic") && !p.at("synthetic").is_null()) pc.synthetic = synthetic_from_json(p.at("synthetic"));
    pc.mu = detail::get_or<double>(p, "mu", pc.mu);
    if (p.contains("kernel_h") && !p.at("kernel_h").is_null()) pc.kernel_h = p.at("kernel_h").get<double>();
    pc.label_rule = detail::get_or<std::string>(p, "label_rule", pc.label_rule);
    if (p.contains("label_map") && p.at("label_map").is_object()) {
      for (const auto& [key, value] : p.at("label_map").items()) pc.label_map[std::stod(key)] = value.get<double>();
    }
    if (p.contains("features") && !p.at("features").is_null()) pc.feature_count = p.at("features").get<Eigen::Index>();
    if (p.contains("max_rows") && !p.at("max_rows").is_null()) pc.max_rows = p.at("max_rows").get<Eigen::Index>();
    if (p.contains("test_ratio") && !p.at("test_ratio").is_null()) pc.test_ratio = p.at("test_ratio").get<double>();
    pc.split_seed = detail::get_or<std::uint64_t>(p, "split_seed", pc.split_seed);
    pc.alpha = detail::get_or<double>(p, "alpha", pc.alpha);
    if (p.contains("lambda") && !p.at("lambda").is_null()) pc.lambda = p.at("lambda").get<double>();
    pc.aux_seed = detail::get_or<std::uint64_t>(p, "aux_seed", pc.aux_seed);

    for (const auto& s : j.at("solvers")) c.solvers.push_back(solver_from_json(s));
    if (j.contains("metrics")) c.eps_ref = detail::get_or<double>(j.at("metrics"), "eps_ref", c.eps_ref);
    if (j.contains("output")) {
      const nlohmann::json& o = j.at("output");
      c.output_dir = detail::get_or<std::string>(o, "directory", c.output_dir);
      if (o.contains("formats")) {
        c.write_csv = c.write_json = false;
        for (const auto& f : o.at("formats")) {
          const auto name = f.get<std::string>();
          if (name == "csv") c.write_csv = true;
          else if (name == "json") c.write_json = true;
          else throw ConfigError("unknown output format '" + name + "'");
        }
      }
    }
    c.parallel = detail::get_or<bool>(j, "parallel", c.parallel);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

// ---------------------------------------------------------------------------
// Problem construction
// ---------------------------------------------------------------------------

struct BuiltProblem {
  std::unique_ptr<CompositeObjective> problem;
  std::optional<Matrix> test_features;  ///< rows are test points in the problem's feature space
  std::optional<Vector> test_labels;
};

/// Fraction of rows with sign(a^T x) != y, where sign(0) counts as +1.
inline double test_error(const Vector& x, const Matrix& features, const Vector& labels) {
  if (features.cols() != x.size() || features.rows() != labels.size()) {
    throw DimensionMismatch("test_error: dimensions do not agree");
  }
  if (features.rows() == 0) return 0.0;
  const Vector scores = features * x;
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double predicted = scores[i] >= 0.0 ? 1.0 : -1.0;
    if (predicted != labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(scores.size());
}

namespace detail {

inline Dataset load_dataset(const ProblemConfig& pc) {
  if (pc.data_path) {
    std::ifstream in(*pc.data_path);
    if (!in) throw ConfigError("cannot open data file '" + *pc.data_path + "'");
    Dataset ds = parse_libsvm(in, pc.feature_count);
    if (pc.max_rows && *pc.max_rows < ds.rows()) {
      ds.features.conservativeResize(*pc.max_rows, Eigen::NoChange);
      ds.labels.conservativeResize(*pc.max_rows);
    }
    return ds;
  }
  const SyntheticData synth = synth_controlled_spectrum(*pc.synthetic);
  const bool classification = pc.family == "logistic" || pc.family == "kernel_logistic";
  return {synth.a, classification ? synth.labels : synth.response};
}

inline Dataset apply_label_rule(const ProblemConfig& pc, const Dataset& ds) {
  if (pc.label_rule == "identity") return ds;
  if (pc.label_rule == "parity") return binarize_parity(ds);
  if (pc.label_rule == "sign") return binarize_sign(ds);
  if (pc.label_rule == "map") return binarize_labels(ds, pc.label_map);
  throw ConfigError("unknown label rule '" + pc.label_rule + "'");
}

inline Vector seeded_gaussian(Eigen::Index size, std::uint64_t seed, std::uint64_t stream, double scale) {
  CounterRng rng(seed, stream);
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = scale * rng.normal();
  return v;
}

}  // namespace detail

inline BuiltProblem build_problem(const ProblemConfig& pc) {
  Dataset ds = detail::load_dataset(pc);
  const std::string& family = pc.family;
  BuiltProblem built;
  if (family == "logistic" || family == "kernel_logistic") ds = detail::apply_label_rule(pc, ds);

  Dataset train = ds;
  if (pc.test_ratio) {
    Split split = train_test_split(ds, *pc.test_ratio, pc.split_seed);
    train = std::move(split.train);
    built.test_features = std::move(split.test.features);
    built.test_labels = std::move(split.test.labels);
  }

  if (family == "ridge") {
    built.problem = std::make_unique<RidgeProblem>(train.features, train.labels, pc.mu);
  } else if (family == "logistic") {
    built.problem = std::make_unique<LogisticProblem>(train.features, train.labels, pc.mu);
  } else if (family == "kernel_logistic") {
    if (!pc.kernel_h) throw ConfigError("kernel_logistic requires kernel_h");
    Matrix k = gaussian_kernel(train.features, train.features, *pc.kernel_h);
    k = 0.5 * (k + k.transpose()).eval();
    if (built.test_features) built.test_features = gaussian_kernel(train.features, *built.test_features, *pc.kernel_h);
    built.problem = std::make_unique<KernelLogisticProblem>(std::move(k), train.labels, pc.mu);
  } else if (family == "portfolio") {
    const Vector r = detail::seeded_gaussian(train.features.cols(), pc.aux_seed, 1, 0.1);
    built.problem = std::make_unique<PortfolioProblem>(train.features, r, pc.alpha, pc.mu);
  } else if (family == "dual_lasso") {
    Matrix a = train.features.transpose();
    const Vector y = detail::seeded_gaussian(a.rows(), pc.aux_seed, 2, 1.0);
    const double lambda = pc.lambda.value_or(0.5 * (a.transpose() * y).cwiseAbs().maxCoeff());
    built.problem = std::make_unique<DualLassoProblem>(std::move(a), y, lambda, pc.mu);
  } else if (family == "polyproj") {
    const Matrix& a = train.features;
    const Vector b = Vector::Ones(a.rows());
    const Vector v = detail::seeded_gaussian(a.cols(), pc.aux_seed, 3, 1.0);
    built.problem = std::make_unique<PolyProjProblem>(a, b, v, pc.mu, Vector::Zero(a.cols()));
  } else {
    throw ConfigError("unknown problem family '" + family + "'");
  }
  if (family != "logistic" && family != "kernel_logistic") {
    built.test_features.reset();
    built.test_labels.reset();
  }
  return built;
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

struct MetricRow {
  std::int64_t iter = 0;
  double seconds = 0.0;
  double f = 0.0;
  double relative_error = 0.0;
  double decrement = std::numeric_limits<double>::quiet_NaN();
  std::int64_t sketch_m = 0;
  double step = 0.0;
  bool accepted = false;
  std::optional<double> test_error;
  double exact_decrement = std::numeric_limits<double>::quiet_NaN();
  double effective_dim = std::numeric_limits<double>::quiet_NaN();
};

struct SolverOutcome {
  std::string name;
  SolverConfig config;
  std::optional<SolveResult> result;
  std::string error;  ///< non-empty when the solver threw
  std::vector<MetricRow> rows;
  std::filesystem::path csv_path;

  bool failed() const { return !result || result->termination == Termination::Stalled; }
};

struct ExperimentResult {
  std::vector<SolverOutcome> solvers;
  double f_ref = 0.0;
  double eps_ref = 5e-7;
  std::filesystem::path output_dir;
  std::filesystem::path summary_path;

  bool any_failed() const {
    for (const auto& s : solvers)
      if (s.failed()) return true;
    return false;
  }
};

/// (f - f_ref + eps_ref) / (1 + |f_ref|).
inline double relative_error(double f, double f_ref, double eps_ref) {
  return (f - f_ref + eps_ref) / (1.0 + std::abs(f_ref));
}

namespace detail {

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  return format_real(v);
}

inline void write_trace_csv(const std::filesystem::path& path, const SolverOutcome& outcome, bool diagnostics) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  const auto& columns = trace_columns();
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  if (diagnostics) out << ",exact_decrement,effective_dim";
  out << '\n';
  for (const MetricRow& r : outcome.rows) {
    out << r.iter << ',' << csv_number(r.seconds) << ',' << csv_number(r.f) << ',' << csv_number(r.relative_error)
        << ',' << csv_number(r.decrement) << ',' << r.sketch_m << ',' << csv_number(r.step) << ','
        << (r.accepted ? 1 : 0) << ',' << (r.test_error ? csv_number(*r.test_error) : "");
    if (diagnostics) out << ',' << csv_number(r.exact_decrement) << ',' << csv_number(r.effective_dim);
    out << '\n';
  }
}

inline std::string safe_file_stem(const std::string& name) {
  std::string stem = name;
  for (char& ch : stem) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-' ||
                    ch == '_' || ch == '.';
    if (!ok) ch = '_';
  }
  return stem;
}

inline void run_one(const BuiltProblem& built, SolverOutcome& outcome) {
  try {
    SolverConfig config = outcome.config;
    if (built.test_features) config.record_iterates = true;
    outcome.result = solve(*built.problem, config);
  } catch (const std::exception& e) {
    outcome.error = e.what();
  }
}

template <typename Fn>
void run_batch(std::vector<SolverOutcome*>& batch, bool parallel, Fn&& fn) {
  if (!parallel || batch.size() < 2) {
    for (auto* o : batch) fn(*o);
    return;
  }
  std::vector<std::future<void>> futures;
  futures.reserve(batch.size());
  for (auto* o : batch) futures.push_back(std::async(std::launch::async, [&fn, o] { fn(*o); }));
  for (auto& f : futures) f.get();
}

}  // namespace detail

inline std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return config.output_dir;
}

/// Runs every solver on one problem, computes relative errors against the
/// best final objective, and writes one CSV per solver plus summary.json.
/// Second-order solvers run first; first-order solvers without an explicit
/// reference value stop against the best second-order objective.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const BuiltProblem built = build_problem(config.problem);
  ExperimentResult result;
  result.eps_ref = config.eps_ref;
  result.output_dir = resolve_output_dir(config);
  for (const auto& s : config.solvers) result.solvers.push_back({s.name, s.config, std::nullopt, {}, {}, {}});

  std::vector<SolverOutcome*> second_order;
  std::vector<SolverOutcome*> first_order;
  for (auto& o : result.solvers) (is_second_order(o.config.method) ? second_order : first_order).push_back(&o);

  const auto runner = [&built](SolverOutcome& o) { detail::run_one(built, o); };
  detail::run_batch(second_order, config.parallel, runner);

  if (!first_order.empty()) {
    std::optional<double> reference;
    for (auto* o : second_order) {
      if (o->result && !o->result->trace.empty()) {
        const double f = o->result->trace.back().f;
        if (!reference || f < *reference) reference = f;
      }
    }
    if (!reference) {
      SolverConfig exact;
      exact.method = Method::ExactNewton;
      reference = built.problem->value(solve_exact_newton(*built.problem, exact).x_final);
    }
    for (auto* o : first_order)
      if (!o->config.reference_value) o->config.reference_value = reference;
    detail::run_batch(first_order, config.parallel, runner);
  }

  bool have_ref = false;
  result.f_ref = 0.0;
  for (const auto& o : result.solvers) {
    if (!o.result || o.result->trace.empty()) continue;
    const double f = o.result->trace.back().f;
    if (!have_ref || f < result.f_ref) result.f_ref = f;
    have_ref = true;
  }

  for (auto& o : result.solvers) {
    if (!o.result) continue;
    for (const IterationRecord& rec : o.result->trace) {
      MetricRow row;
      row.iter = rec.iter;
      row.seconds = rec.seconds;
      row.f = rec.f;
      row.relative_error = relative_error(rec.f, result.f_ref, config.eps_ref);
      row.decrement = rec.decrement;
      row.sketch_m = rec.sketch_m;
      row.step = rec.step;
      row.accepted = rec.accepted;
      row.exact_decrement = rec.exact_decrement;
      row.effective_dim = rec.effective_dim;
      if (built.test_features && rec.x.size() > 0) {
        row.test_error = test_error(rec.x, *built.test_features, *built.test_labels);
      }
      o.rows.push_back(row);
    }
    for (IterationRecord& rec : o.result->trace) rec.x = Vector();
  }

  if (config.write_csv || config.write_json) std::filesystem::create_directories(result.output_dir);
  if (config.write_csv) {
    for (auto& o : result.solvers) {
      o.csv_path = result.output_dir / (detail::safe_file_stem(o.name) + ".csv");
      detail::write_trace_csv(o.csv_path, o, o.config.diagnostics);
    }
  }
  if (config.write_json) {
    nlohmann::json summary;
    summary["f_ref"] = result.f_ref;
    summary["eps_ref"] = config.eps_ref;
    summary["problem"] = {{"family", config.problem.family},
                          {"d", built.problem->dim()},
                          {"n", built.problem->sqrt_rows()},
                          {"mu", config.problem.mu}};
    nlohmann::json solvers = nlohmann::json::array();
    for (const auto& o : result.solvers) {
      nlohmann::json s = {{"name", o.name}, {"method", std::string(to_string(o.config.method))}};
      if (o.result) {
        const auto& trace = o.result->trace;
        s["termination"] = std::string(to_string(o.result->termination));
        s["iterations"] = trace.size();
        s["final_f"] = trace.empty() ? nlohmann::json() : nlohmann::json(trace.back().f);
        s["final_relative_error"] = o.rows.empty() ? nlohmann::json() : nlohmann::json(o.rows.back().relative_error);
        s["final_m"] = trace.empty() ? 0 : trace.back().sketch_m;
        s["seconds"] = o.result->total_seconds;
        nlohmann::json path = nlohmann::json::array();
        for (const auto& rec : trace) path.push_back(rec.sketch_m);
        s["sketch_m_path"] = path;
        if (!o.result->message.empty()) s["message"] = o.result->message;
        if (!o.rows.empty() && o.rows.back().test_error) s["final_test_error"] = *o.rows.back().test_error;
      } else {
        s["termination"] = "error";
        s["error"] = o.error;
      }
      if (!o.csv_path.empty()) s["csv"] = o.csv_path.filename().string();
      solvers.push_back(std::move(s));
    }
    summary["solvers"] = std::move(solvers);
    result.summary_path = result.output_dir / "summary.json";
    std::ofstream out(result.summary_path);
    if (!out) throw ConfigError("cannot write '" + result.summary_path.string() + "'");
    out << summary.dump(2) << '\n';
  }
  return result;
}

}  // namespace sketchnewton
