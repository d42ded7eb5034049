#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sketchnewton/harness.hpp"
#include "test_util.hpp"

using namespace sketchnewton;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sketchnewton_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

ExperimentConfig ridge_experiment(const fs::path& dir) {
  ExperimentConfig c;
  SyntheticSpec s;
  s.n = 120;
  s.d = 10;
  s.spectrum = SpectrumKind::Polynomial;
  s.noise_sd = 0.1;
  s.seed = 2;
  c.problem.family = "ridge";
  c.problem.synthetic = s;
  c.problem.mu = 0.1;
  c.output_dir = dir.string();
  SolverConfig newton;
  newton.method = Method::ExactNewton;
  SolverConfig gd;
  gd.method = Method::GD;
  c.solvers = {{"newton", newton}, {"gd", gd}};
  return c;
}

}  // namespace

TEST(TestError, Examples) {
  Matrix a(4, 2);
  a << 1, 0, -1, 0, 0, 1, 0, -1;
  Vector balanced(4);
  balanced << 1, -1, 1, -1;
  EXPECT_DOUBLE_EQ(test_error(Vector::Zero(2), a, balanced), 0.5);  // all predictions +1

  Vector w(2);
  w << 1, 1;
  Vector separable(4);
  separable << 1, -1, 1, -1;
  EXPECT_DOUBLE_EQ(test_error(w, a, separable), 0.0);

  // Hand count with x = (1, -2): scores 1, -1, -2, 2 -> predictions +,-,-,+.
  Vector x(2);
  x << 1, -2;
  Vector labels(4);
  labels << 1, 1, 1, 1;
  EXPECT_DOUBLE_EQ(test_error(x, a, labels), 0.5);
  EXPECT_THROW(test_error(Vector::Zero(3), a, labels), DimensionMismatch);
}

TEST(RelativeError, Formula) {
  EXPECT_DOUBLE_EQ(relative_error(3.0, 3.0, 5e-7), 5e-7 / 4.0);
  EXPECT_DOUBLE_EQ(relative_error(-1.0, -2.0, 0.0), 1.0 / 3.0);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = ridge_experiment("/tmp/x");
  c.problem.kernel_h = 2.5;
  c.problem.label_rule = "map";
  c.problem.label_map = {{3.0, 1.0}, {5.0, -1.0}};
  c.problem.test_ratio = 0.5;
  c.solvers[1].config.reference_value = 1.25;
  c.solvers[0].config.sketch = SketchKind::SRHT;
  c.parallel = true;
  const nlohmann::json j = to_json(c);
  const ExperimentConfig back = experiment_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.problem.label_map.at(5.0), -1.0);
  EXPECT_EQ(back.solvers[1].config.reference_value, 1.25);
  EXPECT_EQ(back.solvers[0].config.sketch, SketchKind::SRHT);
  // text round trip too
  EXPECT_EQ(to_json(experiment_from_json(nlohmann::json::parse(j.dump()))), j);
}

TEST(Config, InvalidConfigs) {
  ExperimentConfig c = ridge_experiment("/tmp/x");
  c.solvers.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = ridge_experiment("/tmp/x");
  c.problem.mu = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ridge_experiment("/tmp/x");
  c.eps_ref = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ridge_experiment("/tmp/x");
  c.solvers[1].name = "newton";
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"solvers": []})")), ConfigError);
  EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"problem": {}, "solvers": [{"method": "x"}]})")),
               ConfigError);
  EXPECT_THROW(load_experiment_config("/nonexistent/missing.json"), ConfigError);
}

TEST(RunExperiment, ExactNewtonHasEpsRelativeError) {
  const fs::path dir = fresh_dir("two");
  const ExperimentConfig c = ridge_experiment(dir);
  const ExperimentResult r = run_experiment(c);
  ASSERT_EQ(r.solvers.size(), 2u);
  const SolverOutcome& newton = r.solvers[0];
  ASSERT_TRUE(newton.result);
  EXPECT_EQ(r.f_ref, newton.result->trace.back().f);
  EXPECT_DOUBLE_EQ(newton.rows.back().relative_error, c.eps_ref / (1.0 + r.f_ref));
  // GD stops against the exact-Newton objective.
  ASSERT_TRUE(r.solvers[1].result);
  EXPECT_EQ(r.solvers[1].result->termination, Termination::TargetReached);
  EXPECT_LT(r.solvers[1].rows.back().relative_error, 1e-6 + c.eps_ref);
  for (const auto& o : r.solvers)
    for (const auto& row : o.rows) EXPECT_GE(row.relative_error, 0.0);
}

TEST(RunExperiment, SingleSolverReference) {
  const fs::path dir = fresh_dir("single");
  ExperimentConfig c = ridge_experiment(dir);
  c.solvers.resize(1);
  c.solvers[0].config.method = Method::AdaptiveNSPractical;
  c.solvers[0].config.m0_bar = 8;
  c.solvers[0].name = "ada";
  const ExperimentResult r = run_experiment(c);
  EXPECT_DOUBLE_EQ(r.solvers[0].rows.back().relative_error, c.eps_ref / (1.0 + std::abs(r.f_ref)));
}

TEST(RunExperiment, CsvAndSummaryContents) {
  const fs::path dir = fresh_dir("csv");
  ExperimentConfig c = ridge_experiment(dir);
  c.solvers[0].config.diagnostics = true;
  const ExperimentResult r = run_experiment(c);
  const auto lines = read_lines(dir / "newton.csv");
  ASSERT_GE(lines.size(), 2u);
  EXPECT_EQ(lines[0], "iter,seconds,f,rel_err,decrement,sketch_m,step_s,accepted,test_err,exact_decrement,effective_dim");
  EXPECT_EQ(read_lines(dir / "gd.csv")[0], "iter,seconds,f,rel_err,decrement,sketch_m,step_s,accepted,test_err");
  for (std::size_t i = 1; i < lines.size(); ++i) EXPECT_EQ(split_csv(lines[i]).size(), 11u);

  std::ifstream in(dir / "summary.json");
  const nlohmann::json s = nlohmann::json::parse(in);
  EXPECT_EQ(s["solvers"].size(), 2u);
  EXPECT_EQ(s["solvers"][0]["name"], "newton");
  EXPECT_EQ(s["solvers"][0]["termination"], "decrement_below_threshold");
  EXPECT_TRUE(s["solvers"][0].contains("final_f"));
  EXPECT_TRUE(s["solvers"][0].contains("iterations"));
  EXPECT_TRUE(s["solvers"][0].contains("final_m"));
  EXPECT_TRUE(s["solvers"][0].contains("seconds"));
  EXPECT_DOUBLE_EQ(s["f_ref"].get<double>(), r.f_ref);
}

TEST(RunExperiment, RerunIsByteIdenticalOutsideSeconds) {
  const auto numeric_columns = [](const fs::path& p) {
    std::vector<std::string> out;
    for (const auto& line : read_lines(p)) {
      auto cells = split_csv(line);
      if (cells.size() > 1) cells.erase(cells.begin() + 1);  // drop seconds
      std::string joined;
      for (const auto& cell : cells) joined += cell + ",";
      out.push_back(joined);
    }
    return out;
  };
  ExperimentConfig c = ridge_experiment(fresh_dir("rerun_a"));
  c.solvers[0].config.method = Method::AdaptiveNS;
  c.solvers[0].config.sketch = SketchKind::SRHT;
  c.solvers[0].config.m0_bar = 4;
  c.solvers[0].config.seed = 77;
  run_experiment(c);
  const auto a = numeric_columns(fs::path(c.output_dir) / "newton.csv");
  c.output_dir = fresh_dir("rerun_b").string();
  run_experiment(c);
  EXPECT_EQ(a, numeric_columns(fs::path(c.output_dir) / "newton.csv"));
}

TEST(RunExperiment, ParallelMatchesSequential) {
  ExperimentConfig c = ridge_experiment(fresh_dir("seq"));
  SolverConfig ada;
  ada.method = Method::AdaptiveNSPractical;
  ada.m0_bar = 4;
  ada.seed = 5;
  c.solvers.push_back({"ada", ada});
  const ExperimentResult seq = run_experiment(c);
  c.parallel = true;
  c.output_dir = fresh_dir("par").string();
  const ExperimentResult par = run_experiment(c);
  for (std::size_t i = 0; i < seq.solvers.size(); ++i) {
    ASSERT_EQ(seq.solvers[i].rows.size(), par.solvers[i].rows.size());
    for (std::size_t k = 0; k < seq.solvers[i].rows.size(); ++k)
      EXPECT_EQ(seq.solvers[i].rows[k].f, par.solvers[i].rows[k].f);
  }
}

TEST(RunExperiment, StalledSolverDoesNotAbortSiblings) {
  const fs::path dir = fresh_dir("stall");
  ExperimentConfig c = ridge_experiment(dir);
  SolverConfig bad;
  bad.method = Method::GD;
  bad.line_search.max_shrinks = 0;
  bad.line_search.b = 1e-3;  // first trial step 1/b overshoots and may not shrink
  c.solvers.push_back({"bad_gd", bad});
  const ExperimentResult r = run_experiment(c);
  EXPECT_TRUE(r.solvers[0].result);
  EXPECT_EQ(r.solvers[0].result->termination, Termination::DecrementBelowThreshold);
  ASSERT_TRUE(r.solvers[2].result);
  EXPECT_EQ(r.solvers[2].result->termination, Termination::Stalled);
  EXPECT_TRUE(r.any_failed());
  EXPECT_TRUE(fs::exists(dir / "bad_gd.csv"));
}

TEST(RunExperiment, OutputDirEnvOverride) {
  const fs::path env_dir = fresh_dir("env");
  ExperimentConfig c = ridge_experiment(fresh_dir("not_used"));
  c.solvers.resize(1);
  ::setenv(kOutputDirEnv, env_dir.c_str(), 1);
  const ExperimentResult r = run_experiment(c);
  ::unsetenv(kOutputDirEnv);
  EXPECT_EQ(r.output_dir, env_dir);
  EXPECT_TRUE(fs::exists(env_dir / "summary.json"));
  EXPECT_FALSE(fs::exists(c.output_dir));
}

TEST(RunExperiment, LogisticWithTestSplitAndLibsvmFile) {
  const fs::path dir = fresh_dir("logistic");
  fs::create_directories(dir);
  SyntheticSpec s;
  s.n = 200;
  s.d = 6;
  s.scale = 20.0;
  s.seed = 4;  // noiseless, so the labels are linearly separable
  const SyntheticData data = synth_controlled_spectrum(s);
  Dataset ds{data.a, Vector(data.response.unaryExpr([](double v) { return v >= 0 ? 2.0 : 3.0; }))};
  {
    std::ofstream out(dir / "data.libsvm");
    write_libsvm(out, ds);
  }
  ExperimentConfig c;
  c.problem.family = "logistic";
  c.problem.data_path = (dir / "data.libsvm").string();
  c.problem.label_rule = "parity";
  c.problem.test_ratio = 0.5;
  c.problem.mu = 1e-2;
  c.output_dir = (dir / "out").string();
  SolverConfig ada;
  ada.method = Method::AdaptiveNSPractical;
  ada.m0_bar = 10;
  c.solvers = {{"ada", ada}};
  const ExperimentResult r = run_experiment(c);
  ASSERT_TRUE(r.solvers[0].result);
  for (const auto& row : r.solvers[0].rows) {
    ASSERT_TRUE(row.test_error.has_value());
    EXPECT_GE(*row.test_error, 0.0);
    EXPECT_LE(*row.test_error, 1.0);
  }
  EXPECT_NEAR(*r.solvers[0].rows.front().test_error, 0.5, 0.5);
  EXPECT_LT(*r.solvers[0].rows.back().test_error, 0.3);
  // a missing label in a map rule is a configuration-level failure
  c.problem.label_rule = "map";
  c.problem.label_map = {{2.0, 1.0}};
  EXPECT_THROW(run_experiment(c), UnmappedLabel);
}

TEST(BuildProblem, AllFamiliesFromSynthetic) {
  for (const std::string family : {"ridge", "logistic", "kernel_logistic", "portfolio", "dual_lasso", "polyproj"}) {
    ProblemConfig pc;
    pc.family = family;
    SyntheticSpec s;
    s.n = 40;
    s.d = 5;
    pc.synthetic = s;
    pc.mu = 0.5;
    pc.kernel_h = 1.0;
    pc.label_rule = "sign";
    const BuiltProblem built = build_problem(pc);
    EXPECT_TRUE(built.problem->in_domain(built.problem->initial_point())) << family;
    EXPECT_EQ(built.problem->family(), family);
  }
  ProblemConfig pc;
  pc.family = "svm";
  pc.synthetic = SyntheticSpec{};
  EXPECT_THROW(build_problem(pc), ConfigError);
  pc.family = "kernel_logistic";
  EXPECT_THROW(build_problem(pc), ConfigError);  // no bandwidth
}
