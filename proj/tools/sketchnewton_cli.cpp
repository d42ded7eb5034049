// Command-line front end: run / solve / effdim / synth.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sketchnewton.hpp"

namespace sn = sketchnewton;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;

// "n=200,d=20,spectrum=flat" -> SyntheticSpec
sn::SyntheticSpec parse_synthetic(const std::string& text) {
  sn::SyntheticSpec spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw sn::ConfigError("synthetic: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "n") spec.n = std::stol(value);
      else if (key == "d") spec.d = std::stol(value);
      else if (key == "spectrum") spec.spectrum = sn::detail::parse_spectrum(value);
      else if (key == "decay") spec.decay = std::stod(value);
      else if (key == "scale") spec.scale = std::stod(value);
      else if (key == "noise" || key == "noise_sd") spec.noise_sd = std::stod(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else throw sn::ConfigError("synthetic: unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw sn::ConfigError("synthetic: bad value for '" + key + "': '" + value + "'");
    }
  }
  try {
    spec.validate();
  } catch (const sn::InvalidParams& e) {
    throw sn::ConfigError(e.what());
  }
  return spec;
}

struct ProblemFlags {
  std::string family = "ridge";
  std::string data;
  std::string synthetic;
  double mu = 1.0;
  std::optional<double> kernel_h;
  std::string labels = "identity";
  std::optional<double> test_ratio;
};

void add_problem_flags(CLI::App* cmd, ProblemFlags& f) {
  cmd->add_option("--problem", f.family, "ridge|logistic|kernel_logistic|portfolio|dual_lasso|polyproj");
  cmd->add_option("--data", f.data, "LIBSVM data file");
  cmd->add_option("--synthetic", f.synthetic, "synthetic spec, e.g. n=200,d=20,spectrum=flat");
  cmd->add_option("--mu", f.mu, "regularization / barrier weight");
  cmd->add_option("--kernel-h", f.kernel_h, "Gaussian kernel bandwidth");
  cmd->add_option("--labels", f.labels, "identity|parity|sign");
  cmd->add_option("--test-ratio", f.test_ratio, "training fraction of a seeded split");
}

sn::ProblemConfig to_problem_config(const ProblemFlags& f) {
  sn::ProblemConfig pc;
  pc.family = f.family;
  pc.mu = f.mu;
  pc.kernel_h = f.kernel_h;
  pc.label_rule = f.labels;
  pc.test_ratio = f.test_ratio;
  if (!f.data.empty() && !f.synthetic.empty()) throw sn::ConfigError("use either --data or --synthetic");
  if (!f.data.empty()) pc.data_path = f.data;
  else if (!f.synthetic.empty()) pc.synthetic = parse_synthetic(f.synthetic);
  else throw sn::ConfigError("a problem needs --data or --synthetic");
  return pc;
}

int report(const sn::ExperimentResult& result) {
  for (const auto& o : result.solvers) {
    if (o.result) {
      std::cerr << o.name << ": " << sn::to_string(o.result->termination) << " after " << o.result->trace.size()
                << " records";
      if (!o.result->trace.empty()) std::cerr << ", f = " << sn::detail::format_real(o.result->trace.back().f);
      if (!o.result->message.empty()) std::cerr << " (" << o.result->message << ")";
      std::cerr << '\n';
    } else {
      std::cerr << o.name << ": error: " << o.error << '\n';
    }
    if (!o.csv_path.empty()) std::cout << o.csv_path.string() << '\n';
  }
  if (!result.summary_path.empty()) std::cout << result.summary_path.string() << '\n';
  return result.any_failed() ? kExitSolver : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sketched Newton solvers for composite convex problems"};
  app.require_subcommand(1);

  // run
  std::string config_path;
  std::string run_out;
  bool run_parallel = false;
  auto* run = app.add_subcommand("run", "run an experiment described by a JSON config file");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--out", run_out, "output directory (overrides the config)");
  run->add_flag("--parallel", run_parallel, "run solvers concurrently");

  // solve
  ProblemFlags solve_problem;
  sn::SolverConfig sc;
  std::string method = "adaptive_practical";
  std::string sketch = "sjlt";
  std::string solve_out = "out";
  std::string name;
  auto* solve = app.add_subcommand("solve", "solve one problem with one method");
  add_problem_flags(solve, solve_problem);
  solve->add_option("--method", method, "effdim|adaptive|adaptive_practical|newton|gd|nag");
  solve->add_option("--sketch", sketch, "sjlt|srht|rrs|identity");
  solve->add_option("--m0", sc.m0_bar, "initial sketch size (adaptive)");
  solve->add_option("--m1", sc.m1_bar, "phase-1 sketch size (effdim)");
  solve->add_option("--m2", sc.m2_bar, "phase-2 sketch size (effdim)");
  solve->add_option("--tau", sc.tau, "rate exponent in [0, 1]");
  solve->add_option("--delta", sc.delta, "target accuracy");
  solve->add_option("--c1", sc.c1, "doubling threshold c1 (practical)");
  solve->add_option("--c2", sc.c2, "doubling threshold c2 (practical)");
  solve->add_option("--seed", sc.seed, "RNG seed");
  solve->add_option("--max-iters", sc.max_iters, "iteration cap");
  solve->add_option("--out", solve_out, "output directory");
  solve->add_option("--name", name, "solver name used for the CSV file");
  solve->add_flag("--diagnostics", sc.diagnostics, "record exact decrement and effective dimension");

  // effdim
  ProblemFlags eff_problem;
  auto* effdim = app.add_subcommand("effdim", "print the effective dimension at the initial point");
  add_problem_flags(effdim, eff_problem);

  // synth
  std::string synth_spec;
  std::string synth_out;
  std::string synth_target = "response";
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset in LIBSVM format");
  synth->add_option("--synthetic", synth_spec, "synthetic spec, e.g. n=200,d=20,spectrum=polynomial")->required();
  synth->add_option("--target", synth_target, "response|labels");
  synth->add_option("--out", synth_out, "output file (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      sn::ExperimentConfig config = sn::load_experiment_config(config_path);
      if (!run_out.empty()) config.output_dir = run_out;
      if (run_parallel) config.parallel = true;
      std::cerr << "running " << config.solvers.size() << " solver(s) on " << config.problem.family << '\n';
      return report(sn::run_experiment(config));
    }
    if (*solve) {
      sn::ExperimentConfig config;
      config.problem = to_problem_config(solve_problem);
      sc.method = sn::parse_method(method);
      sc.sketch = sn::parse_sketch_kind(sketch);
      config.solvers.push_back({name.empty() ? std::string(sn::to_string(sc.method)) : name, sc});
      config.output_dir = solve_out;
      return report(sn::run_experiment(config));
    }
    if (*effdim) {
      const sn::BuiltProblem built = sn::build_problem(to_problem_config(eff_problem));
      const double d_mu = sn::effective_dimension(*built.problem, built.problem->initial_point());
      std::cout << sn::detail::format_real(d_mu) << '\n';
      return kExitOk;
    }
    if (*synth) {
      const sn::SyntheticData data = sn::synth_controlled_spectrum(parse_synthetic(synth_spec));
      if (synth_target != "response" && synth_target != "labels") throw sn::ConfigError("--target must be response or labels");
      const sn::Dataset ds{data.a, synth_target == "labels" ? data.labels : data.response};
      if (synth_out.empty()) {
        sn::write_libsvm(std::cout, ds);
      } else {
        std::ofstream out(synth_out);
        if (!out) throw sn::ConfigError("cannot write '" + synth_out + "'");
        sn::write_libsvm(out, ds);
        std::cerr << "wrote " << ds.rows() << " rows to " << synth_out << '\n';
      }
      return kExitOk;
    }
  } catch (const sn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sn::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sn::UnmappedLabel& e) {
    std::cerr << "label error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sn::InvalidSpec& e) {
    std::cerr << "invalid sketch: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sn::InvalidParams& e) {
    std::cerr << "invalid parameters: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sn::DimensionMismatch& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitOk;
}
