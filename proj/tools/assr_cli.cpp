// Command-line front end: solve one synthetic instance, sweep an experiment
// axis, run the built-in three-neuron demo, or validate a penalty/lambda
// pairing. Every run directory receives a meta.json with the fully resolved
// configuration; feeding that file back in reproduces the run byte for byte.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <assr/config.hpp>
#include <assr/io.hpp>

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Accepts either a comma-separated list ("0.1,0.2,0.4") or an inclusive
/// start:stop:step range ("0.05:0.30:0.05").
std::vector<double> parse_values(const std::string& text) {
  const auto to_double = [](const std::string& s) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw assr::config_error("cannot parse number '" + s + "' in --values");
    }
    if (used != s.size()) throw assr::config_error("cannot parse number '" + s + "' in --values");
    return v;
  };
  const auto split = [](const std::string& s, char sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
      const size_t pos = s.find(sep, start);
      parts.push_back(s.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return parts;
  };

  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw assr::config_error("range syntax is start:stop:step");
    const double start = to_double(parts[0]);
    const double stop = to_double(parts[1]);
    const double step = to_double(parts[2]);
    if (!(step > 0.0) || stop < start) {
      throw assr::config_error("range needs step > 0 and stop >= start");
    }
    const long count = std::lround((stop - start) / step);
    std::vector<double> values;
    for (long i = 0; i <= count; ++i) {
      double v = start + static_cast<double>(i) * step;
      if (std::abs(v - stop) < step * 1e-9) v = stop;  // pin the endpoint exactly
      if (v > stop + step * 1e-9) break;
      values.push_back(v);
    }
    return values;
  }
  std::vector<double> values;
  for (const auto& part : split(text, ',')) values.push_back(to_double(part));
  return values;
}

/// One method's full solve on one instance, keeping whatever artifacts the
/// solver kind produces (network trace, auxiliary trajectory, or iterate
/// counts) for file export.
struct MethodRun {
  std::string name;
  Eigen::VectorXd code;
  double nmse = kNaN;
  std::optional<assr::Trace> trace;
  std::optional<assr::AuxResult> aux;
  long iterations = -1;
  bool converged = true;
  double kkt = kNaN;
  double final_energy = kNaN;
};

MethodRun run_method(const assr::Problem& problem, const assr::MethodSpec& method,
                     const assr::ExperimentSpec& spec) {
  MethodRun out;
  out.name = method.name();
  switch (method.kind) {
    case assr::SolverKind::Spiking: {
      assr::SpikingConfig cfg = spec.spiking;
      cfg.lambda = spec.lambda;
      assr::Trace trace = assr::run(problem, method.penalty, cfg);
      out.code = trace.final_rates;
      if (!trace.energies.empty()) out.final_energy = trace.energies.back();
      out.trace = std::move(trace);
      break;
    }
    case assr::SolverKind::Auxiliary: {
      assr::AuxResult result =
          assr::integrate(problem, method.penalty, spec.lambda, spec.auxiliary);
      out.code = result.a;
      out.converged = result.converged;
      out.iterations = result.steps;
      if (!result.energies.empty()) out.final_energy = result.energies.back();
      out.kkt = assr::kkt_residual(result.a, problem, method.penalty, spec.lambda);
      out.aux = std::move(result);
      break;
    }
    case assr::SolverKind::Ista:
    case assr::SolverKind::ProxGrad: {
      const assr::SolverResult result =
          method.kind == assr::SolverKind::Ista
              ? assr::ista_l1(problem, spec.lambda, 0.0, spec.solver_max_iters, spec.solver_tol)
              : assr::prox_grad_nonconvex(problem, method.penalty, spec.lambda, 0.0,
                                          spec.solver_max_iters, spec.solver_tol);
      out.code = result.a;
      out.iterations = result.iterations;
      out.converged = result.converged;
      out.kkt = result.kkt;
      out.final_energy = result.final_energy.total();
      break;
    }
  }
  if (problem.truth) out.nmse = assr::nmse_db(out.code, *problem.truth);
  return out;
}

nlohmann::json method_run_json(const MethodRun& run) {
  nlohmann::json j;
  j["method"] = run.name;
  j["nmse_db"] = run.nmse;  // NaN serializes as null when no truth is known
  j["converged"] = run.converged;
  j["final_energy"] = run.final_energy;
  if (run.iterations >= 0) j["iterations"] = run.iterations;
  if (!std::isnan(run.kkt)) j["kkt_residual"] = run.kkt;
  if (run.trace) {
    j["spikes"] = run.trace->raster.events.size();
    j["t_end"] = run.trace->t_end;
    j["soma_current_range"] = {run.trace->mu_min, run.trace->mu_max};
    j["average_current_range"] = {run.trace->u_min, run.trace->u_max};
  }
  return j;
}

nlohmann::json seeds_json(const assr::ExperimentSpec& spec) {
  nlohmann::json trials = nlohmann::json::array();
  for (int t = 0; t < spec.trials; ++t) {
    trials.push_back(spec.seed_base + static_cast<std::uint64_t>(t));
  }
  return nlohmann::json{{"trials", trials}};
}

void write_meta(const fs::path& dir, const assr::RunConfig& cfg) {
  nlohmann::json meta = assr::run_config_to_json(cfg);
  meta["seeds"] = seeds_json(cfg.spec);
  assr::write_json_file(dir / "meta.json", meta);
}

/// Writes the per-instance files for a list of method runs: recovered codes,
/// accuracy, and the raster/trace/trajectory artifacts that exist per kind.
void write_instance_files(const fs::path& dir, const std::vector<MethodRun>& runs,
                          const assr::ExperimentSpec& spec) {
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> codes;
  std::vector<double> nmses;
  for (const auto& run : runs) {
    names.push_back(run.name);
    codes.push_back(run.code);
    nmses.push_back(run.nmse);
  }
  assr::write_csv_file(dir / "codes.csv",
                       [&](std::ostream& os) { assr::write_codes_csv(os, names, codes); });
  assr::write_csv_file(dir / "nmse.csv",
                       [&](std::ostream& os) { assr::write_nmse_csv(os, names, nmses); });
  for (const auto& run : runs) {
    if (run.trace) {
      assr::write_csv_file(dir / ("raster-" + run.name + ".csv"), [&](std::ostream& os) {
        assr::write_raster_csv(os, run.trace->raster, spec.spiking.tau);
      });
      assr::write_csv_file(dir / ("trace-" + run.name + ".csv"), [&](std::ostream& os) {
        assr::write_trace_csv(os, *run.trace, spec.spiking.tau);
      });
    }
    if (run.aux) {
      assr::write_csv_file(dir / ("trajectory-" + run.name + ".csv"), [&](std::ostream& os) {
        assr::write_aux_trace_csv(os, *run.aux, spec.auxiliary.tau);
      });
    }
  }
}

/// Re-runs the spiking methods of each trial and stores their raster/trace
/// files under trial subdirectories. Opt-in because it repeats the solves.
void retain_traces(const fs::path& dir, const assr::ExperimentSpec& spec) {
  for (int t = 0; t < spec.trials; ++t) {
    const assr::Problem problem = assr::trial_problem(spec, t);
    for (const auto& method : spec.methods) {
      if (method.kind != assr::SolverKind::Spiking) continue;
      assr::SpikingConfig cfg = spec.spiking;
      cfg.lambda = spec.lambda;
      const assr::Trace trace = assr::run(problem, method.penalty, cfg);
      const fs::path sub = dir / ("trial-" + std::to_string(t));
      assr::write_csv_file(sub / ("raster-" + method.name() + ".csv"), [&](std::ostream& os) {
        assr::write_raster_csv(os, trace.raster, cfg.tau);
      });
      assr::write_csv_file(sub / ("trace-" + method.name() + ".csv"), [&](std::ostream& os) {
        assr::write_trace_csv(os, trace, cfg.tau);
      });
    }
  }
}

int cmd_solve(assr::RunConfig cfg) {
  cfg = assr::finalize_run_config(cfg);
  const fs::path dir = cfg.out_dir;

  const assr::Problem problem = assr::trial_problem(cfg.spec, 0);
  std::vector<MethodRun> runs;
  for (const auto& method : cfg.spec.methods) {
    runs.push_back(run_method(problem, method, cfg.spec));
  }

  write_meta(dir, cfg);
  write_instance_files(dir, runs, cfg.spec);
  nlohmann::json summary;
  summary["problem"] = {{"m", cfg.spec.m},
                        {"n", cfg.spec.n},
                        {"sparsity", cfg.spec.sparsity},
                        {"noiseless", !cfg.spec.snr_db.has_value()}};
  summary["methods"] = nlohmann::json::array();
  for (const auto& run : runs) summary["methods"].push_back(method_run_json(run));
  assr::write_json_file(dir / "summary.json", summary);
  if (cfg.keep_traces) retain_traces(dir / "trials", cfg.spec);

  for (const auto& run : runs) {
    std::cout << run.name << ": NMSE = " << assr::number_repr(run.nmse) << " dB\n";
  }
  std::cout << "results in " << dir.string() << "\n";
  return 0;
}

int cmd_sweep(assr::RunConfig cfg) {
  if (cfg.sweep_axis.empty()) throw assr::config_error("sweep needs --axis (or meta with sweep)");
  if (cfg.sweep_values.empty()) {
    throw assr::config_error("sweep needs --values (or meta with sweep)");
  }
  const assr::SweepAxis axis = assr::sweep_axis_from_name(cfg.sweep_axis);
  cfg.sweep_axis = assr::sweep_axis_name(axis);  // canonical spelling in the echo
  cfg = assr::finalize_run_config(cfg);
  const fs::path dir = cfg.out_dir;

  const assr::SweepResult result = assr::sweep(cfg.spec, axis, cfg.sweep_values);
  write_meta(dir, cfg);
  assr::write_csv_file(dir / "sweep.csv",
                       [&](std::ostream& os) { assr::write_sweep_csv(os, result); });
  assr::write_json_file(dir / "sweep.json", assr::sweep_to_json(result));
  if (cfg.keep_traces) {
    for (size_t vi = 0; vi < cfg.sweep_values.size(); ++vi) {
      assr::ExperimentSpec at = cfg.spec;
      const double v = cfg.sweep_values[vi];
      switch (axis) {
        case assr::SweepAxis::Sparsity: at.sparsity = v; break;
        case assr::SweepAxis::SnrDb: at.snr_db = v; break;
        case assr::SweepAxis::MeasurementRatio:
          at.m = static_cast<int>(std::lround(v * at.n));
          break;
      }
      retain_traces(dir / ("value-" + std::to_string(vi)), at);
    }
  }

  std::cout << result.cells.size() << " sweep cells over axis " << result.axis << "\n";
  std::cout << "results in " << dir.string() << "\n";
  return 0;
}

/// The built-in three-neuron comparison: the adaptive exponential penalty
/// against the plain l1 baseline, on small noiseless instances with two of
/// three coefficients active. Aggregates over seeds and keeps the first
/// trial's artifacts plus a convergence curve.
assr::RunConfig demo_config() {
  assr::RunConfig cfg;
  cfg.spec.m = 3;
  cfg.spec.n = 3;
  cfg.spec.sparsity = 2.0 / 3.0;
  cfg.spec.snr_db.reset();
  cfg.spec.lambda = 0.03;
  cfg.spec.trials = 20;
  cfg.spec.seed_base = 1;
  cfg.spec.methods = {assr::MethodSpec{assr::SolverKind::Spiking, assr::Penalty::l1()},
                      assr::MethodSpec{assr::SolverKind::Spiking, assr::Penalty::exponential(1.0)}};
  cfg.spec.spiking.t_ref = 0.005;  // small dead-time bias so the rate gap reflects the penalties
  cfg.spec.spiking.dt = 0.0005;
  cfg.spec.spiking.horizon = 400.0;
  cfg.spec.spiking.sample_every = 1.0;
  return cfg;
}

int cmd_demo(assr::RunConfig cfg) {
  cfg = assr::finalize_run_config(cfg);
  const fs::path dir = cfg.out_dir;

  const assr::TrialsResult trials = assr::run_trials(cfg.spec);
  const assr::Problem problem = assr::trial_problem(cfg.spec, 0);
  std::vector<MethodRun> runs;
  for (const auto& method : cfg.spec.methods) {
    runs.push_back(run_method(problem, method, cfg.spec));
  }
  std::vector<double> times;
  for (double t = 0.0; t <= cfg.spec.spiking.horizon; t += cfg.spec.spiking.sample_every) {
    times.push_back(t);
  }
  const assr::ConvergenceCurve curve =
      assr::convergence_curve(problem, cfg.spec.methods, times, cfg.spec);

  write_meta(dir, cfg);
  write_instance_files(dir, runs, cfg.spec);
  assr::write_csv_file(dir / "curve.csv",
                       [&](std::ostream& os) { assr::write_curve_csv(os, curve); });
  assr::write_json_file(dir / "summary.json", assr::trials_to_json(trials));
  if (cfg.keep_traces) retain_traces(dir / "trials", cfg.spec);

  for (const auto& agg : trials.aggregates) {
    std::cout << agg.method << ": median NMSE = " << assr::number_repr(agg.median_nmse)
              << " dB over " << agg.nmses.size() << " trials\n";
  }
  std::cout << "results in " << dir.string() << "\n";
  return 0;
}

int cmd_validate(const std::string& name, std::optional<double> param, double lambda) {
  const assr::Penalty penalty = assr::penalty_from_name(name, param);
  const assr::RuleReport report = assr::validate_rules(penalty, lambda);

  nlohmann::json j;
  j["penalty"] = penalty.name();
  if (penalty.kind() == assr::PenaltyKind::L1) {
    j["param"] = nullptr;
  } else {
    j["param"] = penalty.parameter();
  }
  j["lambda"] = lambda;
  j["passed"] = report.passed;
  j["baseline_exempt"] = report.baseline_exempt;
  j["admissible"] = report.admissible();
  j["sup_second_derivative_magnitude"] = report.sup_second_derivative_magnitude;
  j["violations"] = nlohmann::json::array();
  for (const auto& v : report.violations) {
    j["violations"].push_back({{"rule", v.rule}, {"x", v.x}, {"value", v.value}});
  }
  if (report.baseline_exempt) {
    j["note"] = "l1 is the non-adaptive baseline; the strict-concavity rule is waived";
  }
  std::cout << j.dump(2) << "\n";
  if (!report.admissible()) {
    std::cerr << "penalty '" << penalty.label() << "' is not admissible at lambda=" << lambda
              << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive spiking sparse recovery toolkit"};
  app.require_subcommand(1);

  std::string solve_config, sweep_config, out_dir, axis, values_text, penalty_name;
  int jobs = 0;
  int demo_trials = 0;
  std::uint64_t demo_seed = 0;
  std::optional<double> penalty_param;
  double lambda = 0.1;
  bool keep = false;

  CLI::App* solve = app.add_subcommand(
      "solve", "recover one synthetic instance; writes codes, accuracy, raster, and trace files");
  solve->add_option("config", solve_config, "JSON config file (defaults apply when omitted)");
  solve->add_option("--out", out_dir, "output directory (default runs/<config hash>)");
  solve->add_option("--jobs", jobs, "worker threads for trial batches");
  solve->add_flag("--keep-traces", keep, "retain raster/trace files for every trial");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "run the trial batch across an axis of sparsity, snr, or measurement ratio");
  sweep->add_option("config", sweep_config, "JSON config file (defaults apply when omitted)");
  sweep->add_option("--axis", axis, "sparsity | snr_db | measurement_ratio");
  sweep->add_option("--values", values_text, "comma list (0.1,0.2) or range start:stop:step");
  sweep->add_option("--out", out_dir, "output directory (default runs/<config hash>)");
  sweep->add_option("--jobs", jobs, "worker threads for trial batches");
  sweep->add_flag("--keep-traces", keep, "retain raster/trace files for every trial");

  CLI::App* demo = app.add_subcommand(
      "demo", "three-neuron comparison of the adaptive and baseline spiking solvers");
  demo->add_option("--out", out_dir, "output directory (default runs/<config hash>)");
  demo->add_option("--jobs", jobs, "worker threads for trial batches");
  demo->add_option("--trials", demo_trials, "number of seeded instances (default 20)");
  demo->add_option("--seed", demo_seed, "base seed (default 1)");
  demo->add_flag("--keep-traces", keep, "retain raster/trace files for every trial");

  CLI::App* validate = app.add_subcommand(
      "validate", "check a penalty/lambda pairing against the admissibility rules");
  validate->add_option("--penalty", penalty_name, "l1 | exp | log | arctan")->required();
  validate->add_option("--param", penalty_param, "shape parameter (not used by l1)");
  validate->add_option("--lambda", lambda, "regularization weight")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a config error
  }

  try {
    if (app.got_subcommand(validate)) {
      return cmd_validate(penalty_name, penalty_param, lambda);
    }
    assr::RunConfig cfg;
    if (app.got_subcommand(solve)) {
      if (!solve_config.empty()) cfg = assr::load_run_config(solve_config);
    } else if (app.got_subcommand(sweep)) {
      if (!sweep_config.empty()) cfg = assr::load_run_config(sweep_config);
    } else {
      cfg = demo_config();
      if (demo->count("--trials") > 0) cfg.spec.trials = demo_trials;
      if (demo->count("--seed") > 0) cfg.spec.seed_base = demo_seed;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (jobs > 0) cfg.spec.jobs = jobs;
    if (keep) cfg.keep_traces = true;
    if (app.got_subcommand(sweep)) {
      if (!axis.empty()) cfg.sweep_axis = axis;
      if (!values_text.empty()) cfg.sweep_values = parse_values(values_text);
      return cmd_sweep(std::move(cfg));
    }
    if (app.got_subcommand(demo)) return cmd_demo(std::move(cfg));
    return cmd_solve(std::move(cfg));
  } catch (const assr::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const assr::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
