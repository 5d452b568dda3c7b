#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "assr/auxiliary.hpp"
#include "assr/errors.hpp"
#include "assr/oracle.hpp"
#include "assr/penalty.hpp"
#include "assr/problem.hpp"
#include "assr/spiking.hpp"

namespace assr {

enum class SolverKind { Spiking, Auxiliary, Ista, ProxGrad };

inline std::string solver_kind_name(SolverKind k) {
  switch (k) {
    case SolverKind::Spiking: return "spiking";
    case SolverKind::Auxiliary: return "auxiliary";
    case SolverKind::Ista: return "ista";
    case SolverKind::ProxGrad: return "proxgrad";
  }
  throw config_error("unknown solver kind");
}

inline SolverKind solver_kind_from_name(const std::string& name) {
  if (name == "spiking") return SolverKind::Spiking;
  if (name == "auxiliary" || name == "aux") return SolverKind::Auxiliary;
  if (name == "ista") return SolverKind::Ista;
  if (name == "proxgrad" || name == "prox") return SolverKind::ProxGrad;
  throw config_error("unknown solver kind '" + name + "'");
}

struct MethodSpec {
  SolverKind kind = SolverKind::Spiking;
  Penalty penalty = Penalty::l1();

  std::string name() const { return solver_kind_name(kind) + "-" + penalty.label(); }
};

/// Full experiment description. `lambda` is authoritative and is copied into
/// the spiking configuration at run time; seeds for each trial's dictionary,
/// code, and noise derive from seed_base + trial via a fixed mixing function.
struct ExperimentSpec {
  int m = 100;
  int n = 200;
  double sparsity = 0.15;
  std::optional<double> snr_db = 20.0;
  double lambda = 0.1;
  int trials = 20;
  std::uint64_t seed_base = 1;
  std::vector<MethodSpec> methods;
  SpikingConfig spiking;
  AuxConfig auxiliary;
  long solver_max_iters = 100000;
  double solver_tol = 1e-10;
  int jobs = 1;
};

struct MethodAggregate {
  std::string method;
  std::vector<double> nmses;              // one per trial, in seed order
  std::vector<char> successes;            // strict NMSE < -15 dB
  std::vector<double> convergence_times;  // first time below -15 dB; NaN if never
  double median_nmse = 0.0;
  double q25_nmse = 0.0;
  double q75_nmse = 0.0;
  double success_rate = 0.0;
};

struct TrialsResult {
  std::vector<MethodAggregate> aggregates;  // in ExperimentSpec::methods order
  std::vector<std::uint64_t> trial_seeds;
};

enum class SweepAxis { Sparsity, SnrDb, MeasurementRatio };

inline std::string sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Sparsity: return "sparsity";
    case SweepAxis::SnrDb: return "snr_db";
    case SweepAxis::MeasurementRatio: return "measurement_ratio";
  }
  throw config_error("unknown sweep axis");
}

inline SweepAxis sweep_axis_from_name(const std::string& name) {
  if (name == "sparsity") return SweepAxis::Sparsity;
  if (name == "snr_db" || name == "snr") return SweepAxis::SnrDb;
  if (name == "measurement_ratio" || name == "measurement") return SweepAxis::MeasurementRatio;
  throw config_error("unknown sweep axis '" + name + "'");
}

struct SweepCell {
  std::string method;
  double value = 0.0;
  double median_nmse = 0.0;
  double q25_nmse = 0.0;
  double q75_nmse = 0.0;
  double success_probability = 0.0;
  std::vector<double> convergence_times;  // per-trial samples, NaN allowed
};

struct SweepResult {
  std::string axis;
  std::vector<double> values;
  std::vector<SweepCell> cells;  // one per (method, value), method-major in spec order
};

struct ConvergenceCurve {
  std::vector<double> times;
  std::vector<std::string> methods;
  std::vector<std::vector<double>> nmse;  // nmse[method][time index]
};

namespace detail {

/// SplitMix-style mixing so the dictionary, code, and noise streams of one
/// trial are decorrelated while staying a pure function of (base, salt).
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return xs[lo];  // avoids 0 * inf when a sample is infinite
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

inline double median(const std::vector<double>& xs) { return quantile(xs, 0.5); }

inline double resolved_aux_dt(const AuxConfig& cfg) {
  return cfg.dt > 0.0 ? cfg.dt : cfg.tau / 100.0;
}

struct TrialOutcome {
  double nmse = 0.0;
  bool success = false;
  double convergence_time = std::numeric_limits<double>::quiet_NaN();
};

/// First recorded time strictly below the success threshold.
inline double first_crossing(const std::vector<double>& times, const std::vector<double>& nmses,
                             double threshold_db) {
  for (size_t k = 0; k < times.size(); ++k) {
    if (nmses[k] < threshold_db) return times[k];
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline TrialOutcome solve_one(const Problem& problem, const MethodSpec& method,
                              const ExperimentSpec& spec) {
  constexpr double kThresholdDb = -15.0;
  const Eigen::VectorXd& truth = *problem.truth;
  TrialOutcome out;
  switch (method.kind) {
    case SolverKind::Spiking: {
      SpikingConfig cfg = spec.spiking;
      cfg.lambda = spec.lambda;
      if (cfg.sample_every <= 0.0) cfg.sample_every = cfg.tau;
      const Trace trace = run(problem, method.penalty, cfg);
      out.nmse = nmse_db(trace.final_rates, truth);
      out.convergence_time = first_crossing(trace.times, trace.nmses, kThresholdDb);
      break;
    }
    case SolverKind::Auxiliary: {
      AuxConfig cfg = spec.auxiliary;
      if (cfg.record_every <= 0) {
        cfg.record_every = std::max<long>(1, std::lround(cfg.tau / resolved_aux_dt(cfg)));
      }
      const AuxResult r = integrate(problem, method.penalty, spec.lambda, cfg);
      out.nmse = nmse_db(r.a, truth);
      std::vector<double> times, nmses;
      for (const auto& s : r.samples) {
        times.push_back(s.t);
        nmses.push_back(nmse_db(s.a, truth));
      }
      out.convergence_time = first_crossing(times, nmses, kThresholdDb);
      break;
    }
    case SolverKind::Ista:
    case SolverKind::ProxGrad: {
      const double dt = resolved_aux_dt(spec.auxiliary);  // pseudo-time: one iteration per dt
      std::vector<double> times, nmses;
      const IterateCallback cb = [&](long iter, const Eigen::VectorXd& a) {
        times.push_back(static_cast<double>(iter) * dt);
        nmses.push_back(nmse_db(a, truth));
      };
      const SolverResult r =
          method.kind == SolverKind::Ista
              ? ista_l1(problem, spec.lambda, 0.0, spec.solver_max_iters, spec.solver_tol, cb)
              : prox_grad_nonconvex(problem, method.penalty, spec.lambda, 0.0,
                                    spec.solver_max_iters, spec.solver_tol, cb);
      out.nmse = nmse_db(r.a, truth);
      out.convergence_time = first_crossing(times, nmses, kThresholdDb);
      break;
    }
  }
  out.success = out.nmse < kThresholdDb;
  return out;
}

inline void validate_spec(const ExperimentSpec& spec) {
  if (spec.m < 1 || spec.m > spec.n) throw config_error("experiment needs 1 <= m <= n");
  if (spec.trials < 1) throw config_error("trials must be >= 1");
  if (!(spec.lambda > 0.0)) throw config_error("lambda must be positive");
  if (!(spec.sparsity > 0.0) || spec.sparsity > 1.0) throw config_error("sparsity must lie in (0, 1]");
  if (spec.methods.empty()) throw config_error("at least one method is required");
  if (spec.jobs < 1) throw config_error("jobs must be >= 1");
  if (spec.solver_max_iters < 1) throw config_error("solver_max_iters must be >= 1");
  if (!(spec.solver_tol > 0.0)) throw config_error("solver_tol must be positive");
  for (const auto& method : spec.methods) {
    if (method.kind == SolverKind::Ista && method.penalty.kind() != PenaltyKind::L1) {
      throw config_error("ista solves only the l1 problem; use proxgrad for '" +
                         method.penalty.label() + "'");
    }
    const auto report = validate_rules(method.penalty, spec.lambda);
    if (!report.admissible()) {
      std::string rules;
      for (const auto& v : report.violations) {
        rules += (rules.empty() ? "" : ", ") + std::string("rule-") + std::to_string(v.rule);
      }
      throw config_error("method '" + method.name() + "' violates " +
                         (rules.empty() ? "admissibility" : rules) + " at lambda=" +
                         std::to_string(spec.lambda) +
                         " (sup|g''| = " + std::to_string(report.sup_second_derivative_magnitude) +
                         " must stay below 1/lambda)");
    }
  }
  // Also surface spiking config problems before any trial runs.
  if (std::any_of(spec.methods.begin(), spec.methods.end(),
                  [](const MethodSpec& m) { return m.kind == SolverKind::Spiking; })) {
    SpikingConfig probe = spec.spiking;
    probe.lambda = spec.lambda;
    detail::resolve_spiking_config(probe);
  }
}

inline Problem build_trial_problem(const ExperimentSpec& spec, int trial) {
  const std::uint64_t base = spec.seed_base + static_cast<std::uint64_t>(trial);
  const auto dict = make_dictionary(spec.m, spec.n, mix_seed(base, 1));
  const auto code = make_sparse_code(spec.n, spec.sparsity, mix_seed(base, 2));
  std::optional<NoiseSpec> noise;
  if (spec.snr_db) noise = NoiseSpec{*spec.snr_db, mix_seed(base, 3)};
  return synthesize(dict, code, noise);
}

}  // namespace detail

/// The synthetic instance trial number `trial` of this experiment solves.
inline Problem trial_problem(const ExperimentSpec& spec, int trial) {
  if (trial < 0 || trial >= spec.trials) throw config_error("trial index out of range");
  return detail::build_trial_problem(spec, trial);
}

/// Runs every method on the same problem instance per trial (seed_base +
/// trial determines the instance) and aggregates medians, quartiles, and
/// success rates. Trials may execute on spec.jobs threads; results are
/// merged in seed order, so output is schedule-independent.
inline TrialsResult run_trials(const ExperimentSpec& spec) {
  detail::validate_spec(spec);
  const int T = spec.trials;
  const size_t M = spec.methods.size();
  std::vector<std::vector<detail::TrialOutcome>> outcomes(M);
  for (auto& v : outcomes) v.resize(static_cast<size_t>(T));

  const auto run_trial = [&](int t) {
    const Problem problem = detail::build_trial_problem(spec, t);
    for (size_t mi = 0; mi < M; ++mi) {
      outcomes[mi][static_cast<size_t>(t)] = detail::solve_one(problem, spec.methods[mi], spec);
    }
  };

  const int jobs = std::min(spec.jobs, T);
  if (jobs <= 1) {
    for (int t = 0; t < T; ++t) run_trial(t);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w]() {
        try {
          for (int t = w; t < T; t += jobs) run_trial(t);
        } catch (...) {
          errors[static_cast<size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& th : workers) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  TrialsResult result;
  for (int t = 0; t < T; ++t) {
    result.trial_seeds.push_back(spec.seed_base + static_cast<std::uint64_t>(t));
  }
  for (size_t mi = 0; mi < M; ++mi) {
    MethodAggregate agg;
    agg.method = spec.methods[mi].name();
    int hits = 0;
    for (int t = 0; t < T; ++t) {
      const auto& o = outcomes[mi][static_cast<size_t>(t)];
      agg.nmses.push_back(o.nmse);
      agg.successes.push_back(o.success ? 1 : 0);
      agg.convergence_times.push_back(o.convergence_time);
      hits += o.success ? 1 : 0;
    }
    agg.median_nmse = detail::median(agg.nmses);
    agg.q25_nmse = detail::quantile(agg.nmses, 0.25);
    agg.q75_nmse = detail::quantile(agg.nmses, 0.75);
    agg.success_rate = static_cast<double>(hits) / static_cast<double>(T);
    result.aggregates.push_back(std::move(agg));
  }
  return result;
}

/// Re-runs the experiment once per axis value. Sparsity and SNR replace the
/// corresponding field; measurement_ratio fixes n and sets m = round(ratio*n).
inline SweepResult sweep(const ExperimentSpec& spec, SweepAxis axis,
                         const std::vector<double>& values) {
  if (values.empty()) throw config_error("sweep needs at least one axis value");
  for (size_t k = 1; k < values.size(); ++k) {
    if (!(values[k] > values[k - 1])) throw config_error("sweep values must be strictly increasing");
  }
  SweepResult result;
  result.axis = sweep_axis_name(axis);
  result.values = values;
  for (double v : values) {
    ExperimentSpec point = spec;
    switch (axis) {
      case SweepAxis::Sparsity:
        point.sparsity = v;
        break;
      case SweepAxis::SnrDb:
        point.snr_db = v;
        break;
      case SweepAxis::MeasurementRatio: {
        if (!(v > 0.0) || v > 1.0) throw config_error("measurement ratio must lie in (0, 1]");
        point.m = static_cast<int>(std::lround(v * spec.n));
        if (point.m < 1) throw config_error("measurement ratio rounds to zero rows");
        break;
      }
    }
    const TrialsResult trials = run_trials(point);
    for (const auto& agg : trials.aggregates) {
      SweepCell cell;
      cell.method = agg.method;
      cell.value = v;
      cell.median_nmse = agg.median_nmse;
      cell.q25_nmse = agg.q25_nmse;
      cell.q75_nmse = agg.q75_nmse;
      cell.success_probability = agg.success_rate;
      cell.convergence_times = agg.convergence_times;
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

/// NMSE along each method's own trajectory, snapped to the requested sample
/// times (the value at the latest state not later than each time; dynamical
/// methods run exactly to the last requested time). Iterative solvers use the
/// plotting convention of one iteration per auxiliary dt.
inline ConvergenceCurve convergence_curve(const Problem& problem,
                                          const std::vector<MethodSpec>& methods,
                                          const std::vector<double>& times,
                                          const ExperimentSpec& spec) {
  if (!problem.truth) throw config_error("convergence curve requires a problem with truth");
  if (methods.empty()) throw config_error("at least one method is required");
  if (times.empty()) throw config_error("at least one sample time is required");
  if (times.front() < 0.0) throw config_error("sample times must be non-negative");
  for (size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw config_error("sample times must be strictly increasing");
  }
  const Eigen::VectorXd& truth = *problem.truth;

  ConvergenceCurve curve;
  curve.times = times;
  for (const auto& method : methods) {
    curve.methods.push_back(method.name());
    // Trajectory as (time, nmse) pairs starting from the all-zero state.
    std::vector<double> traj_t{0.0};
    std::vector<double> traj_v{nmse_db(Eigen::VectorXd::Zero(problem.n()), truth)};
    switch (method.kind) {
      case SolverKind::Spiking: {
        SpikingConfig cfg = spec.spiking;
        cfg.lambda = spec.lambda;
        cfg.horizon = times.back();
        SpikingNetwork net(problem, method.penalty, cfg);
        const long steps = std::lround(cfg.horizon / net.config().dt);
        for (long k = 1; k <= steps; ++k) {
          net.step();
          traj_t.push_back(net.time());
          traj_v.push_back(nmse_db(net.rates(), truth));
        }
        break;
      }
      case SolverKind::Auxiliary: {
        AuxConfig cfg = spec.auxiliary;
        cfg.horizon = times.back();
        cfg.record_every = 1;
        const AuxResult r = integrate(problem, method.penalty, spec.lambda, cfg);
        for (const auto& s : r.samples) {
          if (s.t == 0.0) continue;
          traj_t.push_back(s.t);
          traj_v.push_back(nmse_db(s.a, truth));
        }
        break;
      }
      case SolverKind::Ista:
      case SolverKind::ProxGrad: {
        const double dt = detail::resolved_aux_dt(spec.auxiliary);
        const IterateCallback cb = [&](long iter, const Eigen::VectorXd& a) {
          traj_t.push_back(static_cast<double>(iter) * dt);
          traj_v.push_back(nmse_db(a, truth));
        };
        if (method.kind == SolverKind::Ista) {
          ista_l1(problem, spec.lambda, 0.0, spec.solver_max_iters, spec.solver_tol, cb);
        } else {
          prox_grad_nonconvex(problem, method.penalty, spec.lambda, 0.0, spec.solver_max_iters,
                              spec.solver_tol, cb);
        }
        break;
      }
    }
    std::vector<double> row;
    size_t cursor = 0;
    for (double t : times) {
      while (cursor + 1 < traj_t.size() && traj_t[cursor + 1] <= t + 1e-12) ++cursor;
      row.push_back(traj_v[cursor]);
    }
    curve.nmse.push_back(std::move(row));
  }
  return curve;
}

}  // namespace assr
