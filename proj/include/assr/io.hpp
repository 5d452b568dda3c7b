#pragma once

// CSV and JSON emission for solver outputs and experiment results. Numbers
// print with shortest round-trip precision, so a deterministic run produces
// byte-identical files every time.

#include <json.hpp>

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "auxiliary.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "spiking.hpp"

namespace assr {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string number_repr(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Median time-to-threshold over trials; NaN entries mean "never converged"
/// and sort above every finite time, so the median is NaN once at least half
/// the trials failed to converge.
inline double median_convergence_time(const std::vector<double>& times) {
  std::vector<double> xs;
  xs.reserve(times.size());
  for (const double t : times) {
    xs.push_back(std::isnan(t) ? std::numeric_limits<double>::infinity() : t);
  }
  const double q = detail::quantile(xs, 0.5);
  return std::isfinite(q) ? q : std::numeric_limits<double>::quiet_NaN();
}

/// Spike raster: one event per row, times reported in units of tau.
inline void write_raster_csv(std::ostream& os, const SpikeRaster& raster, double tau) {
  if (!(tau > 0.0)) throw config_error("raster export needs tau > 0");
  os << "neuron,time\n";
  for (const auto& event : raster.events) {
    os << event.neuron << ',' << number_repr(event.time / tau) << '\n';
  }
}

/// Sampled network state: one row per (sample time, neuron). The current
/// column is the running average soma current u_i(t); energy and nmse are
/// network-wide and repeat across the neurons of one sample. Times are in
/// units of tau; nmse prints as nan when the problem carries no truth code.
inline void write_trace_csv(std::ostream& os, const Trace& trace, double tau) {
  if (!(tau > 0.0)) throw config_error("trace export needs tau > 0");
  os << "time,neuron,rate,potential,current,energy,nmse\n";
  for (size_t s = 0; s < trace.times.size(); ++s) {
    const std::string time = number_repr(trace.times[s] / tau);
    const std::string energy = number_repr(trace.energies[s]);
    const std::string nmse =
        trace.nmses.empty() ? "nan" : number_repr(trace.nmses[s]);
    const Eigen::VectorXd& rates = trace.rates[s];
    const Eigen::VectorXd& potentials = trace.potentials[s];
    const Eigen::VectorXd& currents = trace.average_currents[s];
    for (Eigen::Index i = 0; i < rates.size(); ++i) {
      os << time << ',' << i << ',' << number_repr(rates[i]) << ','
         << number_repr(potentials[i]) << ',' << number_repr(currents[i]) << ',' << energy << ','
         << nmse << '\n';
    }
  }
}

/// Recovered codes, one row per (method, coefficient index).
inline void write_codes_csv(std::ostream& os, const std::vector<std::string>& methods,
                            const std::vector<Eigen::VectorXd>& codes) {
  if (methods.size() != codes.size()) {
    throw config_error("codes export needs one code per method");
  }
  os << "method,index,value\n";
  for (size_t m = 0; m < methods.size(); ++m) {
    for (Eigen::Index i = 0; i < codes[m].size(); ++i) {
      os << methods[m] << ',' << i << ',' << number_repr(codes[m][i]) << '\n';
    }
  }
}

/// Per-method accuracy against the truth code.
inline void write_nmse_csv(std::ostream& os, const std::vector<std::string>& methods,
                           const std::vector<double>& nmses) {
  if (methods.size() != nmses.size()) {
    throw config_error("nmse export needs one value per method");
  }
  os << "method,nmse_db\n";
  for (size_t m = 0; m < methods.size(); ++m) {
    os << methods[m] << ',' << number_repr(nmses[m]) << '\n';
  }
}

/// Sweep table: one row per (method, axis value, statistic).
inline void write_sweep_csv(std::ostream& os, const SweepResult& result) {
  os << "method,axis,value,statistic,result\n";
  for (const auto& cell : result.cells) {
    const auto row = [&](const char* statistic, double value) {
      os << cell.method << ',' << result.axis << ',' << number_repr(cell.value) << ',' << statistic
         << ',' << number_repr(value) << '\n';
    };
    row("median_nmse", cell.median_nmse);
    row("q25_nmse", cell.q25_nmse);
    row("q75_nmse", cell.q75_nmse);
    row("success_probability", cell.success_probability);
    row("median_convergence_time", median_convergence_time(cell.convergence_times));
  }
}

/// NMSE-vs-time table: one row per (method, sample time).
inline void write_curve_csv(std::ostream& os, const ConvergenceCurve& curve) {
  os << "method,time,nmse_db\n";
  for (size_t m = 0; m < curve.methods.size(); ++m) {
    for (size_t k = 0; k < curve.times.size(); ++k) {
      os << curve.methods[m] << ',' << number_repr(curve.times[k]) << ','
         << number_repr(curve.nmse[m][k]) << '\n';
    }
  }
}

/// Aux trajectory: one row per (sample time, coefficient index).
inline void write_aux_trace_csv(std::ostream& os, const AuxResult& result, double tau) {
  if (!(tau > 0.0)) throw config_error("trajectory export needs tau > 0");
  os << "time,index,current,rate,energy\n";
  for (const auto& sample : result.samples) {
    const std::string time = number_repr(sample.t / tau);
    const std::string energy = number_repr(sample.energy);
    for (Eigen::Index i = 0; i < sample.a.size(); ++i) {
      os << time << ',' << i << ',' << number_repr(sample.u[i]) << ',' << number_repr(sample.a[i])
         << ',' << energy << '\n';
    }
  }
}

inline nlohmann::json aggregate_to_json(const MethodAggregate& agg) {
  nlohmann::json j;
  j["method"] = agg.method;
  j["nmse_db"] = agg.nmses;
  j["success"] = nlohmann::json::array();
  for (const char s : agg.successes) j["success"].push_back(s != 0);
  j["convergence_time"] = agg.convergence_times;  // NaN serializes as null
  j["median_nmse"] = agg.median_nmse;
  j["q25_nmse"] = agg.q25_nmse;
  j["q75_nmse"] = agg.q75_nmse;
  j["success_probability"] = agg.success_rate;
  j["median_convergence_time"] = median_convergence_time(agg.convergence_times);
  return j;
}

inline nlohmann::json trials_to_json(const TrialsResult& result) {
  nlohmann::json j;
  j["trial_seeds"] = result.trial_seeds;
  j["methods"] = nlohmann::json::array();
  for (const auto& agg : result.aggregates) j["methods"].push_back(aggregate_to_json(agg));
  return j;
}

inline nlohmann::json sweep_to_json(const SweepResult& result) {
  nlohmann::json j;
  j["axis"] = result.axis;
  j["values"] = result.values;
  j["cells"] = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    nlohmann::json c;
    c["method"] = cell.method;
    c["value"] = cell.value;
    c["median_nmse"] = cell.median_nmse;
    c["q25_nmse"] = cell.q25_nmse;
    c["q75_nmse"] = cell.q75_nmse;
    c["success_probability"] = cell.success_probability;
    c["convergence_time"] = cell.convergence_times;
    c["median_convergence_time"] = median_convergence_time(cell.convergence_times);
    j["cells"].push_back(c);
  }
  return j;
}

inline nlohmann::json curve_to_json(const ConvergenceCurve& curve) {
  nlohmann::json j;
  j["times"] = curve.times;
  j["methods"] = nlohmann::json::array();
  for (size_t m = 0; m < curve.methods.size(); ++m) {
    j["methods"].push_back(
        nlohmann::json{{"method", curve.methods[m]}, {"nmse_db", curve.nmse[m]}});
  }
  return j;
}

/// Writes content atomically enough for our purposes: open, write, flush, and
/// fail loudly on any stream error. Parent directories are created on demand.
inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      throw config_error("cannot create directory '" + path.parent_path().string() +
                         "': " + ec.message());
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw config_error("cannot open '" + path.string() + "' for writing");
  os << content;
  os.flush();
  if (!os) throw config_error("failed writing '" + path.string() + "'");
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

/// Renders one of the CSV writers above into a file.
template <typename WriteFn>
void write_csv_file(const std::filesystem::path& path, WriteFn&& write) {
  std::ostringstream os;
  write(os);
  write_text_file(path, os.str());
}

}  // namespace assr
