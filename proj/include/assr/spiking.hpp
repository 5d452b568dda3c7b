#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "assr/auxiliary.hpp"
#include "assr/errors.hpp"
#include "assr/penalty.hpp"
#include "assr/problem.hpp"

namespace assr {

/// Simulation controls for the integrate-and-fire network. The threshold,
/// reset, and floor potentials are fixed at 1, 0, 0 by design; the fields
/// exist so a misconfiguration fails loudly instead of silently. t_ref and dt
/// default to tau/10 and tau/100 when left non-positive; horizon defaults to
/// 100*tau when left negative (an explicit 0 is a valid empty run).
/// sample_every <= 0 records only the final sample.
struct SpikingConfig {
  double tau = 1.0;
  double lambda = 0.1;
  double nu_spike = 1.0;
  double nu_rest = 0.0;
  double nu_floor = 0.0;
  double t_ref = 0.0;
  double dt = 0.0;
  double horizon = -1.0;
  double sample_every = 0.0;
};

struct NeuronState {
  double potential = 0.0;         // nu_i
  double soma_current = 0.0;      // mu_i
  long spike_count = 0;
  double refractory_until = 0.0;  // absolute time the neuron may integrate again
  double rate = 0.0;              // spike_count / elapsed time, 0 at t = 0
};

struct SpikeEvent {
  int neuron = 0;
  double time = 0.0;
};

struct SpikeRaster {
  std::vector<SpikeEvent> events;  // ordered by time, then neuron index
};

/// Time series produced by run(): snapshots at the sample times plus the
/// spike raster, final state, and the global soma/average-current extrema
/// observed at every step (not just at samples).
struct Trace {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> rates;
  std::vector<Eigen::VectorXd> potentials;
  std::vector<Eigen::VectorXd> average_currents;
  std::vector<double> energies;
  std::vector<double> nmses;  // empty when the problem has no truth code
  SpikeRaster raster;
  Eigen::VectorXd final_rates;
  Eigen::VectorXd final_average_currents;
  double mu_min = 0.0, mu_max = 0.0;
  double u_min = 0.0, u_max = 0.0;
  double t_end = 0.0;
};

/// Per-neuron adaptive leak Lambda_i = lambda * g'(a_i).
inline Eigen::VectorXd adaptive_leak(const Penalty& pen, double lambda,
                                     const Eigen::VectorXd& rates) {
  Eigen::VectorXd leak(rates.size());
  for (int i = 0; i < rates.size(); ++i) leak[i] = lambda * pen.g_prime(rates[i]);
  return leak;
}

namespace detail {

inline SpikingConfig resolve_spiking_config(SpikingConfig cfg) {
  if (!(cfg.tau > 0.0)) throw config_error("tau must be positive");
  if (!(cfg.lambda > 0.0)) throw config_error("lambda must be positive");
  if (cfg.nu_spike != 1.0 || cfg.nu_rest != 0.0 || cfg.nu_floor != 0.0) {
    throw config_error("threshold, reset, and floor potentials are fixed at 1, 0, 0");
  }
  if (cfg.t_ref <= 0.0) cfg.t_ref = cfg.tau / 10.0;
  if (cfg.dt <= 0.0) cfg.dt = cfg.tau / 100.0;
  if (cfg.horizon < 0.0) cfg.horizon = 100.0 * cfg.tau;
  if (cfg.dt > cfg.t_ref / 10.0 * (1.0 + 1e-12)) {
    throw config_error("dt must not exceed t_ref/10 (a refractory period spans >= 10 steps)");
  }
  return cfg;
}

}  // namespace detail

/// Closed-form envelope for soma and average currents: with
/// beta = 1/(tau*(1 - exp(-t_ref/tau))) the bound is
/// +-(b_max + (N-1)*Omega_max*beta).
inline std::pair<double, double> current_bounds(const Problem& p, const SpikingConfig& config) {
  const auto cfg = detail::resolve_spiking_config(config);
  const double b_max = p.bias.size() > 0 ? p.bias.cwiseAbs().maxCoeff() : 0.0;
  const double omega_max = p.lateral.cwiseAbs().maxCoeff();
  const double beta = 1.0 / (cfg.tau * (1.0 - std::exp(-cfg.t_ref / cfg.tau)));
  const double reach = b_max + static_cast<double>(p.n() - 1) * omega_max * beta;
  return {-reach, reach};
}

/// Spike counts in [0, t] divided by t; the zero vector at t = 0 by
/// convention.
inline Eigen::VectorXd firing_rates(const SpikeRaster& raster, double t, int n) {
  if (n < 1) throw config_error("neuron count must be >= 1");
  if (t < 0.0) throw config_error("rate evaluation time must be non-negative");
  Eigen::VectorXd rates = Eigen::VectorXd::Zero(n);
  if (t == 0.0) return rates;
  for (const auto& ev : raster.events) {
    if (ev.neuron < 0 || ev.neuron >= n) throw config_error("raster event neuron out of range");
    if (ev.time <= t) rates[ev.neuron] += 1.0;
  }
  return rates / t;
}

/// Clock-driven integrate-and-fire network. Per step: exact exponential
/// decay of soma currents toward the bias, adaptive leak from the current
/// rates, forward-Euler potential update with a floor at 0, threshold
/// detection against pre-kick potentials, then all recurrent kicks
/// -Omega_ij/tau applied at once (order-independent simultaneity).
class SpikingNetwork {
 public:
  SpikingNetwork(Problem problem, Penalty penalty, const SpikingConfig& config)
      : problem_(std::move(problem)),
        penalty_(std::move(penalty)),
        cfg_(detail::resolve_spiking_config(config)) {
    const auto report = validate_rules(penalty_, cfg_.lambda);
    if (!report.admissible()) {
      throw config_error("penalty '" + penalty_.label() + "' violates admissibility rules at lambda=" +
                         std::to_string(cfg_.lambda));
    }
    decay_ = std::exp(-cfg_.dt / cfg_.tau);
    hold_ = cfg_.tau * (1.0 - decay_);  // integral weight of (mu - b) over one step
    neurons_.resize(static_cast<size_t>(problem_.n()));
    current_integral_ = Eigen::VectorXd::Zero(problem_.n());
    for (int i = 0; i < problem_.n(); ++i) {
      neurons_[static_cast<size_t>(i)].soma_current = problem_.bias[i];
    }
    mu_min_ = u_min_ = problem_.bias.minCoeff();
    mu_max_ = u_max_ = problem_.bias.maxCoeff();
  }

  /// Advances one step of dt and returns the indices that fired, ascending.
  std::vector<int> step() {
    const int n = problem_.n();
    const double t_next = t_ + cfg_.dt;
    std::vector<int> fired;
    for (int i = 0; i < n; ++i) {
      auto& nrn = neurons_[static_cast<size_t>(i)];
      const double mu_entry = nrn.soma_current;
      const double b = problem_.bias[i];
      // Average-current bookkeeping uses the exact integral of the decaying
      // current over [t, t+dt]; kicks land at the step boundary and are
      // carried by mu_entry of later steps.
      current_integral_[i] += b * cfg_.dt + (mu_entry - b) * hold_;
      nrn.soma_current = b + (mu_entry - b) * decay_;
      if (t_ >= nrn.refractory_until) {
        const double leak = cfg_.lambda * penalty_.g_prime(nrn.rate);
        nrn.potential += cfg_.dt * (nrn.soma_current - leak);
        nrn.potential = std::max(nrn.potential, cfg_.nu_floor);
        if (nrn.potential >= cfg_.nu_spike) {
          nrn.potential = cfg_.nu_rest;
          nrn.refractory_until = t_next + cfg_.t_ref;
          ++nrn.spike_count;
          fired.push_back(i);
          raster_.events.push_back({i, t_next});
        }
      }
    }
    for (int j : fired) {
      for (int i = 0; i < n; ++i) {
        neurons_[static_cast<size_t>(i)].soma_current -= problem_.lateral(i, j) / cfg_.tau;
      }
    }
    t_ = t_next;
    for (int i = 0; i < n; ++i) {
      auto& nrn = neurons_[static_cast<size_t>(i)];
      nrn.rate = static_cast<double>(nrn.spike_count) / t_;
      const double u = current_integral_[i] / t_;
      mu_min_ = std::min(mu_min_, nrn.soma_current);
      mu_max_ = std::max(mu_max_, nrn.soma_current);
      u_min_ = std::min(u_min_, u);
      u_max_ = std::max(u_max_, u);
    }
    return fired;
  }

  double time() const { return t_; }
  const SpikingConfig& config() const { return cfg_; }
  const Problem& problem() const { return problem_; }
  const Penalty& penalty() const { return penalty_; }
  const std::vector<NeuronState>& neurons() const { return neurons_; }
  const SpikeRaster& raster() const { return raster_; }

  Eigen::VectorXd rates() const { return field(&NeuronState::rate); }
  Eigen::VectorXd potentials() const { return field(&NeuronState::potential); }
  Eigen::VectorXd soma_currents() const { return field(&NeuronState::soma_current); }
  /// u_i(t) = (1/t) * integral of mu_i; equals the bias at t = 0.
  Eigen::VectorXd average_currents() const {
    if (t_ == 0.0) return problem_.bias;
    return current_integral_ / t_;
  }

  double mu_min() const { return mu_min_; }
  double mu_max() const { return mu_max_; }
  double u_min() const { return u_min_; }
  double u_max() const { return u_max_; }

 private:
  Eigen::VectorXd field(double NeuronState::* member) const {
    Eigen::VectorXd v(static_cast<int>(neurons_.size()));
    for (size_t i = 0; i < neurons_.size(); ++i) v[static_cast<int>(i)] = neurons_[i].*member;
    return v;
  }

  Problem problem_;
  Penalty penalty_;
  SpikingConfig cfg_;
  std::vector<NeuronState> neurons_;
  Eigen::VectorXd current_integral_;
  SpikeRaster raster_;
  double t_ = 0.0;
  double decay_ = 0.0;
  double hold_ = 0.0;
  double mu_min_ = 0.0, mu_max_ = 0.0, u_min_ = 0.0, u_max_ = 0.0;
};

/// Validates the configuration and penalty and returns the network at rest:
/// potentials 0, soma currents at the bias, no spikes.
inline SpikingNetwork init_network(Problem problem, Penalty penalty, const SpikingConfig& config) {
  return SpikingNetwork(std::move(problem), std::move(penalty), config);
}

/// Simulates from 0 to the horizon, sampling every sample_every seconds
/// (plus the initial and final states); the final rates are the recovered
/// code.
inline Trace run(const Problem& problem, const Penalty& penalty, const SpikingConfig& config) {
  SpikingNetwork net(problem, penalty, config);
  const auto& cfg = net.config();
  Trace trace;
  const long total_steps = std::lround(cfg.horizon / cfg.dt);
  const long stride =
      cfg.sample_every > 0.0 ? std::max<long>(1, std::lround(cfg.sample_every / cfg.dt)) : 0;

  const auto sample = [&](double t) {
    trace.times.push_back(t);
    trace.rates.push_back(net.rates());
    trace.potentials.push_back(net.potentials());
    trace.average_currents.push_back(net.average_currents());
    trace.energies.push_back(energy(trace.rates.back(), problem, penalty, cfg.lambda).total());
    if (problem.truth) trace.nmses.push_back(nmse_db(trace.rates.back(), *problem.truth));
  };

  if (total_steps == 0) {  // horizon 0: empty trace, all rates zero
    trace.final_rates = Eigen::VectorXd::Zero(problem.n());
    trace.final_average_currents = problem.bias;
    trace.mu_min = net.mu_min();
    trace.mu_max = net.mu_max();
    trace.u_min = net.u_min();
    trace.u_max = net.u_max();
    return trace;
  }

  if (stride > 0) sample(0.0);
  for (long k = 1; k <= total_steps; ++k) {
    net.step();
    if ((stride > 0 && k % stride == 0) || k == total_steps) sample(net.time());
  }
  trace.raster = net.raster();
  trace.final_rates = net.rates();
  trace.final_average_currents = net.average_currents();
  trace.mu_min = net.mu_min();
  trace.mu_max = net.mu_max();
  trace.u_min = net.u_min();
  trace.u_max = net.u_max();
  trace.t_end = net.time();
  return trace;
}

}  // namespace assr
