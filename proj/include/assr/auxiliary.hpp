#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "assr/errors.hpp"
#include "assr/penalty.hpp"
#include "assr/problem.hpp"

namespace assr {

/// Objective split into data-fidelity and regularizer parts:
/// total = 0.5 * |s - Phi a|^2 + lambda * sum_i g(a_i).
struct EnergyValue {
  double fidelity = 0.0;
  double regularizer = 0.0;
  double total() const { return fidelity + regularizer; }
};

inline EnergyValue energy(const Eigen::VectorXd& a, const Problem& p, const Penalty& pen,
                          double lambda) {
  if (a.size() != p.n()) throw config_error("energy operand has wrong length");
  if (!(lambda > 0.0)) throw config_error("lambda must be positive");
  EnergyValue e;
  e.fidelity = 0.5 * (p.stimulus - p.dictionary.atoms * a).squaredNorm();
  for (int i = 0; i < a.size(); ++i) e.regularizer += lambda * pen.g(a[i]);
  return e;
}

namespace detail {

/// Root of f(a) = a + lambda*g'(a) - u on (0, u), reached by Newton steps with
/// a bisection safeguard on a maintained sign-change bracket. The caller
/// guarantees f(0) < 0; f(u) = lambda*g'(u) >= 0 closes the bracket.
inline double solve_output_root(double u, const Penalty& pen, double lambda) {
  double lo = 0.0;
  double hi = u;
  double x = u - lambda * pen.g_prime(0.0);  // exact for a linear g', e.g. the l1 case
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = x + lambda * pen.g_prime(x) - u;
    if (f == 0.0) return x;
    (f < 0.0 ? lo : hi) = x;
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) return 0.5 * (lo + hi);
    const double slope = 1.0 + lambda * pen.g_second(x);
    double next = slope > 0.0 ? x - f / slope : lo;  // non-positive slope: fall back to bisection
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  throw numerical_error("output map root solve did not converge for u=" + std::to_string(u));
}

}  // namespace detail

/// Solves the implicit firing-rate map a = max(u - lambda*g'(a), 0) for one
/// average-current value. Zero whenever u <= lambda*g'(0); otherwise the
/// unique root of a + lambda*g'(a) = u inside (0, u).
inline double output_map(double u, const Penalty& pen, double lambda) {
  if (!(lambda > 0.0)) throw config_error("lambda must be positive");
  if (!std::isfinite(u)) throw numerical_error("output map received a non-finite current");
  if (u <= lambda * pen.g_prime(0.0)) return 0.0;
  return detail::solve_output_root(u, pen, lambda);
}

inline Eigen::VectorXd output_map(const Eigen::VectorXd& u, const Penalty& pen, double lambda) {
  Eigen::VectorXd a(u.size());
  for (int i = 0; i < u.size(); ++i) a[i] = output_map(u[i], pen, lambda);
  return a;
}

/// Integration controls. dt and horizon default to tau/100 and 100*tau when
/// left non-positive. stop_tol bounds |b - u - Omega a|_inf (tau times du/dt)
/// for early convergence; energy_tolerance is the largest per-step energy
/// increase tolerated before the run is declared unstable.
struct AuxConfig {
  double tau = 1.0;
  double dt = 0.0;
  double horizon = 0.0;
  double stop_tol = 1e-10;
  double energy_tolerance = 1e-9;
  long record_every = 0;  // 0: no trajectory samples; k: every k-th step plus the last
};

struct AuxSample {
  double t = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd a;
  double energy = 0.0;
};

struct AuxResult {
  Eigen::VectorXd u;             // final average currents
  Eigen::VectorXd a;             // final rates, output_map(u)
  std::vector<double> energies;  // total energy after every step, energies[0] at t=0
  std::vector<AuxSample> samples;
  long steps = 0;
  double t_end = 0.0;
  bool converged = false;
};

/// Forward-Euler integration of tau*du/dt = b - u - Omega*a with the implicit
/// output map applied every step, starting from u(0) = b. Throws
/// numerical_error when the energy rises by more than energy_tolerance in one
/// step (the step size is too large for stability) or a state goes non-finite.
inline AuxResult integrate(const Problem& p, const Penalty& pen, double lambda,
                           AuxConfig cfg = {}) {
  if (!(cfg.tau > 0.0)) throw config_error("tau must be positive");
  if (!(lambda > 0.0)) throw config_error("lambda must be positive");
  if (cfg.dt <= 0.0) cfg.dt = cfg.tau / 100.0;
  if (cfg.horizon <= 0.0) cfg.horizon = 100.0 * cfg.tau;
  if (cfg.dt > cfg.horizon) throw config_error("dt must not exceed the horizon");
  if (cfg.record_every < 0) throw config_error("record_every must be non-negative");

  const long total_steps = std::max<long>(1, std::lround(cfg.horizon / cfg.dt));
  AuxResult out;
  out.u = p.bias;
  out.a = output_map(out.u, pen, lambda);
  out.energies.reserve(static_cast<size_t>(total_steps) + 1);
  out.energies.push_back(energy(out.a, p, pen, lambda).total());
  if (cfg.record_every > 0) out.samples.push_back({0.0, out.u, out.a, out.energies.back()});

  const double rate = cfg.dt / cfg.tau;
  Eigen::VectorXd residual = p.bias - out.u - p.lateral * out.a;
  out.converged = residual.lpNorm<Eigen::Infinity>() < cfg.stop_tol;
  for (long k = 1; k <= total_steps && !out.converged; ++k) {
    out.u += rate * residual;
    if (!out.u.allFinite()) {
      throw numerical_error("auxiliary state diverged at step " + std::to_string(k));
    }
    out.a = output_map(out.u, pen, lambda);
    const double e = energy(out.a, p, pen, lambda).total();
    if (e > out.energies.back() + cfg.energy_tolerance) {
      throw numerical_error("energy increased by " + std::to_string(e - out.energies.back()) +
                            " at step " + std::to_string(k) + "; dt too large for stability");
    }
    out.energies.push_back(e);
    out.steps = k;
    out.t_end = static_cast<double>(k) * cfg.dt;
    residual = p.bias - out.u - p.lateral * out.a;
    out.converged = residual.lpNorm<Eigen::Infinity>() < cfg.stop_tol;
    if (cfg.record_every > 0 && (k % cfg.record_every == 0 || out.converged)) {
      out.samples.push_back({out.t_end, out.u, out.a, e});
    }
  }
  if (cfg.record_every > 0 && (out.samples.empty() || out.samples.back().t != out.t_end)) {
    out.samples.push_back({out.t_end, out.u, out.a, out.energies.back()});
  }
  return out;
}

}  // namespace assr
