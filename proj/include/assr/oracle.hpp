#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "assr/auxiliary.hpp"
#include "assr/errors.hpp"
#include "assr/penalty.hpp"
#include "assr/problem.hpp"

namespace assr {

/// Endpoint of an iterative descent run. `energies` holds the objective after
/// every iterate, starting with the all-zero initializer, so descent can be
/// audited step by step.
struct SolverResult {
  Eigen::VectorXd a;
  long iterations = 0;
  EnergyValue final_energy;
  double kkt = 0.0;
  bool converged = false;
  std::vector<double> energies;
};

/// Observer invoked after every iterate with (iteration, current a).
using IterateCallback = std::function<void(long, const Eigen::VectorXd&)>;

/// First-order optimality residual over the non-negative orthant, with
/// r = G a - b on the full Gram matrix (diagonal included). Active
/// coordinates must be stationary; inactive ones only need r_i + lambda g'(0)
/// to be non-negative.
inline double kkt_residual(const Eigen::VectorXd& a, const Problem& p, const Penalty& pen,
                           double lambda) {
  if (a.size() != p.n()) throw config_error("kkt residual operand has wrong length");
  if ((a.array() < 0.0).any()) throw config_error("kkt residual requires a non-negative code");
  if (!(lambda > 0.0)) throw config_error("lambda must be positive");
  const Eigen::VectorXd r = p.gram * a - p.bias;
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double v = a[i] > 0.0 ? std::abs(r[i] + lambda * pen.g_prime(a[i]))
                                : std::max(0.0, -r[i] - lambda * pen.g_prime(0.0));
    worst = std::max(worst, v);
  }
  return worst;
}

namespace detail {

/// Largest Gram eigenvalue from 100 power-iteration steps with a
/// deterministic all-ones start (Rayleigh quotient estimate).
inline double largest_gram_eigenvalue(const Eigen::MatrixXd& gram) {
  const int n = static_cast<int>(gram.cols());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double estimate = 0.0;
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) {  // start vector happened to be in the null space
      v.setZero();
      v[it % n] = 1.0;
      continue;
    }
    estimate = v.dot(w);
    v = w / norm;
  }
  if (!(estimate > 0.0) || !std::isfinite(estimate)) {
    throw numerical_error("power iteration failed to produce a positive eigenvalue estimate");
  }
  return estimate;
}

template <class CoordinateProx>
SolverResult proximal_descent(const Problem& p, const Penalty& pen, double lambda, double step,
                              long max_iters, double tol, const CoordinateProx& prox,
                              const IterateCallback& on_iterate) {
  if (!(lambda > 0.0)) throw config_error("lambda must be positive");
  if (max_iters < 1) throw config_error("max_iters must be >= 1");
  if (!(tol > 0.0)) throw config_error("tol must be positive");
  if (step <= 0.0) step = 0.9 / largest_gram_eigenvalue(p.gram);
  if (!std::isfinite(step)) throw config_error("step size must be finite");

  SolverResult out;
  out.a = Eigen::VectorXd::Zero(p.n());
  out.energies.push_back(energy(out.a, p, pen, lambda).total());
  Eigen::VectorXd next(p.n());
  for (long iter = 1; iter <= max_iters; ++iter) {
    const Eigen::VectorXd z = out.a - step * (p.gram * out.a - p.bias);
    for (int i = 0; i < p.n(); ++i) next[i] = prox(z[i], step);
    const double delta = (next - out.a).lpNorm<Eigen::Infinity>();
    out.a = next;
    out.iterations = iter;
    out.energies.push_back(energy(out.a, p, pen, lambda).total());
    if (on_iterate) on_iterate(iter, out.a);
    if (delta < tol) {
      out.converged = true;
      break;
    }
  }
  out.final_energy = energy(out.a, p, pen, lambda);
  out.kkt = kkt_residual(out.a, p, pen, lambda);
  return out;
}

/// argmin_{x>=0} 0.5 (x - z)^2 + slam * g(x): compares the boundary candidate
/// x = 0 against the interior stationary point from the shared root solver.
inline double prox_coordinate(double z, const Penalty& pen, double slam) {
  if (z <= 0.0) return 0.0;  // both terms are non-decreasing on x >= 0
  if (z <= slam * pen.g_prime(0.0)) return 0.0;
  const double interior = solve_output_root(z, pen, slam);
  const double at_zero = 0.5 * z * z + slam * pen.g(0.0);
  const double at_interior = 0.5 * (interior - z) * (interior - z) + slam * pen.g(interior);
  return at_interior <= at_zero ? interior : 0.0;
}

}  // namespace detail

/// Default gradient step 0.9 / L with L the largest Gram eigenvalue.
inline double gradient_step(const Problem& p) {
  return 0.9 / detail::largest_gram_eigenvalue(p.gram);
}

/// Projected ISTA for the non-negative l1 problem: a <- max(a - step*(Ga - b)
/// - step*lambda, 0), stopping when |delta a|_inf < tol. Pass step_size <= 0
/// to use the default 0.9 / L.
inline SolverResult ista_l1(const Problem& p, double lambda, double step_size = 0.0,
                            long max_iters = 10000, double tol = 1e-10,
                            const IterateCallback& on_iterate = {}) {
  const auto pen = Penalty::l1();
  return detail::proximal_descent(
      p, pen, lambda, step_size, max_iters, tol,
      [lambda](double z, double step) { return std::max(z - step * lambda, 0.0); }, on_iterate);
}

/// Proximal gradient descent for a general admissible penalty; each
/// coordinate solves its scalar prox with an explicit 0-vs-interior
/// comparison rather than trusting Newton alone.
inline SolverResult prox_grad_nonconvex(const Problem& p, const Penalty& pen, double lambda,
                                        double step_size = 0.0, long max_iters = 10000,
                                        double tol = 1e-10,
                                        const IterateCallback& on_iterate = {}) {
  return detail::proximal_descent(
      p, pen, lambda, step_size, max_iters, tol,
      [&pen, lambda](double z, double step) {
        return detail::prox_coordinate(z, pen, step * lambda);
      },
      on_iterate);
}

}  // namespace assr
