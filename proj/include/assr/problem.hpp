#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "assr/errors.hpp"

namespace assr {

/// Serialized NMSE values are floored here instead of -inf so CSV stays numeric.
inline constexpr double kNmseFloorDb = -300.0;

/// Overcomplete (or square) dictionary with unit-norm columns.
struct Dictionary {
  Eigen::MatrixXd atoms;  // m x n, one atom per column

  int m() const { return static_cast<int>(atoms.rows()); }
  int n() const { return static_cast<int>(atoms.cols()); }
};

struct NoiseSpec {
  double snr_db = 20.0;
  std::uint64_t seed = 0;
};

/// One sparse-recovery instance: stimulus plus the precomputed quantities the
/// dynamical systems consume. `lateral` is the Gram matrix with its diagonal
/// zeroed, i.e. the coupling between distinct atoms only.
struct Problem {
  Dictionary dictionary;
  Eigen::VectorXd stimulus;  // length m
  Eigen::VectorXd bias;      // atoms^T * stimulus
  Eigen::MatrixXd gram;      // atoms^T * atoms
  Eigen::MatrixXd lateral;   // gram with zero diagonal
  std::optional<Eigen::VectorXd> truth;  // non-negative code used to build the stimulus

  int m() const { return dictionary.m(); }
  int n() const { return dictionary.n(); }
};

namespace detail {

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace detail

/// I.i.d. standard Gaussian entries, then each column scaled to unit norm.
inline Dictionary make_dictionary(int m, int n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw config_error("dictionary dimensions must be >= 1");
  if (m > n) throw config_error("dictionary must be square or overcomplete (m <= n)");
  auto rng = detail::make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd atoms(m, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) atoms(i, j) = gauss(rng);
    const double norm = atoms.col(j).norm();
    if (norm == 0.0) throw numerical_error("degenerate zero-norm dictionary column");
    atoms.col(j) /= norm;
  }
  return Dictionary{std::move(atoms)};
}

/// Non-negative code with exactly round(sparsity * n) nonzero entries at
/// uniformly chosen positions, amplitudes uniform on (0, 1). When
/// `override_values` is given it is validated and returned as-is (the pinned
/// demo code path), ignoring sparsity and seed.
inline Eigen::VectorXd make_sparse_code(int n, double sparsity, std::uint64_t seed,
                                        const std::optional<Eigen::VectorXd>& override_values = {}) {
  if (n < 1) throw config_error("code length must be >= 1");
  if (override_values) {
    if (override_values->size() != n) throw config_error("override code has wrong length");
    if ((override_values->array() < 0.0).any()) throw config_error("override code must be non-negative");
    return *override_values;
  }
  if (!(sparsity > 0.0) || sparsity > 1.0) throw config_error("sparsity must lie in (0, 1]");
  const long k = std::lround(sparsity * n);
  if (k < 1) throw config_error("sparsity * n rounds to zero nonzero entries");

  auto rng = detail::make_rng(seed);
  std::vector<int> index(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) index[static_cast<size_t>(i)] = i;
  // Partial Fisher-Yates: the first k slots become the support.
  for (long i = 0; i < k; ++i) {
    std::uniform_int_distribution<long> pick(i, n - 1);
    std::swap(index[static_cast<size_t>(i)], index[static_cast<size_t>(pick(rng))]);
  }
  std::vector<int> support(index.begin(), index.begin() + k);
  std::sort(support.begin(), support.end());

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd code = Eigen::VectorXd::Zero(n);
  for (int pos : support) {
    double v = unif(rng);
    while (v == 0.0) v = unif(rng);
    code[pos] = v;
  }
  return code;
}

/// Assembles a Problem around an existing stimulus, precomputing bias, Gram,
/// and lateral coupling.
inline Problem make_problem(Dictionary dict, Eigen::VectorXd stimulus,
                            std::optional<Eigen::VectorXd> truth = {}) {
  if (stimulus.size() != dict.m()) throw config_error("stimulus length must equal dictionary row count");
  if (truth) {
    if (truth->size() != dict.n()) throw config_error("truth length must equal dictionary column count");
    if ((truth->array() < 0.0).any()) throw config_error("truth must be non-negative");
  }
  Problem p;
  p.bias = dict.atoms.transpose() * stimulus;
  p.gram = dict.atoms.transpose() * dict.atoms;
  p.lateral = p.gram;
  p.lateral.diagonal().setZero();
  p.dictionary = std::move(dict);
  p.stimulus = std::move(stimulus);
  p.truth = std::move(truth);
  return p;
}

/// Stimulus = dictionary * code, optionally corrupted by white Gaussian noise
/// scaled so that 10*log10(|signal|^2 / |noise|^2) equals snr_db exactly.
inline Problem synthesize(const Dictionary& dict, const Eigen::VectorXd& code,
                          const std::optional<NoiseSpec>& noise = {}) {
  if (code.size() != dict.n()) throw config_error("code length must equal dictionary column count");
  if ((code.array() < 0.0).any()) throw config_error("code must be non-negative");
  Eigen::VectorXd stimulus = dict.atoms * code;
  if (noise) {
    if (!std::isfinite(noise->snr_db)) throw config_error("snr_db must be finite");
    const double signal_power = stimulus.squaredNorm();
    if (signal_power == 0.0) {
      throw config_error("cannot scale noise against a zero signal (code is all zero)");
    }
    auto rng = detail::make_rng(noise->seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd w(stimulus.size());
    for (int i = 0; i < w.size(); ++i) w[i] = gauss(rng);
    const double wn = w.squaredNorm();
    if (wn == 0.0) throw numerical_error("degenerate zero noise draw");
    const double target = signal_power / std::pow(10.0, noise->snr_db / 10.0);
    stimulus += w * std::sqrt(target / wn);
  }
  return make_problem(dict, std::move(stimulus), code);
}

/// 10*log10(|truth - estimate|^2 / |truth|^2), floored at kNmseFloorDb.
inline double nmse_db(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
  if (estimate.size() != truth.size()) throw config_error("nmse operands must have equal length");
  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw config_error("nmse undefined for all-zero truth");
  const double num = (truth - estimate).squaredNorm();
  if (num == 0.0) return kNmseFloorDb;
  return std::max(10.0 * std::log10(num / denom), kNmseFloorDb);
}

/// Strict-threshold recovery test, default threshold -15 dB.
inline bool success(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth,
                    double threshold_db = -15.0) {
  return nmse_db(estimate, truth) < threshold_db;
}

// ---- JSON serialization (row-major, explicit dimensions) ----

inline nlohmann::json problem_to_json(const Problem& p) {
  nlohmann::json j;
  j["m"] = p.m();
  j["n"] = p.n();
  std::vector<double> atoms;
  atoms.reserve(static_cast<size_t>(p.m()) * static_cast<size_t>(p.n()));
  for (int i = 0; i < p.m(); ++i) {
    for (int c = 0; c < p.n(); ++c) atoms.push_back(p.dictionary.atoms(i, c));
  }
  j["atoms"] = std::move(atoms);
  j["stimulus"] = std::vector<double>(p.stimulus.data(), p.stimulus.data() + p.stimulus.size());
  if (p.truth) {
    j["truth"] = std::vector<double>(p.truth->data(), p.truth->data() + p.truth->size());
  } else {
    j["truth"] = nullptr;
  }
  return j;
}

inline Problem problem_from_json(const nlohmann::json& j) {
  const int m = j.at("m").get<int>();
  const int n = j.at("n").get<int>();
  if (m < 1 || n < 1) throw config_error("problem JSON has invalid dimensions");
  const auto atoms_flat = j.at("atoms").get<std::vector<double>>();
  if (atoms_flat.size() != static_cast<size_t>(m) * static_cast<size_t>(n)) {
    throw config_error("problem JSON atom count does not match dimensions");
  }
  Eigen::MatrixXd atoms(m, n);
  for (int i = 0; i < m; ++i) {
    for (int c = 0; c < n; ++c) atoms(i, c) = atoms_flat[static_cast<size_t>(i) * n + c];
  }
  const auto stim = j.at("stimulus").get<std::vector<double>>();
  if (stim.size() != static_cast<size_t>(m)) throw config_error("problem JSON stimulus length mismatch");
  Eigen::VectorXd stimulus = Eigen::Map<const Eigen::VectorXd>(stim.data(), m);
  std::optional<Eigen::VectorXd> truth;
  if (!j.at("truth").is_null()) {
    const auto tv = j.at("truth").get<std::vector<double>>();
    if (tv.size() != static_cast<size_t>(n)) throw config_error("problem JSON truth length mismatch");
    truth = Eigen::Map<const Eigen::VectorXd>(tv.data(), n);
  }
  return make_problem(Dictionary{std::move(atoms)}, std::move(stimulus), std::move(truth));
}

}  // namespace assr
