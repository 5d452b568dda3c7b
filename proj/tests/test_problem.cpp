#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "assr/problem.hpp"

using assr::Dictionary;
using assr::NoiseSpec;
using assr::Problem;

namespace {

// Plain-loop column norm, independent of Eigen's reductions.
double column_norm(const Eigen::MatrixXd& a, int j) {
  double acc = 0.0;
  for (int i = 0; i < a.rows(); ++i) acc += a(i, j) * a(i, j);
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("dictionary columns are unit norm and deterministic", "[problem]") {
  const auto dict = assr::make_dictionary(100, 200, 7);
  REQUIRE(dict.m() == 100);
  REQUIRE(dict.n() == 200);
  for (int j = 0; j < dict.n(); ++j) {
    REQUIRE(std::abs(column_norm(dict.atoms, j) - 1.0) < 1e-12);
  }

  const auto again = assr::make_dictionary(100, 200, 7);
  REQUIRE(dict.atoms == again.atoms);  // bit-identical for equal seeds

  const auto other = assr::make_dictionary(100, 200, 8);
  REQUIRE(dict.atoms != other.atoms);

  const auto tiny = assr::make_dictionary(1, 1, 3);
  REQUIRE(std::abs(std::abs(tiny.atoms(0, 0)) - 1.0) < 1e-15);

  REQUIRE_THROWS_AS(assr::make_dictionary(10, 5, 0), assr::config_error);
  REQUIRE_THROWS_AS(assr::make_dictionary(0, 5, 0), assr::config_error);
}

TEST_CASE("sparse code has the rounded nonzero count with open-interval amplitudes", "[problem]") {
  const auto code = assr::make_sparse_code(200, 0.15, 11);
  REQUIRE(code.size() == 200);
  int nonzeros = 0;
  for (int i = 0; i < code.size(); ++i) {
    if (code[i] != 0.0) {
      ++nonzeros;
      REQUIRE(code[i] > 0.0);
      REQUIRE(code[i] < 1.0);
    }
  }
  REQUIRE(nonzeros == 30);

  const auto again = assr::make_sparse_code(200, 0.15, 11);
  REQUIRE(code == again);

  // Rounding, not flooring: 0.1 * 15 = 1.5 rounds to 2.
  const auto r = assr::make_sparse_code(15, 0.1, 4);
  REQUIRE((r.array() != 0.0).count() == 2);

  // Support positions vary with the seed.
  std::set<std::set<int>> supports;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto c = assr::make_sparse_code(40, 0.1, s);
    std::set<int> sup;
    for (int i = 0; i < c.size(); ++i)
      if (c[i] != 0.0) sup.insert(i);
    REQUIRE(sup.size() == 4);
    supports.insert(sup);
  }
  REQUIRE(supports.size() > 10);

  REQUIRE_THROWS_AS(assr::make_sparse_code(10, 0.0, 0), assr::config_error);
  REQUIRE_THROWS_AS(assr::make_sparse_code(10, 1.1, 0), assr::config_error);
  REQUIRE_THROWS_AS(assr::make_sparse_code(10, -0.2, 0), assr::config_error);
  REQUIRE_THROWS_AS(assr::make_sparse_code(10, 0.01, 0), assr::config_error);  // rounds to 0 nonzeros
}

TEST_CASE("explicit code override bypasses sampling", "[problem]") {
  Eigen::VectorXd pinned(3);
  pinned << 0.4792, 0.0, 0.9754;
  const auto code = assr::make_sparse_code(3, 1.0 / 3.0, 99, pinned);
  REQUIRE(code == pinned);

  Eigen::VectorXd wrong_len(2);
  wrong_len << 0.1, 0.2;
  REQUIRE_THROWS_AS(assr::make_sparse_code(3, 0.5, 0, wrong_len), assr::config_error);

  Eigen::VectorXd negative(3);
  negative << 0.1, -0.2, 0.3;
  REQUIRE_THROWS_AS(assr::make_sparse_code(3, 0.5, 0, negative), assr::config_error);
}

TEST_CASE("synthesis hits the requested snr exactly and precomputes couplings", "[problem]") {
  const auto dict = assr::make_dictionary(50, 100, 21);
  const auto code = assr::make_sparse_code(100, 0.1, 22);

  const auto clean = assr::synthesize(dict, code);
  REQUIRE(clean.stimulus.isApprox(dict.atoms * code, 1e-15));
  REQUIRE(clean.truth.has_value());
  REQUIRE(*clean.truth == code);

  const auto noisy = assr::synthesize(dict, code, NoiseSpec{20.0, 5});
  const Eigen::VectorXd signal = dict.atoms * code;
  const Eigen::VectorXd w = noisy.stimulus - signal;
  const double snr = 10.0 * std::log10(signal.squaredNorm() / w.squaredNorm());
  REQUIRE(std::abs(snr - 20.0) < 1e-10);

  // Same noise seed reproduces the stimulus bit for bit; a new seed does not.
  const auto noisy2 = assr::synthesize(dict, code, NoiseSpec{20.0, 5});
  REQUIRE(noisy.stimulus == noisy2.stimulus);
  const auto noisy3 = assr::synthesize(dict, code, NoiseSpec{20.0, 6});
  REQUIRE(noisy.stimulus != noisy3.stimulus);

  // Precomputed quantities.
  REQUIRE(noisy.bias.isApprox(dict.atoms.transpose() * noisy.stimulus, 1e-14));
  REQUIRE(noisy.gram.isApprox(noisy.gram.transpose(), 1e-14));
  for (int i = 0; i < noisy.n(); ++i) {
    REQUIRE(std::abs(noisy.gram(i, i) - 1.0) < 1e-12);  // unit-norm atoms
    REQUIRE(noisy.lateral(i, i) == 0.0);
  }
  REQUIRE((noisy.gram - noisy.lateral)
              .isApprox(Eigen::MatrixXd(noisy.gram.diagonal().asDiagonal()), 1e-14));

  // A zero code is fine noiselessly (rest-state problem) but cannot anchor an SNR.
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(100);
  const auto rest = assr::synthesize(dict, zero);
  REQUIRE(rest.stimulus.norm() == 0.0);
  REQUIRE_THROWS_AS(assr::synthesize(dict, zero, NoiseSpec{20.0, 1}), assr::config_error);

  Eigen::VectorXd bad(99);
  bad.setZero();
  REQUIRE_THROWS_AS(assr::synthesize(dict, bad), assr::config_error);
  Eigen::VectorXd neg = code;
  neg[0] = -0.5;
  REQUIRE_THROWS_AS(assr::synthesize(dict, neg), assr::config_error);
  REQUIRE_THROWS_AS(
      assr::synthesize(dict, code, NoiseSpec{std::numeric_limits<double>::infinity(), 1}),
      assr::config_error);
}

TEST_CASE("nmse matches a hand scaling argument and floors at -300 dB", "[problem]") {
  Eigen::VectorXd truth(4);
  truth << 0.5, 0.0, 1.25, 0.75;

  // estimate = c * truth gives |t - e|^2 / |t|^2 = (c - 1)^2 independent of t.
  for (double c : {0.5, 0.9, 1.5, 2.0}) {
    const double expected = 10.0 * std::log10((c - 1.0) * (c - 1.0));
    REQUIRE(std::abs(assr::nmse_db(c * truth, truth) - expected) < 1e-12);
  }

  REQUIRE(assr::nmse_db(truth, truth) == assr::kNmseFloorDb);
  Eigen::VectorXd nearly = truth;
  nearly[0] += 1e-200;  // tiny but nonzero error underflows the ratio past the floor
  REQUIRE(assr::nmse_db(nearly, truth) == assr::kNmseFloorDb);

  Eigen::VectorXd zeros = Eigen::VectorXd::Zero(4);
  REQUIRE(std::abs(assr::nmse_db(zeros, truth)) < 1e-12);  // zero estimate: ratio 1 -> 0 dB
  REQUIRE_THROWS_AS(assr::nmse_db(truth, zeros), assr::config_error);
  Eigen::VectorXd shorter(3);
  shorter.setZero();
  REQUIRE_THROWS_AS(assr::nmse_db(shorter, truth), assr::config_error);

  // Success threshold is strict.
  const double c15 = 1.0 - std::pow(10.0, -15.0 / 20.0);  // lands exactly on -15 dB
  REQUIRE(std::abs(assr::nmse_db(c15 * truth, truth) + 15.0) < 1e-9);
  REQUIRE_FALSE(assr::success(c15 * truth, truth));
  REQUIRE(assr::success((c15 + 1e-4) * truth, truth));
  REQUIRE_FALSE(assr::success((c15 - 1e-4) * truth, truth));
}

TEST_CASE("problem json round trip is exact", "[problem]") {
  const auto dict = assr::make_dictionary(6, 9, 31);
  const auto code = assr::make_sparse_code(9, 0.25, 32);
  const auto p = assr::synthesize(dict, code, NoiseSpec{12.0, 33});

  const auto j = assr::problem_to_json(p);
  const auto q = assr::problem_from_json(j);
  REQUIRE(q.dictionary.atoms == p.dictionary.atoms);
  REQUIRE(q.stimulus == p.stimulus);
  REQUIRE(q.bias == p.bias);
  REQUIRE(q.gram == p.gram);
  REQUIRE(q.truth.has_value());
  REQUIRE(*q.truth == *p.truth);

  // Truthless problems round-trip with an explicit null.
  const auto bare = assr::make_problem(dict, p.stimulus);
  const auto jb = assr::problem_to_json(bare);
  REQUIRE(jb.at("truth").is_null());
  REQUIRE_FALSE(assr::problem_from_json(jb).truth.has_value());

  // Serialized text itself is stable across round trips.
  REQUIRE(assr::problem_to_json(q).dump() == j.dump());

  auto tampered = j;
  tampered["n"] = 10;
  REQUIRE_THROWS_AS(assr::problem_from_json(tampered), assr::config_error);
  auto missing = j;
  missing.erase("stimulus");
  REQUIRE_THROWS(assr::problem_from_json(missing));
}
