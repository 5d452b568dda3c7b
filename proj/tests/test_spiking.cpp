#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "assr/oracle.hpp"
#include "assr/spiking.hpp"

using assr::Penalty;
using assr::SpikingConfig;

namespace {

// Two unit atoms at 60 degrees (coherence 0.5) with stimulus chosen so both
// bias entries equal exactly 1 — a fully symmetric pair.
assr::Problem symmetric_pair() {
  Eigen::MatrixXd atoms(2, 2);
  atoms << 1.0, 0.5, 0.0, std::sqrt(3.0) / 2.0;
  Eigen::VectorXd s(2);
  s << 1.0, 1.0 / std::sqrt(3.0);
  return assr::make_problem(assr::Dictionary{atoms}, s);
}

void check_refractory_gaps(const assr::SpikeRaster& raster, int n, double t_ref) {
  std::map<int, double> last;
  for (const auto& ev : raster.events) {
    REQUIRE(ev.neuron >= 0);
    REQUIRE(ev.neuron < n);
    const auto it = last.find(ev.neuron);
    if (it != last.end()) REQUIRE(ev.time - it->second >= t_ref - 1e-12);
    last[ev.neuron] = ev.time;
  }
}

}  // namespace

TEST_CASE("network initializes at rest with currents at the bias", "[spiking]") {
  const auto dict = assr::make_dictionary(3, 3, 81);
  Eigen::VectorXd code(3);
  code << 0.4792, 0.0, 0.9754;
  const auto p = assr::synthesize(dict, code);

  SpikingConfig cfg;
  const auto net = assr::init_network(p, Penalty::exponential(1.0), cfg);
  REQUIRE(net.neurons().size() == 3);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(net.neurons()[static_cast<size_t>(i)].potential == 0.0);
    REQUIRE(net.neurons()[static_cast<size_t>(i)].soma_current == p.bias[i]);
    REQUIRE(net.neurons()[static_cast<size_t>(i)].spike_count == 0);
    REQUIRE(net.neurons()[static_cast<size_t>(i)].rate == 0.0);
  }
  REQUIRE(net.average_currents() == p.bias);
  REQUIRE(net.time() == 0.0);

  // Defaults resolved from tau.
  REQUIRE(net.config().t_ref == cfg.tau / 10.0);
  REQUIRE(net.config().dt == cfg.tau / 100.0);
  REQUIRE(net.config().horizon == 100.0 * cfg.tau);

  // An inadmissible penalty/lambda pair is rejected at construction.
  SpikingConfig hot = cfg;
  hot.lambda = 2.0;  // rule 3 fails for the exponential penalty at gamma profile 1
  REQUIRE_THROWS_AS(assr::init_network(p, Penalty::exponential(1.0), hot), assr::config_error);
  REQUIRE_NOTHROW(assr::init_network(p, Penalty::l1(), hot));  // baseline is exempt

  SpikingConfig bad = cfg;
  bad.nu_spike = 2.0;
  REQUIRE_THROWS_AS(assr::init_network(p, Penalty::l1(), bad), assr::config_error);
  bad = cfg;
  bad.dt = bad.tau / 10.0;  // equal to t_ref, far above t_ref/10
  REQUIRE_THROWS_AS(assr::init_network(p, Penalty::l1(), bad), assr::config_error);
  bad = cfg;
  bad.tau = 0.0;
  REQUIRE_THROWS_AS(assr::init_network(p, Penalty::l1(), bad), assr::config_error);
  bad = cfg;
  bad.lambda = -0.1;
  REQUIRE_THROWS_AS(assr::init_network(p, Penalty::l1(), bad), assr::config_error);
}

TEST_CASE("non-positive bias never fires", "[spiking]") {
  Eigen::MatrixXd atoms = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd s(2);
  s << -0.5, 0.0;
  const auto p = assr::make_problem(assr::Dictionary{atoms}, s);

  SpikingConfig cfg;
  cfg.horizon = 50.0;
  const auto trace = assr::run(p, Penalty::l1(), cfg);
  REQUIRE(trace.raster.events.empty());
  REQUIRE(trace.final_rates.isZero(0.0));
  // Without spikes the currents hold exactly at the bias.
  REQUIRE(trace.mu_min == -0.5);
  REQUIRE(trace.mu_max == 0.0);
  REQUIRE(trace.u_min == -0.5);
  REQUIRE(trace.u_max == 0.0);
}

TEST_CASE("single neuron settles near the soft-threshold rate", "[spiking]") {
  Eigen::MatrixXd atoms(1, 1);
  atoms << 1.0;
  Eigen::VectorXd s(1);
  s << 1.0;
  const auto p = assr::make_problem(assr::Dictionary{atoms}, s);

  SpikingConfig cfg;
  cfg.lambda = 0.3;
  cfg.t_ref = 1e-3;
  cfg.dt = 1e-4;
  cfg.horizon = 300.0;
  const auto trace = assr::run(p, Penalty::l1(), cfg);
  REQUIRE(std::abs(trace.final_rates[0] - 0.7) < 0.01);
  // With no recurrence the soma current pins to the bias, so u = b exactly.
  REQUIRE(std::abs(trace.final_average_currents[0] - 1.0) < 1e-12);
  check_refractory_gaps(trace.raster, 1, cfg.t_ref);

  // Spiking is periodic: inter-spike intervals match to one step.
  const auto& ev = trace.raster.events;
  REQUIRE(ev.size() > 100);
  const double gap0 = ev[1].time - ev[0].time;
  for (size_t k = 2; k < ev.size(); ++k) {
    REQUIRE(std::abs((ev[k].time - ev[k - 1].time) - gap0) < cfg.dt + 1e-9);
  }
}

TEST_CASE("simultaneous threshold crossings reset both and exchange kicks", "[spiking]") {
  const auto p = symmetric_pair();
  SpikingConfig cfg;
  cfg.lambda = 0.12;
  auto net = assr::init_network(p, Penalty::l1(), cfg);

  std::vector<int> fired;
  long guard = 0;
  while (fired.empty() && guard++ < 100000) fired = net.step();
  REQUIRE(fired == std::vector<int>{0, 1});

  const double t_spike = net.time();
  for (int i = 0; i < 2; ++i) {
    const auto& nrn = net.neurons()[static_cast<size_t>(i)];
    REQUIRE(nrn.potential == 0.0);
    REQUIRE(nrn.spike_count == 1);
    REQUIRE(nrn.refractory_until == t_spike + cfg.tau / 10.0);
    // Pre-spike the current sits exactly at b = 1; the cross kick is
    // -Omega_ij/tau = -0.5.
    REQUIRE(std::abs(nrn.soma_current - 0.5) < 1e-12);
  }
  REQUIRE(net.raster().events.size() == 2);
  REQUIRE(net.raster().events[0].time == t_spike);
  REQUIRE(net.raster().events[1].time == t_spike);
}

TEST_CASE("rates converge toward the auxiliary fixed point", "[spiking]") {
  const auto p = symmetric_pair();
  // Hand-derived minimizer for the linear penalty: interior stationarity
  // G a = b - lambda*1 on the symmetric pair gives
  // a_i = (1 - 0.12)/(1 + 0.5) = 0.58666...
  const double star = (1.0 - 0.12) / 1.5;
  const Eigen::VectorXd target = (Eigen::VectorXd(2) << star, star).finished();

  SpikingConfig cfg;
  cfg.lambda = 0.12;
  cfg.t_ref = 0.005;
  cfg.dt = 0.0005;
  cfg.horizon = 200.0;
  const auto trace = assr::run(p, Penalty::l1(), cfg);
  REQUIRE((trace.final_rates - target).lpNorm<Eigen::Infinity>() < 0.02);

  // And the auxiliary integrator lands on the same point much more tightly.
  assr::AuxConfig aux;
  aux.horizon = 1000.0;
  const auto ar = assr::integrate(p, Penalty::l1(), 0.12, aux);
  REQUIRE(ar.converged);
  REQUIRE((ar.a - target).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("runs are deterministic with bounded currents and potentials", "[spiking]") {
  const auto dict = assr::make_dictionary(10, 20, 83);
  const auto code = assr::make_sparse_code(20, 0.1, 84);
  const auto p = assr::synthesize(dict, code);

  SpikingConfig cfg;
  cfg.horizon = 50.0;
  cfg.sample_every = 1.0;
  const auto t1 = assr::run(p, Penalty::exponential(1.0), cfg);
  const auto t2 = assr::run(p, Penalty::exponential(1.0), cfg);

  REQUIRE(t1.raster.events.size() == t2.raster.events.size());
  for (size_t k = 0; k < t1.raster.events.size(); ++k) {
    REQUIRE(t1.raster.events[k].neuron == t2.raster.events[k].neuron);
    REQUIRE(t1.raster.events[k].time == t2.raster.events[k].time);
  }
  REQUIRE(t1.final_rates == t2.final_rates);

  const auto [b_minus, b_plus] = assr::current_bounds(p, cfg);
  REQUIRE(t1.mu_min >= b_minus);
  REQUIRE(t1.mu_max <= b_plus);
  REQUIRE(t1.u_min >= b_minus);
  REQUIRE(t1.u_max <= b_plus);

  check_refractory_gaps(t1.raster, p.n(), cfg.tau / 10.0);

  REQUIRE(t1.times.size() == 51);  // t = 0, 1, ..., 50
  for (size_t k = 1; k < t1.times.size(); ++k) {
    REQUIRE(t1.times[k] > t1.times[k - 1]);
    REQUIRE(std::abs(t1.times[k] - static_cast<double>(k)) < 1e-9);
  }
  for (const auto& nu : t1.potentials) {
    REQUIRE((nu.array() >= 0.0).all());
    REQUIRE((nu.array() < 1.0).all());
  }
  REQUIRE(t1.nmses.size() == t1.times.size());  // truth present
  REQUIRE(t1.energies.size() == t1.times.size());

  // Truthless problems carry no nmse channel.
  const auto bare = assr::make_problem(dict, p.stimulus);
  const auto t3 = assr::run(bare, Penalty::exponential(1.0), cfg);
  REQUIRE(t3.nmses.empty());

  // Zero horizon: empty trace, zero rates.
  SpikingConfig zero = cfg;
  zero.horizon = 0.0;
  const auto t4 = assr::run(p, Penalty::exponential(1.0), zero);
  REQUIRE(t4.times.empty());
  REQUIRE(t4.raster.events.empty());
  REQUIRE(t4.final_rates.isZero(0.0));
}

TEST_CASE("current bounds follow the refractory envelope formula", "[spiking]") {
  SpikingConfig cfg;  // tau = 1, t_ref defaults to 0.1

  Eigen::MatrixXd single(1, 1);
  single << 1.0;
  Eigen::VectorXd s1(1);
  s1 << 0.7;
  const auto p1 = assr::make_problem(assr::Dictionary{single}, s1);
  const auto [lo1, hi1] = assr::current_bounds(p1, cfg);
  REQUIRE(lo1 == -0.7);
  REQUIRE(hi1 == 0.7);

  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd s2(3);
  s2 << 0.2, 0.5, 0.4;
  const auto p2 = assr::make_problem(assr::Dictionary{eye}, s2);
  const auto [lo2, hi2] = assr::current_bounds(p2, cfg);
  REQUIRE(lo2 == -0.5);
  REQUIRE(hi2 == 0.5);

  // Coherent pair: beta at tau=1, t_ref=0.1 frozen independently.
  const auto p3 = symmetric_pair();
  const auto [lo3, hi3] = assr::current_bounds(p3, cfg);
  const double beta = 10.508331944775049624;
  REQUIRE(std::abs(hi3 - (1.0 + 0.5 * beta)) < 1e-12);
  REQUIRE(lo3 == -hi3);

  // Very long refractory period: beta approaches 1/tau.
  SpikingConfig slow = cfg;
  slow.t_ref = 700.0;
  const auto [lo4, hi4] = assr::current_bounds(p3, slow);
  REQUIRE(std::abs(hi4 - 1.5) < 1e-12);
  REQUIRE(lo4 == -hi4);
}

TEST_CASE("firing rates are counts over time", "[spiking]") {
  assr::SpikeRaster raster;
  REQUIRE(assr::firing_rates(raster, 4.0, 2).isZero(0.0));

  raster.events = {{0, 1.0}, {0, 2.0}, {0, 3.0}};
  const auto r = assr::firing_rates(raster, 4.0, 2);
  REQUIRE(r[0] == 0.75);
  REQUIRE(r[1] == 0.0);

  // Events after t are excluded.
  REQUIRE(assr::firing_rates(raster, 2.0, 2)[0] == 1.0);

  // Periodic spiking at period p: rate at T = k*p is exactly 1/p.
  assr::SpikeRaster periodic;
  const double period = 0.8;
  for (int k = 1; k <= 1000; ++k) periodic.events.push_back({0, period * k});
  REQUIRE(std::abs(assr::firing_rates(periodic, 1000.0 * period, 1)[0] - 1.0 / period) < 1e-12);

  REQUIRE(assr::firing_rates(raster, 0.0, 2).isZero(0.0));
  REQUIRE_THROWS_AS(assr::firing_rates(raster, -1.0, 2), assr::config_error);
  REQUIRE_THROWS_AS(assr::firing_rates(raster, 4.0, 0), assr::config_error);
  raster.events.push_back({7, 1.0});
  REQUIRE_THROWS_AS(assr::firing_rates(raster, 4.0, 2), assr::config_error);
}

TEST_CASE("adaptive leak never grows with the rate", "[spiking]") {
  Eigen::VectorXd low(3), high(3);
  low << 0.0, 0.1, 0.5;
  high << 0.1, 0.3, 2.0;
  for (const auto& pen : {Penalty::exponential(1.0), Penalty::logarithmic(1.0),
                          Penalty::arctangent(1.0)}) {
    const auto leak_low = assr::adaptive_leak(pen, 0.1, low);
    const auto leak_high = assr::adaptive_leak(pen, 0.1, high);
    for (int i = 0; i < 3; ++i) {
      REQUIRE(leak_high[i] <= leak_low[i]);
      REQUIRE(leak_low[i] <= 0.1 * pen.g_prime(0.0) + 1e-15);
    }
  }
  // The baseline leak is flat.
  const auto flat = assr::adaptive_leak(Penalty::l1(), 0.2, low);
  for (int i = 0; i < 3; ++i) REQUIRE(flat[i] == 0.2);
}
