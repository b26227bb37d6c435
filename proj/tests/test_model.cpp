// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "uavrelay/model.hpp"

using namespace uavrelay;
using uavrelay::testutil::default_scenario;
using uavrelay::testutil::hover_state;

TEST_CASE("channel gain a2a: direct evaluation and monotone decay") {
  Scenario cfg = default_scenario();
  cfg.alt_mbs_m = 200.0;
  cfg.alt_relay_m = 100.0;
  cfg.pathloss_exp = 2.0;
  cfg.antenna_const = 1.0;
  cfg.ref_gain_a2a = std::pow(10.0, -3.5);

  const Vec2 origin(0.0, 0.0);
  CHECK(channel_gain_a2a(cfg, origin, origin) ==
        doctest::Approx(std::pow(10.0, -3.5) / 1e4).epsilon(1e-12));

  CHECK(channel_gain_a2a(cfg, origin, Vec2(0.0, 0.0)) >
        channel_gain_a2a(cfg, origin, Vec2(100.0, 0.0)));

  // kappa = 2: doubling the 3-D distance divides the gain by 4.
  const double g1 = channel_gain_a2a(cfg, origin, Vec2(0.0, 0.0));        // dist 100
  cfg.alt_mbs_m = 300.0;                                                  // dist 200
  const double g2 = channel_gain_a2a(cfg, origin, Vec2(0.0, 0.0));
  CHECK(g1 / g2 == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("channel gain a2g: overhead value, rotation symmetry, altitude ratio") {
  Scenario cfg = default_scenario();
  cfg.alt_relay_m = 100.0;
  cfg.pathloss_exp = 2.0;
  cfg.ref_gain_a2g = 1e-5;

  CHECK(channel_gain_a2g(cfg, Vec2(7.0, -3.0), Vec2(7.0, -3.0)) ==
        doctest::Approx(1e-9).epsilon(1e-12));

  // Depends only on the horizontal distance.
  const Vec2 user(10.0, 20.0);
  const double r = 55.0;
  const double ga = channel_gain_a2g(cfg, user + Vec2(r, 0.0), user);
  const double gb = channel_gain_a2g(cfg, user + Vec2(0.0, r), user);
  const double gc = channel_gain_a2g(cfg, user + Vec2(r / std::sqrt(2.0), r / std::sqrt(2.0)), user);
  CHECK(ga == doctest::Approx(gb).epsilon(1e-12));
  CHECK(ga == doctest::Approx(gc).epsilon(1e-12));

  Scenario high = cfg;
  high.alt_relay_m = 200.0;
  CHECK(channel_gain_a2g(cfg, user, user) / channel_gain_a2g(high, user, user) ==
        doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("antenna gain: boresight, direct value, unimodal in r") {
  CHECK(antenna_gain(2.0, 1.0) == doctest::Approx(6.0));
  CHECK(antenna_gain(1.0, 0.5) == doctest::Approx(2.0));
  CHECK_THROWS_AS(antenna_gain(2.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(antenna_gain(2.0, -0.2), std::invalid_argument);
  CHECK_THROWS_AS(antenna_gain(0.5, 0.9), std::invalid_argument);

  // Interior maximum at (r+1) ln(cos) + 1 = 0.
  const double c = 0.8;
  const double r_star = -1.0 - 1.0 / std::log(c);
  const double g_star = antenna_gain(r_star, c);
  for (double dr : {0.05, 0.2, 0.5}) {
    CHECK(antenna_gain(r_star - dr, c) < g_star);
    CHECK(antenna_gain(r_star + dr, c) < g_star);
  }
  CHECK(antenna_gain(r_star - 0.5, c) < antenna_gain(r_star - 0.2, c));
  CHECK(antenna_gain(r_star + 0.2, c) > antenna_gain(r_star + 0.5, c));

  // Boresight dominance: increasing in r at theta = 0; decreasing once
  // cos(theta) < exp(-1/(r+1)).
  CHECK(antenna_gain(3.0, 1.0) > antenna_gain(2.0, 1.0));
  const double r = 2.0;
  const double c_low = std::exp(-1.0 / (r + 1.0)) - 0.05;
  CHECK(antenna_gain(r + 0.1, c_low) < antenna_gain(r, c_low));
}

TEST_CASE("hop rates: frozen direct evaluations") {
  Scenario cfg = default_scenario();
  cfg.alt_mbs_m = 200.0;
  cfg.alt_relay_m = 100.0;
  cfg.pathloss_exp = 2.0;
  cfg.antenna_const = 1.0;
  cfg.ref_gain_a2a = std::pow(10.0, -3.5);
  cfg.ref_gain_a2g = 1e-5;
  cfg.noise_w = 1e-13;

  const Vec2 origin(0.0, 0.0);

  // Independent high-precision evaluation of the hop-1 value.
  const long double snr1 = 0.004L * 2.0L * std::pow(10.0L, -3.5L) * 3.0L * 1e4L / (1e-13L * 1e8L);
  const double expected1 = static_cast<double>(std::log2(1.0L + snr1));
  CHECK(rate_hop1(cfg, 0.004, origin, origin, 2.0) == doctest::Approx(expected1).epsilon(1e-12));
  CHECK(expected1 == doctest::Approx(12.89).epsilon(1e-3));

  CHECK(rate_hop2(cfg, 0.004, origin, origin, 2.0) ==
        doctest::Approx(std::log2(241.0)).epsilon(1e-12));
  CHECK(std::log2(241.0) == doctest::Approx(7.91).epsilon(1e-3));

  CHECK(rate_hop1(cfg, 0.0, origin, Vec2(50.0, 0.0), 2.0) == 0.0);
  CHECK(rate_hop2(cfg, 0.0, origin, Vec2(50.0, 0.0), 2.0) == 0.0);

  // Strictly decreasing in horizontal separation; increasing in power.
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double p = rng.uniform(1e-4, 4e-3);
    const double r = rng.uniform(1.0, 6.0);
    const double d = rng.uniform(0.0, 500.0);
    CHECK(rate_hop1(cfg, p, origin, Vec2(d, 0.0), r) >
          rate_hop1(cfg, p, origin, Vec2(d + 10.0, 0.0), r));
    CHECK(rate_hop2(cfg, p, Vec2(d, 0.0), origin, r) >
          rate_hop2(cfg, p, Vec2(d + 10.0, 0.0), origin, r));
    CHECK(rate_hop1(cfg, p * 1.5, origin, Vec2(d, 0.0), r) >
          rate_hop1(cfg, p, origin, Vec2(d, 0.0), r));
  }

  // Overhead, larger r is strictly better ((r+1) factor at cos = 1).
  CHECK(rate_hop2(cfg, 0.004, origin, origin, 3.0) > rate_hop2(cfg, 0.004, origin, origin, 2.0));
}

TEST_CASE("propulsion power: hover value, frozen evaluation, convexity") {
  PropulsionParams p;  // P_0=79.86, U_tip=120, d_0=0.6, rho=1.225, s=0.05, B=0.503
  CHECK(propulsion_power(p, 0.0) == doctest::Approx(79.86).epsilon(1e-15));

  const double expected = 79.86 * (1.0 + 300.0 / 14400.0) +
                          0.5 * 0.6 * 1.225 * 0.05 * 0.503 * 1000.0;
  CHECK(propulsion_power(p, 10.0) == doctest::Approx(expected).epsilon(1e-15));

  CHECK_THROWS_AS(propulsion_power(p, -1.0), std::invalid_argument);

  // Strictly increasing and convex: random midpoint tests.
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.uniform(0.0, 60.0);
    const double b = rng.uniform(0.0, 60.0);
    if (std::abs(a - b) < 1e-9) continue;
    const double mid = propulsion_power(p, 0.5 * (a + b));
    CHECK(mid < 0.5 * (propulsion_power(p, a) + propulsion_power(p, b)) + 1e-12);
    CHECK(propulsion_power(p, std::max(a, b)) > propulsion_power(p, std::min(a, b)));
  }
}

TEST_CASE("user rates: zero schedule, constant service, brute-force cross-check") {
  Scenario cfg = default_scenario(2, 1, 3);
  cfg.delay_slots = 0;
  NetworkState s = hover_state(cfg);
  CHECK(user_rates(cfg, s).maxCoeff() == 0.0);

  // Single user served every slot at a constant rate: Rbar = rate.
  s.power_relay.setConstant(2e-3);
  s.sched_hop2[0].row(0).setOnes();
  const double rho = rate_hop2(cfg, 2e-3, s.traj_relay[0].col(0), cfg.user_pos.col(0), 2.0);
  Eigen::VectorXd rates = user_rates(cfg, s);
  CHECK(rates[0] == doctest::Approx(rho).epsilon(1e-12));
  CHECK(rates[1] == 0.0);

  // Hand-built 3-slot schedule, slot-by-slot accumulation as oracle.
  s.sched_hop2[0].setZero();
  s.sched_hop2[0](0, 0) = 1.0;
  s.sched_hop2[0](1, 1) = 0.5;
  s.sched_hop2[0](0, 2) = 0.25;
  s.power_relay << 1e-3, 2e-3, 3e-3;
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(2);
  for (int n = 0; n < 3; ++n)
    for (int k = 0; k < 2; ++k)
      expect[k] += s.sched_hop2[0](k, n) *
                   rate_hop2(cfg, s.power_relay(0, n), s.traj_relay[0].col(n),
                             cfg.user_pos.col(k), s.beam_relay(0, n));
  expect /= 3.0;
  rates = user_rates(cfg, s);
  CHECK(rates[0] == doctest::Approx(expect[0]).epsilon(1e-12));
  CHECK(rates[1] == doctest::Approx(expect[1]).epsilon(1e-12));

  // With delay D, slots 1..D contribute nothing; divisor stays N.
  Scenario delayed = cfg;
  delayed.delay_slots = 1;
  NetworkState sd = s;
  Eigen::VectorXd expect_d = Eigen::VectorXd::Zero(2);
  for (int n = 1; n < 3; ++n)
    for (int k = 0; k < 2; ++k)
      expect_d[k] += sd.sched_hop2[0](k, n) *
                     rate_hop2(delayed, sd.power_relay(0, n), sd.traj_relay[0].col(n),
                               delayed.user_pos.col(k), sd.beam_relay(0, n));
  expect_d /= 3.0;
  CHECK(user_rates(delayed, sd)[0] == doctest::Approx(expect_d[0]).epsilon(1e-12));
}

TEST_CASE("constraint residuals: collision, hover energy, causality prefix oracle") {
  Scenario cfg = default_scenario(2, 2, 5);
  cfg.delay_slots = 1;
  NetworkState s = hover_state(cfg);

  // Two relays at identical positions: raw collision residual equals d_min^2.
  NetworkState coll = s;
  coll.traj_relay[1] = coll.traj_relay[0];
  CHECK(constraint_residuals(cfg, coll).collision.raw ==
        doctest::Approx(cfg.min_dist_m * cfg.min_dist_m));

  // Static hover with zero power: feasible iff N * P_0 <= battery.
  Scenario tight = cfg;
  tight.battery_wslots = cfg.num_slots * cfg.prop.blade_power_w + 1.0;
  CHECK(constraint_residuals(tight, s).feasible(1e-6));
  tight.battery_wslots = cfg.num_slots * cfg.prop.blade_power_w - 1.0;
  CHECK(constraint_residuals(tight, s).energy.raw > 0.0);
  CHECK_FALSE(constraint_residuals(tight, s).feasible(1e-6));

  // Causality: transmitting in slot D+1 more bits than received in slot 1.
  NetworkState c = s;
  c.traj_relay[0].colwise() = cfg.user_pos.col(0);  // relay right above user 0
  c.power_mbs[0] = 1e-9;
  c.sched_hop1(0, 0) = 1.0;
  c.power_relay(0, 1) = 4e-3;
  c.sched_hop2[0](0, 1) = 1.0;
  const double received =
      rate_hop1(cfg, 1e-9, c.traj_mbs.col(0), c.traj_relay[0].col(0), c.beam_mbs[0]);
  const double sent =
      rate_hop2(cfg, 4e-3, c.traj_relay[0].col(1), cfg.user_pos.col(0), c.beam_relay(0, 1));
  REQUIRE(sent > received);  // the crafted instance really violates causality
  const auto rep = constraint_residuals(cfg, c);
  CHECK(rep.causality.raw == doctest::Approx(sent - received).epsilon(1e-12));
  CHECK_FALSE(rep.feasible(1e-6));
}

TEST_CASE("dB round trip") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double db = rng.uniform(-120.0, 30.0);
    CHECK(linear_to_db(db_to_linear(db)) == doctest::Approx(db).epsilon(1e-12));
    const double dbm = rng.uniform(-130.0, 10.0);
    CHECK(watt_to_dbm(dbm_to_watt(dbm)) == doctest::Approx(dbm).epsilon(1e-12));
  }
}
