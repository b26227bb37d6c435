// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"
#include "uavrelay/model.hpp"
#include "uavrelay/orchestrator.hpp"

using namespace uavrelay;
using uavrelay::testutil::default_scenario;

TEST_CASE("fairness index: equal, concentrated, direct value, all-zero") {
  Eigen::VectorXd equal = Eigen::VectorXd::Constant(5, 0.3);
  CHECK(fairness_index(equal) == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::VectorXd one = Eigen::VectorXd::Zero(4);
  one[2] = 7.0;
  CHECK(fairness_index(one) == doctest::Approx(0.25).epsilon(1e-12));

  Eigen::VectorXd v(3);
  v << 1.0, 2.0, 3.0;
  CHECK(fairness_index(v) == doctest::Approx(6.0 / 7.0).epsilon(1e-12));

  CHECK_THROWS_AS(fairness_index(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("mu upper bound: overhead peak-power narrow-beam rate") {
  Scenario cfg = default_scenario();
  const double expected =
      std::log2(1.0 + cfg.p_max_relay * cfg.rho0_relay() * 7.0 / (cfg.noise_w * 1e4));
  CHECK(mu_upper_bound(cfg) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("algorithm1: monotone blocks on a small scenario") {
  Scenario cfg = default_scenario(2, 1, 10, 3);
  cfg.delay_slots = 1;
  NetworkState start = testutil::hover_state(cfg);
  start.power_mbs.setConstant(cfg.p_avg_mbs);
  start.power_relay.setConstant(cfg.p_avg_relay);

  BcdOptions opts;
  opts.max_inner = 12;
  std::vector<TraceRow> trace;
  const InnerResult res = algorithm1(cfg, start, opts, 0, &trace);
  REQUIRE(res.status == convex::Status::Optimal);
  CHECK(res.mu >= min_user_rate(cfg, start) - 1e-12);
  REQUIRE(!trace.empty());
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i].mu >= trace[i - 1].mu - 1e-9);
  for (const auto& row : trace) CHECK(row.max_residual <= 1e-6);
}

TEST_CASE("algorithm1: converged input exits after one cycle") {
  Scenario cfg = default_scenario(2, 1, 8, 5);
  NetworkState start = testutil::hover_state(cfg);
  start.power_mbs.setConstant(cfg.p_avg_mbs);
  start.power_relay.setConstant(cfg.p_avg_relay);
  BcdOptions tight;
  tight.max_inner = 40;
  tight.rel_tol = 1e-7;
  const InnerResult first = algorithm1(cfg, start, tight, 0, nullptr);
  REQUIRE(first.status == convex::Status::Optimal);
  BcdOptions opts;  // default tolerance sees the tight solution as stationary
  const InnerResult second = algorithm1(cfg, first.state, opts, 0, nullptr);
  CHECK(second.iterations == 1);
  CHECK(second.mu >= first.mu - 1e-6 * std::max(1.0, first.mu));
}

TEST_CASE("algorithm1: frozen beams never beat adaptive beams") {
  Scenario cfg = default_scenario(2, 1, 8, 7);
  NetworkState start = testutil::hover_state(cfg);
  start.power_mbs.setConstant(cfg.p_avg_mbs);
  start.power_relay.setConstant(cfg.p_avg_relay);

  BcdOptions frozen;
  frozen.adapt_beams = false;
  frozen.max_inner = 10;
  BcdOptions adaptive;
  adaptive.max_inner = 10;
  const InnerResult fixed = algorithm1(cfg, start, frozen, 0, nullptr);
  REQUIRE(fixed.status == convex::Status::Optimal);
  // continuing from the frozen optimum with the beam step enabled can only
  // improve: r = 2 stays feasible inside every beam subproblem
  const InnerResult adapt = algorithm1(cfg, fixed.state, adaptive, 0, nullptr);
  REQUIRE(adapt.status == convex::Status::Optimal);
  CHECK(adapt.mu >= fixed.mu - 1e-9);
}

TEST_CASE("algorithm3: monotone bounded trace, fairness, determinism") {
  Scenario cfg = default_scenario(2, 1, 10, 11);
  BcdOptions opts;
  opts.max_outer = 4;
  opts.max_inner = 8;
  const SolveSummary run = algorithm3(cfg, opts);
  REQUIRE(run.status == convex::Status::Optimal);
  REQUIRE(!run.outer_mu.empty());

  const double bound = mu_upper_bound(cfg);
  double prev = 0.0;
  for (const double mu : run.outer_mu) {
    CHECK(mu >= prev - 1e-9);
    CHECK(mu <= bound + 1e-9);
    prev = mu;
  }
  CHECK(run.mu > 0.0);
  CHECK(run.fairness == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(constraint_residuals(cfg, run.state).feasible(1e-6));
  CHECK(constraint_residuals(cfg, run.binary_state).feasible(1e-6));
  CHECK(run.mu_binary <= run.mu + 1e-9);

  // determinism: identical scenario and options give identical output
  const SolveSummary again = algorithm3(cfg, opts);
  CHECK(again.mu == run.mu);
  CHECK((again.state.power_mbs - run.state.power_mbs).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((again.state.traj_mbs - run.state.traj_mbs).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((again.state.beam_relay - run.state.beam_relay).lpNorm<Eigen::Infinity>() == 0.0);
}
