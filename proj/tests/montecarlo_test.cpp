/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include "barrierlab/montecarlo.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace barrierlab;

namespace {

PathSample record_brownian(double x0, double dt, double horizon, std::uint64_t seed,
                           std::uint64_t index, bool with_barrier) {
  IntegratorConfig cfg;
  cfg.dt = dt;
  cfg.horizon = horizon;
  cfg.bridge_correction = false;
  cfg.seed = seed;
  cfg.path_index = index;
  std::optional<BarrierSpec> barrier;
  if (with_barrier) barrier = identity_barrier();
  return simulate_path(brownian_model(), ControllerSpec{}, barrier, {x0}, cfg);
}

PathSample ramp_path(double h0, double slope, double dt, int steps) {
  PathSample p;
  p.dim_x = 1;
  p.dim_u = 0;
  for (int k = 0; k <= steps; ++k) {
    p.times.push_back(k * dt);
    p.states.push_back(h0 + slope * k * dt);
  }
  return p;
}

}  // namespace

TEST(WilsonInterval, HandComputedValues) {
  {
    const auto [lo, hi] = wilson_interval(0, 100, 0.95);
    EXPECT_DOUBLE_EQ(lo, 0.0);
    EXPECT_NEAR(hi, 0.0369935, 5e-6);
  }
  {
    const auto [lo, hi] = wilson_interval(50, 100, 0.95);
    EXPECT_NEAR(lo + hi, 1.0, 1e-12);  // symmetric about 1/2
    EXPECT_NEAR(hi - lo, 0.19233, 5e-4);
  }
  {
    const auto [lo, hi] = wilson_interval(100, 100, 0.95);
    EXPECT_DOUBLE_EQ(hi, 1.0);
    EXPECT_NEAR(lo, 1.0 - 0.0369935, 5e-6);
  }
  EXPECT_THROW(wilson_interval(1, 0, 0.95), std::invalid_argument);
  EXPECT_THROW(wilson_interval(5, 3, 0.95), std::invalid_argument);
  EXPECT_THROW(wilson_interval(0, 10, 1.0), std::invalid_argument);
}

TEST(ExitProbability, FrozenDynamicsNeverExit) {
  const SdeModel still = scalar_model(nullptr, nullptr, [](double) { return 0.0; });
  EnsembleConfig cfg;
  cfg.n_paths = 200;
  cfg.dt = 1e-2;
  cfg.horizon = 1.0;
  const ExitEstimate est =
      estimate_exit_probability(still, ControllerSpec{}, identity_barrier(), {1.0}, cfg);
  EXPECT_EQ(est.n_exits, 0);
  EXPECT_DOUBLE_EQ(est.p_hat, 0.0);
  EXPECT_DOUBLE_EQ(est.ci_low, 0.0);
}

TEST(ExitProbability, OneStepHorizonBarelyCrosses) {
  EnsembleConfig cfg;
  cfg.n_paths = 2000;
  cfg.dt = 1e-3;
  cfg.horizon = 1e-3;
  const ExitEstimate est = estimate_exit_probability(brownian_model(), ControllerSpec{},
                                                     identity_barrier(), {1.0}, cfg);
  EXPECT_LE(est.p_hat, 0.001);
}

TEST(ExitProbability, MatchesReflectionOracleForBrownianMotion) {
  EnsembleConfig cfg;
  cfg.n_paths = 20000;
  cfg.dt = 1e-3;
  cfg.horizon = 1.0;
  cfg.seed = 424242;
  const ExitEstimate est = estimate_exit_probability(brownian_model(), ControllerSpec{},
                                                     identity_barrier(), {1.0}, cfg);
  const double oracle = 2.0 * normal_cdf(-1.0);  // 0.31731...
  const double se = std::sqrt(oracle * (1.0 - oracle) / cfg.n_paths);
  EXPECT_NEAR(est.p_hat, oracle, 4.0 * se);
  EXPECT_LE(est.ci_low, est.p_hat);
  EXPECT_GE(est.ci_high, est.p_hat);
}

TEST(ExitProbability, DeterministicAcrossThreadCounts) {
  EnsembleConfig one;
  one.n_paths = 3000;
  one.dt = 1e-2;
  one.horizon = 1.0;
  one.seed = 5;
  one.threads = 1;
  EnsembleConfig four = one;
  four.threads = 4;
  const ExitEstimate a = estimate_exit_probability(brownian_model(), ControllerSpec{},
                                                   identity_barrier(), {1.0}, one);
  const ExitEstimate b = estimate_exit_probability(brownian_model(), ControllerSpec{},
                                                   identity_barrier(), {1.0}, four);
  EXPECT_EQ(a.n_exits, b.n_exits);
  EXPECT_EQ(a.p_hat, b.p_hat);
}

TEST(ExitProbability, CoverageOverRepeatedSeeds) {
  // Doubling-style consistency: across 20 independent ensembles the 95%
  // interval should cover the analytic value in at least 18.
  const double oracle = 2.0 * normal_cdf(-1.0);
  int covered = 0;
  for (int rep = 0; rep < 20; ++rep) {
    EnsembleConfig cfg;
    cfg.n_paths = 2000;
    cfg.dt = 1e-2;
    cfg.horizon = 1.0;
    cfg.seed = 1000 + static_cast<std::uint64_t>(rep);
    const ExitEstimate est = estimate_exit_probability(brownian_model(), ControllerSpec{},
                                                       identity_barrier(), {1.0}, cfg);
    if (oracle >= est.ci_low && oracle <= est.ci_high) ++covered;
  }
  EXPECT_GE(covered, 18);
}

TEST(StoppingTimes, MonotoneRampCrossesOnceThenTruncates) {
  // h climbs from theta; zeta_0 is the first grid time strictly above.
  const PathSample p = ramp_path(1.0, 1.0, 0.1, 20);
  const StoppingTimeRecord rec = stopping_time_sequence(p, identity_barrier(), 1.0, 4);
  ASSERT_EQ(rec.pairs.size(), 1u);
  EXPECT_DOUBLE_EQ(rec.pairs[0].eta, 0.0);
  EXPECT_DOUBLE_EQ(rec.pairs[0].zeta, 0.1);
  EXPECT_TRUE(rec.truncated);  // no return below theta
}

TEST(StoppingTimes, KnifeEdgeConstantPathNeverCrosses) {
  const PathSample p = ramp_path(1.0, 0.0, 0.1, 20);
  const StoppingTimeRecord rec = stopping_time_sequence(p, identity_barrier(), 1.0, 4);
  ASSERT_EQ(rec.pairs.size(), 1u);
  EXPECT_TRUE(std::isnan(rec.pairs[0].zeta));
  EXPECT_TRUE(rec.truncated);
}

TEST(StoppingTimes, PreconditionOnTheta) {
  const PathSample p = ramp_path(0.5, 1.0, 0.1, 20);
  EXPECT_THROW(stopping_time_sequence(p, identity_barrier(), 1.0, 4), std::domain_error);
  EXPECT_THROW(stopping_time_sequence(p, identity_barrier(), 0.0, 4), std::domain_error);
  EXPECT_THROW(stopping_time_sequence(p, identity_barrier(), -1.0, 4), std::domain_error);
}

TEST(StoppingTimes, OrderingHoldsOnBrownianPaths) {
  for (int i = 0; i < 60; ++i) {
    const PathSample p = record_brownian(1.0, 1e-3, 0.2, 99, i, false);
    const StoppingTimeRecord rec = stopping_time_sequence(p, identity_barrier(), 1.0, 6);
    double prev = -1.0;
    for (std::size_t k = 0; k < rec.pairs.size(); ++k) {
      EXPECT_GE(rec.pairs[k].eta, prev);
      prev = rec.pairs[k].eta;
      if (std::isnan(rec.pairs[k].zeta)) {
        EXPECT_EQ(k + 1, rec.pairs.size());  // only the last pair may be pending
        break;
      }
      EXPECT_GE(rec.pairs[k].zeta, prev);
      prev = rec.pairs[k].zeta;
    }
  }
}

TEST(StoppingTimes, MedianGapIsAFewStepsAtFineResolution) {
  // Started on the threshold, the discrete path crosses up and returns
  // within a handful of grid points for at least half the paths.
  const long n = 2000;
  std::vector<double> gaps;
  for (long i = 0; i < n; ++i) {
    const PathSample p = record_brownian(1.0, 1e-4, 0.02, 31337, i, false);
    const StoppingTimeRecord rec = stopping_time_sequence(p, identity_barrier(), 1.0, 2);
    if (rec.pairs.size() >= 2 && std::isfinite(rec.pairs[0].zeta))
      gaps.push_back(rec.pairs[1].eta - rec.pairs[0].zeta);
    else
      gaps.push_back(std::numeric_limits<double>::infinity());
  }
  std::sort(gaps.begin(), gaps.end());
  const double median = gaps[gaps.size() / 2];
  EXPECT_LE(median, 10.0 * 1e-4);
}

TEST(LocalTime, PathOutsideBandHasZeroLocalTime) {
  const PathSample p = ramp_path(5.0, 0.1, 0.01, 50);
  const LocalTimeEstimate est = estimate_local_time(p, 0.0, 0.5);
  EXPECT_DOUBLE_EQ(est.l_hat, 0.0);
}

TEST(LocalTime, ConstantPathHasZeroQuadraticVariation) {
  const PathSample p = ramp_path(0.0, 0.0, 0.01, 50);
  const LocalTimeEstimate est = estimate_local_time(p, 0.0, 0.5);
  EXPECT_DOUBLE_EQ(est.l_hat, 0.0);
  EXPECT_DOUBLE_EQ(est.tanaka_residual, 0.0);
}

TEST(LocalTime, RejectsBadArguments) {
  const PathSample p = ramp_path(0.0, 1.0, 0.01, 50);
  EXPECT_THROW(estimate_local_time(p, 0.0, 0.0), std::invalid_argument);
  PathSample multi;
  multi.dim_x = 2;
  multi.times = {0.0, 1.0};
  multi.states = {0.0, 0.0, 1.0, 1.0};
  EXPECT_THROW(estimate_local_time(multi, 0.0, 0.1), std::invalid_argument);
}

TEST(LocalTime, NonDecreasingInHorizon) {
  const PathSample p = record_brownian(0.0, 1e-3, 1.0, 12, 3, false);
  const double eps = 5.0 * std::sqrt(1e-3);
  double prev = 0.0;
  for (std::size_t keep = 2; keep <= p.n_points(); keep += 50) {
    const LocalTimeEstimate est =
        scalar_local_time(std::span<const double>(p.states).first(keep), 0.0, eps);
    EXPECT_GE(est.l_hat, prev - 1e-12);
    prev = est.l_hat;
  }
}

TEST(LocalTime, BrownianMeanNearHalfNormalMean) {
  // E L_1^0(W) = E|W_1| = sqrt(2/pi).
  const long n = 3000;
  const double dt = 1e-3;
  const double eps = 2.5 * std::sqrt(dt);
  double sum = 0.0;
  for (long i = 0; i < n; ++i) {
    const PathSample p = record_brownian(0.0, dt, 1.0, 777, i, false);
    sum += estimate_local_time(p, 0.0, eps).l_hat;
  }
  const double mean = sum / n;
  const double oracle = std::sqrt(2.0 / M_PI);
  EXPECT_NEAR(mean, oracle, 0.08 * oracle);
}

TEST(LocalTime, TanakaResidualShrinksWithStep) {
  const long n = 1500;
  double coarse = 0.0, fine = 0.0;
  for (long i = 0; i < n; ++i) {
    const PathSample a = record_brownian(0.0, 1e-2, 1.0, 55, i, false);
    const PathSample b = record_brownian(0.0, 1e-3, 1.0, 55, i, false);
    coarse += std::fabs(estimate_local_time(a, 0.0, 5.0 * std::sqrt(1e-2)).tanaka_residual);
    fine += std::fabs(estimate_local_time(b, 0.0, 5.0 * std::sqrt(1e-3)).tanaka_residual);
  }
  EXPECT_GT(coarse / n, fine / n);
}

TEST(LocalTime, WarnsWhenBandwidthBelowStepScale) {
  const PathSample p = record_brownian(0.0, 1e-2, 1.0, 9, 0, false);
  EXPECT_TRUE(estimate_local_time(p, 0.0, 0.01).bandwidth_warning);  // step rms ~ 0.1
  EXPECT_FALSE(estimate_local_time(p, 0.0, 0.5).bandwidth_warning);
}

namespace {

BTildeConfig small_btilde(long pilot, long main, double dt, std::uint64_t seed) {
  BTildeConfig cfg;
  cfg.pilot_paths = pilot;
  cfg.main_paths = main;
  cfg.dt = dt;
  cfg.seed = seed;
  return cfg;
}

ReciprocalSpec identity_reciprocal() {
  ReciprocalSpec rs;
  rs.base = identity_barrier();
  return rs;
}

ControllerSpec rcbf_controller() {
  ControllerSpec cs;
  cs.kind = ControllerKind::rcbf;
  return cs;
}

}  // namespace

TEST(BTildeBound, DeterministicSafePlantNeverViolates) {
  // sigma = 0: the pilot local time vanishes (M = 0) and B stays at B0.
  const SdeModel m = scalar_model(nullptr, [](double) { return 1.0; }, nullptr);
  const BTildeReport rep = validate_b_tilde_bound(m, rcbf_controller(), identity_reciprocal(),
                                                  {1.0}, 1.0, 0.1,
                                                  small_btilde(200, 200, 1e-2, 3));
  EXPECT_DOUBLE_EQ(rep.M, 0.0);
  EXPECT_EQ(rep.n_violations, 0);
  EXPECT_DOUBLE_EQ(rep.violation_fraction, 0.0);
}

TEST(BTildeBound, ViolationFractionWithinLemmaBudget) {
  const BTildeReport rep =
      validate_b_tilde_bound(single_integrator_model(), rcbf_controller(), identity_reciprocal(),
                             {1.0}, 1.0, 0.1, small_btilde(1000, 1000, 1e-3, 2024));
  EXPECT_DOUBLE_EQ(rep.b_tilde, 1.0);  // alpha3(alpha2^-1(1/B0)) with everything identity at 1
  // delta/2 plus three binomial standard errors at n = 1000.
  const double budget = 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / 1000.0);
  EXPECT_LE(rep.violation_fraction, budget);
  // Indicator-gated drift never outruns the linear envelope.
  EXPECT_LE(rep.max_drift_excess, 1e-9);
}

TEST(BTildeBound, DeltaOneUsesTheMedian) {
  const BTildeReport rep =
      validate_b_tilde_bound(single_integrator_model(), rcbf_controller(), identity_reciprocal(),
                             {1.0}, 1.0, 1.0, small_btilde(500, 500, 1e-3, 99));
  EXPECT_LE(rep.violation_fraction, 0.5 + 3.0 * std::sqrt(0.25 / 500.0) + 0.05);
}

TEST(BTildeBound, RejectsBadArguments) {
  EXPECT_THROW(validate_b_tilde_bound(single_integrator_model(), rcbf_controller(),
                                      identity_reciprocal(), {1.0}, 1.0, 0.0,
                                      small_btilde(10, 10, 1e-2, 1)),
               std::invalid_argument);
  EXPECT_THROW(validate_b_tilde_bound(single_integrator_model(), rcbf_controller(),
                                      identity_reciprocal(), {1.0}, -1.0, 0.1,
                                      small_btilde(10, 10, 1e-2, 1)),
               std::invalid_argument);
  EXPECT_THROW(validate_b_tilde_bound(single_integrator_model(), rcbf_controller(),
                                      identity_reciprocal(), {-1.0}, 1.0, 0.1,
                                      small_btilde(10, 10, 1e-2, 1)),
               std::domain_error);
}
