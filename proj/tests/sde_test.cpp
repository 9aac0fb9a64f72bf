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

#include "barrierlab/sde.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace barrierlab;

namespace {

IntegratorConfig make_cfg(double dt, double horizon, bool bridge, std::uint64_t seed,
                          std::uint64_t path) {
  IntegratorConfig c;
  c.dt = dt;
  c.horizon = horizon;
  c.bridge_correction = bridge;
  c.seed = seed;
  c.path_index = path;
  return c;
}

}  // namespace

TEST(EmStep, PureAdditiveNoise) {
  const SdeModel m = scalar_model(nullptr, nullptr, [](double) { return 1.0; });
  const Vec out = em_step(m, {1.0}, {}, 0.5, {0.3});
  EXPECT_DOUBLE_EQ(out[0], 1.3);
}

TEST(EmStep, PureDriftStep) {
  const SdeModel m = scalar_model(nullptr, [](double) { return 1.0; }, [](double) { return 1.0; });
  const Vec out = em_step(m, {1.0}, {2.0}, 0.1, {0.0});
  EXPECT_DOUBLE_EQ(out[0], 1.2);
}

TEST(EmStep, DeterministicEuler) {
  const SdeModel m = scalar_model([](double x) { return -x; }, nullptr, nullptr);
  const Vec out = em_step(m, {1.0}, {}, 0.01, {0.0});
  EXPECT_DOUBLE_EQ(out[0], 0.99);
}

TEST(EmStep, RejectsBadArguments) {
  const SdeModel m = brownian_model();
  EXPECT_THROW(em_step(m, {1.0}, {}, 0.0, {0.1}), std::invalid_argument);
  EXPECT_THROW(em_step(m, {1.0}, {}, 0.1, {0.1, 0.2}), std::invalid_argument);
}

TEST(EmStep, ReportsNonFiniteModelEvaluation) {
  const SdeModel bad =
      scalar_model([](double) { return std::numeric_limits<double>::infinity(); }, nullptr,
                   [](double) { return 1.0; });
  try {
    em_step(bad, {2.5}, {}, 0.1, {0.0});
    FAIL() << "expected ModelEvalError";
  } catch (const ModelEvalError& e) {
    ASSERT_EQ(e.state().size(), 1u);
    EXPECT_DOUBLE_EQ(e.state()[0], 2.5);
  }
}

TEST(DetectExit, SignChangeIsAlwaysExit) {
  const ExitDecision d = detect_exit(0.5, -0.1, 1e-3, 1.0, true, 0.99);
  EXPECT_TRUE(d.exit);
  EXPECT_DOUBLE_EQ(d.crossing_prob, 1.0);
}

TEST(DetectExit, FarFromBoundaryNeverCrosses) {
  const ExitDecision d = detect_exit(2.0, 2.0, 1e-3, 1.0, true, 1e-300);
  EXPECT_FALSE(d.exit);
  EXPECT_DOUBLE_EQ(d.crossing_prob, 0.0);  // exp(-8000) underflows
}

TEST(DetectExit, NearBoundaryUsesBridgeProbability) {
  // exp(-2 * 0.01 * 0.01 / (1 * 0.01)) = exp(-0.02)
  const double p = std::exp(-0.02);
  EXPECT_NEAR(p, 0.980198673306755, 1e-12);
  EXPECT_TRUE(detect_exit(0.01, 0.01, 1e-2, 1.0, true, p - 1e-6).exit);
  EXPECT_FALSE(detect_exit(0.01, 0.01, 1e-2, 1.0, true, p + 1e-6).exit);
}

TEST(DetectExit, ZeroDiffusionSkipsCorrection) {
  EXPECT_FALSE(detect_exit(0.01, 0.01, 1e-2, 0.0, true, 1e-12).exit);
  EXPECT_FALSE(detect_exit(0.01, 0.01, 1e-2, 1.0, false, 1e-12).exit);
  EXPECT_THROW(detect_exit(-0.1, 0.5, 1e-2, 1.0, true, 0.5), std::domain_error);
}

TEST(SimulatePath, ZeroNoiseMatchesForwardEuler) {
  const SdeModel m = scalar_model([](double x) { return -x; }, nullptr, nullptr);
  const IntegratorConfig cfg = make_cfg(0.01, 1.0, false, 1, 0);
  const PathSample p = simulate_path(m, ControllerSpec{}, std::nullopt, {1.0}, cfg);
  double x = 1.0;
  for (std::size_t k = 0; k < p.n_points(); ++k) {
    EXPECT_EQ(p.state(k)[0], x);  // bitwise agreement with explicit Euler
    x += -x * 0.01;
  }
  EXPECT_FALSE(p.exited);
}

TEST(SimulatePath, FrozenDynamicsNeverExit) {
  const SdeModel m = scalar_model(nullptr, nullptr, [](double) { return 0.0; });
  const PathSample p = simulate_path(m, ControllerSpec{}, identity_barrier(), {1.0},
                                     make_cfg(0.1, 1.0, true, 3, 0));
  EXPECT_FALSE(p.exited);
  for (std::size_t k = 0; k < p.n_points(); ++k) EXPECT_DOUBLE_EQ(p.state(k)[0], 1.0);
}

TEST(SimulatePath, BrownianPathsSplitIntoExitAndSurvive) {
  const SdeModel m = brownian_model();
  const BarrierSpec barrier = identity_barrier();
  const IntegratorConfig base = make_cfg(1e-3, 1.0, true, 77, 0);

  int exited = 0, survived = 0;
  int first_exit = -1, first_survive = -1;
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    IntegratorConfig cfg = base;
    cfg.path_index = static_cast<std::uint64_t>(i);
    const PathSample p = simulate_path(m, ControllerSpec{}, barrier, {1.0}, cfg);
    if (p.exited) {
      ++exited;
      if (first_exit < 0) first_exit = i;
      ASSERT_TRUE(p.exit_time.has_value());
      EXPECT_LE(*p.exit_time, 1.0);
      EXPECT_LE(p.h_exit, 0.0);
    } else {
      ++survived;
      if (first_survive < 0) first_survive = i;
    }
  }
  // Reflection principle: about 31.7% exit by t = 1 from x0 = 1.
  EXPECT_GT(exited, n / 5);
  EXPECT_GT(survived, n / 2);
  ASSERT_GE(first_exit, 0);
  ASSERT_GE(first_survive, 0);
}

TEST(SimulatePath, BitIdenticalReproduction) {
  const SdeModel m = brownian_model();
  const BarrierSpec barrier = identity_barrier();
  const IntegratorConfig cfg = make_cfg(1e-3, 0.5, true, 2024, 13);
  const PathSample a = simulate_path(m, ControllerSpec{}, barrier, {1.0}, cfg);
  const PathSample b = simulate_path(m, ControllerSpec{}, barrier, {1.0}, cfg);
  ASSERT_EQ(a.states.size(), b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i], b.states[i]);
  EXPECT_EQ(a.exited, b.exited);
  EXPECT_EQ(a.exit_time.has_value(), b.exit_time.has_value());
}

TEST(SimulatePath, SampleInvariantsHold) {
  const SdeModel m = brownian_model();
  const BarrierSpec barrier = identity_barrier();
  for (int i = 0; i < 50; ++i) {
    IntegratorConfig cfg = make_cfg(1e-3, 0.3, true, 5, static_cast<std::uint64_t>(i));
    const PathSample p = simulate_path(m, ControllerSpec{}, barrier, {0.5}, cfg);
    ASSERT_GE(p.n_points(), 2u);
    for (std::size_t k = 1; k < p.n_points(); ++k) EXPECT_LT(p.times[k - 1], p.times[k]);
    EXPECT_EQ(p.states.size(), p.n_points() * static_cast<std::size_t>(p.dim_x));
    EXPECT_EQ(p.controls.size(), (p.n_points() - 1) * static_cast<std::size_t>(p.dim_u));
    if (p.exited) {
      ASSERT_TRUE(p.exit_time.has_value());
      EXPECT_LE(*p.exit_time, 0.3 + 1e-15);
      EXPECT_LE(p.h_exit, 0.0);
    }
  }
}

TEST(SimulatePath, RequiresInteriorStart) {
  const SdeModel m = brownian_model();
  EXPECT_THROW(simulate_path(m, ControllerSpec{}, identity_barrier(), {-1.0},
                             make_cfg(1e-2, 1.0, true, 1, 0)),
               std::invalid_argument);
  EXPECT_THROW(simulate_path(m, ControllerSpec{}, identity_barrier(), {0.0},
                             make_cfg(1e-2, 1.0, true, 1, 0)),
               std::invalid_argument);
}

TEST(RunPath, WeakConvergenceOfBrownianMoments) {
  const SdeModel m = brownian_model();
  const long n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n; ++i) {
    IntegratorConfig cfg = make_cfg(1e-2, 1.0, false, 99, static_cast<std::uint64_t>(i));
    double last = 1.0;
    run_path(m, [](const Vec&, Vec&) { return true; }, nullptr, {1.0}, cfg,
             [&](const StepView& s) { last = s.x1[0]; });
    sum += last;
    sumsq += last * last;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  const double se_mean = 1.0 / std::sqrt(static_cast<double>(n));
  const double se_var = std::sqrt(2.0 / static_cast<double>(n));
  EXPECT_NEAR(mean, 1.0, 3.0 * se_mean);
  EXPECT_NEAR(var, 1.0, 3.0 * se_var);
}

TEST(PathCsv, DumpHasExpectedShape) {
  const SdeModel m = brownian_model();
  const BarrierSpec barrier = identity_barrier();
  const PathSample p =
      simulate_path(m, ControllerSpec{}, barrier, {1.0}, make_cfg(0.25, 1.0, false, 8, 0));
  std::ostringstream os;
  write_path_csv(p, &barrier, os);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,x_1,h");
  std::size_t lines = 0;
  for (char ch : text)
    if (ch == '\n') ++lines;
  EXPECT_EQ(lines, p.n_points() + 1);  // header + one row per grid point
}
