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

// End-to-end acceptance suite.  Every check runs at full scale with a
// pinned seed and prints one pass/fail line; expect several minutes of
// wall time on a single core.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "barrierlab/barrierlab.hpp"

using namespace barrierlab;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20260810;

void criterion_line(int n, bool pass, const std::string& details) {
  std::printf("[criterion %d] %s - %s\n", n, pass ? "PASS" : "FAIL", details.c_str());
  std::fflush(stdout);
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST(Acceptance, Criterion1BrownianCounterexample) {
  // x0 = 1, T = 1, dt = 1e-4, bridge on, n = 1e5: exit fraction within
  // +-0.01 of the reflection value 2 Phi(-1) = 0.31731.
  ExperimentConfig c = default_config("brownian-counterexample");
  c.n_paths = 100000;
  c.dt = 1e-4;
  c.horizon = 1.0;
  c.seed = kSeed;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult res = run_experiment_in_memory(c);
  const double secs = elapsed_s(t0);
  const double p_hat = *res.rows.at(0).p_hat;
  const double oracle = 2.0 * normal_cdf(-1.0);
  const bool pass = std::fabs(p_hat - oracle) <= 0.01;
  std::ostringstream d;
  d << "exit fraction " << p_hat << " vs oracle " << oracle << " (|diff| "
    << std::fabs(p_hat - oracle) << " <= 0.01), " << secs << " s wall";
  criterion_line(1, pass, d.str());
  EXPECT_TRUE(pass) << d.str();
}

TEST(Acceptance, Criterion2ZcbfFails) {
  // The ZCBF condition holds everywhere inside C yet at least a quarter
  // of the paths leave by T = 1.
  ExperimentConfig c = default_config("zcbf-fails");
  c.n_paths = 100000;
  c.dt = 1e-4;
  c.horizon = 1.0;
  c.seed = kSeed + 1;
  const ExperimentResult res = run_experiment_in_memory(c);
  const double p_hat = *res.rows.at(0).p_hat;
  const bool pass = p_hat >= 0.25;
  std::ostringstream d;
  d << "exit fraction " << p_hat << " >= 0.25";
  criterion_line(2, pass, d.str());
  EXPECT_TRUE(pass) << d.str();
}

TEST(Acceptance, Criterion3SafeControllersAcrossDtSweep) {
  // rcbf-safe and modified-zcbf-safe: n = 1e4 paths, T = 1,
  // dt in {1e-2, 1e-3, 1e-4}: final exit fraction <= 0.01 and the sweep
  // non-increasing.
  bool pass = true;
  std::ostringstream d;
  for (const char* name : {"rcbf-safe", "modified-zcbf-safe"}) {
    ExperimentConfig c = default_config(name);
    c.n_paths = 10000;
    c.dt_sweep = {1e-2, 1e-3, 1e-4};
    c.horizon = 1.0;
    c.seed = kSeed + 2;
    const ExperimentResult res = run_experiment_in_memory(c);
    d << name << ":";
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& row : res.rows) {
      const double p = *row.p_hat;
      d << " p(" << *row.dt << ")=" << p;
      if (p > prev) pass = false;
      prev = p;
    }
    if (*res.rows.back().p_hat > 0.01) pass = false;
    d << "; ";
  }
  criterion_line(3, pass, d.str());
  EXPECT_TRUE(pass) << d.str();
}

TEST(Acceptance, Criterion4DivergenceRateSweepVsClassifier) {
  // Grid p in {0.25,...,2}, gamma in {0.5,1,2}, n = 1e4 per cell at
  // dt = 1e-4: cells tagged hits_zero must exit > 5%, all others < 1%.
  ExperimentConfig c = default_config("divergence-rate-sweep");
  c.n_paths = 10000;
  c.dt = 1e-4;
  c.horizon = 1.0;
  c.seed = kSeed + 3;
  const ExperimentResult res = run_experiment_in_memory(c);
  bool pass = true;
  std::ostringstream d;
  d << "\n";
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& row = res.rows[i];
    const double p_hat = *row.p_hat;
    const std::string& tag = row.classifier_tag;
    const bool hits = tag == "hits_zero_with_positive_prob";
    const bool cell_ok = hits ? (p_hat > 0.05) : (p_hat < 0.01);
    if (!cell_ok) pass = false;
    const double analytic =
        res.records[i]["hit_zero_probability_infinite_horizon"].get<double>();
    d << "    " << row.cell_id << " tag=" << tag << " exit=" << p_hat
      << " analytic_P(T<inf)=" << analytic << (cell_ok ? "" : "  <-- outside bound") << "\n";
  }
  criterion_line(4, pass, d.str());
  EXPECT_TRUE(pass) << d.str();
}

TEST(Acceptance, Criterion5ScaleFunctionQuadratureVsClosedForms) {
  // Max |numeric - closed form| <= 1e-6 over a log grid on [0.01, 100]
  // for (p=1, gamma in {0.6, 1, 2}) and (p=0.5, gamma=1).
  double worst = 0.0;
  for (const auto& [gamma, p] :
       std::vector<std::pair<double, double>>{{0.6, 1.0}, {1.0, 1.0}, {2.0, 1.0}, {1.0, 0.5}}) {
    RatioSpec s;
    s.gamma = gamma;
    s.p = p;
    for (int i = 0; i <= 60; ++i) {
      const double x = 0.01 * std::pow(1e4, i / 60.0);
      const double cf = *scale_closed_form(s, x);
      const double num = scale_function_numeric(s, x, 1e-9, 1e-9);
      worst = std::max(worst, std::fabs(num - cf));
    }
  }
  const bool pass = worst <= 1e-6;
  std::ostringstream d;
  d << "max |quadrature - closed form| = " << worst << " <= 1e-6";
  criterion_line(5, pass, d.str());
  EXPECT_TRUE(pass) << d.str();
}

TEST(Acceptance, Criterion6IncompleteGamma) {
  bool pass = true;
  double worst_rel = 0.0;
  for (double x : {0.1, 1.0, 10.0}) {
    const double rel =
        std::fabs(upper_incomplete_gamma(1.0, x) - std::exp(-x)) / std::exp(-x);
    worst_rel = std::max(worst_rel, rel);
  }
  for (double a : {0.5, 2.5}) {
    for (double x : {0.1, 1.0, 10.0}) {
      const double lhs = upper_incomplete_gamma(a + 1.0, x);
      const double rhs = a * upper_incomplete_gamma(a, x) + std::pow(x, a) * std::exp(-x);
      worst_rel = std::max(worst_rel, std::fabs(lhs - rhs) / std::fabs(rhs));
    }
  }
  if (worst_rel > 1e-9) pass = false;
  const double tail = upper_incomplete_gamma(0.5, 1e6);
  if (!(tail < 1e-12)) pass = false;
  std::ostringstream d;
  d << "worst relative error " << worst_rel << " <= 1e-9; Gamma(0.5, 1e6) = " << tail
    << " < 1e-12";
  criterion_line(6, pass, d.str());
  EXPECT_TRUE(pass) << d.str();
}

TEST(Acceptance, Criterion7TanakaLocalTime) {
  // n = 5e4 Brownian paths from 0, t = 1: mean local time at 0 within 5%
  // of sqrt(2/pi); the mean |Tanaka residual| shrinks from dt = 1e-3 to
  // dt = 1e-4.
  ExperimentConfig c = default_config("tanaka-check");
  c.n_paths = 50000;
  c.dt_sweep = {1e-3, 1e-4};
  c.horizon = 1.0;
  c.seed = kSeed + 4;
  const ExperimentResult res = run_experiment_in_memory(c);
  const double mean_fine = res.records[1]["mean_local_time"].get<double>();
  const double res_coarse = res.records[0]["mean_abs_tanaka_residual"].get<double>();
  const double res_fine = res.records[1]["mean_abs_tanaka_residual"].get<double>();
  const double oracle = std::sqrt(2.0 / M_PI);
  const bool pass = std::fabs(mean_fine - oracle) <= 0.05 * oracle && res_coarse > res_fine;
  std::ostringstream d;
  d << "mean L = " << mean_fine << " vs sqrt(2/pi) = " << oracle << " (|rel diff| "
    << std::fabs(mean_fine - oracle) / oracle << " <= 0.05); residual " << res_coarse
    << " (dt=1e-3) > " << res_fine << " (dt=1e-4)";
  criterion_line(7, pass, d.str());
  EXPECT_TRUE(pass) << d.str();
}

TEST(Acceptance, Criterion8StoppingTimeCoincidence) {
  // theta = x0 = 1, n = 1e4, dt = 1e-5: median(eta_1 - zeta_0) <= 10 dt.
  ExperimentConfig c = default_config("stopping-times");
  c.n_paths = 10000;
  c.dt_sweep = {1e-5};
  c.horizon = 0.05;
  c.seed = kSeed + 5;
  const ExperimentResult res = run_experiment_in_memory(c);
  const double median = res.records[0]["gap_median"].get<double>();
  const bool pass = median <= 10.0 * 1e-5;
  std::ostringstream d;
  d << "median(eta1 - zeta0) = " << median << " <= " << 10.0 * 1e-5 << " (truncated "
    << res.records[0]["n_truncated"].get<long>() << "/" << c.n_paths << ")";
  criterion_line(8, pass, d.str());
  EXPECT_TRUE(pass) << d.str();
}

TEST(Acceptance, Criterion9BTildeEnvelope) {
  // delta = 0.1, t = 1, pilot and main ensembles of 1e4 paths:
  // violation fraction <= 0.05 + 3 binomial standard errors.
  ExperimentConfig c = default_config("b-tilde-bound");
  c.n_paths = 10000;
  c.pilot_paths = 10000;
  c.dt = 1e-4;
  c.horizon = 1.0;
  c.delta = 0.1;
  c.seed = kSeed + 6;
  const ExperimentResult res = run_experiment_in_memory(c);
  const double viol = res.records[0]["violation_fraction"].get<double>();
  const double budget = 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / 10000.0);
  const bool pass = viol <= budget;
  std::ostringstream d;
  d << "violation fraction " << viol << " <= " << budget << " (M = "
    << res.records[0]["M"].get<double>() << ", exploded "
    << res.records[0]["n_exploded"].get<long>() << ")";
  criterion_line(9, pass, d.str());
  EXPECT_TRUE(pass) << d.str();
}

TEST(Acceptance, Criterion10DeterministicReruns) {
  // Identical configs produce byte-identical summary CSVs.
  ExperimentConfig c = default_config("brownian-counterexample");
  c.n_paths = 2000;
  c.dt = 1e-3;
  c.seed = kSeed + 7;
  c.out_dir = "/tmp/barrierlab_acceptance_rerun_a";
  run_experiment(c);
  ExperimentConfig c2 = c;
  c2.out_dir = "/tmp/barrierlab_acceptance_rerun_b";
  run_experiment(c2);
  const std::string a = slurp(fs::path(c.out_dir) / "summary.csv");
  const std::string b = slurp(fs::path(c2.out_dir) / "summary.csv");
  const bool pass = !a.empty() && a == b;
  std::ostringstream d;
  d << "rerun summary.csv byte-identical (" << a.size() << " bytes)";
  criterion_line(10, pass, d.str());
  EXPECT_TRUE(pass) << d.str();
}
