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

#ifndef BARRIERLAB_EXPERIMENT_HPP
#define BARRIERLAB_EXPERIMENT_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "barrierlab/feller.hpp"
#include "barrierlab/io.hpp"
#include "barrierlab/montecarlo.hpp"

namespace barrierlab {

// ---------------------------------------------------------------------------
// Run configuration.  One file per run; flags override file values.

struct ExperimentConfig {
  std::string experiment;

  // model / barrier / controller
  double x0 = 1.0;
  double theta = 1.0;
  std::string alpha3_family = "linear";  // linear | power
  double alpha3_k = 1.0;
  double alpha3_r = 1.0;
  std::optional<double> u_max;

  // ensemble
  long n_paths = 10000;
  long pilot_paths = 10000;
  double dt = 1e-4;
  std::vector<double> dt_sweep;  // empty -> single dt
  double horizon = 1.0;
  std::uint64_t seed = 20260810;
  double delta = 0.1;
  std::optional<bool> bridge_correction;  // unset -> experiment default

  // divergence-rate sweep
  std::vector<double> gamma_grid{0.5, 1.0, 2.0};
  std::vector<double> p_grid{0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
  double c = 1.0;

  // stopping times / local time
  long max_pairs = 2;
  double local_time_level = 0.0;
  std::optional<double> local_time_eps;

  // execution / output
  int threads = 0;
  int dump_paths = 0;
  std::string out_dir = "out";
};

inline std::vector<std::string> experiment_names() {
  return {"brownian-counterexample", "zcbf-fails", "modified-zcbf-safe", "rcbf-safe",
          "divergence-rate-sweep",  "stopping-times", "tanaka-check", "b-tilde-bound"};
}

/// Per-experiment defaults, sized like the demonstrations they support.
inline ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "brownian-counterexample") {
    c.n_paths = 100000;
  } else if (experiment == "zcbf-fails") {
    c.n_paths = 100000;
  } else if (experiment == "modified-zcbf-safe" || experiment == "rcbf-safe") {
    c.dt_sweep = {1e-2, 1e-3, 1e-4};
  } else if (experiment == "divergence-rate-sweep") {
    c.n_paths = 10000;
  } else if (experiment == "stopping-times") {
    c.dt_sweep = {1e-3, 1e-4, 1e-5};
    c.horizon = 0.05;
  } else if (experiment == "tanaka-check") {
    c.x0 = 0.0;
    c.n_paths = 50000;
    c.dt_sweep = {1e-3, 1e-4};
  } else if (experiment == "b-tilde-bound") {
    c.n_paths = 10000;
    c.pilot_paths = 10000;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Config file parsing (defaults <- file <- flags).

struct ConfigParse {
  ExperimentConfig config;
  std::vector<std::string> errors;
};

inline ConfigParse apply_kv(const KvFile& kv) {
  ConfigParse out;
  out.errors = kv.errors;
  const auto it = kv.values.find("experiment");
  if (it == kv.values.end()) {
    out.errors.push_back("missing required key 'experiment'");
    return out;
  }
  out.config = default_config(it->second);

  const auto fail = [&](const std::string& key, const char* what) {
    out.errors.push_back("key '" + key + "': expected " + what);
  };
  for (const auto& [key, raw] : kv.values) {
    ExperimentConfig& c = out.config;
    if (key == "experiment") continue;
    if (key == "x0") {
      if (auto v = parse_double(raw)) c.x0 = *v; else fail(key, "a real");
    } else if (key == "theta") {
      if (auto v = parse_double(raw)) c.theta = *v; else fail(key, "a real");
    } else if (key == "alpha3_family") {
      c.alpha3_family = raw;
    } else if (key == "alpha3_k") {
      if (auto v = parse_double(raw)) c.alpha3_k = *v; else fail(key, "a real");
    } else if (key == "alpha3_r") {
      if (auto v = parse_double(raw)) c.alpha3_r = *v; else fail(key, "a real");
    } else if (key == "u_max") {
      if (auto v = parse_double(raw)) c.u_max = *v; else fail(key, "a real");
    } else if (key == "n_paths") {
      if (auto v = parse_long(raw)) c.n_paths = *v; else fail(key, "an integer");
    } else if (key == "pilot_paths") {
      if (auto v = parse_long(raw)) c.pilot_paths = *v; else fail(key, "an integer");
    } else if (key == "dt") {
      if (auto v = parse_double(raw)) { c.dt = *v; c.dt_sweep.clear(); }
      else fail(key, "a real");
    } else if (key == "dt_sweep") {
      if (auto v = parse_double_list(raw)) c.dt_sweep = *v;
      else fail(key, "a comma-separated list of reals");
    } else if (key == "horizon") {
      if (auto v = parse_double(raw)) c.horizon = *v; else fail(key, "a real");
    } else if (key == "seed") {
      if (auto v = parse_long(raw)) c.seed = static_cast<std::uint64_t>(*v);
      else fail(key, "an integer");
    } else if (key == "delta") {
      if (auto v = parse_double(raw)) c.delta = *v; else fail(key, "a real");
    } else if (key == "bridge_correction") {
      if (auto v = parse_bool(raw)) c.bridge_correction = *v; else fail(key, "true or false");
    } else if (key == "gamma_grid") {
      if (auto v = parse_double_list(raw)) c.gamma_grid = *v;
      else fail(key, "a comma-separated list of reals");
    } else if (key == "p_grid") {
      if (auto v = parse_double_list(raw)) c.p_grid = *v;
      else fail(key, "a comma-separated list of reals");
    } else if (key == "c") {
      if (auto v = parse_double(raw)) c.c = *v; else fail(key, "a real");
    } else if (key == "max_pairs") {
      if (auto v = parse_long(raw)) c.max_pairs = *v; else fail(key, "an integer");
    } else if (key == "local_time_level") {
      if (auto v = parse_double(raw)) c.local_time_level = *v; else fail(key, "a real");
    } else if (key == "local_time_eps") {
      if (auto v = parse_double(raw)) c.local_time_eps = *v; else fail(key, "a real");
    } else if (key == "threads") {
      if (auto v = parse_long(raw)) c.threads = static_cast<int>(*v); else fail(key, "an integer");
    } else if (key == "dump_paths") {
      if (auto v = parse_long(raw)) c.dump_paths = static_cast<int>(*v);
      else fail(key, "an integer");
    } else if (key == "out_dir") {
      c.out_dir = raw;
    } else {
      out.errors.push_back("unknown key '" + key + "'");
    }
  }
  return out;
}

inline ConfigParse parse_config_file(const std::string& path) {
  return apply_kv(parse_kv_file(path));
}

inline std::optional<AlphaFn> make_alpha3(const ExperimentConfig& c) {
  if (c.alpha3_family == "linear") {
    if (c.alpha3_k > 0.0) return AlphaFn::linear(c.alpha3_k);
    return std::nullopt;
  }
  if (c.alpha3_family == "power") {
    if (c.alpha3_k > 0.0 && c.alpha3_r > 0.0) return AlphaFn::power(c.alpha3_k, c.alpha3_r);
    return std::nullopt;
  }
  return std::nullopt;
}

/// Full cross-field validation; collects every problem instead of
/// failing fast.
inline std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  const auto names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
    std::string msg = "unknown experiment '" + c.experiment + "'; registered:";
    for (const auto& n : names) msg += " " + n;
    errors.push_back(msg);
  }
  if (c.n_paths < 1) errors.push_back("n_paths must be >= 1");
  if (c.pilot_paths < 1) errors.push_back("pilot_paths must be >= 1");
  if (!(c.horizon > 0.0)) errors.push_back("horizon must be > 0");
  std::vector<double> dts = c.dt_sweep.empty() ? std::vector<double>{c.dt} : c.dt_sweep;
  for (double dt : dts) {
    if (!(dt > 0.0)) errors.push_back("dt must be > 0 (got " + fmt_double(dt) + ")");
    else if (dt > c.horizon)
      errors.push_back("dt must be <= horizon (got dt=" + fmt_double(dt) +
                       ", horizon=" + fmt_double(c.horizon) + ")");
  }
  if (c.alpha3_family != "linear" && c.alpha3_family != "power")
    errors.push_back("unknown alpha family '" + c.alpha3_family +
                     "'; known families: linear, power");
  else if (!make_alpha3(c))
    errors.push_back("alpha parameters must be positive (k > 0, r > 0)");
  if (!(c.delta > 0.0 && c.delta <= 1.0)) errors.push_back("delta must be in (0, 1]");
  if (c.u_max && !(*c.u_max > 0.0)) errors.push_back("u_max must be > 0");
  if (!(c.c > 0.0)) errors.push_back("c must be > 0");
  for (double g : c.gamma_grid)
    if (g < 0.0) errors.push_back("gamma_grid entries must be >= 0");
  for (double p : c.p_grid)
    if (p < 0.0) errors.push_back("p_grid entries must be >= 0");
  if (c.max_pairs < 1) errors.push_back("max_pairs must be >= 1");
  if (c.local_time_eps && !(*c.local_time_eps > 0.0))
    errors.push_back("local_time_eps must be > 0");
  if (c.threads < 0) errors.push_back("threads must be >= 0");
  if (c.dump_paths < 0) errors.push_back("dump_paths must be >= 0");

  const bool needs_interior_start = c.experiment != "tanaka-check";
  if (needs_interior_start && !(c.x0 > 0.0))
    errors.push_back("x0 must satisfy h(x0) > 0 (h(x) = x here), got " + fmt_double(c.x0));
  if (c.experiment == "stopping-times") {
    if (!(c.theta > 0.0) || c.theta > c.x0)
      errors.push_back("theta must be in (0, h(x0)]: got theta=" + fmt_double(c.theta) +
                       ", h(x0)=" + fmt_double(c.x0));
  }
  return errors;
}

// ---------------------------------------------------------------------------
// Results.

struct ExperimentResult {
  std::vector<CsvRow> rows;
  nlohmann::json records = nlohmann::json::array();
  std::vector<std::string> digest;
};

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = c.experiment;
  j["x0"] = c.x0;
  j["theta"] = c.theta;
  j["alpha3_family"] = c.alpha3_family;
  j["alpha3_k"] = c.alpha3_k;
  j["alpha3_r"] = c.alpha3_r;
  if (c.u_max) j["u_max"] = *c.u_max;
  j["n_paths"] = c.n_paths;
  j["pilot_paths"] = c.pilot_paths;
  j["dt"] = c.dt;
  j["dt_sweep"] = c.dt_sweep;
  j["horizon"] = c.horizon;
  j["seed"] = c.seed;
  j["delta"] = c.delta;
  if (c.bridge_correction) j["bridge_correction"] = *c.bridge_correction;
  j["gamma_grid"] = c.gamma_grid;
  j["p_grid"] = c.p_grid;
  j["c"] = c.c;
  j["max_pairs"] = c.max_pairs;
  j["local_time_level"] = c.local_time_level;
  if (c.local_time_eps) j["local_time_eps"] = *c.local_time_eps;
  j["threads"] = c.threads;
  j["dump_paths"] = c.dump_paths;
  j["out_dir"] = c.out_dir;
  return j;
}

inline nlohmann::json exit_estimate_to_json(const ExitEstimate& e) {
  nlohmann::json j;
  j["n_paths"] = e.n_paths;
  j["n_exits"] = e.n_exits;
  j["p_hat"] = e.p_hat;
  j["ci_low"] = e.ci_low;
  j["ci_high"] = e.ci_high;
  j["dt"] = e.dt;
  j["horizon"] = e.horizon;
  j["seed"] = e.seed;
  j["n_infeasible"] = e.n_infeasible;
  return j;
}

inline nlohmann::json classification_to_json(const FellerClassification& f) {
  nlohmann::json j;
  j["s_at_zero"] = json_extended(f.s_at_zero);
  j["s_at_inf"] = json_extended(f.s_at_inf);
  j["case_tag"] = to_string(f.case_tag);
  j["verdict"] = {{"prob_inf_positive", to_string(f.verdict.prob_inf_positive)},
                  {"prob_T_finite", to_string(f.verdict.prob_T_finite)}};
  return j;
}

namespace detail_experiment {

inline std::string cell_dt(double dt) { return "dt=" + fmt_double(dt); }

inline std::vector<double> dts_of(const ExperimentConfig& c) {
  return c.dt_sweep.empty() ? std::vector<double>{c.dt} : c.dt_sweep;
}

inline EnsembleConfig ensemble_of(const ExperimentConfig& c, double dt, bool default_bridge) {
  EnsembleConfig e;
  e.n_paths = c.n_paths;
  e.dt = dt;
  e.horizon = c.horizon;
  e.seed = c.seed;
  e.bridge_correction = c.bridge_correction.value_or(default_bridge);
  e.threads = c.threads;
  return e;
}

inline void dump_some_paths(const ExperimentConfig& c, const SdeModel& model,
                            const ControllerSpec& cspec, const BarrierSpec& barrier, double dt) {
  for (int i = 0; i < c.dump_paths; ++i) {
    IntegratorConfig icfg;
    icfg.dt = dt;
    icfg.horizon = c.horizon;
    icfg.bridge_correction = c.bridge_correction.value_or(true);
    icfg.seed = c.seed;
    icfg.path_index = static_cast<std::uint64_t>(i);
    const PathSample p = simulate_path(model, cspec, barrier, Vec{c.x0}, icfg);
    std::ofstream os(std::filesystem::path(c.out_dir) /
                     ("path_" + std::to_string(i) + ".csv"));
    write_path_csv(p, &barrier, os);
  }
}

/// Shared body of the four exit-probability demonstrations.
inline ExperimentResult exit_probability_experiment(const ExperimentConfig& c,
                                                    const SdeModel& model,
                                                    const ControllerSpec& cspec,
                                                    bool default_bridge,
                                                    std::optional<double> oracle) {
  const BarrierSpec barrier = identity_barrier();
  ExperimentResult res;
  for (double dt : dts_of(c)) {
    const ExitEstimate est = estimate_exit_probability(model, cspec, barrier, Vec{c.x0},
                                                       ensemble_of(c, dt, default_bridge));
    CsvRow row;
    row.experiment = c.experiment;
    row.cell_id = cell_dt(dt);
    row.n_paths = est.n_paths;
    row.dt = dt;
    row.horizon = c.horizon;
    row.n_exits = est.n_exits;
    row.p_hat = est.p_hat;
    row.ci_low = est.ci_low;
    row.ci_high = est.ci_high;
    row.seed = est.seed;
    res.rows.push_back(row);

    nlohmann::json rec;
    rec["cell_id"] = row.cell_id;
    rec["estimate"] = exit_estimate_to_json(est);
    if (oracle) rec["oracle_exit_probability"] = *oracle;
    res.records.push_back(rec);

    std::ostringstream line;
    line << c.experiment << " " << row.cell_id << ": p_hat=" << fmt_double(est.p_hat) << " ["
         << fmt_double(est.ci_low) << ", " << fmt_double(est.ci_high) << "] over "
         << est.n_paths << " paths";
    if (est.n_infeasible > 0)
      line << "  WARNING: " << est.n_infeasible << " paths halted infeasible";
    if (oracle) line << "  (oracle " << fmt_double(*oracle) << ")";
    res.digest.push_back(line.str());

    if (c.dump_paths > 0) dump_some_paths(c, model, cspec, barrier, dt);
  }
  return res;
}

inline ExperimentResult run_brownian_counterexample(const ExperimentConfig& c) {
  const double oracle = 2.0 * normal_cdf(-c.x0 / std::sqrt(c.horizon));
  ControllerSpec none;
  return exit_probability_experiment(c, brownian_model(), none, true, oracle);
}

inline ExperimentResult run_zcbf_fails(const ExperimentConfig& c) {
  ControllerSpec cs;
  cs.kind = ControllerKind::zcbf;
  cs.u_max = c.u_max;
  // Inside C the min-norm ZCBF control is identically zero, so the
  // Brownian reflection value doubles as the oracle here.
  const double oracle = 2.0 * normal_cdf(-c.x0 / std::sqrt(c.horizon));
  return exit_probability_experiment(c, single_integrator_model(), cs, true, oracle);
}

inline ExperimentResult run_modified_zcbf_safe(const ExperimentConfig& c) {
  ControllerSpec cs;
  cs.kind = ControllerKind::modified_zcbf;
  cs.alpha3 = *make_alpha3(c);
  cs.u_max = c.u_max;
  return exit_probability_experiment(c, single_integrator_model(), cs, true, std::nullopt);
}

inline ExperimentResult run_rcbf_safe(const ExperimentConfig& c) {
  ControllerSpec cs;
  cs.kind = ControllerKind::rcbf;
  cs.alpha3 = *make_alpha3(c);
  cs.u_max = c.u_max;
  return exit_probability_experiment(c, single_integrator_model(), cs, true, std::nullopt);
}

inline ExperimentResult run_divergence_rate_sweep(const ExperimentConfig& c) {
  const BarrierSpec barrier = identity_barrier();
  ControllerSpec none;
  ExperimentResult res;
  for (double gamma : c.gamma_grid) {
    for (double p : c.p_grid) {
      RatioSpec rs;
      rs.gamma = gamma;
      rs.p = p;
      rs.sigma_lower_bounded = true;  // sigma_tilde == 1 in this family
      rs.c = c.c;
      const FellerClassification cls = classify_boundary(rs);
      const double hit_prob = hit_zero_probability(rs, c.x0);

      const SdeModel model = power_law_drift_model(gamma, p);
      const ExitEstimate est = estimate_exit_probability(
          model, none, barrier, Vec{c.x0}, ensemble_of(c, c.dt, true));

      std::ostringstream cell;
      cell << "gamma=" << fmt_double(gamma) << ";p=" << fmt_double(p);
      CsvRow row;
      row.experiment = c.experiment;
      row.cell_id = cell.str();
      row.n_paths = est.n_paths;
      row.dt = est.dt;
      row.horizon = c.horizon;
      row.n_exits = est.n_exits;
      row.p_hat = est.p_hat;
      row.ci_low = est.ci_low;
      row.ci_high = est.ci_high;
      row.classifier_tag = to_string(cls.case_tag);
      row.seed = est.seed;
      res.rows.push_back(row);

      nlohmann::json rec;
      rec["cell_id"] = row.cell_id;
      rec["gamma"] = gamma;
      rec["p"] = p;
      rec["classification"] = classification_to_json(cls);
      rec["hit_zero_probability_infinite_horizon"] = hit_prob;
      rec["estimate"] = exit_estimate_to_json(est);
      res.records.push_back(rec);

      std::ostringstream line;
      line << c.experiment << " " << row.cell_id << ": tag=" << to_string(cls.case_tag)
           << " exit_fraction=" << fmt_double(est.p_hat)
           << " analytic_hit_prob=" << fmt_double(hit_prob);
      res.digest.push_back(line.str());
    }
  }
  return res;
}

inline ExperimentResult run_stopping_times(const ExperimentConfig& c) {
  const BarrierSpec barrier = identity_barrier();
  ExperimentResult res;
  for (double dt : dts_of(c)) {
    IntegratorConfig icfg;
    icfg.dt = dt;
    icfg.horizon = c.horizon;
    icfg.bridge_correction = c.bridge_correction.value_or(false);  // raw crossings
    icfg.seed = c.seed;

    std::vector<double> gap(static_cast<std::size_t>(c.n_paths),
                            std::numeric_limits<double>::quiet_NaN());
    long truncated = 0;
    const SdeModel model = brownian_model();
    {
      std::vector<std::uint8_t> trunc(static_cast<std::size_t>(c.n_paths), 0);
      parallel_paths(
          c.n_paths, c.threads, [] { return 0; },
          [&](int&, long i) {
            IntegratorConfig pc = icfg;
            pc.path_index = static_cast<std::uint64_t>(i);
            const PathSample path =
                simulate_path(model, ControllerSpec{}, barrier, Vec{c.x0}, pc);
            const StoppingTimeRecord rec =
                stopping_time_sequence(path, barrier, c.theta, std::max(c.max_pairs, 2L));
            if (rec.pairs.size() >= 2 && std::isfinite(rec.pairs[0].zeta)) {
              gap[static_cast<std::size_t>(i)] = rec.pairs[1].eta - rec.pairs[0].zeta;
            } else {
              trunc[static_cast<std::size_t>(i)] = 1;
            }
          });
      for (auto t : trunc) truncated += t;
    }

    std::vector<double> gaps;
    gaps.reserve(gap.size());
    for (double g : gap)
      if (std::isfinite(g)) gaps.push_back(g);
    std::sort(gaps.begin(), gaps.end());
    const auto quantile = [&](double q) {
      if (gaps.empty()) return std::numeric_limits<double>::quiet_NaN();
      const std::size_t idx = static_cast<std::size_t>(q * (gaps.size() - 1));
      return gaps[idx];
    };
    const double med = quantile(0.5);

    CsvRow row;
    row.experiment = c.experiment;
    row.cell_id = cell_dt(dt);
    row.n_paths = c.n_paths;
    row.dt = dt;
    row.horizon = c.horizon;
    row.seed = c.seed;
    res.rows.push_back(row);

    nlohmann::json rec;
    rec["cell_id"] = row.cell_id;
    rec["theta"] = c.theta;
    rec["n_paths"] = c.n_paths;
    rec["n_with_gap"] = static_cast<long>(gaps.size());
    rec["n_truncated"] = truncated;
    rec["gap_median"] = med;
    rec["gap_q25"] = quantile(0.25);
    rec["gap_q75"] = quantile(0.75);
    rec["gap_over_dt_median"] = med / dt;
    res.records.push_back(rec);

    std::ostringstream line;
    line << c.experiment << " " << row.cell_id << ": median(eta1-zeta0)=" << fmt_double(med)
         << " (= " << fmt_double(med / dt) << " dt), truncated " << truncated << "/"
         << c.n_paths;
    res.digest.push_back(line.str());
  }
  return res;
}

inline ExperimentResult run_tanaka_check(const ExperimentConfig& c) {
  ExperimentResult res;
  const SdeModel model = brownian_model();
  for (double dt : dts_of(c)) {
    IntegratorConfig icfg;
    icfg.dt = dt;
    icfg.horizon = c.horizon;
    icfg.bridge_correction = false;
    icfg.seed = c.seed;
    const double eps = c.local_time_eps.value_or(5.0 * std::sqrt(dt));

    std::vector<double> l_hat(static_cast<std::size_t>(c.n_paths), 0.0);
    std::vector<double> abs_res(static_cast<std::size_t>(c.n_paths), 0.0);
    parallel_paths(
        c.n_paths, c.threads, [] { return std::vector<double>(); },
        [&](std::vector<double>& series, long i) {
          IntegratorConfig pc = icfg;
          pc.path_index = static_cast<std::uint64_t>(i);
          series.clear();
          series.push_back(c.x0);
          run_path(model, [](const Vec&, Vec&) { return true; }, nullptr, Vec{c.x0}, pc,
                   [&](const StepView& s) { series.push_back(s.x1[0]); });
          const LocalTimeEstimate est =
              scalar_local_time(series, c.local_time_level, eps);
          l_hat[static_cast<std::size_t>(i)] = est.l_hat;
          abs_res[static_cast<std::size_t>(i)] = std::fabs(est.tanaka_residual);
        });

    double mean_l = 0.0, mean_res = 0.0;
    for (std::size_t i = 0; i < l_hat.size(); ++i) {
      mean_l += l_hat[i];
      mean_res += abs_res[i];
    }
    mean_l /= static_cast<double>(c.n_paths);
    mean_res /= static_cast<double>(c.n_paths);

    CsvRow row;
    row.experiment = c.experiment;
    row.cell_id = cell_dt(dt);
    row.n_paths = c.n_paths;
    row.dt = dt;
    row.horizon = c.horizon;
    row.seed = c.seed;
    res.rows.push_back(row);

    nlohmann::json rec;
    rec["cell_id"] = row.cell_id;
    rec["level"] = c.local_time_level;
    rec["bandwidth"] = eps;
    rec["mean_local_time"] = mean_l;
    rec["mean_abs_tanaka_residual"] = mean_res;
    rec["oracle_mean_local_time"] = std::sqrt(2.0 / 3.14159265358979323846);
    res.records.push_back(rec);

    std::ostringstream line;
    line << c.experiment << " " << row.cell_id << ": mean L=" << fmt_double(mean_l)
         << " mean|residual|=" << fmt_double(mean_res) << " (oracle sqrt(2/pi)=0.79788...)";
    res.digest.push_back(line.str());
  }
  return res;
}

inline ExperimentResult run_b_tilde_bound(const ExperimentConfig& c) {
  ControllerSpec cs;
  cs.kind = ControllerKind::rcbf;
  cs.alpha3 = *make_alpha3(c);
  cs.u_max = c.u_max;
  ReciprocalSpec rs;
  rs.base = identity_barrier();
  rs.alpha3 = cs.alpha3;

  BTildeConfig bc;
  bc.pilot_paths = c.pilot_paths;
  bc.main_paths = c.n_paths;
  bc.dt = c.dt;
  bc.seed = c.seed;
  bc.threads = c.threads;
  bc.bandwidth = c.local_time_eps;

  const BTildeReport rep = validate_b_tilde_bound(single_integrator_model(), cs, rs, Vec{c.x0},
                                                  c.horizon, c.delta, bc);
  ExperimentResult res;
  CsvRow row;
  row.experiment = c.experiment;
  row.cell_id = "delta=" + fmt_double(c.delta);
  row.n_paths = rep.main_paths;
  row.dt = rep.dt;
  row.horizon = rep.horizon;
  row.seed = rep.seed;
  res.rows.push_back(row);

  nlohmann::json rec;
  rec["cell_id"] = row.cell_id;
  rec["B0"] = rep.B0;
  rec["b_tilde"] = rep.b_tilde;
  rec["M"] = rep.M;
  rec["pilot_paths"] = rep.pilot_paths;
  rec["main_paths"] = rep.main_paths;
  rec["n_violations"] = rep.n_violations;
  rec["n_exploded"] = rep.n_exploded;
  rec["violation_fraction"] = rep.violation_fraction;
  rec["max_drift_excess"] = rep.max_drift_excess;
  rec["bandwidth"] = rep.bandwidth;
  rec["delta"] = rep.delta;
  res.records.push_back(rec);

  std::ostringstream line;
  line << c.experiment << ": violation_fraction=" << fmt_double(rep.violation_fraction)
       << " (bound delta/2=" << fmt_double(0.5 * c.delta) << "), M=" << fmt_double(rep.M)
       << ", b_tilde=" << fmt_double(rep.b_tilde) << ", exploded=" << rep.n_exploded;
  res.digest.push_back(line.str());
  return res;
}

}  // namespace detail_experiment

/// Runs the named experiment and returns its rows/records/digest without
/// touching the filesystem.
inline ExperimentResult run_experiment_in_memory(const ExperimentConfig& c) {
  const auto errors = validate_config(c);
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::invalid_argument(msg);
  }
  using detail_experiment::run_b_tilde_bound;
  using detail_experiment::run_brownian_counterexample;
  using detail_experiment::run_divergence_rate_sweep;
  using detail_experiment::run_modified_zcbf_safe;
  using detail_experiment::run_rcbf_safe;
  using detail_experiment::run_stopping_times;
  using detail_experiment::run_tanaka_check;
  using detail_experiment::run_zcbf_fails;
  if (c.experiment == "brownian-counterexample") return run_brownian_counterexample(c);
  if (c.experiment == "zcbf-fails") return run_zcbf_fails(c);
  if (c.experiment == "modified-zcbf-safe") return run_modified_zcbf_safe(c);
  if (c.experiment == "rcbf-safe") return run_rcbf_safe(c);
  if (c.experiment == "divergence-rate-sweep") return run_divergence_rate_sweep(c);
  if (c.experiment == "stopping-times") return run_stopping_times(c);
  if (c.experiment == "tanaka-check") return run_tanaka_check(c);
  if (c.experiment == "b-tilde-bound") return run_b_tilde_bound(c);
  throw std::invalid_argument("unknown experiment '" + c.experiment + "'");
}

/// Runs the experiment and writes summary.csv, results.json, digest.txt
/// and run_meta.txt under out_dir.  Outputs other than run_meta.txt are
/// byte-identical across reruns of the same config.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  ExperimentResult res = run_experiment_in_memory(c);
  const std::filesystem::path dir(c.out_dir);
  std::filesystem::create_directories(dir);

  {
    std::ofstream csv(dir / "summary.csv", std::ios::trunc);
    csv << csv_header() << "\n";
    for (const auto& row : res.rows) csv << to_csv_line(row) << "\n";
  }
  {
    nlohmann::json top;
    top["config"] = config_to_json(c);
    top["results"] = res.records;
    std::ofstream js(dir / "results.json", std::ios::trunc);
    js << top.dump(2) << "\n";
  }
  {
    std::ofstream dg(dir / "digest.txt", std::ios::trunc);
    for (const auto& line : res.digest) dg << line << "\n";
  }
  {
    std::ofstream meta(dir / "run_meta.txt", std::ios::trunc);
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    meta << "run_at=" << buf << "\n";
    meta << "experiment=" << c.experiment << "\n";
  }
  return res;
}

}  // namespace barrierlab

#endif  // BARRIERLAB_EXPERIMENT_HPP
