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

// barrierlab: Monte Carlo experiments on barrier conditions for
// controlled diffusions.
//
//   barrierlab run <config> [--out DIR] [--seed N] [--n-paths N] [--dt X]
//   barrierlab feller-classify --gamma G --p P --sigma-bounded BOOL [--c C]
//   barrierlab validate <config>
//
// Exit codes: 0 success, 2 config error, 3 runtime failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "barrierlab/barrierlab.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::optional<std::string>& out,
            const std::optional<long>& seed, const std::optional<long>& n_paths,
            const std::optional<double>& dt, const std::optional<int>& threads,
            const std::optional<int>& dump_paths) {
  barrierlab::ConfigParse parsed = barrierlab::parse_config_file(config_path);
  if (!parsed.errors.empty()) {
    for (const auto& e : parsed.errors) std::cerr << "config error: " << e << "\n";
    return 2;
  }
  barrierlab::ExperimentConfig cfg = parsed.config;
  if (out) cfg.out_dir = *out;
  if (seed) cfg.seed = static_cast<std::uint64_t>(*seed);
  if (n_paths) cfg.n_paths = *n_paths;
  if (dt) {
    cfg.dt = *dt;
    cfg.dt_sweep.clear();
  }
  if (threads) cfg.threads = *threads;
  if (dump_paths) cfg.dump_paths = *dump_paths;

  const auto errors = barrierlab::validate_config(cfg);
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << "config error: " << e << "\n";
    return 2;
  }
  try {
    const barrierlab::ExperimentResult res = barrierlab::run_experiment(cfg);
    for (const auto& line : res.digest) std::cout << line << "\n";
    std::cout << "wrote " << cfg.out_dir << "/summary.csv, results.json, digest.txt\n";
  } catch (const std::exception& ex) {
    std::cerr << "runtime failure: " << ex.what() << "\n";
    return 3;
  }
  return 0;
}

int cmd_feller_classify(double gamma, double p, bool sigma_bounded, double c) {
  try {
    barrierlab::RatioSpec spec;
    spec.gamma = gamma;
    spec.p = p;
    spec.sigma_lower_bounded = sigma_bounded;
    spec.c = c;
    const barrierlab::FellerClassification cls = barrierlab::classify_boundary(spec);
    std::cout << barrierlab::classification_to_json(cls).dump(2) << "\n";
  } catch (const std::exception& ex) {
    std::cerr << "runtime failure: " << ex.what() << "\n";
    return 3;
  }
  return 0;
}

int cmd_validate(const std::string& config_path) {
  barrierlab::ConfigParse parsed = barrierlab::parse_config_file(config_path);
  std::vector<std::string> errors = parsed.errors;
  if (errors.empty()) {
    const auto more = barrierlab::validate_config(parsed.config);
    errors.insert(errors.end(), more.begin(), more.end());
  }
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << "config error: " << e << "\n";
    return 2;
  }
  std::cout << "ok\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo lab for barrier conditions on controlled diffusions"};
  app.require_subcommand(1);

  // run
  std::string run_config;
  std::optional<std::string> run_out;
  std::optional<long> run_seed, run_n_paths;
  std::optional<double> run_dt;
  std::optional<int> run_threads, run_dump;
  CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", run_config, "config file (key = value lines)")->required();
  run->add_option("--out", run_out, "output directory (overrides out_dir)");
  run->add_option("--seed", run_seed, "seed override");
  run->add_option("--n-paths", run_n_paths, "path count override");
  run->add_option("--dt", run_dt, "time step override (clears any dt sweep)");
  run->add_option("--threads", run_threads, "worker thread count (0 = auto)");
  run->add_option("--dump-paths", run_dump, "write the first N path CSVs");

  // feller-classify
  double fc_gamma = 0.0, fc_p = 0.0, fc_c = 1.0;
  bool fc_bounded = true;
  CLI::App* fc = app.add_subcommand("feller-classify",
                                    "classify the boundary of the power-law ratio family");
  fc->add_option("--gamma", fc_gamma, "ratio coefficient gamma >= 0")->required();
  fc->add_option("--p", fc_p, "divergence exponent p >= 0")->required();
  fc->add_option("--sigma-bounded", fc_bounded, "sigma bounded below (true|false)")->required();
  fc->add_option("--c", fc_c, "scale-function reference point (> 0)");

  // validate
  std::string val_config;
  CLI::App* val = app.add_subcommand("validate", "validate a config file without running");
  val->add_option("config", val_config, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return cmd_run(run_config, run_out, run_seed, run_n_paths, run_dt, run_threads, run_dump);
  if (fc->parsed()) return cmd_feller_classify(fc_gamma, fc_p, fc_bounded, fc_c);
  if (val->parsed()) return cmd_validate(val_config);
  return 0;
}
