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

#ifndef BARRIERLAB_MONTECARLO_HPP
#define BARRIERLAB_MONTECARLO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "barrierlab/barrier.hpp"
#include "barrierlab/rng.hpp"
#include "barrierlab/sde.hpp"

namespace barrierlab {

// ---------------------------------------------------------------------------
// Parallel path execution.  Workers own their controller/scratch copies;
// results land in per-path slots, so the reduction is independent of the
// thread count and schedule.

template <class MakeWorker, class Fn>
void parallel_paths(long n_paths, int threads, MakeWorker&& make_worker, Fn&& fn) {
  int t = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (t < 1) t = 1;
  if (static_cast<long>(t) > n_paths) t = static_cast<int>(n_paths);
  if (t <= 1) {
    auto worker = make_worker();
    for (long i = 0; i < n_paths; ++i) fn(worker, i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < t; ++w) {
    const long lo = n_paths * w / t;
    const long hi = n_paths * (w + 1) / t;
    pool.emplace_back([&, lo, hi]() {
      try {
        auto worker = make_worker();
        for (long i = lo; i < hi; ++i) fn(worker, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Wilson score interval.

inline std::pair<double, double> wilson_interval(long n_exits, long n_paths,
                                                 double confidence = 0.95) {
  if (n_paths < 1 || n_exits < 0 || n_exits > n_paths)
    throw std::invalid_argument("wilson_interval: need 0 <= n_exits <= n_paths, n_paths >= 1");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("wilson_interval: confidence must be in (0,1)");
  const double z = inverse_normal_cdf(0.5 + 0.5 * confidence);
  const double n = static_cast<double>(n_paths);
  const double phat = static_cast<double>(n_exits) / n;
  const double z2n = z * z / n;
  const double denom = 1.0 + z2n;
  const double center = (phat + 0.5 * z2n) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + 0.25 * z2n / n) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// ---------------------------------------------------------------------------
// Exit-probability estimation.

struct ExitEstimate {
  long n_paths = 0;  // feasible paths included in the estimate
  long n_exits = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double dt = 0.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  long n_infeasible = 0;  // halted paths, excluded from p_hat
};

struct EnsembleConfig {
  long n_paths = 10000;
  double dt = 1e-3;
  double horizon = 1.0;
  std::uint64_t seed = 1;
  bool bridge_correction = true;
  int threads = 0;
};

/// Frequency of barrier exit before the horizon over independent paths.
/// Paths halted by controller infeasibility are counted separately and
/// excluded from p_hat.
inline ExitEstimate estimate_exit_probability(const SdeModel& model, const ControllerSpec& cspec,
                                              const BarrierSpec& barrier, const Vec& x0,
                                              const EnsembleConfig& cfg) {
  if (cfg.n_paths < 1) throw std::invalid_argument("estimate_exit_probability: n_paths >= 1");
  if (!(barrier.value(x0) > 0.0))
    throw std::invalid_argument("estimate_exit_probability: h(x0) must be > 0");

  std::vector<std::uint8_t> status(static_cast<std::size_t>(cfg.n_paths), 0);
  constexpr std::uint8_t kSafe = 0, kExit = 1, kInfeasible = 2;

  IntegratorConfig icfg;
  icfg.dt = cfg.dt;
  icfg.horizon = cfg.horizon;
  icfg.bridge_correction = cfg.bridge_correction;
  icfg.seed = cfg.seed;

  parallel_paths(
      cfg.n_paths, cfg.threads,
      [&]() { return MinNormController(cspec, barrier, model); },
      [&](MinNormController& ctrl, long i) {
        IntegratorConfig pc = icfg;
        pc.path_index = static_cast<std::uint64_t>(i);
        const RunResult r = run_path(model, ctrl, &barrier, x0, pc, [](const StepView&) {});
        status[static_cast<std::size_t>(i)] =
            r.infeasible ? kInfeasible : (r.exited ? kExit : kSafe);
      });

  ExitEstimate est;
  est.dt = cfg.dt;
  est.horizon = cfg.horizon;
  est.seed = cfg.seed;
  for (std::uint8_t s : status) {
    if (s == kInfeasible)
      ++est.n_infeasible;
    else {
      ++est.n_paths;
      if (s == kExit) ++est.n_exits;
    }
  }
  if (est.n_paths == 0) throw std::runtime_error("all paths infeasible; no estimate");
  est.p_hat = static_cast<double>(est.n_exits) / static_cast<double>(est.n_paths);
  std::tie(est.ci_low, est.ci_high) = wilson_interval(est.n_exits, est.n_paths, 0.95);
  return est;
}

// ---------------------------------------------------------------------------
// Stopping-time sequences on a recorded path: eta_0 = 0, then the first
// grid times with h strictly above / strictly below the threshold,
// alternating.

struct StoppingTimePair {
  double eta = 0.0;
  double zeta = std::numeric_limits<double>::quiet_NaN();  // NaN while pending
};

struct StoppingTimeRecord {
  double theta = 0.0;
  std::vector<StoppingTimePair> pairs;
  bool truncated = false;  // path ended before max_pairs complete pairs
};

inline StoppingTimeRecord stopping_time_sequence(const PathSample& path,
                                                 const BarrierSpec& barrier, double theta,
                                                 long max_pairs) {
  if (max_pairs < 1) throw std::invalid_argument("stopping_time_sequence: max_pairs >= 1");
  if (path.n_points() == 0) throw std::invalid_argument("stopping_time_sequence: empty path");
  Vec x(path.state(0).begin(), path.state(0).end());
  const double h0 = barrier.value(x);
  if (!(theta > 0.0) || theta > h0)
    throw std::domain_error("stopping_time_sequence: need 0 < theta <= h(x0)");

  StoppingTimeRecord rec;
  rec.theta = theta;
  rec.pairs.push_back({0.0, std::numeric_limits<double>::quiet_NaN()});
  bool want_zeta = true;
  for (std::size_t k = 0; k < path.n_points(); ++k) {
    const auto xs = path.state(k);
    x.assign(xs.begin(), xs.end());
    const double h = barrier.value(x);
    if (want_zeta) {
      if (h > theta) {
        rec.pairs.back().zeta = path.times[k];
        if (static_cast<long>(rec.pairs.size()) == max_pairs) return rec;  // complete
        want_zeta = false;
      }
    } else {
      if (h < theta) {
        rec.pairs.push_back({path.times[k], std::numeric_limits<double>::quiet_NaN()});
        want_zeta = true;
      }
    }
  }
  rec.truncated = true;
  return rec;
}

// ---------------------------------------------------------------------------
// Local time via the occupation-time estimator with quadratic-variation
// weighting, plus the Tanaka residual of the same path.

struct LocalTimeEstimate {
  double level = 0.0;
  double bandwidth = 0.0;
  double l_hat = 0.0;
  double tanaka_residual = 0.0;
  bool bandwidth_warning = false;  // eps below the typical step displacement
};

/// L_hat = (1/eps) * sum over steps of 1{|X_k - a| < eps/2} (dX_k)^2 and
/// tanaka_residual = (X_t - a)+ - (X_0 - a)+ - sum 1{X_k > a} dX_k - L_hat/2.
inline LocalTimeEstimate scalar_local_time(std::span<const double> values, double a, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("scalar_local_time: eps must be > 0");
  if (values.size() < 2) throw std::invalid_argument("scalar_local_time: need >= 2 samples");
  double occupation = 0.0, qv = 0.0, integral = 0.0;
  const double half = 0.5 * eps;
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    const double dx = values[k + 1] - values[k];
    qv += dx * dx;
    if (std::fabs(values[k] - a) < half) occupation += dx * dx;
    if (values[k] > a) integral += dx;
  }
  LocalTimeEstimate est;
  est.level = a;
  est.bandwidth = eps;
  est.l_hat = occupation / eps;
  const double pos_t = std::max(values.back() - a, 0.0);
  const double pos_0 = std::max(values.front() - a, 0.0);
  est.tanaka_residual = pos_t - pos_0 - integral - 0.5 * est.l_hat;
  const double rms_step = std::sqrt(qv / static_cast<double>(values.size() - 1));
  est.bandwidth_warning = eps < rms_step;
  return est;
}

inline LocalTimeEstimate estimate_local_time(const PathSample& path, double a, double eps) {
  if (path.dim_x != 1)
    throw std::invalid_argument("estimate_local_time: scalar paths only (dim_x == 1)");
  return scalar_local_time(std::span<const double>(path.states), a, eps);
}

// ---------------------------------------------------------------------------
// Empirical validation of the linear-drift envelope for B = 1/h under a
// reciprocal-barrier controller.  A pilot ensemble estimates the local
// time quantile M; a fresh ensemble then checks B_s <= B~_s where
//   b~   = alpha3(alpha2^-1(1/B_0)),
//   B~_t = B_0 + M + b~ t + int_0^t dB-diffusion 1{B >= B_0} dW.

struct BTildeConfig {
  long pilot_paths = 10000;
  long main_paths = 10000;
  double dt = 1e-4;
  std::uint64_t seed = 1;
  int threads = 0;
  std::optional<double> bandwidth;  // local-time eps; default 5 sigma_B sqrt(dt)
};

struct BTildeReport {
  double B0 = 0.0;
  double b_tilde = 0.0;
  double M = 0.0;
  long pilot_paths = 0;
  long main_paths = 0;
  long n_violations = 0;
  long n_exploded = 0;  // exited or B overflowed; counted as violations
  double violation_fraction = 0.0;
  double max_drift_excess = 0.0;  // max_t of int a 1{B >= B0} - b~ t, over all paths
  double delta = 0.0;
  double horizon = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  double bandwidth = 0.0;
};

inline BTildeReport validate_b_tilde_bound(const SdeModel& model, const ControllerSpec& cspec,
                                           const ReciprocalSpec& rspec, const Vec& x0, double t,
                                           double delta, const BTildeConfig& cfg) {
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::invalid_argument("validate_b_tilde_bound: delta must be in (0, 1]");
  if (!(t > 0.0)) throw std::invalid_argument("validate_b_tilde_bound: horizon must be > 0");
  const double h0 = require_interior(rspec.base, x0);
  const double B0 = 1.0 / h0;
  const double b_tilde = rspec.alpha3(rspec.alpha2.inverse(1.0 / B0));

  IntegratorConfig icfg;
  icfg.dt = cfg.dt;
  icfg.horizon = t;
  icfg.bridge_correction = false;  // observe the raw discrete path
  icfg.seed = cfg.seed;

  // sigma_B at the start level sets the default bandwidth scale.
  const ItoPush ip0 = ito_push(rspec.base, model, x0, Vec(model.dim_u, 0.0));
  const double sigma_b0 = std::sqrt(ip0.sigma_tilde_sq()) / (h0 * h0);
  const double eps = cfg.bandwidth ? *cfg.bandwidth
                                   : 5.0 * std::max(sigma_b0, 1e-12) * std::sqrt(cfg.dt);

  constexpr double kExplosion = 1e12;

  // Pilot phase: 0.5 * local time of B at level B0 per path.
  std::vector<double> half_l(static_cast<std::size_t>(cfg.pilot_paths), 0.0);
  parallel_paths(
      cfg.pilot_paths, cfg.threads,
      [&]() { return MinNormController(cspec, rspec.base, model); },
      [&](MinNormController& ctrl, long i) {
        IntegratorConfig pc = icfg;
        pc.path_index = static_cast<std::uint64_t>(i);
        double occupation = 0.0;
        double b_prev = B0;
        bool dead = false;
        run_path(model, ctrl, &rspec.base, x0, pc, [&](const StepView& s) {
          if (dead || s.h1 <= 0.0) {
            dead = true;  // local time frozen at exit
            return;
          }
          const double b_next = 1.0 / s.h1;
          const double db = b_next - b_prev;
          if (std::fabs(b_prev - B0) < 0.5 * eps) occupation += db * db;
          b_prev = b_next;
          if (b_next > kExplosion) dead = true;
        });
        half_l[static_cast<std::size_t>(i)] = 0.5 * occupation / eps;
      });

  // Empirical (1 - delta/2) quantile (order statistic).
  std::vector<double> sorted = half_l;
  std::sort(sorted.begin(), sorted.end());
  const double q = 1.0 - 0.5 * delta;
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(sorted.size())));
  if (rank < 1) rank = 1;
  if (rank > sorted.size()) rank = sorted.size();
  const double M = sorted[rank - 1];

  // Main phase: fresh path indices, same stream family.
  std::vector<std::uint8_t> violated(static_cast<std::size_t>(cfg.main_paths), 0);
  std::vector<std::uint8_t> exploded(static_cast<std::size_t>(cfg.main_paths), 0);
  std::vector<double> drift_excess(static_cast<std::size_t>(cfg.main_paths),
                                   -std::numeric_limits<double>::infinity());

  struct MainWorker {
    MinNormController ctrl;
    Vec grad, fx, srow, u_buf;
    Mat g, sig, hess;
  };

  parallel_paths(
      cfg.main_paths, cfg.threads,
      [&]() {
        MainWorker w{MinNormController(cspec, rspec.base, model),
                     Vec(model.dim_x),
                     Vec(model.dim_x),
                     Vec(model.dim_w),
                     Vec(model.dim_u),
                     Mat(model.dim_x, model.dim_u),
                     Mat(model.dim_x, model.dim_w),
                     Mat(model.dim_x, model.dim_x)};
        return w;
      },
      [&](MainWorker& w, long i) {
        IntegratorConfig pc = icfg;
        pc.path_index = static_cast<std::uint64_t>(cfg.pilot_paths + i);
        double stoch = 0.0;  // accumulated indicator-gated stochastic integral
        double drift_acc = 0.0;
        double max_excess = -std::numeric_limits<double>::infinity();
        bool dead = false;
        bool violation = false;
        const RunResult r = run_path(
            model, w.ctrl, &rspec.base, x0, pc, [&](const StepView& s) {
              if (dead) return;
              if (s.h1 <= 0.0) {  // exited: B blew up inside the step
                dead = true;
                return;
              }
              const double b_here = 1.0 / s.h0;
              const bool above = b_here >= B0;

              // Drift and diffusion of B at the pre-step state.
              Vec x(s.x0.begin(), s.x0.end());
              rspec.base.gradient(x, w.grad);
              rspec.base.hessian(x, w.hess);
              std::fill(w.fx.begin(), w.fx.end(), 0.0);
              if (model.drift) model.drift(x, w.fx);
              model.diffusion(x, w.sig);
              if (model.dim_u > 0) {
                model.control_matrix(x, w.g);
                for (int ii = 0; ii < model.dim_x; ++ii) {
                  double acc = 0.0;
                  for (int j = 0; j < model.dim_u; ++j) acc += w.g(ii, j) * s.u[j];
                  w.fx[static_cast<std::size_t>(ii)] += acc;
                }
              }
              const double mu_h =
                  dot(w.grad, w.fx) + 0.5 * trace_congruence(w.sig, w.hess);
              vecmat(w.grad, w.sig, w.srow);
              const double s2_h = norm2_sq(w.srow);
              const double a_bar = reciprocal_drift(s.h0, mu_h, s2_h);

              if (above) {
                drift_acc += a_bar * (s.t1 - s.t0);
                // dB-diffusion = -h^-2 sigma_tilde row
                double ds = 0.0;
                for (int j = 0; j < model.dim_w; ++j) ds += w.srow[j] * s.dW[j];
                stoch += -ds / (s.h0 * s.h0);
              }
              max_excess = std::max(max_excess, drift_acc - b_tilde * s.t1);

              const double b_next = 1.0 / s.h1;
              const double b_env = B0 + M + b_tilde * s.t1 + stoch;
              if (b_next > b_env) violation = true;
              if (b_next > kExplosion) dead = true;
            });
        const std::size_t slot = static_cast<std::size_t>(i);
        if (r.exited || r.infeasible || dead) {
          exploded[slot] = 1;
          violated[slot] = 1;  // conservative
        } else if (violation) {
          violated[slot] = 1;
        }
        drift_excess[slot] = max_excess;
      });

  BTildeReport rep;
  rep.B0 = B0;
  rep.b_tilde = b_tilde;
  rep.M = M;
  rep.pilot_paths = cfg.pilot_paths;
  rep.main_paths = cfg.main_paths;
  rep.delta = delta;
  rep.horizon = t;
  rep.dt = cfg.dt;
  rep.seed = cfg.seed;
  rep.bandwidth = eps;
  for (std::size_t i = 0; i < violated.size(); ++i) {
    rep.n_violations += violated[i];
    rep.n_exploded += exploded[i];
  }
  rep.violation_fraction =
      static_cast<double>(rep.n_violations) / static_cast<double>(cfg.main_paths);
  double mx = -std::numeric_limits<double>::infinity();
  for (double e : drift_excess) mx = std::max(mx, e);
  rep.max_drift_excess = mx;
  return rep;
}

}  // namespace barrierlab

#endif  // BARRIERLAB_MONTECARLO_HPP
