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

#ifndef BARRIERLAB_SDE_HPP
#define BARRIERLAB_SDE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <utility>

#include "barrierlab/barrier.hpp"
#include "barrierlab/linalg.hpp"
#include "barrierlab/model.hpp"
#include "barrierlab/rng.hpp"

namespace barrierlab {

struct IntegratorConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  bool bridge_correction = true;
  std::uint64_t seed = 1;
  std::uint64_t path_index = 0;
};

inline void validate(const IntegratorConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("IntegratorConfig: dt must be > 0");
  if (!(cfg.horizon > 0.0)) throw std::invalid_argument("IntegratorConfig: horizon must be > 0");
  if (cfg.dt > cfg.horizon) throw std::invalid_argument("IntegratorConfig: dt must be <= horizon");
}

inline long num_steps(const IntegratorConfig& cfg) {
  const long n = static_cast<long>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
  return n < 1 ? 1 : n;
}

// ---------------------------------------------------------------------------
// Single Euler-Maruyama step (the public, allocating form).

inline Vec em_step(const SdeModel& model, const Vec& x, const Vec& u, double dt, const Vec& dW) {
  if (!(dt > 0.0)) throw std::invalid_argument("em_step: dt must be > 0");
  if (dW.size() != static_cast<std::size_t>(model.dim_w))
    throw std::invalid_argument("em_step: dW must have dim_w entries");
  const std::size_t nx = static_cast<std::size_t>(model.dim_x);
  const std::size_t nu = static_cast<std::size_t>(model.dim_u);

  Vec fx(nx, 0.0);
  if (model.drift) model.drift(x, fx);
  Mat sig(nx, static_cast<std::size_t>(model.dim_w));
  model.diffusion(x, sig);
  if (!all_finite(fx) || !all_finite(sig)) throw ModelEvalError("f or sigma", x);

  Vec out = x;
  for (std::size_t i = 0; i < nx; ++i) out[i] += fx[i] * dt;
  if (nu > 0 && !u.empty()) {
    Mat g(nx, nu);
    model.control_matrix(x, g);
    if (!all_finite(g)) throw ModelEvalError("g", x);
    for (std::size_t i = 0; i < nx; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < nu; ++j) s += g(i, j) * u[j];
      out[i] += s * dt;
    }
  }
  for (std::size_t i = 0; i < nx; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < static_cast<std::size_t>(model.dim_w); ++j)
      s += sig(i, j) * dW[j];
    out[i] += s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exit detection against {h <= 0}, with optional Brownian-bridge
// correction for crossings between grid points.

struct ExitDecision {
  bool exit = false;
  double crossing_prob = 0.0;  // probability the bridge crossed (0 or 1 for sign exits)
};

/// pre: h_prev > 0.  A sign change is always an exit.  Otherwise, with
/// the correction enabled and sigma_eff > 0, an interior crossing is
/// declared when u01 < exp(-2 h_prev h_next / (sigma_eff^2 dt)).
inline ExitDecision detect_exit(double h_prev, double h_next, double dt, double sigma_eff,
                                bool bridge_correction, double u01) {
  if (!(h_prev > 0.0)) throw std::domain_error("detect_exit: h_prev must be > 0");
  if (h_next <= 0.0) return {true, 1.0};
  if (!bridge_correction || sigma_eff <= 0.0) return {false, 0.0};
  const double e = 2.0 * h_prev * h_next / (sigma_eff * sigma_eff * dt);
  const double p = (e > 700.0) ? 0.0 : std::exp(-e);
  return {u01 < p, p};
}

// The stepping loop skips the bridge uniform when the exponent exceeds
// this; exp(-40) is below the smallest uniform the stream can produce,
// so the decision is identical to detect_exit for every drawable u01.
constexpr double kBridgeExponentCutoff = 40.0;

// ---------------------------------------------------------------------------
// Path simulation.

enum class StopReason { horizon, exit, infeasible };

struct RunResult {
  StopReason stop = StopReason::horizon;
  bool exited = false;
  double exit_time = std::numeric_limits<double>::quiet_NaN();
  double h_exit = std::numeric_limits<double>::quiet_NaN();
  bool infeasible = false;
  double infeasible_time = std::numeric_limits<double>::quiet_NaN();
  long steps_taken = 0;
  double t_end = 0.0;
};

/// One completed step, handed to the visitor before state advances.
struct StepView {
  long step;
  double t0, t1;
  std::span<const double> x0, x1;
  std::span<const double> u;
  std::span<const double> dW;
  double h0, h1;  // NaN when simulating without a barrier
  bool exit;      // this step ended the path
};

/// Core loop.  Controller is any callable bool(const Vec&, Vec&) filling
/// the control; visitor is called once per step.  Noise is indexed by
/// (seed, path_index, step, slot): slots 0..dim_w-1 are the Brownian
/// increments, slot dim_w is the bridge uniform.  Pure given its
/// arguments, so any number of paths may run concurrently.
template <class ControllerT, class Visitor>
RunResult run_path(const SdeModel& model, ControllerT&& controller, const BarrierSpec* barrier,
                   const Vec& x0, const IntegratorConfig& cfg, Visitor&& visit) {
  validate(cfg);
  if (x0.size() != static_cast<std::size_t>(model.dim_x))
    throw std::invalid_argument("run_path: x0 has wrong dimension");

  const std::size_t nx = static_cast<std::size_t>(model.dim_x);
  const std::size_t nu = static_cast<std::size_t>(model.dim_u);
  const std::size_t nw = static_cast<std::size_t>(model.dim_w);
  const long n = num_steps(cfg);
  const NoiseStream stream(cfg.seed, cfg.path_index);

  Vec x = x0, xn(nx), u(nu), fx(nx), dW(nw), grad(nx), srow(nw);
  Mat g(nx, nu), sig(nx, nw);

  double h0 = std::numeric_limits<double>::quiet_NaN();
  if (barrier) {
    h0 = barrier->value(x0);
    if (!(h0 > 0.0)) throw std::invalid_argument("run_path: x0 must satisfy h(x0) > 0");
  }

  // Fixed interior step; the final step takes the remainder, snapped to
  // dt when the horizon is an exact multiple.
  double last_dk = cfg.horizon - static_cast<double>(n - 1) * cfg.dt;
  if (std::fabs(last_dk - cfg.dt) < 1e-9 * cfg.dt) last_dk = cfg.dt;
  const double sq_dt = std::sqrt(cfg.dt);
  const double sq_last = std::sqrt(last_dk);

  RunResult res;
  for (long k = 0; k < n; ++k) {
    const bool final_step = (k + 1 == n);
    const double t0 = k * cfg.dt;
    const double t1 = final_step ? cfg.horizon : (k + 1) * cfg.dt;
    const double dk = final_step ? last_dk : cfg.dt;

    if (!controller(x, u)) {
      res.infeasible = true;
      res.infeasible_time = t0;
      res.stop = StopReason::infeasible;
      break;
    }

    std::fill(fx.begin(), fx.end(), 0.0);
    if (model.drift) model.drift(x, fx);
    model.diffusion(x, sig);
    if (!all_finite(fx) || !all_finite(sig)) throw ModelEvalError("f or sigma", x);

    for (std::size_t i = 0; i < nx; ++i) xn[i] = x[i] + fx[i] * dk;
    if (nu > 0) {
      model.control_matrix(x, g);
      if (!all_finite(g)) throw ModelEvalError("g", x);
      for (std::size_t i = 0; i < nx; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < nu; ++j) s += g(i, j) * u[j];
        xn[i] += s * dk;
      }
    }
    const double sq = final_step ? sq_last : sq_dt;
    for (std::size_t j = 0; j < nw; ++j)
      dW[j] = stream.normal(static_cast<std::uint64_t>(k), static_cast<std::uint32_t>(j)) * sq;
    for (std::size_t i = 0; i < nx; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < nw; ++j) s += sig(i, j) * dW[j];
      xn[i] += s;
    }
    if (!all_finite(xn)) throw ModelEvalError("state update", x);

    double h1 = std::numeric_limits<double>::quiet_NaN();
    bool exit = false;
    double h_exit = std::numeric_limits<double>::quiet_NaN();
    if (barrier) {
      h1 = barrier->value(xn);
      if (h1 <= 0.0) {
        exit = true;
        h_exit = h1;
      } else if (cfg.bridge_correction) {
        barrier->gradient(x, grad);
        vecmat(grad, sig, srow);
        const double s2 = norm2_sq(srow);
        if (s2 > 0.0) {
          const double e = 2.0 * h0 * h1 / (s2 * dk);
          if (e < kBridgeExponentCutoff) {
            const double u01 =
                stream.uniform(static_cast<std::uint64_t>(k), static_cast<std::uint32_t>(nw));
            if (u01 < std::exp(-e)) {
              exit = true;
              h_exit = 0.0;  // crossing happened between grid points
            }
          }
        }
      }
    }

    visit(StepView{k, t0, t1, std::span<const double>(x), std::span<const double>(xn),
                   std::span<const double>(u), std::span<const double>(dW), h0, h1, exit});

    res.steps_taken = k + 1;
    res.t_end = t1;
    if (exit) {
      res.exited = true;
      res.exit_time = t1;  // absorbing at the step boundary
      res.h_exit = h_exit;
      res.stop = StopReason::exit;
      break;
    }
    std::swap(x, xn);
    h0 = h1;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Recorded trajectories.

struct PathSample {
  int dim_x = 0;
  int dim_u = 0;
  std::vector<double> times;     // n+1 grid points, strictly increasing
  std::vector<double> states;    // (n+1) * dim_x, row k = state at times[k]
  std::vector<double> controls;  // n * dim_u, row k = control applied on [t_k, t_k+1)
  bool exited = false;
  std::optional<double> exit_time;
  // Barrier value attributed to the exit: h at the final state for sign
  // exits, 0 for bridge crossings detected between grid points.
  double h_exit = std::numeric_limits<double>::quiet_NaN();
  bool infeasible = false;
  std::optional<double> infeasible_time;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  std::size_t n_points() const { return times.size(); }
  std::span<const double> state(std::size_t k) const {
    return {states.data() + k * static_cast<std::size_t>(dim_x),
            static_cast<std::size_t>(dim_x)};
  }
  std::span<const double> control(std::size_t k) const {
    return {controls.data() + k * static_cast<std::size_t>(dim_u),
            static_cast<std::size_t>(dim_u)};
  }
};

template <class ControllerT>
PathSample simulate_path_with(const SdeModel& model, ControllerT&& controller,
                              const BarrierSpec* barrier, const Vec& x0,
                              const IntegratorConfig& cfg) {
  PathSample p;
  p.dim_x = model.dim_x;
  p.dim_u = model.dim_u;
  p.seed = cfg.seed;
  p.path_index = cfg.path_index;
  const long n = num_steps(cfg);
  p.times.reserve(n + 1);
  p.states.reserve((n + 1) * model.dim_x);
  p.controls.reserve(n * model.dim_u);
  p.times.push_back(0.0);
  p.states.insert(p.states.end(), x0.begin(), x0.end());

  const RunResult res =
      run_path(model, controller, barrier, x0, cfg, [&](const StepView& s) {
        p.times.push_back(s.t1);
        p.states.insert(p.states.end(), s.x1.begin(), s.x1.end());
        p.controls.insert(p.controls.end(), s.u.begin(), s.u.end());
      });

  p.exited = res.exited;
  if (res.exited) p.exit_time = res.exit_time;
  p.h_exit = res.h_exit;
  p.infeasible = res.infeasible;
  if (res.infeasible) p.infeasible_time = res.infeasible_time;
  return p;
}

/// Simulate one trajectory under the named controller; barrier may be
/// absent for free-running ensembles (no exit detection).
inline PathSample simulate_path(const SdeModel& model, const ControllerSpec& cspec,
                                const std::optional<BarrierSpec>& barrier, const Vec& x0,
                                const IntegratorConfig& cfg) {
  if (cspec.kind != ControllerKind::none && !barrier)
    throw std::invalid_argument("simulate_path: barrier required for this controller");
  MinNormController ctrl = barrier ? MinNormController(cspec, *barrier, model)
                                   : MinNormController();
  if (!barrier && model.dim_u > 0)
    return simulate_path_with(
        model,
        [nu = model.dim_u](const Vec&, Vec& u) {
          u.assign(static_cast<std::size_t>(nu), 0.0);
          return true;
        },
        nullptr, x0, cfg);
  return simulate_path_with(model, ctrl, barrier ? &*barrier : nullptr, x0, cfg);
}

/// CSV dump: t, x_1..x_n, u_1..u_m, h.  UTF-8, '.' decimal separator.
/// The final row has no control entries; h is emitted when a barrier is
/// supplied.
inline void write_path_csv(const PathSample& p, const BarrierSpec* barrier, std::ostream& os) {
  os << "t";
  for (int i = 1; i <= p.dim_x; ++i) os << ",x_" << i;
  for (int j = 1; j <= p.dim_u; ++j) os << ",u_" << j;
  if (barrier) os << ",h";
  os << "\n";
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  Vec xk(static_cast<std::size_t>(p.dim_x));
  for (std::size_t k = 0; k < p.n_points(); ++k) {
    put(p.times[k]);
    const auto x = p.state(k);
    for (double v : x) {
      os << ",";
      put(v);
    }
    for (int j = 0; j < p.dim_u; ++j) {
      os << ",";
      if (k + 1 < p.n_points()) put(p.control(k)[j]);
    }
    if (barrier) {
      xk.assign(x.begin(), x.end());
      os << ",";
      put(barrier->value(xk));
    }
    os << "\n";
  }
}

}  // namespace barrierlab

#endif  // BARRIERLAB_SDE_HPP
