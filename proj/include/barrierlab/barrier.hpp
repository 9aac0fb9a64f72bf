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

#ifndef BARRIERLAB_BARRIER_HPP
#define BARRIERLAB_BARRIER_HPP

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>

#include "barrierlab/alpha.hpp"
#include "barrierlab/linalg.hpp"
#include "barrierlab/model.hpp"

namespace barrierlab {

// ---------------------------------------------------------------------------
// Ito push-forward of a scalar barrier through the state SDE.

/// Drift and diffusion of h(x_t):
///   mu_tilde    = grad_h (f + g u) + 1/2 Tr(sigma^T hess_h sigma)
///   sigma_tilde = grad_h sigma          (row vector, one entry per noise dim)
struct ItoPush {
  double mu_tilde = 0.0;
  Vec sigma_tilde;
  double sigma_tilde_sq() const { return norm2_sq(sigma_tilde); }
};

inline ItoPush ito_push(const BarrierSpec& barrier, const SdeModel& model, const Vec& x,
                        const Vec& u) {
  const std::size_t nx = static_cast<std::size_t>(model.dim_x);
  const std::size_t nu = static_cast<std::size_t>(model.dim_u);
  const std::size_t nw = static_cast<std::size_t>(model.dim_w);

  Vec grad(nx), fx(nx, 0.0);
  Mat sig(nx, nw), hess(nx, nx);
  barrier.gradient(x, grad);
  barrier.hessian(x, hess);
  if (model.drift) model.drift(x, fx);
  model.diffusion(x, sig);
  if (!all_finite(fx) || !all_finite(sig)) throw ModelEvalError("f or sigma", x);

  if (nu > 0 && !u.empty()) {
    Mat g(nx, nu);
    model.control_matrix(x, g);
    if (!all_finite(g)) throw ModelEvalError("g", x);
    matvec_add(g, u, fx);  // fx = f + g u
  }

  ItoPush out;
  out.mu_tilde = dot(grad, fx) + 0.5 * trace_congruence(sig, hess);
  out.sigma_tilde.assign(nw, 0.0);
  vecmat(grad, sig, out.sigma_tilde);
  return out;
}

// ---------------------------------------------------------------------------
// The three barrier conditions, written as margins: condition holds at
// (x, u) iff the margin is >= 0.

inline double require_interior(const BarrierSpec& barrier, const Vec& x) {
  const double h = barrier.value(x);
  if (!(h > 0.0)) throw std::domain_error("barrier condition evaluated outside {h > 0}");
  return h;
}

/// Plain zero-CBF margin: mu_tilde + h.
inline double zcbf_margin(const BarrierSpec& barrier, const SdeModel& model, const Vec& x,
                          const Vec& u) {
  const double h = require_interior(barrier, x);
  return ito_push(barrier, model, x, u).mu_tilde + h;
}

/// Modified condition: mu_tilde - sigma_tilde^2/h + h^2 alpha3(h).
inline double modified_zcbf_margin(const BarrierSpec& barrier, const SdeModel& model, const Vec& x,
                                   const Vec& u, const AlphaFn& alpha3) {
  const double h = require_interior(barrier, x);
  const ItoPush ip = ito_push(barrier, model, x, u);
  return ip.mu_tilde - ip.sigma_tilde_sq() / h + h * h * alpha3(h);
}

/// Drift of B = 1/h expressed through the drift/diffusion of h:
///   -h^-2 mu_tilde + h^-3 sigma_tilde^2.
inline double reciprocal_drift(double h_val, double mu_tilde, double sigma_tilde_sq) {
  if (!(h_val > 0.0)) throw std::domain_error("reciprocal_drift: h must be > 0");
  const double inv = 1.0 / h_val;
  return inv * inv * (-mu_tilde + inv * sigma_tilde_sq);
}

/// Reciprocal barrier B = 1/h with its class-kappa envelope functions.
struct ReciprocalSpec {
  BarrierSpec base;  // h
  AlphaFn alpha1 = AlphaFn::identity();
  AlphaFn alpha2 = AlphaFn::identity();
  AlphaFn alpha3 = AlphaFn::identity();

  double barrier_value(const Vec& x) const { return 1.0 / require_interior(base, x); }
};

/// RCBF margin: alpha3(h) - drift of B at (x, u).
inline double rcbf_margin(const ReciprocalSpec& spec, const SdeModel& model, const Vec& x,
                          const Vec& u) {
  const double h = require_interior(spec.base, x);
  const ItoPush ip = ito_push(spec.base, model, x, u);
  return spec.alpha3(h) - reciprocal_drift(h, ip.mu_tilde, ip.sigma_tilde_sq());
}

/// Checks 1/alpha1(h) <= B <= 1/alpha2(h) on the given interior states;
/// returns the largest violation (0 when the envelope holds).
inline double reciprocal_bounds_violation(const ReciprocalSpec& spec,
                                          const std::vector<Vec>& states) {
  double worst = 0.0;
  for (const Vec& x : states) {
    const double h = require_interior(spec.base, x);
    const double B = 1.0 / h;
    worst = std::max(worst, 1.0 / spec.alpha1(h) - B);
    worst = std::max(worst, B - 1.0 / spec.alpha2(h));
  }
  return std::max(worst, 0.0);
}

// ---------------------------------------------------------------------------
// Min-norm control under a single linear constraint a.u >= b.

/// Returns the smallest-norm u with a.u >= b, or nullopt when no such u
/// exists (a = 0 with b > 0, or the box bound clips the solution).
inline std::optional<Vec> min_norm_control(std::span<const double> a, double b,
                                           std::optional<double> u_max = std::nullopt) {
  if (b <= 0.0) return Vec(a.size(), 0.0);
  const double n2 = norm2_sq(a);
  if (n2 <= 0.0) return std::nullopt;
  Vec u(a.size());
  const double scale = b / n2;
  for (std::size_t i = 0; i < a.size(); ++i) {
    u[i] = scale * a[i];
    if (u_max && std::fabs(u[i]) > *u_max) return std::nullopt;
  }
  return u;
}

// ---------------------------------------------------------------------------
// Controller synthesis.

enum class ControllerKind { none, zcbf, modified_zcbf, rcbf };

inline const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::none: return "none";
    case ControllerKind::zcbf: return "zcbf";
    case ControllerKind::modified_zcbf: return "modified_zcbf";
    case ControllerKind::rcbf: return "rcbf";
  }
  return "?";
}

struct ControllerSpec {
  ControllerKind kind = ControllerKind::none;
  AlphaFn alpha3 = AlphaFn::identity();  // used by modified_zcbf and rcbf
  std::optional<double> u_max;           // optional box |u_i| <= u_max
};

/// Per-state min-norm selection under the condition named in the spec.
/// Copyable; each simulation worker owns one instance (scratch buffers
/// are not shared).
class MinNormController {
 public:
  MinNormController() = default;  // kind none, no barrier

  MinNormController(ControllerSpec spec, BarrierSpec barrier, SdeModel model)
      : spec_(std::move(spec)), barrier_(std::move(barrier)), model_(std::move(model)) {
    const std::size_t nx = static_cast<std::size_t>(model_.dim_x);
    const std::size_t nu = static_cast<std::size_t>(model_.dim_u);
    const std::size_t nw = static_cast<std::size_t>(model_.dim_w);
    grad_.assign(nx, 0.0);
    fx_.assign(nx, 0.0);
    row_.assign(nu, 0.0);
    srow_.assign(nw, 0.0);
    g_.resize(nx, nu);
    sig_.resize(nx, nw);
    hess_.resize(nx, nx);
  }

  ControllerKind kind() const { return spec_.kind; }

  /// Fills u (resized to dim_u); returns false when the condition is
  /// infeasible at x.  Infeasibility is a value, not an error.
  bool operator()(const Vec& x, Vec& u) {
    const std::size_t nu = static_cast<std::size_t>(model_.dim_u);
    if (spec_.kind == ControllerKind::none) {
      u.assign(nu, 0.0);
      return true;
    }
    const double h = require_interior(barrier_, x);

    barrier_.gradient(x, grad_);
    barrier_.hessian(x, hess_);
    std::fill(fx_.begin(), fx_.end(), 0.0);
    if (model_.drift) model_.drift(x, fx_);
    model_.diffusion(x, sig_);
    if (!all_finite(fx_) || !all_finite(sig_)) throw ModelEvalError("f or sigma", x);

    // drift of h with u = 0
    const double mu0 = dot(grad_, fx_) + 0.5 * trace_congruence(sig_, hess_);

    // coefficient of u in the h-drift: grad_h g
    if (nu > 0) {
      model_.control_matrix(x, g_);
      if (!all_finite(g_)) throw ModelEvalError("g", x);
      vecmat(grad_, g_, row_);
    }

    double b = 0.0;
    double coeff = 1.0;
    switch (spec_.kind) {
      case ControllerKind::zcbf:
        b = -(mu0 + h);
        break;
      case ControllerKind::modified_zcbf: {
        vecmat(grad_, sig_, srow_);
        const double s2 = norm2_sq(srow_);
        b = -(mu0 - s2 / h + h * h * spec_.alpha3(h));
        break;
      }
      case ControllerKind::rcbf: {
        vecmat(grad_, sig_, srow_);
        const double s2 = norm2_sq(srow_);
        // B-drift(u) <= alpha3(h), with B = 1/h, is linear in u with row
        // -h^-2 grad_h g; normalized to a.u >= b form the row flips sign.
        coeff = 1.0 / (h * h);
        b = reciprocal_drift(h, mu0, s2) - spec_.alpha3(h);
        break;
      }
      default:
        break;
    }

    if (coeff != 1.0)
      for (double& r : row_) r *= coeff;

    auto sol = min_norm_control(std::span<const double>(row_.data(), nu), b, spec_.u_max);
    if (!sol) {
      u.assign(nu, 0.0);
      return false;
    }
    u = std::move(*sol);
    return true;
  }

 private:
  ControllerSpec spec_;
  BarrierSpec barrier_;
  SdeModel model_;
  Vec grad_, fx_, row_, srow_;
  Mat g_, sig_, hess_;
};

inline MinNormController make_controller(const ControllerSpec& spec, const BarrierSpec& barrier,
                                         const SdeModel& model) {
  return MinNormController(spec, barrier, model);
}

}  // namespace barrierlab

#endif  // BARRIERLAB_BARRIER_HPP
