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

#ifndef BARRIERLAB_FELLER_HPP
#define BARRIERLAB_FELLER_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "barrierlab/quadrature.hpp"
#include "barrierlab/special_functions.hpp"

namespace barrierlab {

/// Scalar diffusion on (0, inf) whose drift/diffusion ratio is the power
/// law  mu(h) / sigma(h)^2 = gamma h^(-p).  The scale function depends
/// on this ratio only; sigma enters the speed function separately.
///
/// Note on the ratio: the inner integral of the scale function uses
/// mu / sigma^2 (drift over squared diffusion), the standard form for
/// one-dimensional diffusions.
struct RatioSpec {
  double gamma = 0.0;
  double p = 0.0;
  bool sigma_lower_bounded = true;
  double c = 1.0;  // reference point of the scale integrals
};

inline void validate(const RatioSpec& s) {
  if (s.gamma < 0.0) throw std::invalid_argument("RatioSpec: gamma must be >= 0");
  if (s.p < 0.0) throw std::invalid_argument("RatioSpec: p must be >= 0");
  if (!(s.c > 0.0)) throw std::invalid_argument("RatioSpec: c must be > 0");
}

/// eta(y) = integral over [c, y] of gamma z^(-p) dz (closed form).
inline double ratio_primitive(const RatioSpec& s, double y) {
  if (s.gamma == 0.0) return 0.0;
  const double q = 1.0 - s.p;
  if (q == 0.0) return s.gamma * std::log(y / s.c);
  return (s.gamma / q) * (std::pow(y, q) - std::pow(s.c, q));
}

/// Integrand of the scale function: s'(y) = exp(-2 eta(y)).  Positive
/// everywhere, so s is strictly increasing.
inline double scale_derivative(const RatioSpec& s, double y) {
  return std::exp(-2.0 * ratio_primitive(s, y));
}

/// s(x) = integral over [c, x] of exp(-2 eta(y)) dy, adaptive quadrature.
/// Interior evaluation only (x > 0); limits are handled by scale_limits.
inline double scale_function_numeric(const RatioSpec& spec, double x, double abs_tol = 1e-9,
                                     double rel_tol = 1e-10) {
  validate(spec);
  if (!(x > 0.0)) throw std::domain_error("scale_function_numeric: x must be > 0");
  const auto f = [&spec](double y) { return scale_derivative(spec, y); };
  // Steep power-law integrands near 0 need room to subdivide.
  return integrate_or_throw(f, spec.c, x, abs_tol, rel_tol, 20000);
}

/// Closed-form s(x) where one exists: gamma = 0, p = 1, and p < 1 (via
/// the upper incomplete gamma).  No elementary form for p > 1.
inline std::optional<double> scale_closed_form(const RatioSpec& s, double x) {
  if (!(x > 0.0)) throw std::domain_error("scale_closed_form: x must be > 0");
  if (s.gamma == 0.0) return x - s.c;
  if (s.p == 1.0) {
    if (s.gamma == 0.5) return s.c * std::log(x / s.c);
    const double g2 = 2.0 * s.gamma;
    return (s.c - std::pow(s.c, g2) * std::pow(x, 1.0 - g2)) / (g2 - 1.0);
  }
  if (s.p < 1.0) {
    // t = (2 gamma / q) y^q maps s' onto a gamma-integrand:
    //   s(x) = d * (Gamma(1/q, t(c)) - Gamma(1/q, t(x))),
    //   d    = (1/q) exp(t(c)) (q / (2 gamma))^(1/q).
    const double q = 1.0 - s.p;
    const double a = 1.0 / q;
    const double tc = (2.0 * s.gamma / q) * std::pow(s.c, q);
    const double tx = (2.0 * s.gamma / q) * std::pow(x, q);
    const double d = (1.0 / q) * std::exp(tc) * std::pow(q / (2.0 * s.gamma), a);
    return d * (upper_incomplete_gamma(a, tc) - upper_incomplete_gamma(a, tx));
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Endpoint limits.

struct ScaleLimits {
  double at_zero = 0.0;  // -inf when divergent
  double at_inf = 0.0;   // +inf when divergent
};

struct LimitProbe {
  enum class Outcome { finite, infinite, inconclusive };
  Outcome outcome = Outcome::inconclusive;
  double value = 0.0;      // integral accumulated from c toward the endpoint
  double last_step = 0.0;  // magnitude of the final increment
};

/// Numeric probe of integral(c -> 0) of s'(y) dy by geometric refinement
/// of the lower edge.  The limit is declared infinite when the partial
/// integral exceeds 1e12 with non-decaying increments (or the integrand
/// overflows); finite when increments decay below tolerance before the
/// floor is reached; inconclusive otherwise.
inline LimitProbe probe_scale_limit_zero(const RatioSpec& s, double floor_x = 1e-6) {
  LimitProbe pr;
  const auto w = [&s](double y) { return scale_derivative(s, y); };
  double hi = s.c;
  double prev_inc = std::numeric_limits<double>::infinity();
  double partial = 0.0;
  while (hi > floor_x) {
    const double lo = std::max(floor_x, 0.5 * hi);
    if (-2.0 * ratio_primitive(s, lo) > 690.0) {  // exp overflow: certain divergence
      pr.outcome = LimitProbe::Outcome::infinite;
      return pr;
    }
    const double inc = integrate(w, lo, hi, 1e-12, 1e-10, 400).value;
    partial += inc;
    pr.value = partial;
    pr.last_step = inc;
    if (!std::isfinite(partial) || (partial > 1e12 && inc >= prev_inc)) {
      pr.outcome = LimitProbe::Outcome::infinite;
      return pr;
    }
    if (inc < prev_inc && inc <= std::max(1e-10, 1e-12 * partial)) {
      pr.outcome = LimitProbe::Outcome::finite;
      return pr;
    }
    prev_inc = inc;
    hi = lo;
  }
  pr.outcome = LimitProbe::Outcome::inconclusive;
  return pr;
}

/// Same toward +inf via the substitution y -> 1/u, refining u toward 0.
inline LimitProbe probe_scale_limit_inf(const RatioSpec& s, double cap_x = 1e6) {
  LimitProbe pr;
  const auto w = [&s](double u) {
    const double y = 1.0 / u;
    return scale_derivative(s, y) * y * y;
  };
  double hi = 1.0 / s.c;
  const double floor_u = 1.0 / cap_x;
  double prev_inc = std::numeric_limits<double>::infinity();
  double partial = 0.0;
  while (hi > floor_u) {
    const double lo = std::max(floor_u, 0.5 * hi);
    const double inc = integrate(w, lo, hi, 1e-12, 1e-10, 400).value;
    partial += inc;
    pr.value = partial;
    pr.last_step = inc;
    if (!std::isfinite(partial) || (partial > 1e12 && inc >= prev_inc)) {
      pr.outcome = LimitProbe::Outcome::infinite;
      return pr;
    }
    if (inc < prev_inc && inc <= std::max(1e-10, 1e-12 * partial)) {
      pr.outcome = LimitProbe::Outcome::finite;
      return pr;
    }
    prev_inc = inc;
    hi = lo;
  }
  pr.outcome = LimitProbe::Outcome::inconclusive;
  return pr;
}

namespace detail {

inline ScaleLimits scale_limits_analytic(const RatioSpec& s) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (s.gamma == 0.0) return {-s.c, inf};  // s(x) = x - c
  if (s.p == 1.0) {
    if (s.gamma > 0.5) return {-inf, s.c / (2.0 * s.gamma - 1.0)};
    if (s.gamma == 0.5) return {-inf, inf};
    return {s.c / (2.0 * s.gamma - 1.0), inf};
  }
  if (s.p < 1.0) {
    const double q = 1.0 - s.p;
    const double a = 1.0 / q;
    const double tc = (2.0 * s.gamma / q) * std::pow(s.c, q);
    const double d = (1.0 / q) * std::exp(tc) * std::pow(q / (2.0 * s.gamma), a);
    const double g_tc = upper_incomplete_gamma(a, tc);
    return {d * (g_tc - std::tgamma(a)), d * g_tc};  // Gamma(a, 0) = Gamma(a)
  }
  return {-inf, inf};  // p > 1
}

// Checks the analytic limit against quadrature at the probe point:
// against the closed form of s when one exists, otherwise against the
// guarded divergence probe.
inline void cross_check_zero(const RatioSpec& spec, double analytic) {
  constexpr double probe_x = 1e-6;
  if (-2.0 * ratio_primitive(spec, probe_x) > 690.0) {
    // Integrand overflows toward 0; only a divergent limit is consistent.
    if (!std::isinf(analytic))
      throw std::logic_error("scale limit cross-check failed at zero: integrand overflow");
    return;
  }
  if (const auto cf = scale_closed_form(spec, probe_x)) {
    const double num = scale_function_numeric(spec, probe_x, 1e-9, 1e-8);
    if (std::fabs(num - *cf) > 1e-6 * (1.0 + std::fabs(*cf)))
      throw std::logic_error("scale limit cross-check failed at zero: quadrature vs closed form");
    return;
  }
  const LimitProbe pr = probe_scale_limit_zero(spec, probe_x);
  if (std::isinf(analytic) && pr.outcome == LimitProbe::Outcome::finite)
    throw std::logic_error("scale limit cross-check failed at zero: probe found a finite limit");
  if (!std::isinf(analytic) && pr.outcome == LimitProbe::Outcome::infinite)
    throw std::logic_error("scale limit cross-check failed at zero: probe diverged");
}

inline void cross_check_inf(const RatioSpec& spec, double analytic) {
  constexpr double probe_x = 1e6;
  if (const auto cf = scale_closed_form(spec, probe_x)) {
    const double num = scale_function_numeric(spec, probe_x, 1e-9, 1e-8);
    if (std::fabs(num - *cf) > 1e-6 * (1.0 + std::fabs(*cf)))
      throw std::logic_error(
          "scale limit cross-check failed at infinity: quadrature vs closed form");
    return;
  }
  const LimitProbe pr = probe_scale_limit_inf(spec, probe_x);
  if (std::isinf(analytic) && pr.outcome == LimitProbe::Outcome::finite)
    throw std::logic_error(
        "scale limit cross-check failed at infinity: probe found a finite limit");
  if (!std::isinf(analytic) && pr.outcome == LimitProbe::Outcome::infinite)
    throw std::logic_error("scale limit cross-check failed at infinity: probe diverged");
}

}  // namespace detail

/// Endpoint limits of the scale function.  Values come from the closed
/// forms per parameter regime; each call cross-checks them against
/// quadrature at x = 1e-6 and x = 1e6.
inline ScaleLimits scale_limits(const RatioSpec& spec) {
  validate(spec);
  const ScaleLimits lim = detail::scale_limits_analytic(spec);
  detail::cross_check_zero(spec, lim.at_zero);
  detail::cross_check_inf(spec, lim.at_inf);
  return lim;
}

/// Speed function v(x) by nested adaptive quadrature:
///   v(x) = integral(c..x) s'(y) * integral(c..y) 2 / (s'(z) sigma(z)^2) dz dy.
inline double speed_function_numeric(const RatioSpec& spec,
                                     const std::function<double(double)>& sigma_profile, double x,
                                     double abs_tol = 1e-8) {
  validate(spec);
  if (!(x > 0.0)) throw std::domain_error("speed_function_numeric: x must be > 0");
  const auto inner = [&](double y) {
    const auto f = [&](double z) {
      const double sig = sigma_profile(z);
      if (!(sig > 0.0))
        throw std::domain_error("speed_function_numeric: sigma must be > 0 on the range");
      return 2.0 / (scale_derivative(spec, z) * sig * sig);
    };
    return integrate_or_throw(f, spec.c, y, abs_tol * 0.1, 1e-10, 2000);
  };
  const auto outer = [&](double y) { return scale_derivative(spec, y) * inner(y); };
  return integrate_or_throw(outer, spec.c, x, abs_tol, 1e-9, 2000);
}

// ---------------------------------------------------------------------------
// Classification.

enum class BoundaryCase {
  strictly_positive,             // s(0) = -inf, s(inf) finite
  hits_zero_with_positive_prob,  // both limits finite
  null_recurrent_boundary,       // s(0) = -inf, s(inf) = +inf
  outside_lemma_grid,            // any other pattern (e.g. finite, +inf)
};

enum class TriValue { one, zero, unknown };
enum class FiniteTimeVerdict { positive, zero, unknown };

inline const char* to_string(BoundaryCase c) {
  switch (c) {
    case BoundaryCase::strictly_positive: return "strictly_positive";
    case BoundaryCase::hits_zero_with_positive_prob: return "hits_zero_with_positive_prob";
    case BoundaryCase::null_recurrent_boundary: return "null_recurrent_boundary";
    case BoundaryCase::outside_lemma_grid: return "outside_lemma_grid";
  }
  return "?";
}

inline const char* to_string(TriValue v) {
  switch (v) {
    case TriValue::one: return "one";
    case TriValue::zero: return "zero";
    case TriValue::unknown: return "unknown";
  }
  return "?";
}

inline const char* to_string(FiniteTimeVerdict v) {
  switch (v) {
    case FiniteTimeVerdict::positive: return "positive";
    case FiniteTimeVerdict::zero: return "zero";
    case FiniteTimeVerdict::unknown: return "unknown";
  }
  return "?";
}

struct FellerClassification {
  double s_at_zero = 0.0;
  double s_at_inf = 0.0;
  BoundaryCase case_tag = BoundaryCase::outside_lemma_grid;
  struct Verdict {
    TriValue prob_inf_positive = TriValue::unknown;                // Pr(inf_t h_t > 0)
    FiniteTimeVerdict prob_T_finite = FiniteTimeVerdict::unknown;  // Pr(T < inf)
  } verdict;
};

/// Three-way boundary test from the scale-function limits.
///   (-inf, finite)   -> the process stays strictly positive.
///   (finite, finite) -> hits zero with positive probability; T is
///                       finite with positive probability when sigma is
///                       bounded below (the speed function is then
///                       finite at 0).
///   (-inf, +inf)     -> null recurrent: T = inf a.s., yet the process
///                       gets arbitrarily close to 0 (p = 1 with
///                       gamma = 1/2 lands here).
/// Other sign patterns fall outside the power-law dichotomy and are
/// reported unknown with the raw limits.
inline FellerClassification classify_boundary(const RatioSpec& spec) {
  const ScaleLimits lim = scale_limits(spec);
  FellerClassification out;
  out.s_at_zero = lim.at_zero;
  out.s_at_inf = lim.at_inf;
  const bool zero_div = std::isinf(lim.at_zero);
  const bool inf_div = std::isinf(lim.at_inf);
  if (zero_div && !inf_div) {
    out.case_tag = BoundaryCase::strictly_positive;
    out.verdict.prob_inf_positive = TriValue::one;
    out.verdict.prob_T_finite = FiniteTimeVerdict::zero;
  } else if (!zero_div && !inf_div) {
    out.case_tag = BoundaryCase::hits_zero_with_positive_prob;
    out.verdict.prob_inf_positive = TriValue::unknown;
    out.verdict.prob_T_finite =
        spec.sigma_lower_bounded ? FiniteTimeVerdict::positive : FiniteTimeVerdict::unknown;
  } else if (zero_div && inf_div) {
    out.case_tag = BoundaryCase::null_recurrent_boundary;
    out.verdict.prob_inf_positive = TriValue::zero;
    out.verdict.prob_T_finite = FiniteTimeVerdict::zero;
  } else {
    out.case_tag = BoundaryCase::outside_lemma_grid;
    out.verdict.prob_inf_positive = TriValue::unknown;
    out.verdict.prob_T_finite = FiniteTimeVerdict::unknown;
  }
  return out;
}

/// Hitting probability Pr(T < inf) from the scale function when both
/// limits are finite: (s(inf) - s(x0)) / (s(inf) - s(0)).  Returns 0/1
/// for the divergent regimes.
inline double hit_zero_probability(const RatioSpec& spec, double x0) {
  if (!(x0 > 0.0)) throw std::domain_error("hit_zero_probability: x0 must be > 0");
  const ScaleLimits lim = detail::scale_limits_analytic(spec);
  if (std::isinf(lim.at_zero)) return 0.0;
  if (std::isinf(lim.at_inf)) return 1.0;  // finite s(0), s(inf) = inf: reaches 0 a.s.
  const auto s0 = scale_closed_form(spec, x0);
  const double sx = s0 ? *s0 : scale_function_numeric(spec, x0);
  return (lim.at_inf - sx) / (lim.at_inf - lim.at_zero);
}

}  // namespace barrierlab

#endif  // BARRIERLAB_FELLER_HPP
