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

#ifndef BARRIERLAB_MODEL_HPP
#define BARRIERLAB_MODEL_HPP

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "barrierlab/linalg.hpp"

namespace barrierlab {

/// Control-affine diffusion  dx = (f(x) + g(x) u) dt + sigma(x) dW.
/// Evaluators fill caller-provided buffers so the stepping loop stays
/// allocation-free.  control_matrix may be empty when dim_u == 0.
struct SdeModel {
  int dim_x = 1;
  int dim_u = 0;
  int dim_w = 1;
  std::function<void(const Vec&, Vec&)> drift;            // f(x), dim_x
  std::function<void(const Vec&, Mat&)> control_matrix;   // g(x), dim_x x dim_u
  std::function<void(const Vec&, Mat&)> diffusion;        // sigma(x), dim_x x dim_w
};

/// Thrown when f, g or sigma produces a non-finite entry; carries the
/// offending state.
class ModelEvalError : public std::runtime_error {
 public:
  ModelEvalError(const std::string& which, const Vec& state)
      : std::runtime_error(format(which, state)), state_(state) {}
  const Vec& state() const { return state_; }

 private:
  static std::string format(const std::string& which, const Vec& state) {
    std::ostringstream os;
    os << "model evaluation of " << which << " is non-finite at state [";
    for (std::size_t i = 0; i < state.size(); ++i) os << (i ? ", " : "") << state[i];
    os << "]";
    return os.str();
  }
  Vec state_;
};

/// Barrier function h with analytic gradient and Hessian.  The safe set
/// is {h >= 0}.
struct BarrierSpec {
  std::function<double(const Vec&)> value;
  std::function<void(const Vec&, Vec&)> gradient;  // row vector, dim_x
  std::function<void(const Vec&, Mat&)> hessian;   // dim_x x dim_x
};

// ---------------------------------------------------------------------------
// Builders for the scalar plants used across the experiments and tests.

inline SdeModel scalar_model(std::function<double(double)> f,
                             std::function<double(double)> g,
                             std::function<double(double)> sigma) {
  SdeModel m;
  m.dim_x = 1;
  m.dim_u = g ? 1 : 0;
  m.dim_w = 1;
  m.drift = [f = std::move(f)](const Vec& x, Vec& out) { out[0] = f ? f(x[0]) : 0.0; };
  if (g) m.control_matrix = [g = std::move(g)](const Vec& x, Mat& out) { out(0, 0) = g(x[0]); };
  m.diffusion = [sigma = std::move(sigma)](const Vec& x, Mat& out) {
    out(0, 0) = sigma ? sigma(x[0]) : 0.0;
  };
  return m;
}

/// dx = dW
inline SdeModel brownian_model() {
  return scalar_model(nullptr, nullptr, [](double) { return 1.0; });
}

/// dx = u dt + dW
inline SdeModel single_integrator_model() {
  return scalar_model(nullptr, [](double) { return 1.0; }, [](double) { return 1.0; });
}

/// x^(-p) for quarter-integer p via sqrt composition, else std::pow.
/// The sweep grids live on quarter powers and pow() dominates the step
/// cost otherwise.
inline std::function<double(double)> negative_power_fn(double p) {
  const double q4 = 4.0 * p;
  if (q4 == std::floor(q4) && q4 >= 0.0 && q4 <= 16.0) {
    const int n = static_cast<int>(q4);
    return [n](double x) {
      const double r = std::sqrt(x);
      const double r4 = std::sqrt(r);
      double acc = 1.0;
      int k = n;
      while (k >= 4) {
        acc *= x;
        k -= 4;
      }
      if (k >= 2) {
        acc *= r;
        k -= 2;
      }
      if (k == 1) acc *= r4;
      return 1.0 / acc;
    };
  }
  return [p](double x) { return std::pow(x, -p); };
}

/// dh = gamma h^(-p) dt + dW on h > 0 (uncontrolled).
inline SdeModel power_law_drift_model(double gamma, double p) {
  if (gamma < 0.0 || p < 0.0) throw std::invalid_argument("power_law_drift_model: gamma, p >= 0");
  auto hp = negative_power_fn(p);
  return scalar_model([gamma, hp = std::move(hp)](double h) { return gamma * hp(h); }, nullptr,
                      [](double) { return 1.0; });
}

inline BarrierSpec scalar_barrier(std::function<double(double)> h,
                                  std::function<double(double)> dh,
                                  std::function<double(double)> d2h) {
  BarrierSpec b;
  b.value = [h = std::move(h)](const Vec& x) { return h(x[0]); };
  b.gradient = [dh = std::move(dh)](const Vec& x, Vec& out) { out[0] = dh(x[0]); };
  b.hessian = [d2h = std::move(d2h)](const Vec& x, Mat& out) { out(0, 0) = d2h(x[0]); };
  return b;
}

/// h(x) = x, the half-line safe set.
inline BarrierSpec identity_barrier() {
  return scalar_barrier([](double x) { return x; }, [](double) { return 1.0; },
                        [](double) { return 0.0; });
}

/// Central-difference check of grad/hess against h itself; returns the
/// worst relative error seen over the supplied states.
inline double barrier_derivative_error(const BarrierSpec& barrier, const std::vector<Vec>& states,
                                       double step = 1e-4) {
  double worst = 0.0;
  Vec grad;
  Mat hess;
  for (const Vec& x : states) {
    const std::size_t n = x.size();
    grad.assign(n, 0.0);
    hess.resize(n, n);
    barrier.gradient(x, grad);
    barrier.hessian(x, hess);
    Vec xp = x, xm = x;
    for (std::size_t i = 0; i < n; ++i) {
      xp[i] = x[i] + step;
      xm[i] = x[i] - step;
      const double fd = (barrier.value(xp) - barrier.value(xm)) / (2.0 * step);
      const double scale = std::max({1.0, std::fabs(grad[i]), std::fabs(fd)});
      worst = std::max(worst, std::fabs(fd - grad[i]) / scale);
      // diagonal Hessian entry
      const double fd2 =
          (barrier.value(xp) - 2.0 * barrier.value(x) + barrier.value(xm)) / (step * step);
      const double scale2 = std::max({1.0, std::fabs(hess(i, i)), std::fabs(fd2)});
      worst = std::max(worst, std::fabs(fd2 - hess(i, i)) / scale2);
      xp[i] = x[i];
      xm[i] = x[i];
    }
  }
  return worst;
}

}  // namespace barrierlab

#endif  // BARRIERLAB_MODEL_HPP
