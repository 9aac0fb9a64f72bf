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

#ifndef BARRIERLAB_ALPHA_HPP
#define BARRIERLAB_ALPHA_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace barrierlab {

/// Strictly increasing function on [0, inf) with alpha(0) = 0 and a
/// closed-form inverse.  Two families: linear k*s and power k*s^r.
class AlphaFn {
 public:
  enum class Family { linear, power };

  static AlphaFn linear(double k) { return AlphaFn(Family::linear, k, 1.0); }
  static AlphaFn power(double k, double r) { return AlphaFn(Family::power, k, r); }
  static AlphaFn identity() { return linear(1.0); }

  double operator()(double s) const {
    if (s < 0.0) throw std::domain_error("AlphaFn: argument must be >= 0");
    return family_ == Family::linear ? k_ * s : k_ * std::pow(s, r_);
  }

  double inverse(double y) const {
    if (y < 0.0) throw std::domain_error("AlphaFn::inverse: argument must be >= 0");
    return family_ == Family::linear ? y / k_ : std::pow(y / k_, 1.0 / r_);
  }

  Family family() const { return family_; }
  double k() const { return k_; }
  double r() const { return r_; }

  std::string describe() const {
    return family_ == Family::linear ? "linear(k=" + std::to_string(k_) + ")"
                                     : "power(k=" + std::to_string(k_) +
                                           ", r=" + std::to_string(r_) + ")";
  }

 private:
  AlphaFn(Family family, double k, double r) : family_(family), k_(k), r_(r) {
    if (k <= 0.0) throw std::invalid_argument("AlphaFn: k must be > 0");
    if (r <= 0.0) throw std::invalid_argument("AlphaFn: r must be > 0");
  }

  Family family_;
  double k_;
  double r_;
};

}  // namespace barrierlab

#endif  // BARRIERLAB_ALPHA_HPP
