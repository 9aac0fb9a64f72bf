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

#ifndef BARRIERLAB_LINALG_HPP
#define BARRIERLAB_LINALG_HPP

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace barrierlab {

using Vec = std::vector<double>;

/// Dense row-major matrix, just big enough for state-space dimensions
/// (n_x, n_u, n_w are single digits in every experiment shipped here).
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

  void resize(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    a_.assign(rows * cols, 0.0);
  }

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows_ && j < cols_);
    return a_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows_ && j < cols_);
    return a_[i * cols_ + j];
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> a_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2_sq(std::span<const double> a) { return dot(a, a); }

inline double norm2(std::span<const double> a) { return std::sqrt(norm2_sq(a)); }

/// y += M x
inline void matvec_add(const Mat& m, std::span<const double> x, std::span<double> y) {
  assert(x.size() == m.cols() && y.size() == m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * x[j];
    y[i] += s;
  }
}

/// r = x^T M  (row vector of length cols)
inline void vecmat(std::span<const double> x, const Mat& m, std::span<double> r) {
  assert(x.size() == m.rows() && r.size() == m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) s += x[i] * m(i, j);
    r[j] = s;
  }
}

/// Tr(S^T H S) = sum over columns k of S of  s_k^T H s_k.
inline double trace_congruence(const Mat& sigma, const Mat& hess) {
  assert(hess.rows() == hess.cols() && hess.rows() == sigma.rows());
  double tr = 0.0;
  for (std::size_t k = 0; k < sigma.cols(); ++k) {
    for (std::size_t i = 0; i < sigma.rows(); ++i) {
      double hs = 0.0;
      for (std::size_t j = 0; j < sigma.rows(); ++j) hs += hess(i, j) * sigma(j, k);
      tr += sigma(i, k) * hs;
    }
  }
  return tr;
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

inline bool all_finite(const Mat& m) {
  return all_finite(std::span<const double>(m.data(), m.rows() * m.cols()));
}

}  // namespace barrierlab

#endif  // BARRIERLAB_LINALG_HPP
