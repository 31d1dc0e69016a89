#pragma once

// Gaussian negative log-likelihood of observed reduced states under a
// sequence of predicted beliefs, plus the lateral-state regularizer.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "bmppi/core/small_matrix.hpp"

namespace bmppi::learn {

inline constexpr double kRegularizationWeight = 0.2;

class SingularCovariance : public std::runtime_error {
 public:
  SingularCovariance(int step, int pivot)
      : std::runtime_error("covariance not positive definite at step " + std::to_string(step) + " (pivot " +
                           std::to_string(pivot) + ")"),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// 1/2 e^T P^-1 e + 1/2 ln|P| via a Cholesky factorization. The psi error
// (index 2) is wrapped to (-pi, pi].
template <class T, int N>
T gaussian_nll(const Vec<T, N>& predicted, const Mat<T, N, N>& cov, const Vec<T, N>& truth, int step = 0,
               int angle_index = 2) {
  using std::log;
  using std::sqrt;
  std::array<T, N> e;
  for (int i = 0; i < N; ++i) {
    e[i] = truth(i, 0) - predicted(i, 0);
    if (i == angle_index) e[i] = wrap_angle(e[i]);
  }
  Mat<T, N, N> l = Mat<T, N, N>::zero();
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j <= i; ++j) {
      T s = cov(i, j);
      for (int k = 0; k < j; ++k) s = s - l(i, k) * l(j, k);
      if (i == j) {
        if (!(value(s) > 0.0) || !std::isfinite(value(s))) throw SingularCovariance(step, i);
        l(i, i) = sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  // Forward solve L z = e; e^T P^-1 e = |z|^2.
  std::array<T, N> z;
  T quad(0.0), logdet(0.0);
  for (int i = 0; i < N; ++i) {
    T s = e[i];
    for (int k = 0; k < i; ++k) s = s - l(i, k) * z[k];
    z[i] = s / l(i, i);
    quad = quad + z[i] * z[i];
    logdet = logdet + log(l(i, i));
  }
  return quad * 0.5 + logdet;
}

// Sum over steps of the NLL plus weight * ||lateral error||_2 per step, where
// the lateral error is (vy, yaw_rate) truth minus prediction.
template <class T>
T nll_loss(std::span<const Vec4<T>> predicted, std::span<const Mat4<T>> cov, std::span<const Vec4<T>> truth,
           std::span<const std::array<T, 2>> lateral_pred, std::span<const std::array<T, 2>> lateral_truth,
           double weight = kRegularizationWeight) {
  if (predicted.size() != truth.size() || cov.size() != truth.size())
    throw std::invalid_argument("prediction and truth sequences differ in length");
  if (lateral_pred.size() != lateral_truth.size())
    throw std::invalid_argument("lateral sequences differ in length");
  T total(0.0);
  for (std::size_t t = 0; t < truth.size(); ++t)
    total = total + gaussian_nll<T, 4>(predicted[t], cov[t], truth[t], static_cast<int>(t));
  if (weight != 0.0) {
    for (std::size_t t = 0; t < lateral_truth.size(); ++t) {
      const std::array<T, 2> d{lateral_truth[t][0] - lateral_pred[t][0], lateral_truth[t][1] - lateral_pred[t][1]};
      total = total + norm2(std::span<const T>(d)) * weight;
    }
  }
  return total;
}

}  // namespace bmppi::learn
