#pragma once

// Scalar helpers shared by double and ad::Var code paths. Templated model
// code calls these unqualified so ADL picks the Var overloads.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>

#include "bmppi/ad/tape.hpp"

namespace bmppi {

inline constexpr double kPi = std::numbers::pi;

inline double value(double x) { return x; }
using ad::value;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
using ad::sigmoid;

inline double dot(const double* a, const double* b, std::size_t n, double bias = 0.0) {
  double s = bias;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}
using ad::dot;

inline double norm2(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return std::sqrt(s);
}
using ad::norm2;

template <class T>
T square(const T& x) {
  return x * x;
}

template <class T>
double sign_of(const T& x) {
  const double v = value(x);
  return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
}

// Wraps an angle to (-pi, pi]. The shift is a constant so gradients pass
// through unchanged.
template <class T>
T wrap_angle(const T& a) {
  const double v = value(a);
  double w = std::remainder(v, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return a + (w - v);
}

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

}  // namespace bmppi
