#pragma once

// Fixed-size row-major matrices generic over the scalar type, so the same
// covariance algebra runs on double for planning and on ad::Var for training.

#include <array>
#include <cmath>
#include <cstddef>

#include "bmppi/core/scalar.hpp"

namespace bmppi {

template <class T, int R, int C>
struct Mat {
  std::array<T, static_cast<std::size_t>(R * C)> data{};

  static constexpr int rows() { return R; }
  static constexpr int cols() { return C; }

  T& operator()(int r, int c) { return data[static_cast<std::size_t>(r * C + c)]; }
  const T& operator()(int r, int c) const { return data[static_cast<std::size_t>(r * C + c)]; }

  static Mat zero() {
    Mat m;
    m.data.fill(T(0.0));
    return m;
  }
  static Mat identity() {
    static_assert(R == C);
    Mat m = zero();
    for (int i = 0; i < R; ++i) m(i, i) = T(1.0);
    return m;
  }

  template <class U>
  Mat<U, R, C> cast() const {
    Mat<U, R, C> m;
    for (std::size_t i = 0; i < data.size(); ++i) m.data[i] = U(data[i]);
    return m;
  }
};

template <class T, int N>
using Vec = Mat<T, N, 1>;

template <class T>
using Mat4 = Mat<T, 4, 4>;
template <class T>
using Vec4 = Vec<T, 4>;

template <class T, int R, int K, int C>
Mat<T, R, C> operator*(const Mat<T, R, K>& a, const Mat<T, K, C>& b) {
  Mat<T, R, C> out;
  std::array<T, K> col;
  for (int c = 0; c < C; ++c) {
    for (int k = 0; k < K; ++k) col[k] = b(k, c);
    for (int r = 0; r < R; ++r) out(r, c) = dot(&a.data[static_cast<std::size_t>(r * K)], col.data(), K);
  }
  return out;
}

template <class T, int R, int C>
Mat<T, R, C> operator+(const Mat<T, R, C>& a, const Mat<T, R, C>& b) {
  Mat<T, R, C> out;
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

template <class T, int R, int C>
Mat<T, R, C> operator-(const Mat<T, R, C>& a, const Mat<T, R, C>& b) {
  Mat<T, R, C> out;
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] - b.data[i];
  return out;
}

template <class T, int R, int C, class S>
Mat<T, R, C> scaled(const Mat<T, R, C>& a, const S& s) {
  Mat<T, R, C> out;
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * s;
  return out;
}

template <class T, int R, int C>
Mat<T, C, R> transpose(const Mat<T, R, C>& a) {
  Mat<T, C, R> out;
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) out(c, r) = a(r, c);
  return out;
}

template <class T, int N>
Mat<T, N, N> symmetrize(const Mat<T, N, N>& a) {
  Mat<T, N, N> out;
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c) out(r, c) = (a(r, c) + a(c, r)) * 0.5;
  return out;
}

template <class T, int N>
T trace(const Mat<T, N, N>& a) {
  T s = a(0, 0);
  for (int i = 1; i < N; ++i) s = s + a(i, i);
  return s;
}

template <class T, int R, int C>
double max_abs_diff(const Mat<T, R, C>& a, const Mat<T, R, C>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(value(a.data[i]) - value(b.data[i])));
  return m;
}

template <class T, int R, int C>
bool all_finite(const Mat<T, R, C>& a) {
  for (const auto& x : a.data)
    if (!std::isfinite(value(x))) return false;
  return true;
}

template <class T, int R, int C>
Mat<double, R, C> values_of(const Mat<T, R, C>& a) {
  Mat<double, R, C> out;
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = value(a.data[i]);
  return out;
}

}  // namespace bmppi
