#pragma once

// Cholesky factor of the reduced covariance and the 2n+1 sigma points built
// from its columns. The dimension order (px, py, psi, vx) is the belief
// order, so later dimensions pick up the residual after position and yaw.

#include <array>
#include <cmath>
#include <optional>

#include "bmppi/belief/belief.hpp"
#include "bmppi/core/small_matrix.hpp"

namespace bmppi::risk {

inline constexpr double kNotPsdPivot = -1e-12;

// Row-by-row (Cholesky-Banachiewicz) factor P = L L^T. Pivots in
// [kNotPsdPivot, 0] are treated as zero so semidefinite inputs still factor;
// anything more negative returns nullopt.
template <int N>
std::optional<Mat<double, N, N>> cholesky(const Mat<double, N, N>& p) {
  Mat<double, N, N> l = Mat<double, N, N>::zero();
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = p(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (!std::isfinite(s) || s < kNotPsdPivot) return std::nullopt;
        l(i, i) = s > 0.0 ? std::sqrt(s) : 0.0;
      } else {
        l(i, j) = l(j, j) > 0.0 ? s / l(j, j) : 0.0;
      }
    }
  }
  return l;
}

inline constexpr int kReducedDim = 4;
inline constexpr int kNumSigmaPoints = 2 * kReducedDim + 1;

struct SigmaPointSet {
  // Point 0 is the mean; points 1..4 add c_sigma * L_j and 5..8 subtract it.
  std::array<std::array<double, kReducedDim>, kNumSigmaPoints> points{};
  double c_sigma = 2.0;
  bool degenerate = false;  // covariance was not PSD, all points sit on the mean

  // The full mean state with the reduced entries of point k substituted.
  vehicle::VehicleState state(const vehicle::VehicleState& mean, int k) const {
    auto s = mean;
    s.px = points[k][0];
    s.py = points[k][1];
    s.psi = points[k][2];
    s.vx = points[k][3];
    return s;
  }
};

inline SigmaPointSet sigma_points(const std::array<double, kReducedDim>& mean, const Mat4<double>& cov,
                                  double c_sigma) {
  SigmaPointSet s;
  s.c_sigma = c_sigma;
  const auto l = cholesky<kReducedDim>(cov);
  s.degenerate = !l.has_value();
  for (auto& p : s.points) p = mean;
  if (!l) return s;
  for (int j = 0; j < kReducedDim; ++j) {
    for (int i = 0; i < kReducedDim; ++i) {
      const double d = c_sigma * (*l)(i, j);
      s.points[1 + j][i] += d;
      s.points[1 + kReducedDim + j][i] -= d;
    }
  }
  return s;
}

inline SigmaPointSet sigma_points(const belief::Belief& b, double c_sigma) {
  return sigma_points({b.mean.px, b.mean.py, b.mean.psi, b.mean.vx}, b.cov, c_sigma);
}

}  // namespace bmppi::risk
