#pragma once

// Scalar linear-Gaussian system x' = a x + w, w ~ N(0, q dt), used to check
// that the multistep NLL recovers a known process-noise level. The learned
// noise is q = sigmoid(raw) * scale, matching the vehicle model's channels.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "bmppi/ad/tape.hpp"
#include "bmppi/core/scalar.hpp"
#include "bmppi/learn/nll.hpp"

namespace bmppi::learn {

struct ScalarSeries {
  double a = 1.0;
  double dt = 0.02;
  std::vector<double> x;
};

inline std::vector<ScalarSeries> make_scalar_dataset(int n_traj, int length, double a, double q, double dt,
                                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ScalarSeries> out(static_cast<std::size_t>(n_traj));
  for (auto& s : out) {
    s.a = a;
    s.dt = dt;
    s.x.resize(static_cast<std::size_t>(length));
    s.x[0] = n(rng);
    for (int t = 1; t < length; ++t) s.x[t] = a * s.x[t - 1] + std::sqrt(q * dt) * n(rng);
  }
  return out;
}

// Open-loop multistep prediction from x[0] with P0 = 0; step 0 is skipped.
template <class T>
T scalar_rollout_nll(const T& q, const ScalarSeries& s) {
  T p(0.0);
  double mean = s.x[0];
  T total(0.0);
  for (std::size_t t = 1; t < s.x.size(); ++t) {
    mean *= s.a;
    p = p * (s.a * s.a) + q * s.dt;
    Vec<T, 1> m, y;
    Mat<T, 1, 1> c;
    m(0, 0) = T(mean);
    y(0, 0) = T(s.x[t]);
    c(0, 0) = p;
    total = total + gaussian_nll<T, 1>(m, c, y, static_cast<int>(t), -1);
  }
  return total;
}

struct ScalarNoiseModel {
  double scale = 1.0;

  double noise(std::span<const double> w) const { return sigmoid(w[0]) * scale; }

  double operator()(std::span<const double> w, const ScalarSeries& s, std::span<double> grad) const {
    if (grad.empty()) return scalar_rollout_nll<double>(noise(w), s);
    ad::Tape tape;
    ad::TapeScope scope(tape);
    const ad::Var raw = ad::Var::leaf(w[0]);
    const ad::Var loss = scalar_rollout_nll<ad::Var>(sigmoid(raw) * scale, s);
    const ad::Var leaves[1] = {raw};
    grad[0] = ad::gradient(tape, loss, leaves)[0];
    return loss.value();
  }
};

// Closed-form maximizer of the same likelihood: P_t = q c_t with
// c_t = dt * sum_{k<t} a^{2k}, so q* = mean over steps of e_t^2 / c_t.
inline double closed_form_noise(std::span<const ScalarSeries> data) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : data) {
    double mean = s.x[0], c = 0.0;
    for (std::size_t t = 1; t < s.x.size(); ++t) {
      mean *= s.a;
      c = c * s.a * s.a + s.dt;
      const double e = s.x[t] - mean;
      sum += e * e / c;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("no steps in dataset");
  return sum / static_cast<double>(count);
}

}  // namespace bmppi::learn
