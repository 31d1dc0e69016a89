#pragma once

// Gaussian belief over the reduced state (px, py, psi, vx): full-state mean
// plus a 4x4 covariance, advanced by the hybrid parametric + learned model.

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmppi/core/small_matrix.hpp"
#include "bmppi/learn/layers.hpp"
#include "bmppi/learn/network_params.hpp"
#include "bmppi/vehicle/dynamics.hpp"
#include "bmppi/vehicle/jacobians.hpp"

namespace bmppi::belief {

using vehicle::BasicVehicleState;
using vehicle::ControlInput;
using vehicle::SensorReadings;

template <class T>
struct BasicBelief {
  BasicVehicleState<T> mean;
  Mat4<T> cov = Mat4<T>::zero();

  Vec4<T> reduced_mean() const {
    Vec4<T> v;
    v(0, 0) = mean.px;
    v(1, 0) = mean.py;
    v(2, 0) = mean.psi;
    v(3, 0) = mean.vx;
    return v;
  }
};

using Belief = BasicBelief<double>;

// Feedback gains from reduced-state error to (longitudinal accel, wheel angle).
struct GainSet {
  Mat<double, 2, 4> k = Mat<double, 2, 4>::zero();

  static GainSet open_loop() { return {}; }
  static GainSet tracking(double speed_gain = 2.0, double heading_gain = 1.0) {
    GainSet g;
    g.k(0, 3) = speed_gain;
    g.k(1, 2) = heading_gain;
    return g;
  }
  bool is_zero() const {
    for (double v : k.data)
      if (v != 0.0) return false;
    return true;
  }
};

// Maps the 10 upper-triangle entries (row-major) of Q' to a symmetric matrix.
// Diagonal: sigmoid(raw) * scale. Off-diagonal: tanh(raw) * min(d_i, d_j) / 3,
// which keeps the result diagonally dominant and therefore PSD.
template <class T>
Mat4<T> unstructured_noise(std::span<const T> raw, std::span<const T> scale) {
  Mat4<T> k = Mat4<T>::zero();
  int at = 0;
  for (int r = 0; r < 4; ++r)
    for (int c = r; c < 4; ++c, ++at)
      if (r == c) k(r, r) = sigmoid(raw[at]) * scale[r];
  at = 0;
  for (int r = 0; r < 4; ++r)
    for (int c = r; c < 4; ++c) {
      if (r != c) {
        using std::tanh;
        const T& lo = value(k(r, r)) <= value(k(c, c)) ? k(r, r) : k(c, c);
        k(r, c) = tanh(raw[at]) * lo * (1.0 / 3.0);
        k(c, r) = k(r, c);
      }
      ++at;
    }
  return k;
}

// Q = G diag(sigmoid(q) * channel_scale) G^T + kappa(Q'). Either term may be
// absent (empty span).
template <class T>
Mat4<T> assemble_q(std::span<const T> q_raw, std::span<const T> qprime_raw, const Mat4<T>& g,
                   std::span<const T> channel_scale, std::span<const T> unstructured_scale) {
  Mat4<T> q = Mat4<T>::zero();
  if (!q_raw.empty()) {
    std::array<T, 4> var;
    for (int k = 0; k < 4; ++k) var[k] = sigmoid(q_raw[k]) * channel_scale[k];
    for (int r = 0; r < 4; ++r)
      for (int c = r; c < 4; ++c) {
        std::array<T, 4> a, b;
        for (int k = 0; k < 4; ++k) {
          a[k] = g(r, k) * var[k];
          b[k] = g(c, k);
        }
        q(r, c) = dot(a.data(), b.data(), 4);
        q(c, r) = q(r, c);
      }
  }
  if (!qprime_raw.empty()) q = q + unstructured_noise(qprime_raw, unstructured_scale);
  return q;
}

// P' = A P A^T + Q dt, symmetrized.
template <class T>
Mat4<T> propagate_covariance(const Mat4<T>& p, const Mat4<T>& a, const Mat4<T>& q, double dt) {
  return symmetrize(Mat4<T>(a * p * transpose(a) + scaled(q, dt)));
}

// Process noise used when no networks are supplied: constant channel
// intensities (per second) and an optional constant diagonal.
struct FixedNoise {
  std::array<double, 4> channel{};
  std::array<double, 4> unstructured{};
};

inline constexpr int kMaxHidden = 32;

template <class T>
struct Hidden {
  std::array<T, kMaxHidden> mean{};
  std::array<T, kMaxHidden> noise{};
  std::array<T, kMaxHidden> joint{};
};

struct HistoryFrame {
  vehicle::VehicleState state;
  ControlInput control;
  SensorReadings readings;
};

template <class T>
void state_features(const BasicVehicleState<T>& x, T* out) {
  out[0] = x.vx;
  out[1] = x.vy;
  out[2] = x.yaw_rate;
  out[3] = x.brake;
  out[4] = x.rpm * vehicle::kRpmInputScale;
  out[5] = x.steer;
  out[6] = x.steer_rate;
}

template <class T>
void reading_features(const ControlInput& u, const SensorReadings& y, T* out) {
  out[0] = T(u.throttle);
  out[1] = T(u.brake);
  out[2] = T(u.steer);
  out[3] = T(y.nx);
  out[4] = T(y.ny);
  out[5] = T(y.nz);
}

inline constexpr double kForceFeatureScale = 1e-3;
inline constexpr double kForceOutputScale = 1e3;

template <class T>
struct StepInfo {
  Mat4<T> a;
  Mat4<T> g;
  Mat4<T> q;
  std::array<T, 4> prior_force{};
  // Learned mean correction: force-space (fx, fyf, fyb, fr), or body
  // accelerations (vx, vy, yaw) for the direct variant.
  std::array<T, 4> correction{};
};

// One hybrid model instance. Holds non-owning views of the weights so the
// same code runs on doubles and on tape variables.
template <class T>
class BeliefModel {
 public:
  struct Weights {
    std::span<const T> nets;
    std::span<const T> engine;
    std::span<const T> steer;
  };

  BeliefModel(const vehicle::ModelParams& model, const learn::NetworkParams* nets, Weights w, GainSet gains,
              double dt, FixedNoise fixed = {})
      : model_(&model), nets_(nets), w_(w), gains_(gains), dt_(dt), fixed_(fixed) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (nets_) {
      layout_ = nets_->layout();
      variant_ = nets_->variant;
      if (w_.nets.size() != layout_.total) throw std::invalid_argument("weight span does not match network layout");
      delay_shape_ = &nets_->delay;
    } else {
      delay_shape_ = &model.delay;
    }
    if (w_.engine.size() != delay_shape_->engine.weights.size() || w_.steer.size() != delay_shape_->steer.weights.size())
      throw std::invalid_argument("delay weight spans do not match");
  }

  const learn::Variant& variant() const { return variant_; }
  bool has_nets() const { return nets_ != nullptr; }
  double dt() const { return dt_; }
  const GainSet& gains() const { return gains_; }
  const vehicle::ModelParams& model() const { return *model_; }

  struct Init {
    Hidden<T> hidden;
    Mat4<T> cov = Mat4<T>::zero();
  };

  // Initial hidden states and covariance from a history window. Fixed mode
  // uses diag(1e-5); meta uses learned globals; predicted uses the
  // initializer network output.
  Init initialize(std::span<const HistoryFrame> history) const {
    Init out;
    for (int i = 0; i < 4; ++i) out.cov(i, i) = T(learn::kFixedInitialVariance);
    if (!nets_) return out;
    const auto& L = layout_;
    const auto init_mode = variant_.init;
    if (init_mode == learn::InitMode::kPredicted && history.empty())
      throw std::invalid_argument("predicted initial covariance needs a non-empty history");
    if (variant_.has_initializer() && !history.empty()) {
      std::array<T, kMaxHidden> h{}, h2{};
      T x[learn::kHistoryFeatures];
      for (const auto& f : history) {
        const auto s = f.state.template cast<T>();
        state_features(s, x);
        reading_features(f.control, f.readings, x + learn::kStateFeatures);
        learn::gru_forward(L.init_gru, ptr(L.o_init_gru), x, h.data(), h2.data());
        h = h2;
      }
      std::vector<T> d1(static_cast<std::size_t>(L.init_h1.out)), seeds(static_cast<std::size_t>(L.seed_size));
      learn::dense_forward(L.init_h1, ptr(L.o_init_h1), h.data(), d1.data(), learn::Activation::kTanh);
      learn::dense_forward(L.init_h2, ptr(L.o_init_h2), d1.data(), seeds.data(), learn::Activation::kLinear);
      using std::tanh;
      int at = 0;
      for (int i = 0; i < L.seed_mean; ++i) out.hidden.mean[i] = tanh(seeds[at++]);
      for (int i = 0; i < L.seed_noise; ++i) out.hidden.noise[i] = tanh(seeds[at++]);
      for (int i = 0; i < L.seed_joint; ++i) out.hidden.joint[i] = tanh(seeds[at++]);
      if (init_mode == learn::InitMode::kPredicted)
        for (int i = 0; i < 4; ++i) out.cov(i, i) = sigmoid(seeds[at++]) * nets_->scales.initial[i];
    }
    if (init_mode == learn::InitMode::kMeta)
      for (int i = 0; i < 4; ++i)
        out.cov(i, i) = sigmoid(w_.nets[L.globals + 2 * learn::kNumQ + i]) * nets_->scales.initial[i];
    return out;
  }

  // Advances mean, hidden states and covariance by one step.
  void step(BasicBelief<T>& b, Hidden<T>& h, const ControlInput& u, const SensorReadings& y,
            StepInfo<T>* info = nullptr) const {
    const auto& vp = model_->vehicle;
    const auto& x = b.mean;
    const T wheel_angle = x.steer / vp.c_delta;
    vehicle::BasicForceVector<T> prior;
    if (!(nets_ && variant_.no_parametric)) prior = vehicle::parametric_forces(x, y, u, vp, dt_);

    vehicle::BasicForceVector<T> force = prior;
    std::array<T, 3> accel_fix{};
    std::array<T, 14> noise_out{};
    if (nets_) run_networks(x, u, y, prior, h, force, accel_fix, noise_out);

    auto acc = vehicle::body_accelerations(force, x, y, wheel_angle, vp);
    if (nets_ && variant_.direct_d) {
      acc.vx_dot = acc.vx_dot + accel_fix[0];
      acc.vy_dot = acc.vy_dot + accel_fix[1];
      acc.yaw_accel = acc.yaw_accel + accel_fix[2];
    }
    const vehicle::DelayNetView<T> dv{delay_shape_, w_.engine, w_.steer};
    const auto rates = vehicle::delay_rates(x, u, vp, dv);

    const auto jac = vehicle::reduced_jacobians(x, u, y, vp, dt_);
    Mat4<T> a = (nets_ && variant_.no_a) ? Mat4<T>::identity() : jac.state;
    if (!gains_.is_zero()) {
      const auto bm = vehicle::pseudo_control_matrix(x, vp, dt_);
      a = a - bm * gains_.k.template cast<T>();
    }
    const Mat4<T> q = noise(jac.channel, noise_out);
    b.cov = propagate_covariance(b.cov, a, q, dt_);
    b.mean = vehicle::integrate(x, acc, rates, vp, dt_);
    if (info) {
      *info = {a, jac.channel, q, {prior.fx, prior.fyf, prior.fyb, prior.fr}, {}};
      if (nets_ && variant_.direct_d)
        info->correction = {accel_fix[0], accel_fix[1], accel_fix[2], T(0.0)};
      else
        info->correction = {force.fx - prior.fx, force.fyf - prior.fyf, force.fyb - prior.fyb, force.fr - prior.fr};
    }
  }

 private:
  const T* ptr(learn::Offset o) const { return w_.nets.data() + o.at; }

  void run_networks(const BasicVehicleState<T>& x, const ControlInput& u, const SensorReadings& y,
                    const vehicle::BasicForceVector<T>& prior, Hidden<T>& h, vehicle::BasicForceVector<T>& force,
                    std::array<T, 3>& accel_fix, std::array<T, 14>& noise_out) const {
    const auto& L = layout_;
    T in[kMaxHidden + 32];
    state_features(x, in);
    reading_features(u, y, in + learn::kStateFeatures);
    if (!variant_.no_prior) {
      T* f = in + learn::kHistoryFeatures;
      f[0] = prior.fx * kForceFeatureScale;
      f[1] = prior.fyf * kForceFeatureScale;
      f[2] = prior.fyb * kForceFeatureScale;
      f[3] = prior.fr;
    }
    T mean_out[8];
    T hidden_next[kMaxHidden];
    T mid[128];
    if (variant_.combined) {
      learn::gru_forward(L.joint_gru, ptr(L.o_joint_gru), in, h.joint.data(), hidden_next);
      std::copy(hidden_next, hidden_next + L.joint_gru.hidden, h.joint.begin());
      std::copy(hidden_next, hidden_next + L.joint_gru.hidden, in + L.mean_in);
      learn::dense_forward(L.joint_out1, ptr(L.o_joint_out1), in, mid, learn::Activation::kTanh);
      T all[8 + 14];
      learn::dense_forward(L.joint_out2, ptr(L.o_joint_out2), mid, all, learn::Activation::kLinear);
      for (int i = 0; i < L.mean_out; ++i) mean_out[i] = all[i];
      for (int i = 0; i < L.noise_out; ++i) noise_out[i] = all[L.mean_out + i];
    } else {
      if (variant_.mean_recurrent()) {
        learn::gru_forward(L.mean_gru, ptr(L.o_mean_gru), in, h.mean.data(), hidden_next);
        std::copy(hidden_next, hidden_next + L.mean_gru.hidden, h.mean.begin());
        T cat[kMaxHidden + 32];
        std::copy(in, in + L.mean_in, cat);
        std::copy(hidden_next, hidden_next + L.mean_gru.hidden, cat + L.mean_in);
        learn::dense_forward(L.mean_out1, ptr(L.o_mean_out1), cat, mid, learn::Activation::kTanh);
        learn::dense_forward(L.mean_out2, ptr(L.o_mean_out2), mid, mean_out, learn::Activation::kLinear);
      } else {
        T mid2[128];
        learn::dense_forward(L.ff1, ptr(L.o_ff1), in, mid, learn::Activation::kTanh);
        learn::dense_forward(L.ff2, ptr(L.o_ff2), mid, mid2, learn::Activation::kTanh);
        learn::dense_forward(L.ff3, ptr(L.o_ff3), mid2, mean_out, learn::Activation::kLinear);
      }
      // The noise net sees state and readings only.
      learn::gru_forward(L.noise_gru, ptr(L.o_noise_gru), in, h.noise.data(), hidden_next);
      std::copy(hidden_next, hidden_next + L.noise_gru.hidden, h.noise.begin());
      T cat[kMaxHidden + 32];
      std::copy(in, in + L.noise_in, cat);
      std::copy(hidden_next, hidden_next + L.noise_gru.hidden, cat + L.noise_in);
      learn::dense_forward(L.noise_out1, ptr(L.o_noise_out1), cat, mid, learn::Activation::kTanh);
      learn::dense_forward(L.noise_out2, ptr(L.o_noise_out2), mid, noise_out.data(), learn::Activation::kLinear);
    }
    if (variant_.direct_d) {
      for (int i = 0; i < 3; ++i) accel_fix[i] = mean_out[i];
    } else {
      force.fx = prior.fx + mean_out[0] * kForceOutputScale;
      force.fyf = prior.fyf + mean_out[1] * kForceOutputScale;
      force.fyb = prior.fyb + mean_out[2] * kForceOutputScale;
      force.fr = prior.fr + mean_out[3];
    }
  }

  Mat4<T> noise(const Mat4<T>& g, const std::array<T, 14>& out) const {
    if (!nets_) {
      std::array<T, 4> q_scale, u_scale;
      for (int k = 0; k < 4; ++k) {
        q_scale[k] = T(fixed_.channel[k]);
        u_scale[k] = T(fixed_.unstructured[k]);
      }
      Mat4<T> q = Mat4<T>::zero();
      for (int r = 0; r < 4; ++r)
        for (int c = r; c < 4; ++c) {
          T s(0.0);
          for (int k = 0; k < 4; ++k) s = s + g(r, k) * g(c, k) * q_scale[k];
          q(r, c) = s;
          q(c, r) = s;
        }
      for (int k = 0; k < 4; ++k) q(k, k) = q(k, k) + u_scale[k];
      return q;
    }
    using std::exp;
    const auto& L = layout_;
    std::array<T, 4> c_scale, k_scale;
    for (int k = 0; k < 4; ++k) {
      c_scale[k] = exp(w_.nets[L.globals + k]);
      k_scale[k] = exp(w_.nets[L.globals + learn::kNumQ + k]);
    }
    const int nq = variant_.uses_q() ? learn::kNumQ : 0;
    const int nqp = variant_.uses_qprime() ? learn::kNumQPrime : 0;
    return assemble_q<T>(std::span<const T>(out.data(), static_cast<std::size_t>(nq)),
                         std::span<const T>(out.data() + nq, static_cast<std::size_t>(nqp)), g,
                         std::span<const T>(c_scale), std::span<const T>(k_scale));
  }

  const vehicle::ModelParams* model_;
  const learn::NetworkParams* nets_;
  Weights w_;
  GainSet gains_;
  double dt_;
  FixedNoise fixed_;
  learn::Layout layout_;
  learn::Variant variant_;
  const vehicle::DelayNetParams* delay_shape_ = nullptr;
};

// Convenience constructors for the plain double model.
inline BeliefModel<double> make_model(const vehicle::ModelParams& model, const learn::NetworkParams* nets,
                                      GainSet gains, double dt, FixedNoise fixed = {}) {
  const auto& d = nets ? nets->delay : model.delay;
  BeliefModel<double>::Weights w{nets ? std::span<const double>(nets->weights) : std::span<const double>(),
                                 std::span<const double>(d.engine.weights), std::span<const double>(d.steer.weights)};
  return BeliefModel<double>(model, nets, w, gains, dt, fixed);
}

// Checks symmetry and finiteness; the PSD test lives with the Cholesky code.
inline void check_belief(const Belief& b, int step) {
  if (!all_finite(b.cov) || !b.mean.finite())
    throw std::runtime_error("belief became non-finite at step " + std::to_string(step));
}

}  // namespace bmppi::belief
