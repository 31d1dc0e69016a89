#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bmppi/core/scalar.hpp"

namespace bmppi::vehicle {

// Full 16-value vehicle state in three groups: planar (px..yaw_rate), delay
// (brake..steer_rate) and suspension (pz..pitch_rate). Velocities are body
// frame; rpm is stored raw.
template <class T>
struct BasicVehicleState {
  static constexpr int kSize = 16;

  T px{0.0}, py{0.0}, psi{0.0};
  T vx{0.0}, vy{0.0}, yaw_rate{0.0};
  T brake{0.0}, rpm{0.0}, steer{0.0}, steer_rate{0.0};
  T pz{0.0}, roll{0.0}, pitch{0.0};
  T pz_dot{0.0}, roll_rate{0.0}, pitch_rate{0.0};

  std::array<T, kSize> to_array() const {
    return {px, py, psi, vx, vy, yaw_rate, brake, rpm, steer, steer_rate, pz, roll, pitch, pz_dot, roll_rate, pitch_rate};
  }

  static BasicVehicleState from_array(const std::array<T, kSize>& a) {
    BasicVehicleState s;
    s.px = a[0];
    s.py = a[1];
    s.psi = a[2];
    s.vx = a[3];
    s.vy = a[4];
    s.yaw_rate = a[5];
    s.brake = a[6];
    s.rpm = a[7];
    s.steer = a[8];
    s.steer_rate = a[9];
    s.pz = a[10];
    s.roll = a[11];
    s.pitch = a[12];
    s.pz_dot = a[13];
    s.roll_rate = a[14];
    s.pitch_rate = a[15];
    return s;
  }

  template <class U>
  BasicVehicleState<U> cast() const {
    std::array<U, kSize> out;
    const auto in = to_array();
    for (int i = 0; i < kSize; ++i) out[i] = U(value(in[i]));
    return BasicVehicleState<U>::from_array(out);
  }

  bool finite() const {
    for (const auto& x : to_array())
      if (!std::isfinite(value(x))) return false;
    return true;
  }
};

using VehicleState = BasicVehicleState<double>;

// Indices of the reduced belief state (px, py, psi, vx) inside the full state.
inline constexpr std::array<int, 4> kReducedIndices = {0, 1, 2, 3};

struct ControlInput {
  double throttle = 0.0;
  double brake = 0.0;
  double steer = 0.0;  // steering-wheel units

  ControlInput() = default;
  ControlInput(double throttle_cmd, double brake_cmd, double steer_cmd)
      : throttle(throttle_cmd), brake(brake_cmd), steer(steer_cmd) {
    if (!(throttle >= 0.0 && throttle <= 1.0)) throw std::invalid_argument("throttle outside [0, 1]");
    if (!(brake >= 0.0 && brake <= 1.0)) throw std::invalid_argument("brake outside [0, 1]");
    if (!std::isfinite(steer)) throw std::invalid_argument("steer command not finite");
  }

  static ControlInput clamped(double throttle_cmd, double brake_cmd, double steer_cmd, double steer_limit) {
    const double s = std::isfinite(steer_cmd) ? steer_cmd : 0.0;
    return ControlInput(clamp01(throttle_cmd), clamp01(brake_cmd), s < -steer_limit ? -steer_limit : (s > steer_limit ? steer_limit : s));
  }
};

// Terrain normal rotated into the heading frame and averaged over the wheels.
struct SensorReadings {
  double nx = 0.0;
  double ny = 0.0;
  double nz = 1.0;

  static SensorReadings flat() { return {}; }

  // Normalizes (x, y, z); throws when the result does not point up.
  static SensorReadings from_normal(double x, double y, double z) {
    const double n = std::sqrt(x * x + y * y + z * z);
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("degenerate normal");
    SensorReadings r{x / n, y / n, z / n};
    if (!(r.nz > 0.0)) throw std::invalid_argument("normal must have positive z");
    return r;
  }
};

template <class T>
struct BasicForceVector {
  T fx{0.0};   // longitudinal drive/brake force, N
  T fyf{0.0};  // front lateral force, N
  T fyb{0.0};  // rear lateral force, N
  T fr{0.0};   // yaw acceleration, rad/s^2

  BasicForceVector operator+(const BasicForceVector& o) const { return {fx + o.fx, fyf + o.fyf, fyb + o.fyb, fr + o.fr}; }
};

using ForceVector = BasicForceVector<double>;

template <class T>
struct BodyAccelerations {
  T vx_dot{0.0};
  T vy_dot{0.0};
  T yaw_accel{0.0};
  T px_dot{0.0};  // world frame
  T py_dot{0.0};
};

// Additive perturbations on the structured noise channels (b, delta, vy, Fx).
// Fx perturbs the drive force before the normal-force scaling.
struct ChannelPerturbation {
  double brake = 0.0;
  double steer = 0.0;
  double vy = 0.0;
  double fx = 0.0;
};

inline constexpr int kNumChannels = 4;

}  // namespace bmppi::vehicle
