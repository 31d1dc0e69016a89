#pragma once

// Parametric planar vehicle model: actuator delay subsystems, tire/engine
// force model and the body-frame transform. All functions are templated on
// the scalar so the same code runs for planning (double) and training
// (ad::Var). Controls and sensor readings are always plain data.

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>

#include "bmppi/core/scalar.hpp"
#include "bmppi/vehicle/params.hpp"
#include "bmppi/vehicle/types.hpp"

namespace bmppi::vehicle {

inline constexpr double kDefaultDt = 0.02;
inline constexpr double kRpmInputScale = 1e-3;

template <class T>
T poly2(const Vec3& c, const T& x) {
  return c[0] + x * (c[1] + x * c[2]);
}

// Smooth rate limiter tanh(c0*a + c1*a^2) * c2.
template <class T>
T gamma(const T& alpha, const Vec3& c) {
  using std::tanh;
  return tanh(alpha * c[0] + alpha * alpha * c[1]) * c[2];
}

template <class T>
T clamp_to(const T& x, double lo, double hi) {
  if (value(x) < lo) return T(lo);
  if (value(x) > hi) return T(hi);
  return x;
}

template <class T>
struct DelayRates {
  T brake_rate{0.0};
  T rpm_rate{0.0};
  T steer_accel{0.0};
};

template <class T>
DelayRates<T> delay_rates(const BasicVehicleState<T>& x, const ControlInput& u, const VehicleParams& p,
                          const DelayNetView<T>& nets) {
  DelayRates<T> r;
  const T brake_err = x.brake - u.brake;
  r.brake_rate = gamma(brake_err, value(x.brake) <= u.brake ? p.brake_up : p.brake_down);

  const T engine_in[3] = {x.vx, T(u.throttle), x.rpm * kRpmInputScale};
  r.rpm_rate = evaluate_delay_net<T>(nets.shape->engine, nets.engine, std::span<const T>(engine_in, 3));

  const T steer_in[4] = {x.vx, x.steer, x.steer_rate, T(u.steer)};
  r.steer_accel = evaluate_delay_net<T>(nets.shape->steer, nets.steer, std::span<const T>(steer_in, 4)) +
                  gamma(T(x.steer - u.steer), p.steer_gamma);
  return r;
}

// Forward-Euler update of (brake, rpm, steer, steer_rate) only.
inline VehicleState step_delay(const VehicleState& x, const ControlInput& u, const VehicleParams& p,
                               const DelayNetParams& nets, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const auto r = delay_rates<double>(x, u, p, DelayNetView<double>::of(nets));
  VehicleState out = x;
  out.brake = clamp01(x.brake + dt * r.brake_rate);
  out.rpm = std::clamp(x.rpm + dt * r.rpm_rate, 0.0, p.max_rpm);
  out.steer = x.steer + dt * x.steer_rate;
  out.steer_rate = x.steer_rate + dt * r.steer_accel;
  if (!out.finite()) throw std::runtime_error("delay model produced a non-finite state");
  return out;
}

template <class T>
std::pair<T, T> tire_slip_angles(const T& vx, const T& vy, const T& yaw_rate, const T& wheel_angle,
                                 const VehicleParams& p) {
  using std::atan;
  const T denom = value(vx) > p.c_max ? vx : T(p.c_max);
  const T alpha_f = atan((vy + yaw_rate * p.c_l) / denom) - wheel_angle;
  const T alpha_r = atan((vy - yaw_rate * p.c_r) / denom);
  return {alpha_f, alpha_r};
}

template <class T>
T tire_curve(const T& alpha, const VehicleParams& p) {
  using std::sin;
  using std::tanh;
  return sin(tanh(alpha * p.c_b) * p.c_c) * p.c_d;
}

template <class T>
T tire_curve_slope(const T& alpha, const VehicleParams& p) {
  using std::cos;
  using std::tanh;
  const T th = tanh(alpha * p.c_b);
  return cos(th * p.c_c) * (p.c_c * p.c_b * p.c_d) * (1.0 - th * th);
}

template <class T>
T rolling_resistance(const T& vx, const VehicleParams& p) {
  T r = vx * p.roll_res_lin;
  if (std::abs(value(vx)) >= p.roll_res_deadzone) r = r + p.roll_res_sgn * sign_of(vx);
  return r;
}

// Brake force opposing vx. When a full-strength brake would flip the sign of
// vx within one step (or |vx| is below brake_damp_speed) the force becomes
// P_b(b) * vx, capped so braking alone can at most bring vx to zero.
template <class T>
struct BrakeTerm {
  T force{0.0};
  T d_vx{0.0};
  T d_brake{0.0};
  T d_wheel_angle{0.0};
  bool damped = false;
  bool capped = false;
};

template <class T>
BrakeTerm<T> brake_term(const T& brake, const T& vx, const T& wheel_angle, double nz, const VehicleParams& p,
                        double dt) {
  using std::cos;
  using std::sin;
  BrakeTerm<T> out;
  const T pb = poly2(p.brake_poly, brake);
  const T dpb = p.brake_poly[1] + brake * (2.0 * p.brake_poly[2]);
  const T one_plus_cos = cos(wheel_angle) + 1.0;
  const T coef = one_plus_cos * (nz / p.mass);  // accel per newton of brake force
  const double speed = std::abs(value(vx));
  out.damped = speed < p.brake_damp_speed || speed < dt * value(coef) * value(pb);
  if (!out.damped) {
    const double s = sign_of(vx);
    out.force = pb * s;
    out.d_brake = dpb * s;
    return out;
  }
  const T cap = 1.0 / (coef * dt);
  if (value(pb) <= value(cap)) {
    out.force = pb * vx;
    out.d_vx = pb;
    out.d_brake = dpb * vx;
  } else {
    out.capped = true;
    out.force = cap * vx;
    out.d_vx = cap;
    // d cap / d wheel_angle = m sin(wa) / (dt nz (1 + cos wa)^2)
    out.d_wheel_angle = vx * sin(wheel_angle) * (p.mass / (dt * nz)) / (one_plus_cos * one_plus_cos);
  }
  return out;
}

template <class T>
BasicForceVector<T> parametric_forces(const BasicVehicleState<T>& x, const SensorReadings& y, const ControlInput& u,
                                      const VehicleParams& p, double dt = kDefaultDt,
                                      const ChannelPerturbation& pi = {}) {
  if (!(y.nz > 0.0)) throw std::invalid_argument("normal z component must be positive");
  const T brake = x.brake + pi.brake;
  const T wheel_angle = (x.steer + pi.steer) / p.c_delta;
  const T vy = x.vy + pi.vy;
  const T drive = poly2(p.engine_poly, x.rpm) * poly2(p.throttle_poly, u.throttle);
  const auto bt = brake_term(brake, x.vx, wheel_angle, y.nz, p, dt);
  BasicForceVector<T> f;
  f.fx = (drive + pi.fx - bt.force - rolling_resistance(x.vx, p)) * y.nz;
  const auto [af, ar] = tire_slip_angles(x.vx, vy, x.yaw_rate, wheel_angle, p);
  f.fyf = tire_curve(af, p) * y.nz;
  f.fyb = tire_curve(ar, p) * y.nz;
  f.fr = x.vx * wheel_angle * (p.c_yaw / p.c_l) - x.yaw_rate * p.c_yaw_d;
  return f;
}

template <class T>
BodyAccelerations<T> body_accelerations(const BasicForceVector<T>& f, const BasicVehicleState<T>& x,
                                        const SensorReadings& y, const T& wheel_angle, const VehicleParams& p,
                                        const T* vy_override = nullptr) {
  using std::abs;
  using std::cos;
  using std::sin;
  const T& vy = vy_override ? *vy_override : x.vy;
  const T c = cos(wheel_angle);
  const T s = sin(wheel_angle);
  BodyAccelerations<T> a;
  a.vx_dot = ((c + 1.0) * f.fx - f.fyf * s) / p.mass - x.vx * abs(x.vx) * p.c_xd - p.c_xg * y.nx + vy * x.yaw_rate;
  a.vy_dot = (f.fyb + c * f.fyf + f.fx * s) / p.mass - vy * abs(vy) * p.c_yd - p.c_yg * y.ny - x.vx * x.yaw_rate;
  a.yaw_accel = f.fr;
  const T cp = cos(x.psi);
  const T sp = sin(x.psi);
  a.px_dot = cp * x.vx - sp * vy;
  a.py_dot = sp * x.vx + cp * vy;
  return a;
}

// Semi-implicit Euler: velocities first, then poses with the new body
// velocities rotated by the pre-step heading. Delay states use forward Euler.
// Suspension states are left untouched (see suspension.hpp).
template <class T>
BasicVehicleState<T> integrate(const BasicVehicleState<T>& x, const BodyAccelerations<T>& a, const DelayRates<T>& r,
                               const VehicleParams& p, double dt, const ChannelPerturbation& pi = {}) {
  using std::cos;
  using std::sin;
  BasicVehicleState<T> o = x;
  o.vx = x.vx + a.vx_dot * dt;
  o.vy = (x.vy + pi.vy) + a.vy_dot * dt;
  o.yaw_rate = x.yaw_rate + a.yaw_accel * dt;
  o.psi = x.psi + o.yaw_rate * dt;
  const T cp = cos(x.psi);
  const T sp = sin(x.psi);
  o.px = x.px + (cp * o.vx - sp * o.vy) * dt;
  o.py = x.py + (sp * o.vx + cp * o.vy) * dt;
  o.brake = clamp_to(T(x.brake + pi.brake + r.brake_rate * dt), 0.0, 1.0);
  o.rpm = clamp_to(T(x.rpm + r.rpm_rate * dt), 0.0, p.max_rpm);
  o.steer = (x.steer + pi.steer) + x.steer_rate * dt;
  o.steer_rate = x.steer_rate + r.steer_accel * dt;
  return o;
}

// One step of the purely parametric planar + delay model. Channel
// perturbations model the structured process noise realizations.
template <class T>
BasicVehicleState<T> parametric_step(const BasicVehicleState<T>& x, const ControlInput& u, const SensorReadings& y,
                                     const VehicleParams& p, const DelayNetView<T>& nets, double dt,
                                     const ChannelPerturbation& pi = {}) {
  const auto f = parametric_forces(x, y, u, p, dt, pi);
  const T wheel_angle = (x.steer + pi.steer) / p.c_delta;
  const T vy = x.vy + pi.vy;
  const auto a = body_accelerations(f, x, y, wheel_angle, p, &vy);
  const auto r = delay_rates(x, u, p, nets);
  return integrate(x, a, r, p, dt, pi);
}

inline VehicleState parametric_step(const VehicleState& x, const ControlInput& u, const SensorReadings& y,
                                    const ModelParams& m, double dt, const ChannelPerturbation& pi = {}) {
  return parametric_step<double>(x, u, y, m.vehicle, DelayNetView<double>::of(m.delay), dt, pi);
}

}  // namespace bmppi::vehicle
