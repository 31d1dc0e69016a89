#pragma once

// Analytic partials of one parametric step with respect to the reduced state
// (px, py, psi, vx) and the four noise channels (brake, steer, vy, Fx).
// Hand-derived from dynamics.hpp; the FD suite in the tests keeps them honest.

#include <cmath>

#include "bmppi/core/small_matrix.hpp"
#include "bmppi/vehicle/dynamics.hpp"

namespace bmppi::vehicle {

template <class T>
struct ReducedJacobians {
  Mat4<T> state;    // d x~' / d x~
  Mat4<T> channel;  // d x~' / d pi, columns (brake, steer, vy, Fx)
};

namespace detail {

// Partials of (a_x, a_y, yaw_accel) with respect to one input direction.
template <class T>
struct AccelPartial {
  T ax{0.0}, ay{0.0}, r{0.0};
};

}  // namespace detail

template <class T>
ReducedJacobians<T> reduced_jacobians(const BasicVehicleState<T>& x, const ControlInput& u, const SensorReadings& y,
                                      const VehicleParams& p, double dt) {
  using std::abs;
  using std::atan;
  using std::cos;
  using std::sin;
  (void)u;  // drive force depends on u but none of its partials do
  const double nz = y.nz;
  const double m = p.mass;
  const T wa = x.steer / p.c_delta;
  const T c = cos(wa);
  const T s = sin(wa);

  // Longitudinal force partials.
  const auto bt = brake_term(x.brake, x.vx, wa, nz, p, dt);
  const T drive = poly2(p.engine_poly, x.rpm) * poly2(p.throttle_poly, u.throttle);
  const T fx = (drive - bt.force - rolling_resistance(x.vx, p)) * nz;
  const T fx_vx = (bt.d_vx + p.roll_res_lin) * (-nz);
  const T fx_b = bt.d_brake * (-nz);
  const T fx_wa = bt.d_wheel_angle * (-nz);
  const double fx_f = nz;

  // Lateral force partials.
  const bool clamp = !(value(x.vx) > p.c_max);
  const T den = clamp ? T(p.c_max) : x.vx;
  const double dden = clamp ? 0.0 : 1.0;
  const T num_f = x.vy + x.yaw_rate * p.c_l;
  const T num_r = x.vy - x.yaw_rate * p.c_r;
  const T qf = den * den + num_f * num_f;
  const T qr = den * den + num_r * num_r;
  const T af = atan(num_f / den) - wa;
  const T ar = atan(num_r / den);
  const T fyf = tire_curve(af, p) * nz;
  const T kf = tire_curve_slope(af, p) * nz;
  const T kr = tire_curve_slope(ar, p) * nz;
  const T fyf_vx = kf * (-num_f * dden) / qf;
  const T fyb_vx = kr * (-num_r * dden) / qr;
  const T fyf_vy = kf * den / qf;
  const T fyb_vy = kr * den / qr;
  const T fyf_wa = -kf;

  detail::AccelPartial<T> d_vx, d_b, d_wa, d_vy, d_f;
  d_vx.ax = ((c + 1.0) * fx_vx - fyf_vx * s) / m - abs(x.vx) * (2.0 * p.c_xd);
  d_vx.ay = (fyb_vx + c * fyf_vx + fx_vx * s) / m - x.yaw_rate;
  d_vx.r = wa * (p.c_yaw / p.c_l);

  d_b.ax = (c + 1.0) * fx_b / m;
  d_b.ay = fx_b * s / m;

  d_wa.ax = ((c + 1.0) * fx_wa - s * fx - fyf_wa * s - fyf * c) / m;
  d_wa.ay = (c * fyf_wa - s * fyf + fx_wa * s + fx * c) / m;
  d_wa.r = x.vx * (p.c_yaw / p.c_l);
  detail::AccelPartial<T> d_steer{d_wa.ax / p.c_delta, d_wa.ay / p.c_delta, d_wa.r / p.c_delta};

  d_vy.ax = -(fyf_vy * s) / m + x.yaw_rate;
  d_vy.ay = (fyb_vy + c * fyf_vy) / m - abs(x.vy) * (2.0 * p.c_yd);

  d_f.ax = (c + 1.0) * (fx_f / m);
  d_f.ay = s * (fx_f / m);

  // Post-step body velocities for the psi column.
  const auto f = BasicForceVector<T>{fx, fyf, tire_curve(ar, p) * nz,
                                     x.vx * wa * (p.c_yaw / p.c_l) - x.yaw_rate * p.c_yaw_d};
  const auto acc = body_accelerations(f, x, y, wa, p);
  const T vx_new = x.vx + acc.vx_dot * dt;
  const T vy_new = x.vy + acc.vy_dot * dt;

  const T cp = cos(x.psi);
  const T sp = sin(x.psi);

  // Fills one column of d x~' / d z given the acceleration partials and the
  // direct (identity) contributions of z.
  auto column = [&](Mat4<T>& out, int col, const detail::AccelPartial<T>& d, double direct_vx, double direct_vy) {
    const T dvx = d.ax * dt + direct_vx;
    const T dvy = d.ay * dt + direct_vy;
    const T dyr = d.r * dt;
    out(2, col) = dyr * dt;
    out(3, col) = dvx;
    out(0, col) = (cp * dvx - sp * dvy) * dt;
    out(1, col) = (sp * dvx + cp * dvy) * dt;
  };

  ReducedJacobians<T> j{Mat4<T>::zero(), Mat4<T>::zero()};
  const detail::AccelPartial<T> none;
  column(j.state, 0, none, 0.0, 0.0);
  column(j.state, 1, none, 0.0, 0.0);
  column(j.state, 2, none, 0.0, 0.0);
  column(j.state, 3, d_vx, 1.0, 0.0);
  j.state(0, 0) = j.state(0, 0) + 1.0;
  j.state(1, 1) = j.state(1, 1) + 1.0;
  j.state(2, 2) = j.state(2, 2) + 1.0;
  j.state(0, 2) = (-sp * vx_new - cp * vy_new) * dt;
  j.state(1, 2) = (cp * vx_new - sp * vy_new) * dt;

  column(j.channel, 0, d_b, 0.0, 0.0);
  column(j.channel, 1, d_steer, 0.0, 0.0);
  column(j.channel, 2, d_vy, 0.0, 1.0);
  column(j.channel, 3, d_f, 0.0, 0.0);
  return j;
}

// d x~' / d(accel, wheel angle) of the idealized pseudo-control model used to
// fold a tracking controller into the covariance update.
template <class T>
Mat<T, 4, 2> pseudo_control_matrix(const BasicVehicleState<T>& x, const VehicleParams& p, double dt) {
  using std::cos;
  using std::sin;
  Mat<T, 4, 2> b = Mat<T, 4, 2>::zero();
  b(0, 0) = cos(x.psi) * (dt * dt);
  b(1, 0) = sin(x.psi) * (dt * dt);
  b(3, 0) = T(dt);
  b(2, 1) = x.vx * (dt / p.wheelbase());
  return b;
}

}  // namespace bmppi::vehicle
