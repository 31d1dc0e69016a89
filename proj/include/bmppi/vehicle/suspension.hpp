#pragma once

// Decoupled spring-mass-damper for heave, roll and pitch driven by the
// elevation map under each wheel. Used for costing and for placing the wheel
// queries; it never feeds back into the planar force model.

#include <array>
#include <cmath>

#include "bmppi/vehicle/params.hpp"
#include "bmppi/vehicle/types.hpp"
#include "bmppi/world/elevation_map.hpp"

namespace bmppi::vehicle {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct Pose6 {
  double px = 0.0, py = 0.0, pz = 0.0;
  double roll = 0.0, pitch = 0.0, yaw = 0.0;

  static Pose6 of(const VehicleState& s) { return {s.px, s.py, s.pz, s.roll, s.pitch, s.psi}; }
};

// R = Rz(yaw) * Ry(pitch) * Rx(roll) applied to a body-frame point.
inline Point3 body_to_world(const Pose6& p, const Point3& b) {
  const double cr = std::cos(p.roll), sr = std::sin(p.roll);
  const double cp = std::cos(p.pitch), sp = std::sin(p.pitch);
  const double cy = std::cos(p.yaw), sy = std::sin(p.yaw);
  const double x1 = b.x;
  const double y1 = cr * b.y - sr * b.z;
  const double z1 = sr * b.y + cr * b.z;
  const double x2 = cp * x1 + sp * z1;
  const double z2 = -sp * x1 + cp * z1;
  return {p.px + cy * x2 - sy * y1, p.py + sy * x2 + cy * y1, p.pz + z2};
}

inline std::array<Point3, 4> wheel_world_positions(const Pose6& pose, const SuspensionParams& sp) {
  std::array<Point3, 4> out;
  for (int w = 0; w < 4; ++w) out[w] = body_to_world(pose, {sp.wheels[w].x, sp.wheels[w].y, sp.wheels[w].z});
  return out;
}

// Leading edge of each wheel (offset by the wheel radius along body x).
inline std::array<Point3, 4> wheel_front_positions(const Pose6& pose, const SuspensionParams& sp) {
  std::array<Point3, 4> out;
  for (int w = 0; w < 4; ++w)
    out[w] = body_to_world(pose, {sp.wheels[w].x + sp.wheel_radius, sp.wheels[w].y, sp.wheels[w].z});
  return out;
}

inline world::Normal to_heading_frame(const world::Normal& n, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * n[0] + s * n[1], -s * n[0] + c * n[1], n[2]};
}

// Map normals under the four wheels, rotated by yaw and averaged.
inline SensorReadings terrain_readings(const Pose6& pose, const world::ElevationMap& map, const SuspensionParams& sp) {
  double ax = 0.0, ay = 0.0, az = 0.0;
  for (const auto& w : wheel_world_positions(pose, sp)) {
    const auto n = to_heading_frame(map.query(w.x, w.y).normal, pose.yaw);
    ax += n[0];
    ay += n[1];
    az += n[2];
  }
  return SensorReadings::from_normal(ax, ay, az);
}

struct SuspensionResult {
  VehicleState state;
  std::array<double, 4> wheel_forces{};  // F_{w,u}, positive pushes the body up
  std::array<double, 4> terrain_height{};
  int out_of_bounds = 0;                 // wheel queries that fell off the map
};

// World-frame vertical velocity of a body point given the attitude rates.
inline double point_vertical_velocity(const VehicleState& s, const Point3& b) {
  const double cr = std::cos(s.roll), sr = std::sin(s.roll);
  const double cp = std::cos(s.pitch), sp = std::sin(s.pitch);
  // z = -sp*x + cp*sr*y + cp*cr*z
  const double d_pitch = -cp * b.x - sp * sr * b.y - sp * cr * b.z;
  const double d_roll = cp * cr * b.y - cp * sr * b.z;
  return s.pz_dot + d_pitch * s.pitch_rate + d_roll * s.roll_rate;
}

inline SuspensionResult step_suspension(const VehicleState& s, const world::ElevationMap& map,
                                        const SuspensionParams& sp, const VehicleParams& vp, double dt) {
  SuspensionResult r;
  r.state = s;
  const Pose6 pose = Pose6::of(s);
  const auto wheels = wheel_world_positions(pose, sp);
  const double wa = s.steer / vp.c_delta;
  double heave = 0.0, roll = 0.0, pitch = 0.0;
  for (int w = 0; w < 4; ++w) {
    const auto q = map.query(wheels[w].x, wheels[w].y);
    if (!q.in_bounds) ++r.out_of_bounds;
    const auto n = to_heading_frame(q.normal, s.psi);
    const double terrain_rate = -s.vx * std::cos(wa) * n[0] - s.vx * std::sin(wa) * n[1];
    const double zdot = point_vertical_velocity(s, {sp.wheels[w].x, sp.wheels[w].y, sp.wheels[w].z});
    const double f = -sp.c_k * (wheels[w].z - q.height) - sp.c_kdot * (zdot - terrain_rate);
    r.wheel_forces[w] = f;
    r.terrain_height[w] = q.height;
    heave += f / sp.c_wm;
    roll += f * sp.wheels[w].y / sp.c_ixx;
    pitch += -f * sp.wheels[w].x / sp.c_iyy;
  }
  auto& o = r.state;
  o.pz_dot = s.pz_dot + dt * heave / 4.0;
  o.roll_rate = s.roll_rate + dt * roll / 4.0;
  o.pitch_rate = s.pitch_rate + dt * pitch / 4.0;
  o.pz = s.pz + dt * o.pz_dot;
  o.roll = s.roll + dt * o.roll_rate;
  o.pitch = s.pitch + dt * o.pitch_rate;
  return r;
}

// Body height that puts the wheel bottoms on flat ground at `ground`.
inline double resting_height(const SuspensionParams& sp, double ground) { return ground - sp.wheels[0].z; }

}  // namespace bmppi::vehicle
