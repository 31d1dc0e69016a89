#pragma once

// Ground-truth simulator: the parametric model with hidden parameter changes
// plus state-dependent noise on the (Fx, vy, steer) channels, and scripted
// data collection on top of it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "bmppi/vehicle/dynamics.hpp"
#include "bmppi/vehicle/suspension.hpp"
#include "bmppi/world/dataset.hpp"
#include "bmppi/world/terrain.hpp"

namespace bmppi::world {

// Parameters of one realization of the true vehicle.
struct TruthVehicle {
  vehicle::ModelParams model;
  Disturbance disturbance;
};

// Applies the disturbance's bias factors and, when `rng` is given, a
// per-trajectory random factor.
inline TruthVehicle sample_truth_vehicle(const vehicle::ModelParams& nominal, const Disturbance& d,
                                         std::mt19937_64* rng = nullptr) {
  TruthVehicle t{nominal, d};
  double drive = d.drive_bias, grip = d.grip_bias;
  if (rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    drive *= 1.0 + d.drive_spread * u(*rng);
    grip *= 1.0 + d.grip_spread * u(*rng);
  }
  auto& v = t.model.vehicle;
  if (drive != 1.0)
    for (double& c : v.throttle_poly) c *= drive;
  if (grip != 1.0) v.c_d *= grip;
  if (d.drag_bias != 1.0) v.c_xd *= d.drag_bias;
  return t;
}

// Spread of the four wheel normals around their mean; zero on any plane.
inline double terrain_roughness(const vehicle::VehicleState& s, const ElevationMap& map,
                                const vehicle::SuspensionParams& sp) {
  const auto wheels = vehicle::wheel_world_positions(vehicle::Pose6::of(s), sp);
  std::array<Normal, 4> n;
  Normal mean{0.0, 0.0, 0.0};
  for (int w = 0; w < 4; ++w) {
    n[w] = map.query(wheels[w].x, wheels[w].y).normal;
    for (int k = 0; k < 3; ++k) mean[k] += 0.25 * n[w][k];
  }
  double r = 0.0;
  for (const auto& nw : n) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) d2 += (nw[k] - mean[k]) * (nw[k] - mean[k]);
    r += std::sqrt(d2);
  }
  return r;
}

// Noise std on (Fx, vy, steer) per sqrt(second).
inline std::array<double, 3> noise_std(const Disturbance& d, double vx, double roughness) {
  std::array<double, 3> s;
  for (int k = 0; k < 3; ++k) s[k] = d.base[k] + d.speed_gain[k] * std::abs(vx) + d.rough_gain[k] * roughness;
  return s;
}

struct TruthStep {
  vehicle::VehicleState state;
  vehicle::SensorReadings readings;  // at the pre-step state
  vehicle::ChannelPerturbation noise;
  bool out_of_bounds = false;
};

// The planar and delay part is vehicle::parametric_step with the realized
// parameters and channel noise; suspension states follow step_suspension.
inline TruthStep truth_step(const vehicle::VehicleState& x, const vehicle::ControlInput& u, const ElevationMap& map,
                            const TruthVehicle& truth, std::mt19937_64& rng, double dt = vehicle::kDefaultDt) {
  TruthStep out;
  const auto& sp = truth.model.suspension;
  out.readings = vehicle::terrain_readings(vehicle::Pose6::of(x), map, sp);
  if (!truth.disturbance.noiseless()) {
    const auto sd = noise_std(truth.disturbance, x.vx, terrain_roughness(x, map, sp));
    std::normal_distribution<double> n(0.0, 1.0);
    const double root = std::sqrt(dt);
    out.noise.fx = sd[0] * root * n(rng);
    out.noise.vy = sd[1] * root * n(rng);
    out.noise.steer = sd[2] * root * n(rng);
  }
  out.state = vehicle::parametric_step(x, u, out.readings, truth.model, dt, out.noise);
  const auto susp = vehicle::step_suspension(x, map, sp, truth.model.vehicle, dt);
  out.out_of_bounds = susp.out_of_bounds > 0;
  auto& o = out.state;
  o.pz = susp.state.pz;
  o.roll = susp.state.roll;
  o.pitch = susp.state.pitch;
  o.pz_dot = susp.state.pz_dot;
  o.roll_rate = susp.state.roll_rate;
  o.pitch_rate = susp.state.pitch_rate;
  return out;
}

// Steady engine speed the default delay model relaxes to.
inline double nominal_rpm(double throttle, double vx) { return 1000.0 + 4000.0 * throttle + 200.0 * vx; }

// Vehicle at rest on the terrain at (x, y) with heading psi and speed vx.
inline vehicle::VehicleState settled_state(const ElevationMap& map, const vehicle::SuspensionParams& sp, double x,
                                           double y, double psi, double vx, double throttle = 0.3) {
  vehicle::VehicleState s;
  s.px = x;
  s.py = y;
  s.psi = psi;
  s.vx = vx;
  s.rpm = nominal_rpm(throttle, vx);
  s.pz = vehicle::resting_height(sp, map.height_at_point(x, y));
  return s;
}

struct CollectConfig {
  int n_traj = 64;
  double dt = vehicle::kDefaultDt;
  double horizon = 5.0;  // seconds after the history window
  double tau = 0.2;
  double min_speed = 2.0;
  double max_speed = 10.0;
  std::uint64_t seed = 0;

  int frames() const { return static_cast<int>(std::lround((horizon + tau) / dt)); }
};

enum class Maneuver { kStraight, kTurn, kWeave, kBrake };

// Scripted open-loop driver: each trajectory is split into two or three
// segments, each one of straight / turn / weave / brake with random levels.
class ScriptedDriver {
 public:
  ScriptedDriver(int frames, double dt, std::mt19937_64& rng) : dt_(dt) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int segments = 2 + static_cast<int>(u(rng) * 2.0);
    int start = 0;
    for (int k = 0; k < segments; ++k) {
      Segment s;
      s.start = start;
      s.kind = static_cast<Maneuver>(std::min(3, static_cast<int>(u(rng) * 4.0)));
      s.throttle = 0.15 + 0.6 * u(rng);
      s.steer = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + 3.5 * u(rng));
      s.freq = 0.2 + 0.8 * u(rng);
      s.brake = 0.2 + 0.6 * u(rng);
      s.phase = 2.0 * std::numbers::pi * u(rng);
      segs_.push_back(s);
      start += frames / segments;
    }
  }

  vehicle::ControlInput at(int frame) const {
    const Segment* s = &segs_.front();
    for (const auto& seg : segs_)
      if (frame >= seg.start) s = &seg;
    const double t = (frame - s->start) * dt_;
    double throttle = s->throttle, brake = 0.0, steer = 0.0;
    switch (s->kind) {
      case Maneuver::kStraight:
        steer = 0.1 * s->steer;
        break;
      case Maneuver::kTurn:
        steer = s->steer * std::min(1.0, t / 0.5);
        break;
      case Maneuver::kWeave:
        steer = s->steer * std::sin(2.0 * std::numbers::pi * s->freq * t + s->phase);
        break;
      case Maneuver::kBrake:
        throttle = 0.0;
        brake = t < 1.5 ? s->brake : 0.0;
        steer = 0.3 * s->steer;
        break;
    }
    return vehicle::ControlInput::clamped(throttle, brake, steer, 5.0);
  }

 private:
  struct Segment {
    int start = 0;
    Maneuver kind = Maneuver::kStraight;
    double throttle = 0.0, steer = 0.0, freq = 0.0, brake = 0.0, phase = 0.0;
  };
  double dt_;
  std::vector<Segment> segs_;
};

// Deterministic in (spec, map, cfg): each trajectory draws from its own
// generator seeded from cfg.seed and its index.
inline Trajectory collect_trajectory(const ElevationMap& map, const vehicle::ModelParams& nominal,
                                     const Disturbance& d, const CollectConfig& cfg, int index) {
  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(index) + 1);
  const TruthVehicle truth = sample_truth_vehicle(nominal, d, &rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int frames = cfg.frames();
  ScriptedDriver driver(frames, cfg.dt, rng);
  // Start well inside the map so a 5 s run at full speed stays on it.
  const double margin = 0.3;
  const double w = map.width() * map.resolution(), h = map.height() * map.resolution();
  const double x0 = map.origin_x() + w * (margin + (1 - 2 * margin) * u(rng));
  const double y0 = map.origin_y() + h * (margin + (1 - 2 * margin) * u(rng));
  const double psi0 = 2.0 * std::numbers::pi * (u(rng) - 0.5);
  const double vx0 = cfg.min_speed + (cfg.max_speed - cfg.min_speed) * u(rng);

  Trajectory t;
  t.dt = cfg.dt;
  t.tau = cfg.tau;
  auto x = settled_state(map, truth.model.suspension, x0, y0, psi0, vx0, driver.at(0).throttle);
  for (int k = 0; k < frames; ++k) {
    const auto c = driver.at(k);
    const auto step = truth_step(x, c, map, truth, rng, cfg.dt);
    t.states.push_back(x);
    t.controls.push_back(c);
    t.readings.push_back(step.readings);
    x = step.state;
  }
  return t;
}

inline std::vector<Trajectory> collect_dataset(const ElevationMap& map, const vehicle::ModelParams& nominal,
                                               const Disturbance& d, const CollectConfig& cfg) {
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(std::max(cfg.n_traj, 0)));
  for (int i = 0; i < cfg.n_traj; ++i) out.push_back(collect_trajectory(map, nominal, d, cfg, i));
  return out;
}

}  // namespace bmppi::world
