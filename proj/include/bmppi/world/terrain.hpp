#pragma once

// Synthetic worlds: terrain kind, obstacles, trail and hidden disturbance
// levels, turned deterministically into an ElevationMap.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bmppi/world/elevation_map.hpp"

namespace bmppi::world {

enum class TerrainKind { kFlat, kSlope, kRolling, kCorridor, kObstacleField };

inline const char* terrain_name(TerrainKind k) {
  switch (k) {
    case TerrainKind::kFlat: return "flat";
    case TerrainKind::kSlope: return "slope";
    case TerrainKind::kRolling: return "rolling";
    case TerrainKind::kCorridor: return "corridor";
    case TerrainKind::kObstacleField: return "obstacle";
  }
  return "?";
}

inline TerrainKind terrain_from_name(const std::string& s) {
  for (auto k : {TerrainKind::kFlat, TerrainKind::kSlope, TerrainKind::kRolling, TerrainKind::kCorridor,
                 TerrainKind::kObstacleField})
    if (s == terrain_name(k)) return k;
  throw std::invalid_argument("unknown terrain kind: " + s);
}

// Noise std on the (Fx, vy, steer) channels is base + speed_gain*|vx| +
// rough_gain*roughness, per sqrt(second). Parameters of the true vehicle are
// scaled by fixed bias factors times a per-trajectory random factor drawn
// uniformly from [1 - spread, 1 + spread].
struct Disturbance {
  std::array<double, 3> base = {300.0, 0.05, 0.1};
  std::array<double, 3> speed_gain = {60.0, 0.02, 0.02};
  std::array<double, 3> rough_gain = {3000.0, 0.5, 1.0};
  double drive_bias = 0.85;
  double grip_bias = 0.8;
  double drag_bias = 1.5;
  double drive_spread = 0.2;
  double grip_spread = 0.2;

  bool noiseless() const {
    for (int k = 0; k < 3; ++k)
      if (base[k] != 0.0 || speed_gain[k] != 0.0 || rough_gain[k] != 0.0) return false;
    return true;
  }

  static Disturbance none() {
    Disturbance d;
    d.base = d.speed_gain = d.rough_gain = {0.0, 0.0, 0.0};
    d.drive_bias = d.grip_bias = d.drag_bias = 1.0;
    d.drive_spread = d.grip_spread = 0.0;
    return d;
  }
};

struct WorldSpec {
  std::uint64_t seed = 0;
  TerrainKind kind = TerrainKind::kFlat;
  double size_x = 200.0;  // m
  double size_y = 200.0;  // m
  double resolution = 0.5;
  double origin_x = -100.0;
  double origin_y = -100.0;
  // slope
  double slope_x = 0.0;
  double slope_y = 0.0;
  // rolling: sum of random plane waves with wavelengths in [min, max]
  double roll_amplitude = 0.5;
  double roll_wavelength_min = 8.0;
  double roll_wavelength_max = 40.0;
  int roll_waves = 24;
  // obstacle field and corridor
  double obstacle_density = 0.0;  // fraction of area covered, [0, 1]
  double obstacle_radius = 1.5;
  double corridor_width = 8.0;
  double corridor_amplitude = 6.0;  // lateral wiggle of the centerline
  double corridor_period = 60.0;
  double trail_width = 3.0;
  double risky_band = 1.0;           // risky cells along corridor walls
  double speed_limit = 0.0;          // <= 0: none
  Disturbance disturbance;

  void validate() const {
    if (!(resolution > 0.0)) throw std::invalid_argument("world resolution must be positive");
    if (!(size_x > 0.0) || !(size_y > 0.0)) throw std::invalid_argument("world size must be positive");
    if (!(obstacle_density >= 0.0 && obstacle_density <= 1.0))
      throw std::invalid_argument("obstacle density must be in [0, 1]");
    if (!(roll_wavelength_min > 0.0) || roll_wavelength_max < roll_wavelength_min)
      throw std::invalid_argument("rolling wavelengths must satisfy 0 < min <= max");
    if (!(corridor_width > 0.0)) throw std::invalid_argument("corridor width must be positive");
  }
};

// Centerline of the corridor as a function of x.
inline double corridor_center(const WorldSpec& s, double x) {
  return s.corridor_amplitude * std::sin(2.0 * std::numbers::pi * x / s.corridor_period);
}

inline ElevationMap generate(const WorldSpec& spec) {
  spec.validate();
  const int w = static_cast<int>(std::lround(spec.size_x / spec.resolution));
  const int h = static_cast<int>(std::lround(spec.size_y / spec.resolution));
  ElevationMap map(w, h, spec.resolution, spec.origin_x, spec.origin_y);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;
  if (spec.kind == TerrainKind::kRolling) {
    const double norm = spec.roll_amplitude / std::sqrt(0.5 * spec.roll_waves);
    for (int k = 0; k < spec.roll_waves; ++k) {
      const double lambda =
          spec.roll_wavelength_min * std::pow(spec.roll_wavelength_max / spec.roll_wavelength_min, u01(rng));
      const double dir = 2.0 * std::numbers::pi * u01(rng);
      const double kk = 2.0 * std::numbers::pi / lambda;
      waves.push_back({kk * std::cos(dir), kk * std::sin(dir), 2.0 * std::numbers::pi * u01(rng), norm});
    }
  }
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      const double x = map.cell_center_x(i), y = map.cell_center_y(j);
      double z = 0.0;
      if (spec.kind == TerrainKind::kSlope) z = spec.slope_x * x + spec.slope_y * y;
      for (const auto& wv : waves) z += wv.amp * std::sin(wv.kx * x + wv.ky * y + wv.phase);
      map.set_height(i, j, z);
      if (spec.speed_limit > 0.0) map.set_speed(i, j, spec.speed_limit);
    }
  }

  if (spec.kind == TerrainKind::kObstacleField && spec.obstacle_density > 0.0) {
    const double area = spec.size_x * spec.size_y;
    const double disk = std::numbers::pi * spec.obstacle_radius * spec.obstacle_radius;
    // Poisson coverage: 1 - exp(-n disk / area) = density.
    const double density = std::min(spec.obstacle_density, 0.999);
    const int n = static_cast<int>(std::ceil(-std::log(1.0 - density) * area / disk));
    const int r = static_cast<int>(std::ceil(spec.obstacle_radius / spec.resolution));
    for (int k = 0; k < n; ++k) {
      const double cx = spec.origin_x + spec.size_x * u01(rng);
      const double cy = spec.origin_y + spec.size_y * u01(rng);
      const auto [ci, cj] = map.cell_of(cx, cy);
      for (int dj = -r; dj <= r; ++dj)
        for (int di = -r; di <= r; ++di) {
          const int i = ci + di, j = cj + dj;
          if (!map.contains_cell(i, j)) continue;
          const double dx = map.cell_center_x(i) - cx, dy = map.cell_center_y(j) - cy;
          if (dx * dx + dy * dy <= spec.obstacle_radius * spec.obstacle_radius)
            map.set_class(i, j, CellClass::kLethal);
        }
    }
  }

  if (spec.kind == TerrainKind::kCorridor) {
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i) {
        const double x = map.cell_center_x(i), y = map.cell_center_y(j);
        const double off = std::abs(y - corridor_center(spec, x));
        const double half = 0.5 * spec.corridor_width;
        if (off > half) map.set_class(i, j, CellClass::kLethal);
        else if (off > half - spec.risky_band) map.set_class(i, j, CellClass::kRisky);
        else if (off <= 0.5 * spec.trail_width) map.set_class(i, j, CellClass::kTrail);
      }
  }
  map.recompute_normals();
  return map;
}

inline nlohmann::json to_json(const Disturbance& d) {
  return {{"base", d.base},
          {"speed_gain", d.speed_gain},
          {"rough_gain", d.rough_gain},
          {"drive_bias", d.drive_bias},
          {"grip_bias", d.grip_bias},
          {"drag_bias", d.drag_bias},
          {"drive_spread", d.drive_spread},
          {"grip_spread", d.grip_spread}};
}

inline Disturbance disturbance_from_json(const nlohmann::json& j) {
  Disturbance d;
  auto opt = [&](const char* k, auto& out) {
    if (j.contains(k)) out = j.at(k).get<std::decay_t<decltype(out)>>();
  };
  opt("base", d.base);
  opt("speed_gain", d.speed_gain);
  opt("rough_gain", d.rough_gain);
  opt("drive_bias", d.drive_bias);
  opt("grip_bias", d.grip_bias);
  opt("drag_bias", d.drag_bias);
  opt("drive_spread", d.drive_spread);
  opt("grip_spread", d.grip_spread);
  return d;
}

inline nlohmann::json to_json(const WorldSpec& s) {
  return {{"seed", s.seed},
          {"kind", terrain_name(s.kind)},
          {"size_x", s.size_x},
          {"size_y", s.size_y},
          {"resolution", s.resolution},
          {"origin_x", s.origin_x},
          {"origin_y", s.origin_y},
          {"slope_x", s.slope_x},
          {"slope_y", s.slope_y},
          {"roll_amplitude", s.roll_amplitude},
          {"roll_wavelength_min", s.roll_wavelength_min},
          {"roll_wavelength_max", s.roll_wavelength_max},
          {"roll_waves", s.roll_waves},
          {"obstacle_density", s.obstacle_density},
          {"obstacle_radius", s.obstacle_radius},
          {"corridor_width", s.corridor_width},
          {"corridor_amplitude", s.corridor_amplitude},
          {"corridor_period", s.corridor_period},
          {"trail_width", s.trail_width},
          {"risky_band", s.risky_band},
          {"speed_limit", s.speed_limit},
          {"disturbance", to_json(s.disturbance)}};
}

// Missing keys keep their defaults.
inline WorldSpec world_spec_from_json(const nlohmann::json& j) {
  WorldSpec s;
  auto opt = [&](const char* k, auto& out) {
    if (j.contains(k)) out = j.at(k).get<std::decay_t<decltype(out)>>();
  };
  opt("seed", s.seed);
  if (j.contains("kind")) s.kind = terrain_from_name(j.at("kind").get<std::string>());
  opt("size_x", s.size_x);
  opt("size_y", s.size_y);
  opt("resolution", s.resolution);
  opt("origin_x", s.origin_x);
  opt("origin_y", s.origin_y);
  opt("slope_x", s.slope_x);
  opt("slope_y", s.slope_y);
  opt("roll_amplitude", s.roll_amplitude);
  opt("roll_wavelength_min", s.roll_wavelength_min);
  opt("roll_wavelength_max", s.roll_wavelength_max);
  opt("roll_waves", s.roll_waves);
  opt("obstacle_density", s.obstacle_density);
  opt("obstacle_radius", s.obstacle_radius);
  opt("corridor_width", s.corridor_width);
  opt("corridor_amplitude", s.corridor_amplitude);
  opt("corridor_period", s.corridor_period);
  opt("trail_width", s.trail_width);
  opt("risky_band", s.risky_band);
  opt("speed_limit", s.speed_limit);
  if (j.contains("disturbance")) s.disturbance = disturbance_from_json(j.at("disturbance"));
  s.validate();
  return s;
}

}  // namespace bmppi::world
