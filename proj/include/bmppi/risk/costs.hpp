#pragma once

// Stage cost stack: traversability, speed limits, rollover and slip per sigma
// point; suspension force and acceleration terms on the mean only. All terms
// share one shaping rule: zero below `min`, a linear or quadratic ramp up to
// `weight` at `max`, and the constraint penalty beyond.

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "bmppi/risk/risk_measure.hpp"
#include "bmppi/risk/sigma_points.hpp"
#include "bmppi/vehicle/params.hpp"
#include "bmppi/vehicle/suspension.hpp"
#include "bmppi/world/elevation_map.hpp"

namespace bmppi::risk {

enum class Scaling { kLinear, kQuadratic };

struct ShapedTerm {
  double min = 0.0;
  double max = 1.0;
  Scaling scaling = Scaling::kLinear;
  double weight = 1.0;

  // Above `max` the value is penalty + weight so the shape stays monotone.
  double operator()(double v, double penalty) const {
    if (!(v > min)) return 0.0;
    if (v >= max) return penalty + weight;
    const double f = (v - min) / (max - min);
    return weight * (scaling == Scaling::kQuadratic ? f * f : f);
  }

  void validate(const std::string& name) const {
    if (!(min < max)) throw std::invalid_argument("cost term " + name + ": min must be below max");
    if (!(weight >= 0.0) || !std::isfinite(weight)) throw std::invalid_argument("cost term " + name + ": weight must be >= 0");
  }
};

// Speed limit falling linearly from `speed_lo` at `angle_lo` to `speed_hi` at
// `angle_hi`, no limit below `angle_lo` and held at `speed_hi` beyond.
struct SpeedTable {
  double angle_lo = 0.0;
  double angle_hi = 1.0;
  double speed_lo = 1.0;
  double speed_hi = 1.0;

  double limit(double angle) const {
    if (angle <= angle_lo) return std::numeric_limits<double>::infinity();
    if (angle >= angle_hi) return speed_hi;
    const double f = (angle - angle_lo) / (angle_hi - angle_lo);
    return speed_lo + f * (speed_hi - speed_lo);
  }

  void validate(const std::string& name) const {
    if (!(angle_lo < angle_hi)) throw std::invalid_argument("speed table " + name + ": angles must increase");
    if (!(speed_lo > 0.0 && speed_hi > 0.0)) throw std::invalid_argument("speed table " + name + ": speeds must be positive");
  }
};

struct CostConfig {
  double penalty = 1e4;
  double c_sigma = 2.0;
  RiskMeasure risk = RiskMeasure::cvar(1.0);

  // Traversability, multiplied by |v|. Lethal and unknown cells cost `penalty`.
  double wheel_risky = 5.0;
  double body_risky = 5.0;

  // Speed limits.
  ShapedTerm speed{0.0, 4.0, Scaling::kQuadratic, 50.0};  // on excess over the limit
  double reverse_multiplier = 5.0;
  double speed_cap = std::numeric_limits<double>::infinity();
  SpeedTable roll_table{0.15, 0.3, 6.0, 2.0};
  SpeedTable pitch_up_table{0.3, 0.8, 8.0, 4.0};
  SpeedTable pitch_down_table{0.2, 0.4, 4.0, 2.0};

  // Rollover is shaped on 1 - (normalized minimum side load).
  ShapedTerm rollover{0.3, 0.85, Scaling::kQuadratic, 50.0};
  double cg_height = 0.8;
  double track_width = 1.4;
  double wheelbase = 2.4;
  double gravity = 9.81;

  ShapedTerm slip{0.05, 0.8, Scaling::kQuadratic, 20.0};
  double slip_epsilon = 1e-3;

  // Mean-only terms.
  ShapedTerm force_up{6000.0, 20000.0, Scaling::kQuadratic, 1.0};
  ShapedTerm force_front{3000.0, 12000.0, Scaling::kQuadratic, 1.0};
  ShapedTerm force_side{3000.0, 12000.0, Scaling::kQuadratic, 1.0};
  ShapedTerm accel{3.0, 12.0, Scaling::kLinear, 0.2};
  ShapedTerm decel{5.0, 15.0, Scaling::kLinear, 0.1};

  // Terminal cost from the Dijkstra potential.
  double cost_to_go_weight = 10.0;
  double risky_traversal = 4.0;  // extra per-meter planner cost on risky cells
  double unreachable = 1e6;

  void validate() const {
    if (!(penalty > 0.0)) throw std::invalid_argument("penalty must be positive");
    if (!(c_sigma >= 0.0) || !std::isfinite(c_sigma)) throw std::invalid_argument("c_sigma must be >= 0");
    risk.validate();
    speed.validate("speed");
    rollover.validate("rollover");
    slip.validate("slip");
    force_up.validate("force_up");
    force_front.validate("force_front");
    force_side.validate("force_side");
    accel.validate("accel");
    decel.validate("decel");
    roll_table.validate("roll");
    pitch_up_table.validate("pitch_up");
    pitch_down_table.validate("pitch_down");
    if (!(reverse_multiplier >= 1.0)) throw std::invalid_argument("reverse multiplier must be >= 1");
    if (!(speed_cap > 0.0)) throw std::invalid_argument("speed cap must be positive");
    if (!(wheel_risky >= 0.0 && body_risky >= 0.0)) throw std::invalid_argument("traversability weights must be >= 0");
    if (!(cg_height > 0.0 && track_width > 0.0 && wheelbase > 0.0 && gravity > 0.0))
      throw std::invalid_argument("rollover geometry must be positive");
    if (!(slip_epsilon > 0.0)) throw std::invalid_argument("slip epsilon must be positive");
    if (!(cost_to_go_weight >= 0.0 && risky_traversal >= 0.0 && unreachable > 0.0))
      throw std::invalid_argument("cost-to-go settings must be non-negative");
  }
};

// ---- individual terms ---------------------------------------------------------

// Normalized minimum side load; 1 at rest on flat ground.
inline double rollover_value(double vx, double wheel_angle, double roll, double pitch, const CostConfig& c) {
  const double a = vx * vx * std::tan(wheel_angle) / c.wheelbase;
  const double s = 2.0 * c.cg_height / c.track_width * (a / c.gravity + std::cos(pitch) * std::sin(roll));
  const double base = std::cos(pitch) * std::cos(roll);
  return std::min(base + s, base - s);
}

inline double rollover_cost(double vx, double wheel_angle, double roll, double pitch, const CostConfig& c) {
  return c.rollover(1.0 - rollover_value(vx, wheel_angle, roll, pitch, c), c.penalty);
}

inline double slip_value(double vx, double vy, double eps = 1e-3) {
  return std::min(std::abs(std::atan(vy / (std::abs(vx) + eps))), std::abs(vy));
}

inline double slip_cost(double vx, double vy, const CostConfig& c) {
  return c.slip(slip_value(vx, vy, c.slip_epsilon), c.penalty);
}

// Pitch is positive nose-down, so climbing has negative pitch.
inline double attitude_speed_limit(double roll, double pitch, const CostConfig& c) {
  double lim = c.roll_table.limit(std::abs(roll));
  lim = std::min(lim, c.pitch_up_table.limit(-pitch));
  lim = std::min(lim, c.pitch_down_table.limit(pitch));
  return lim;
}

inline double speed_limit_cost(double vx, double limit, const CostConfig& c) {
  const double excess = std::abs(vx) - limit;
  const double v = c.speed(excess, c.penalty);
  return vx < 0.0 ? c.reverse_multiplier * v : v;
}

inline double class_cost(world::CellClass cls, double risky, const CostConfig& c) {
  switch (cls) {
    case world::CellClass::kFree:
    case world::CellClass::kTrail: return 0.0;
    case world::CellClass::kRisky: return risky;
    case world::CellClass::kLethal:
    case world::CellClass::kUnknown: return c.penalty;
  }
  return c.penalty;
}

struct TraversabilityCost {
  double wheel = 0.0;
  double body = 0.0;
  double min_speed_limit = std::numeric_limits<double>::infinity();  // over the wheel queries
  int lethal_hits = 0;
};

// Wheel queries at the leading edge of each tire and the body at the origin,
// placed with the full 6-DOF pose and scaled by planar speed.
inline TraversabilityCost traversability_cost(const vehicle::Pose6& pose, const world::ElevationMap& map,
                                              const vehicle::SuspensionParams& sp, double vx, double vy,
                                              const CostConfig& c) {
  TraversabilityCost out;
  const double speed = std::hypot(vx, vy);
  auto lethal = [](world::CellClass k) { return k == world::CellClass::kLethal || k == world::CellClass::kUnknown; };
  for (const auto& w : vehicle::wheel_front_positions(pose, sp)) {
    const auto q = map.query(w.x, w.y);
    out.wheel += class_cost(q.cls, c.wheel_risky, c);
    out.min_speed_limit = std::min(out.min_speed_limit, q.max_speed);
    out.lethal_hits += lethal(q.cls);
  }
  const auto body = vehicle::body_to_world(pose, {0.0, 0.0, 0.0});
  const auto qb = map.query(body.x, body.y);
  out.body = class_cost(qb.cls, c.body_risky, c);
  out.lethal_hits += lethal(qb.cls);
  out.wheel *= speed;
  out.body *= speed;
  return out;
}

// Wheel-frame front and side components of the vertical suspension force.
// The normal is in the heading frame.
inline std::array<double, 2> wheel_frame_forces(double f_up, const world::Normal& n, double wheel_angle, double roll,
                                                double pitch) {
  const double cd = std::cos(wheel_angle), sd = std::sin(wheel_angle);
  const double front = f_up / n[2] * (n[0] * cd + n[1] * sd - n[2] * pitch);
  const double side = f_up / n[2] * (-n[0] * sd + n[1] * cd + n[2] * roll);
  return {front, side};
}

inline double force_cost(const std::array<double, 4>& wheel_forces, const std::array<world::Normal, 4>& normals,
                         double wheel_angle, double roll, double pitch, const CostConfig& c) {
  double total = 0.0;
  for (int w = 0; w < 4; ++w) {
    if (!(normals[w][2] > 0.0)) throw std::invalid_argument("wheel normal must point up");
    const auto [front, side] = wheel_frame_forces(wheel_forces[w], normals[w], wheel_angle, roll, pitch);
    total += c.force_up(std::abs(wheel_forces[w]), c.penalty) + c.force_front(std::abs(front), c.penalty) +
             c.force_side(std::abs(side), c.penalty);
  }
  return total;
}

inline double accel_cost(double vx_dot, const CostConfig& c) {
  return vx_dot >= 0.0 ? c.accel(vx_dot, c.penalty) : c.decel(-vx_dot, c.penalty);
}

inline double step_distance(double vx, double vy, double dt) { return std::hypot(vx, vy) * dt; }

// ---- assembly -----------------------------------------------------------------

struct CostContext {
  const world::ElevationMap* map = nullptr;
  vehicle::SuspensionParams suspension;
  double c_delta = 15.0;  // steering-wheel to road-wheel ratio
  double dt = 0.02;
};

struct StageCost {
  double total = 0.0;
  double force = 0.0;
  double accel = 0.0;
  double distributional = 0.0;  // risk over the sigma points, before distance scaling
  double distance = 0.0;
  int lethal_hits = 0;          // at the mean point
};

// Cost of one sigma-point state; everything not in the reduced state (vy,
// steer, attitude) comes from the mean.
inline double point_cost(const vehicle::VehicleState& s, const CostContext& ctx, const CostConfig& c,
                         int* lethal_hits = nullptr) {
  const auto trav = traversability_cost(vehicle::Pose6::of(s), *ctx.map, ctx.suspension, s.vx, s.vy, c);
  if (lethal_hits) *lethal_hits = trav.lethal_hits;
  const double limit =
      std::min({trav.min_speed_limit, attitude_speed_limit(s.roll, s.pitch, c), c.speed_cap});
  const double wa = s.steer / ctx.c_delta;
  return trav.wheel + trav.body + speed_limit_cost(s.vx, limit, c) + rollover_cost(s.vx, wa, s.roll, s.pitch, c) +
         slip_cost(s.vx, s.vy, c);
}

inline StageCost stage_cost(const SigmaPointSet& points, const vehicle::VehicleState& mean, double prev_vx,
                            const std::array<double, 4>& wheel_forces, const CostContext& ctx, const CostConfig& c) {
  if (!ctx.map) throw std::invalid_argument("cost context has no map");
  StageCost out;
  std::array<double, kNumSigmaPoints> costs{};
  for (int k = 0; k < kNumSigmaPoints; ++k)
    costs[k] = point_cost(points.state(mean, k), ctx, c, k == 0 ? &out.lethal_hits : nullptr);
  out.distributional = evaluate_risk(costs, c.risk);
  out.distance = step_distance(mean.vx, mean.vy, ctx.dt);

  const double wa = mean.steer / ctx.c_delta;
  std::array<world::Normal, 4> normals;
  const auto wheels = vehicle::wheel_world_positions(vehicle::Pose6::of(mean), ctx.suspension);
  for (int w = 0; w < 4; ++w) normals[w] = vehicle::to_heading_frame(ctx.map->query(wheels[w].x, wheels[w].y).normal, mean.psi);
  out.force = force_cost(wheel_forces, normals, wa, mean.roll, mean.pitch, c);
  out.accel = accel_cost((mean.vx - prev_vx) / ctx.dt, c);
  out.total = out.force + out.accel + out.distance * out.distributional;
  return out;
}

// ---- JSON ---------------------------------------------------------------------

inline nlohmann::json to_json(const ShapedTerm& t) {
  return {{"min", t.min}, {"max", t.max}, {"scaling", t.scaling == Scaling::kQuadratic ? "quadratic" : "linear"},
          {"weight", t.weight}};
}

inline void from_json_into(const nlohmann::json& j, ShapedTerm& t) {
  t.min = j.value("min", t.min);
  t.max = j.value("max", t.max);
  t.weight = j.value("weight", t.weight);
  if (j.contains("scaling")) {
    const auto s = j.at("scaling").get<std::string>();
    if (s == "linear") t.scaling = Scaling::kLinear;
    else if (s == "quadratic") t.scaling = Scaling::kQuadratic;
    else throw std::invalid_argument("unknown cost scaling '" + s + "'");
  }
}

inline nlohmann::json to_json(const SpeedTable& t) {
  return {{"angle_lo", t.angle_lo}, {"angle_hi", t.angle_hi}, {"speed_lo", t.speed_lo}, {"speed_hi", t.speed_hi}};
}

inline void from_json_into(const nlohmann::json& j, SpeedTable& t) {
  t.angle_lo = j.value("angle_lo", t.angle_lo);
  t.angle_hi = j.value("angle_hi", t.angle_hi);
  t.speed_lo = j.value("speed_lo", t.speed_lo);
  t.speed_hi = j.value("speed_hi", t.speed_hi);
}

namespace detail {
// JSON has no infinity; a null speed cap means uncapped.
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace detail

inline nlohmann::json to_json(const CostConfig& c) {
  return {{"penalty", c.penalty},
          {"c_sigma", c.c_sigma},
          {"risk", to_json(c.risk)},
          {"wheel_risky", c.wheel_risky},
          {"body_risky", c.body_risky},
          {"speed", to_json(c.speed)},
          {"reverse_multiplier", c.reverse_multiplier},
          {"speed_cap", detail::finite_or_null(c.speed_cap)},
          {"roll_table", to_json(c.roll_table)},
          {"pitch_up_table", to_json(c.pitch_up_table)},
          {"pitch_down_table", to_json(c.pitch_down_table)},
          {"rollover", to_json(c.rollover)},
          {"cg_height", c.cg_height},
          {"track_width", c.track_width},
          {"wheelbase", c.wheelbase},
          {"gravity", c.gravity},
          {"slip", to_json(c.slip)},
          {"slip_epsilon", c.slip_epsilon},
          {"force_up", to_json(c.force_up)},
          {"force_front", to_json(c.force_front)},
          {"force_side", to_json(c.force_side)},
          {"accel", to_json(c.accel)},
          {"decel", to_json(c.decel)},
          {"cost_to_go_weight", c.cost_to_go_weight},
          {"risky_traversal", c.risky_traversal},
          {"unreachable", c.unreachable}};
}

inline CostConfig cost_config_from_json(const nlohmann::json& j) {
  CostConfig c;
  auto num = [&](const char* k, double& v) {
    if (j.contains(k)) v = j.at(k).get<double>();
  };
  num("penalty", c.penalty);
  num("c_sigma", c.c_sigma);
  if (j.contains("risk")) c.risk = risk_measure_from_json(j.at("risk"));
  num("wheel_risky", c.wheel_risky);
  num("body_risky", c.body_risky);
  num("reverse_multiplier", c.reverse_multiplier);
  if (j.contains("speed_cap"))
    c.speed_cap = j.at("speed_cap").is_null() ? std::numeric_limits<double>::infinity() : j.at("speed_cap").get<double>();
  num("cg_height", c.cg_height);
  num("track_width", c.track_width);
  num("wheelbase", c.wheelbase);
  num("gravity", c.gravity);
  num("slip_epsilon", c.slip_epsilon);
  num("cost_to_go_weight", c.cost_to_go_weight);
  num("risky_traversal", c.risky_traversal);
  num("unreachable", c.unreachable);
  for (auto [k, t] : {std::pair{"speed", &c.speed}, {"rollover", &c.rollover}, {"slip", &c.slip},
                      {"force_up", &c.force_up}, {"force_front", &c.force_front}, {"force_side", &c.force_side},
                      {"accel", &c.accel}, {"decel", &c.decel}})
    if (j.contains(k)) from_json_into(j.at(k), *t);
  for (auto [k, t] : {std::pair{"roll_table", &c.roll_table}, {"pitch_up_table", &c.pitch_up_table},
                      {"pitch_down_table", &c.pitch_down_table}})
    if (j.contains(k)) from_json_into(j.at(k), *t);
  c.validate();
  return c;
}

}  // namespace bmppi::risk
