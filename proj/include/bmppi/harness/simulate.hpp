#pragma once

// Closed-loop simulation: the hidden-parameter truth vehicle driven by the
// belief-space controller, one replan per control step.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "bmppi/harness/config.hpp"
#include "bmppi/mppi/mppi.hpp"
#include "bmppi/risk/cost_to_go.hpp"
#include "bmppi/risk/costs.hpp"
#include "bmppi/world/truth.hpp"

namespace bmppi::harness {

struct SimRow {
  double t = 0.0;
  vehicle::VehicleState state;  // true state at t, before the command acts
  vehicle::ControlInput command;
  double best_cost = 0.0;
  double ess = 0.0;
  double terminal_trace = std::numeric_limits<double>::quiet_NaN();  // trace of the planned final covariance
  double speed_limit = std::numeric_limits<double>::infinity();
  double clearance = 0.0;
  bool lethal = false;
  bool infeasible = false;  // every sample was infinite; a full brake was applied
};

struct SimSummary {
  int steps = 0;
  double duration = 0.0;
  double avg_speed = 0.0;
  double max_speed = 0.0;
  // Mean speed over the second half of the run, after the launch transient.
  double cruise_speed = 0.0;
  // Highest one-second moving average of the speed.
  double peak_speed = 0.0;
  double distance = 0.0;
  double min_clearance = 0.0;
  int lethal_contacts = 0;  // entries into lethal contact
  int lethal_steps = 0;
  int infeasible_steps = 0;
  double pct_at_speed_limit = 0.0;
  bool goal_reached = false;
  double goal_time = std::numeric_limits<double>::quiet_NaN();
};

struct SimResult {
  std::vector<SimRow> rows;
  SimSummary summary;
};

// Distance from (x, y) to the nearest lethal cell center, capped at `radius`.
inline double lethal_clearance(const world::ElevationMap& map, double x, double y, double radius) {
  const auto [ci, cj] = map.cell_of(x, y);
  const int r = static_cast<int>(std::ceil(radius / map.resolution()));
  double best = radius;
  for (int j = cj - r; j <= cj + r; ++j)
    for (int i = ci - r; i <= ci + r; ++i) {
      if (!map.contains_cell(i, j) || map.class_at(i, j) != world::CellClass::kLethal) continue;
      best = std::min(best, std::hypot(map.cell_center_x(i) - x, map.cell_center_y(j) - y));
    }
  return best;
}

// Speed limit the cost function applies at a state: map layer at the wheels
// and body, attitude tables and the global cap.
inline double effective_speed_limit(const vehicle::VehicleState& s, const world::ElevationMap& map,
                                    const vehicle::SuspensionParams& sp, const risk::CostConfig& c) {
  const auto trav = risk::traversability_cost(vehicle::Pose6::of(s), map, sp, s.vx, s.vy, c);
  return std::min({trav.min_speed_limit, risk::attitude_speed_limit(s.roll, s.pitch, c), c.speed_cap});
}

inline SimSummary summarize(std::span<const SimRow> rows, const SimConfig& cfg, bool goal_reached, double goal_time) {
  SimSummary s;
  s.steps = static_cast<int>(rows.size());
  s.duration = s.steps * cfg.dt;
  s.goal_reached = goal_reached;
  s.goal_time = goal_time;
  if (rows.empty()) return s;
  s.min_clearance = std::numeric_limits<double>::infinity();
  double sum = 0.0, cruise = 0.0;
  int at_limit = 0, cruise_n = 0;
  bool prev_lethal = false;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    const double v = std::hypot(r.state.vx, r.state.vy);
    sum += v;
    s.max_speed = std::max(s.max_speed, v);
    if (2 * k >= rows.size()) {
      cruise += v;
      ++cruise_n;
    }
    s.distance += v * cfg.dt;
    s.min_clearance = std::min(s.min_clearance, r.clearance);
    if (std::isfinite(r.speed_limit) && std::abs(r.state.vx) >= cfg.at_limit_fraction * r.speed_limit) ++at_limit;
    s.lethal_steps += r.lethal;
    s.lethal_contacts += r.lethal && !prev_lethal;
    prev_lethal = r.lethal;
    s.infeasible_steps += r.infeasible;
  }
  s.avg_speed = sum / static_cast<double>(rows.size());
  const std::size_t win = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(1.0 / cfg.dt)));
  double acc = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    acc += std::hypot(rows[k].state.vx, rows[k].state.vy);
    if (k >= win) acc -= std::hypot(rows[k - win].state.vx, rows[k - win].state.vy);
    if (k + 1 >= win || k + 1 == rows.size()) s.peak_speed = std::max(s.peak_speed, acc / static_cast<double>(std::min(k + 1, win)));
  }
  s.cruise_speed = cruise_n ? cruise / cruise_n : 0.0;
  s.pct_at_speed_limit = 100.0 * at_limit / static_cast<double>(rows.size());
  return s;
}

// Runs the closed loop for cfg.sim.duration (or until the goal is reached when
// stop_at_goal is set). `nets` selects the learned model; null uses the fixed
// noise intensities of the belief block. Throws NumericalFailure if the true
// state becomes non-finite.
inline SimResult simulate(const RunConfig& cfg, const world::ElevationMap& map, const learn::NetworkParams* nets,
                          const std::function<void(const SimRow&)>& on_step = {}) {
  const auto& sc = cfg.sim;
  sc.validate();
  const double dt = sc.dt;
  const auto model = belief::make_model(cfg.vehicle, nets, cfg.belief.gains(), dt, cfg.belief.fixed);
  const auto& sp = cfg.vehicle.suspension;

  const auto ctg = risk::CostToGo::to_point(map, sc.goal_x, sc.goal_y, cfg.cost);
  mppi::RolloutWorld rw;
  rw.map = &map;
  rw.cost_to_go = &ctg;
  rw.cost = cfg.cost;
  rw.context.suspension = sp;
  mppi::Controller ctl(model, rw, cfg.mppi);

  std::mt19937_64 rng(mppi::mix_seed(cfg.seed, 0x7275));
  const auto truth = world::sample_truth_vehicle(cfg.vehicle, cfg.world.disturbance, &rng);
  auto x = world::settled_state(map, truth.model.suspension, sc.start_x, sc.start_y, sc.start_psi, sc.start_speed, 0.0);

  const int history_len = static_cast<int>(std::lround(cfg.collect.tau / dt)) + 1;
  std::deque<belief::HistoryFrame> history;
  vehicle::ControlInput last_cmd{};
  double prev_vx = x.vx;

  const int n = static_cast<int>(std::lround(sc.duration / dt));
  SimResult out;
  out.rows.reserve(static_cast<std::size_t>(n));
  bool reached = false;
  double goal_time = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < n; ++k) {
    SimRow row;
    row.t = k * dt;
    row.state = x;

    history.push_back({x, last_cmd, vehicle::terrain_readings(vehicle::Pose6::of(x), map, sp)});
    while (static_cast<int>(history.size()) > history_len) history.pop_front();
    const std::vector<belief::HistoryFrame> window(history.begin(), history.end());
    const auto init = model.initialize(window);
    const mppi::RolloutStart start{{x, init.cov}, init.hidden, prev_vx};

    try {
      const auto step = ctl.step(start);
      row.command = step.command;
      row.best_cost = step.diagnostics.best_cost;
      row.ess = step.diagnostics.ess;
      // The optimized sequence before the shift is the emitted command
      // followed by the shifted nominal.
      const auto& nom = ctl.nominal();
      mppi::ControlBatch plan{1, static_cast<int>(nom.size()), std::vector<double>(nom.size() * mppi::kControlDim)};
      plan.at(0, 0, 0) = step.command.throttle;
      plan.at(0, 0, 1) = step.command.brake;
      plan.at(0, 0, 2) = step.command.steer;
      for (std::size_t t = 1; t < nom.size(); ++t)
        for (std::size_t c = 0; c < mppi::kControlDim; ++c) plan.at(0, static_cast<int>(t), c) = nom[t - 1][c];
      mppi::RolloutTrace tr;
      mppi::rollout_sample(model, start, plan, 0, ctl.world(), &tr);
      if (!tr.covariances.empty()) {
        const auto& p = tr.covariances.back();
        row.terminal_trace = p(0, 0) + p(1, 1) + p(2, 2) + p(3, 3);
      }
    } catch (const mppi::NoFeasibleSample&) {
      row.command = {0.0, 1.0, 0.0};
      row.infeasible = true;
      ctl.reset();
    }

    row.speed_limit = effective_speed_limit(x, map, sp, cfg.cost);
    row.clearance = lethal_clearance(map, x.px, x.py, sc.clearance_search);
    row.lethal = risk::traversability_cost(vehicle::Pose6::of(x), map, sp, x.vx, x.vy, cfg.cost).lethal_hits > 0;
    out.rows.push_back(row);
    if (on_step) on_step(row);

    if (!reached && std::hypot(x.px - sc.goal_x, x.py - sc.goal_y) <= sc.goal_radius) {
      reached = true;
      goal_time = row.t;
      if (sc.stop_at_goal) break;
    }

    prev_vx = x.vx;
    last_cmd = row.command;
    x = world::truth_step(x, row.command, map, truth, rng, dt).state;
    if (!x.finite()) throw NumericalFailure("true state became non-finite at t = " + std::to_string((k + 1) * dt));
  }
  out.summary = summarize(out.rows, sc, reached, goal_time);
  return out;
}

// ---- output ---------------------------------------------------------------------

inline const char* sim_log_header() {
  return "t,px,py,pz,roll,pitch,psi,vx,vy,yaw_rate,brake,rpm,steer,throttle_cmd,brake_cmd,steer_cmd,best_cost,ess,"
         "terminal_trace,speed_limit,clearance,lethal";
}

inline void write_sim_log(std::ostream& os, std::span<const SimRow> rows) {
  os << "# schema_version=" << kOutputSchemaVersion << "\n" << sim_log_header() << "\n";
  os.precision(10);
  auto num = [&](double v) -> std::ostream& {
    if (std::isfinite(v)) os << v;
    else if (std::isnan(v)) os << "nan";
    else os << (v > 0 ? "inf" : "-inf");
    return os;
  };
  for (const auto& r : rows) {
    const auto& s = r.state;
    for (double v : {r.t, s.px, s.py, s.pz, s.roll, s.pitch, s.psi, s.vx, s.vy, s.yaw_rate, s.brake, s.rpm, s.steer,
                     r.command.throttle, r.command.brake, r.command.steer, r.best_cost, r.ess, r.terminal_trace,
                     r.speed_limit, r.clearance})
      num(v) << ',';
    os << (r.lethal ? 1 : 0) << "\n";
  }
}

inline nlohmann::json to_json(const SimSummary& s) {
  auto fin = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"schema_version", kOutputSchemaVersion},
          {"steps", s.steps},
          {"duration", s.duration},
          {"avg_speed", s.avg_speed},
          {"max_speed", s.max_speed},
          {"cruise_speed", s.cruise_speed},
          {"peak_speed", s.peak_speed},
          {"distance", s.distance},
          {"min_obstacle_clearance", fin(s.min_clearance)},
          {"lethal_contacts", s.lethal_contacts},
          {"lethal_steps", s.lethal_steps},
          {"infeasible_steps", s.infeasible_steps},
          {"pct_time_at_speed_limit", s.pct_at_speed_limit},
          {"goal_reached", s.goal_reached},
          {"goal_time", fin(s.goal_time)}};
}

}  // namespace bmppi::harness
