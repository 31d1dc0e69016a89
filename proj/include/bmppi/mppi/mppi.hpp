#pragma once

// Sampling-based controller: colored control perturbations, batched belief
// rollouts costed through sigma points, softmin averaging and a receding
// horizon.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bmppi/belief/belief.hpp"
#include "bmppi/mppi/colored_noise.hpp"
#include "bmppi/risk/cost_to_go.hpp"
#include "bmppi/risk/costs.hpp"
#include "bmppi/risk/sigma_points.hpp"
#include "bmppi/vehicle/suspension.hpp"

namespace bmppi::mppi {

inline constexpr std::size_t kControlDim = 3;  // throttle, brake, steer
using Control = std::array<double, kControlDim>;
using ControlSequence = std::vector<Control>;
using ControlBatch = NoiseBatch<kControlDim>;

class NoFeasibleSample : public std::runtime_error {
 public:
  NoFeasibleSample() : std::runtime_error("no feasible sample: every rollout cost is infinite") {}
};

struct MppiConfig {
  int num_samples = 1024;
  int horizon = 250;
  double lambda = 1.0;
  Control noise_std{0.3, 0.3, 2.0};
  Control exponents{1.0, 1.0, 2.0};
  Control lower{0.0, 0.0, -6.0};
  Control upper{1.0, 1.0, 6.0};
  int iterations = 1;
  int threads = 0;  // 0: one per hardware thread
  bool keep_nominal = true;  // sample 0 replays the nominal sequence unperturbed
  // Quadratic control cost per second, added to every sample. Throttle and
  // brake can cancel each other, so without a brake term the pair drifts
  // along that direction.
  Control effort{0.0, 5.0, 0.05};
  std::uint64_t seed = 0;

  void validate() const {
    if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be positive");
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (threads < 0) throw std::invalid_argument("threads must be >= 0");
    for (std::size_t c = 0; c < kControlDim; ++c) {
      if (!(noise_std[c] >= 0.0)) throw std::invalid_argument("noise std must be >= 0");
      if (!(exponents[c] >= 0.0)) throw std::invalid_argument("noise exponent must be >= 0");
      if (!(lower[c] <= upper[c])) throw std::invalid_argument("control bounds inverted");
      if (!(effort[c] >= 0.0)) throw std::invalid_argument("effort weights must be >= 0");
    }
    if (lower[0] < 0.0 || upper[0] > 1.0 || lower[1] < 0.0 || upper[1] > 1.0)
      throw std::invalid_argument("throttle and brake bounds must lie in [0, 1]");
  }

  int thread_count() const {
    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    return threads > 0 ? threads : std::max(hw, 1);
  }
};

inline Control clamp_control(const Control& u, const MppiConfig& cfg) {
  Control out;
  for (std::size_t c = 0; c < kControlDim; ++c) out[c] = std::clamp(u[c], cfg.lower[c], cfg.upper[c]);
  return out;
}

inline vehicle::ControlInput to_input(const Control& u) { return vehicle::ControlInput(u[0], u[1], u[2]); }

// ---- weighted update ------------------------------------------------------------

struct UpdateResult {
  ControlSequence controls;
  std::vector<double> weights;
  double ess = 0.0;
  double best_cost = 0.0;
  double mean_cost = 0.0;  // over finite costs
  int best_index = -1;
};

// Softmin weights exp(-(S - S_min) / lambda); infinite or NaN costs get zero
// weight. Reduction order is fixed, so results do not depend on threading.
inline UpdateResult mppi_update(std::span<const double> costs, const ControlBatch& controls, double lambda) {
  if (static_cast<int>(costs.size()) != controls.samples) throw std::invalid_argument("cost count does not match samples");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  UpdateResult r;
  double best = std::numeric_limits<double>::infinity(), sum = 0.0;
  int finite = 0;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    if (!std::isfinite(costs[k])) continue;
    ++finite;
    sum += costs[k];
    if (costs[k] < best) {
      best = costs[k];
      r.best_index = static_cast<int>(k);
    }
  }
  if (finite == 0) throw NoFeasibleSample();
  r.best_cost = best;
  r.mean_cost = sum / finite;
  r.weights.assign(costs.size(), 0.0);
  double norm = 0.0;
  for (std::size_t k = 0; k < costs.size(); ++k)
    if (std::isfinite(costs[k])) norm += r.weights[k] = std::exp(-(costs[k] - best) / lambda);
  double sq = 0.0;
  for (auto& w : r.weights) {
    w /= norm;
    sq += w * w;
  }
  r.ess = 1.0 / sq;
  r.controls.assign(static_cast<std::size_t>(controls.horizon), Control{});
  for (int k = 0; k < controls.samples; ++k) {
    const double w = r.weights[static_cast<std::size_t>(k)];
    if (w == 0.0) continue;
    for (int t = 0; t < controls.horizon; ++t)
      for (std::size_t c = 0; c < kControlDim; ++c) r.controls[static_cast<std::size_t>(t)][c] += w * controls.at(k, t, c);
  }
  return r;
}

// ---- rollouts -------------------------------------------------------------------

struct RolloutWorld {
  const world::ElevationMap* map = nullptr;
  const risk::CostToGo* cost_to_go = nullptr;  // optional
  risk::CostConfig cost;
  risk::CostContext context;  // context.map must equal map
};

struct RolloutStart {
  belief::Belief belief;
  belief::Hidden<double> hidden;
  double prev_vx = 0.0;
};

struct RolloutTrace {
  std::vector<vehicle::VehicleState> means;
  std::vector<Mat4<double>> covariances;
  std::vector<double> stage_costs;
  double terminal = 0.0;
  double total = 0.0;
  int lethal_steps = 0;
};

// Wheel readings and suspension from the predicted mean, belief step, then the
// stage cost. Non-finite results make the whole sample infinite.
inline double rollout_sample(const belief::BeliefModel<double>& model, const RolloutStart& start,
                             const ControlBatch& controls, int k, const RolloutWorld& w, RolloutTrace* trace = nullptr) {
  if (!w.map) throw std::invalid_argument("rollout world has no map");
  const auto& sp = model.model().suspension;
  const auto& vp = model.model().vehicle;
  const double dt = model.dt();
  belief::Belief b = start.belief;
  belief::Hidden<double> h = start.hidden;
  double prev_vx = start.prev_vx;
  std::vector<double> stage;
  std::vector<std::array<double, 2>> positions;
  stage.reserve(static_cast<std::size_t>(controls.horizon));
  positions.reserve(static_cast<std::size_t>(controls.horizon));
  if (trace) *trace = {};
  constexpr double kInf = std::numeric_limits<double>::infinity();
  try {
    for (int t = 0; t < controls.horizon; ++t) {
      const Control u{controls.at(k, t, 0), controls.at(k, t, 1), controls.at(k, t, 2)};
      const auto pose = vehicle::Pose6::of(b.mean);
      const auto y = vehicle::terrain_readings(pose, *w.map, sp);
      const auto susp = vehicle::step_suspension(b.mean, *w.map, sp, vp, dt);
      model.step(b, h, to_input(u), y);
      auto& m = b.mean;
      m.pz = susp.state.pz;
      m.roll = susp.state.roll;
      m.pitch = susp.state.pitch;
      m.pz_dot = susp.state.pz_dot;
      m.roll_rate = susp.state.roll_rate;
      m.pitch_rate = susp.state.pitch_rate;
      if (!m.finite() || !all_finite(b.cov)) return kInf;
      const auto pts = risk::sigma_points(b, w.cost.c_sigma);
      const auto sc = risk::stage_cost(pts, m, prev_vx, susp.wheel_forces, w.context, w.cost);
      if (!std::isfinite(sc.total)) return kInf;
      prev_vx = m.vx;
      stage.push_back(sc.total);
      positions.push_back({m.px, m.py});
      if (trace) {
        trace->means.push_back(m);
        trace->covariances.push_back(b.cov);
        trace->lethal_steps += sc.lethal_hits > 0;
      }
    }
  } catch (const std::invalid_argument&) {
    return kInf;  // degenerate readings or controls
  }
  double total = 0.0;
  for (double s : stage) total += s;
  double terminal = 0.0;
  if (w.cost_to_go) terminal = risk::terminal_cost(stage, positions, *w.cost_to_go, w.cost).value;
  total += terminal;
  if (trace) {
    trace->stage_costs = stage;
    trace->terminal = terminal;
    trace->total = total;
  }
  return std::isfinite(total) ? total : kInf;
}

// Runs fn(i) for i in [0, n) over contiguous chunks on `threads` threads.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(n, 1));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    const int lo = static_cast<int>(static_cast<long>(n) * t / threads);
    const int hi = static_cast<int>(static_cast<long>(n) * (t + 1) / threads);
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline std::vector<double> rollout_batch(const belief::BeliefModel<double>& model, const RolloutStart& start,
                                         const ControlBatch& controls, const RolloutWorld& w, int threads = 1) {
  std::vector<double> costs(static_cast<std::size_t>(controls.samples));
  parallel_for(controls.samples, threads,
               [&](int k) { costs[static_cast<std::size_t>(k)] = rollout_sample(model, start, controls, k, w); });
  return costs;
}

// Belief propagation only (flat readings, no costing); the throughput floor.
inline void propagate_batch(const belief::BeliefModel<double>& model, const RolloutStart& start,
                            const ControlBatch& controls, std::span<belief::Belief> final_beliefs, int threads = 1) {
  if (static_cast<int>(final_beliefs.size()) != controls.samples) throw std::invalid_argument("output size mismatch");
  const auto y = vehicle::SensorReadings::flat();
  parallel_for(controls.samples, threads, [&](int k) {
    belief::Belief b = start.belief;
    belief::Hidden<double> h = start.hidden;
    for (int t = 0; t < controls.horizon; ++t)
      model.step(b, h, to_input({controls.at(k, t, 0), controls.at(k, t, 1), controls.at(k, t, 2)}), y);
    final_beliefs[static_cast<std::size_t>(k)] = b;
  });
}

// ---- receding horizon -----------------------------------------------------------

struct Diagnostics {
  int step = 0;
  double best_cost = 0.0;
  double mean_cost = 0.0;
  double ess = 0.0;
  Control command{};
};

inline std::string diagnostics_csv_header() { return "step,best_cost,mean_cost,ess,throttle,brake,steer"; }

inline std::string diagnostics_csv_row(const Diagnostics& d) {
  std::ostringstream o;
  o.precision(10);
  o << d.step << ',' << d.best_cost << ',' << d.mean_cost << ',' << d.ess << ',' << d.command[0] << ','
    << d.command[1] << ',' << d.command[2];
  return o.str();
}

// splitmix64 finalizer, used to derive per-step noise seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Controller {
 public:
  Controller(const belief::BeliefModel<double>& model, RolloutWorld world, MppiConfig cfg)
      : model_(&model), world_(std::move(world)), cfg_(cfg) {
    cfg_.validate();
    world_.cost.validate();
    if (!world_.map) throw std::invalid_argument("controller needs a map");
    world_.context.map = world_.map;
    world_.context.dt = model.dt();
    world_.context.c_delta = model.model().vehicle.c_delta;
    reset();
  }

  void reset(const Control& fill = {0.0, 0.0, 0.0}) {
    nominal_.assign(static_cast<std::size_t>(cfg_.horizon), clamp_control(fill, cfg_));
    steps_ = 0;
  }

  struct Output {
    vehicle::ControlInput command;
    Diagnostics diagnostics;
  };

  // Optimizes around the current nominal, emits its first control and shifts
  // the sequence by one step (the tail repeats).
  Output step(const RolloutStart& start) {
    UpdateResult last;
    for (int it = 0; it < cfg_.iterations; ++it) {
      const auto noise = sample_colored<kControlDim>(cfg_.num_samples, cfg_.horizon, cfg_.noise_std, cfg_.exponents,
                                                     mix_seed(cfg_.seed, static_cast<std::uint64_t>(steps_) * 1024 + it));
      // Rollouts see clamped controls; the weighted average is taken over the
      // unclamped perturbations so clamping at a bound does not bias the
      // nominal away from it.
      ControlBatch controls = noise, raw = noise;
      for (int k = 0; k < cfg_.num_samples; ++k)
        for (int t = 0; t < cfg_.horizon; ++t) {
          Control u = nominal_[static_cast<std::size_t>(t)];
          if (!(cfg_.keep_nominal && k == 0))
            for (std::size_t c = 0; c < kControlDim; ++c) u[c] += noise.at(k, t, c);
          const Control uc = clamp_control(u, cfg_);
          for (std::size_t c = 0; c < kControlDim; ++c) {
            raw.at(k, t, c) = u[c];
            controls.at(k, t, c) = uc[c];
          }
        }
      auto costs = rollout_batch(*model_, start, controls, world_, cfg_.thread_count());
      for (int k = 0; k < cfg_.num_samples; ++k) {
        double e = 0.0;
        for (int t = 0; t < cfg_.horizon; ++t)
          for (std::size_t c = 0; c < kControlDim; ++c) e += cfg_.effort[c] * controls.at(k, t, c) * controls.at(k, t, c);
        costs[static_cast<std::size_t>(k)] += e * model_->dt();
      }
      last = mppi_update(costs, raw, cfg_.lambda);
      nominal_ = last.controls;
      for (auto& u : nominal_) u = clamp_control(u, cfg_);
    }
    Output out;
    const Control cmd = clamp_control(nominal_.front(), cfg_);
    out.command = to_input(cmd);
    out.diagnostics = {steps_, last.best_cost, last.mean_cost, last.ess, cmd};
    shift();
    ++steps_;
    return out;
  }

  void shift() {
    std::rotate(nominal_.begin(), nominal_.begin() + 1, nominal_.end());
    nominal_.back() = nominal_[nominal_.size() >= 2 ? nominal_.size() - 2 : 0];
  }

  const ControlSequence& nominal() const { return nominal_; }
  const MppiConfig& config() const { return cfg_; }
  const RolloutWorld& world() const { return world_; }
  int steps() const { return steps_; }

 private:
  const belief::BeliefModel<double>* model_;
  RolloutWorld world_;
  MppiConfig cfg_;
  ControlSequence nominal_;
  int steps_ = 0;
};

// ---- JSON -----------------------------------------------------------------------

inline nlohmann::json to_json(const MppiConfig& c) {
  return {{"num_samples", c.num_samples}, {"horizon", c.horizon}, {"lambda", c.lambda},
          {"noise_std", c.noise_std},     {"exponents", c.exponents}, {"lower", c.lower},
          {"upper", c.upper},             {"iterations", c.iterations}, {"threads", c.threads},
          {"keep_nominal", c.keep_nominal}, {"effort", c.effort}, {"seed", c.seed}};
}

inline MppiConfig mppi_config_from_json(const nlohmann::json& j) {
  MppiConfig c;
  c.num_samples = j.value("num_samples", c.num_samples);
  c.horizon = j.value("horizon", c.horizon);
  c.lambda = j.value("lambda", c.lambda);
  c.noise_std = j.value("noise_std", c.noise_std);
  c.exponents = j.value("exponents", c.exponents);
  c.lower = j.value("lower", c.lower);
  c.upper = j.value("upper", c.upper);
  c.iterations = j.value("iterations", c.iterations);
  c.threads = j.value("threads", c.threads);
  c.keep_nominal = j.value("keep_nominal", c.keep_nominal);
  c.effort = j.value("effort", c.effort);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

}  // namespace bmppi::mppi
