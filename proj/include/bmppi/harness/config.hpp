#pragma once

// Run configuration shared by every CLI verb: one versioned JSON document with
// a block per module. Missing blocks and keys keep their defaults; unknown
// top-level keys are rejected so typos surface as config errors.

#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bmppi/belief/belief.hpp"
#include "bmppi/learn/ablation.hpp"
#include "bmppi/learn/network_params.hpp"
#include "bmppi/learn/rollout_loss.hpp"
#include "bmppi/learn/trainer.hpp"
#include "bmppi/mppi/mppi.hpp"
#include "bmppi/risk/costs.hpp"
#include "bmppi/vehicle/params.hpp"
#include "bmppi/world/terrain.hpp"
#include "bmppi/world/truth.hpp"

namespace bmppi::harness {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kOutputSchemaVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Paths {
  std::string map;      // optional; the world block is generated when empty
  std::string dataset;  // JSONL trajectories
  std::string weights;  // network parameters JSON; empty runs the fixed-noise model
  std::string output = "out";
};

struct TrainSection {
  std::string variant = "baseline";
  learn::TrainConfig train;
  learn::NetworkSizes sizes;
  learn::NoiseScales scales;
  double regularization = learn::kRegularizationWeight;
  bool closed_loop = false;   // train with the tracking gains folded in
  int max_steps = 100;        // rollout length per training sample; < 0 keeps all
  double val_fraction = 0.25; // tail of the dataset held out
  std::string resume;         // checkpoint JSON to continue from
};

struct AblationSection {
  std::vector<std::string> variants = {"baseline", "no_A", "no_G", "FF"};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
};

struct BeliefSection {
  belief::FixedNoise fixed{{0.0, 0.0, 0.0, 0.0}, {0.05, 0.05, 0.01, 0.1}};
  bool closed_loop = true;
  double speed_gain = 2.0;
  double heading_gain = 1.0;

  belief::GainSet gains() const {
    return closed_loop ? belief::GainSet::tracking(speed_gain, heading_gain) : belief::GainSet::open_loop();
  }
};

struct SimConfig {
  double duration = 15.0;  // s
  double dt = vehicle::kDefaultDt;
  double start_x = 0.0, start_y = 0.0, start_psi = 0.0, start_speed = 0.0;
  double goal_x = 80.0, goal_y = 0.0;
  double goal_radius = 3.0;
  bool stop_at_goal = true;
  // A step counts as "at the speed limit" when |vx| is within this fraction of it.
  double at_limit_fraction = 0.9;
  double clearance_search = 10.0;  // m; clearances beyond this are reported as this value

  void validate() const {
    if (!(duration > 0.0)) throw ConfigError("sim.duration must be positive");
    if (!(dt > 0.0)) throw ConfigError("sim.dt must be positive");
    if (!(goal_radius > 0.0)) throw ConfigError("sim.goal_radius must be positive");
    if (!(at_limit_fraction > 0.0 && at_limit_fraction <= 1.0)) throw ConfigError("sim.at_limit_fraction must be in (0, 1]");
    if (!(clearance_search > 0.0)) throw ConfigError("sim.clearance_search must be positive");
  }
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 0;
  Paths paths;
  vehicle::ModelParams vehicle;
  world::WorldSpec world;
  world::CollectConfig collect;
  TrainSection train;
  AblationSection ablation;
  BeliefSection belief;
  risk::CostConfig cost;
  mppi::MppiConfig mppi;
  SimConfig sim;

  // Every seeded component derives its stream from the run seed; the world
  // block keeps its own seed so one course can be driven under many runs.
  void apply_seed(std::uint64_t s) {
    seed = s;
    collect.seed = s;
    train.train.seed = s;
    mppi.seed = s;
  }
};

// ---- JSON -----------------------------------------------------------------------

namespace detail {

template <class V>
void opt(const nlohmann::json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

inline nlohmann::json adam_json(const learn::AdamConfig& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}, {"clip_norm", a.clip_norm}};
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  const auto& t = c.train;
  return {
      {"schema_version", c.schema_version},
      {"seed", c.seed},
      {"paths", {{"map", c.paths.map}, {"dataset", c.paths.dataset}, {"weights", c.paths.weights}, {"output", c.paths.output}}},
      {"vehicle", vehicle::to_json(c.vehicle)},
      {"world", world::to_json(c.world)},
      {"collect",
       {{"n_traj", c.collect.n_traj},
        {"dt", c.collect.dt},
        {"horizon", c.collect.horizon},
        {"tau", c.collect.tau},
        {"min_speed", c.collect.min_speed},
        {"max_speed", c.collect.max_speed}}},
      {"train",
       {{"variant", t.variant},
        {"epochs", t.train.epochs},
        {"batch_size", t.train.batch_size},
        {"adam", detail::adam_json(t.train.adam)},
        {"sizes",
         {{"predictor_hidden", t.sizes.predictor_hidden},
          {"output_hidden", t.sizes.output_hidden},
          {"init_hidden", t.sizes.init_hidden},
          {"init_dense", t.sizes.init_dense},
          {"ff_hidden", t.sizes.ff_hidden},
          {"combined_hidden", t.sizes.combined_hidden}}},
        {"scales", {{"channel", t.scales.channel}, {"unstructured", t.scales.unstructured}, {"initial", t.scales.initial}}},
        {"regularization", t.regularization},
        {"closed_loop", t.closed_loop},
        {"max_steps", t.max_steps},
        {"val_fraction", t.val_fraction},
        {"resume", t.resume}}},
      {"ablation", {{"variants", c.ablation.variants}, {"seeds", c.ablation.seeds}}},
      {"belief",
       {{"channel_noise", c.belief.fixed.channel},
        {"unstructured_noise", c.belief.fixed.unstructured},
        {"closed_loop", c.belief.closed_loop},
        {"speed_gain", c.belief.speed_gain},
        {"heading_gain", c.belief.heading_gain}}},
      {"cost", risk::to_json(c.cost)},
      {"mppi", mppi::to_json(c.mppi)},
      {"sim",
       {{"duration", c.sim.duration},
        {"dt", c.sim.dt},
        {"start", {c.sim.start_x, c.sim.start_y, c.sim.start_psi}},
        {"start_speed", c.sim.start_speed},
        {"goal", {c.sim.goal_x, c.sim.goal_y}},
        {"goal_radius", c.sim.goal_radius},
        {"stop_at_goal", c.sim.stop_at_goal},
        {"at_limit_fraction", c.sim.at_limit_fraction},
        {"clearance_search", c.sim.clearance_search}}},
  };
}

// Throws ConfigError for a wrong schema version, unknown keys, mistyped values
// or values rejected by a module's own validation.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using detail::opt;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("schema_version")) throw ConfigError("config is missing schema_version");
  RunConfig c;
  try {
    const int v = j.at("schema_version").get<int>();
    if (v != kConfigSchemaVersion)
      throw ConfigError("config schema_version " + std::to_string(v) + " is not supported (expected " +
                        std::to_string(kConfigSchemaVersion) + ")");
    static const std::set<std::string> known = {"schema_version", "seed",  "paths", "vehicle", "world", "collect",
                                                "train",          "ablation", "belief", "cost", "mppi", "sim"};
    for (const auto& [k, _] : j.items())
      if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");

    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      opt(p, "map", c.paths.map);
      opt(p, "dataset", c.paths.dataset);
      opt(p, "weights", c.paths.weights);
      opt(p, "output", c.paths.output);
    }
    if (j.contains("vehicle")) c.vehicle = vehicle::model_params_from_json(j.at("vehicle"));
    if (j.contains("world")) c.world = world::world_spec_from_json(j.at("world"));
    c.world.validate();
    if (j.contains("collect")) {
      const auto& s = j.at("collect");
      opt(s, "n_traj", c.collect.n_traj);
      opt(s, "dt", c.collect.dt);
      opt(s, "horizon", c.collect.horizon);
      opt(s, "tau", c.collect.tau);
      opt(s, "min_speed", c.collect.min_speed);
      opt(s, "max_speed", c.collect.max_speed);
    }
    if (c.collect.n_traj < 0) throw ConfigError("collect.n_traj must be >= 0");
    if (!(c.collect.dt > 0.0) || !(c.collect.horizon > 0.0) || !(c.collect.tau >= 0.0))
      throw ConfigError("collect timing must be positive");
    if (j.contains("train")) {
      const auto& s = j.at("train");
      auto& t = c.train;
      opt(s, "variant", t.variant);
      opt(s, "epochs", t.train.epochs);
      opt(s, "batch_size", t.train.batch_size);
      if (s.contains("adam")) {
        const auto& a = s.at("adam");
        opt(a, "lr", t.train.adam.lr);
        opt(a, "beta1", t.train.adam.beta1);
        opt(a, "beta2", t.train.adam.beta2);
        opt(a, "eps", t.train.adam.eps);
        opt(a, "clip_norm", t.train.adam.clip_norm);
      }
      if (s.contains("sizes")) {
        const auto& z = s.at("sizes");
        opt(z, "predictor_hidden", t.sizes.predictor_hidden);
        opt(z, "output_hidden", t.sizes.output_hidden);
        opt(z, "init_hidden", t.sizes.init_hidden);
        opt(z, "init_dense", t.sizes.init_dense);
        opt(z, "ff_hidden", t.sizes.ff_hidden);
        opt(z, "combined_hidden", t.sizes.combined_hidden);
      }
      if (s.contains("scales")) {
        const auto& z = s.at("scales");
        opt(z, "channel", t.scales.channel);
        opt(z, "unstructured", t.scales.unstructured);
        opt(z, "initial", t.scales.initial);
      }
      opt(s, "regularization", t.regularization);
      opt(s, "closed_loop", t.closed_loop);
      opt(s, "max_steps", t.max_steps);
      opt(s, "val_fraction", t.val_fraction);
      opt(s, "resume", t.resume);
    }
    learn::Variant::named(c.train.variant);
    if (c.train.train.epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (c.train.train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(c.train.train.adam.lr > 0.0)) throw ConfigError("train.adam.lr must be positive");
    if (!(c.train.val_fraction >= 0.0 && c.train.val_fraction < 1.0))
      throw ConfigError("train.val_fraction must be in [0, 1)");
    if (j.contains("ablation")) {
      const auto& s = j.at("ablation");
      opt(s, "variants", c.ablation.variants);
      opt(s, "seeds", c.ablation.seeds);
    }
    if (j.contains("belief")) {
      const auto& s = j.at("belief");
      opt(s, "channel_noise", c.belief.fixed.channel);
      opt(s, "unstructured_noise", c.belief.fixed.unstructured);
      opt(s, "closed_loop", c.belief.closed_loop);
      opt(s, "speed_gain", c.belief.speed_gain);
      opt(s, "heading_gain", c.belief.heading_gain);
    }
    for (int k = 0; k < 4; ++k)
      if (!(c.belief.fixed.channel[k] >= 0.0) || !(c.belief.fixed.unstructured[k] >= 0.0))
        throw ConfigError("belief noise intensities must be >= 0");
    if (j.contains("cost")) c.cost = risk::cost_config_from_json(j.at("cost"));
    c.cost.validate();
    if (j.contains("mppi")) c.mppi = mppi::mppi_config_from_json(j.at("mppi"));
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      auto& m = c.sim;
      opt(s, "duration", m.duration);
      opt(s, "dt", m.dt);
      if (s.contains("start")) {
        const auto v = s.at("start").get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("sim.start must be [x, y, psi]");
        m.start_x = v[0];
        m.start_y = v[1];
        m.start_psi = v[2];
      }
      opt(s, "start_speed", m.start_speed);
      if (s.contains("goal")) {
        const auto v = s.at("goal").get<std::vector<double>>();
        if (v.size() != 2) throw ConfigError("sim.goal must be [x, y]");
        m.goal_x = v[0];
        m.goal_y = v[1];
      }
      opt(s, "goal_radius", m.goal_radius);
      opt(s, "stop_at_goal", m.stop_at_goal);
      opt(s, "at_limit_fraction", m.at_limit_fraction);
      opt(s, "clearance_search", m.clearance_search);
    }
    c.sim.validate();
    // The run seed wins over per-block seeds so one number reproduces a run.
    c.apply_seed(j.value("seed", std::uint64_t{0}));
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace bmppi::harness
