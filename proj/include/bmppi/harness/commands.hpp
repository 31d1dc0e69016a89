#pragma once

// The CLI verbs as library functions. Each writes its outputs into `out`,
// echoes the resolved config there and reports a short summary on `log`.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bmppi/core/stats.hpp"
#include "bmppi/harness/config.hpp"
#include "bmppi/harness/simulate.hpp"
#include "bmppi/learn/ablation.hpp"
#include "bmppi/learn/rollout_loss.hpp"
#include "bmppi/world/dataset.hpp"
#include "bmppi/world/map_io.hpp"

namespace bmppi::harness {

namespace fs = std::filesystem;

inline void prepare_output(const RunConfig& cfg, const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out.string() + ": " + ec.message());
  std::ofstream f(out / "config.json");
  if (!f) throw std::runtime_error("cannot write " + (out / "config.json").string());
  f << to_json(cfg).dump(2) << "\n";
}

inline std::ofstream open_output(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { open_output(p) << j.dump(2) << "\n"; }

inline world::ElevationMap load_map(const RunConfig& cfg) {
  if (cfg.paths.map.empty()) return world::generate(cfg.world);
  if (!fs::exists(cfg.paths.map)) throw ConfigError("map file " + cfg.paths.map + " does not exist");
  return world::read_map(cfg.paths.map);
}

inline std::vector<world::Trajectory> load_dataset(const RunConfig& cfg) {
  if (cfg.paths.dataset.empty()) throw ConfigError("paths.dataset is required");
  if (!fs::exists(cfg.paths.dataset)) throw ConfigError("dataset " + cfg.paths.dataset + " does not exist");
  return world::read_dataset(cfg.paths.dataset);
}

inline learn::NetworkParams load_weights(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("weights file " + path + " does not exist");
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
    return learn::network_params_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("weights file " + path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("weights file " + path + ": " + e.what());
  }
}

struct DatasetSplit {
  std::vector<learn::TrajectorySample> train;
  std::vector<learn::TrajectorySample> val;
};

// The last val_fraction of the trajectories (at least one when any are held
// out and more than one exists) form the validation set.
inline DatasetSplit split_dataset(std::span<const world::Trajectory> data, const TrainSection& t) {
  DatasetSplit s;
  std::size_t n_val = static_cast<std::size_t>(std::lround(t.val_fraction * static_cast<double>(data.size())));
  if (t.val_fraction > 0.0 && n_val == 0 && data.size() > 1) n_val = 1;
  const std::size_t n_train = data.size() - n_val;
  for (std::size_t i = 0; i < data.size(); ++i)
    (i < n_train ? s.train : s.val).push_back(learn::TrajectorySample::from(data[i], t.max_steps));
  return s;
}

inline learn::RolloutOptions rollout_options(const TrainSection& t) {
  return {t.regularization, t.closed_loop ? belief::GainSet::tracking() : belief::GainSet::open_loop()};
}

// ---- gen-data ---------------------------------------------------------------------

struct GenDataResult {
  fs::path dataset;
  std::size_t trajectories = 0;
};

inline GenDataResult cmd_gen_data(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  prepare_output(cfg, out);
  const auto map = load_map(cfg);
  const auto data = world::collect_dataset(map, cfg.vehicle, cfg.world.disturbance, cfg.collect);
  GenDataResult r{out / "dataset.jsonl", data.size()};
  world::write_dataset(r.dataset.string(), data);
  double speed = 0.0;
  std::size_t frames = 0;
  for (const auto& t : data)
    for (const auto& s : t.states) {
      speed += std::abs(s.vx);
      ++frames;
    }
  log << "trajectories: " << data.size() << "\nframes per trajectory: " << cfg.collect.frames()
      << "\nmean |vx|: " << (frames ? speed / static_cast<double>(frames) : 0.0) << "\nwrote " << r.dataset.string()
      << "\n";
  return r;
}

// ---- train ------------------------------------------------------------------------

struct TrainResult {
  learn::Checkpoint checkpoint;
  learn::NetworkParams weights;
};

inline void write_loss_csv(std::ostream& os, std::span<const learn::EpochStats> curve) {
  os << "# schema_version=" << kOutputSchemaVersion << "\nepoch,train_nll,val_nll\n" << std::setprecision(12);
  for (const auto& e : curve) os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << "\n";
}

inline TrainResult cmd_train(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  prepare_output(cfg, out);
  const auto data = load_dataset(cfg);
  const auto split = split_dataset(data, cfg.train);
  if (split.train.empty()) throw ConfigError("dataset has no training trajectories");
  const auto& t = cfg.train;
  auto params = learn::NetworkParams::create(learn::Variant::named(t.variant), t.train.seed, t.sizes, t.scales);
  const learn::RolloutLoss loss(cfg.vehicle, params, rollout_options(t));

  learn::Checkpoint ck;
  if (!t.resume.empty()) {
    if (!fs::exists(t.resume)) throw ConfigError("checkpoint " + t.resume + " does not exist");
    std::ifstream in(t.resume);
    nlohmann::json j;
    in >> j;
    ck = learn::checkpoint_from_json(j);
    if (ck.weights.size() != learn::trainable_weights(params).size())
      throw ConfigError("checkpoint does not match the configured variant");
  } else {
    ck.weights = learn::trainable_weights(params);
  }
  try {
    ck = learn::train<learn::TrajectorySample>(std::move(ck), split.train, split.val, loss, t.train,
                                               [&](const learn::EpochStats& e) {
                                                 log << "epoch " << e.epoch << " train " << e.train_loss << " val "
                                                     << e.val_loss << "\n";
                                               });
  } catch (const learn::TrainingDiverged& e) {
    throw NumericalFailure(e.what());
  }
  learn::assign_trainable(params, ck.best_weights);
  {
    auto f = open_output(out / "loss.csv");
    write_loss_csv(f, ck.curve);
  }
  write_json(out / "checkpoint.json", learn::to_json(ck));
  write_json(out / "weights.json", learn::to_json(params));
  log << "best epoch " << ck.best_epoch << " val " << ck.best_val << "\nwrote " << (out / "weights.json").string()
      << "\n";
  return {std::move(ck), std::move(params)};
}

// ---- ablate -----------------------------------------------------------------------

inline void write_ablation_csv(std::ostream& os, std::span<const learn::VariantResult> results) {
  os << "# schema_version=" << kOutputSchemaVersion
     << "\nvariant,n,mean,median,q25,q75,iqr,whisker_lo,whisker_hi,outliers,failures\n"
     << std::setprecision(12);
  for (const auto& r : results) {
    const auto& b = r.stats;
    os << r.name << ',' << b.n << ',' << b.mean << ',' << b.median << ',' << b.q25 << ',' << b.q75 << ','
       << (b.q75 - b.q25) << ',' << b.whisker_lo << ',' << b.whisker_hi << ',' << b.outliers << ','
       << r.failures.size() << "\n";
  }
}

inline std::vector<learn::VariantResult> cmd_ablate(const RunConfig& cfg, const std::vector<std::string>& variants,
                                                    const fs::path& out, std::ostream& log) {
  if (variants.empty()) throw ConfigError("no variants requested");
  for (const auto& v : variants) {
    try {
      learn::Variant::named(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  prepare_output(cfg, out);
  const auto data = load_dataset(cfg);
  const auto split = split_dataset(data, cfg.train);
  if (split.train.empty() || split.val.empty()) throw ConfigError("ablation needs training and validation trajectories");
  learn::AblationConfig ac;
  ac.train = cfg.train.train;
  ac.seeds = cfg.ablation.seeds;
  ac.sizes = cfg.train.sizes;
  ac.scales = cfg.train.scales;
  ac.rollout = rollout_options(cfg.train);
  const auto results = learn::run_ablation(variants, cfg.vehicle, split.train, split.val, ac,
                                           [&](const std::string& name, std::uint64_t seed, const learn::EpochStats& e) {
                                             log << name << " seed " << seed << " epoch " << e.epoch << " val "
                                                 << e.val_loss << "\n";
                                           });
  {
    auto f = open_output(out / "ablation.csv");
    write_ablation_csv(f, results);
  }
  {
    auto f = open_output(out / "ablation_losses.csv");
    f << "# schema_version=" << kOutputSchemaVersion << "\nvariant,index,nll\n" << std::setprecision(12);
    for (const auto& r : results)
      for (std::size_t i = 0; i < r.losses.size(); ++i) f << r.name << ',' << i << ',' << r.losses[i] << "\n";
  }
  for (const auto& r : results)
    log << r.name << ": median " << r.stats.median << " q75 " << r.stats.q75 << " failures " << r.failures.size()
        << "\n";
  return results;
}

// ---- simulate ---------------------------------------------------------------------

inline SimResult cmd_simulate(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  prepare_output(cfg, out);
  const auto map = load_map(cfg);
  std::optional<learn::NetworkParams> nets;
  if (!cfg.paths.weights.empty()) nets = load_weights(cfg.paths.weights);
  auto r = simulate(cfg, map, nets ? &*nets : nullptr);
  {
    auto f = open_output(out / "trajectory.csv");
    write_sim_log(f, r.rows);
  }
  write_json(out / "summary.json", to_json(r.summary));
  const auto& s = r.summary;
  log << "avg speed " << s.avg_speed << " m/s, peak " << s.peak_speed << " m/s\nlethal contacts " << s.lethal_contacts
      << "\nmin clearance " << s.min_clearance << " m\ntime at speed limit " << s.pct_at_speed_limit << " %\n"
      << (s.goal_reached ? "goal reached" : "goal not reached") << "\n";
  return r;
}

// ---- eval-nll ---------------------------------------------------------------------

struct EvalResult {
  std::vector<double> nll;
  BoxStats stats;
};

// Summed NLL of every trajectory in the dataset under the configured model:
// the learned weights when paths.weights is set, otherwise the fixed noise.
inline EvalResult cmd_eval_nll(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  prepare_output(cfg, out);
  const auto data = load_dataset(cfg);
  if (data.empty()) throw ConfigError("dataset is empty");
  std::optional<learn::NetworkParams> nets;
  if (!cfg.paths.weights.empty()) nets = load_weights(cfg.paths.weights);
  const auto opts = rollout_options(cfg.train);
  EvalResult r;
  for (const auto& t : data) {
    const auto s = learn::TrajectorySample::from(t, cfg.train.max_steps);
    const auto model = belief::make_model(cfg.vehicle, nets ? &*nets : nullptr, opts.gains, s.dt, cfg.belief.fixed);
    double v;
    try {
      v = learn::rollout_nll(model, s, opts.regularization);
    } catch (const std::runtime_error&) {
      v = std::numeric_limits<double>::infinity();
    }
    r.nll.push_back(v);
  }
  std::vector<double> finite;
  for (double v : r.nll)
    if (std::isfinite(v)) finite.push_back(v);
  if (finite.empty()) throw NumericalFailure("every trajectory produced a non-finite NLL");
  r.stats = box_stats(finite);
  {
    auto f = open_output(out / "nll.csv");
    f << "# schema_version=" << kOutputSchemaVersion << "\nindex,nll\n" << std::setprecision(12);
    for (std::size_t i = 0; i < r.nll.size(); ++i) f << i << ',' << r.nll[i] << "\n";
  }
  const auto& b = r.stats;
  write_json(out / "nll_summary.json", {{"schema_version", kOutputSchemaVersion},
                                        {"trajectories", r.nll.size()},
                                        {"non_finite", r.nll.size() - finite.size()},
                                        {"mean", b.mean},
                                        {"median", b.median},
                                        {"q25", b.q25},
                                        {"q75", b.q75},
                                        {"whisker_lo", b.whisker_lo},
                                        {"whisker_hi", b.whisker_hi}});
  log << "trajectories " << r.nll.size() << " median NLL " << b.median << " q75 " << b.q75 << "\n";
  return r;
}

}  // namespace bmppi::harness
