#pragma once

// Train each requested model variant over several seeds and summarize the
// per-trajectory summed NLL on the validation set.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "bmppi/core/stats.hpp"
#include "bmppi/learn/network_params.hpp"
#include "bmppi/learn/rollout_loss.hpp"
#include "bmppi/learn/trainer.hpp"

namespace bmppi::learn {

struct AblationConfig {
  TrainConfig train;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  NetworkSizes sizes;
  NoiseScales scales;
  RolloutOptions rollout;
};

struct VariantResult {
  std::string name;
  BoxStats stats;
  std::vector<double> losses;  // per validation trajectory, seeds concatenated
  std::vector<std::string> failures;
};

// Summed NLL of each sample, +inf where the covariance became singular.
inline std::vector<double> evaluate_nll(const RolloutLoss& loss, std::span<const double> w,
                                        std::span<const TrajectorySample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    try {
      const double v = loss(w, s, {});
      out.push_back(std::isfinite(v) ? v : std::numeric_limits<double>::infinity());
    } catch (const SingularCovariance&) {
      out.push_back(std::numeric_limits<double>::infinity());
    }
  }
  return out;
}

inline std::vector<VariantResult> run_ablation(
    const std::vector<std::string>& variants, const vehicle::ModelParams& model, std::span<const TrajectorySample> train_set,
    std::span<const TrajectorySample> val_set, const AblationConfig& cfg,
    const std::function<void(const std::string&, std::uint64_t, const EpochStats&)>& progress = {}) {
  if (variants.empty()) throw std::invalid_argument("no variants requested");
  if (val_set.empty()) throw std::invalid_argument("validation set is empty");
  for (const auto& v : variants) Variant::named(v);  // reject unknown names before any work
  std::vector<VariantResult> results;
  for (const auto& name : variants) {
    VariantResult r;
    r.name = name;
    for (const auto seed : cfg.seeds) {
      const auto init = NetworkParams::create(Variant::named(name), seed, cfg.sizes, cfg.scales);
      const RolloutLoss loss(model, init, cfg.rollout);
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      try {
        const auto ck = train<TrajectorySample>(trainable_weights(init), train_set, val_set, loss, tc,
                                                [&](const EpochStats& e) {
                                                  if (progress) progress(name, seed, e);
                                                });
        const auto l = evaluate_nll(loss, ck.best_weights, val_set);
        r.losses.insert(r.losses.end(), l.begin(), l.end());
      } catch (const TrainingDiverged& e) {
        r.failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
      }
    }
    if (!r.losses.empty()) r.stats = box_stats(r.losses);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace bmppi::learn
