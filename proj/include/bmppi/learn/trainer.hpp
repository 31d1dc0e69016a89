#pragma once

// Mini-batch Adam over a flat parameter vector. The loss is any callable
//   double loss(std::span<const double> w, const Sample& s, std::span<double> grad)
// that fills `grad` (same size as w) when it is non-empty.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bmppi::learn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;  // global gradient norm; <= 0 disables
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

// Clips `g` in place to the configured global norm, then applies one step.
inline void adam_step(std::span<double> w, std::span<double> g, AdamState& s, const AdamConfig& c) {
  if (s.m.size() != w.size()) {
    s.m.assign(w.size(), 0.0);
    s.v.assign(w.size(), 0.0);
  }
  if (c.clip_norm > 0.0) {
    double n2 = 0.0;
    for (double x : g) n2 += x * x;
    const double n = std::sqrt(n2);
    if (n > c.clip_norm)
      for (double& x : g) x *= c.clip_norm / n;
  }
  ++s.step;
  const double b1t = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double b2t = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < w.size(); ++i) {
    s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * g[i];
    s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * g[i] * g[i];
    w[i] -= c.lr * (s.m[i] / b1t) / (std::sqrt(s.v[i] / b2t) + c.eps);
  }
}

struct TrainConfig {
  int epochs = 50;
  int batch_size = 8;
  std::uint64_t seed = 0;
  AdamConfig adam;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

// Everything needed to continue training exactly where it stopped.
struct Checkpoint {
  std::vector<double> weights;
  AdamState adam;
  int epochs_done = 0;
  std::vector<double> best_weights;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<EpochStats> curve;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, std::size_t sample, const std::string& why)
      : std::runtime_error("training diverged in epoch " + std::to_string(epoch) + " at sample " +
                           std::to_string(sample) + ": " + why),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

inline std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  // splitmix64 of the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Runs epochs until cfg.epochs have been completed in total (continuing from
// `ck` when it already holds progress). Best-validation weights are kept.
template <class Sample, class LossFn>
Checkpoint train(Checkpoint ck, std::span<const Sample> train_set, std::span<const Sample> val_set, LossFn&& loss,
                 const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch = {}) {
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be positive");
  const std::size_t n = ck.weights.size();
  std::vector<double> grad(n), batch_grad(n);
  auto eval = [&](std::span<const double> w, const Sample& s, std::span<double> g, int epoch, std::size_t idx) {
    double l;
    try {
      l = loss(w, s, g);
    } catch (const std::runtime_error& e) {
      throw TrainingDiverged(epoch, idx, e.what());
    }
    if (!std::isfinite(l)) throw TrainingDiverged(epoch, idx, "non-finite loss");
    return l;
  };
  for (int epoch = ck.epochs_done; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(epoch_seed(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        std::fill(grad.begin(), grad.end(), 0.0);
        total += eval(ck.weights, train_set[order[k]], grad, epoch, order[k]);
        for (std::size_t i = 0; i < n; ++i) batch_grad[i] += grad[i];
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (double& g : batch_grad) g *= inv;
      for (double g : batch_grad)
        if (!std::isfinite(g)) throw TrainingDiverged(epoch, order[start], "non-finite gradient");
      adam_step(ck.weights, batch_grad, ck.adam, cfg.adam);
    }
    EpochStats st{epoch, total / static_cast<double>(train_set.size()), 0.0};
    if (!val_set.empty()) {
      double v = 0.0;
      for (std::size_t i = 0; i < val_set.size(); ++i) v += eval(ck.weights, val_set[i], {}, epoch, i);
      st.val_loss = v / static_cast<double>(val_set.size());
    } else {
      st.val_loss = st.train_loss;
    }
    ck.curve.push_back(st);
    if (st.val_loss < ck.best_val) {
      ck.best_val = st.val_loss;
      ck.best_epoch = epoch;
      ck.best_weights = ck.weights;
    }
    ck.epochs_done = epoch + 1;
    if (on_epoch) on_epoch(st);
  }
  if (ck.best_weights.empty()) ck.best_weights = ck.weights;
  return ck;
}

template <class Sample, class LossFn>
Checkpoint train(std::vector<double> initial, std::span<const Sample> train_set, std::span<const Sample> val_set,
                 LossFn&& loss, const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch = {}) {
  Checkpoint ck;
  ck.weights = std::move(initial);
  return train<Sample>(std::move(ck), train_set, val_set, std::forward<LossFn>(loss), cfg, on_epoch);
}

inline nlohmann::json to_json(const Checkpoint& c) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& e : c.curve) curve.push_back({e.epoch, e.train_loss, e.val_loss});
  return {{"weights", c.weights},
          {"adam_m", c.adam.m},
          {"adam_v", c.adam.v},
          {"adam_step", c.adam.step},
          {"epochs_done", c.epochs_done},
          {"best_weights", c.best_weights},
          {"best_val", std::isfinite(c.best_val) ? nlohmann::json(c.best_val) : nlohmann::json(nullptr)},
          {"best_epoch", c.best_epoch},
          {"curve", curve}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint c;
  c.weights = j.at("weights").get<std::vector<double>>();
  c.adam.m = j.at("adam_m").get<std::vector<double>>();
  c.adam.v = j.at("adam_v").get<std::vector<double>>();
  c.adam.step = j.at("adam_step").get<std::int64_t>();
  c.epochs_done = j.at("epochs_done").get<int>();
  c.best_weights = j.at("best_weights").get<std::vector<double>>();
  c.best_val = j.at("best_val").is_null() ? std::numeric_limits<double>::infinity() : j.at("best_val").get<double>();
  c.best_epoch = j.at("best_epoch").get<int>();
  for (const auto& e : j.at("curve")) c.curve.push_back({e[0].get<int>(), e[1].get<double>(), e[2].get<double>()});
  return c;
}

}  // namespace bmppi::learn
