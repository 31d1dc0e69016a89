#pragma once

// Weights of the mean-compensation, process-noise and initializer networks
// plus the structural flags that select an ablation variant. Everything
// trainable lives in one flat vector; Layout records where each layer sits.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bmppi/learn/layers.hpp"
#include "bmppi/vehicle/params.hpp"

namespace bmppi::learn {

inline constexpr int kNetworkFormatVersion = 1;

enum class MeanArch { kRecurrentInit, kRecurrent, kFeedforward };
enum class InitMode { kFixed, kMeta, kPredicted };

inline constexpr int kStateFeatures = 7;    // vx, vy, yaw_rate, brake, rpm*1e-3, steer, steer_rate
inline constexpr int kReadingFeatures = 6;  // throttle, brake cmd, steer cmd, nx, ny, nz
inline constexpr int kForceFeatures = 4;    // prior force vector, N scaled by 1e-3
inline constexpr int kHistoryFeatures = kStateFeatures + kReadingFeatures;
inline constexpr int kNumQ = 4;
inline constexpr int kNumQPrime = 10;

struct Variant {
  std::string name = "baseline";
  bool direct_d = false;       // correct accelerations instead of forces
  bool no_parametric = false;  // drop the parametric force prior from the mean
  bool no_a = false;           // covariance update with A = I
  bool no_g = false;           // no structured channels, Q' only
  bool hybrid_q = false;       // structured channels plus Q'
  bool combined = false;       // one recurrent net for mean and noise
  bool no_prior = false;       // mean net does not see the prior forces
  bool train_all = false;      // delay-model weights are trainable too
  MeanArch arch = MeanArch::kRecurrentInit;
  InitMode init = InitMode::kFixed;

  bool uses_q() const { return !no_g; }
  bool uses_qprime() const { return no_g || hybrid_q; }
  bool has_initializer() const { return arch == MeanArch::kRecurrentInit || init == InitMode::kPredicted; }
  bool mean_recurrent() const { return arch != MeanArch::kFeedforward; }

  static Variant named(std::string_view name) {
    Variant v;
    v.name = std::string(name);
    if (name == "baseline") return v;
    if (name == "no_A") v.no_a = true;
    else if (name == "no_G") v.no_g = true;
    else if (name == "D") v.direct_d = true;
    else if (name == "HQ") v.hybrid_q = true;
    else if (name == "FF") v.arch = MeanArch::kFeedforward;
    else if (name == "R") v.arch = MeanArch::kRecurrent;
    else if (name == "meta-init") v.init = InitMode::kMeta;
    else if (name == "pred-init") v.init = InitMode::kPredicted;
    else if (name == "no_P") v.no_parametric = true;
    else if (name == "C") v.combined = true;
    else if (name == "no_prior") v.no_prior = true;
    else if (name == "TA") v.train_all = true;
    else throw std::invalid_argument("unknown variant: " + std::string(name));
    return v;
  }

  bool operator==(const Variant&) const = default;
};

inline const std::vector<std::string>& known_variants() {
  static const std::vector<std::string> names = {"baseline", "no_A", "no_G", "D",    "HQ", "FF",       "R",
                                                 "meta-init", "pred-init", "no_P", "C", "no_prior", "TA"};
  return names;
}

struct NetworkSizes {
  int predictor_hidden = 4;
  int output_hidden = 20;
  int init_hidden = 20;
  int init_dense = 100;
  int ff_hidden = 32;
  int combined_hidden = 8;

  bool operator==(const NetworkSizes&) const = default;
};

// Default scales for the sigmoid-squashed noise terms.
struct NoiseScales {
  // Per-second variance ceilings of the (brake, steer, vy, Fx) channels.
  std::array<double, kNumQ> channel = {10.0, 1e4, 100.0, 4e7};
  // Per-second variance ceilings of the unstructured term on (px, py, psi, vx).
  std::array<double, kNumQ> unstructured = {0.5, 0.5, 0.05, 0.5};
  // Upper bounds of the learned initial covariance diagonal.
  std::array<double, kNumQ> initial = {1e-2, 1e-2, 1e-3, 1e-2};
};

inline constexpr double kFixedInitialVariance = 1e-5;

struct Offset {
  std::size_t at = 0;
  bool present = false;
};

struct Layout {
  int mean_in = 0, mean_out = 0, noise_in = kHistoryFeatures, noise_out = 0;
  GruShape mean_gru, noise_gru, joint_gru, init_gru;
  DenseShape mean_out1, mean_out2, ff1, ff2, ff3, noise_out1, noise_out2, joint_out1, joint_out2, init_h1, init_h2;
  Offset o_mean_gru, o_mean_out1, o_mean_out2, o_ff1, o_ff2, o_ff3;
  Offset o_noise_gru, o_noise_out1, o_noise_out2;
  Offset o_joint_gru, o_joint_out1, o_joint_out2;
  Offset o_init_gru, o_init_h1, o_init_h2;
  std::size_t globals = 0;  // [log channel scale 4 | log unstructured scale 4 | initial-cov raw 4]
  // Initializer output: [mean hidden | noise hidden | joint hidden | P0 raw]
  int seed_mean = 0, seed_noise = 0, seed_joint = 0, seed_p0 = 0, seed_size = 0;
  std::size_t total = 0;

  struct Named {
    std::string name;
    Offset off;
    std::size_t size;
  };
  std::vector<Named> blocks;
};

inline Layout make_layout(const Variant& v, const NetworkSizes& s) {
  Layout L;
  L.mean_in = kHistoryFeatures + (v.no_prior ? 0 : kForceFeatures);
  L.mean_out = v.direct_d ? 3 : 4;
  L.noise_out = (v.uses_q() ? kNumQ : 0) + (v.uses_qprime() ? kNumQPrime : 0);
  std::size_t at = 0;
  auto put = [&](const std::string& name, Offset& o, std::size_t size) {
    o = {at, true};
    L.blocks.push_back({name, o, size});
    at += size;
  };
  if (v.combined) {
    L.joint_gru = {L.mean_in, s.combined_hidden};
    L.joint_out1 = {L.mean_in + s.combined_hidden, s.output_hidden};
    L.joint_out2 = {s.output_hidden, L.mean_out + L.noise_out};
    put("joint.gru", L.o_joint_gru, L.joint_gru.size());
    put("joint.out1", L.o_joint_out1, L.joint_out1.size());
    put("joint.out2", L.o_joint_out2, L.joint_out2.size());
  } else {
    if (v.mean_recurrent()) {
      L.mean_gru = {L.mean_in, s.predictor_hidden};
      L.mean_out1 = {L.mean_in + s.predictor_hidden, s.output_hidden};
      L.mean_out2 = {s.output_hidden, L.mean_out};
      put("mean.gru", L.o_mean_gru, L.mean_gru.size());
      put("mean.out1", L.o_mean_out1, L.mean_out1.size());
      put("mean.out2", L.o_mean_out2, L.mean_out2.size());
    } else {
      L.ff1 = {L.mean_in, s.ff_hidden};
      L.ff2 = {s.ff_hidden, s.ff_hidden};
      L.ff3 = {s.ff_hidden, L.mean_out};
      put("mean.ff1", L.o_ff1, L.ff1.size());
      put("mean.ff2", L.o_ff2, L.ff2.size());
      put("mean.ff3", L.o_ff3, L.ff3.size());
    }
    L.noise_gru = {L.noise_in, s.predictor_hidden};
    L.noise_out1 = {L.noise_in + s.predictor_hidden, s.output_hidden};
    L.noise_out2 = {s.output_hidden, L.noise_out};
    put("noise.gru", L.o_noise_gru, L.noise_gru.size());
    put("noise.out1", L.o_noise_out1, L.noise_out1.size());
    put("noise.out2", L.o_noise_out2, L.noise_out2.size());
  }
  if (v.has_initializer()) {
    if (v.combined) {
      L.seed_joint = s.combined_hidden;
    } else {
      L.seed_mean = v.arch == MeanArch::kRecurrentInit ? s.predictor_hidden : 0;
      L.seed_noise = s.predictor_hidden;
    }
    L.seed_p0 = v.init == InitMode::kPredicted ? kNumQ : 0;
    L.seed_size = L.seed_mean + L.seed_noise + L.seed_joint + L.seed_p0;
    L.init_gru = {kHistoryFeatures, s.init_hidden};
    L.init_h1 = {s.init_hidden, s.init_dense};
    L.init_h2 = {s.init_dense, L.seed_size};
    put("init.gru", L.o_init_gru, L.init_gru.size());
    put("init.h1", L.o_init_h1, L.init_h1.size());
    put("init.h2", L.o_init_h2, L.init_h2.size());
  }
  Offset g;
  put("globals", g, 3 * kNumQ);
  L.globals = g.at;
  L.total = at;
  return L;
}

struct NetworkParams {
  Variant variant;
  NetworkSizes sizes;
  NoiseScales scales;
  std::vector<double> weights;
  vehicle::DelayNetParams delay = vehicle::DelayNetParams::defaults();

  Layout layout() const { return make_layout(variant, sizes); }

  // Small random weights; output layers start near zero so the untrained
  // model reproduces the parametric prior.
  static NetworkParams create(const Variant& v, std::uint64_t seed, const NetworkSizes& s = {},
                              const NoiseScales& scales = {}) {
    NetworkParams p;
    p.variant = v;
    p.sizes = s;
    p.scales = scales;
    const Layout L = p.layout();
    p.weights.assign(L.total, 0.0);
    std::mt19937_64 rng(seed);
    auto fill_dense = [&](Offset o, DenseShape d, double gain) {
      if (!o.present) return;
      std::normal_distribution<double> n(0.0, gain / std::sqrt(static_cast<double>(d.in)));
      for (std::size_t i = 0; i < static_cast<std::size_t>(d.out) * d.in; ++i) p.weights[o.at + i] = n(rng);
    };
    auto fill_gru = [&](Offset o, GruShape g) {
      if (!o.present) return;
      const DenseShape gate{g.in + g.hidden, g.hidden};
      for (int k = 0; k < 3; ++k) fill_dense({o.at + k * g.gate_size(), true}, gate, 1.0);
    };
    fill_gru(L.o_mean_gru, L.mean_gru);
    fill_dense(L.o_mean_out1, L.mean_out1, 1.0);
    fill_dense(L.o_mean_out2, L.mean_out2, 0.01);
    fill_dense(L.o_ff1, L.ff1, 1.0);
    fill_dense(L.o_ff2, L.ff2, 1.0);
    fill_dense(L.o_ff3, L.ff3, 0.01);
    fill_gru(L.o_noise_gru, L.noise_gru);
    fill_dense(L.o_noise_out1, L.noise_out1, 1.0);
    fill_dense(L.o_noise_out2, L.noise_out2, 0.1);
    fill_gru(L.o_joint_gru, L.joint_gru);
    fill_dense(L.o_joint_out1, L.joint_out1, 1.0);
    fill_dense(L.o_joint_out2, L.joint_out2, 0.01);
    fill_gru(L.o_init_gru, L.init_gru);
    fill_dense(L.o_init_h1, L.init_h1, 1.0);
    fill_dense(L.o_init_h2, L.init_h2, 0.1);
    // Noise outputs start at sigmoid(-3) of their ceilings.
    auto bias_noise = [&](Offset o, DenseShape d, int first) {
      if (!o.present) return;
      for (int k = first; k < d.out; ++k) p.weights[o.at + static_cast<std::size_t>(d.out) * d.in + k] = -3.0;
    };
    bias_noise(L.o_noise_out2, L.noise_out2, 0);
    bias_noise(L.o_joint_out2, L.joint_out2, L.mean_out);
    for (int k = 0; k < kNumQ; ++k) {
      p.weights[L.globals + k] = std::log(scales.channel[k]);
      p.weights[L.globals + kNumQ + k] = std::log(scales.unstructured[k]);
    }
    return p;
  }

  void validate() const {
    if (weights.size() != layout().total) throw std::invalid_argument("network weight count does not match layout");
    for (double w : weights)
      if (!std::isfinite(w)) throw std::invalid_argument("network weight not finite");
    delay.validate();
  }
};

// ---- JSON ---------------------------------------------------------------

inline const char* arch_name(MeanArch a) {
  switch (a) {
    case MeanArch::kRecurrentInit: return "recurrent_init";
    case MeanArch::kRecurrent: return "recurrent";
    case MeanArch::kFeedforward: return "feedforward";
  }
  return "?";
}

inline const char* init_name(InitMode m) {
  switch (m) {
    case InitMode::kFixed: return "fixed";
    case InitMode::kMeta: return "meta";
    case InitMode::kPredicted: return "predicted";
  }
  return "?";
}

inline nlohmann::json to_json(const Variant& v) {
  return {{"name", v.name},         {"direct_D", v.direct_d},  {"no_parametric", v.no_parametric},
          {"no_A", v.no_a},         {"no_G", v.no_g},          {"hybrid_Q", v.hybrid_q},
          {"combined_net", v.combined}, {"no_prior", v.no_prior}, {"train_all", v.train_all},
          {"arch", arch_name(v.arch)}, {"init", init_name(v.init)}};
}

inline Variant variant_from_json(const nlohmann::json& j) {
  Variant v;
  v.name = j.value("name", std::string("custom"));
  v.direct_d = j.value("direct_D", false);
  v.no_parametric = j.value("no_parametric", false);
  v.no_a = j.value("no_A", false);
  v.no_g = j.value("no_G", false);
  v.hybrid_q = j.value("hybrid_Q", false);
  v.combined = j.value("combined_net", false);
  v.no_prior = j.value("no_prior", false);
  v.train_all = j.value("train_all", false);
  const auto arch = j.value("arch", std::string("recurrent_init"));
  if (arch == "recurrent_init") v.arch = MeanArch::kRecurrentInit;
  else if (arch == "recurrent") v.arch = MeanArch::kRecurrent;
  else if (arch == "feedforward") v.arch = MeanArch::kFeedforward;
  else throw std::invalid_argument("unknown arch: " + arch);
  const auto init = j.value("init", std::string("fixed"));
  if (init == "fixed") v.init = InitMode::kFixed;
  else if (init == "meta") v.init = InitMode::kMeta;
  else if (init == "predicted") v.init = InitMode::kPredicted;
  else throw std::invalid_argument("unknown init mode: " + init);
  return v;
}

inline nlohmann::json to_json(const NetworkParams& p) {
  const Layout L = p.layout();
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& b : L.blocks)
    tensors[b.name] = std::vector<double>(p.weights.begin() + static_cast<std::ptrdiff_t>(b.off.at),
                                          p.weights.begin() + static_cast<std::ptrdiff_t>(b.off.at + b.size));
  const auto& s = p.sizes;
  return {{"format_version", kNetworkFormatVersion},
          {"variant", to_json(p.variant)},
          {"sizes",
           {{"predictor_hidden", s.predictor_hidden},
            {"output_hidden", s.output_hidden},
            {"init_hidden", s.init_hidden},
            {"init_dense", s.init_dense},
            {"ff_hidden", s.ff_hidden},
            {"combined_hidden", s.combined_hidden}}},
          {"scales",
           {{"channel", p.scales.channel}, {"unstructured", p.scales.unstructured}, {"initial", p.scales.initial}}},
          {"tensors", tensors},
          {"delay", vehicle::to_json(p.delay)}};
}

inline NetworkParams network_params_from_json(const nlohmann::json& j) {
  if (j.value("format_version", -1) != kNetworkFormatVersion)
    throw std::invalid_argument("unsupported network weights format_version");
  NetworkParams p;
  p.variant = variant_from_json(j.at("variant"));
  const auto& s = j.at("sizes");
  p.sizes.predictor_hidden = s.at("predictor_hidden").get<int>();
  p.sizes.output_hidden = s.at("output_hidden").get<int>();
  p.sizes.init_hidden = s.at("init_hidden").get<int>();
  p.sizes.init_dense = s.at("init_dense").get<int>();
  p.sizes.ff_hidden = s.at("ff_hidden").get<int>();
  p.sizes.combined_hidden = s.at("combined_hidden").get<int>();
  if (j.contains("scales")) {
    const auto& sc = j.at("scales");
    p.scales.channel = sc.at("channel").get<std::array<double, kNumQ>>();
    p.scales.unstructured = sc.at("unstructured").get<std::array<double, kNumQ>>();
    p.scales.initial = sc.at("initial").get<std::array<double, kNumQ>>();
  }
  const Layout L = p.layout();
  p.weights.assign(L.total, 0.0);
  const auto& t = j.at("tensors");
  for (const auto& b : L.blocks) {
    const auto w = t.at(b.name).get<std::vector<double>>();
    if (w.size() != b.size) throw std::invalid_argument("tensor '" + b.name + "' has the wrong size");
    std::copy(w.begin(), w.end(), p.weights.begin() + static_cast<std::ptrdiff_t>(b.off.at));
  }
  if (j.contains("delay")) p.delay = vehicle::delay_params_from_json(j.at("delay"));
  p.validate();
  return p;
}

}  // namespace bmppi::learn
