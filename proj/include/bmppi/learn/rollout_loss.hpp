#pragma once

// Multistep belief rollout over one recorded trajectory and its NLL, on
// doubles for evaluation or on the tape for gradients w.r.t. the network
// weights (and the delay-model weights for the train-all variant).

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include "bmppi/ad/tape.hpp"
#include "bmppi/belief/belief.hpp"
#include "bmppi/learn/network_params.hpp"
#include "bmppi/learn/nll.hpp"
#include "bmppi/world/dataset.hpp"

namespace bmppi::learn {

struct TrajectorySample {
  double dt = 0.02;
  std::vector<belief::HistoryFrame> history;  // frames 0..h, h = tau / dt
  vehicle::VehicleState start;                // state at frame h
  std::vector<vehicle::ControlInput> controls;
  std::vector<vehicle::SensorReadings> readings;
  std::vector<Vec4<double>> truth;  // reduced states at frames h+1..
  std::vector<std::array<double, 2>> lateral_truth;

  std::size_t steps() const { return truth.size(); }

  // `max_steps` < 0 keeps every step the trajectory provides.
  static TrajectorySample from(const world::Trajectory& t, int max_steps = -1) {
    t.validate();
    TrajectorySample s;
    s.dt = t.dt;
    const std::size_t h = static_cast<std::size_t>(t.history_steps());
    for (std::size_t i = 0; i <= h; ++i) s.history.push_back({t.states[i], t.controls[i], t.readings[i]});
    s.start = t.states[h];
    std::size_t n = t.size() - 1 - h;
    if (max_steps >= 0) n = std::min(n, static_cast<std::size_t>(max_steps));
    for (std::size_t k = h; k < h + n; ++k) {
      s.controls.push_back(t.controls[k]);
      s.readings.push_back(t.readings[k]);
      const auto& x = t.states[k + 1];
      Vec4<double> v;
      v(0, 0) = x.px;
      v(1, 0) = x.py;
      v(2, 0) = x.psi;
      v(3, 0) = x.vx;
      s.truth.push_back(v);
      s.lateral_truth.push_back({x.vy, x.yaw_rate});
    }
    return s;
  }
};

struct RolloutOptions {
  double regularization = kRegularizationWeight;
  belief::GainSet gains = belief::GainSet::open_loop();
};

template <class T>
T rollout_nll(const belief::BeliefModel<T>& model, const TrajectorySample& s, double regularization) {
  const auto init = model.initialize(s.history);
  belief::BasicBelief<T> b{s.start.template cast<T>(), init.cov};
  auto hidden = init.hidden;
  const std::size_t n = s.steps();
  std::vector<Vec4<T>> pred(n), truth(n);
  std::vector<Mat4<T>> cov(n);
  std::vector<std::array<T, 2>> lat(n), lat_truth(n);
  for (std::size_t k = 0; k < n; ++k) {
    model.step(b, hidden, s.controls[k], s.readings[k]);
    pred[k] = b.reduced_mean();
    cov[k] = b.cov;
    lat[k] = {b.mean.vy, b.mean.yaw_rate};
    truth[k] = s.truth[k].template cast<T>();
    lat_truth[k] = {T(s.lateral_truth[k][0]), T(s.lateral_truth[k][1])};
  }
  return nll_loss<T>(pred, cov, truth, lat, lat_truth, regularization);
}

// Flat trainable vector: network weights, then the delay-model weights when
// the variant trains them.
inline std::vector<double> trainable_weights(const NetworkParams& p) {
  std::vector<double> w = p.weights;
  if (p.variant.train_all) {
    w.insert(w.end(), p.delay.engine.weights.begin(), p.delay.engine.weights.end());
    w.insert(w.end(), p.delay.steer.weights.begin(), p.delay.steer.weights.end());
  }
  return w;
}

inline void assign_trainable(NetworkParams& p, std::span<const double> w) {
  const std::size_t n = p.weights.size();
  const std::size_t ne = p.delay.engine.weights.size(), ns = p.delay.steer.weights.size();
  const std::size_t expect = n + (p.variant.train_all ? ne + ns : 0);
  if (w.size() != expect) throw std::invalid_argument("trainable vector has the wrong size");
  std::copy(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n), p.weights.begin());
  if (p.variant.train_all) {
    std::copy(w.begin() + static_cast<std::ptrdiff_t>(n), w.begin() + static_cast<std::ptrdiff_t>(n + ne),
              p.delay.engine.weights.begin());
    std::copy(w.begin() + static_cast<std::ptrdiff_t>(n + ne), w.end(), p.delay.steer.weights.begin());
  }
}

// Loss callable for the trainer. `shape` supplies the variant, sizes and the
// frozen delay weights; the trainable values come from `w`.
class RolloutLoss {
 public:
  RolloutLoss(const vehicle::ModelParams& model, NetworkParams shape, RolloutOptions opts = {})
      : model_(model), shape_(std::move(shape)), opts_(opts) {
    shape_.validate();
  }

  const NetworkParams& shape() const { return shape_; }

  double operator()(std::span<const double> w, const TrajectorySample& s, std::span<double> grad) const {
    const std::size_t n = shape_.weights.size();
    const std::size_t ne = shape_.delay.engine.weights.size();
    const bool ta = shape_.variant.train_all;
    if (w.size() != n + (ta ? ne + shape_.delay.steer.weights.size() : 0))
      throw std::invalid_argument("weight vector has the wrong size");
    if (grad.empty()) {
      std::span<const double> eng = shape_.delay.engine.weights, st = shape_.delay.steer.weights;
      if (ta) {
        eng = w.subspan(n, ne);
        st = w.subspan(n + ne);
      }
      belief::BeliefModel<double> m(model_, &shape_, {w.first(n), eng, st}, opts_.gains, s.dt);
      return rollout_nll(m, s, opts_.regularization);
    }
    if (grad.size() != w.size()) throw std::invalid_argument("gradient buffer has the wrong size");
    ad::Tape& tape = thread_tape();
    tape.clear();
    ad::TapeScope scope(tape);
    std::vector<ad::Var> leaves;
    leaves.reserve(w.size());
    for (double v : w) leaves.push_back(ad::Var::leaf(v));
    std::vector<ad::Var> frozen_engine, frozen_steer;
    std::span<const ad::Var> eng, st;
    if (ta) {
      eng = std::span<const ad::Var>(leaves).subspan(n, ne);
      st = std::span<const ad::Var>(leaves).subspan(n + ne);
    } else {
      frozen_engine.assign(shape_.delay.engine.weights.begin(), shape_.delay.engine.weights.end());
      frozen_steer.assign(shape_.delay.steer.weights.begin(), shape_.delay.steer.weights.end());
      eng = frozen_engine;
      st = frozen_steer;
    }
    belief::BeliefModel<ad::Var> m(model_, &shape_, {std::span<const ad::Var>(leaves).first(n), eng, st},
                                   opts_.gains, s.dt);
    const ad::Var loss = rollout_nll(m, s, opts_.regularization);
    const auto g = ad::gradient(tape, loss, leaves);
    std::copy(g.begin(), g.end(), grad.begin());
    return loss.value();
  }

 private:
  static ad::Tape& thread_tape() {
    thread_local ad::Tape tape;
    return tape;
  }

  vehicle::ModelParams model_;
  NetworkParams shape_;
  RolloutOptions opts_;
};

// NLL of a fixed model with no networks (pure parametric with constant noise).
inline double parametric_rollout_nll(const vehicle::ModelParams& model, const TrajectorySample& s,
                                     const belief::FixedNoise& noise, const RolloutOptions& opts = {}) {
  const auto m = belief::make_model(model, nullptr, opts.gains, s.dt, noise);
  return rollout_nll(m, s, opts.regularization);
}

}  // namespace bmppi::learn
