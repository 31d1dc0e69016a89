#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bmppi/mppi/colored_noise.hpp"
#include "bmppi/mppi/mppi.hpp"
#include "bmppi/world/truth.hpp"

using namespace bmppi;
using namespace bmppi::mppi;

namespace {

double lag1(const std::vector<double>& x) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - m) * (x[i] - m);
    if (i + 1 < x.size()) num += (x[i] - m) * (x[i + 1] - m);
  }
  return num / den;
}

// Mean lag-1 autocorrelation of channel 0 over every sequence in the batch.
double batch_lag1(const NoiseBatch<1>& b) {
  double acc = 0.0;
  for (int k = 0; k < b.samples; ++k) {
    std::vector<double> s(b.horizon);
    for (int t = 0; t < b.horizon; ++t) s[t] = b.at(k, t, 0);
    acc += lag1(s);
  }
  return acc / b.samples;
}

ControlBatch random_batch(int samples, int horizon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1), s(-3, 3);
  ControlBatch b;
  b.samples = samples;
  b.horizon = horizon;
  b.data.resize(static_cast<std::size_t>(samples) * horizon * 3);
  for (int k = 0; k < samples; ++k)
    for (int t = 0; t < horizon; ++t) {
      b.at(k, t, 0) = u(rng);
      b.at(k, t, 1) = 0.2 * u(rng);
      b.at(k, t, 2) = s(rng);
    }
  return b;
}

struct Fixture {
  world::ElevationMap map;
  vehicle::ModelParams params;
  belief::BeliefModel<double> model;
  RolloutWorld world;
  RolloutStart start;

  explicit Fixture(double c_sigma = 2.0)
      : map(160, 160, 0.5, -40.0, -40.0),
        model(belief::make_model(params, nullptr, belief::GainSet::tracking(), 0.02,
                                 belief::FixedNoise{{0.0, 0.0, 0.0, 0.0}, {0.05, 0.05, 0.01, 0.1}})) {
    world.map = &map;
    world.cost.c_sigma = c_sigma;
    world.context.map = &map;
    world.context.c_delta = params.vehicle.c_delta;
    start.belief.mean = world::settled_state(map, params.suspension, 0.0, 0.0, 0.0, 0.0, 0.0);
    start.belief.cov = Mat4<double>::zero();
    for (int i = 0; i < 4; ++i) start.belief.cov(i, i) = 1e-4;
  }
};

}  // namespace

// ---- colored noise ----------------------------------------------------------------

TEST(ColoredNoise, WhiteHasNoLagCorrelation) {
  const auto b = sample_colored<1>(40, 250, {1.0}, {0.0}, 3);
  EXPECT_LT(std::abs(batch_lag1(b)), 0.05);
}

TEST(ColoredNoise, BrownIsStronglyCorrelated) {
  const auto b = sample_colored<1>(40, 250, {1.0}, {2.0}, 4);
  EXPECT_GT(batch_lag1(b), 0.5);
}

TEST(ColoredNoise, CorrelationGrowsWithExponent) {
  double prev = -1.0;
  for (double e : {0.0, 0.5, 1.0, 1.5, 2.0}) {
    const double r = batch_lag1(sample_colored<1>(20, 200, {1.0}, {e}, 5));
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST(ColoredNoise, EachSequenceHasRequestedScale) {
  const auto b = sample_colored<3>(5, 100, {0.5, 1.0, 3.0}, {1.0, 0.0, 2.0}, 6);
  for (int k = 0; k < 5; ++k)
    for (std::size_t c = 0; c < 3; ++c) {
      double m = 0.0, v = 0.0;
      for (int t = 0; t < 100; ++t) m += b.at(k, t, c);
      m /= 100;
      for (int t = 0; t < 100; ++t) v += (b.at(k, t, c) - m) * (b.at(k, t, c) - m);
      EXPECT_NEAR(m, 0.0, 1e-12);
      const double want[] = {0.5, 1.0, 3.0};
      EXPECT_NEAR(std::sqrt(v / 100), want[c], 1e-12);
    }
}

TEST(ColoredNoise, SeedReproducesBatch) {
  const auto a = sample_colored<3>(8, 50, {1, 1, 1}, {1, 1, 2}, 7);
  const auto b = sample_colored<3>(8, 50, {1, 1, 1}, {1, 1, 2}, 7);
  const auto c = sample_colored<3>(8, 50, {1, 1, 1}, {1, 1, 2}, 8);
  EXPECT_EQ(a.data, b.data);
  EXPECT_NE(a.data, c.data);
}

TEST(ColoredNoise, OddLengthAndSingleStep) {
  EXPECT_NO_THROW((sample_colored<1>(3, 17, {1.0}, {1.0}, 1)));
  const auto one = sample_colored<1>(3, 1, {2.0}, {1.0}, 1);
  EXPECT_EQ(one.data.size(), 3u);
  EXPECT_THROW((sample_colored<1>(0, 10, {1.0}, {1.0}, 1)), std::invalid_argument);
}

// ---- update -----------------------------------------------------------------------

TEST(Update, SingleSampleIsReturnedExactly) {
  const auto b = random_batch(1, 20, 1);
  const std::vector<double> cost{42.0};
  const auto r = mppi_update(cost, b, 1.0);
  for (int t = 0; t < 20; ++t)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(r.controls[t][c], b.at(0, t, c));
  EXPECT_DOUBLE_EQ(r.ess, 1.0);
}

TEST(Update, EqualCostsAverage) {
  const auto b = random_batch(2, 10, 2);
  const std::vector<double> cost{5.0, 5.0};
  const auto r = mppi_update(cost, b, 0.3);
  for (int t = 0; t < 10; ++t)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(r.controls[t][c], 0.5 * (b.at(0, t, c) + b.at(1, t, c)), 1e-15);
  EXPECT_DOUBLE_EQ(r.ess, 2.0);
}

TEST(Update, SmallTemperatureSelectsArgmin) {
  const auto b = random_batch(50, 10, 3);
  std::vector<double> cost(50);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 10);
  for (auto& x : cost) x = u(rng);
  const auto best = std::min_element(cost.begin(), cost.end()) - cost.begin();
  const auto r = mppi_update(cost, b, 1e-6);
  EXPECT_EQ(r.best_index, best);
  for (int t = 0; t < 10; ++t)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(r.controls[t][c], b.at(static_cast<int>(best), t, c), 1e-6);
}

TEST(Update, WeightsNormalizedAndShiftInvariant) {
  const auto b = random_batch(64, 5, 4);
  std::vector<double> cost(64);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(100, 3);
  for (auto& x : cost) x = n(rng);
  const auto r = mppi_update(cost, b, 2.0);
  EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 1.0, 1e-12);
  auto shifted = cost;
  for (auto& x : shifted) x += 1e5;
  const auto s = mppi_update(shifted, b, 2.0);
  for (std::size_t k = 0; k < cost.size(); ++k) EXPECT_NEAR(s.weights[k], r.weights[k], 1e-12);
  EXPECT_GE(r.ess, 1.0);
  EXPECT_LE(r.ess, 64.0);
}

TEST(Update, InfiniteCostsExcluded) {
  const auto b = random_batch(3, 4, 5);
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> cost{inf, 1.0, std::nan("")};
  const auto r = mppi_update(cost, b, 1.0);
  EXPECT_EQ(r.weights[0], 0.0);
  EXPECT_EQ(r.weights[2], 0.0);
  EXPECT_EQ(r.controls[2][2], b.at(1, 2, 2));
  EXPECT_EQ(r.mean_cost, 1.0);
  const std::vector<double> none{inf, inf, inf};
  EXPECT_THROW(mppi_update(none, b, 1.0), NoFeasibleSample);
}

TEST(Update, LqrSmokeBenchmark) {
  // Double integrator, quadratic cost; MPPI on the open-loop sequence vs the
  // finite-horizon Riccati gain over the same horizon.
  const double dt = 0.1;
  const int horizon = 20;
  const double qp = 1.0, qv = 0.1, r = 0.05, qf = 10.0;
  auto cost_of = [&](const ControlBatch& b, int k) {
    double p = 1.0, v = 0.0, c = 0.0;
    for (int t = 0; t < horizon; ++t) {
      const double u = b.at(k, t, 0);
      c += qp * p * p + qv * v * v + r * u * u;
      p += dt * v;
      v += dt * u;
    }
    return c + qf * (p * p + v * v);
  };
  // Riccati with state cost diag(qp, qv), input cost r, terminal qf I.
  double P[2][2] = {{qf, 0}, {0, qf}}, K[2] = {0, 0};
  for (int t = horizon - 1; t >= 0; --t) {
    // A = [[1, dt], [0, 1]], B = [0, dt]
    const double PA00 = P[0][0], PA01 = P[0][0] * dt + P[0][1], PA10 = P[1][0], PA11 = P[1][0] * dt + P[1][1];
    const double AtPA00 = PA00, AtPA01 = PA01, AtPA10 = dt * PA00 + PA10, AtPA11 = dt * PA01 + PA11;
    const double BtPB = dt * dt * P[1][1];
    const double BtPA0 = dt * P[1][0], BtPA1 = dt * (P[1][0] * dt + P[1][1]);
    const double s = r + BtPB;
    K[0] = BtPA0 / s;
    K[1] = BtPA1 / s;
    double N[2][2] = {{qp + AtPA00 - BtPA0 * K[0], AtPA01 - BtPA0 * K[1]},
                      {AtPA10 - BtPA1 * K[0], qv + AtPA11 - BtPA1 * K[1]}};
    std::copy(&N[0][0], &N[0][0] + 4, &P[0][0]);
  }
  const double lqr = -K[0] * 1.0;
  ControlSequence nominal(horizon, Control{});
  for (int it = 0; it < 30; ++it) {
    auto b = sample_colored<3>(1000, horizon, {1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 100 + it);
    for (int k = 0; k < b.samples; ++k)
      for (int t = 0; t < horizon; ++t) b.at(k, t, 0) += nominal[t][0];
    std::vector<double> cost(b.samples);
    for (int k = 0; k < b.samples; ++k) cost[k] = cost_of(b, k);
    nominal = mppi_update(cost, b, 0.5).controls;
  }
  EXPECT_NEAR(nominal[0][0], lqr, 0.1 * std::abs(lqr)) << "lqr " << lqr;
}

// ---- rollouts ---------------------------------------------------------------------

TEST(Rollout, RestingOnFreeFlatGroundCostsNothing) {
  Fixture f;
  ControlBatch zero = random_batch(4, 30, 1);
  std::fill(zero.data.begin(), zero.data.end(), 0.0);
  for (double c : rollout_batch(f.model, f.start, zero, f.world)) EXPECT_EQ(c, 0.0);
}

TEST(Rollout, SingleSampleMatchesManualComposition) {
  Fixture f;
  for (int j = 0; j < f.map.height(); ++j) f.map.set_class(90, j, world::CellClass::kRisky);
  const risk::CostToGo ctg = risk::CostToGo::to_point(f.map, 30.0, 0.0, f.world.cost);
  f.world.cost_to_go = &ctg;
  const auto b = random_batch(1, 60, 9);
  RolloutTrace trace;
  const double got = rollout_sample(f.model, f.start, b, 0, f.world, &trace);

  belief::Belief bel = f.start.belief;
  belief::Hidden<double> h;
  double prev = bel.mean.vx, total = 0.0;
  std::vector<double> stage;
  std::vector<std::array<double, 2>> pos;
  for (int t = 0; t < 60; ++t) {
    const auto y = vehicle::terrain_readings(vehicle::Pose6::of(bel.mean), f.map, f.params.suspension);
    const auto s = vehicle::step_suspension(bel.mean, f.map, f.params.suspension, f.params.vehicle, 0.02);
    f.model.step(bel, h, vehicle::ControlInput(b.at(0, t, 0), b.at(0, t, 1), b.at(0, t, 2)), y);
    bel.mean.pz = s.state.pz;
    bel.mean.roll = s.state.roll;
    bel.mean.pitch = s.state.pitch;
    bel.mean.pz_dot = s.state.pz_dot;
    bel.mean.roll_rate = s.state.roll_rate;
    bel.mean.pitch_rate = s.state.pitch_rate;
    const auto c = risk::stage_cost(risk::sigma_points(bel, 2.0), bel.mean, prev, s.wheel_forces, f.world.context,
                                    f.world.cost);
    prev = bel.mean.vx;
    stage.push_back(c.total);
    pos.push_back({bel.mean.px, bel.mean.py});
    total += c.total;
  }
  total += risk::terminal_cost(stage, pos, ctg, f.world.cost).value;
  EXPECT_DOUBLE_EQ(got, total);
  EXPECT_EQ(trace.means.size(), 60u);
  EXPECT_DOUBLE_EQ(trace.total, total);
}

TEST(Rollout, IndependentOfOrderingAndThreads) {
  Fixture f;
  const auto b = random_batch(12, 40, 11);
  const auto costs = rollout_batch(f.model, f.start, b, f.world, 1);
  const auto threaded = rollout_batch(f.model, f.start, b, f.world, 3);
  EXPECT_EQ(costs, threaded);
  std::vector<int> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  ControlBatch r = b;
  for (int k = 0; k < 12; ++k)
    for (int t = 0; t < 40; ++t)
      for (std::size_t c = 0; c < 3; ++c) r.at(k, t, c) = b.at(perm[k], t, c);
  const auto rc = rollout_batch(f.model, f.start, r, f.world, 2);
  for (int k = 0; k < 12; ++k) EXPECT_EQ(rc[k], costs[perm[k]]);
}

TEST(Rollout, LeavingTheMapIsHeavilyPenalized) {
  Fixture f;
  f.start.belief.mean.px = 38.0;
  f.start.belief.mean.vx = 8.0;
  auto b = random_batch(1, 50, 1);
  for (int t = 0; t < 50; ++t) {
    b.at(0, t, 0) = 1.0;
    b.at(0, t, 1) = 0.0;
    b.at(0, t, 2) = 0.0;
  }
  EXPECT_GT(rollout_batch(f.model, f.start, b, f.world)[0], f.world.cost.penalty);
}

TEST(Rollout, PropagateOnlyMatchesModelSteps) {
  Fixture f;
  const auto b = random_batch(3, 25, 12);
  std::vector<belief::Belief> out(3);
  propagate_batch(f.model, f.start, b, out, 2);
  belief::Belief bel = f.start.belief;
  belief::Hidden<double> h;
  for (int t = 0; t < 25; ++t)
    f.model.step(bel, h, vehicle::ControlInput(b.at(1, t, 0), b.at(1, t, 1), b.at(1, t, 2)), vehicle::SensorReadings::flat());
  EXPECT_EQ(out[1].mean.to_array(), bel.mean.to_array());
}

// ---- controller -------------------------------------------------------------------

namespace {

MppiConfig small_config() {
  MppiConfig c;
  c.num_samples = 64;
  c.horizon = 60;
  c.lambda = 5.0;
  c.threads = 1;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Controller, DrivesTowardGoalAhead) {
  Fixture f;
  const auto ctg = risk::CostToGo::to_point(f.map, 30.0, 0.0, f.world.cost);
  f.world.cost_to_go = &ctg;
  Controller ctl(f.model, f.world, small_config());
  bool throttle = false;
  for (int s = 0; s < 5 && !throttle; ++s) throttle = ctl.step(f.start).command.throttle > 0.0;
  EXPECT_TRUE(throttle);
}

TEST(Controller, DeterministicUnderSeed) {
  Fixture f;
  const auto ctg = risk::CostToGo::to_point(f.map, 30.0, 0.0, f.world.cost);
  f.world.cost_to_go = &ctg;
  Controller a(f.model, f.world, small_config()), b(f.model, f.world, small_config());
  for (int s = 0; s < 3; ++s) {
    const auto oa = a.step(f.start), ob = b.step(f.start);
    EXPECT_EQ(oa.diagnostics.command, ob.diagnostics.command);
    EXPECT_EQ(oa.diagnostics.best_cost, ob.diagnostics.best_cost);
  }
  auto cfg = small_config();
  cfg.seed = 99;
  Controller c(f.model, f.world, cfg);
  EXPECT_NE(c.step(f.start).diagnostics.best_cost, Controller(f.model, f.world, small_config()).step(f.start).diagnostics.best_cost);
}

TEST(Controller, ShiftsNominalByOneStep) {
  Fixture f;
  const auto ctg = risk::CostToGo::to_point(f.map, 30.0, 0.0, f.world.cost);
  f.world.cost_to_go = &ctg;
  Controller ctl(f.model, f.world, small_config());
  ctl.step(f.start);
  const auto before = ctl.nominal();
  // Shift directly: entry t takes the old entry t + 1 and the tail repeats.
  ctl.shift();
  for (std::size_t t = 0; t + 1 < before.size(); ++t) EXPECT_EQ(ctl.nominal()[t], before[t + 1]);
  EXPECT_EQ(ctl.nominal().back(), before.back());
}

TEST(Controller, CommandIsFirstOptimizedControl) {
  Fixture f;
  const auto ctg = risk::CostToGo::to_point(f.map, 30.0, 0.0, f.world.cost);
  f.world.cost_to_go = &ctg;
  Controller ctl(f.model, f.world, small_config());
  const auto out = ctl.step(f.start);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_GE(out.diagnostics.command[c], small_config().lower[c]);
    EXPECT_LE(out.diagnostics.command[c], small_config().upper[c]);
  }
  EXPECT_EQ(out.command.throttle, out.diagnostics.command[0]);
  EXPECT_GT(out.diagnostics.ess, 0.0);
  EXPECT_LE(out.diagnostics.best_cost, out.diagnostics.mean_cost);
}

TEST(Controller, DiagnosticsCsv) {
  Diagnostics d{4, 1.5, 2.5, 10.0, {0.5, 0.0, -1.0}};
  EXPECT_EQ(diagnostics_csv_header(), "step,best_cost,mean_cost,ess,throttle,brake,steer");
  EXPECT_EQ(diagnostics_csv_row(d), "4,1.5,2.5,10,0.5,0,-1");
}

TEST(MppiConfigJson, RoundTripAndValidation) {
  auto c = small_config();
  c.exponents = {0.0, 1.0, 2.0};
  EXPECT_EQ(to_json(mppi_config_from_json(to_json(c))), to_json(c));
  auto j = to_json(c);
  j["lambda"] = 0.0;
  EXPECT_THROW(mppi_config_from_json(j), std::invalid_argument);
  j = to_json(c);
  j["num_samples"] = 0;
  EXPECT_THROW(mppi_config_from_json(j), std::invalid_argument);
}
