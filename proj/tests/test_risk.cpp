#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "bmppi/risk/cost_to_go.hpp"
#include "bmppi/risk/costs.hpp"
#include "bmppi/risk/risk_measure.hpp"
#include "bmppi/risk/sigma_points.hpp"

using namespace bmppi;
using namespace bmppi::risk;

namespace {

Mat4<double> random_spd(std::mt19937_64& rng, double ridge = 1e-3) {
  std::normal_distribution<double> n;
  Eigen::Matrix4d a;
  for (int i = 0; i < 16; ++i) a.data()[i] = n(rng);
  const Eigen::Matrix4d p = a * a.transpose() + ridge * Eigen::Matrix4d::Identity();
  Mat4<double> out;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out(r, c) = p(r, c);
  return out;
}

// Sort, interpolate and average written without the library helpers.
double oracle_var(std::vector<double> c, double alpha) {
  std::sort(c.begin(), c.end());
  const double pos = alpha * (c.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= c.size()) return c.back();
  return c[lo] * (1.0 - (pos - lo)) + c[lo + 1] * (pos - lo);
}

double oracle_cvar(const std::vector<double>& c, double alpha) {
  if (alpha == 1.0) return *std::max_element(c.begin(), c.end());
  const double v = oracle_var(c, alpha);
  double tail = 0.0;
  for (double x : c)
    if (x > v) tail += x - v;
  return std::min(v + tail / (c.size() * (1.0 - alpha)), *std::max_element(c.begin(), c.end()));
}

world::ElevationMap free_map(int n = 40, double res = 0.5) { return world::ElevationMap(n, n, res, -n * res / 2, -n * res / 2); }

CostContext context(const world::ElevationMap& map) {
  CostContext ctx;
  ctx.map = &map;
  return ctx;
}

}  // namespace

// ---- Cholesky and sigma points ------------------------------------------------

TEST(Cholesky, IdentityFactorsToIdentity) {
  const auto l = cholesky<4>(Mat4<double>::identity());
  ASSERT_TRUE(l);
  EXPECT_EQ(max_abs_diff(*l, Mat4<double>::identity()), 0.0);
}

TEST(Cholesky, TwoByTwoExample) {
  Mat<double, 2, 2> p;
  p(0, 0) = 4;
  p(0, 1) = p(1, 0) = 2;
  p(1, 1) = 3;
  const auto l = cholesky<2>(p);
  ASSERT_TRUE(l);
  EXPECT_DOUBLE_EQ((*l)(0, 0), 2.0);
  EXPECT_DOUBLE_EQ((*l)(1, 0), 1.0);
  EXPECT_DOUBLE_EQ((*l)(1, 1), std::sqrt(2.0));
  EXPECT_EQ((*l)(0, 1), 0.0);
}

TEST(Cholesky, NegativePivotIsNotPsd) {
  Mat4<double> p = Mat4<double>::identity();
  p(1, 1) = -1.0;
  EXPECT_FALSE(cholesky<4>(p));
}

TEST(Cholesky, ReconstructsRandomSpd) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 200; ++k) {
    const auto p = random_spd(rng);
    const auto l = cholesky<4>(p);
    ASSERT_TRUE(l);
    const auto back = *l * transpose(*l);
    double fro = 0.0, err = 0.0;
    for (int i = 0; i < 16; ++i) {
      fro += p.data[i] * p.data[i];
      err += (back.data[i] - p.data[i]) * (back.data[i] - p.data[i]);
    }
    EXPECT_LT(std::sqrt(err), 1e-9 * std::sqrt(fro));
    for (int r = 0; r < 4; ++r)
      for (int c = r + 1; c < 4; ++c) EXPECT_EQ((*l)(r, c), 0.0);
  }
}

TEST(Cholesky, SemidefiniteStillFactors) {
  Mat4<double> p = Mat4<double>::zero();
  p(0, 0) = p(0, 1) = p(1, 0) = p(1, 1) = 1.0;  // rank one in the first block
  const auto l = cholesky<4>(p);
  ASSERT_TRUE(l);
  EXPECT_LT(max_abs_diff(*l * transpose(*l), p), 1e-15);
}

TEST(SigmaPoints, IdentityGivesScaledAxes) {
  const auto s = sigma_points({1, 2, 3, 4}, Mat4<double>::identity(), 2.0);
  EXPECT_FALSE(s.degenerate);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      const double base = i + 1.0;
      EXPECT_DOUBLE_EQ(s.points[1 + j][i], base + (i == j ? 2.0 : 0.0));
      EXPECT_DOUBLE_EQ(s.points[5 + j][i], base - (i == j ? 2.0 : 0.0));
    }
}

TEST(SigmaPoints, ZeroCovarianceCollapsesToMean) {
  const auto s = sigma_points({1, 2, 3, 4}, Mat4<double>::zero(), 2.0);
  for (const auto& p : s.points) EXPECT_EQ(p, (std::array<double, 4>{1, 2, 3, 4}));
}

TEST(SigmaPoints, NotPsdFallsBackToMean) {
  Mat4<double> p = Mat4<double>::identity();
  p(2, 2) = -0.5;
  const auto s = sigma_points({1, 2, 3, 4}, p, 2.0);
  EXPECT_TRUE(s.degenerate);
  for (const auto& q : s.points) EXPECT_EQ(q, (std::array<double, 4>{1, 2, 3, 4}));
}

TEST(SigmaPoints, SymmetricPairsAndExactMean) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int k = 0; k < 100; ++k) {
    const std::array<double, 4> m{n(rng), n(rng), n(rng), n(rng)};
    const auto s = sigma_points(m, random_spd(rng), 1.0 + k % 3);
    EXPECT_EQ(s.points[0], m);
    for (int i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (const auto& p : s.points) sum += p[i];
      EXPECT_NEAR(sum / 9.0, m[i], 1e-12 * (1 + std::abs(m[i])));
      for (int j = 0; j < 4; ++j) EXPECT_NEAR(s.points[1 + j][i] - m[i], m[i] - s.points[5 + j][i], 1e-12);
    }
  }
}

TEST(SigmaPoints, CovarianceRecoveredFromPoints) {
  // sum_j (x_j - m)(x_j - m)^T over the 8 offsets is 2 c^2 P.
  std::mt19937_64 rng(3);
  const auto p = random_spd(rng);
  const double c = 2.0;
  const auto s = sigma_points({0, 0, 0, 0}, p, c);
  for (int r = 0; r < 4; ++r)
    for (int q = 0; q < 4; ++q) {
      double acc = 0.0;
      for (int k = 1; k < 9; ++k) acc += s.points[k][r] * s.points[k][q];
      EXPECT_NEAR(acc / (2 * c * c), p(r, q), 1e-10);
    }
}

TEST(SigmaPoints, AffineCostMeanMatchesCostAtMean) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int k = 0; k < 100; ++k) {
    const std::array<double, 4> m{n(rng) * 10, n(rng) * 10, n(rng), n(rng) * 3};
    const std::array<double, 4> a{n(rng), n(rng), n(rng), n(rng)};
    const double b = n(rng);
    auto cost = [&](const std::array<double, 4>& x) { return a[0] * x[0] + a[1] * x[1] + a[2] * x[2] + a[3] * x[3] + b; };
    const auto s = sigma_points(m, random_spd(rng), 2.0);
    std::array<double, 9> c{};
    for (int i = 0; i < 9; ++i) c[i] = cost(s.points[i]);
    EXPECT_NEAR(evaluate_risk(c, RiskMeasure::mean()), cost(m), 1e-9);
  }
}

// ---- risk measures ------------------------------------------------------------

TEST(Risk, ConstantCostsGiveThatCost) {
  const std::array<double, 9> c{3, 3, 3, 3, 3, 3, 3, 3, 3};
  for (auto m : {RiskMeasure::mean(), RiskMeasure::max(), RiskMeasure::min(), RiskMeasure::var(0.3), RiskMeasure::cvar(0.3),
                 RiskMeasure::cvar(1.0)})
    EXPECT_DOUBLE_EQ(evaluate_risk(c, m), 3.0);
}

TEST(Risk, FiveValueExample) {
  const std::vector<double> c{5, 1, 4, 2, 3};
  EXPECT_NEAR(evaluate_risk(c, RiskMeasure::var(0.8)), 4.2, 1e-12);
  EXPECT_NEAR(evaluate_risk(c, RiskMeasure::cvar(0.8)), 5.0, 1e-12);
}

TEST(Risk, CvarAtZeroIsMean) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 100; ++k) {
    std::array<double, 9> c;
    for (auto& x : c) x = u(rng);
    EXPECT_NEAR(evaluate_risk(c, RiskMeasure::cvar(0.0)), evaluate_risk(c, RiskMeasure::mean()), 1e-12);
  }
}

TEST(Risk, CvarAtOneIsMax) {
  const std::array<double, 9> c{1, 9, 2, 8, 3, 7, 4, 6, 5};
  EXPECT_EQ(evaluate_risk(c, RiskMeasure::cvar(1.0)), 9.0);
  EXPECT_EQ(evaluate_risk(c, RiskMeasure::var(1.0)), 9.0);
}

TEST(Risk, CvarNearOneIsClampedToMax) {
  const std::array<double, 9> c{0, 0, 0, 0, 0, 0, 0, 0, 1};
  // Unclamped: VaR = 0.92 and excess 0.08 / 0.09 pushes past 1.
  EXPECT_DOUBLE_EQ(evaluate_risk(c, RiskMeasure::cvar(0.99)), 1.0);
}

TEST(Risk, MatchesBruteForceOracle) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int k = 0; k < 1000; ++k) {
    std::array<double, 9> c;
    for (auto& x : c) x = u(rng);
    const std::vector<double> v(c.begin(), c.end());
    for (double a : {0.0, 0.1, 0.25, 0.5, 0.75, 0.95, 1.0}) {
      EXPECT_NEAR(evaluate_risk(c, RiskMeasure::var(a)), oracle_var(v, a), 1e-12 * 100);
      EXPECT_NEAR(evaluate_risk(c, RiskMeasure::cvar(a)), oracle_cvar(v, a), 1e-12 * 100);
    }
  }
}

TEST(Risk, OrderingThatHoldsForEveryAlpha) {
  // min <= VaR <= CVaR <= max and mean <= CVaR. VaR against the mean depends
  // on the sample (VaR at alpha = 0 is the minimum).
  std::mt19937_64 rng(7);
  std::exponential_distribution<double> e(0.3);
  for (int k = 0; k < 1000; ++k) {
    std::array<double, 9> c;
    for (auto& x : c) x = e(rng);
    const double mn = evaluate_risk(c, RiskMeasure::min()), mx = evaluate_risk(c, RiskMeasure::max());
    const double mean = evaluate_risk(c, RiskMeasure::mean());
    for (double a : {0.0, 0.25, 0.5, 0.75, 0.95, 1.0}) {
      const double v = evaluate_risk(c, RiskMeasure::var(a)), cv = evaluate_risk(c, RiskMeasure::cvar(a));
      EXPECT_LE(mn, v);
      EXPECT_LE(v, cv + 1e-12);
      EXPECT_LE(cv, mx);
      EXPECT_LE(mean, cv + 1e-12);
    }
  }
}

TEST(Risk, VarAtZeroIsTheMinimum) {
  const std::array<double, 9> c{4, 1, 9, 2, 2, 7, 3, 3, 5};
  EXPECT_EQ(evaluate_risk(c, RiskMeasure::var(0.0)), 1.0);
  EXPECT_LT(evaluate_risk(c, RiskMeasure::var(0.0)), evaluate_risk(c, RiskMeasure::mean()));
}

TEST(Risk, AlphaValidated) {
  EXPECT_THROW(RiskMeasure::cvar(1.5), std::invalid_argument);
  EXPECT_THROW(RiskMeasure::var(-0.1), std::invalid_argument);
  EXPECT_THROW(risk_kind_named("median"), std::invalid_argument);
}

// ---- shaping ------------------------------------------------------------------

TEST(Shaping, ZeroBelowPenaltyAboveMonotoneBetween) {
  CostConfig cfg;
  for (auto scaling : {Scaling::kLinear, Scaling::kQuadratic}) {
    const ShapedTerm t{1.0, 3.0, scaling, 7.0};
    EXPECT_EQ(t(0.5, cfg.penalty), 0.0);
    EXPECT_EQ(t(1.0, cfg.penalty), 0.0);
    EXPECT_GE(t(3.0, cfg.penalty), cfg.penalty);
    EXPECT_GE(t(50.0, cfg.penalty), cfg.penalty);
    double prev = 0.0;
    for (double v = 0.0; v < 4.0; v += 0.01) {
      const double y = t(v, cfg.penalty);
      EXPECT_GE(y, prev);
      prev = y;
    }
  }
  EXPECT_DOUBLE_EQ((ShapedTerm{0, 2, Scaling::kQuadratic, 4})(1.0, 1e4), 1.0);
  EXPECT_DOUBLE_EQ((ShapedTerm{0, 2, Scaling::kLinear, 4})(1.0, 1e4), 2.0);
}

// ---- individual terms ---------------------------------------------------------

TEST(Rollover, RestOnFlatGroundIsOne) {
  CostConfig c;
  EXPECT_DOUBLE_EQ(rollover_value(0, 0, 0, 0, c), 1.0);
  EXPECT_EQ(rollover_cost(0, 0, 0, 0, c), 0.0);
}

TEST(Rollover, LateralLoadQuadraticInSpeed) {
  CostConfig c;
  const double wa = 0.1;
  const double s1 = 1.0 - rollover_value(2.0, wa, 0, 0, c), s2 = 1.0 - rollover_value(4.0, wa, 0, 0, c);
  EXPECT_NEAR(s2 / s1, 4.0, 1e-12);
}

TEST(Rollover, StaticRollExample) {
  CostConfig c;
  const double expect = std::cos(0.2) - 2 * c.cg_height / c.track_width * std::sin(0.2);
  EXPECT_NEAR(rollover_value(0, 0, 0.2, 0, c), expect, 1e-14);
  EXPECT_NEAR(rollover_value(0, 0, -0.2, 0, c), expect, 1e-14);
}

TEST(Slip, Examples) {
  EXPECT_EQ(slip_value(3.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(slip_value(0.0, 0.01), 0.01);
  EXPECT_DOUBLE_EQ(slip_value(2.0, 0.5), slip_value(2.0, -0.5));
  EXPECT_NEAR(slip_value(5.0, 2.0), std::atan(2.0 / 5.001), 1e-15);
}

TEST(SpeedLimit, TablesInterpolate) {
  CostConfig c;
  EXPECT_NEAR(attitude_speed_limit(0.225, 0, c), 4.0, 1e-12);
  EXPECT_NEAR(attitude_speed_limit(-0.225, 0, c), 4.0, 1e-12);
  EXPECT_TRUE(std::isinf(attitude_speed_limit(0.1, 0, c)));
  EXPECT_EQ(attitude_speed_limit(0.5, 0, c), 2.0);
  EXPECT_NEAR(attitude_speed_limit(0, -0.55, c), 6.0, 1e-12);  // nose up, halfway through 0.3..0.8
  EXPECT_NEAR(attitude_speed_limit(0, 0.3, c), 3.0, 1e-12);    // nose down, halfway through 0.2..0.4
}

TEST(SpeedLimit, ZeroBelowAndReverseFiveTimes) {
  CostConfig c;
  EXPECT_EQ(speed_limit_cost(3.0, 4.0, c), 0.0);
  const double fwd = speed_limit_cost(2.0, 1.0, c), rev = speed_limit_cost(-2.0, 1.0, c);
  EXPECT_GT(fwd, 0.0);
  EXPECT_DOUBLE_EQ(rev, 5.0 * fwd);
}

TEST(Traversability, FreeMapCostsNothing) {
  const auto map = free_map();
  CostConfig c;
  const auto t = traversability_cost({0, 0, 0, 0, 0, 0.3}, map, {}, 5.0, 0.5, c);
  EXPECT_EQ(t.wheel, 0.0);
  EXPECT_EQ(t.body, 0.0);
}

TEST(Traversability, LethalBodyScalesWithSpeed) {
  auto map = free_map();
  const auto [i, j] = map.cell_of(0.0, 0.0);
  map.set_class(i, j, world::CellClass::kLethal);
  CostConfig c;
  const auto a = traversability_cost({}, map, {}, 2.0, 0.0, c), b = traversability_cost({}, map, {}, 4.0, 0.0, c);
  EXPECT_GT(a.body, 0.0);
  EXPECT_DOUBLE_EQ(b.body / a.body, 2.0);
  EXPECT_EQ(a.wheel, 0.0);
}

TEST(Traversability, UnknownAndOffMapAreLethal) {
  auto map = free_map(10, 0.5);
  CostConfig c;
  const auto off = traversability_cost({100, 100, 0, 0, 0, 0}, map, {}, 1.0, 0.0, c);
  EXPECT_EQ(off.body, c.penalty);
  EXPECT_EQ(off.lethal_hits, 5);
}

TEST(Traversability, YawMovesWheelQueryAcrossBoundary) {
  // Lethal band for y >= 0.8 on a 0.1 m grid. The front-left query point sits
  // at body (1.5, 0.7): at yaw 0 it is free, at yaw 0.1 it rotates to
  // y = 1.5 sin(0.1) + 0.7 cos(0.1) ~= 0.846.
  world::ElevationMap map(60, 60, 0.1, -3.0, -3.0);
  for (int j = 0; j < 60; ++j)
    for (int i = 0; i < 60; ++i)
      if (map.cell_center_y(j) >= 0.8) map.set_class(i, j, world::CellClass::kLethal);
  CostConfig c;
  vehicle::SuspensionParams sp;
  const double y_after = 1.5 * std::sin(0.1) + 0.7 * std::cos(0.1);
  ASSERT_GT(y_after, 0.8);
  ASSERT_NEAR(y_after - 0.7, 0.1 * 1.5, 0.01);
  const auto straight = traversability_cost({0, 0, 0, 0, 0, 0.0}, map, sp, 1.0, 0.0, c);
  const auto turned = traversability_cost({0, 0, 0, 0, 0, 0.1}, map, sp, 1.0, 0.0, c);
  EXPECT_EQ(straight.wheel, 0.0);
  EXPECT_EQ(turned.wheel, c.penalty);
}

TEST(Force, FlatGroundHasNoFrontOrSideComponent) {
  const auto f = wheel_frame_forces(5000.0, {0, 0, 1}, 0.0, 0.0, 0.0);
  EXPECT_EQ(f[0], 0.0);
  EXPECT_EQ(f[1], 0.0);
}

TEST(Force, BelowThresholdsCostsNothing) {
  CostConfig c;
  const std::array<world::Normal, 4> n{{{0, 0, 1}, {0, 0, 1}, {0, 0, 1}, {0, 0, 1}}};
  EXPECT_EQ(force_cost({1000, -1000, 2000, 0}, n, 0.1, 0.0, 0.0, c), 0.0);
}

TEST(Force, MatchesDirectFormula) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 200; ++k) {
    const double nx = 0.3 * u(rng), ny = 0.3 * u(rng), nz = std::sqrt(1 - nx * nx - ny * ny);
    const double f = 10000 * u(rng), d = 0.4 * u(rng), phi = 0.3 * u(rng), th = 0.3 * u(rng);
    const auto w = wheel_frame_forces(f, {nx, ny, nz}, d, phi, th);
    EXPECT_NEAR(w[0], f * (nx * std::cos(d) + ny * std::sin(d)) / nz - f * th, 1e-9);
    EXPECT_NEAR(w[1], f * (-nx * std::sin(d) + ny * std::cos(d)) / nz + f * phi, 1e-9);
  }
}

TEST(Accel, SeparateAccelAndDecelTuning) {
  CostConfig c;
  EXPECT_EQ(accel_cost(1.0, c), 0.0);
  EXPECT_GT(accel_cost(6.0, c), 0.0);
  EXPECT_EQ(accel_cost(-4.0, c), 0.0);  // below the braking threshold
  EXPECT_NE(accel_cost(7.0, c), accel_cost(-7.0, c));
}

// ---- stage assembly -----------------------------------------------------------

TEST(Stage, DistanceExample) { EXPECT_NEAR(step_distance(3.0, 4.0, 0.02), 0.1, 1e-15); }

TEST(Stage, StationaryVehicleHasNoDistanceBlock) {
  auto map = free_map();
  const auto [i, j] = map.cell_of(0.0, 0.0);
  map.set_class(i, j, world::CellClass::kLethal);
  const auto ctx = context(map);
  CostConfig c;
  vehicle::VehicleState s;
  s.roll = 0.5;  // would trip the rollover term if it were counted
  const auto pts = sigma_points({0, 0, 0, 0}, Mat4<double>::identity(), 2.0);
  const auto out = stage_cost(pts, s, 0.0, {}, ctx, c);
  EXPECT_EQ(out.distance, 0.0);
  EXPECT_GT(out.distributional, 0.0);
  EXPECT_EQ(out.total, out.force + out.accel);
}

TEST(Stage, DegenerateBeliefWithMaxMatchesMeanCosting) {
  auto map = free_map();
  for (int j = 0; j < map.height(); ++j) map.set_class(22, j, world::CellClass::kRisky);
  const auto ctx = context(map);
  CostConfig c;
  c.risk = RiskMeasure::max();
  vehicle::VehicleState s;
  s.px = 1.0;
  s.vx = 4.0;
  s.vy = 0.3;
  s.steer = 2.0;
  s.roll = 0.1;
  belief::Belief b{s, Mat4<double>::zero()};
  const auto out = stage_cost(sigma_points(b, 2.0), s, 3.9, {}, ctx, c);
  EXPECT_DOUBLE_EQ(out.distributional, point_cost(s, ctx, c));
  EXPECT_GT(out.distributional, 0.0);
  EXPECT_NEAR(out.total, out.force + out.accel + step_distance(4.0, 0.3, 0.02) * out.distributional, 1e-12);
}

TEST(Stage, UncertaintyRaisesCostNearHazard) {
  // A lethal wall 2 m to the left: the mean clears it, the yaw and lateral
  // sigma points do not.
  auto map = free_map(60, 0.25);
  for (int j = 0; j < map.height(); ++j)
    for (int i = 0; i < map.width(); ++i)
      if (map.cell_center_y(j) > 2.0) map.set_class(i, j, world::CellClass::kLethal);
  const auto ctx = context(map);
  CostConfig c;
  vehicle::VehicleState s;
  s.vx = 3.0;
  Mat4<double> p = Mat4<double>::zero();
  p(1, 1) = 0.5;
  p(2, 2) = 0.05;
  const auto tight = stage_cost(sigma_points(belief::Belief{s, Mat4<double>::zero()}, 2.0), s, 3.0, {}, ctx, c);
  const auto loose = stage_cost(sigma_points(belief::Belief{s, p}, 2.0), s, 3.0, {}, ctx, c);
  EXPECT_EQ(tight.distributional, 0.0);
  EXPECT_GE(loose.distributional, c.penalty);
}

TEST(Stage, SpeedLimitFromMapIsMinimumOverWheels) {
  auto map = free_map();
  const auto [i, j] = map.cell_of(1.5, -0.7);  // front-right query
  map.set_speed(i, j, 1.0);
  const auto ctx = context(map);
  CostConfig c;
  vehicle::VehicleState s;
  s.vx = 3.0;
  EXPECT_NEAR(point_cost(s, ctx, c), speed_limit_cost(3.0, 1.0, c), 1e-12);
}

// ---- cost to go ---------------------------------------------------------------

namespace {

// Bellman-Ford over every cell, edges as in the planner.
std::vector<double> oracle_potential(const world::ElevationMap& map, int gi, int gj, const CostConfig& c) {
  const int w = map.width(), h = map.height();
  std::vector<double> d(map.cells(), kInf);
  d[map.index(gi, gj)] = 0.0;
  for (int iter = 0; iter < w * h; ++iter) {
    bool changed = false;
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i) {
        const double ci = traversal_cost(map.class_at(i, j), c);
        if (!std::isfinite(ci)) continue;
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            if (!di && !dj) continue;
            if (!map.contains_cell(i + di, j + dj)) continue;
            const double via = d[map.index(i + di, j + dj)] + std::hypot(di, dj) * map.resolution() * ci;
            if (via < d[map.index(i, j)] - 1e-15) {
              d[map.index(i, j)] = via;
              changed = true;
            }
          }
      }
    if (!changed) break;
  }
  return d;
}

}  // namespace

TEST(CostToGo, MatchesBellmanFordOnRandomGrids) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> cls(0, 9);
  CostConfig c;
  for (int trial = 0; trial < 30; ++trial) {
    world::ElevationMap map(10, 10, 1.0);
    for (int j = 0; j < 10; ++j)
      for (int i = 0; i < 10; ++i) {
        const int r = cls(rng);
        map.set_class(i, j, r < 6 ? world::CellClass::kFree : r < 8 ? world::CellClass::kRisky : world::CellClass::kLethal);
      }
    map.set_class(trial % 10, 9 - trial % 10, world::CellClass::kFree);
    const CostToGo g(map, trial % 10, 9 - trial % 10, c);
    const auto o = oracle_potential(map, trial % 10, 9 - trial % 10, c);
    for (std::size_t k = 0; k < o.size(); ++k) {
      if (std::isinf(o[k])) EXPECT_TRUE(std::isinf(g.potential()[k]));
      else EXPECT_NEAR(g.potential()[k], o[k], 1e-9);
    }
  }
}

TEST(CostToGo, StraightLineOnUniformGrid) {
  world::ElevationMap map(10, 10, 1.0);
  CostConfig c;
  const CostToGo g(map, 0, 4, c);
  EXPECT_EQ(g.at_cell(0, 4), 0.0);
  for (int i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(g.at_cell(i, 4), i * traversal_cost(world::CellClass::kFree, c));
}

TEST(CostToGo, NonIncreasingAlongGreedyDescent) {
  std::mt19937_64 rng(10);
  world::ElevationMap map(10, 10, 1.0);
  std::uniform_int_distribution<int> cls(0, 4);
  for (int j = 0; j < 10; ++j)
    for (int i = 0; i < 10; ++i) map.set_class(i, j, cls(rng) == 0 ? world::CellClass::kRisky : world::CellClass::kFree);
  const CostToGo g(map, 8, 8, CostConfig{});
  int i = 0, j = 0;
  for (int step = 0; step < 40 && g.at_cell(i, j) > 0.0; ++step) {
    int bi = i, bj = j;
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di)
        if (g.at_cell(i + di, j + dj) < g.at_cell(bi, bj)) bi = i + di, bj = j + dj;
    ASSERT_LT(g.at_cell(bi, bj), g.at_cell(i, j));
    i = bi;
    j = bj;
  }
  EXPECT_EQ(g.at_cell(i, j), 0.0);
}

TEST(CostToGo, WalledOffRegionIsUnreachable) {
  world::ElevationMap map(10, 10, 1.0);
  for (int j = 0; j < 10; ++j) map.set_class(5, j, world::CellClass::kLethal);
  const CostToGo g(map, 8, 5, CostConfig{});
  EXPECT_TRUE(std::isinf(g.at_cell(1, 5)));
  EXPECT_TRUE(std::isfinite(g.at_cell(7, 5)));
  EXPECT_TRUE(std::isinf(g.at(-5.0, 0.0)));
  EXPECT_THROW(CostToGo(map, 20, 0, CostConfig{}), std::invalid_argument);
}

TEST(TerminalCost, PicksBestHandoverPoint) {
  world::ElevationMap map(10, 1, 1.0);
  CostConfig c;
  c.cost_to_go_weight = 1.0;
  const CostToGo g(map, 9, 0, c);
  // Moving toward the goal, stage costs spike late.
  const std::vector<double> stage{0.0, 0.0, 0.0, 20.0};
  const std::vector<std::array<double, 2>> pos{{0.5, 0.5}, {1.5, 0.5}, {2.5, 0.5}, {3.5, 0.5}};
  const auto t = terminal_cost(stage, pos, g, c);
  EXPECT_EQ(t.handover_step, 2);
  EXPECT_DOUBLE_EQ(t.value, 7.0);
}

TEST(TerminalCost, UnreachableIsHeavilyPenalizedNotInfinite) {
  world::ElevationMap map(10, 1, 1.0);
  map.set_class(5, 0, world::CellClass::kLethal);
  CostConfig c;
  const CostToGo g(map, 9, 0, c);
  const std::vector<double> stage{0.0};
  const std::vector<std::array<double, 2>> pos{{0.5, 0.5}};
  const auto t = terminal_cost(stage, pos, g, c);
  EXPECT_TRUE(std::isfinite(t.value));
  EXPECT_EQ(t.value, c.cost_to_go_weight * c.unreachable);
}

// ---- config -------------------------------------------------------------------

TEST(CostConfigJson, RoundTrip) {
  CostConfig c;
  c.c_sigma = 1.0;
  c.risk = RiskMeasure::var(0.7);
  c.speed_cap = 6.0;
  c.slip.scaling = Scaling::kLinear;
  c.roll_table.speed_hi = 1.5;
  const auto r = cost_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(r), to_json(c));
  EXPECT_TRUE(std::isinf(cost_config_from_json(to_json(CostConfig{})).speed_cap));
}

TEST(CostConfigJson, RejectsBadValues) {
  auto j = to_json(CostConfig{});
  j["speed"]["min"] = 10.0;
  EXPECT_THROW(cost_config_from_json(j), std::invalid_argument);
  j = to_json(CostConfig{});
  j["slip"]["weight"] = -1.0;
  EXPECT_THROW(cost_config_from_json(j), std::invalid_argument);
  j = to_json(CostConfig{});
  j["risk"]["alpha"] = 2.0;
  EXPECT_THROW(cost_config_from_json(j), std::invalid_argument);
}
