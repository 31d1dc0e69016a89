#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bmppi/ad/tape.hpp"
#include "bmppi/core/scalar.hpp"
#include "bmppi/learn/layers.hpp"

using bmppi::ad::Tape;
using bmppi::ad::TapeScope;
using bmppi::ad::Var;

namespace {

// Gradient of f at x by reverse mode.
std::vector<double> ad_grad(const std::function<Var(const std::vector<Var>&)>& f, const std::vector<double>& x) {
  Tape tape;
  TapeScope scope(tape);
  std::vector<Var> v;
  for (double xi : x) v.push_back(Var::leaf(xi));
  const Var y = f(v);
  return bmppi::ad::gradient(tape, y, v);
}

// Central differences with step h, evaluated on constant Vars (no tape).
std::vector<double> fd_grad(const std::function<Var(const std::vector<Var>&)>& f, const std::vector<double>& x,
                            double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<Var> p(x.begin(), x.end()), m(x.begin(), x.end());
    p[i] = Var(x[i] + h);
    m[i] = Var(x[i] - h);
    g[i] = (f(p).value() - f(m).value()) / (2 * h);
  }
  return g;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

void expect_matches_fd(const std::function<Var(const std::vector<Var>&)>& f, const std::vector<double>& x,
                       double tol = 1e-7) {
  const auto a = ad_grad(f, x);
  const auto n = fd_grad(f, x, 1e-5);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LT(rel_err(a[i], n[i]), tol) << "input " << i;
}

}  // namespace

TEST(Tape, ArithmeticExample) {
  // f = x*y + x/y - y at (3, 2): df/dx = y + 1/y = 2.5, df/dy = x - x/y^2 - 1 = 1.25
  const auto g = ad_grad([](const auto& v) { return v[0] * v[1] + v[0] / v[1] - v[1]; }, {3.0, 2.0});
  EXPECT_DOUBLE_EQ(g[0], 2.5);
  EXPECT_DOUBLE_EQ(g[1], 1.25);
}

TEST(Tape, UnaryOpsMatchFiniteDifferences) {
  using namespace bmppi::ad;
  const std::vector<double> x = {0.3, -0.7, 1.4};
  expect_matches_fd([](const auto& v) { return sin(v[0]) * cos(v[1]) + tan(v[2] * 0.5); }, x);
  expect_matches_fd([](const auto& v) { return tanh(v[0]) + atan(v[1]) * exp(v[2]); }, x);
  expect_matches_fd([](const auto& v) { return log(v[2]) + sqrt(v[2] + v[0]) - sigmoid(v[1]); }, x);
  expect_matches_fd([](const auto& v) { return abs(v[1]) * v[0] - (-v[2]); }, x);
}

TEST(Tape, DotNodeMatchesExpandedSum) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<double> x(9);
  for (auto& xi : x) xi = n(rng);
  auto f = [](const std::vector<Var>& v) { return bmppi::ad::dot(v.data(), v.data() + 4, 4, v[8]) * v[0]; };
  expect_matches_fd(f, x);
  // Same value as the naive expression.
  std::vector<Var> c(x.begin(), x.end());
  Var naive = c[8];
  for (int i = 0; i < 4; ++i) naive = naive + c[i] * c[4 + i];
  EXPECT_NEAR(f(c).value(), (naive * c[0]).value(), 1e-14);
}

TEST(Tape, RepeatedUseAccumulates) {
  // f = x * x * x -> 3 x^2
  const auto g = ad_grad([](const auto& v) { return v[0] * v[0] * v[0]; }, {2.0});
  EXPECT_DOUBLE_EQ(g[0], 12.0);
}

TEST(Tape, Norm2GradientAndOrigin) {
  const auto g = ad_grad([](const auto& v) { return bmppi::ad::norm2(std::span<const Var>(v)); }, {3.0, 4.0});
  EXPECT_DOUBLE_EQ(g[0], 0.6);
  EXPECT_DOUBLE_EQ(g[1], 0.8);
  const auto z = ad_grad([](const auto& v) { return bmppi::ad::norm2(std::span<const Var>(v)); }, {0.0, 0.0});
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);
}

TEST(Tape, ConstantsRecordNothing) {
  Tape tape;
  TapeScope scope(tape);
  tape.clear();
  const Var a(2.0), b(3.0);
  const Var c = bmppi::ad::sin(a * b + a);
  EXPECT_TRUE(c.is_constant());
  EXPECT_EQ(tape.size(), 0u);
  const Var x = Var::leaf(1.0);
  const Var y = x * a + b;  // two nodes, constant parents skipped
  EXPECT_EQ(tape.size(), 3u);
  EXPECT_EQ(tape.edges(), 2u);
  EXPECT_DOUBLE_EQ(bmppi::ad::gradient(tape, y, std::vector<Var>{x})[0], 2.0);
}

TEST(Tape, ClearAllowsReuse) {
  Tape tape;
  TapeScope scope(tape);
  for (int k = 0; k < 3; ++k) {
    tape.clear();
    const Var x = Var::leaf(1.0 + k);
    const Var y = x * x;
    EXPECT_DOUBLE_EQ(bmppi::ad::gradient(tape, y, std::vector<Var>{x})[0], 2.0 * (1.0 + k));
  }
}

TEST(Tape, ScopesNestAndRestore) {
  Tape outer, inner;
  {
    TapeScope a(outer);
    EXPECT_EQ(bmppi::ad::ActiveTape::get(), &outer);
    {
      TapeScope b(inner);
      EXPECT_EQ(bmppi::ad::ActiveTape::get(), &inner);
    }
    EXPECT_EQ(bmppi::ad::ActiveTape::get(), &outer);
  }
  EXPECT_EQ(bmppi::ad::ActiveTape::get(), nullptr);
}

TEST(Tape, WrapAnglePassesGradient) {
  const auto g = ad_grad([](const auto& v) { return bmppi::wrap_angle(v[0]) * 2.0; }, {7.0});
  EXPECT_DOUBLE_EQ(g[0], 2.0);
}

TEST(Layers, DenseMatchesFiniteDifferences) {
  const bmppi::learn::DenseShape s{3, 2};
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::vector<double> x(s.size() + 3);
  for (auto& xi : x) xi = n(rng);
  expect_matches_fd(
      [&](const std::vector<Var>& v) {
        Var y[2];
        bmppi::learn::dense_forward(s, v.data(), v.data() + s.size(), y, bmppi::learn::Activation::kTanh);
        return y[0] * 1.5 + y[1];
      },
      x);
}

TEST(Layers, DenseExample) {
  const bmppi::learn::DenseShape s{2, 1};
  const double w[] = {2.0, -1.0, 0.5}, x[] = {1.0, 3.0};
  double y = 0.0;
  bmppi::learn::dense_forward(s, w, x, &y, bmppi::learn::Activation::kLinear);
  EXPECT_DOUBLE_EQ(y, -0.5);
}

TEST(Layers, GruMatchesFiniteDifferences) {
  const bmppi::learn::GruShape s{3, 4};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.7);
  std::vector<double> x(s.size() + 3 + 4);
  for (auto& xi : x) xi = n(rng);
  expect_matches_fd(
      [&](const std::vector<Var>& v) {
        Var h2[4];
        bmppi::learn::gru_forward(s, v.data(), v.data() + s.size(), v.data() + s.size() + 3, h2);
        // Two steps so the recurrence is exercised.
        Var h3[4];
        bmppi::learn::gru_forward(s, v.data(), v.data() + s.size(), h2, h3);
        return h3[0] + h3[1] * 2.0 - h3[2] * h3[3];
      },
      x);
}

TEST(Layers, GruZeroWeightsHalveTheState) {
  // All gates at sigmoid(0) = 0.5 and candidate tanh(0) = 0: h' = h / 2.
  const bmppi::learn::GruShape s{2, 3};
  std::vector<double> w(s.size(), 0.0);
  const double x[] = {1.0, -2.0}, h[] = {0.4, -0.2, 1.0};
  double out[3];
  bmppi::learn::gru_forward(s, w.data(), x, h, out);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(out[i], 0.5 * h[i]);
}
