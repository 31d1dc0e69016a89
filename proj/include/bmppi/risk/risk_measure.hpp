#pragma once

// Risk measures over the empirical distribution of sigma-point costs.

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bmppi/core/stats.hpp"

namespace bmppi::risk {

enum class RiskKind { kMean, kMax, kMin, kVaR, kCVaR };

struct RiskMeasure {
  RiskKind kind = RiskKind::kCVaR;
  double alpha = 1.0;  // VaR / CVaR only

  static RiskMeasure mean() { return {RiskKind::kMean, 0.0}; }
  static RiskMeasure max() { return {RiskKind::kMax, 0.0}; }
  static RiskMeasure min() { return {RiskKind::kMin, 0.0}; }
  static RiskMeasure var(double a) { return checked({RiskKind::kVaR, a}); }
  static RiskMeasure cvar(double a) { return checked({RiskKind::kCVaR, a}); }

  void validate() const {
    const bool tail = kind == RiskKind::kVaR || kind == RiskKind::kCVaR;
    if (tail && !(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("risk alpha outside [0, 1]");
  }

 private:
  static RiskMeasure checked(RiskMeasure r) {
    r.validate();
    return r;
  }
};

// Inclusive linear-interpolation quantile of the sorted costs.
inline double value_at_risk_sorted(std::span<const double> sorted, double alpha) {
  return quantile_sorted(sorted, alpha);
}

// VaR plus the scaled positive excess. At alpha = 1 this is the maximum; near
// 1 the interpolated VaR can push the formula past the largest cost, so the
// result is clamped there.
inline double cvar_sorted(std::span<const double> sorted, double alpha) {
  const double top = sorted.back();
  if (alpha >= 1.0) return top;
  const double v = value_at_risk_sorted(sorted, alpha);
  double excess = 0.0;
  for (double c : sorted) excess += std::max(c - v, 0.0);
  const double out = v + excess / (static_cast<double>(sorted.size()) * (1.0 - alpha));
  return std::min(out, top);
}

template <std::size_t N>
double evaluate_risk(std::array<double, N> costs, const RiskMeasure& m) {
  static_assert(N > 0);
  switch (m.kind) {
    case RiskKind::kMean: {
      double s = 0.0;
      for (double c : costs) s += c;
      return s / static_cast<double>(N);
    }
    case RiskKind::kMax: return *std::max_element(costs.begin(), costs.end());
    case RiskKind::kMin: return *std::min_element(costs.begin(), costs.end());
    case RiskKind::kVaR:
      std::sort(costs.begin(), costs.end());
      return value_at_risk_sorted(costs, m.alpha);
    case RiskKind::kCVaR:
      std::sort(costs.begin(), costs.end());
      return cvar_sorted(costs, m.alpha);
  }
  return 0.0;
}

inline double evaluate_risk(std::span<const double> costs, const RiskMeasure& m) {
  if (costs.empty()) throw std::invalid_argument("risk of empty cost set");
  std::vector<double> c(costs.begin(), costs.end());
  std::sort(c.begin(), c.end());
  switch (m.kind) {
    case RiskKind::kMean: {
      double s = 0.0;
      for (double x : c) s += x;
      return s / static_cast<double>(c.size());
    }
    case RiskKind::kMax: return c.back();
    case RiskKind::kMin: return c.front();
    case RiskKind::kVaR: return value_at_risk_sorted(c, m.alpha);
    case RiskKind::kCVaR: return cvar_sorted(c, m.alpha);
  }
  return 0.0;
}

inline const char* risk_kind_name(RiskKind k) {
  switch (k) {
    case RiskKind::kMean: return "mean";
    case RiskKind::kMax: return "max";
    case RiskKind::kMin: return "min";
    case RiskKind::kVaR: return "var";
    case RiskKind::kCVaR: return "cvar";
  }
  return "?";
}

inline RiskKind risk_kind_named(const std::string& s) {
  for (auto k : {RiskKind::kMean, RiskKind::kMax, RiskKind::kMin, RiskKind::kVaR, RiskKind::kCVaR})
    if (s == risk_kind_name(k)) return k;
  throw std::invalid_argument("unknown risk measure '" + s + "'");
}

inline nlohmann::json to_json(const RiskMeasure& m) { return {{"kind", risk_kind_name(m.kind)}, {"alpha", m.alpha}}; }

inline RiskMeasure risk_measure_from_json(const nlohmann::json& j) {
  RiskMeasure m;
  m.kind = risk_kind_named(j.at("kind").get<std::string>());
  m.alpha = j.value("alpha", m.kind == RiskKind::kCVaR || m.kind == RiskKind::kVaR ? 1.0 : 0.0);
  m.validate();
  return m;
}

}  // namespace bmppi::risk
