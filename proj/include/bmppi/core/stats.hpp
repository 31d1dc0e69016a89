#pragma once

// Summary statistics for loss distributions: linear-interpolation quantiles
// and box-plot data with 1.5 IQR whiskers.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace bmppi {

// Quantile of sorted data, interpolating between order statistics at
// position p * (n - 1).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double f = pos - static_cast<double>(lo);
  return f == 0.0 ? sorted[lo] : sorted[lo] + f * (sorted[hi] - sorted[lo]);
}

struct BoxStats {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double whisker_lo = 0.0;  // smallest value >= q25 - 1.5 IQR
  double whisker_hi = 0.0;  // largest value <= q75 + 1.5 IQR
  std::size_t outliers = 0;

  bool operator==(const BoxStats&) const = default;
};

inline BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("box stats of empty data");
  std::sort(values.begin(), values.end());
  BoxStats b;
  b.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  b.mean = sum / static_cast<double>(b.n);
  b.median = quantile_sorted(values, 0.5);
  b.q25 = quantile_sorted(values, 0.25);
  b.q75 = quantile_sorted(values, 0.75);
  const double iqr = b.q75 - b.q25;
  const double lo = b.q25 - 1.5 * iqr, hi = b.q75 + 1.5 * iqr;
  b.whisker_lo = b.q25;
  b.whisker_hi = b.q75;
  for (double v : values) {
    if (v >= lo && v <= hi) {
      b.whisker_lo = std::min(b.whisker_lo, v);
      b.whisker_hi = std::max(b.whisker_hi, v);
    } else {
      ++b.outliers;
    }
  }
  return b;
}

}  // namespace bmppi
