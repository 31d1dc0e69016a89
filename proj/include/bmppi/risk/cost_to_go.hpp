#pragma once

// Dijkstra potential to a goal cell over the 8-connected class grid, and the
// terminal cost that picks the best point along a trajectory to hand over to
// that potential.

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

#include "bmppi/risk/costs.hpp"
#include "bmppi/world/elevation_map.hpp"

namespace bmppi::risk {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-meter cost of driving through a cell; infinite for lethal and unknown.
inline double traversal_cost(world::CellClass cls, const CostConfig& c) {
  switch (cls) {
    case world::CellClass::kFree:
    case world::CellClass::kTrail: return 1.0;
    case world::CellClass::kRisky: return 1.0 + c.risky_traversal;
    case world::CellClass::kLethal:
    case world::CellClass::kUnknown: return kInf;
  }
  return kInf;
}

class CostToGo {
 public:
  CostToGo() = default;

  // Edge cost is step length (meters) times the cost of the cell entered.
  CostToGo(const world::ElevationMap& map, int goal_i, int goal_j, const CostConfig& c)
      : width_(map.width()), height_(map.height()), res_(map.resolution()), ox_(map.origin_x()), oy_(map.origin_y()) {
    if (!map.contains_cell(goal_i, goal_j)) throw std::invalid_argument("goal cell outside the map");
    potential_.assign(map.cells(), kInf);
    std::vector<double> cell(map.cells());
    for (int j = 0; j < height_; ++j)
      for (int i = 0; i < width_; ++i) cell[map.index(i, j)] = traversal_cost(map.class_at(i, j), c);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    const auto goal = map.index(goal_i, goal_j);
    potential_[goal] = 0.0;
    open.push({0.0, goal});
    static constexpr int di[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    static constexpr int dj[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    const double diag = std::sqrt(2.0);
    while (!open.empty()) {
      const auto [d, idx] = open.top();
      open.pop();
      if (d > potential_[idx]) continue;
      const int i = static_cast<int>(idx % width_), j = static_cast<int>(idx / width_);
      for (int k = 0; k < 8; ++k) {
        const int ni = i + di[k], nj = j + dj[k];
        if (!map.contains_cell(ni, nj)) continue;
        const auto n = map.index(ni, nj);
        // Potential flows from the goal outward, so the cost is that of the
        // cell being left on the way to the goal.
        if (!std::isfinite(cell[n])) continue;
        const double nd = d + (k < 4 ? 1.0 : diag) * res_ * cell[n];
        if (nd < potential_[n]) {
          potential_[n] = nd;
          open.push({nd, n});
        }
      }
    }
  }

  static CostToGo to_point(const world::ElevationMap& map, double x, double y, const CostConfig& c) {
    const auto [i, j] = map.cell_of(x, y);
    return CostToGo(map, i, j, c);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double at_cell(int i, int j) const {
    if (i < 0 || j < 0 || i >= width_ || j >= height_) return kInf;
    return potential_[static_cast<std::size_t>(j) * width_ + i];
  }
  // Bilinear between cell centers when the four neighbors are reachable,
  // otherwise the containing cell.
  double at(double x, double y) const {
    const double fx = (x - ox_) / res_ - 0.5, fy = (y - oy_) / res_ - 0.5;
    const int i0 = static_cast<int>(std::floor(fx)), j0 = static_cast<int>(std::floor(fy));
    const double a = at_cell(i0, j0), b = at_cell(i0 + 1, j0), c = at_cell(i0, j0 + 1), d = at_cell(i0 + 1, j0 + 1);
    if (std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d)) {
      const double tx = fx - i0, ty = fy - j0;
      return (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
    }
    return at_cell(static_cast<int>(std::floor((x - ox_) / res_)), static_cast<int>(std::floor((y - oy_) / res_)));
  }
  const std::vector<double>& potential() const { return potential_; }

 private:
  int width_ = 0, height_ = 0;
  double res_ = 1.0, ox_ = 0.0, oy_ = 0.0;
  std::vector<double> potential_;
};

struct TerminalCost {
  double value = 0.0;
  int handover_step = -1;
};

// min over t of (stage costs through t + weight * potential at x_t), with an
// unreachable potential replaced by the configured large constant.
inline TerminalCost terminal_cost(std::span<const double> stage_costs, std::span<const std::array<double, 2>> positions,
                                  const CostToGo& ctg, const CostConfig& c) {
  if (stage_costs.size() != positions.size()) throw std::invalid_argument("stage cost and position lengths differ");
  TerminalCost best{kInf, -1};
  double acc = 0.0;
  for (std::size_t t = 0; t < positions.size(); ++t) {
    acc += stage_costs[t];
    double p = ctg.at(positions[t][0], positions[t][1]);
    if (!std::isfinite(p)) p = c.unreachable;
    const double v = acc + c.cost_to_go_weight * p;
    if (v < best.value) best = {v, static_cast<int>(t)};
  }
  if (best.handover_step < 0) best.value = c.cost_to_go_weight * c.unreachable;
  return best;
}

}  // namespace bmppi::risk
