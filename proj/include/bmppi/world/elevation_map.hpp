#pragma once

// Layered 2.5D grid: height, unit normals, semantic class and an optional
// speed limit per cell. Cell (i, j) has its center at
// origin + ((i + 0.5) * res, (j + 0.5) * res); i runs along x.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace bmppi::world {

enum class CellClass : std::uint8_t { kFree = 0, kRisky = 1, kLethal = 2, kUnknown = 3, kTrail = 4 };

inline constexpr int kNumClasses = 5;

inline bool valid_class(std::uint8_t c) { return c < kNumClasses; }

inline const char* class_name(CellClass c) {
  switch (c) {
    case CellClass::kFree: return "free";
    case CellClass::kRisky: return "risky";
    case CellClass::kLethal: return "lethal";
    case CellClass::kUnknown: return "unknown";
    case CellClass::kTrail: return "trail";
  }
  return "invalid";
}

using Normal = std::array<double, 3>;

struct MapSample {
  double height = 0.0;
  Normal normal{0.0, 0.0, 1.0};
  CellClass cls = CellClass::kUnknown;
  double max_speed = std::numeric_limits<double>::infinity();
  bool in_bounds = false;
};

class ElevationMap {
 public:
  ElevationMap() = default;
  ElevationMap(int width, int height, double resolution, double origin_x = 0.0, double origin_y = 0.0)
      : width_(width), height_(height), resolution_(resolution), origin_x_(origin_x), origin_y_(origin_y) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("map dimensions must be positive");
    if (!(resolution > 0.0) || !std::isfinite(resolution)) throw std::invalid_argument("map resolution must be positive");
    const auto n = cells();
    heights_.assign(n, 0.0);
    normals_.assign(n, Normal{0.0, 0.0, 1.0});
    classes_.assign(n, CellClass::kFree);
    speeds_.assign(n, std::numeric_limits<double>::infinity());
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  std::size_t cells() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }

  bool contains_cell(int i, int j) const { return i >= 0 && j >= 0 && i < width_ && j < height_; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * width_ + i; }

  double cell_center_x(int i) const { return origin_x_ + (i + 0.5) * resolution_; }
  double cell_center_y(int j) const { return origin_y_ + (j + 0.5) * resolution_; }

  double height_at(int i, int j) const { return heights_[index(i, j)]; }
  const Normal& normal_at(int i, int j) const { return normals_[index(i, j)]; }
  CellClass class_at(int i, int j) const { return classes_[index(i, j)]; }
  double speed_at(int i, int j) const { return speeds_[index(i, j)]; }

  void set_height(int i, int j, double h) { heights_[index(i, j)] = h; }
  void set_class(int i, int j, CellClass c) { classes_[index(i, j)] = c; }
  void set_speed(int i, int j, double v) { speeds_[index(i, j)] = v; }
  void set_normal(int i, int j, const Normal& n) { normals_[index(i, j)] = n; }

  // Cell containing (x, y); may be out of bounds.
  std::pair<int, int> cell_of(double x, double y) const {
    return {static_cast<int>(std::floor((x - origin_x_) / resolution_)),
            static_cast<int>(std::floor((y - origin_y_) / resolution_))};
  }

  // Normals from the central-difference gradient of a 3x3 Gaussian smoothed
  // height layer. Edges are padded by linear extrapolation so planes stay
  // exact all the way to the border.
  void recompute_normals() {
    std::vector<double> tmp(cells()), smooth(cells());
    auto padded = [&](const std::vector<double>& src, int i, int j, bool along_x) {
      const int n = along_x ? width_ : height_;
      int k = along_x ? i : j;
      auto at = [&](int kk) { return along_x ? src[index(kk, j)] : src[index(i, kk)]; };
      if (n == 1) return at(0);
      if (k < 0) return 2.0 * at(0) - at(1);
      if (k >= n) return 2.0 * at(n - 1) - at(n - 2);
      return at(k);
    };
    for (int j = 0; j < height_; ++j)
      for (int i = 0; i < width_; ++i)
        tmp[index(i, j)] = 0.25 * padded(heights_, i - 1, j, true) + 0.5 * heights_[index(i, j)] +
                           0.25 * padded(heights_, i + 1, j, true);
    for (int j = 0; j < height_; ++j)
      for (int i = 0; i < width_; ++i)
        smooth[index(i, j)] =
            0.25 * padded(tmp, i, j - 1, false) + 0.5 * tmp[index(i, j)] + 0.25 * padded(tmp, i, j + 1, false);
    for (int j = 0; j < height_; ++j) {
      for (int i = 0; i < width_; ++i) {
        const double gx = width_ > 1 ? (padded(smooth, i + 1, j, true) - padded(smooth, i - 1, j, true)) / (2.0 * resolution_) : 0.0;
        const double gy = height_ > 1 ? (padded(smooth, i, j + 1, false) - padded(smooth, i, j - 1, false)) / (2.0 * resolution_) : 0.0;
        const double n = std::sqrt(gx * gx + gy * gy + 1.0);
        normals_[index(i, j)] = {-gx / n, -gy / n, 1.0 / n};
      }
    }
  }

  // Bilinear height (edge clamped), bilinear renormalized normal, nearest
  // class and speed limit. Outside the grid the class is unknown.
  MapSample query(double x, double y) const {
    MapSample s;
    const auto [ci, cj] = cell_of(x, y);
    s.in_bounds = contains_cell(ci, cj);
    if (s.in_bounds) {
      s.cls = class_at(ci, cj);
      s.max_speed = speed_at(ci, cj);
    }
    const Lerp lx = lerp_axis((x - origin_x_) / resolution_ - 0.5, width_);
    const Lerp ly = lerp_axis((y - origin_y_) / resolution_ - 0.5, height_);
    auto blend = [&](auto&& get) {
      return (1 - ly.t) * ((1 - lx.t) * get(lx.i0, ly.i0) + lx.t * get(lx.i1, ly.i0)) +
             ly.t * ((1 - lx.t) * get(lx.i0, ly.i1) + lx.t * get(lx.i1, ly.i1));
    };
    s.height = blend([&](int i, int j) { return heights_[index(i, j)]; });
    Normal n{};
    for (int k = 0; k < 3; ++k) n[k] = blend([&](int i, int j) { return normals_[index(i, j)][k]; });
    const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    s.normal = len > 0.0 ? Normal{n[0] / len, n[1] / len, n[2] / len} : Normal{0.0, 0.0, 1.0};
    return s;
  }

  double height_at_point(double x, double y) const { return query(x, y).height; }

  const std::vector<double>& heights() const { return heights_; }
  const std::vector<Normal>& normals() const { return normals_; }
  const std::vector<CellClass>& classes() const { return classes_; }
  const std::vector<double>& speeds() const { return speeds_; }

  bool operator==(const ElevationMap& o) const = default;

 private:
  struct Lerp {
    int i0 = 0, i1 = 0;
    double t = 0.0;
  };

  static Lerp lerp_axis(double f, int n) {
    if (n == 1) return {0, 0, 0.0};
    if (f <= 0.0) return {0, 1, 0.0};
    if (f >= n - 1) return {n - 2, n - 1, 1.0};
    const int i0 = static_cast<int>(std::floor(f));
    return {i0, i0 + 1, f - i0};
  }

  int width_ = 0;
  int height_ = 0;
  double resolution_ = 1.0;
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  std::vector<double> heights_;
  std::vector<Normal> normals_;
  std::vector<CellClass> classes_;
  std::vector<double> speeds_;
};

}  // namespace bmppi::world
