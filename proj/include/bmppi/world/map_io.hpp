#pragma once

// Binary map file: "BMAP" magic, u32 version, i32 width, i32 height,
// f64 resolution, f64 origin x, f64 origin y, then row-major float32 layers
// (height, normal x, normal y, normal z, max speed) and a uint8 class layer.
// Little-endian hosts only. Stored values are float32, so a reloaded map
// matches the original to single precision.

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmppi/world/elevation_map.hpp"

namespace bmppi::world {

inline constexpr std::array<char, 4> kMapMagic = {'B', 'M', 'A', 'P'};
inline constexpr std::uint32_t kMapFormatVersion = 1;

namespace detail {
template <class V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <class V>
V get(std::istream& is) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) throw std::runtime_error("truncated map file");
  return v;
}
}  // namespace detail

inline void write_map(std::ostream& os, const ElevationMap& m) {
  static_assert(std::endian::native == std::endian::little, "map IO assumes a little-endian host");
  os.write(kMapMagic.data(), 4);
  detail::put(os, kMapFormatVersion);
  detail::put(os, static_cast<std::int32_t>(m.width()));
  detail::put(os, static_cast<std::int32_t>(m.height()));
  detail::put(os, m.resolution());
  detail::put(os, m.origin_x());
  detail::put(os, m.origin_y());
  for (double h : m.heights()) detail::put(os, static_cast<float>(h));
  for (int k = 0; k < 3; ++k)
    for (const auto& n : m.normals()) detail::put(os, static_cast<float>(n[k]));
  for (double v : m.speeds()) detail::put(os, static_cast<float>(v));
  for (auto c : m.classes()) detail::put(os, static_cast<std::uint8_t>(c));
  if (!os) throw std::runtime_error("failed writing map");
}

inline ElevationMap read_map(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kMapMagic) throw std::invalid_argument("not a map file");
  const auto version = detail::get<std::uint32_t>(is);
  if (version != kMapFormatVersion) throw std::invalid_argument("unsupported map version " + std::to_string(version));
  const auto w = detail::get<std::int32_t>(is);
  const auto h = detail::get<std::int32_t>(is);
  const auto res = detail::get<double>(is);
  const auto ox = detail::get<double>(is);
  const auto oy = detail::get<double>(is);
  ElevationMap m(w, h, res, ox, oy);
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) m.set_height(i, j, detail::get<float>(is));
  std::vector<Normal> normals(m.cells());
  for (int k = 0; k < 3; ++k)
    for (auto& n : normals) n[k] = detail::get<float>(is);
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) {
      m.set_normal(i, j, normals[m.index(i, j)]);
    }
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) m.set_speed(i, j, detail::get<float>(is));
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) {
      const auto c = detail::get<std::uint8_t>(is);
      if (!valid_class(c)) throw std::invalid_argument("invalid cell class in map file");
      m.set_class(i, j, static_cast<CellClass>(c));
    }
  return m;
}

inline void write_map(const std::string& path, const ElevationMap& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_map(os, m);
}

inline ElevationMap read_map(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open map " + path);
  return read_map(is);
}

// One row per cell: i, j, x, y, height, nx, ny, nz, class, max_speed.
inline void write_map_csv(std::ostream& os, const ElevationMap& m) {
  os << "i,j,x,y,height,nx,ny,nz,class,max_speed\n";
  for (int j = 0; j < m.height(); ++j)
    for (int i = 0; i < m.width(); ++i) {
      const auto& n = m.normal_at(i, j);
      os << i << ',' << j << ',' << m.cell_center_x(i) << ',' << m.cell_center_y(j) << ',' << m.height_at(i, j) << ','
         << n[0] << ',' << n[1] << ',' << n[2] << ',' << class_name(m.class_at(i, j)) << ',' << m.speed_at(i, j)
         << '\n';
    }
}

}  // namespace bmppi::world
