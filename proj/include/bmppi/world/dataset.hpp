#pragma once

// Trajectory datasets as JSONL: a '#' header line carrying the format version,
// then one trajectory per line
//   {"dt":..,"tau":..,"states":[[16]..],"controls":[[3]..],"normals":[[3]..]}
// where normals are the heading-frame terrain readings logged at each state.

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bmppi/vehicle/types.hpp"

namespace bmppi::world {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr const char* kDatasetHeaderTag = "bmppi-dataset";

struct Trajectory {
  double dt = 0.02;
  double tau = 0.2;
  std::vector<vehicle::VehicleState> states;
  std::vector<vehicle::ControlInput> controls;
  std::vector<vehicle::SensorReadings> readings;

  std::size_t size() const { return states.size(); }
  int history_steps() const { return static_cast<int>(std::lround(tau / dt)); }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("trajectory dt must be positive");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument("trajectory tau must be non-negative");
    if (std::abs(tau / dt - std::round(tau / dt)) > 1e-9)
      throw std::invalid_argument("trajectory tau must be a multiple of dt");
    if (controls.size() != states.size() || readings.size() != states.size())
      throw std::invalid_argument("trajectory columns differ in length");
    if (states.size() < static_cast<std::size_t>(history_steps()) + 2)
      throw std::invalid_argument("trajectory shorter than history plus one step");
    for (const auto& s : states)
      if (!s.finite()) throw std::invalid_argument("trajectory state not finite");
  }

  bool operator==(const Trajectory& o) const {
    if (dt != o.dt || tau != o.tau || size() != o.size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (states[i].to_array() != o.states[i].to_array()) return false;
      const auto& a = controls[i];
      const auto& b = o.controls[i];
      if (a.throttle != b.throttle || a.brake != b.brake || a.steer != b.steer) return false;
      const auto& r = readings[i];
      const auto& q = o.readings[i];
      if (r.nx != q.nx || r.ny != q.ny || r.nz != q.nz) return false;
    }
    return true;
  }
};

inline nlohmann::json to_json(const Trajectory& t) {
  nlohmann::json states = nlohmann::json::array(), controls = nlohmann::json::array(),
                 normals = nlohmann::json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    states.push_back(t.states[i].to_array());
    controls.push_back({t.controls[i].throttle, t.controls[i].brake, t.controls[i].steer});
    normals.push_back({t.readings[i].nx, t.readings[i].ny, t.readings[i].nz});
  }
  return {{"dt", t.dt}, {"tau", t.tau}, {"states", states}, {"controls", controls}, {"normals", normals}};
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory t;
  t.dt = j.at("dt").get<double>();
  t.tau = j.at("tau").get<double>();
  for (const auto& s : j.at("states")) {
    if (s.size() != vehicle::VehicleState::kSize) throw std::invalid_argument("state row must have 16 values");
    t.states.push_back(vehicle::VehicleState::from_array(s.get<std::array<double, vehicle::VehicleState::kSize>>()));
  }
  for (const auto& c : j.at("controls")) {
    if (c.size() != 3) throw std::invalid_argument("control row must have 3 values");
    t.controls.emplace_back(c[0].get<double>(), c[1].get<double>(), c[2].get<double>());
  }
  for (const auto& n : j.at("normals")) {
    if (n.size() != 3) throw std::invalid_argument("normal row must have 3 values");
    t.readings.push_back({n[0].get<double>(), n[1].get<double>(), n[2].get<double>()});
  }
  t.validate();
  return t;
}

inline std::string dataset_header() {
  return std::string("# ") + kDatasetHeaderTag + " v" + std::to_string(kDatasetFormatVersion);
}

inline void write_dataset(std::ostream& os, const std::vector<Trajectory>& data) {
  os << dataset_header() << '\n';
  for (const auto& t : data) os << to_json(t).dump() << '\n';
  if (!os) throw std::runtime_error("failed writing dataset");
}

inline void write_dataset(const std::string& path, const std::vector<Trajectory>& data) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_dataset(os, data);
}

// Rejects files whose header names a different format version.
inline std::vector<Trajectory> read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0 || line.find(kDatasetHeaderTag) == std::string::npos)
    throw std::invalid_argument("dataset is missing its header line");
  if (line != dataset_header()) throw std::invalid_argument("unsupported dataset version: " + line);
  std::vector<Trajectory> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(trajectory_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<Trajectory> read_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset " + path);
  return read_dataset(is);
}

}  // namespace bmppi::world
