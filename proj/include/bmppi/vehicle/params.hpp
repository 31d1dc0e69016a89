#pragma once

// Parameter sets for the parametric vehicle model. None of the defaults are
// fitted to a real vehicle; they give a plausible mid-size off-road buggy and
// are marked "unfitted" in serialized configs.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bmppi::vehicle {

inline constexpr int kParamsFormatVersion = 1;

using Vec3 = std::array<double, 3>;

struct VehicleParams {
  double mass = 1000.0;
  double c_l = 1.2;  // CG to front axle
  double c_r = 1.2;  // CG to rear axle
  double c_xd = 0.02;
  double c_yd = 0.1;
  double c_xg = -9.81;
  double c_yg = -9.81;
  double c_delta = 15.0;  // steering wheel -> road wheel ratio
  double c_b = 6.0;
  double c_c = 1.3;
  double c_d = -3000.0;
  double c_max = 1.0;
  double c_yaw = 3.0;
  double c_yaw_d = 6.0;
  Vec3 engine_poly = {0.6, 1.2e-4, -1.2e-8};  // P(e), e in rpm
  Vec3 throttle_poly = {0.0, 2000.0, 1250.0};  // P(u_t), N
  Vec3 brake_poly = {0.0, 3000.0, 2000.0};     // brake force vs pressure, N
  Vec3 brake_up = {5.0, 0.0, -4.0};            // gamma constants while pressure rises
  Vec3 brake_down = {5.0, 0.0, -2.0};          // gamma constants while pressure falls
  Vec3 steer_gamma = {1.5, 0.0, -80.0};
  double roll_res_lin = 50.0;  // N per m/s
  double roll_res_sgn = 300.0;  // N
  double roll_res_deadzone = 0.05;  // m/s
  double brake_damp_speed = 0.1;  // m/s
  double steer_limit = 5.0;  // steering-wheel units
  double max_rpm = 8000.0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("vehicle param must be > 0: ") + name);
    };
    positive(mass, "mass");
    positive(c_l, "c_l");
    positive(c_r, "c_r");
    positive(c_max, "c_max");
    positive(steer_limit, "steer_limit");
    if (c_delta == 0.0 || !std::isfinite(c_delta)) throw std::invalid_argument("c_delta must be non-zero");
    if (!(brake_up[2] < 0.0) || !(brake_down[2] < 0.0))
      throw std::invalid_argument("brake gamma scale c[2] must be negative so pressure converges to the command");
    if (!(steer_gamma[2] < 0.0)) throw std::invalid_argument("steer gamma scale c[2] must be negative");
  }

  double wheelbase() const { return c_l + c_r; }
};

struct WheelOffset {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;  // bottom of the wheel, body frame
};

struct SuspensionParams {
  double c_k = 20000.0;
  double c_kdot = 2500.0;
  double c_wm = 200.0;
  double c_ixx = 300.0;
  double c_iyy = 600.0;
  double wheel_radius = 0.3;
  std::array<WheelOffset, 4> wheels = {{
      {1.2, 0.7, -0.5},    // front left
      {1.2, -0.7, -0.5},   // front right
      {-1.2, 0.7, -0.5},   // rear left
      {-1.2, -0.7, -0.5},  // rear right
  }};

  void validate() const {
    for (double v : {c_k, c_kdot, c_wm, c_ixx, c_iyy, wheel_radius})
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("suspension params must be positive");
  }
};

// One-hidden-layer tanh MLP with a linear skip path:
//   y = scale * (w2 . tanh(W1 x + b1) + b2 + wlin . x)
struct DelayNet {
  int inputs = 0;
  int hidden = 0;
  double output_scale = 1.0;
  std::vector<double> weights;  // [W1 | b1 | w2 | b2 | wlin]

  static std::size_t size_for(int inputs, int hidden) {
    return static_cast<std::size_t>(hidden * inputs + hidden + hidden + 1 + inputs);
  }

  static DelayNet make(int inputs, int hidden, double scale) {
    DelayNet n;
    n.inputs = inputs;
    n.hidden = hidden;
    n.output_scale = scale;
    n.weights.assign(size_for(inputs, hidden), 0.0);
    return n;
  }

  std::size_t b2_offset() const { return static_cast<std::size_t>(hidden * inputs + 2 * hidden); }
  std::size_t lin_offset() const { return b2_offset() + 1; }

  void validate() const {
    if (weights.size() != size_for(inputs, hidden)) throw std::invalid_argument("delay net weight count mismatch");
    for (double w : weights)
      if (!std::isfinite(w)) throw std::invalid_argument("delay net weight not finite");
  }
};

template <class T>
T evaluate_delay_net(const DelayNet& net, std::span<const T> w, std::span<const T> x) {
  const int n = net.inputs;
  const int h = net.hidden;
  const T* base = w.data();
  T out = base[net.b2_offset()];
  for (int j = 0; j < h; ++j) {
    using std::tanh;
    const T a = tanh(dot(base + j * n, x.data(), static_cast<std::size_t>(n), base[h * n + j]));
    out = out + base[h * n + h + j] * a;
  }
  out = dot(base + net.lin_offset(), x.data(), static_cast<std::size_t>(n), out);
  return out * net.output_scale;
}

// Engine: inputs (vx, u_t, rpm * 1e-3) -> rpm rate. Steering: inputs
// (vx, delta, delta_dot, u_delta) -> steering acceleration (before gamma).
struct DelayNetParams {
  DelayNet engine = DelayNet::make(3, 4, 1000.0);
  DelayNet steer = DelayNet::make(4, 4, 1.0);

  static DelayNetParams defaults() {
    DelayNetParams p;
    // rpm relaxes toward 1000 + 4000 u_t + 200 vx with rate 3/s.
    auto& e = p.engine;
    e.weights[e.b2_offset()] = 3.0;
    e.weights[e.lin_offset() + 0] = 0.6;
    e.weights[e.lin_offset() + 1] = 12.0;
    e.weights[e.lin_offset() + 2] = -3.0;
    auto& s = p.steer;
    s.weights[s.lin_offset() + 2] = -12.0;  // rate damping
    return p;
  }

  void validate() const {
    engine.validate();
    steer.validate();
    if (engine.inputs != 3 || steer.inputs != 4) throw std::invalid_argument("delay net input sizes must be 3 (engine) and 4 (steer)");
  }
};

// Read-only view of delay-net weights in scalar type T (double or ad::Var).
template <class T>
struct DelayNetView {
  const DelayNetParams* shape = nullptr;
  std::span<const T> engine;
  std::span<const T> steer;

  static DelayNetView<double> of(const DelayNetParams& p) {
    return {&p, std::span<const double>(p.engine.weights), std::span<const double>(p.steer.weights)};
  }
};

// ---- JSON ---------------------------------------------------------------

inline nlohmann::json to_json(const VehicleParams& p) {
  return {
      {"mass", p.mass}, {"c_l", p.c_l}, {"c_r", p.c_r}, {"c_xd", p.c_xd}, {"c_yd", p.c_yd},
      {"c_xg", p.c_xg}, {"c_yg", p.c_yg}, {"c_delta", p.c_delta}, {"c_b", p.c_b}, {"c_c", p.c_c},
      {"c_d", p.c_d}, {"c_max", p.c_max}, {"c_yaw", p.c_yaw}, {"c_yaw_d", p.c_yaw_d},
      {"engine_poly", p.engine_poly}, {"throttle_poly", p.throttle_poly}, {"brake_poly", p.brake_poly},
      {"brake_up", p.brake_up}, {"brake_down", p.brake_down}, {"steer_gamma", p.steer_gamma},
      {"roll_res_lin", p.roll_res_lin}, {"roll_res_sgn", p.roll_res_sgn},
      {"roll_res_deadzone", p.roll_res_deadzone}, {"brake_damp_speed", p.brake_damp_speed},
      {"steer_limit", p.steer_limit}, {"max_rpm", p.max_rpm}, {"unfitted", true},
  };
}

namespace detail {
template <class V>
void read_opt(const nlohmann::json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}
}  // namespace detail

inline VehicleParams vehicle_params_from_json(const nlohmann::json& j) {
  VehicleParams p;
  using detail::read_opt;
  read_opt(j, "mass", p.mass);
  read_opt(j, "c_l", p.c_l);
  read_opt(j, "c_r", p.c_r);
  read_opt(j, "c_xd", p.c_xd);
  read_opt(j, "c_yd", p.c_yd);
  read_opt(j, "c_xg", p.c_xg);
  read_opt(j, "c_yg", p.c_yg);
  read_opt(j, "c_delta", p.c_delta);
  read_opt(j, "c_b", p.c_b);
  read_opt(j, "c_c", p.c_c);
  read_opt(j, "c_d", p.c_d);
  read_opt(j, "c_max", p.c_max);
  read_opt(j, "c_yaw", p.c_yaw);
  read_opt(j, "c_yaw_d", p.c_yaw_d);
  read_opt(j, "engine_poly", p.engine_poly);
  read_opt(j, "throttle_poly", p.throttle_poly);
  read_opt(j, "brake_poly", p.brake_poly);
  read_opt(j, "brake_up", p.brake_up);
  read_opt(j, "brake_down", p.brake_down);
  read_opt(j, "steer_gamma", p.steer_gamma);
  read_opt(j, "roll_res_lin", p.roll_res_lin);
  read_opt(j, "roll_res_sgn", p.roll_res_sgn);
  read_opt(j, "roll_res_deadzone", p.roll_res_deadzone);
  read_opt(j, "brake_damp_speed", p.brake_damp_speed);
  read_opt(j, "steer_limit", p.steer_limit);
  read_opt(j, "max_rpm", p.max_rpm);
  p.validate();
  return p;
}

inline nlohmann::json to_json(const SuspensionParams& p) {
  nlohmann::json wheels = nlohmann::json::array();
  for (const auto& w : p.wheels) wheels.push_back({w.x, w.y, w.z});
  return {{"c_k", p.c_k}, {"c_kdot", p.c_kdot}, {"c_wm", p.c_wm}, {"c_ixx", p.c_ixx},
          {"c_iyy", p.c_iyy}, {"wheel_radius", p.wheel_radius}, {"wheels", wheels}, {"unfitted", true}};
}

inline SuspensionParams suspension_params_from_json(const nlohmann::json& j) {
  SuspensionParams p;
  using detail::read_opt;
  read_opt(j, "c_k", p.c_k);
  read_opt(j, "c_kdot", p.c_kdot);
  read_opt(j, "c_wm", p.c_wm);
  read_opt(j, "c_ixx", p.c_ixx);
  read_opt(j, "c_iyy", p.c_iyy);
  read_opt(j, "wheel_radius", p.wheel_radius);
  if (j.contains("wheels")) {
    const auto& w = j.at("wheels");
    if (w.size() != 4) throw std::invalid_argument("suspension needs exactly 4 wheels");
    for (std::size_t i = 0; i < 4; ++i) p.wheels[i] = {w[i].at(0).get<double>(), w[i].at(1).get<double>(), w[i].at(2).get<double>()};
  }
  p.validate();
  return p;
}

inline nlohmann::json to_json(const DelayNet& n) {
  return {{"inputs", n.inputs}, {"hidden", n.hidden}, {"output_scale", n.output_scale}, {"weights", n.weights}};
}

inline DelayNet delay_net_from_json(const nlohmann::json& j) {
  DelayNet n;
  n.inputs = j.at("inputs").get<int>();
  n.hidden = j.at("hidden").get<int>();
  n.output_scale = j.at("output_scale").get<double>();
  n.weights = j.at("weights").get<std::vector<double>>();
  n.validate();
  return n;
}

inline nlohmann::json to_json(const DelayNetParams& p) { return {{"engine", to_json(p.engine)}, {"steer", to_json(p.steer)}}; }

inline DelayNetParams delay_params_from_json(const nlohmann::json& j) {
  DelayNetParams p = DelayNetParams::defaults();
  if (j.contains("engine")) p.engine = delay_net_from_json(j.at("engine"));
  if (j.contains("steer")) p.steer = delay_net_from_json(j.at("steer"));
  p.validate();
  return p;
}

// Complete parametric model description as one flat, versioned document.
struct ModelParams {
  VehicleParams vehicle;
  SuspensionParams suspension;
  DelayNetParams delay = DelayNetParams::defaults();
};

inline nlohmann::json to_json(const ModelParams& m) {
  return {{"format_version", kParamsFormatVersion},
          {"vehicle", to_json(m.vehicle)},
          {"suspension", to_json(m.suspension)},
          {"delay", to_json(m.delay)}};
}

inline ModelParams model_params_from_json(const nlohmann::json& j) {
  if (j.contains("format_version") && j.at("format_version").get<int>() != kParamsFormatVersion)
    throw std::invalid_argument("unsupported vehicle params format_version");
  ModelParams m;
  if (j.contains("vehicle")) m.vehicle = vehicle_params_from_json(j.at("vehicle"));
  if (j.contains("suspension")) m.suspension = suspension_params_from_json(j.at("suspension"));
  if (j.contains("delay")) m.delay = delay_params_from_json(j.at("delay"));
  return m;
}

}  // namespace bmppi::vehicle
