#include "quadmpc/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace quadmpc {

namespace {

using Setter = std::function<void(SimConfig&, double)>;
using KeyTable = std::map<std::string, Setter>;

Setter real(double SimConfig::*field) {
  return [field](SimConfig& c, double v) { c.*field = v; };
}

Setter leg_geometry(double LegConfig::*field) {
  return [field](SimConfig& c, double v) {
    for (LegConfig& l : c.robot.legs) l.*field = v;
  };
}

Setter leg_limit(bool upper, int joint) {
  return [upper, joint](SimConfig& c, double v) {
    for (LegConfig& l : c.robot.legs) (upper ? l.limits.hi : l.limits.lo)(joint) = v;
  };
}

Setter hip(int axis) {
  return [axis](SimConfig& c, double v) {
    for (int i = 0; i < kNumLegs; ++i) {
      const double sign = axis == 0 ? (i < 2 ? 1.0 : -1.0) : (i % 2 == 0 ? 1.0 : -1.0);
      c.robot.legs[i].mount_offset(axis) = sign * v;
    }
  };
}

Setter weight(int index) {
  return [index](SimConfig& c, double v) { c.mpc.state_weights(index) = v; };
}

Setter integer(int& (*field)(SimConfig&)) {
  return [field](SimConfig& c, double v) {
    if (v != std::floor(v)) throw ConfigError("expected an integer");
    field(c) = static_cast<int>(v);
  };
}

KeyTable gait_keys(GaitConfig SimConfig::*gait) {
  return {
      {"cycle_period", [gait](SimConfig& c, double v) { (c.*gait).cycle_period = v; }},
      {"duty_factor", [gait](SimConfig& c, double v) { (c.*gait).duty_factor = v; }},
      {"step_height", [gait](SimConfig& c, double v) { (c.*gait).step_height = v; }},
      {"speed", [gait](SimConfig& c, double v) { (c.*gait).speed = v; }},
  };
}

const std::map<std::string, KeyTable>& schema() {
  static const std::map<std::string, KeyTable> table = [] {
    std::map<std::string, KeyTable> t;
    t["body"] = {
        {"mass", [](SimConfig& c, double v) { c.robot.body.mass = v; }},
        {"inertia_xx", [](SimConfig& c, double v) { c.robot.body.inertia_body(0, 0) = v; }},
        {"inertia_yy", [](SimConfig& c, double v) { c.robot.body.inertia_body(1, 1) = v; }},
        {"inertia_zz", [](SimConfig& c, double v) { c.robot.body.inertia_body(2, 2) = v; }},
        {"nominal_height", real(&SimConfig::nominal_height)},
        {"half_length", [](SimConfig& c, double v) { c.plant.torso_half_extents.x() = v; }},
        {"half_width", [](SimConfig& c, double v) { c.plant.torso_half_extents.y() = v; }},
        {"half_height", [](SimConfig& c, double v) { c.plant.torso_half_extents.z() = v; }},
    };
    t["legs"] = {
        {"a1", leg_geometry(&LegConfig::a1)},
        {"a2", leg_geometry(&LegConfig::a2)},
        {"a3", leg_geometry(&LegConfig::a3)},
        {"hip_x", hip(0)},
        {"hip_y", hip(1)},
        {"roll_min", leg_limit(false, 0)},
        {"roll_max", leg_limit(true, 0)},
        {"pitch_min", leg_limit(false, 1)},
        {"pitch_max", leg_limit(true, 1)},
        {"knee_min", leg_limit(false, 2)},
        {"knee_max", leg_limit(true, 2)},
        {"torque_limit", [](SimConfig& c, double v) { c.plant.torque_limit = v; }},
        {"actuator_damping", [](SimConfig& c, double v) { c.plant.actuator_damping = v; }},
        {"touchdown_depth", real(&SimConfig::touchdown_depth)},
        {"raibert_gain", real(&SimConfig::raibert_gain)},
        {"stance_width", real(&SimConfig::stance_width)},
    };
    t["gait.trot"] = gait_keys(&SimConfig::trot);
    t["gait.bound"] = gait_keys(&SimConfig::bound);
    t["gait.bound"]["stall_window"] = [](SimConfig& c, double v) { c.transition.stall_window = v; };
    t["gait.bound"]["stall_threshold"] = [](SimConfig& c, double v) { c.transition.stall_threshold = v; };
    t["gait.bound"]["dwell"] = [](SimConfig& c, double v) { c.transition.dwell = v; };
    t["mpc"] = {
        {"horizon", integer([](SimConfig& c) -> int& { return c.mpc.horizon_steps; })},
        {"rate", [](SimConfig& c, double v) { c.mpc.update_rate = v; }},
        {"friction_mu", [](SimConfig& c, double v) { c.mpc.friction_mu = v; }},
        {"fz_min", [](SimConfig& c, double v) { c.mpc.fz_min = v; }},
        {"fz_max", [](SimConfig& c, double v) { c.mpc.fz_max = v; }},
        {"force_weight", [](SimConfig& c, double v) { c.mpc.force_weights.setConstant(v); }},
        {"max_iter", integer([](SimConfig& c) -> int& { return c.mpc.qp.max_iter; })},
        {"tolerance", [](SimConfig& c, double v) { c.mpc.qp.tol = v; }},
    };
    const char* weights[] = {"w_roll", "w_pitch", "w_yaw", "w_x", "w_y", "w_z", "w_wx",
                             "w_wy",   "w_wz",    "w_vx",  "w_vy", "w_vz", "w_gravity"};
    for (int i = 0; i < kStateDim; ++i) t["mpc"][weights[i]] = weight(i);
    t["world"] = {
        {"gravity", real(&SimConfig::gravity)},
        {"friction_mu", real(&SimConfig::friction_mu)},
        {"dt_sim", real(&SimConfig::dt_sim)},
        {"contact_stiffness", [](SimConfig& c, double v) { c.plant.contact_stiffness = v; }},
        {"contact_damping", [](SimConfig& c, double v) { c.plant.contact_damping = v; }},
        {"bumper_stiffness", [](SimConfig& c, double v) { c.plant.bumper_stiffness = v; }},
        {"bumper_damping", [](SimConfig& c, double v) { c.plant.bumper_damping = v; }},
        {"incline_deg", real(&SimConfig::incline_deg)},
        {"sine_amplitude", real(&SimConfig::sine_amplitude)},
        {"sine_wavelength", real(&SimConfig::sine_wavelength)},
        {"step_height", real(&SimConfig::step_height)},
        {"step_position", real(&SimConfig::step_position)},
        {"disturbance_start", real(&SimConfig::disturbance_start)},
        {"disturbance_period", real(&SimConfig::disturbance_period)},
        {"disturbance_duration", real(&SimConfig::disturbance_duration)},
    };
    return t;
  }();
  return table;
}

double parse_number(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  double v = 0.0;
  in >> v;
  if (!in || !(in >> std::ws).eof()) throw ConfigError(where + ": not a number: '" + text + "'");
  return v;
}

}  // namespace

void SimConfig::validate() const {
  robot.body.validate();
  for (const LegConfig& l : robot.legs) l.validate();
  mpc.validate();
  plant.validate();
  if (!(nominal_height > 0.0)) throw ConfigError("nominal_height must be positive");
  if (!(dt_sim > 0.0)) throw ConfigError("dt_sim must be positive");
  if (!(1.0 / mpc.update_rate >= dt_sim)) throw ConfigError("control period must be at least one physics step");
  for (const GaitConfig* g : {&trot, &bound}) {
    if (!(g->cycle_period > 0.0)) throw ConfigError("gait cycle_period must be positive");
    if (!(g->duty_factor > 0.0 && g->duty_factor <= 1.0)) throw ConfigError("gait duty_factor must be in (0, 1]");
    if (!(g->step_height > 0.0)) throw ConfigError("step_height must be positive");
  }
  if (!(transition.stall_window > 0.0 && transition.stall_threshold > 0.0 && transition.dwell >= 0.0))
    throw ConfigError("stall window/threshold must be positive and dwell non-negative");
  if (!(friction_mu > 0.0)) throw ConfigError("world friction must be positive");
  if (!(touchdown_depth >= 0.0)) throw ConfigError("touchdown_depth must be non-negative");
  if (!(stance_width >= 0.0)) throw ConfigError("stance_width must be non-negative");
}

SimConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  SimConfig cfg;
  const auto& table = schema();
  for (const auto& [section, body] : tree) {
    const auto sec = table.find(section);
    if (sec == table.end()) {
      if (!body.data().empty()) throw ConfigError("config key outside any section: " + section);
      throw ConfigError("unknown config section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      const auto it = sec->second.find(key);
      const std::string where = "[" + section + "] " + key;
      if (it == sec->second.end()) throw ConfigError("unknown config key " + where);
      try {
        it->second(cfg, parse_number(value.data(), where));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()).find(where) == 0 ? e.what() : where + ": " + e.what());
      }
    }
  }
  cfg.validate();
  return cfg;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace quadmpc
