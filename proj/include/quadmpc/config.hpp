#pragma once

#include <filesystem>
#include <string>

#include "quadmpc/gait_scheduler.hpp"
#include "quadmpc/mpc_controller.hpp"
#include "quadmpc/physics.hpp"

namespace quadmpc {

struct GaitConfig {
  double cycle_period = 0.6;
  double duty_factor = 0.5;
  double step_height = 0.08;
  double speed = 0.2;  // forward target speed, m/s
};

/// Everything a scenario needs besides the per-run options.
struct SimConfig {
  Robot robot{BodyParams{}, default_legs()};
  double nominal_height = 0.45;
  GaitConfig trot{0.6, 0.5, 0.08, 0.2};
  GaitConfig bound{0.4, 0.5, 0.08, 0.3};
  TransitionConfig transition;
  MpcConfig mpc;
  PlantParams plant;
  double dt_sim = 1e-3;
  double friction_mu = 0.6;
  double gravity = kStandardGravity;

  double incline_deg = 20.0;
  double sine_amplitude = 0.05;
  double sine_wavelength = 2.0;
  double step_height = 0.5;
  double step_position = 1.0;
  double disturbance_start = 0.5;
  double disturbance_period = 5.0;
  double disturbance_duration = 0.1;

  double touchdown_depth = 0.02;  // swing target below the estimated ground, m
  double raibert_gain = 0.03;
  double stance_width = 0.1;      // feet stand this far outboard of the hips, m

  void validate() const;
};

/// Reads an INI file with sections [body], [legs], [gait.trot], [gait.bound],
/// [mpc] and [world] on top of the defaults. Unknown sections or keys throw ConfigError.
SimConfig load_config(const std::filesystem::path& path);
SimConfig parse_config(const std::string& text);

}  // namespace quadmpc
