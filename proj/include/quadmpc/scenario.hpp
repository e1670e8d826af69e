#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quadmpc/config.hpp"

namespace quadmpc {

enum class Outcome { Completed, Toppled, SolverFailed };

const char* to_string(Outcome outcome);

struct ScenarioOptions {
  std::string scenario = "stand";
  std::optional<double> duration;  // per-scenario default when unset
  double force = 150.0;            // disturbance magnitude, N
  double drop_height = 0.4;        // m
  std::optional<double> incline_deg;
  std::optional<ReferenceMode> ref_model;
  std::optional<double> mpc_rate;
  std::optional<int> horizon;
  std::uint64_t seed = 0;
  bool timing = false;  // log wall-clock solve time; off keeps logs reproducible
};

/// One row per control tick.
struct TickRecord {
  double t = 0.0;
  RobotState body;
  PerLeg<bool> contact{};
  PerLeg<Vec3> force{};  // commanded ground reaction forces
  std::string gait_mode;
  std::string solver_status;
  double kkt_residual = 0.0;
  double solve_ms = 0.0;
  double support_margin = 0.0;
  std::string event;
};

struct Metrics {
  double recovery_time = -1.0;          // first pulse, s; negative when never recovered
  std::vector<double> recovery_times;   // per pulse
  double max_tilt = 0.0;                // rad
  double distance_traveled = 0.0;       // planar, m
  double stall_time = -1.0;             // s, negative when no stall fired
  double transition_start = -1.0;
  double transition_time = -1.0;        // trot start, s
  double height_rms_error = 0.0;        // against nominal height over the terrain, m
  double mean_total_fz = 0.0;           // commanded
  double max_com_drift = 0.0;           // planar, from the initial position
  double min_transition_margin = 0.0;
};

struct ScenarioResult {
  std::string scenario;
  std::vector<TickRecord> log;
  Outcome outcome = Outcome::Completed;
  Metrics metrics;
  std::string diagnostics;
  WorldModel world;
};

const std::vector<std::string>& scenario_names();

/// Throws ConfigError for an unknown scenario or invalid option values.
ScenarioResult run_scenario(const ScenarioOptions& options, const SimConfig& config);

}  // namespace quadmpc
