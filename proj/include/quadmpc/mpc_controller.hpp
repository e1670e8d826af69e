#pragma once

#include <optional>
#include <vector>

#include "quadmpc/dynamics_model.hpp"
#include "quadmpc/gait_scheduler.hpp"
#include "quadmpc/leg_kinematics.hpp"
#include "quadmpc/qp_solver.hpp"

namespace quadmpc {

struct MpcConfig {
  int horizon_steps = 10;
  double update_rate = 20.0;  // Hz
  StateVector state_weights = default_state_weights();
  InputVector force_weights = InputVector::Constant(1e-5);
  double friction_mu = 0.6;
  double fz_min = 0.0;
  double fz_max = 400.0;
  QpOptions qp;

  void validate() const;
  double dt() const { return 1.0 / update_rate; }

  static StateVector default_state_weights();
};

enum class ReferenceMode { Constant, Sine, Ramp };

const char* to_string(ReferenceMode mode);

struct ReferenceParams {
  double amplitude = 0.0;     // Sine height amplitude, m
  double period = 2.0;        // Sine spatial wavelength along x, m
  double slope = 0.0;         // Ramp rise per metre of x
  double target_height = 0.45;
  Vec3 target_velocity = Vec3::Zero();  // world frame; z ignored
  double target_yaw = 0.0;
  // Planar setpoint the reference is pulled toward; current position when unset.
  std::optional<Vec3> anchor;
  double max_position_error = 0.1;  // anchor pull is clipped to this radius, m
};

struct ReferenceTrajectory {
  std::vector<RobotState> states;  // x_1 .. x_N

  int size() const { return static_cast<int>(states.size()); }
};

/// Desired states for the N steps following `current`.
ReferenceTrajectory generate_reference(ReferenceMode mode, const RobotState& current,
                                       const ReferenceParams& params, int n, double dt);

/// Where each decision variable lives: variable 3*j .. 3*j+2 is the force of
/// leg `leg[j]` at horizon step `step[j]`.
struct ForceLayout {
  std::vector<int> step;
  std::vector<int> leg;

  int num_forces() const { return static_cast<int>(step.size()); }
};

struct MpcProblem {
  QpProblem qp;
  ForceLayout layout;
};

/// Condensed horizon QP. One model per step; feet that swing at step k have
/// their forces eliminated. `ground_normal` orients the friction pyramid.
MpcProblem build_qp(const RobotState& state, const std::vector<DiscreteModel>& models,
                    const ReferenceTrajectory& ref, const ContactSchedule& schedule, const MpcConfig& cfg,
                    const Vec3& ground_normal = Vec3::UnitZ());

/// Forces per horizon step and leg, world frame.
struct ForcePlan {
  std::vector<PerLeg<Vec3>> forces;
};

/// Unpacks a QP solution and projects each force onto the pyramid and bounds,
/// removing solver-tolerance violations.
ForcePlan extract_plan(const Eigen::VectorXd& x, const ForceLayout& layout, int horizon, const MpcConfig& cfg,
                       const Vec3& ground_normal = Vec3::UnitZ());

class MpcInfeasible : public Error {
 public:
  using Error::Error;
};

struct ControlOutput {
  PerLeg<Vec3> forces;   // first-step ground reaction forces, world frame
  PerLeg<Vec3> torques;  // stance legs only; swing entries are zero
  ForcePlan plan;
  QpStatus status = QpStatus::Optimal;
  int iterations = 0;
  double kkt_residual = 0.0;
  double solve_ms = 0.0;
};

class MpcController {
 public:
  MpcController(MpcConfig cfg, BodyParams body, PerLeg<LegConfig> legs);

  /// One control tick. `foot_world` holds the lever-arm point of every leg:
  /// the current foot for stance legs, the planned foothold otherwise.
  /// Throws MpcInfeasible when the QP has no solution.
  ControlOutput control_step(const RobotState& state, const PerLeg<Vec3>& foot_world,
                             const PerLeg<JointAngles>& q, const ReferenceTrajectory& ref,
                             const ContactSchedule& schedule, const Vec3& ground_normal = Vec3::UnitZ());

  /// Same, with one set of lever-arm points per horizon step.
  ControlOutput control_step(const RobotState& state, const std::vector<PerLeg<Vec3>>& foot_plan,
                             const PerLeg<JointAngles>& q, const ReferenceTrajectory& ref,
                             const ContactSchedule& schedule, const Vec3& ground_normal = Vec3::UnitZ());

  const MpcConfig& config() const { return cfg_; }
  void reset() { solver_.reset(); }

 private:
  MpcConfig cfg_;
  BodyParams body_;
  PerLeg<LegConfig> legs_;
  QpSolver solver_;
};

}  // namespace quadmpc
