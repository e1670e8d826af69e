#pragma once

#include <string>

#include "quadmpc/dynamics_model.hpp"
#include "quadmpc/leg_kinematics.hpp"
#include "quadmpc/terrain.hpp"

namespace quadmpc {

struct PlantParams {
  double contact_stiffness = 3e4;  // N/m
  double contact_damping = 1e3;    // N s/m
  double actuator_damping = 1.0;   // N m s/rad, joint velocity = net torque / damping
  double torque_limit = 150.0;     // N m per joint
  Vec3 torso_half_extents{0.4, 0.15, 0.08};
  double bumper_stiffness = 2e4;
  double bumper_damping = 1e3;
  double max_position = 100.0;
  double max_velocity = 50.0;

  void validate() const;
};

struct SimState {
  RobotState body;
  PerLeg<JointAngles> q{};
  PerLeg<Vec3> qdot{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  PerLeg<bool> foot_contact{false, false, false, false};
  PerLeg<Vec3> anchor{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  PerLeg<Vec3> contact_normal{Vec3::UnitZ(), Vec3::UnitZ(), Vec3::UnitZ(), Vec3::UnitZ()};
  PerLeg<Vec3> contact_force{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  Vec3 bumper_force = Vec3::Zero();
  double t = 0.0;
};

class NumericalBlowup : public Error {
 public:
  using Error::Error;
};

struct Robot {
  BodyParams body;
  PerLeg<LegConfig> legs;
};

Vec3 foot_world(const SimState& sim, const Robot& robot, int leg);
PerLeg<Vec3> feet_world(const SimState& sim, const Robot& robot);

/// Advances the plant by dt. Torques are saturated at the actuator limit.
/// Throws NumericalBlowup when the torso state leaves the sanity bounds.
SimState physics_step(const SimState& sim, const PerLeg<Vec3>& torques, const WorldModel& world,
                      const Robot& robot, const PlantParams& plant, double dt);

}  // namespace quadmpc
