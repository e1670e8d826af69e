#pragma once

#include "quadmpc/types.hpp"

namespace quadmpc {

/// Hip roll, hip pitch and knee pitch of one leg, radians.
struct JointAngles {
  double hip_roll = 0.0;
  double hip_pitch = 0.0;
  double knee_pitch = 0.0;

  Vec3 vec() const { return {hip_roll, hip_pitch, knee_pitch}; }
  static JointAngles from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

struct JointLimits {
  Vec3 lo{-0.6, -2.8, 0.0};
  Vec3 hi{0.6, 2.8, 2.9};

  bool contains(const JointAngles& q) const;
  JointAngles clamp(const JointAngles& q) const;
};

/// Geometry of a 3-DOF leg. All four legs share (a1, a2, a3).
///
/// The hip frame has its origin at the abduction joint. Its z axis is the
/// abduction (roll) axis and points along torso +x; its x axis points along
/// torso -z. `mirror` flips the torso y axis for right-side legs, so a positive
/// hip roll always swings the foot outward.
struct LegConfig {
  double a1 = 0.11;  // hip offset along the roll axis
  double a2 = 0.35;  // upper leg
  double a3 = 0.36;  // lower leg
  Vec3 mount_offset = Vec3::Zero();
  int mirror = 1;  // +1 left, -1 right
  JointLimits limits;

  void validate() const;
  /// Rotation (or reflection, for mirrored legs) taking hip-frame vectors to the torso frame.
  Mat3 hip_to_body() const;
};

class Unreachable : public Error {
 public:
  explicit Unreachable(double r);
  double radius() const { return r_; }

 private:
  double r_;
};

/// Foot position in the hip frame.
Vec3 forward_kinematics(const JointAngles& q, const LegConfig& cfg);

/// Hip, abduction output, knee and foot positions in the hip frame.
std::array<Vec3, 4> joint_positions(const JointAngles& q, const LegConfig& cfg);

/// Closed-form inverse kinematics for a hip-frame foot target.
///
/// Returns the knee-backward branch (knee_pitch in [0, pi]). Hip roll uses a
/// two-argument arctangent, so the foot is assumed to lie below the roll axis
/// (positive hip-frame x). Throws Unreachable when the target lies outside the
/// annulus |a2 - a3| <= r <= a2 + a3 by more than 1e-9 in cosine terms.
JointAngles inverse_kinematics(const Vec3& foot_hip, const LegConfig& cfg);

/// d(foot position)/d(joint angles), hip frame.
Mat3 leg_jacobian(const JointAngles& q, const LegConfig& cfg);

/// tau = J^T f, with f expressed in the hip frame.
Vec3 forces_to_torques(const JointAngles& q, const Vec3& force_hip, const LegConfig& cfg);

// Torso-frame helpers.
Vec3 foot_in_body(const JointAngles& q, const LegConfig& cfg);
Vec3 body_to_hip(const Vec3& foot_body, const LegConfig& cfg);

/// Default leg set: hips at (+-0.3, +-0.1, 0) in the torso frame.
PerLeg<LegConfig> default_legs();

}  // namespace quadmpc
