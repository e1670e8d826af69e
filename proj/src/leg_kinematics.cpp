#include "quadmpc/leg_kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace quadmpc {

namespace {

constexpr double kAcosTolerance = 1e-9;

double checked_acos(double arg, double r) {
  if (arg > 1.0 + kAcosTolerance || arg < -1.0 - kAcosTolerance) throw Unreachable(r);
  return std::acos(std::clamp(arg, -1.0, 1.0));
}

}  // namespace

bool JointLimits::contains(const JointAngles& q) const {
  const Vec3 v = q.vec();
  return (v.array() >= lo.array()).all() && (v.array() <= hi.array()).all();
}

JointAngles JointLimits::clamp(const JointAngles& q) const {
  return JointAngles::from(q.vec().cwiseMax(lo).cwiseMin(hi));
}

void LegConfig::validate() const {
  if (!(a1 >= 0.0) || !(a2 > 0.0) || !(a3 > 0.0))
    throw ConfigError("leg lengths must satisfy a1 >= 0, a2 > 0, a3 > 0");
  if (mirror != 1 && mirror != -1) throw ConfigError("leg mirror must be +1 or -1");
  if ((limits.lo.array() > limits.hi.array()).any())
    throw ConfigError("joint limits must satisfy lo <= hi");
}

Mat3 LegConfig::hip_to_body() const {
  Mat3 h;
  // columns: hip x -> torso -z, hip y -> torso (mirror * y), hip z -> torso x
  h << 0, 0, 1,
       0, mirror, 0,
       -1, 0, 0;
  return h;
}

Unreachable::Unreachable(double r)
    : Error([r] {
        std::ostringstream os;
        os << "foot target unreachable (r = " << r << " m)";
        return os.str();
      }()),
      r_(r) {}

Vec3 forward_kinematics(const JointAngles& q, const LegConfig& cfg) {
  const double c1 = std::cos(q.hip_roll), s1 = std::sin(q.hip_roll);
  const double c2 = std::cos(q.hip_pitch), s2 = std::sin(q.hip_pitch);
  const double c23 = std::cos(q.hip_pitch + q.knee_pitch);
  const double s23 = std::sin(q.hip_pitch + q.knee_pitch);
  const double planar = cfg.a3 * c23 + cfg.a2 * c2;
  return {c1 * planar, s1 * planar, cfg.a3 * s23 + cfg.a2 * s2 + cfg.a1};
}

std::array<Vec3, 4> joint_positions(const JointAngles& q, const LegConfig& cfg) {
  const double c1 = std::cos(q.hip_roll), s1 = std::sin(q.hip_roll);
  const double c2 = std::cos(q.hip_pitch), s2 = std::sin(q.hip_pitch);
  return {Vec3::Zero(), Vec3(0.0, 0.0, cfg.a1),
          Vec3(cfg.a2 * c1 * c2, cfg.a2 * s1 * c2, cfg.a2 * s2 + cfg.a1),
          forward_kinematics(q, cfg)};
}

JointAngles inverse_kinematics(const Vec3& foot_hip, const LegConfig& cfg) {
  const double x = foot_hip.x(), y = foot_hip.y(), z = foot_hip.z();
  const double a1 = cfg.a1, a2 = cfg.a2, a3 = cfg.a3;
  const double r2 = x * x + y * y + z * z + a1 * a1 - 2.0 * a1 * z;
  const double r = std::sqrt(std::max(r2, 0.0));
  if (r < 1e-12) throw Unreachable(r);

  JointAngles q;
  q.hip_roll = std::atan2(y, x);
  q.hip_pitch = std::atan2(z - a1, std::hypot(x, y)) -
                checked_acos((a3 * a3 - a2 * a2 - r2) / (-2.0 * a2 * r), r);
  q.knee_pitch = kPi - checked_acos((r2 - a2 * a2 - a3 * a3) / (-2.0 * a2 * a3), r);
  return q;
}

Mat3 leg_jacobian(const JointAngles& q, const LegConfig& cfg) {
  const double c1 = std::cos(q.hip_roll), s1 = std::sin(q.hip_roll);
  const double c2 = std::cos(q.hip_pitch), s2 = std::sin(q.hip_pitch);
  const double c23 = std::cos(q.hip_pitch + q.knee_pitch);
  const double s23 = std::sin(q.hip_pitch + q.knee_pitch);
  const double planar = cfg.a3 * c23 + cfg.a2 * c2;
  const double dplanar2 = -cfg.a3 * s23 - cfg.a2 * s2;
  const double dplanar3 = -cfg.a3 * s23;

  Mat3 j;
  j << -s1 * planar, c1 * dplanar2, c1 * dplanar3,
        c1 * planar, s1 * dplanar2, s1 * dplanar3,
        0.0, planar, cfg.a3 * c23;
  return j;
}

Vec3 forces_to_torques(const JointAngles& q, const Vec3& force_hip, const LegConfig& cfg) {
  return leg_jacobian(q, cfg).transpose() * force_hip;
}

Vec3 foot_in_body(const JointAngles& q, const LegConfig& cfg) {
  return cfg.mount_offset + cfg.hip_to_body() * forward_kinematics(q, cfg);
}

Vec3 body_to_hip(const Vec3& foot_body, const LegConfig& cfg) {
  return cfg.hip_to_body().transpose() * (foot_body - cfg.mount_offset);
}

PerLeg<LegConfig> default_legs() {
  PerLeg<LegConfig> legs;
  const double hx = 0.3, hy = 0.1;
  const std::array<Vec3, kNumLegs> mounts = {Vec3(hx, hy, 0), Vec3(hx, -hy, 0),
                                             Vec3(-hx, hy, 0), Vec3(-hx, -hy, 0)};
  for (int i = 0; i < kNumLegs; ++i) {
    legs[i].mount_offset = mounts[i];
    legs[i].mirror = (i % 2 == 0) ? 1 : -1;
  }
  return legs;
}

}  // namespace quadmpc
