#pragma once

#include <deque>
#include <string>
#include <vector>

#include "quadmpc/leg_kinematics.hpp"

namespace quadmpc {

enum class GaitName { Trot, Bound, Stand };

const char* to_string(GaitName name);

/// Periodic gait. A leg is in stance while its phase is below the duty factor.
struct GaitDef {
  GaitName name = GaitName::Stand;
  double cycle_period = 1.0;
  double duty_factor = 1.0;
  PerLeg<double> phase_offsets{0.0, 0.0, 0.0, 0.0};

  void validate() const;
  /// Fractional phase of `leg` at time t, in [0, 1).
  double phase(int leg, double t) const;
  double stance_duration() const { return duty_factor * cycle_period; }
  double swing_duration() const { return (1.0 - duty_factor) * cycle_period; }

  static GaitDef trot(double cycle_period = 0.6, double duty_factor = 0.5);
  static GaitDef bound(double cycle_period = 0.4, double duty_factor = 0.5);
  static GaitDef stand();
};

using ContactFlags = PerLeg<bool>;

PerLeg<bool> contact_state(const GaitDef& gait, double t);

/// Stance flags over a horizon; row k describes the interval starting at t + k*dt.
struct ContactSchedule {
  std::vector<ContactFlags> flags;

  int size() const { return static_cast<int>(flags.size()); }
  int stance_count(int k) const;
};

ContactSchedule horizon_schedule(const GaitDef& gait, double t, int n, double dt);

struct SwingParams {
  double step_length = 0.0;
  double step_height = 0.08;
  double swing_duration = 0.3;

  void validate() const;
};

/// Foot target along the swing arc at `phase` in [0, 1].
Vec3 swing_target(double phase, const Vec3& start, const Vec3& end, const SwingParams& params);

struct SwingGains {
  Vec3 kp{20.0, 20.0, 20.0};
  Vec3 kd{0.0, 0.0, 0.0};
  double torque_limit = 100.0;
};

struct SwingCommand {
  Vec3 torque = Vec3::Zero();
  bool target_clamped = false;  // target was outside the workspace and got pulled in
  bool torque_saturated = false;
};

/// Joint-space PD toward the IK solution of a hip-frame foot target.
SwingCommand swing_torques(const LegConfig& leg, const JointAngles& q, const Vec3& qdot,
                           const Vec3& target_hip, const SwingGains& gains);

struct PositionSample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
};

/// True when the history covers the window and no sample inside the trailing
/// window is farther than `threshold` (ground-plane distance) from the latest one.
bool stall_detect(const std::deque<PositionSample>& history, double window, double threshold);

enum class GaitMode { Bound, Transitioning, Trot };

const char* to_string(GaitMode mode);

struct TransitionConfig {
  double stall_window = 1.0;
  double stall_threshold = 0.03;
  double dwell = 0.2;
};

/// One-way bound to trot handoff.
///
/// A stall in Bound arms the handoff. The current bound stance runs to its
/// end, then all four feet are held down. The mode switches to Transitioning
/// once every foot reports contact, stays there for the dwell, and then starts
/// Trot with the diagonal holding the most recent touchdown leading.
struct TransitionState {
  GaitMode mode = GaitMode::Bound;
  bool handoff_pending = false;
  double stall_time = -1.0;
  double stance_end = 0.0;
  double dwell_start = 0.0;
  double trot_start = -1.0;
  int leading_leg = 0;
  GaitDef trot = GaitDef::trot();
};

struct TransitionUpdate {
  TransitionState state;
  GaitDef gait;
  std::string event;  // empty when nothing happened this tick
};

TransitionUpdate update_transition(const TransitionState& ts, bool stall, double t, const GaitDef& bound,
                                   const GaitDef& trot, const ContactFlags& in_contact,
                                   const TransitionConfig& cfg);

/// Signed distance from the ground projection of `com` to the boundary of the
/// convex hull of the stance-foot projections. Positive inside.
double support_margin(const std::vector<Vec3>& stance_feet, const Vec3& com);

}  // namespace quadmpc
