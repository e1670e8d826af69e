#include "quadmpc/gait_scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace quadmpc {

namespace {

double frac(double v) { return v - std::floor(v); }

using Vec2 = Eigen::Vector2d;

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + s * ab)).norm();
}

// Andrew's monotone chain, counter-clockwise, collinear points dropped.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= 1e-15) --k;
    hull[k++] = p;
  }
  for (size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 1e-15) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

const char* to_string(GaitName name) {
  switch (name) {
    case GaitName::Trot: return "trot";
    case GaitName::Bound: return "bound";
    case GaitName::Stand: return "stand";
  }
  return "?";
}

const char* to_string(GaitMode mode) {
  switch (mode) {
    case GaitMode::Bound: return "bound";
    case GaitMode::Transitioning: return "transitioning";
    case GaitMode::Trot: return "trot";
  }
  return "?";
}

void GaitDef::validate() const {
  if (!(cycle_period > 0.0)) throw ConfigError("gait cycle_period must be positive");
  if (!(duty_factor > 0.0 && duty_factor <= 1.0)) throw ConfigError("gait duty_factor must be in (0, 1]");
  for (double o : phase_offsets)
    if (!(o >= 0.0 && o < 1.0)) throw ConfigError("gait phase offsets must be in [0, 1)");
}

double GaitDef::phase(int leg, double t) const {
  // The tiny bias keeps exact boundaries like t = k*T/2 on the later side.
  return frac(t / cycle_period + phase_offsets[leg] + 1e-9);
}

GaitDef GaitDef::trot(double cycle_period, double duty_factor) {
  return {GaitName::Trot, cycle_period, duty_factor, {0.0, 0.5, 0.5, 0.0}};
}

GaitDef GaitDef::bound(double cycle_period, double duty_factor) {
  return {GaitName::Bound, cycle_period, duty_factor, {0.0, 0.0, 0.5, 0.5}};
}

GaitDef GaitDef::stand() { return {GaitName::Stand, 1.0, 1.0, {0.0, 0.0, 0.0, 0.0}}; }

PerLeg<bool> contact_state(const GaitDef& gait, double t) {
  PerLeg<bool> c{};
  for (int i = 0; i < kNumLegs; ++i) c[i] = gait.duty_factor >= 1.0 || gait.phase(i, t) < gait.duty_factor;
  return c;
}

int ContactSchedule::stance_count(int k) const {
  return static_cast<int>(std::count(flags[k].begin(), flags[k].end(), true));
}

ContactSchedule horizon_schedule(const GaitDef& gait, double t, int n, double dt) {
  if (n < 1) throw Error("horizon_schedule needs at least one step");
  ContactSchedule s;
  s.flags.reserve(n);
  for (int k = 0; k < n; ++k) s.flags.push_back(contact_state(gait, t + k * dt));
  return s;
}

void SwingParams::validate() const {
  if (!(step_height > 0.0)) throw ConfigError("step_height must be positive");
  if (!(swing_duration > 0.0)) throw ConfigError("swing_duration must be positive");
}

Vec3 swing_target(double phase, const Vec3& start, const Vec3& end, const SwingParams& params) {
  const double s = std::clamp(phase, 0.0, 1.0);
  const double blend = 0.5 * (1.0 - std::cos(kPi * s));
  Vec3 p = start + blend * (end - start);
  p.z() += params.step_height * std::sin(kPi * s);
  return p;
}

SwingCommand swing_torques(const LegConfig& leg, const JointAngles& q, const Vec3& qdot,
                           const Vec3& target_hip, const SwingGains& gains) {
  SwingCommand cmd;
  const Vec3 shoulder(0.0, 0.0, leg.a1);
  Vec3 target = target_hip;
  const double r = (target - shoulder).norm();
  const double rmin = std::abs(leg.a2 - leg.a3) + 1e-6, rmax = leg.a2 + leg.a3 - 1e-6;
  if (r > rmax || r < rmin) {
    const Vec3 dir = r > 1e-12 ? Vec3((target - shoulder) / r) : Vec3(1.0, 0.0, 0.0);
    target = shoulder + std::clamp(r, rmin, rmax) * dir;
    cmd.target_clamped = true;
  }
  const JointAngles goal = leg.limits.clamp(inverse_kinematics(target, leg));
  cmd.torque = gains.kp.cwiseProduct(goal.vec() - q.vec()) - gains.kd.cwiseProduct(qdot);
  for (int j = 0; j < 3; ++j) {
    if (std::abs(cmd.torque(j)) > gains.torque_limit) {
      cmd.torque(j) = std::copysign(gains.torque_limit, cmd.torque(j));
      cmd.torque_saturated = true;
    }
  }
  return cmd;
}

bool stall_detect(const std::deque<PositionSample>& history, double window, double threshold) {
  if (history.empty()) return false;
  const PositionSample& latest = history.back();
  if (latest.t - history.front().t < window - 1e-9) return false;
  for (auto it = history.rbegin(); it != history.rend() && it->t >= latest.t - window - 1e-9; ++it) {
    if ((it->position - latest.position).head<2>().norm() >= threshold) return false;
  }
  return true;
}

TransitionUpdate update_transition(const TransitionState& ts, bool stall, double t, const GaitDef& bound,
                                   const GaitDef& trot, const ContactFlags& in_contact,
                                   const TransitionConfig& cfg) {
  TransitionUpdate out{ts, bound, {}};
  TransitionState& s = out.state;
  switch (ts.mode) {
    case GaitMode::Trot:
      out.gait = s.trot;
      return out;
    case GaitMode::Transitioning:
      out.gait = GaitDef::stand();
      if (t - s.dwell_start >= cfg.dwell - 1e-9) {
        s.mode = GaitMode::Trot;
        s.trot_start = t;
        s.trot = trot;
        const double lead = frac(-t / trot.cycle_period);
        const int partner = 3 - s.leading_leg;  // LF<->RH, RF<->LH
        for (int i = 0; i < kNumLegs; ++i) {
          const bool leading = (i == s.leading_leg || i == partner);
          s.trot.phase_offsets[i] = frac(lead + (leading ? 0.0 : 0.5));
        }
        out.gait = s.trot;
        out.event = "trot_start";
      }
      return out;
    case GaitMode::Bound:
      break;
  }
  if (!s.handoff_pending) {
    if (!stall) return out;
    s.handoff_pending = true;
    s.stall_time = t;
    double remaining = std::numeric_limits<double>::infinity();
    int landing = -1;
    for (int i = 0; i < kNumLegs; ++i) {
      const double ph = bound.phase(i, t);
      if (ph < bound.duty_factor) remaining = std::min(remaining, (bound.duty_factor - ph) * bound.cycle_period);
      else if (landing < 0) landing = i;
    }
    s.stance_end = std::isfinite(remaining) ? t + remaining : t;
    s.leading_leg = landing < 0 ? 0 : landing;
    out.event = "stall_detected";
  }
  if (t < s.stance_end - 1e-9) return out;
  out.gait = GaitDef::stand();
  if (std::all_of(in_contact.begin(), in_contact.end(), [](bool c) { return c; })) {
    s.mode = GaitMode::Transitioning;
    s.handoff_pending = false;
    s.dwell_start = t;
    out.event = out.event.empty() ? "transition_start" : out.event + ";transition_start";
  }
  return out;
}

double support_margin(const std::vector<Vec3>& stance_feet, const Vec3& com) {
  if (stance_feet.empty()) throw Error("support_margin needs at least one stance foot");
  const Vec2 p = com.head<2>();
  std::vector<Vec2> pts;
  for (const Vec3& f : stance_feet) pts.push_back(f.head<2>());
  const std::vector<Vec2> hull = convex_hull(pts);
  if (hull.size() == 1) return -(p - hull[0]).norm();
  if (hull.size() == 2) return -segment_distance(p, hull[0], hull[1]);
  double dist = std::numeric_limits<double>::infinity();
  bool inside = true;
  for (size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    dist = std::min(dist, segment_distance(p, a, b));
    if (cross2(a, b, p) < 0.0) inside = false;
  }
  return inside ? dist : -dist;
}

}  // namespace quadmpc
