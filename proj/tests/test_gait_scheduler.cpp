#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "quadmpc/gait_scheduler.hpp"

namespace quadmpc {
namespace {

constexpr int LF = 0, RF = 1, LH = 2, RH = 3;

TEST(ContactState, TrotStartsWithFirstDiagonal) {
  const auto c = contact_state(GaitDef::trot(), 0.0);
  EXPECT_TRUE(c[LF]);
  EXPECT_TRUE(c[RH]);
  EXPECT_FALSE(c[RF]);
  EXPECT_FALSE(c[LH]);
}

TEST(ContactState, BoundStartsWithFrontPair) {
  const auto c = contact_state(GaitDef::bound(), 0.0);
  EXPECT_TRUE(c[LF]);
  EXPECT_TRUE(c[RF]);
  EXPECT_FALSE(c[LH]);
  EXPECT_FALSE(c[RH]);
}

TEST(ContactState, FullDutyAlwaysStance) {
  GaitDef g = GaitDef::trot(0.6, 1.0);
  for (double t = 0.0; t < 2.0; t += 0.013) {
    const auto c = contact_state(g, t);
    EXPECT_TRUE(std::all_of(c.begin(), c.end(), [](bool b) { return b; }));
  }
  const auto s = contact_state(GaitDef::stand(), 3.7);
  EXPECT_TRUE(std::all_of(s.begin(), s.end(), [](bool b) { return b; }));
}

TEST(ContactState, PairingsHoldAtAllTimes) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> time(0.0, 20.0);
  const GaitDef trot = GaitDef::trot(), bound = GaitDef::bound();
  for (int i = 0; i < 2000; ++i) {
    const double t = time(rng);
    const auto ct = contact_state(trot, t);
    EXPECT_EQ(ct[LF], ct[RH]);
    EXPECT_EQ(ct[RF], ct[LH]);
    EXPECT_NE(ct[LF], ct[RF]);
    const auto cb = contact_state(bound, t);
    EXPECT_EQ(cb[LF], cb[RF]);
    EXPECT_EQ(cb[LH], cb[RH]);
    EXPECT_NE(cb[LF], cb[LH]);
  }
}

TEST(ContactState, PeriodicInCycle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> time(0.0, 10.0);
  for (const GaitDef& g : {GaitDef::trot(), GaitDef::bound(), GaitDef::trot(0.5, 0.65)}) {
    for (int i = 0; i < 1000; ++i) {
      const double t = time(rng);
      EXPECT_EQ(contact_state(g, t), contact_state(g, t + g.cycle_period)) << "t=" << t;
    }
  }
}

TEST(ContactState, StanceIffPhaseBelowDuty) {
  const GaitDef g = GaitDef::trot(0.6, 0.7);
  for (double t = 0.001; t < 1.2; t += 0.0173) {
    const auto c = contact_state(g, t);
    for (int i = 0; i < kNumLegs; ++i) {
      const double ph = std::fmod(t / g.cycle_period + g.phase_offsets[i], 1.0);
      EXPECT_EQ(c[i], ph < g.duty_factor) << "t=" << t << " leg " << i;
    }
  }
}

TEST(GaitDef, ValidationRejectsBadNumbers) {
  GaitDef g = GaitDef::trot();
  EXPECT_NO_THROW(g.validate());
  g.cycle_period = 0.0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = GaitDef::trot();
  g.duty_factor = 1.5;
  EXPECT_THROW(g.validate(), ConfigError);
  g = GaitDef::trot();
  g.phase_offsets[2] = 1.0;
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(HorizonSchedule, SingleRowMatchesContactState) {
  const GaitDef g = GaitDef::bound();
  const auto s = horizon_schedule(g, 0.33, 1, 0.05);
  ASSERT_EQ(s.size(), 1);
  EXPECT_EQ(s.flags[0], contact_state(g, 0.33));
}

TEST(HorizonSchedule, OneCycleCountsDuty) {
  const GaitDef g = GaitDef::trot(0.6, 0.5);
  const double dt = 0.05;
  const int n = static_cast<int>(std::lround(g.cycle_period / dt));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> time(0.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = horizon_schedule(g, time(rng), n, dt);
    for (int i = 0; i < kNumLegs; ++i) {
      int stance = 0;
      for (const auto& row : s.flags) stance += row[i];
      EXPECT_LE(std::abs(stance - g.duty_factor * n), 1.0);
    }
  }
}

TEST(HorizonSchedule, RowsFollowTimeAndRepeatPerCycle) {
  const GaitDef g = GaitDef::bound(0.4, 0.5);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> time(0.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double t = time(rng);
    const auto a = horizon_schedule(g, t, 10, 0.03);
    const auto b = horizon_schedule(g, t + g.cycle_period, 10, 0.03);
    for (int k = 0; k < 10; ++k) {
      EXPECT_EQ(a.flags[k], contact_state(g, t + k * 0.03));
      EXPECT_EQ(a.flags[k], b.flags[k]);
    }
  }
}

TEST(HorizonSchedule, TrotAlwaysHasStance) {
  const auto s = horizon_schedule(GaitDef::trot(), 0.0, 120, 0.01);
  for (int k = 0; k < s.size(); ++k) EXPECT_GE(s.stance_count(k), 2);
}

TEST(HorizonSchedule, RejectsEmptyHorizon) {
  EXPECT_THROW(horizon_schedule(GaitDef::trot(), 0.0, 0, 0.05), Error);
}

SwingParams swing(double h = 0.08, double T = 0.3) {
  SwingParams p;
  p.step_height = h;
  p.swing_duration = T;
  return p;
}

TEST(SwingTarget, Endpoints) {
  const Vec3 a(0.1, 0.2, -0.5), b(0.25, 0.18, -0.48);
  EXPECT_TRUE(swing_target(0.0, a, b, swing()).isApprox(a, 1e-15));
  EXPECT_LT((swing_target(1.0, a, b, swing()) - b).norm(), 1e-15);
}

TEST(SwingTarget, ApexAtMidpoint) {
  const Vec3 a(0.0, 0.0, 0.0), b(0.2, 0.0, 0.0);
  const Vec3 m = swing_target(0.5, a, b, swing(0.08));
  EXPECT_NEAR(m.x(), 0.1, 1e-15);
  EXPECT_NEAR(m.z(), 0.08, 1e-15);
}

TEST(SwingTarget, DenseSampledMaximumHeight) {
  const Vec3 a(0.0, 0.1, 0.0), b(0.15, 0.1, 0.0);
  const int n = 200001;
  double best = -1.0, at = -1.0;
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / (n - 1);
    const double z = swing_target(s, a, b, swing(0.08)).z();
    if (z > best) best = z, at = s;
  }
  EXPECT_NEAR(best, 0.08, 1e-9);
  EXPECT_NEAR(at, 0.5, 1e-5);
}

TEST(SwingTarget, ClampsPhase) {
  const Vec3 a(0.0, 0.0, 0.0), b(0.2, 0.0, 0.0);
  EXPECT_TRUE(swing_target(-0.3, a, b, swing()).isApprox(a));
  EXPECT_TRUE(swing_target(1.7, a, b, swing()).isApprox(b));
}

// Foot speed is (pi/T) sqrt((d/2)^2 sin^2 + h^2 cos^2), so it peaks at (pi/T) max(h, d/2).
TEST(SwingTarget, SpeedBoundedAndContinuous) {
  const double T = 0.3;
  for (const auto& [h, d] : {std::pair{0.08, 0.2}, std::pair{0.08, 0.05}, std::pair{0.02, 0.4}}) {
    const Vec3 a(0.0, 0.0, 0.0), b(d, 0.0, 0.0);
    const double bound = kPi / T * std::max(h, d / 2.0);
    const int n = 20000;
    const double ds = 1.0 / n;
    double vmax = 0.0;
    Vec3 prev = swing_target(0.0, a, b, swing(h, T));
    for (int i = 1; i <= n; ++i) {
      const Vec3 p = swing_target(i * ds, a, b, swing(h, T));
      const double v = (p - prev).norm() / (ds * T);
      vmax = std::max(vmax, v);
      EXPECT_LT((p - prev).norm(), 1e-3);
      prev = p;
    }
    EXPECT_LE(vmax, bound * (1.0 + 1e-6));
    EXPECT_GT(vmax, bound * (1.0 - 1e-3));
  }
}

TEST(SwingParams, Validation) {
  EXPECT_NO_THROW(swing().validate());
  EXPECT_THROW(swing(0.0).validate(), ConfigError);
  EXPECT_THROW(swing(0.08, 0.0).validate(), ConfigError);
}

TEST(SwingTorques, ZeroAtSetpoint) {
  const LegConfig leg = default_legs()[0];
  const JointAngles q{0.1, 0.4, 1.1};
  const Vec3 target = forward_kinematics(q, leg);
  const SwingCommand cmd = swing_torques(leg, q, Vec3::Zero(), target, SwingGains{});
  EXPECT_LT(cmd.torque.norm(), 1e-9);
  EXPECT_FALSE(cmd.target_clamped);
  EXPECT_FALSE(cmd.torque_saturated);
}

TEST(SwingTorques, ZeroGainsGiveZero) {
  const LegConfig leg = default_legs()[1];
  SwingGains g;
  g.kp.setZero();
  g.kd.setZero();
  const SwingCommand cmd = swing_torques(leg, {0.0, 0.2, 0.9}, Vec3(1.0, -2.0, 3.0), Vec3(0.5, 0.05, 0.1), g);
  EXPECT_TRUE(cmd.torque.isZero());
}

TEST(SwingTorques, PdTowardIkSolution) {
  const LegConfig leg = default_legs()[2];
  const JointAngles goal{-0.1, 0.3, 1.2};
  const JointAngles q{0.0, 0.5, 1.0};
  const Vec3 qdot(0.3, -0.2, 0.1);
  SwingGains g;
  g.kp = Vec3(10.0, 20.0, 30.0);
  g.kd = Vec3(1.0, 2.0, 3.0);
  const SwingCommand cmd = swing_torques(leg, q, qdot, forward_kinematics(goal, leg), g);
  const Vec3 expect = g.kp.cwiseProduct(goal.vec() - q.vec()) - g.kd.cwiseProduct(qdot);
  EXPECT_LT((cmd.torque - expect).norm(), 1e-9);
}

TEST(SwingTorques, SaturatesAndClampsUnreachable) {
  const LegConfig leg = default_legs()[0];
  SwingGains g;
  g.kp.setConstant(1e4);
  g.torque_limit = 50.0;
  const SwingCommand cmd = swing_torques(leg, {0.0, 0.0, 0.5}, Vec3::Zero(), Vec3(5.0, 0.0, 0.0), g);
  EXPECT_TRUE(cmd.target_clamped);
  EXPECT_TRUE(cmd.torque_saturated);
  EXPECT_LE(cmd.torque.cwiseAbs().maxCoeff(), 50.0);
}

std::deque<PositionSample> line_history(double speed, double duration, double dt) {
  std::deque<PositionSample> h;
  for (int i = 0; i * dt <= duration + 1e-12; ++i) h.push_back({i * dt, Vec3(speed * i * dt, 0.0, 0.45)});
  return h;
}

TEST(StallDetect, ConstantPositionStalls) { EXPECT_TRUE(stall_detect(line_history(0.0, 1.5, 0.05), 1.0, 0.05)); }

TEST(StallDetect, SteadyWalkDoesNot) { EXPECT_FALSE(stall_detect(line_history(0.1, 1.5, 0.05), 1.0, 0.05)); }

TEST(StallDetect, NeedsFullWindow) {
  EXPECT_FALSE(stall_detect(line_history(0.0, 0.5, 0.05), 1.0, 0.05));
  EXPECT_FALSE(stall_detect({}, 1.0, 0.05));
}

TEST(StallDetect, OnlyTrailingWindowCounts) {
  auto h = line_history(0.0, 3.0, 0.05);
  for (auto& s : h)
    if (s.t < 1.5) s.position.x() = -1.0;  // moved long ago, then stood still
  EXPECT_TRUE(stall_detect(h, 1.0, 0.03));
  h.back().position.x() += 0.04;
  EXPECT_FALSE(stall_detect(h, 1.0, 0.03));
}

TEST(StallDetect, IgnoresHeightChanges) {
  auto h = line_history(0.0, 1.5, 0.05);
  for (size_t i = 0; i < h.size(); ++i) h[i].position.z() += 0.1 * std::sin(static_cast<double>(i));
  EXPECT_TRUE(stall_detect(h, 1.0, 0.03));
}

constexpr ContactFlags kAll{true, true, true, true};
constexpr ContactFlags kFront{true, true, false, false};

TEST(Transition, NoStallLeavesBoundUnchanged) {
  const GaitDef bound = GaitDef::bound();
  TransitionState ts;
  const auto u = update_transition(ts, false, 0.7, bound, GaitDef::trot(), kFront, {});
  EXPECT_EQ(u.state.mode, GaitMode::Bound);
  EXPECT_FALSE(u.state.handoff_pending);
  EXPECT_TRUE(u.event.empty());
  EXPECT_EQ(u.gait.name, GaitName::Bound);
}

TEST(Transition, TrotIsFinal) {
  TransitionState ts;
  ts.mode = GaitMode::Trot;
  ts.trot = GaitDef::trot(0.5);
  for (bool stall : {false, true}) {
    const auto u = update_transition(ts, stall, 9.0, GaitDef::bound(), GaitDef::trot(), kFront, {});
    EXPECT_EQ(u.state.mode, GaitMode::Trot);
    EXPECT_EQ(u.gait.name, GaitName::Trot);
    EXPECT_DOUBLE_EQ(u.gait.cycle_period, 0.5);
    EXPECT_TRUE(u.event.empty());
  }
}

// Drives the machine tick by tick with a stall at t_stall and returns the visited modes.
struct Trace {
  std::vector<GaitMode> modes;
  double stall = -1.0, start = -1.0, trot = -1.0;
  TransitionState last;
};

Trace drive(double t_stall, double dt, double contacts_at_extra = 0.0) {
  const GaitDef bound = GaitDef::bound(), trot = GaitDef::trot();
  TransitionConfig cfg;
  TransitionState ts;
  Trace tr;
  double held_since = -1.0;
  for (int k = 0; k * dt < 5.0; ++k) {
    const double t = k * dt;
    const GaitDef g = update_transition(ts, false, t, bound, trot, kAll, cfg).gait;
    ContactFlags contact = contact_state(g, t);
    if (g.name == GaitName::Stand && held_since < 0) held_since = t;
    if (held_since >= 0 && t < held_since + contacts_at_extra) contact = kFront;
    const auto u = update_transition(ts, t >= t_stall, t, bound, trot, contact, cfg);
    if (u.event.find("stall_detected") != std::string::npos) tr.stall = t;
    if (u.event.find("transition_start") != std::string::npos) tr.start = t;
    if (u.event.find("trot_start") != std::string::npos) tr.trot = t;
    ts = u.state;
    tr.modes.push_back(ts.mode);
  }
  tr.last = ts;
  return tr;
}

TEST(Transition, FullSequenceIsOneWay) {
  const Trace tr = drive(1.03, 0.01);
  for (size_t i = 1; i < tr.modes.size(); ++i) EXPECT_GE(static_cast<int>(tr.modes[i]), static_cast<int>(tr.modes[i - 1]));
  EXPECT_EQ(tr.modes.back(), GaitMode::Trot);
  EXPECT_NEAR(tr.stall, 1.03, 1e-9);
  // bound phase 0.575 at the stall: the hind stance runs until 1.2
  EXPECT_NEAR(tr.start, 1.2, 1e-9);
  EXPECT_NEAR(tr.trot - tr.start, TransitionConfig{}.dwell, 1e-9);
}

TEST(Transition, WaitsForAllFeetDown) {
  const Trace tr = drive(1.03, 0.01, 0.15);
  EXPECT_NEAR(tr.start, 1.35, 1e-9);
  EXPECT_NEAR(tr.trot, 1.55, 1e-9);
}

TEST(Transition, TrotLeadsWithLandingDiagonal) {
  // At 1.03 the hind pair is in stance, so LF is the next foot down.
  const Trace tr = drive(1.03, 0.01);
  EXPECT_EQ(tr.last.leading_leg, LF);
  const GaitDef& trot = tr.last.trot;
  const auto c = contact_state(trot, tr.trot);
  EXPECT_TRUE(c[LF]);
  EXPECT_TRUE(c[RH]);
  EXPECT_FALSE(c[RF]);
  EXPECT_FALSE(c[LH]);
  // Stalling one half cycle later flips the diagonal.
  const Trace other = drive(1.23, 0.01);
  EXPECT_EQ(other.last.leading_leg, LH);
  const auto c2 = contact_state(other.last.trot, other.trot);
  EXPECT_TRUE(c2[LH]);
  EXPECT_TRUE(c2[RF]);
  EXPECT_EQ(trot.phase_offsets[LF], trot.phase_offsets[RH]);
  EXPECT_EQ(trot.phase_offsets[RF], trot.phase_offsets[LH]);
}

TEST(Transition, StandHeldUntilTrot) {
  const GaitDef bound = GaitDef::bound(), trot = GaitDef::trot();
  TransitionState ts;
  ts = update_transition(ts, true, 1.03, bound, trot, kFront, {}).state;
  ASSERT_TRUE(ts.handoff_pending);
  // Before the stance ends the bound keeps running.
  EXPECT_EQ(update_transition(ts, true, 1.1, bound, trot, kFront, {}).gait.name, GaitName::Bound);
  const auto held = update_transition(ts, true, 1.2, bound, trot, kFront, {});
  EXPECT_EQ(held.gait.name, GaitName::Stand);
  EXPECT_EQ(held.state.mode, GaitMode::Bound);
  const auto go = update_transition(held.state, true, 1.21, bound, trot, kAll, {});
  EXPECT_EQ(go.state.mode, GaitMode::Transitioning);
  EXPECT_EQ(go.gait.name, GaitName::Stand);
}

TEST(SupportMargin, SquareCentroidIsHalfSide) {
  const std::vector<Vec3> sq{{0.2, 0.2, 0.0}, {0.2, -0.2, 0.0}, {-0.2, 0.2, 0.0}, {-0.2, -0.2, 0.0}};
  EXPECT_NEAR(support_margin(sq, Vec3(0.0, 0.0, 0.5)), 0.2, 1e-15);
  EXPECT_NEAR(support_margin(sq, Vec3(0.5, 0.0, 0.5)), -0.3, 1e-15);
  EXPECT_NEAR(support_margin(sq, Vec3(0.2, 0.0, 0.0)), 0.0, 1e-15);
}

TEST(SupportMargin, LineAndPoint) {
  const std::vector<Vec3> line{{0.3, 0.1, 0.0}, {-0.3, -0.1, 0.0}};
  EXPECT_NEAR(support_margin(line, Vec3(0.0, 0.0, 0.4)), 0.0, 1e-15);
  EXPECT_LT(support_margin(line, Vec3(0.0, 0.1, 0.4)), 0.0);
  EXPECT_NEAR(support_margin({Vec3(1.0, 1.0, 0.0)}, Vec3(1.0, 4.0, 0.0)), -3.0, 1e-15);
  EXPECT_THROW(support_margin({}, Vec3::Zero()), Error);
}

// Brute-force oracle: a point is inside if it lies left of every hull edge, where
// the hull edges are the point pairs with every other point on one side.
double brute_margin(const std::vector<Vec3>& feet, const Vec3& com) {
  const Eigen::Vector2d p = com.head<2>();
  double best = 1e300;
  bool inside = true;
  const size_t n = feet.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const Eigen::Vector2d a = feet[i].head<2>(), b = feet[j].head<2>();
      const auto side = [&](const Eigen::Vector2d& q) {
        return (b.x() - a.x()) * (q.y() - a.y()) - (b.y() - a.y()) * (q.x() - a.x());
      };
      bool edge = true;
      for (size_t k = 0; k < n; ++k)
        if (k != i && k != j && side(feet[k].head<2>()) < 0.0) edge = false;
      if (!edge) continue;
      const Eigen::Vector2d ab = b - a;
      const double s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
      best = std::min(best, (p - a - s * ab).norm());
      if (side(p) < 0.0) inside = false;
    }
  }
  return inside ? best : -best;
}

TEST(SupportMargin, MatchesBruteForce) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::uniform_int_distribution<int> count(3, 6);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<Vec3> feet(count(rng));
    for (Vec3& f : feet) f = Vec3(u(rng), u(rng), u(rng));
    const Vec3 com(u(rng), u(rng), 0.4);
    EXPECT_NEAR(support_margin(feet, com), brute_margin(feet, com), 1e-12) << "trial " << trial;
  }
}

}  // namespace
}  // namespace quadmpc
