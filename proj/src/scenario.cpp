#include "quadmpc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

namespace quadmpc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kToppleAngle = kPi / 3.0;

enum class GaitPlan { Stand, Trot, Bound, Transition };

struct ScenarioSetup {
  GaitPlan gait = GaitPlan::Stand;
  Terrain terrain;
  ReferenceMode ref = ReferenceMode::Constant;
  double duration = 5.0;
  double speed = 0.0;
  bool drop = false;
  bool disturbance = false;
};

ScenarioSetup make_setup(const ScenarioOptions& opt, const SimConfig& cfg) {
  ScenarioSetup s;
  const std::string& n = opt.scenario;
  const double incline = opt.incline_deg.value_or(cfg.incline_deg) * kPi / 180.0;
  if (n == "stand") {
  } else if (n == "trot_flat") {
    s = {GaitPlan::Trot, Terrain::flat(), ReferenceMode::Constant, 10.0, cfg.trot.speed};
  } else if (n == "bound_flat") {
    s = {GaitPlan::Bound, Terrain::flat(), ReferenceMode::Constant, 10.0, cfg.bound.speed};
  } else if (n == "incline") {
    s = {GaitPlan::Trot, Terrain::incline(incline), ReferenceMode::Ramp, 5.0, cfg.trot.speed};
  } else if (n == "uneven_sine") {
    s = {GaitPlan::Trot, Terrain::sine(cfg.sine_amplitude, cfg.sine_wavelength), ReferenceMode::Sine, 10.0,
         cfg.trot.speed};
  } else if (n == "disturbance") {
    s.duration = 10.0;
    s.disturbance = true;
  } else if (n == "drop") {
    s.duration = 3.0;
    s.drop = true;
  } else if (n == "transition") {
    s = {GaitPlan::Transition, Terrain::step(cfg.step_height, cfg.step_position), ReferenceMode::Constant, 8.0,
         cfg.bound.speed};
  } else {
    throw ConfigError("unknown scenario: " + n);
  }
  if (opt.duration) s.duration = *opt.duration;
  if (opt.ref_model) s.ref = *opt.ref_model;
  if (!(s.duration >= 0.0)) throw ConfigError("duration must be non-negative");
  return s;
}

// Least-squares plane through the last contact point of every leg.
class GroundEstimate {
 public:
  explicit GroundEstimate(const PerLeg<Vec3>& pts) : pts_(pts) { fit(); }

  void update(int leg, const Vec3& p) {
    pts_[leg] = p;
    fit();
  }
  double height(double x, double y) const { return c_(0) + c_(1) * x + c_(2) * y; }
  Vec3 normal() const { return Vec3(-c_(1), -c_(2), 1.0).normalized(); }

 private:
  void fit() {
    Eigen::Matrix<double, kNumLegs, 3> a;
    Eigen::Matrix<double, kNumLegs, 1> z;
    for (int i = 0; i < kNumLegs; ++i) {
      a.row(i) << 1.0, pts_[i].x(), pts_[i].y();
      z(i) = pts_[i].z();
    }
    const auto qr = a.colPivHouseholderQr();
    if (qr.rank() < 3) c_ = Vec3(z.mean(), 0.0, 0.0);
    else c_ = qr.solve(z);
  }

  PerLeg<Vec3> pts_;
  Vec3 c_ = Vec3::Zero();
};

enum class LegMode { Idle, Force, Reach, Swing };

// Latest command per leg; the servo turns it into torques every physics step.
struct LegCommand {
  LegMode mode = LegMode::Idle;
  Vec3 force = Vec3::Zero();   // ground reaction to hold while in contact
  Vec3 target = Vec3::Zero();  // reach point, or swing end
  Vec3 start = Vec3::Zero();   // swing start
  double t_lift = 0.0;
  SwingParams swing;
};

class Runner {
 public:
  Runner(const ScenarioOptions& opt, const SimConfig& cfg)
      : opt_(opt), cfg_(cfg), setup_(make_setup(opt, cfg)), mpc_cfg_(cfg.mpc),
        ground_(PerLeg<Vec3>{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()}) {
    if (opt.mpc_rate) mpc_cfg_.update_rate = *opt.mpc_rate;
    if (opt.horizon) mpc_cfg_.horizon_steps = *opt.horizon;
    mpc_cfg_.validate();
    world_.terrain = setup_.terrain;
    world_.friction_mu = cfg.friction_mu;
    world_.gravity = cfg.gravity;
    if (setup_.disturbance) {
      for (double t = cfg.disturbance_start; t < setup_.duration; t += cfg.disturbance_period)
        world_.disturbances.push_back({t, cfg.disturbance_duration, Vec3(0.0, opt.force, 0.0)});
    }
    world_.validate();
    trot_ = GaitDef::trot(cfg.trot.cycle_period, cfg.trot.duty_factor);
    bound_ = GaitDef::bound(cfg.bound.cycle_period, cfg.bound.duty_factor);
    trot_.validate();
    bound_.validate();
    if (!(opt.drop_height >= 0.0)) throw ConfigError("drop height must be non-negative");
    target_speed_ = setup_.speed;
  }

  ScenarioResult run();

 private:
  void init_state();
  GaitDef current_gait(double t);
  void control_tick();
  Vec3 foothold(int leg, double t_td) const;
  Vec3 deadbeat_torque(int leg, const Vec3& target_world) const;
  void servo();
  double margin_now() const;
  void add_event(const std::string& e) { pending_event_ += (pending_event_.empty() ? "" : ";") + e; }
  void finish_metrics();
  double tick_period() const { return 1.0 / mpc_cfg_.update_rate; }
  // Nominal foot position in the torso frame, ignoring height.
  Vec3 stance_offset(int leg) const {
    const LegConfig& l = cfg_.robot.legs[leg];
    return l.mount_offset + Vec3(0.0, l.mirror * cfg_.stance_width, 0.0);
  }

  const ScenarioOptions& opt_;
  const SimConfig& cfg_;
  ScenarioSetup setup_;
  MpcConfig mpc_cfg_;
  WorldModel world_;
  GaitDef trot_, bound_;
  GroundEstimate ground_;

  SimState sim_;
  PerLeg<Vec3> torques_{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  PerLeg<LegCommand> cmd_{};
  PerLeg<Vec3> swing_start_{};
  PerLeg<bool> swinging_{false, false, false, false};
  Vec3 anchor_ = Vec3::Zero();
  Vec3 start_position_ = Vec3::Zero();
  double target_speed_ = 0.0;
  bool engaged_ = true;
  GaitDef gait_ = GaitDef::stand();
  TransitionState transition_;
  std::deque<PositionSample> history_;
  std::string pending_event_;
  ScenarioResult result_;
  std::optional<MpcController> mpc_;
  std::vector<RobotState> pulse_pose_;
};

void Runner::init_state() {
  const Robot& robot = cfg_.robot;
  std::mt19937_64 rng(opt_.seed);
  std::uniform_real_distribution<double> jitter(-1e-3, 1e-3);
  RobotState& b = sim_.body;
  b.position = Vec3(jitter(rng), jitter(rng), 0.0);
  b.euler = Vec3(0.0, 0.0, jitter(rng));
  b.gravity = world_.gravity;
  b.position.z() = cfg_.nominal_height + terrain_height(world_, b.position.x(), b.position.y());
  const Mat3 rot = rotation_from_euler(b.euler);
  PerLeg<Vec3> ground_pts;
  for (int i = 0; i < kNumLegs; ++i) {
    const Vec3 hip = b.position + rot * stance_offset(i);
    Vec3 foot(hip.x(), hip.y(), terrain_height(world_, hip.x(), hip.y()));
    ground_pts[i] = foot;
    sim_.q[i] = inverse_kinematics(body_to_hip(rot.transpose() * (foot - b.position), robot.legs[i]), robot.legs[i]);
    const SurfaceQuery sq = closest_surface(world_, foot_world(sim_, robot, i));
    sim_.anchor[i] = sq.point;
    sim_.contact_normal[i] = sq.normal;
    sim_.foot_contact[i] = !setup_.drop;
  }
  ground_ = GroundEstimate(ground_pts);
  if (setup_.drop) {
    b.position.z() += opt_.drop_height;
    engaged_ = false;
  }
  anchor_ = b.position;
  start_position_ = b.position;
}

GaitDef Runner::current_gait(double t) {
  switch (setup_.gait) {
    case GaitPlan::Stand: return GaitDef::stand();
    case GaitPlan::Trot: return trot_;
    case GaitPlan::Bound: return bound_;
    case GaitPlan::Transition: break;
  }
  const bool armed = transition_.mode == GaitMode::Bound && !transition_.handoff_pending;
  const bool stall =
      armed && stall_detect(history_, cfg_.transition.stall_window, cfg_.transition.stall_threshold);
  const TransitionUpdate up =
      update_transition(transition_, stall, t, bound_, trot_, sim_.foot_contact, cfg_.transition);
  transition_ = up.state;
  if (!up.event.empty()) {
    add_event(up.event);
    if (up.event.find("stall_detected") != std::string::npos) {
      result_.metrics.stall_time = t;
      target_speed_ = 0.0;
      anchor_ = sim_.body.position;
    }
    if (up.event.find("transition_start") != std::string::npos) result_.metrics.transition_start = t;
    if (up.event.find("trot_start") != std::string::npos) result_.metrics.transition_time = t;
  }
  return up.gait;
}

Vec3 Runner::foothold(int leg, double t_td) const {
  const RobotState& b = sim_.body;
  const double t = sim_.t;
  const Vec3 v_des(target_speed_, 0.0, 0.0);
  const Vec3 hip = b.position + yaw_rotation(b.euler.z()) * stance_offset(leg) +
                   v_des * std::max(0.0, t_td - t);
  Vec3 offset = b.velocity * (0.5 * gait_.stance_duration()) + cfg_.raibert_gain * (b.velocity - v_des);
  offset.z() = 0.0;
  const double n = offset.norm();
  if (n > 0.15) offset *= 0.15 / n;
  Vec3 p = hip + offset;
  p.z() = ground_.height(p.x(), p.y());
  return p;
}

// Joint torque that closes the foot error to target_world over one control period,
// taking the first-order actuator into account.
Vec3 Runner::deadbeat_torque(int leg, const Vec3& target_world) const {
  const RobotState& b = sim_.body;
  const double period = tick_period();
  const Vec3 body_next = b.position + b.velocity * period;
  const Mat3 rot = rotation_from_euler(b.euler);
  const LegConfig& lc = cfg_.robot.legs[leg];
  SwingGains gains;
  gains.kp = Vec3::Constant(cfg_.plant.actuator_damping / period);
  gains.kd = Vec3::Zero();
  gains.torque_limit = cfg_.plant.torque_limit;
  return swing_torques(lc, sim_.q[leg], sim_.qdot[leg], body_to_hip(rot.transpose() * (target_world - body_next), lc),
                       gains)
      .torque;
}

void Runner::servo() {
  const Robot& robot = cfg_.robot;
  const Mat3 rot = rotation_from_euler(sim_.body.euler);
  const double lead = tick_period();
  for (int i = 0; i < kNumLegs; ++i) {
    LegCommand& c = cmd_[i];
    if (c.mode == LegMode::Force && !sim_.foot_contact[i]) {
      c.mode = LegMode::Reach;
      c.target = foot_world(sim_, robot, i) - 0.05 * sim_.contact_normal[i];
    }
    switch (c.mode) {
      case LegMode::Idle: torques_[i] = Vec3::Zero(); break;
      case LegMode::Force: {
        // The leg pushes on the ground with the opposite of the reaction force.
        const Vec3 f_hip = (rot * robot.legs[i].hip_to_body()).transpose() * (-c.force);
        torques_[i] = forces_to_torques(sim_.q[i], f_hip, robot.legs[i]);
        break;
      }
      case LegMode::Reach: torques_[i] = deadbeat_torque(i, c.target); break;
      case LegMode::Swing: {
        const double s = std::clamp((sim_.t + lead - c.t_lift) / c.swing.swing_duration, 0.0, 1.0);
        torques_[i] = deadbeat_torque(i, swing_target(s, c.start, c.target, c.swing));
        break;
      }
    }
  }
}

double Runner::margin_now() const {
  std::vector<Vec3> pts;
  for (int i = 0; i < kNumLegs; ++i)
    if (sim_.foot_contact[i]) pts.push_back(foot_world(sim_, cfg_.robot, i));
  if (pts.empty()) return kNaN;
  return support_margin(pts, sim_.body.position);
}

void Runner::control_tick() {
  const double t = sim_.t;
  const double period = tick_period();
  const int n = mpc_cfg_.horizon_steps;
  const Robot& robot = cfg_.robot;
  const PerLeg<Vec3> feet = feet_world(sim_, robot);
  for (int i = 0; i < kNumLegs; ++i)
    if (sim_.foot_contact[i]) ground_.update(i, sim_.anchor[i]);

  history_.push_back({t, sim_.body.position});
  while (!history_.empty() && history_.front().t < t - 2.0 * cfg_.transition.stall_window) history_.pop_front();

  TickRecord rec;
  rec.t = t;
  rec.body = sim_.body;
  rec.contact = sim_.foot_contact;
  for (auto& f : rec.force) f = Vec3::Zero();
  rec.support_margin = margin_now();

  if (!engaged_) {
    rec.gait_mode = "idle";
    rec.solver_status = "idle";
    rec.kkt_residual = kNaN;
    rec.solve_ms = kNaN;
    rec.event = pending_event_;
    pending_event_.clear();
    result_.log.push_back(rec);
    return;
  }

  gait_ = current_gait(t);
  rec.gait_mode = setup_.gait == GaitPlan::Transition ? to_string(transition_.mode) : to_string(gait_.name);
  const ContactSchedule schedule = horizon_schedule(gait_, t, n, period);

  // Lever-arm point per horizon step: current foot while the leg stays down,
  // otherwise the foothold of its next touchdown.
  PerLeg<Vec3> next_hold;
  for (int i = 0; i < kNumLegs; ++i) {
    double t_td = t;
    if (gait_.duty_factor < 1.0) t_td = t + (1.0 - gait_.phase(i, t)) * gait_.cycle_period;
    next_hold[i] = foothold(i, t_td);
  }
  std::vector<PerLeg<Vec3>> levers(n);
  for (int i = 0; i < kNumLegs; ++i) {
    bool down = schedule.flags[0][i];
    for (int k = 0; k < n; ++k) {
      down = down && schedule.flags[k][i];
      levers[k][i] = down ? feet[i] : next_hold[i];
    }
  }

  ReferenceParams rp;
  rp.target_height = cfg_.nominal_height;
  rp.amplitude = cfg_.sine_amplitude;
  rp.period = cfg_.sine_wavelength;
  rp.slope = std::tan(world_.terrain.kind == TerrainKind::Incline ? world_.terrain.angle
                                                                  : opt_.incline_deg.value_or(cfg_.incline_deg) * kPi / 180.0);
  rp.target_velocity = Vec3(target_speed_, 0.0, 0.0);
  rp.anchor = anchor_;
  const ReferenceTrajectory ref = generate_reference(setup_.ref, sim_.body, rp, n, period);

  const ControlOutput out = mpc_->control_step(sim_.body, levers, sim_.q, ref, schedule, ground_.normal());

  for (int i = 0; i < kNumLegs; ++i) {
    LegCommand& c = cmd_[i];
    if (schedule.flags[0][i]) {
      swinging_[i] = false;
      c.mode = sim_.foot_contact[i] ? LegMode::Force : LegMode::Reach;
      c.force = out.forces[i];
      c.target = feet[i] - Vec3(0.0, 0.0, 0.05);
      continue;
    }
    if (!swinging_[i]) {
      swinging_[i] = true;
      swing_start_[i] = feet[i];
    }
    const double ph = gait_.phase(i, t);
    c.mode = LegMode::Swing;
    c.t_lift = t - (ph - gait_.duty_factor) * gait_.cycle_period;
    c.swing.step_height = gait_.name == GaitName::Bound ? cfg_.bound.step_height : cfg_.trot.step_height;
    c.swing.swing_duration = gait_.swing_duration();
    c.start = swing_start_[i];
    c.target = next_hold[i] - Vec3(0.0, 0.0, cfg_.touchdown_depth);
  }

  rec.force = out.forces;
  rec.solver_status = to_string(out.status);
  rec.kkt_residual = out.kkt_residual;
  rec.solve_ms = opt_.timing ? out.solve_ms : kNaN;
  rec.event = pending_event_;
  pending_event_.clear();
  result_.log.push_back(rec);

  anchor_ += Vec3(target_speed_, 0.0, 0.0) * period;
}

ScenarioResult Runner::run() {
  result_.scenario = opt_.scenario;
  init_state();
  result_.world = world_;
  mpc_.emplace(mpc_cfg_, cfg_.robot.body, cfg_.robot.legs);
  const double dt = cfg_.dt_sim;
  const int steps_per_tick = static_cast<int>(std::ceil(tick_period() / dt - 1e-9));
  const long total = static_cast<long>(std::llround(setup_.duration / dt));
  int since_tick = 0;
  double tilt = 0.0;
  size_t next_pulse = 0;
  pulse_pose_.clear();

  try {
    for (long step = 0; step <= total; ++step) {
      if (!engaged_ && std::any_of(sim_.foot_contact.begin(), sim_.foot_contact.end(), [](bool c) { return c; })) {
        engaged_ = true;
        since_tick = 0;
        anchor_ = sim_.body.position;
        add_event("touchdown");
      }
      if (since_tick == 0) control_tick();
      if (step == total) break;
      if (next_pulse < world_.disturbances.size() && sim_.t >= world_.disturbances[next_pulse].t_start - 1e-12) {
        pulse_pose_.push_back(sim_.body);
        add_event("disturbance");
        ++next_pulse;
      }
      if (engaged_) servo();
      sim_ = physics_step(sim_, torques_, world_, cfg_.robot, cfg_.plant, dt);
      since_tick = (since_tick + 1) % steps_per_tick;
      tilt = std::max({tilt, std::abs(sim_.body.euler.x()), std::abs(sim_.body.euler.y())});
      if (std::abs(sim_.body.euler.x()) > kToppleAngle || std::abs(sim_.body.euler.y()) > kToppleAngle) {
        result_.outcome = Outcome::Toppled;
        result_.diagnostics = "torso tilt exceeded pi/3 at t=" + std::to_string(sim_.t);
        add_event("toppled");
        engaged_ = false;
        control_tick();
        break;
      }
    }
  } catch (const MpcInfeasible& e) {
    result_.outcome = Outcome::SolverFailed;
    result_.diagnostics = e.what();
  } catch (const NumericalBlowup& e) {
    result_.outcome = Outcome::SolverFailed;
    result_.diagnostics = e.what();
  } catch (const NearSingular& e) {
    result_.outcome = Outcome::SolverFailed;
    result_.diagnostics = e.what();
  }
  result_.metrics.max_tilt = tilt;
  finish_metrics();
  return std::move(result_);
}

void Runner::finish_metrics() {
  Metrics& m = result_.metrics;
  const auto& log = result_.log;
  double sq = 0.0, fz = 0.0;
  int nz = 0, nf = 0;
  m.min_transition_margin = std::numeric_limits<double>::infinity();
  for (const TickRecord& r : log) {
    const Vec3& p = r.body.position;
    const double e = p.z() - (cfg_.nominal_height + terrain_height(world_, p.x(), p.y()));
    sq += e * e;
    ++nz;
    if (r.solver_status != "idle") {
      double s = 0.0;
      for (const Vec3& f : r.force) s += f.z();
      fz += s;
      ++nf;
    }
    m.max_com_drift = std::max(m.max_com_drift, (p - start_position_).head<2>().norm());
    if (r.gait_mode == "transitioning") m.min_transition_margin = std::min(m.min_transition_margin, r.support_margin);
  }
  if (!std::isfinite(m.min_transition_margin)) m.min_transition_margin = kNaN;
  m.height_rms_error = nz ? std::sqrt(sq / nz) : 0.0;
  m.mean_total_fz = nf ? fz / nf : 0.0;
  if (!log.empty()) m.distance_traveled = (log.back().body.position - start_position_).head<2>().norm();

  // Recovery: first tick after the pulse from which the pose stays inside the
  // band around the pre-pulse pose for the hold time.
  const double band_pos = 0.02, band_ang = 2.0 * kPi / 180.0, hold = 0.5;
  for (size_t k = 0; k < pulse_pose_.size(); ++k) {
    const double t_end = world_.disturbances[k].t_start + world_.disturbances[k].duration;
    const RobotState& ref = pulse_pose_[k];
    auto in_band = [&](const TickRecord& r) {
      return (r.body.position - ref.position).norm() < band_pos && std::abs(r.body.euler.x() - ref.euler.x()) < band_ang &&
             std::abs(r.body.euler.y() - ref.euler.y()) < band_ang;
    };
    double rec = -1.0;
    for (size_t i = 0; i < log.size() && rec < 0.0; ++i) {
      if (log[i].t < t_end - 1e-9 || !in_band(log[i])) continue;
      size_t j = i;
      while (j < log.size() && log[j].t <= log[i].t + hold + 1e-9 && in_band(log[j])) ++j;
      const bool held = (j < log.size() && log[j].t > log[i].t + hold + 1e-9) ||
                        (j == log.size() && log.back().t >= log[i].t + hold - 1e-9);
      if (held) rec = log[i].t - t_end;
    }
    m.recovery_times.push_back(rec);
  }
  m.recovery_time = m.recovery_times.empty() ? -1.0 : m.recovery_times.front();
}

}  // namespace

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Completed: return "completed";
    case Outcome::Toppled: return "toppled";
    case Outcome::SolverFailed: return "solver_failed";
  }
  return "?";
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {"stand",       "trot_flat",   "bound_flat", "incline",
                                                 "uneven_sine", "disturbance", "drop",       "transition"};
  return names;
}

ScenarioResult run_scenario(const ScenarioOptions& options, const SimConfig& config) {
  config.validate();
  Runner runner(options, config);
  return runner.run();
}

}  // namespace quadmpc
