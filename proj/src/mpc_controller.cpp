#include "quadmpc/mpc_controller.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace quadmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ContactFrame {
  Vec3 n, t1, t2;
};

ContactFrame contact_frame(const Vec3& normal) {
  ContactFrame f;
  f.n = normal.normalized();
  Vec3 t = Vec3::UnitX() - f.n.x() * f.n;
  if (t.norm() < 1e-6) t = Vec3::UnitY() - f.n.y() * f.n;
  f.t1 = t.normalized();
  f.t2 = f.n.cross(f.t1);
  return f;
}

}  // namespace

StateVector MpcConfig::default_state_weights() {
  StateVector q;
  //   roll  pitch  yaw    x     y     z      wx   wy   wz   vx    vy    vz    g
  q << 2e4, 2e4, 5e3, 2e4, 2e4, 1e5, 50, 50, 50, 2e3, 2e3, 2e3, 0;
  return q;
}

void MpcConfig::validate() const {
  if (horizon_steps < 1) throw ConfigError("mpc horizon must be at least 1");
  if (!(update_rate > 0.0 && update_rate <= 30.0)) throw ConfigError("mpc update rate must be in (0, 30] Hz");
  if (!(friction_mu > 0.0)) throw ConfigError("friction coefficient must be positive");
  if (!(fz_min >= 0.0 && fz_min < fz_max)) throw ConfigError("need 0 <= fz_min < fz_max");
  if (!state_weights.allFinite() || (state_weights.array() < 0.0).any())
    throw ConfigError("state weights must be finite and non-negative");
  if (!force_weights.allFinite() || (force_weights.array() < 0.0).any())
    throw ConfigError("force weights must be finite and non-negative");
}

const char* to_string(ReferenceMode mode) {
  switch (mode) {
    case ReferenceMode::Constant: return "constant";
    case ReferenceMode::Sine: return "sine";
    case ReferenceMode::Ramp: return "ramp";
  }
  return "?";
}

ReferenceTrajectory generate_reference(ReferenceMode mode, const RobotState& current,
                                       const ReferenceParams& params, int n, double dt) {
  if (n < 1) throw Error("reference horizon must be at least 1");
  Eigen::Vector2d base = current.position.head<2>();
  if (params.anchor) {
    Eigen::Vector2d err = params.anchor->head<2>() - base;
    const double e = err.norm();
    if (e > params.max_position_error) err *= params.max_position_error / e;
    base += err;
  }
  const Eigen::Vector2d v = params.target_velocity.head<2>();
  const double wave = params.period > 0.0 ? 2.0 * kPi / params.period : 0.0;

  ReferenceTrajectory ref;
  ref.states.reserve(n);
  for (int k = 1; k <= n; ++k) {
    RobotState s;
    s.euler = Vec3(0.0, 0.0, params.target_yaw);
    s.position.head<2>() = base + v * (k * dt);
    const double x = s.position.x();
    double z = params.target_height, vz = 0.0;
    if (mode == ReferenceMode::Sine) {
      z += params.amplitude * std::sin(wave * x);
      vz = params.amplitude * wave * std::cos(wave * x) * v.x();
    } else if (mode == ReferenceMode::Ramp) {
      z += params.slope * x;
      vz = params.slope * v.x();
    }
    s.position.z() = z;
    s.velocity = Vec3(v.x(), v.y(), vz);
    s.gravity = current.gravity;
    ref.states.push_back(s);
  }
  return ref;
}

MpcProblem build_qp(const RobotState& state, const std::vector<DiscreteModel>& models,
                    const ReferenceTrajectory& ref, const ContactSchedule& schedule, const MpcConfig& cfg,
                    const Vec3& ground_normal) {
  const int n = schedule.size();
  if (n < 1) throw DimensionMismatch("contact schedule is empty");
  if (static_cast<int>(models.size()) != n || ref.size() != n)
    throw DimensionMismatch("schedule, model sequence and reference must share the horizon length");

  MpcProblem out;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < kNumLegs; ++i)
      if (schedule.flags[k][i]) {
        out.layout.step.push_back(k);
        out.layout.leg.push_back(i);
      }
  const int nf = out.layout.num_forces();
  const int nv = 3 * nf;

  QpProblem& qp = out.qp;
  qp.H = MatrixXd::Zero(nv, nv);
  qp.g = VectorXd::Zero(nv);
  for (int j = 0; j < nf; ++j) {
    const int leg = out.layout.leg[j];
    qp.H.diagonal().segment<3>(3 * j) = cfg.force_weights.segment<3>(3 * leg);
  }

  // x_{k+1} = X + G u, carried forward one step at a time.
  StateVector x_free = state.to_vector();
  MatrixXd g_mat = MatrixXd::Zero(kStateDim, nv);
  int first = 0;
  for (int k = 0; k < n; ++k) {
    const DiscreteModel& m = models[k];
    x_free = m.A * x_free;
    if (nv > 0) g_mat = m.A * g_mat;
    while (first < nf && out.layout.step[first] == k) {
      g_mat.middleCols<3>(3 * first) += m.B.middleCols<3>(3 * out.layout.leg[first]);
      ++first;
    }
    if (nv == 0) continue;
    const MatrixXd qg = cfg.state_weights.asDiagonal() * g_mat;
    qp.H.noalias() += g_mat.transpose() * qg;
    qp.g.noalias() += qg.transpose() * (x_free - ref.states[k].to_vector());
  }
  qp.H = 0.5 * (qp.H + qp.H.transpose());

  const ContactFrame fr = contact_frame(ground_normal);
  const double mu = cfg.friction_mu;
  qp.C = MatrixXd::Zero(5 * nf, nv);
  qp.lb.resize(5 * nf);
  qp.ub.resize(5 * nf);
  for (int j = 0; j < nf; ++j) {
    const int r = 5 * j;
    qp.C.block<1, 3>(r, 3 * j) = fr.n.transpose();
    qp.lb(r) = cfg.fz_min;
    qp.ub(r) = cfg.fz_max;
    const Vec3* tangents[2] = {&fr.t1, &fr.t2};
    for (int a = 0; a < 2; ++a) {
      const Vec3& t = *tangents[a];
      qp.C.block<1, 3>(r + 1 + 2 * a, 3 * j) = (t - mu * fr.n).transpose();
      qp.lb(r + 1 + 2 * a) = -kInf;
      qp.ub(r + 1 + 2 * a) = 0.0;
      qp.C.block<1, 3>(r + 2 + 2 * a, 3 * j) = (t + mu * fr.n).transpose();
      qp.lb(r + 2 + 2 * a) = 0.0;
      qp.ub(r + 2 + 2 * a) = kInf;
    }
  }
  return out;
}

ForcePlan extract_plan(const VectorXd& x, const ForceLayout& layout, int horizon, const MpcConfig& cfg,
                       const Vec3& ground_normal) {
  if (x.size() != 3 * layout.num_forces()) throw DimensionMismatch("solution does not match force layout");
  const ContactFrame fr = contact_frame(ground_normal);
  ForcePlan plan;
  plan.forces.assign(horizon, PerLeg<Vec3>{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()});
  for (int j = 0; j < layout.num_forces(); ++j) {
    const Vec3 f = x.segment<3>(3 * j);
    const double fn = std::clamp(fr.n.dot(f), cfg.fz_min, cfg.fz_max);
    const double lim = cfg.friction_mu * fn;
    const double f1 = std::clamp(fr.t1.dot(f), -lim, lim);
    const double f2 = std::clamp(fr.t2.dot(f), -lim, lim);
    plan.forces[layout.step[j]][layout.leg[j]] = fn * fr.n + f1 * fr.t1 + f2 * fr.t2;
  }
  return plan;
}

MpcController::MpcController(MpcConfig cfg, BodyParams body, PerLeg<LegConfig> legs)
    : cfg_(std::move(cfg)), body_(std::move(body)), legs_(std::move(legs)), solver_(cfg_.qp) {
  cfg_.validate();
  body_.validate();
  for (const LegConfig& l : legs_) l.validate();
}

ControlOutput MpcController::control_step(const RobotState& state, const PerLeg<Vec3>& foot_world,
                                          const PerLeg<JointAngles>& q, const ReferenceTrajectory& ref,
                                          const ContactSchedule& schedule, const Vec3& ground_normal) {
  return control_step(state, std::vector<PerLeg<Vec3>>(std::max(schedule.size(), 0), foot_world), q, ref, schedule,
                      ground_normal);
}

ControlOutput MpcController::control_step(const RobotState& state, const std::vector<PerLeg<Vec3>>& foot_plan,
                                          const PerLeg<JointAngles>& q, const ReferenceTrajectory& ref,
                                          const ContactSchedule& schedule, const Vec3& ground_normal) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = schedule.size();
  if (ref.size() != n || static_cast<int>(foot_plan.size()) != n)
    throw DimensionMismatch("reference, foot plan and schedule lengths differ");
  const double dt = cfg_.dt();

  std::vector<DiscreteModel> models;
  models.reserve(n);
  for (int k = 0; k < n; ++k) {
    RobotState about = state;
    // Lever arms about where the body is headed, not about the anchored setpoint.
    about.position.head<2>() += ref.states[k].velocity.head<2>() * (k * dt);
    models.push_back(discretize(build_continuous_model(about, foot_plan[k], body_), dt));
  }

  const MpcProblem prob = build_qp(state, models, ref, schedule, cfg_, ground_normal);
  const QpSolution sol = solver_.solve(prob.qp);
  if (sol.status == QpStatus::Infeasible) throw MpcInfeasible("force QP is infeasible");

  ControlOutput out;
  out.plan = extract_plan(sol.x, prob.layout, n, cfg_, ground_normal);
  out.forces = out.plan.forces[0];
  out.status = sol.status;
  out.iterations = sol.iterations;
  out.kkt_residual = sol.kkt_residual;

  const Mat3 rot = rotation_from_euler(state.euler);
  for (int i = 0; i < kNumLegs; ++i) {
    out.torques[i] = Vec3::Zero();
    if (!schedule.flags[0][i]) continue;
    // The leg pushes on the ground with the opposite of the reaction force.
    const Vec3 f_hip = (rot * legs_[i].hip_to_body()).transpose() * (-out.forces[i]);
    out.torques[i] = forces_to_torques(q[i], f_hip, legs_[i]);
  }
  out.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace quadmpc
