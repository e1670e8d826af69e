#include "quadmpc/physics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace quadmpc {

namespace {

// Solves M qd = rhs with joints that would cross a limit during dt pinned to
// land exactly on it.
Vec3 solve_limited(const Mat3& m, const Vec3& rhs, const JointAngles& q, const JointLimits& lim, double dt) {
  const Vec3 qv = q.vec();
  std::array<bool, 3> locked{false, false, false};
  Vec3 qd = Vec3::Zero();
  for (int pass = 0; pass < 4; ++pass) {
    Vec3 r = rhs;
    for (int j = 0; j < 3; ++j)
      if (locked[j]) r -= m.col(j) * qd(j);
    std::array<int, 3> free{};
    int nf = 0;
    for (int j = 0; j < 3; ++j)
      if (!locked[j]) free[nf++] = j;
    if (nf > 0) {
      Eigen::MatrixXd mf(nf, nf);
      Eigen::VectorXd rf(nf);
      for (int a = 0; a < nf; ++a) {
        rf(a) = r(free[a]);
        for (int b = 0; b < nf; ++b) mf(a, b) = m(free[a], free[b]);
      }
      const Eigen::VectorXd sol = mf.ldlt().solve(rf);
      for (int a = 0; a < nf; ++a) qd(free[a]) = sol(a);
    }
    bool changed = false;
    for (int j = 0; j < 3; ++j) {
      if (locked[j]) continue;
      const double next = qv(j) + qd(j) * dt;
      if (next > lim.hi(j) || next < lim.lo(j)) {
        locked[j] = true;
        qd(j) = (std::clamp(next, lim.lo(j), lim.hi(j)) - qv(j)) / dt;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return qd;
}

}  // namespace

void PlantParams::validate() const {
  if (!(contact_stiffness > 0.0) || !(contact_damping >= 0.0)) throw ConfigError("contact parameters must be positive");
  if (!(actuator_damping > 0.0)) throw ConfigError("actuator damping must be positive");
  if (!(torque_limit > 0.0)) throw ConfigError("torque limit must be positive");
  if ((torso_half_extents.array() <= 0.0).any()) throw ConfigError("torso extents must be positive");
}

Vec3 foot_world(const SimState& sim, const Robot& robot, int leg) {
  return sim.body.position + rotation_from_euler(sim.body.euler) * foot_in_body(sim.q[leg], robot.legs[leg]);
}

PerLeg<Vec3> feet_world(const SimState& sim, const Robot& robot) {
  PerLeg<Vec3> f;
  for (int i = 0; i < kNumLegs; ++i) f[i] = foot_world(sim, robot, i);
  return f;
}

SimState physics_step(const SimState& sim, const PerLeg<Vec3>& torques, const WorldModel& world,
                      const Robot& robot, const PlantParams& plant, double dt) {
  if (!(dt > 0.0)) throw Error("physics step needs dt > 0");
  SimState next = sim;
  const RobotState& b = sim.body;
  const Mat3 rot = rotation_from_euler(b.euler);
  const double k = plant.contact_stiffness, c = k * dt + plant.contact_damping;
  const double damp = plant.actuator_damping;

  Vec3 force = Vec3(0.0, 0.0, -robot.body.mass * world.gravity) + world.disturbance_force(sim.t);
  Vec3 torque = Vec3::Zero();

  for (int i = 0; i < kNumLegs; ++i) {
    const LegConfig& leg = robot.legs[i];
    const Vec3 tau = torques[i].cwiseMax(-plant.torque_limit).cwiseMin(plant.torque_limit);
    const Mat3 jw = rot * leg.hip_to_body() * leg_jacobian(sim.q[i], leg);
    const Vec3 xf = b.position + rot * foot_in_body(sim.q[i], leg);
    Vec3 qd;
    Vec3 f = Vec3::Zero();
    if (sim.foot_contact[i]) {
      const Vec3 body_vel = b.velocity + b.omega.cross(xf - b.position);
      const Vec3 f0 = k * (sim.anchor[i] - xf) - c * body_vel;
      const Mat3 m = damp * Mat3::Identity() + c * jw.transpose() * jw;
      qd = solve_limited(m, tau + jw.transpose() * f0, sim.q[i], leg.limits, dt);
      f = f0 - c * jw * qd;
      const Vec3& n = sim.contact_normal[i];
      const double fn = f.dot(n);
      if (fn <= 0.0) {
        next.foot_contact[i] = false;
        f.setZero();
        qd = solve_limited(damp * Mat3::Identity(), tau, sim.q[i], leg.limits, dt);
      } else {
        const Vec3 ft = f - fn * n;
        const double lim = world.friction_mu * fn, mag = ft.norm();
        if (mag > lim) {
          const Vec3 ft_cone = ft * (lim / mag);
          next.anchor[i] -= (ft - ft_cone) / k;  // slip
          f = fn * n + ft_cone;
          qd = solve_limited(damp * Mat3::Identity(), tau + jw.transpose() * f, sim.q[i], leg.limits, dt);
        }
      }
    } else {
      qd = solve_limited(damp * Mat3::Identity(), tau, sim.q[i], leg.limits, dt);
    }
    next.qdot[i] = qd;
    next.q[i] = leg.limits.clamp(JointAngles::from(sim.q[i].vec() + qd * dt));
    next.contact_force[i] = f;
    force += f;
    torque += (xf - b.position).cross(f);
  }

  next.bumper_force.setZero();
  const Vec3& h = plant.torso_half_extents;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 r = rot * Vec3((corner & 1 ? 1 : -1) * h.x(), (corner & 2 ? 1 : -1) * h.y(), (corner & 4 ? 1 : -1) * h.z());
    const SurfaceQuery sq = closest_surface(world, b.position + r);
    if (sq.signed_distance >= 0.0) continue;
    const double vn = (b.velocity + b.omega.cross(r)).dot(sq.normal);
    const double mag = std::max(0.0, -plant.bumper_stiffness * sq.signed_distance - plant.bumper_damping * vn);
    const Vec3 f = mag * sq.normal;
    next.bumper_force += f;
    force += f;
    torque += r.cross(f);
  }

  const Vec3 acc = force / robot.body.mass;
  next.body.position = b.position + b.velocity * dt + 0.5 * acc * dt * dt;
  next.body.velocity = b.velocity + acc * dt;
  const Mat3 iw = rot * robot.body.inertia_body * rot.transpose();
  const Vec3 alpha = iw.ldlt().solve(torque - b.omega.cross(iw * b.omega));
  next.body.omega = b.omega + alpha * dt;
  next.body.euler = b.euler + euler_rate_matrix(b.euler) * next.body.omega * dt;
  next.body.gravity = world.gravity;
  next.t = sim.t + dt;

  const RobotState& nb = next.body;
  const bool finite = nb.position.allFinite() && nb.velocity.allFinite() && nb.omega.allFinite() && nb.euler.allFinite();
  if (!finite || nb.position.norm() > plant.max_position || nb.velocity.norm() > plant.max_velocity) {
    std::ostringstream msg;
    msg << "numerical blowup at t=" << next.t << ": position " << nb.position.transpose() << ", velocity "
        << nb.velocity.transpose();
    throw NumericalBlowup(msg.str());
  }

  for (int i = 0; i < kNumLegs; ++i) {
    if (next.foot_contact[i] || sim.foot_contact[i]) continue;
    const SurfaceQuery sq = closest_surface(world, foot_world(next, robot, i));
    if (sq.signed_distance < 0.0) {
      next.foot_contact[i] = true;
      next.anchor[i] = sq.point;
      next.contact_normal[i] = sq.normal;
    }
  }
  return next;
}

}  // namespace quadmpc
