#include <cmath>

#include <gtest/gtest.h>

#include "quadmpc/physics.hpp"

namespace quadmpc {
namespace {

WorldModel world_with(const Terrain& t) {
  WorldModel w;
  w.terrain = t;
  return w;
}

TEST(Terrain, FlatEverywhere) {
  const WorldModel w;
  for (double x : {-3.0, 0.0, 2.5}) {
    EXPECT_EQ(terrain_height(w, x, 1.3), 0.0);
    EXPECT_TRUE(terrain_normal(w, x, -0.4).isApprox(Vec3::UnitZ()));
  }
}

TEST(Terrain, InclineRamp) {
  const WorldModel w = world_with(Terrain::incline(20.0 * kPi / 180.0));
  EXPECT_NEAR(terrain_height(w, 1.0, 0.0), std::tan(20.0 * kPi / 180.0), 1e-15);
  EXPECT_NEAR(terrain_height(w, 1.0, 0.0), 0.364, 1e-3);
  const Vec3 n = terrain_normal(w, 0.5, 0.0);
  EXPECT_NEAR(n.norm(), 1.0, 1e-15);
  EXPECT_NEAR(std::acos(n.z()), 20.0 * kPi / 180.0, 1e-12);
  // normal is perpendicular to the slope direction
  EXPECT_NEAR(n.dot(Vec3(1.0, 0.0, std::tan(20.0 * kPi / 180.0))), 0.0, 1e-15);
}

TEST(Terrain, SineMaximumBySampling) {
  const double a = 0.05, lambda = 2.0;
  const WorldModel w = world_with(Terrain::sine(a, lambda));
  double best = -1.0;
  const int n = 400001;
  for (int i = 0; i < n; ++i) best = std::max(best, terrain_height(w, -2.0 + 4.0 * i / (n - 1), 0.0));
  EXPECT_NEAR(best, a, 1e-9);
  EXPECT_NEAR(terrain_height(w, lambda / 4.0, 0.0), a, 1e-15);
}

TEST(Terrain, SineNormalMatchesSlope) {
  const WorldModel w = world_with(Terrain::sine(0.05, 2.0));
  const double h = 1e-6;
  for (double x : {0.0, 0.3, 1.1, 1.7}) {
    const double slope = (terrain_height(w, x + h, 0.0) - terrain_height(w, x - h, 0.0)) / (2.0 * h);
    const Vec3 n = terrain_normal(w, x, 0.0);
    EXPECT_NEAR(n.dot(Vec3(1.0, 0.0, slope)), 0.0, 1e-8);
    EXPECT_NEAR(n.norm(), 1.0, 1e-15);
  }
}

TEST(Terrain, StepHeights) {
  const WorldModel w = world_with(Terrain::step(0.1, 1.0));
  EXPECT_EQ(terrain_height(w, 0.99, 0.0), 0.0);
  EXPECT_EQ(terrain_height(w, 1.01, 0.0), 0.1);
}

TEST(Terrain, Validation) {
  EXPECT_THROW(Terrain::incline(1.1).validate(), ConfigError);
  EXPECT_THROW(Terrain::sine(0.05, 0.0).validate(), ConfigError);
  WorldModel w;
  w.friction_mu = 0.0;
  EXPECT_THROW(w.validate(), ConfigError);
  w = WorldModel{};
  w.disturbances.push_back({0.0, 0.0, Vec3::UnitY()});
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(ClosestSurface, PlaneDistances) {
  const double th = 0.3;
  const WorldModel w = world_with(Terrain::incline(th));
  const Vec3 p(0.7, 0.2, 1.0);
  const SurfaceQuery q = closest_surface(w, p);
  EXPECT_NEAR(q.signed_distance, (p.z() - p.x() * std::tan(th)) * std::cos(th), 1e-14);
  EXPECT_NEAR(q.point.z(), terrain_height(w, q.point.x(), 0.0), 1e-14);
  EXPECT_LT(closest_surface(w, Vec3(1.0, 0.0, 0.0)).signed_distance, 0.0);
}

TEST(ClosestSurface, StepRiser) {
  const WorldModel w = world_with(Terrain::step(0.2, 1.0));
  const SurfaceQuery q = closest_surface(w, Vec3(0.95, 0.0, 0.1));
  EXPECT_NEAR(q.signed_distance, 0.05, 1e-14);
  EXPECT_TRUE(q.normal.isApprox(-Vec3::UnitX()));
  const SurfaceQuery top = closest_surface(w, Vec3(1.5, 0.0, 0.25));
  EXPECT_NEAR(top.signed_distance, 0.05, 1e-14);
  EXPECT_LT(closest_surface(w, Vec3(1.05, 0.0, 0.1)).signed_distance, 0.0);
}

TEST(Disturbance, ActiveOnHalfOpenInterval) {
  WorldModel w;
  w.disturbances.push_back({1.0, 0.1, Vec3(0.0, 50.0, 0.0)});
  w.disturbances.push_back({1.05, 0.1, Vec3(0.0, 25.0, 0.0)});
  EXPECT_TRUE(w.disturbance_force(0.999).isZero());
  EXPECT_NEAR(w.disturbance_force(1.0).y(), 50.0, 0.0);
  EXPECT_NEAR(w.disturbance_force(1.07).y(), 75.0, 0.0);
  EXPECT_NEAR(w.disturbance_force(1.1).y(), 25.0, 0.0);
  EXPECT_TRUE(w.disturbance_force(1.16).isZero());
}

Robot robot() { return Robot{BodyParams{}, default_legs()}; }

// Feet 0.45 m straight under the hips, body at rest at height h.
SimState standing_pose(const Robot& r, double h) {
  SimState s;
  s.body.position = Vec3(0.0, 0.0, h);
  for (int i = 0; i < kNumLegs; ++i) {
    const Vec3 foot_body = r.legs[i].mount_offset - Vec3(0.0, 0.0, 0.45);
    s.q[i] = inverse_kinematics(body_to_hip(foot_body, r.legs[i]), r.legs[i]);
  }
  return s;
}

PerLeg<Vec3> zero_torques() { return {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()}; }

TEST(Physics, FreeFallOneStep) {
  const Robot r = robot();
  SimState s = standing_pose(r, 2.0);
  s.body.velocity = Vec3(0.3, -0.1, 0.5);
  const double dt = 1e-3;
  const SimState n = physics_step(s, zero_torques(), WorldModel{}, r, PlantParams{}, dt);
  EXPECT_NEAR(n.body.velocity.z(), 0.5 - kStandardGravity * dt, 1e-12);
  EXPECT_NEAR(n.body.velocity.x(), 0.3, 1e-15);
  EXPECT_NEAR(n.t, dt, 0.0);
  for (int i = 0; i < kNumLegs; ++i) {
    EXPECT_FALSE(n.foot_contact[i]);
    EXPECT_TRUE(n.contact_force[i].isZero());
  }
}

TEST(Physics, FreeFallConservesEnergy) {
  const Robot r = robot();
  SimState s = standing_pose(r, 5.0);
  s.body.velocity = Vec3(0.2, 0.0, 1.0);
  const double m = r.body.mass, g = kStandardGravity;
  const auto energy = [&](const SimState& x) { return 0.5 * m * x.body.velocity.squaredNorm() + m * g * x.body.position.z(); };
  const double e0 = energy(s);
  const double dt = 1e-3;
  for (int k = 0; k < 800; ++k) s = physics_step(s, zero_torques(), WorldModel{}, r, PlantParams{}, dt);
  ASSERT_FALSE(s.foot_contact[0]);
  // 0.1% per simulated second
  EXPECT_LT(std::abs(energy(s) - e0), 1e-3 * std::abs(e0) * 0.8);
}

// Anchors preloaded so each spring carries a quarter of the weight, with joint
// torques that statically hold the legs. The plant should then stay put.
TEST(Physics, SpringEquilibriumHoldsStill) {
  const Robot r = robot();
  const PlantParams plant;
  const WorldModel w;
  const double h = 0.45;
  SimState s = standing_pose(r, h);
  const double quarter = r.body.mass * w.gravity / 4.0;
  PerLeg<Vec3> tau;
  for (int i = 0; i < kNumLegs; ++i) {
    const Vec3 foot = foot_world(s, r, i);
    s.foot_contact[i] = true;
    s.anchor[i] = foot + Vec3(0.0, 0.0, quarter / plant.contact_stiffness);
    s.contact_normal[i] = Vec3::UnitZ();
    const Mat3 jw = r.legs[i].hip_to_body() * leg_jacobian(s.q[i], r.legs[i]);
    tau[i] = -jw.transpose() * Vec3(0.0, 0.0, quarter);
  }
  const double dt = 1e-3;
  for (int k = 0; k < 100; ++k) {
    const SimState n = physics_step(s, tau, w, r, plant, dt);
    const Vec3 acc = (n.body.velocity - s.body.velocity) / dt;
    ASSERT_LT(acc.norm(), 1e-3) << "step " << k;
    ASSERT_LT(((n.body.omega - s.body.omega) / dt).norm(), 1e-3);
    s = n;
  }
  EXPECT_LT((s.body.position - Vec3(0.0, 0.0, h)).norm(), 1e-6);
}

TEST(Physics, TangentialForceClampedToCone) {
  const Robot r = robot();
  const PlantParams plant;
  WorldModel w;
  w.friction_mu = 0.4;
  SimState s = standing_pose(r, 0.45);
  const double quarter = r.body.mass * w.gravity / 4.0;
  for (int i = 0; i < kNumLegs; ++i) {
    s.foot_contact[i] = true;
    // far-off anchor demands a tangential force many times mu * fz
    s.anchor[i] = foot_world(s, r, i) + Vec3(0.05, 0.02, quarter / plant.contact_stiffness);
    s.contact_normal[i] = Vec3::UnitZ();
  }
  const SimState n = physics_step(s, zero_torques(), w, r, plant, 1e-3);
  int clamped = 0;
  for (int i = 0; i < kNumLegs; ++i) {
    if (!n.foot_contact[i]) continue;
    const Vec3& f = n.contact_force[i];
    const double ft = f.head<2>().norm();
    EXPECT_GT(f.z(), 0.0);
    EXPECT_LE(ft, w.friction_mu * f.z() * (1.0 + 1e-12));
    if (std::abs(ft - w.friction_mu * f.z()) < 1e-9 * f.z()) {
      ++clamped;
      EXPECT_NE(n.anchor[i], s.anchor[i]);  // foot slipped
    }
  }
  EXPECT_GT(clamped, 0);
}

TEST(Physics, ContactForcesConsistent) {
  const Robot r = robot();
  const PlantParams plant;
  const WorldModel w = world_with(Terrain::sine(0.05, 2.0));
  SimState s = standing_pose(r, 0.8);
  s.body.velocity = Vec3(0.3, 0.1, 0.0);
  // crude stiff hold so the legs push back on landing
  const double dt = 1e-3;
  int touched = 0;
  PerLeg<JointAngles> q0 = s.q;
  for (int k = 0; k < 1500; ++k) {
    PerLeg<Vec3> tau;
    for (int i = 0; i < kNumLegs; ++i) tau[i] = 200.0 * (q0[i].vec() - s.q[i].vec());
    const SimState n = physics_step(s, tau, w, r, plant, dt);
    for (int i = 0; i < kNumLegs; ++i) {
      if (!s.foot_contact[i]) {
        EXPECT_TRUE(n.contact_force[i].isZero()) << "step " << k << " leg " << i;
      } else {
        EXPECT_GE(n.contact_force[i].dot(s.contact_normal[i]), 0.0);
        touched += !n.contact_force[i].isZero();
      }
    }
    s = n;
  }
  EXPECT_GT(touched, 0);
}

TEST(Physics, TorquesSaturate) {
  const Robot r = robot();
  PlantParams plant;
  plant.torque_limit = 10.0;
  SimState s = standing_pose(r, 3.0);
  PerLeg<Vec3> big;
  for (auto& t : big) t = Vec3(0.0, 0.0, 500.0);
  PerLeg<Vec3> lim;
  for (auto& t : lim) t = Vec3(0.0, 0.0, 10.0);
  const SimState a = physics_step(s, big, WorldModel{}, r, plant, 1e-3);
  const SimState b = physics_step(s, lim, WorldModel{}, r, plant, 1e-3);
  for (int i = 0; i < kNumLegs; ++i) EXPECT_EQ(a.q[i].vec(), b.q[i].vec());
  EXPECT_NEAR(a.qdot[0](2), 10.0 / plant.actuator_damping, 1e-12);
}

TEST(Physics, BlowupIsReported) {
  const Robot r = robot();
  SimState s = standing_pose(r, 2.0);
  s.body.velocity = Vec3(0.0, 0.0, 60.0);
  EXPECT_THROW(physics_step(s, zero_torques(), WorldModel{}, r, PlantParams{}, 1e-3), NumericalBlowup);
  s.body.velocity = Vec3(std::nan(""), 0.0, 0.0);
  EXPECT_THROW(physics_step(s, zero_torques(), WorldModel{}, r, PlantParams{}, 1e-3), NumericalBlowup);
  EXPECT_THROW(physics_step(standing_pose(r, 2.0), zero_torques(), WorldModel{}, r, PlantParams{}, 0.0), Error);
}

TEST(Physics, TouchdownAnchorsOnSurface) {
  const Robot r = robot();
  SimState s = standing_pose(r, 0.46);
  s.body.velocity = Vec3(0.0, 0.0, -0.5);
  const WorldModel w;
  for (int k = 0; k < 40 && !s.foot_contact[0]; ++k) s = physics_step(s, zero_torques(), w, r, PlantParams{}, 1e-3);
  ASSERT_TRUE(s.foot_contact[0]);
  EXPECT_NEAR(s.anchor[0].z(), 0.0, 1e-15);
  EXPECT_NEAR(s.anchor[0].x(), foot_world(s, r, 0).x(), 1e-9);
}

}  // namespace
}  // namespace quadmpc
