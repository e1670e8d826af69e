#include "quadmpc/dynamics_model.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace quadmpc {

using namespace state_index;

StateVector RobotState::to_vector() const {
  StateVector x;
  x << euler, position, omega, velocity, gravity;
  return x;
}

RobotState RobotState::from_vector(const StateVector& x) {
  RobotState s;
  s.euler = x.segment<3>(kEuler);
  s.position = x.segment<3>(kPosition);
  s.omega = x.segment<3>(kOmega);
  s.velocity = x.segment<3>(kVelocity);
  s.gravity = x(kGravity);
  return s;
}

void BodyParams::validate() const {
  if (!(mass > 0.0)) throw ConfigError("body mass must be positive");
  if ((inertia_body - inertia_body.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw ConfigError("body inertia must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia_body, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) throw ConfigError("body inertia must be positive definite");
  if (leg_mass_fraction < 0.0 || leg_mass_fraction >= 0.1)
    throw ConfigError("single-rigid-body model requires leg mass fraction below 10%");
}

Mat3 euler_rate_matrix(const Vec3& euler) {
  const double pitch = euler.y(), yaw = euler.z();
  const double cp = std::cos(pitch);
  if (std::abs(cp) < 1e-6) throw NearSingular("Euler-rate map singular at |pitch| = pi/2");
  const double tp = std::tan(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  Mat3 e;
  e << cy / cp, sy / cp, 0.0,
       -sy, cy, 0.0,
       cy * tp, sy * tp, 1.0;
  return e;
}

Mat3 skew(const Vec3& r) {
  Mat3 s;
  s << 0.0, -r.z(), r.y(),
       r.z(), 0.0, -r.x(),
       -r.y(), r.x(), 0.0;
  return s;
}

Mat3 yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

Mat3 rotation_from_euler(const Vec3& euler) {
  return (Eigen::AngleAxisd(euler.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(euler.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(euler.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

Mat3 world_inertia(const BodyParams& params, double yaw) {
  const Mat3 rz = yaw_rotation(yaw);
  return rz * params.inertia_body * rz.transpose();
}

ContinuousModel build_continuous_model(const RobotState& state, const PerLeg<Vec3>& foot_world,
                                       const BodyParams& params) {
  const Mat3 inertia = world_inertia(params, state.euler.z());
  Eigen::FullPivLU<Mat3> lu(inertia);
  if (!lu.isInvertible()) throw SingularInertia("world inertia is not invertible");
  const Mat3 inertia_inv = lu.inverse();

  ContinuousModel m;
  // Small roll/pitch: Euler rates ~= Rz(yaw)^T * omega_world.
  m.A.block<3, 3>(kEuler, kOmega) = yaw_rotation(state.euler.z()).transpose();
  m.A.block<3, 3>(kPosition, kVelocity).setIdentity();
  m.A(kVelocity + 2, kGravity) = -1.0;

  for (int i = 0; i < kNumLegs; ++i) {
    if (!foot_world[i].allFinite()) throw DimensionMismatch("foot position is not finite");
    const Vec3 r = foot_world[i] - state.position;
    m.B.block<3, 3>(kOmega, 3 * i) = inertia_inv * skew(r);
    m.B.block<3, 3>(kVelocity, 3 * i) = Mat3::Identity() / params.mass;
  }
  return m;
}

DiscreteModel discretize(const ContinuousModel& model, double dt) {
  if (!(dt > 0.0)) throw Error("discretization step must be positive");
  constexpr int n = kStateDim + kInputDim;
  // exp([[A, B], [0, 0]] dt) = [[Ad, Bd], [0, I]]
  Eigen::Matrix<double, n, n> m = Eigen::Matrix<double, n, n>::Zero();
  m.topLeftCorner<kStateDim, kStateDim>() = model.A * dt;
  m.topRightCorner<kStateDim, kInputDim>() = model.B * dt;
  const Eigen::Matrix<double, n, n> phi = m.exp();

  DiscreteModel d;
  d.A = phi.topLeftCorner<kStateDim, kStateDim>();
  d.B = phi.topRightCorner<kStateDim, kInputDim>();
  d.dt = dt;
  return d;
}

}  // namespace quadmpc
