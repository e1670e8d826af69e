#pragma once

#include "quadmpc/types.hpp"

namespace quadmpc {

inline constexpr int kStateDim = 13;
inline constexpr int kInputDim = 12;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using InputVector = Eigen::Matrix<double, kInputDim, 1>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMatrix = Eigen::Matrix<double, kStateDim, kInputDim>;

// Offsets of each block inside the stacked state vector.
namespace state_index {
inline constexpr int kEuler = 0;
inline constexpr int kPosition = 3;
inline constexpr int kOmega = 6;
inline constexpr int kVelocity = 9;
inline constexpr int kGravity = 12;
}  // namespace state_index

/// Single-rigid-body torso state. `omega` is the world-frame angular velocity;
/// `euler` holds ZYX roll, pitch, yaw.
struct RobotState {
  Vec3 euler = Vec3::Zero();
  Vec3 position = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double gravity = kStandardGravity;

  StateVector to_vector() const;
  static RobotState from_vector(const StateVector& x);
};

struct BodyParams {
  double mass = 30.0;
  Mat3 inertia_body = Eigen::Vector3d(0.4, 1.0, 1.1).asDiagonal();
  double leg_mass_fraction = 0.0;

  void validate() const;
};

struct ContinuousModel {
  StateMatrix A = StateMatrix::Zero();
  InputMatrix B = InputMatrix::Zero();

  StateVector derivative(const StateVector& x, const InputVector& u) const { return A * x + B * u; }
};

struct DiscreteModel {
  StateMatrix A = StateMatrix::Identity();
  InputMatrix B = InputMatrix::Zero();
  double dt = 0.0;
};

class NearSingular : public Error {
 public:
  using Error::Error;
};

class SingularInertia : public Error {
 public:
  using Error::Error;
};

/// Maps world-frame angular velocity to ZYX Euler-angle rates.
/// Throws NearSingular when |cos(pitch)| < 1e-6.
Mat3 euler_rate_matrix(const Vec3& euler);

/// Cross-product matrix: skew(r) * x == r.cross(x).
Mat3 skew(const Vec3& r);

Mat3 yaw_rotation(double yaw);

/// Body-to-world rotation for ZYX Euler angles.
Mat3 rotation_from_euler(const Vec3& euler);

/// Inertia rotated by yaw only: Rz * I_body * Rz^T.
Mat3 world_inertia(const BodyParams& params, double yaw);

/// Linear torso model about the current yaw.
///
/// Input ordering is (f_LF, f_RF, f_LH, f_RH), each a world-frame ground
/// reaction force. The gravity state enters the vertical velocity rate with a
/// negative sign, so a positive gravity state means free fall along -z.
ContinuousModel build_continuous_model(const RobotState& state, const PerLeg<Vec3>& foot_world,
                                       const BodyParams& params);

/// Exact zero-order-hold discretization.
DiscreteModel discretize(const ContinuousModel& model, double dt);

}  // namespace quadmpc
