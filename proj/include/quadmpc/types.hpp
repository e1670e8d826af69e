#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace quadmpc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kNumLegs = 4;

// Leg order used everywhere: left front, right front, left hind, right hind.
enum class Leg : int { LF = 0, RF = 1, LH = 2, RH = 3 };

template <typename T>
using PerLeg = std::array<T, kNumLegs>;

inline constexpr std::array<const char*, kNumLegs> kLegNames = {"lf", "rf", "lh", "rh"};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kStandardGravity = 9.81;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace quadmpc
