#pragma once

#include <vector>

#include "quadmpc/types.hpp"

namespace quadmpc {

enum class TerrainKind { Flat, Incline, SineUneven, Step };

struct Terrain {
  TerrainKind kind = TerrainKind::Flat;
  double angle = 0.0;       // Incline, rad
  double amplitude = 0.0;   // SineUneven, m
  double wavelength = 2.0;  // SineUneven, m
  double height = 0.0;      // Step, m
  double position = 0.0;    // Step edge along x, m

  void validate() const;

  static Terrain flat() { return {}; }
  static Terrain incline(double angle);
  static Terrain sine(double amplitude, double wavelength);
  static Terrain step(double height, double position);
};

/// Rectangular force pulse applied at the centre of mass while t is in [t_start, t_start + duration).
struct DisturbanceEvent {
  double t_start = 0.0;
  double duration = 0.1;
  Vec3 force = Vec3::Zero();

  bool active(double t) const { return t >= t_start && t < t_start + duration; }
};

struct WorldModel {
  Terrain terrain;
  double friction_mu = 0.6;
  double gravity = kStandardGravity;
  std::vector<DisturbanceEvent> disturbances;

  void validate() const;
  Vec3 disturbance_force(double t) const;
};

double terrain_height(const WorldModel& world, double x, double y);
Vec3 terrain_normal(const WorldModel& world, double x, double y);

/// Nearest surface point to p. The signed distance is negative below the surface.
struct SurfaceQuery {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double signed_distance = 0.0;
};

SurfaceQuery closest_surface(const WorldModel& world, const Vec3& p);

}  // namespace quadmpc
