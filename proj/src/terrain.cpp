#include "quadmpc/terrain.hpp"

#include <algorithm>
#include <cmath>

namespace quadmpc {

Terrain Terrain::incline(double angle) {
  Terrain t;
  t.kind = TerrainKind::Incline;
  t.angle = angle;
  return t;
}

Terrain Terrain::sine(double amplitude, double wavelength) {
  Terrain t;
  t.kind = TerrainKind::SineUneven;
  t.amplitude = amplitude;
  t.wavelength = wavelength;
  return t;
}

Terrain Terrain::step(double height, double position) {
  Terrain t;
  t.kind = TerrainKind::Step;
  t.height = height;
  t.position = position;
  return t;
}

void Terrain::validate() const {
  if (kind == TerrainKind::Incline && !(angle >= 0.0 && angle <= kPi / 3.0))
    throw ConfigError("incline angle must be in [0, pi/3]");
  if (kind == TerrainKind::SineUneven && !(wavelength > 0.0)) throw ConfigError("sine wavelength must be positive");
  if (!std::isfinite(amplitude) || !std::isfinite(height) || !std::isfinite(position))
    throw ConfigError("terrain parameters must be finite");
}

void WorldModel::validate() const {
  terrain.validate();
  if (!(friction_mu > 0.0)) throw ConfigError("world friction must be positive");
  if (!(gravity >= 0.0)) throw ConfigError("gravity must be non-negative");
  for (const DisturbanceEvent& d : disturbances)
    if (!(d.duration > 0.0)) throw ConfigError("disturbance duration must be positive");
}

Vec3 WorldModel::disturbance_force(double t) const {
  Vec3 f = Vec3::Zero();
  for (const DisturbanceEvent& d : disturbances)
    if (d.active(t)) f += d.force;
  return f;
}

double terrain_height(const WorldModel& world, double x, double /*y*/) {
  const Terrain& t = world.terrain;
  switch (t.kind) {
    case TerrainKind::Flat: return 0.0;
    case TerrainKind::Incline: return x * std::tan(t.angle);
    case TerrainKind::SineUneven: return t.amplitude * std::sin(2.0 * kPi * x / t.wavelength);
    case TerrainKind::Step: return x < t.position ? 0.0 : t.height;
  }
  return 0.0;
}

Vec3 terrain_normal(const WorldModel& world, double x, double /*y*/) {
  const Terrain& t = world.terrain;
  switch (t.kind) {
    case TerrainKind::Flat:
    case TerrainKind::Step: return Vec3::UnitZ();
    case TerrainKind::Incline: return Vec3(-std::sin(t.angle), 0.0, std::cos(t.angle));
    case TerrainKind::SineUneven: {
      const double k = 2.0 * kPi / t.wavelength;
      return Vec3(-t.amplitude * k * std::cos(k * x), 0.0, 1.0).normalized();
    }
  }
  return Vec3::UnitZ();
}

namespace {

// Step profile in the x-z plane: floor, riser, top.
SurfaceQuery closest_on_step(const Terrain& t, const Vec3& p) {
  const double lo = std::min(0.0, t.height), hi = std::max(0.0, t.height);
  struct Cand {
    Vec3 point;
    Vec3 face_normal;
  };
  const Cand cands[3] = {
      {Vec3(std::min(p.x(), t.position), p.y(), 0.0), Vec3::UnitZ()},
      {Vec3(t.position, p.y(), std::clamp(p.z(), lo, hi)), t.height >= 0.0 ? Vec3(-Vec3::UnitX()) : Vec3(Vec3::UnitX())},
      {Vec3(std::max(p.x(), t.position), p.y(), t.height), Vec3::UnitZ()},
  };
  int best = 0;
  double best_d = (p - cands[0].point).norm();
  for (int i = 1; i < 3; ++i) {
    const double d = (p - cands[i].point).norm();
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  const bool inside = p.z() < (p.x() < t.position ? 0.0 : t.height);
  SurfaceQuery q;
  q.point = cands[best].point;
  q.signed_distance = inside ? -best_d : best_d;
  if (best_d > 1e-12) q.normal = (inside ? q.point - p : p - q.point) / best_d;
  else q.normal = cands[best].face_normal;
  return q;
}

}  // namespace

SurfaceQuery closest_surface(const WorldModel& world, const Vec3& p) {
  const Terrain& t = world.terrain;
  SurfaceQuery q;
  switch (t.kind) {
    case TerrainKind::Step: return closest_on_step(t, p);
    case TerrainKind::Flat:
    case TerrainKind::Incline:
    case TerrainKind::SineUneven: {
      // Exact for planes; first order in curvature for the sine.
      const Vec3 n = terrain_normal(world, p.x(), p.y());
      q.normal = n;
      q.signed_distance = (p.z() - terrain_height(world, p.x(), p.y())) * n.z();
      q.point = p - q.signed_distance * n;
      return q;
    }
  }
  return q;
}

}  // namespace quadmpc
