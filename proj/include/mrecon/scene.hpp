#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "mrecon/camera.hpp"
#include "mrecon/kinematics.hpp"
#include "mrecon/masked_points.hpp"
#include "mrecon/random.hpp"
#include "mrecon/transforms.hpp"

namespace mrecon {

// World frame: robot base at the origin, z up, table top at z = table.height.

struct TablePlane {
  double height = 0.0;
  double x_min = -0.5, x_max = 1.2;
  double y_min = -0.8, y_max = 0.8;
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.05;
};

/// Box given by its pose (box frame -> world) and half extents.
struct Box {
  RigidTransform pose;
  Vec3 half_extents = Vec3::Constant(0.05);
};

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.04;
};

struct SceneSpec {
  TablePlane table;
  std::vector<Sphere> spheres;
  std::vector<Box> boxes;
  std::string chain_file = "chain.json";
  JointState joints;
  int views = 2;
  std::uint64_t seed = 0;
};

/// Resolved geometry ready for ray casting.
struct SceneGeometry {
  TablePlane table;
  std::vector<Sphere> spheres;
  std::vector<Box> boxes;
  std::vector<Capsule> capsules;
};

/// Robot links as capsules between consecutive distinct link origins.
inline std::vector<Capsule> chain_capsules(const KinematicChain& chain, const JointState& q) {
  const auto poses = forward_kinematics(chain, q);
  std::vector<Capsule> out;
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const Vec3 a = poses[i - 1].translation;
    const Vec3 b = poses[i].translation;
    if ((b - a).norm() < 1e-9) continue;
    out.push_back({a, b, chain.link_radius()});
  }
  return out;
}

inline SceneGeometry resolve_geometry(const SceneSpec& spec, const KinematicChain& chain) {
  return {spec.table, spec.spheres, spec.boxes, chain_capsules(chain, spec.joints)};
}

struct Hit {
  double distance = std::numeric_limits<double>::infinity();  ///< along the unit ray
  Part part = Part::Invalid;
};

namespace ray {

inline constexpr double kMinDistance = 1e-9;

// Ray-primitive intersections along a unit direction; nullopt on a miss.

inline std::optional<double> plane(const TablePlane& t, const Vec3& o, const Vec3& d) {
  if (d.z() == 0.0) return std::nullopt;
  const double s = (t.height - o.z()) / d.z();
  if (!(s > kMinDistance)) return std::nullopt;
  const Vec3 p = o + s * d;
  if (p.x() < t.x_min || p.x() > t.x_max || p.y() < t.y_min || p.y() > t.y_max) return std::nullopt;
  return s;
}

/// Nearest positive root of |o + s d - c|^2 = r^2 with the numerically stable
/// quadratic formula.
inline std::optional<double> sphere(const Vec3& center, double radius, const Vec3& o, const Vec3& d) {
  const Vec3 oc = o - center;
  const double b = d.dot(oc);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double q = -(b + std::copysign(std::sqrt(disc), b));
  double s0 = q, s1 = q != 0.0 ? c / q : q;
  if (s0 > s1) std::swap(s0, s1);
  if (s0 > kMinDistance) return s0;
  if (s1 > kMinDistance) return s1;
  return std::nullopt;
}

/// Slab test in the box frame.
inline std::optional<double> box(const Box& bx, const Vec3& o, const Vec3& d) {
  const RigidTransform inv = invert(bx.pose);
  const Vec3 lo = inv.apply(o);
  const Vec3 ld = inv.rotation * d;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (ld(k) == 0.0) {
      if (std::abs(lo(k)) > bx.half_extents(k)) return std::nullopt;
      continue;
    }
    double t0 = (-bx.half_extents(k) - lo(k)) / ld(k);
    double t1 = (bx.half_extents(k) - lo(k)) / ld(k);
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far) return std::nullopt;
  if (t_near > kMinDistance) return t_near;
  if (t_far > kMinDistance) return t_far;
  return std::nullopt;
}

/// Cylinder body with clamped axial parameter, then hemispherical caps.
inline std::optional<double> capsule(const Capsule& cap, const Vec3& o, const Vec3& d) {
  const Vec3 ba = cap.b - cap.a;
  const Vec3 oa = o - cap.a;
  const double baba = ba.dot(ba);
  const double bard = ba.dot(d);
  const double baoa = ba.dot(oa);
  const double rdoa = d.dot(oa);
  const double oaoa = oa.dot(oa);
  const double qa = baba - bard * bard;
  std::optional<double> best;
  if (qa > 1e-12 * baba) {
    const double qb = baba * rdoa - baoa * bard;
    const double qc = baba * oaoa - baoa * baoa - cap.radius * cap.radius * baba;
    const double h = qb * qb - qa * qc;
    if (h >= 0.0) {
      const double s = (-qb - std::sqrt(h)) / qa;
      const double y = baoa + s * bard;
      if (s > kMinDistance && y > 0.0 && y < baba) best = s;
    }
  }
  for (const Vec3& end : {cap.a, cap.b}) {
    if (auto s = sphere(end, cap.radius, o, d); s && (!best || *s < *best)) best = s;
  }
  return best;
}

}  // namespace ray

/// Nearest intersection of a unit-direction ray with the scene.
inline Hit cast_ray(const SceneGeometry& g, const Vec3& origin, const Vec3& dir) {
  Hit hit;
  auto consider = [&](std::optional<double> s, Part part) {
    if (s && *s < hit.distance) {
      hit.distance = *s;
      hit.part = part;
    }
  };
  consider(ray::plane(g.table, origin, dir), Part::Background);
  for (const auto& s : g.spheres) consider(ray::sphere(s.center, s.radius, origin, dir), Part::Object);
  for (const auto& b : g.boxes) consider(ray::box(b, origin, dir), Part::Object);
  for (const auto& c : g.capsules) consider(ray::capsule(c, origin, dir), Part::Robot);
  return hit;
}

// Unsigned distance from a point to each surface, for consistency checks.

inline double distance_to_table(const TablePlane& t, const Vec3& p) {
  const double dx = std::max({t.x_min - p.x(), 0.0, p.x() - t.x_max});
  const double dy = std::max({t.y_min - p.y(), 0.0, p.y() - t.y_max});
  const double dz = p.z() - t.height;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline double box_sdf(const Box& b, const Vec3& p) {
  const Vec3 q = invert(b.pose).apply(p).cwiseAbs() - b.half_extents;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

inline double segment_distance(const Vec3& a, const Vec3& b, const Vec3& p) {
  const Vec3 ba = b - a;
  const double h = std::clamp((p - a).dot(ba) / ba.dot(ba), 0.0, 1.0);
  return (p - a - h * ba).norm();
}

/// Smallest unsigned distance from `p` to any surface of the given part.
inline double surface_distance(const SceneGeometry& g, const Vec3& p, Part part) {
  double best = std::numeric_limits<double>::infinity();
  if (part == Part::Background) best = distance_to_table(g.table, p);
  if (part == Part::Object) {
    for (const auto& s : g.spheres) best = std::min(best, std::abs((p - s.center).norm() - s.radius));
    for (const auto& b : g.boxes) best = std::min(best, std::abs(box_sdf(b, p)));
  }
  if (part == Part::Robot) {
    // The union's surface: distance to the nearest capsule surface that is
    // not buried inside another capsule.
    for (const auto& c : g.capsules) best = std::min(best, std::abs(segment_distance(c.a, c.b, p) - c.radius));
  }
  return best;
}

/// True when `p` lies strictly inside any solid primitive.
inline bool inside_solid(const SceneGeometry& g, const Vec3& p) {
  for (const auto& s : g.spheres) if ((p - s.center).norm() < s.radius) return true;
  for (const auto& b : g.boxes) if (box_sdf(b, p) < 0.0) return true;
  for (const auto& c : g.capsules) if (segment_distance(c.a, c.b, p) < c.radius) return true;
  return false;
}

/// Camera placement ranges. Positions lie on a spherical shell around the
/// workspace center; the camera looks at a jittered target and is rolled
/// about its optical axis. Angles in degrees.
struct CameraSampling {
  int width = 630;
  int height = 476;
  double focal_ratio = 0.85;  ///< nominal fx = fy = focal_ratio * width
  double focal_jitter = 0.05;  ///< relative, per axis
  double principal_jitter = 0.02;  ///< fraction of the image size
  double radius_min = 0.8, radius_max = 1.6;
  double azimuth_min = -180.0, azimuth_max = 180.0;
  double elevation_min = 20.0, elevation_max = 70.0;
  double target_jitter = 0.1;  ///< meters, per axis
  double roll_max = 10.0;

  /// All randomization collapsed onto the lower bound of each range.
  static CameraSampling fixed(int width, int height, double radius, double azimuth, double elevation) {
    CameraSampling c;
    c.width = width;
    c.height = height;
    c.focal_jitter = c.principal_jitter = c.target_jitter = c.roll_max = 0.0;
    c.radius_min = c.radius_max = radius;
    c.azimuth_min = c.azimuth_max = azimuth;
    c.elevation_min = c.elevation_max = elevation;
    return c;
  }
};

struct Camera {
  Intrinsics intrinsics;
  RigidTransform pose;  ///< camera -> world, OpenCV axes (x right, y down, z forward)
  Vec3 target = Vec3::Zero();
};

inline Rotation look_at(const Vec3& eye, const Vec3& target, double roll) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) right = Vec3::UnitX();
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Rotation::unchecked(r) * Rotation::about_axis(Vec3::UnitZ(), roll);
}

inline Camera sample_camera(const Vec3& workspace_center, const CameraSampling& cfg, Rng& rng) {
  constexpr double deg = std::numbers::pi / 180.0;
  Camera cam;
  const double radius = rng.uniform(cfg.radius_min, cfg.radius_max);
  const double az = rng.uniform(cfg.azimuth_min, cfg.azimuth_max) * deg;
  const double el = rng.uniform(cfg.elevation_min, cfg.elevation_max) * deg;
  const Vec3 eye = workspace_center + radius * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  const Vec3 jitter(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  cam.target = workspace_center + cfg.target_jitter * jitter;
  const double roll = rng.uniform(-cfg.roll_max, cfg.roll_max) * deg;
  cam.pose = {look_at(eye, cam.target, roll), eye};

  Intrinsics& k = cam.intrinsics;
  k.width = cfg.width;
  k.height = cfg.height;
  const double f = cfg.focal_ratio * cfg.width;
  k.fx = f * (1.0 + rng.uniform(-cfg.focal_jitter, cfg.focal_jitter));
  k.fy = f * (1.0 + rng.uniform(-cfg.focal_jitter, cfg.focal_jitter));
  k.cx = 0.5 * cfg.width * (1.0 + rng.uniform(-cfg.principal_jitter, cfg.principal_jitter) * 2.0);
  k.cy = 0.5 * cfg.height * (1.0 + rng.uniform(-cfg.principal_jitter, cfg.principal_jitter) * 2.0);
  k.validate();
  return cam;
}

inline Camera sample_camera(const Vec3& workspace_center, const CameraSampling& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return sample_camera(workspace_center, cfg, rng);
}

struct ViewRasters {
  DepthMap depth;
  CoordMap coords;
  MaskSet masks;
  LabelMap labels;
};

/// Casts one ray per pixel through the pixel's sample position. Depth is the
/// z-coordinate of the nearest hit in the camera frame; misses are invalid
/// and carry all-zero masks.
inline ViewRasters render(const SceneGeometry& g, const Camera& cam) {
  const Intrinsics& k = cam.intrinsics;
  ViewRasters out{DepthMap(k.height, k.width), coords_from_intrinsics(k), MaskSet(k.height, k.width),
                  LabelMap(k.height, k.width, 1, 0)};
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 ray_cam(out.coords.values(v, u, 0), out.coords.values(v, u, 1), 1.0);
      const double len = ray_cam.norm();
      const Vec3 dir = cam.pose.rotation * (ray_cam / len);
      const Hit hit = cast_ray(g, cam.pose.translation, dir);
      if (hit.part == Part::Invalid) continue;
      out.depth.values(v, u) = hit.distance / len;
      out.depth.valid(v, u) = 1;
      out.masks.at(v, u, hit.part) = 1.0;
      out.labels(v, u) = static_cast<std::uint8_t>(hit.part);
    }
  }
  return out;
}

inline ViewRasters render(const SceneSpec& spec, const KinematicChain& chain, const Camera& cam) {
  return render(resolve_geometry(spec, chain), cam);
}

}  // namespace mrecon
