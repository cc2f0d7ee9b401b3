#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "mrecon/error.hpp"
#include "mrecon/raster.hpp"

namespace mrecon {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Pinhole intrinsics in pixels. Integer pixel indices are the sample
/// positions: pixel (u, v) sits at image-plane coordinate (u, v), no half-pixel
/// offset.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  bool operator==(const Intrinsics&) const = default;

  /// Focal lengths must be positive and finite; the principal point must lie
  /// within the closed image rectangle.
  void validate() const {
    if (!(std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0)) {
      throw InvalidArgument("intrinsics: focal lengths must be finite and positive");
    }
    if (width <= 0 || height <= 0) {
      throw InvalidArgument("intrinsics: image size must be positive");
    }
    if (!(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height)) {
      throw InvalidArgument("intrinsics: principal point outside the image");
    }
  }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }
};

/// Depth in meters along the optical axis. Pixels with non-finite or
/// non-positive depth are invalid.
struct DepthMap {
  Raster<double> values;
  Raster<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int height, int width) : values(height, width, 1), valid(height, width, 1) {}

  /// Builds the validity grid from the values.
  static DepthMap from_values(Raster<double> values) {
    if (values.channels() != 1) throw DimensionMismatch("depth map must have one channel");
    DepthMap d;
    d.valid = Raster<std::uint8_t>(values.height(), values.width(), 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double z = values.data()[i];
      d.valid.data()[i] = (std::isfinite(z) && z > 0.0) ? 1 : 0;
    }
    d.values = std::move(values);
    return d;
  }

  int height() const { return values.height(); }
  int width() const { return values.width(); }
  bool is_valid(int r, int c) const { return valid(r, c) != 0; }
  bool operator==(const DepthMap&) const = default;
};

/// Normalized image coordinates (x, y) on the plane z = 1, two channels.
struct CoordMap {
  Raster<double> values;

  CoordMap() = default;
  CoordMap(int height, int width) : values(height, width, 2) {}

  int height() const { return values.height(); }
  int width() const { return values.width(); }
  Vec2 at(int r, int c) const { return {values(r, c, 0), values(r, c, 1)}; }
  void set(int r, int c, const Vec2& xy) {
    values(r, c, 0) = xy.x();
    values(r, c, 1) = xy.y();
  }
  bool operator==(const CoordMap&) const = default;
};

/// H x W grid of 3D points with validity flags.
struct PointMap {
  Raster<double> values;
  Raster<std::uint8_t> valid;

  PointMap() = default;
  PointMap(int height, int width) : values(height, width, 3), valid(height, width, 1) {}

  int height() const { return values.height(); }
  int width() const { return values.width(); }
  bool is_valid(int r, int c) const { return valid(r, c) != 0; }
  Vec3 at(int r, int c) const { return {values(r, c, 0), values(r, c, 1), values(r, c, 2)}; }
  void set(int r, int c, const Vec3& p) {
    values(r, c, 0) = p.x();
    values(r, c, 1) = p.y();
    values(r, c, 2) = p.z();
    valid(r, c) = 1;
  }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid.data()) n += v != 0;
    return n;
  }
  bool operator==(const PointMap&) const = default;
};

/// Lifts normalized coordinates to 3D: (x, y) at depth d becomes (x d, y d, d).
inline PointMap unproject(const CoordMap& coords, const DepthMap& depth) {
  require_same_grid(coords.values, depth.values, "unproject");
  PointMap out(depth.height(), depth.width());
  for (int r = 0; r < depth.height(); ++r) {
    for (int c = 0; c < depth.width(); ++c) {
      const double x = coords.values(r, c, 0);
      const double y = coords.values(r, c, 1);
      if (!depth.is_valid(r, c) || !std::isfinite(x) || !std::isfinite(y)) continue;
      const double d = depth.values(r, c);
      out.set(r, c, Vec3(x * d, y * d, d));
    }
  }
  return out;
}

inline CoordMap coords_from_intrinsics(const Intrinsics& k) {
  k.validate();
  CoordMap out(k.height, k.width);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      out.set(v, u, Vec2((u - k.cx) / k.fx, (v - k.cy) / k.fy));
    }
  }
  return out;
}

inline Vec2 project(const Vec3& p, const Intrinsics& k) {
  if (!(p.z() > 0.0)) throw InvalidArgument("project: point has non-positive depth");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

namespace detail {

// Least-squares line value = slope * index + offset.
inline std::pair<double, double> fit_line(const Raster<double>& values, int channel,
                                          bool along_columns) {
  long double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int r = 0; r < values.height(); ++r) {
    for (int c = 0; c < values.width(); ++c) {
      const long double t = along_columns ? c : r;
      const long double y = values(r, c, channel);
      n += 1;
      sx += t;
      sy += y;
      sxx += t * t;
      sxy += t * y;
    }
  }
  const long double denom = n * sxx - sx * sx;
  const long double slope = (n * sxy - sx * sy) / denom;
  const long double offset = (sy - slope * sx) / n;
  return {static_cast<double>(slope), static_cast<double>(offset)};
}

}  // namespace detail

/// Recovers pinhole intrinsics from a coordinate map. The model is affine in
/// (1/f, -c/f), so the ordinary least-squares line fit per axis is the exact
/// minimizer of the squared coordinate discrepancy.
inline Intrinsics intrinsics_from_coords(const CoordMap& coords) {
  if (coords.height() < 2 || coords.width() < 2) {
    throw InvalidArgument("intrinsics_from_coords: need at least a 2x2 map");
  }
  for (double v : coords.values.data()) {
    if (!std::isfinite(v)) throw InvalidArgument("intrinsics_from_coords: non-finite coordinate");
  }
  const auto [ax, bx] = detail::fit_line(coords.values, 0, true);
  const auto [ay, by] = detail::fit_line(coords.values, 1, false);
  constexpr double kMinSlope = 1e-12;
  if (!(ax > kMinSlope) || !(ay > kMinSlope)) {
    throw DegenerateInput("intrinsics_from_coords: coordinate map is constant or reversed");
  }
  Intrinsics k;
  k.fx = 1.0 / ax;
  k.fy = 1.0 / ay;
  k.cx = -bx / ax;
  k.cy = -by / ay;
  k.width = coords.width();
  k.height = coords.height();
  return k;
}

}  // namespace mrecon
