#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "mrecon/camera.hpp"
#include "mrecon/error.hpp"

namespace mrecon {

/// Element of SO(3).
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  /// Validates orthonormality and det = +1 within `tol`.
  static Rotation from_matrix(const Mat3& m, double tol = 1e-9) {
    if (!m.allFinite()) throw InvalidArgument("rotation: non-finite entries");
    const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho > tol || std::abs(m.determinant() - 1.0) > tol) {
      throw InvalidArgument("rotation: matrix is not special orthogonal");
    }
    return Rotation(m);
  }
  static Rotation unchecked(const Mat3& m) { return Rotation(m); }

  /// Rodrigues exponential of an axis-angle vector.
  static Rotation exp(const Vec3& omega) {
    const double theta = omega.norm();
    if (theta == 0.0) return Rotation();
    return Rotation(Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix());
  }
  static Rotation about_axis(const Vec3& axis, double angle) {
    return Rotation(Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix());
  }

  const Mat3& matrix() const { return m_; }
  Rotation inverse() const { return Rotation(m_.transpose()); }
  Vec3 operator*(const Vec3& p) const { return m_ * p; }
  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_); }
  bool operator==(const Rotation& o) const { return m_ == o.m_; }

 private:
  explicit Rotation(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

/// p -> R p + t.
struct RigidTransform {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  static RigidTransform from_matrix(const Mat4& m, double tol = 1e-9) {
    return {Rotation::from_matrix(m.topLeftCorner<3, 3>(), tol), m.topRightCorner<3, 1>()};
  }
  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation.matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  bool operator==(const RigidTransform& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

/// p -> s (R p + t); the rigid part is applied first and the scale multiplies
/// the full result.
struct Similarity {
  double scale = 1.0;
  RigidTransform rigid;

  static Similarity identity() { return {}; }

  void validate() const {
    if (!(std::isfinite(scale) && scale > 0.0)) {
      throw InvalidArgument("similarity: scale must be finite and positive");
    }
  }
  Vec3 apply(const Vec3& p) const { return scale * rigid.apply(p); }
  /// 4x4 matrix S = s T acting on homogeneous [p; 1].
  Mat4 matrix() const {
    Mat4 m = scale * rigid.matrix();
    m(3, 3) = 1.0;
    m.block<1, 3>(3, 0).setZero();
    return m;
  }
  bool operator==(const Similarity& o) const { return scale == o.scale && rigid == o.rigid; }
};

/// Unconstrained 9-vector holding a 3x3 matrix in row-major order.
using NineD = std::array<double, 9>;

inline Mat3 to_matrix(const NineD& raw) {
  Mat3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = raw[i];
  return m;
}

inline NineD to_nine_d(const Mat3& m) {
  NineD raw;
  for (int i = 0; i < 9; ++i) raw[i] = m(i / 3, i % 3);
  return raw;
}

/// Nearest rotation in Frobenius norm: U diag(1, 1, det(U V^T)) V^T.
/// When det < 0 the direction with the smallest singular value is flipped.
inline Rotation orthogonalize_9d(const NineD& raw) {
  const Mat3 m = to_matrix(raw);
  if (!m.allFinite()) throw InvalidArgument("orthogonalize_9d: non-finite input");
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  // Two vanishing singular values leave the rotation undetermined.
  if (!(sigma(0) > 0.0) || sigma(1) <= 1e-12 * sigma(0)) {
    throw DegenerateInput("orthogonalize_9d: rank-deficient input");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 d(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  return Rotation::unchecked(u * d.asDiagonal() * v.transpose());
}

/// Geodesic distance on SO(3). Evaluated as atan2(sin, cos) of the relative
/// rotation, which equals the clamped arccos((tr(a^T b) - 1) / 2) and keeps
/// full precision near 0 and pi.
inline double rotation_angle(const Rotation& a, const Rotation& b) {
  const Mat3 rel = a.matrix().transpose() * b.matrix();
  const Vec3 axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  const double cos_theta = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double sin_theta = std::min(0.5 * axis.norm(), 1.0);
  return std::atan2(sin_theta, cos_theta);
}

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline RigidTransform invert(const RigidTransform& a) {
  const Rotation rt = a.rotation.inverse();
  return {rt, -(rt * a.translation)};
}

/// compose(a, b) applies b first. For S = s T the group law is
/// (s_a T_a)(s_b T_b) = s_a s_b (R_a R_b, R_a t_b + t_a / s_b).
inline Similarity compose(const Similarity& a, const Similarity& b) {
  Similarity out;
  out.scale = a.scale * b.scale;
  out.rigid.rotation = a.rigid.rotation * b.rigid.rotation;
  out.rigid.translation = a.rigid.rotation * b.rigid.translation + a.rigid.translation / b.scale;
  return out;
}

inline Similarity invert(const Similarity& a) {
  a.validate();
  Similarity out;
  out.scale = 1.0 / a.scale;
  out.rigid.rotation = a.rigid.rotation.inverse();
  out.rigid.translation = -a.scale * (out.rigid.rotation * a.rigid.translation);
  return out;
}

/// Pose of view j expressed in the frame of view i, from camera-to-reference
/// poses: R = R_i^-1 R_j, t = R_i^-1 (t_j - t_i).
inline RigidTransform relative_pose(const RigidTransform& pose_i, const RigidTransform& pose_j) {
  const Rotation ri_inv = pose_i.rotation.inverse();
  return {ri_inv * pose_j.rotation, ri_inv * (pose_j.translation - pose_i.translation)};
}

inline PointMap transform_points(const PointMap& points, const RigidTransform& t) {
  PointMap out(points.height(), points.width());
  for (int r = 0; r < points.height(); ++r) {
    for (int c = 0; c < points.width(); ++c) {
      if (points.is_valid(r, c)) out.set(r, c, t.apply(points.at(r, c)));
    }
  }
  return out;
}

/// Maps every view's local points into the reference frame with its relative
/// pose.
inline std::vector<PointMap> register_views(std::span<const PointMap> locals,
                                            std::span<const RigidTransform> rels) {
  if (locals.size() != rels.size()) {
    throw DimensionMismatch("register_views: " + std::to_string(locals.size()) +
                            " point maps but " + std::to_string(rels.size()) + " poses");
  }
  std::vector<PointMap> out;
  out.reserve(locals.size());
  for (std::size_t i = 0; i < locals.size(); ++i) out.push_back(transform_points(locals[i], rels[i]));
  return out;
}

inline std::vector<PointMap> to_canonical(std::span<const PointMap> points, const Similarity& sim) {
  sim.validate();
  std::vector<PointMap> out;
  out.reserve(points.size());
  for (const auto& map : points) {
    PointMap m(map.height(), map.width());
    for (int r = 0; r < map.height(); ++r) {
      for (int c = 0; c < map.width(); ++c) {
        if (map.is_valid(r, c)) m.set(r, c, sim.apply(map.at(r, c)));
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

/// Skew-symmetric cross-product matrix.
inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

}  // namespace mrecon
