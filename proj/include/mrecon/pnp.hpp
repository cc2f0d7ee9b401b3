#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "mrecon/camera.hpp"
#include "mrecon/transforms.hpp"

namespace mrecon {

/// H x W x N_kp keypoint scores, one channel per keypoint.
using Heatmap = Raster<double>;
using Keypoints2D = std::vector<Vec2>;

inline void validate_heatmap(const Heatmap& hm) {
  for (double v : hm.data()) {
    if (!(std::isfinite(v) && v >= 0.0)) {
      throw InvalidArgument("heatmap entries must be finite and non-negative");
    }
  }
}

namespace detail {

// Softmax weights of one channel, shifted by the channel maximum.
inline std::vector<double> channel_weights(const Heatmap& hm, int ch, double temperature) {
  double peak = -std::numeric_limits<double>::infinity();
  bool any_nonzero = false;
  for (int r = 0; r < hm.height(); ++r) {
    for (int c = 0; c < hm.width(); ++c) {
      peak = std::max(peak, hm(r, c, ch));
      any_nonzero = any_nonzero || hm(r, c, ch) != 0.0;
    }
  }
  if (!any_nonzero) {
    throw DegenerateInput("soft_argmax: channel " + std::to_string(ch) + " is all zero");
  }
  std::vector<double> w(hm.pixels());
  for (int r = 0; r < hm.height(); ++r) {
    for (int c = 0; c < hm.width(); ++c) {
      w[static_cast<std::size_t>(r) * hm.width() + c] = std::exp((hm(r, c, ch) - peak) / temperature);
    }
  }
  return w;
}

}  // namespace detail

/// Expected pixel position under softmax(scores / temperature), per channel.
/// Scores are logits; the channel maximum is subtracted before exponentiation.
inline Keypoints2D soft_argmax(const Heatmap& heatmap, double temperature = 1.0) {
  if (!(temperature > 0.0)) throw InvalidArgument("soft_argmax: temperature must be positive");
  validate_heatmap(heatmap);
  Keypoints2D out;
  out.reserve(heatmap.channels());
  for (int ch = 0; ch < heatmap.channels(); ++ch) {
    const auto w = detail::channel_weights(heatmap, ch, temperature);
    double sw = 0.0, su = 0.0, sv = 0.0;
    for (int r = 0; r < heatmap.height(); ++r) {
      for (int c = 0; c < heatmap.width(); ++c) {
        const double wi = w[static_cast<std::size_t>(r) * heatmap.width() + c];
        sw += wi;
        su += wi * c;
        sv += wi * r;
      }
    }
    out.emplace_back(su / sw, sv / sw);
  }
  return out;
}

/// Gradient of the decoded (u, v) of one channel with respect to every score
/// of that channel: d u / d h_k = p_k (u_k - u) / T.
inline std::pair<std::vector<double>, std::vector<double>> soft_argmax_gradient(
    const Heatmap& heatmap, int channel, double temperature = 1.0) {
  const auto w = detail::channel_weights(heatmap, channel, temperature);
  double sw = 0.0;
  for (double wi : w) sw += wi;
  const Vec2 mean = soft_argmax(heatmap, temperature)[channel];
  std::vector<double> du(w.size()), dv(w.size());
  for (int r = 0; r < heatmap.height(); ++r) {
    for (int c = 0; c < heatmap.width(); ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * heatmap.width() + c;
      const double p = w[k] / sw;
      du[k] = p * (c - mean.x()) / temperature;
      dv[k] = p * (r - mean.y()) / temperature;
    }
  }
  return {std::move(du), std::move(dv)};
}

/// Mean Euclidean pixel distance between projected points and observations.
/// `extrinsic` maps robot-base coordinates into the camera frame.
inline double reprojection_error(std::span<const Vec3> points3d, std::span<const Vec2> pixels,
                                 const Intrinsics& k, const RigidTransform& extrinsic) {
  if (points3d.size() != pixels.size()) {
    throw DimensionMismatch("reprojection_error: point and pixel counts differ");
  }
  if (points3d.empty()) throw InvalidArgument("reprojection_error: no correspondences");
  double sum = 0.0;
  for (std::size_t i = 0; i < points3d.size(); ++i) {
    const Vec3 pc = extrinsic.apply(points3d[i]);
    if (!(pc.z() > 0.0)) {
      throw DegenerateInput("reprojection_error: point " + std::to_string(i) + " is behind the camera");
    }
    sum += (project(pc, k) - pixels[i]).norm();
  }
  return sum / static_cast<double>(points3d.size());
}

struct PnPOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
  int max_halvings = 40;
};

struct PnPResult {
  RigidTransform extrinsic;  ///< robot base -> camera
  double reprojection_error = 0.0;
  int iterations = 0;
  /// Cost (half sum of squared pixel residuals) after each accepted iteration,
  /// starting with the initial estimate.
  std::vector<double> cost_history;
};

namespace detail {

// Similarity normalization: centroid to origin, mean distance sqrt(dim).
template <int Dim>
Eigen::Matrix<double, Dim + 1, Dim + 1> normalizing_transform(
    const std::vector<Eigen::Matrix<double, Dim, 1>>& pts) {
  Eigen::Matrix<double, Dim, 1> mean = Eigen::Matrix<double, Dim, 1>::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  const double s = dist > 0.0 ? std::sqrt(static_cast<double>(Dim)) / dist : 1.0;
  Eigen::Matrix<double, Dim + 1, Dim + 1> t = Eigen::Matrix<double, Dim + 1, Dim + 1>::Identity();
  t.template topLeftCorner<Dim, Dim>() *= s;
  t.template topRightCorner<Dim, 1>() = -s * mean;
  return t;
}

// Splits s [R | t] into a rotation (nearest in Frobenius norm) and metric t.
inline RigidTransform rigid_from_scaled(const Mat3& m, const Vec3& t_scaled) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = svd.singularValues().mean();
  if (!(scale > 0.0)) throw DegenerateInput("solve_pnp: linear solution has zero scale");
  const Rotation r = orthogonalize_9d(to_nine_d(m));
  return {r, t_scaled / scale};
}

// Direct linear transform of the 3x4 matrix [R | t] from normalized image
// coordinates, with Hartley normalization of both point sets.
inline RigidTransform dlt_init(std::span<const Vec3> points, const std::vector<Vec2>& normalized) {
  const std::vector<Vec3> pts(points.begin(), points.end());
  const Eigen::Matrix4d t3 = normalizing_transform<3>(pts);
  const Eigen::Matrix3d t2 = normalizing_transform<2>(normalized);
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector4d x = t3 * pts[i].homogeneous();
    const Eigen::Vector3d u = t2 * normalized[i].homogeneous();
    a.block<1, 4>(2 * i, 4) = -u.z() * x.transpose();
    a.block<1, 4>(2 * i, 8) = u.y() * x.transpose();
    a.block<1, 4>(2 * i + 1, 0) = u.z() * x.transpose();
    a.block<1, 4>(2 * i + 1, 8) = -u.x() * x.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> pn;
  pn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8), h(9), h(10), h(11);
  Eigen::Matrix<double, 3, 4> p = t2.inverse() * pn * t3;
  // Choose the overall sign that puts the points in front of the camera.
  int in_front = 0;
  for (const auto& x : pts) in_front += (p * x.homogeneous()).z() > 0.0;
  if (2 * in_front < n) p = -p;
  // det < 0 after the cheirality fix means the data is not a camera projection.
  if (p.leftCols<3>().determinant() < 0.0) {
    throw DegenerateInput("solve_pnp: linear solution has negative orientation");
  }
  return rigid_from_scaled(p.leftCols<3>(), p.col(3));
}

// Plane-induced homography initialization. Points are expressed in their
// best-fit plane frame; for nearly (not exactly) planar sets this is an
// approximation that Gauss-Newton refines.
inline RigidTransform homography_init(std::span<const Vec3> points, const std::vector<Vec2>& normalized,
                                      const Vec3& centroid, const Mat3& basis) {
  const int n = static_cast<int>(points.size());
  std::vector<Vec2> plane(n);
  for (int i = 0; i < n; ++i) {
    const Vec3 local = basis.transpose() * (points[i] - centroid);
    plane[i] = local.head<2>();
  }
  const Eigen::Matrix3d ta = normalizing_transform<2>(plane);
  const Eigen::Matrix3d tb = normalizing_transform<2>(normalized);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d x = ta * plane[i].homogeneous();
    const Eigen::Vector3d u = tb * normalized[i].homogeneous();
    a.block<1, 3>(2 * i, 3) = -u.z() * x.transpose();
    a.block<1, 3>(2 * i, 6) = u.y() * x.transpose();
    a.block<1, 3>(2 * i + 1, 0) = u.z() * x.transpose();
    a.block<1, 3>(2 * i + 1, 6) = -u.x() * x.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Mat3 hm = tb.inverse() * hn * ta;
  const double lambda = 0.5 * (hm.col(0).norm() + hm.col(1).norm());
  hm /= lambda;
  if (hm(2, 2) < 0.0) hm = -hm;  // plane centroid in front of the camera
  Mat3 rp;
  rp.col(0) = hm.col(0);
  rp.col(1) = hm.col(1);
  rp.col(2) = hm.col(0).cross(hm.col(1));
  const Rotation r = orthogonalize_9d(to_nine_d(rp));
  const Vec3 tp = hm.col(2);
  const Mat3 rw = r.matrix() * basis.transpose();
  return {Rotation::unchecked(rw), tp - rw * centroid};
}

// Translation minimizing the algebraic error for a fixed rotation:
// x_i (r3.X + tz) = r1.X + tx, same for y.
inline std::optional<RigidTransform> translation_for(std::span<const Vec3> points, const std::vector<Vec2>& normalized,
                                                     const Mat3& r) {
  const int n = static_cast<int>(points.size());
  Eigen::MatrixXd a(2 * n, 3);
  Eigen::VectorXd b(2 * n);
  for (int i = 0; i < n; ++i) {
    const Vec3 x = r * points[i];
    a.row(2 * i) << 1.0, 0.0, -normalized[i].x();
    a.row(2 * i + 1) << 0.0, 1.0, -normalized[i].y();
    b(2 * i) = normalized[i].x() * x.z() - x.x();
    b(2 * i + 1) = normalized[i].y() * x.z() - x.y();
  }
  const Vec3 t = a.colPivHouseholderQr().solve(b);
  for (const auto& p : points) {
    if (!((r * p + t).z() > 0.0)) return std::nullopt;
  }
  return RigidTransform{Rotation::unchecked(r), t};
}

// Starting rotations for small point sets: the 24 proper symmetries of the
// cube, each followed by three turns about the optical axis.
inline const std::vector<Mat3>& rotation_starts() {
  static const std::vector<Mat3> starts = [] {
    std::vector<Mat3> out;
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& p : perms) {
      for (int signs = 0; signs < 8; ++signs) {
        Mat3 m = Mat3::Zero();
        for (int i = 0; i < 3; ++i) m(i, p[i]) = (signs >> i) & 1 ? -1.0 : 1.0;
        if (m.determinant() < 0.0) continue;
        for (double a : {0.0, 2.0 * M_PI / 3.0, 4.0 * M_PI / 3.0}) {
          out.push_back(Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix() * m);
        }
      }
    }
    return out;
  }();
  return starts;
}

inline double pnp_cost(std::span<const Vec3> points, std::span<const Vec2> pixels, const Intrinsics& k,
                       const RigidTransform& t) {
  double cost = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 pc = t.apply(points[i]);
    if (!(pc.z() > 0.0)) return std::numeric_limits<double>::infinity();
    cost += (project(pc, k) - pixels[i]).squaredNorm();
  }
  return 0.5 * cost;
}

// Gauss-Newton with step halving. Perturbation R <- Exp(w) R, t <- t + dt.
inline PnPResult gauss_newton(std::span<const Vec3> points, std::span<const Vec2> pixels,
                              const Intrinsics& k, RigidTransform pose, const PnPOptions& opt) {
  PnPResult res;
  double cost = pnp_cost(points, pixels, k, pose);
  if (!std::isfinite(cost)) throw DegenerateInput("solve_pnp: initial pose places points behind the camera");
  res.cost_history.push_back(cost);
  const int n = static_cast<int>(points.size());
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (int i = 0; i < n; ++i) {
      const Vec3 rp = pose.rotation * points[i];
      const Vec3 pc = rp + pose.translation;
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz, 0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dpc;
      dpc.leftCols<3>() = -hat(rp);
      dpc.rightCols<3>() = Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> j = dproj * dpc;
      const Vec2 r = project(pc, k) - pixels[i];
      jtj += j.transpose() * j;
      jtr += j.transpose() * r;
    }
    Eigen::Matrix<double, 6, 1> step = -jtj.ldlt().solve(jtr);
    if (!step.allFinite()) throw DegenerateInput("solve_pnp: singular normal equations");
    if (step.norm() < opt.step_tolerance) {
      converged = true;
      break;
    }
    bool accepted = false;
    for (int h = 0; h < opt.max_halvings; ++h) {
      RigidTransform cand{Rotation::exp(step.head<3>()) * pose.rotation, pose.translation + step.tail<3>()};
      const double c = pnp_cost(points, pixels, k, cand);
      if (c <= cost) {
        pose = cand;
        cost = c;
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step.norm() < opt.step_tolerance) break;
    }
    if (!accepted) {
      // No descent left along the Gauss-Newton direction: at a minimum to
      // machine precision.
      converged = true;
      break;
    }
    res.cost_history.push_back(cost);
  }
  if (!converged) {
    throw ConvergenceError("solve_pnp: no convergence after " + std::to_string(opt.max_iterations) +
                           " iterations");
  }
  // Re-project onto SO(3) to remove accumulated drift.
  pose.rotation = orthogonalize_9d(to_nine_d(pose.rotation.matrix()));
  res.extrinsic = pose;
  res.iterations = it;
  res.reprojection_error = reprojection_error(points, pixels, k, pose);
  return res;
}

}  // namespace detail

/// Camera extrinsic (robot base -> camera) from 3D-2D correspondences.
/// Linear initialization (DLT for general point sets with at least six
/// points, plane homography otherwise; small non-planar sets also get a
/// multi-start) followed by Gauss-Newton refinement.
inline PnPResult solve_pnp(std::span<const Vec3> points3d, std::span<const Vec2> pixels,
                           const Intrinsics& k, const PnPOptions& opt = {}) {
  k.validate();
  const std::size_t n = points3d.size();
  if (n != pixels.size()) throw DimensionMismatch("solve_pnp: point and pixel counts differ");
  if (n < 4) throw DegenerateInput("solve_pnp: at least four correspondences are required, got " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!points3d[i].allFinite() || !pixels[i].allFinite()) {
      throw InvalidArgument("solve_pnp: non-finite correspondence");
    }
  }

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points3d) centroid += p;
  centroid /= static_cast<double>(n);
  Eigen::MatrixXd centered(n, 3);
  for (std::size_t i = 0; i < n; ++i) centered.row(i) = (points3d[i] - centroid).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) < 1e-9 * sv(0)) {
    throw DegenerateInput("solve_pnp: points are collinear or coincident");
  }
  const bool planar = sv(2) < 1e-6 * sv(0);

  std::vector<Vec2> normalized(n);
  for (std::size_t i = 0; i < n; ++i) {
    normalized[i] = Vec2((pixels[i].x() - k.cx) / k.fx, (pixels[i].y() - k.cy) / k.fy);
  }
  Mat3 basis = svd.matrixV();
  if (basis.determinant() < 0.0) basis.col(2) *= -1.0;

  std::vector<RigidTransform> inits;
  if (!planar && n >= 6) {
    try {
      inits.push_back(detail::dlt_init(points3d, normalized));
    } catch (const DegenerateInput&) {
    }
  }
  if (inits.empty()) inits.push_back(detail::homography_init(points3d, normalized, centroid, basis));
  PnPResult best;
  double best_cost = std::numeric_limits<double>::infinity();
  std::string last_error = "solve_pnp: no valid initialization";
  auto run = [&](const std::vector<RigidTransform>& starts) {
    for (const auto& init : starts) {
      try {
        PnPResult r = detail::gauss_newton(points3d, pixels, k, init, opt);
        const double c = r.cost_history.back();
        if (c < best_cost) {
          best_cost = c;
          best = std::move(r);
        }
      } catch (const DegenerateInput& e) {
        last_error = e.what();
      } catch (const ConvergenceError& e) {
        last_error = e.what();
      }
      if (best_cost < 1e-20) break;
    }
  };
  run(inits);
  // Small non-planar sets have several local minima; noisy linear starts can
  // land behind the camera. Both get the multi-start.
  if ((!planar && n < 6) || !std::isfinite(best_cost)) {
    std::vector<RigidTransform> starts;
    for (const Mat3& r : detail::rotation_starts()) {
      if (auto t = detail::translation_for(points3d, normalized, r)) starts.push_back(*t);
    }
    run(starts);
  }
  if (!std::isfinite(best_cost)) throw DegenerateInput(last_error);
  return best;
}

/// Replaces the rigid part of `sim` with the camera -> base transform implied
/// by a PnP extrinsic. The scale is kept.
inline Similarity refine_similarity(const Similarity& sim, const RigidTransform& pnp_extrinsic) {
  sim.validate();
  return {sim.scale, invert(pnp_extrinsic)};
}

}  // namespace mrecon
