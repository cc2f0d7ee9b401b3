#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrecon/camera.hpp"
#include "mrecon/masked_points.hpp"
#include "mrecon/pnp.hpp"
#include "mrecon/transforms.hpp"

namespace mrecon {

/// Balancing coefficients of the training objective. The defaults are
/// placeholders (all ones); the Huber threshold applies to every Huber term.
struct LossWeights {
  double alpha = 1.0;
  double beta1 = 1.0;
  double beta2 = 1.0;
  double gamma = 1.0;
  std::array<double, 6> lambda = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  double huber_delta = 1.0;

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    bool ok = positive(alpha) && positive(beta1) && positive(beta2) && positive(gamma) &&
              positive(huber_delta);
    for (double l : lambda) ok = ok && positive(l);
    if (!ok) throw InvalidArgument("loss weights must all be finite and positive");
  }

  nlohmann::json to_json() const {
    return {{"alpha", alpha}, {"beta1", beta1}, {"beta2", beta2}, {"gamma", gamma},
            {"lambda", lambda}, {"huber_delta", huber_delta}};
  }

  /// Missing keys keep their defaults.
  static LossWeights from_json(const nlohmann::json& j) {
    LossWeights w;
    try {
      w.alpha = j.value("alpha", w.alpha);
      w.beta1 = j.value("beta1", w.beta1);
      w.beta2 = j.value("beta2", w.beta2);
      w.gamma = j.value("gamma", w.gamma);
      w.huber_delta = j.value("huber_delta", w.huber_delta);
      if (j.contains("lambda")) {
        const auto& l = j.at("lambda");
        if (!l.is_array() || l.size() != 6) throw FormatError("loss weights: lambda needs 6 entries");
        for (int i = 0; i < 6; ++i) w.lambda[i] = l[i].get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("loss weights: ") + e.what());
    }
    w.validate();
    return w;
  }
};

inline constexpr double kBceEpsilon = 1e-7;

inline double huber(double residual, double delta = 1.0) {
  const double a = std::abs(residual);
  return a <= delta ? 0.5 * residual * residual : delta * (a - 0.5 * delta);
}

inline double huber_derivative(double residual, double delta = 1.0) {
  return std::clamp(residual, -delta, delta);
}

/// Per-coordinate Huber, summed.
inline double huber(const Vec3& pred, const Vec3& gt, double delta = 1.0) {
  return huber(pred.x() - gt.x(), delta) + huber(pred.y() - gt.y(), delta) +
         huber(pred.z() - gt.z(), delta);
}

namespace detail {

inline void require_same_views(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw DimensionMismatch(std::string(what) + ": view counts differ");
  if (a == 0) throw InvalidArgument(std::string(what) + ": no views");
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Closed-form least-squares scale s = sum<p_hat, p> / sum<p_hat, p_hat> over
/// jointly valid pixels of all views.
inline double align_scale(std::span<const PointMap> pred, std::span<const PointMap> gt) {
  detail::require_same_views(pred.size(), gt.size(), "align_scale");
  double num = 0.0, den = 0.0;
  std::size_t overlap = 0;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    require_same_grid(pred[v].values, gt[v].values, "align_scale");
    for (int r = 0; r < gt[v].height(); ++r) {
      for (int c = 0; c < gt[v].width(); ++c) {
        if (!pred[v].is_valid(r, c) || !gt[v].is_valid(r, c)) continue;
        const Vec3 ph = pred[v].at(r, c);
        num += ph.dot(gt[v].at(r, c));
        den += ph.dot(ph);
        ++overlap;
      }
    }
  }
  if (overlap == 0) throw DegenerateInput("align_scale: prediction and ground truth share no valid pixel");
  if (!(den > 0.0)) throw DegenerateInput("align_scale: all predicted points are zero");
  return num / den;
}

inline double align_scale(const PointMap& pred, const PointMap& gt) {
  return align_scale(std::span(&pred, 1), std::span(&gt, 1));
}

/// Mean L1 over the 3N coordinates of the N jointly valid pixels after scale
/// alignment. With a fully valid map N = HW.
inline double point_loss(std::span<const PointMap> pred, std::span<const PointMap> gt) {
  const double s = align_scale(pred, gt);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    for (int r = 0; r < gt[v].height(); ++r) {
      for (int c = 0; c < gt[v].width(); ++c) {
        if (!pred[v].is_valid(r, c) || !gt[v].is_valid(r, c)) continue;
        sum += (s * pred[v].at(r, c) - gt[v].at(r, c)).lpNorm<1>();
        ++n;
      }
    }
  }
  return sum / (3.0 * static_cast<double>(n));
}

inline double point_loss(const PointMap& pred, const PointMap& gt) {
  return point_loss(std::span(&pred, 1), std::span(&gt, 1));
}

/// Gradient of point_loss with respect to the predicted coordinates of a
/// single view, including the dependence of the aligned scale on the
/// prediction. Invalid pixels get zero gradient.
inline Raster<double> point_loss_gradient(const PointMap& pred, const PointMap& gt) {
  const double s = align_scale(pred, gt);
  double den = 0.0, g = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < gt.height(); ++r) {
    for (int c = 0; c < gt.width(); ++c) {
      if (!pred.is_valid(r, c) || !gt.is_valid(r, c)) continue;
      const Vec3 ph = pred.at(r, c);
      const Vec3 res = s * ph - gt.at(r, c);
      den += ph.dot(ph);
      for (int k = 0; k < 3; ++k) g += detail::sign(res(k)) * ph(k);
      ++n;
    }
  }
  const double norm = 1.0 / (3.0 * static_cast<double>(n));
  Raster<double> grad(pred.height(), pred.width(), 3, 0.0);
  for (int r = 0; r < gt.height(); ++r) {
    for (int c = 0; c < gt.width(); ++c) {
      if (!pred.is_valid(r, c) || !gt.is_valid(r, c)) continue;
      const Vec3 ph = pred.at(r, c);
      const Vec3 p = gt.at(r, c);
      for (int k = 0; k < 3; ++k) {
        const double ds = (p(k) - 2.0 * s * ph(k)) / den;
        grad(r, c, k) = norm * (s * detail::sign(s * ph(k) - p(k)) + ds * g);
      }
    }
  }
  return grad;
}

struct NormalMap : PointMap {
  using PointMap::PointMap;
};

/// Normal at each interior pixel from the cross product of the horizontal and
/// vertical central differences. Border pixels and pixels with an invalid
/// 4-neighbor are invalid.
inline NormalMap normals_from_pointmap(const PointMap& points) {
  NormalMap out(points.height(), points.width());
  for (int r = 1; r + 1 < points.height(); ++r) {
    for (int c = 1; c + 1 < points.width(); ++c) {
      if (!points.is_valid(r, c) || !points.is_valid(r, c - 1) || !points.is_valid(r, c + 1) ||
          !points.is_valid(r - 1, c) || !points.is_valid(r + 1, c)) {
        continue;
      }
      const Vec3 dx = points.at(r, c + 1) - points.at(r, c - 1);
      const Vec3 dy = points.at(r + 1, c) - points.at(r - 1, c);
      const Vec3 n = dx.cross(dy);
      const double len = n.norm();
      if (!(len > 0.0) || !std::isfinite(len)) continue;
      out.set(r, c, n / len);
    }
  }
  return out;
}

inline double normal_angle(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Mean angle between predicted and ground-truth normals over all jointly
/// valid normal pairs of all views.
inline double normal_loss(std::span<const PointMap> pred, std::span<const PointMap> gt) {
  detail::require_same_views(pred.size(), gt.size(), "normal_loss");
  double sum = 0.0;
  std::size_t k = 0;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    require_same_grid(pred[v].values, gt[v].values, "normal_loss");
    const NormalMap np = normals_from_pointmap(pred[v]);
    const NormalMap ng = normals_from_pointmap(gt[v]);
    for (int r = 0; r < np.height(); ++r) {
      for (int c = 0; c < np.width(); ++c) {
        if (!np.is_valid(r, c) || !ng.is_valid(r, c)) continue;
        sum += normal_angle(np.at(r, c), ng.at(r, c));
        ++k;
      }
    }
  }
  if (k == 0) throw DegenerateInput("normal_loss: no jointly valid normal pairs");
  return sum / static_cast<double>(k);
}

inline double normal_loss(const PointMap& pred, const PointMap& gt) {
  return normal_loss(std::span(&pred, 1), std::span(&gt, 1));
}

inline double bce(double pred, double gt) {
  const double p = std::clamp(pred, kBceEpsilon, 1.0 - kBceEpsilon);
  return -(gt * std::log(p) + (1.0 - gt) * std::log(1.0 - p));
}

/// Mean binary cross-entropy over all pixels, parts, and views.
inline double mask_loss(std::span<const MaskSet> pred, std::span<const MaskSet> gt) {
  detail::require_same_views(pred.size(), gt.size(), "mask_loss");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    require_same_grid(pred[v].values, gt[v].values, "mask_loss");
    const auto p = pred[v].values.data();
    const auto g = gt[v].values.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (g[i] != 0.0 && g[i] != 1.0) throw InvalidArgument("mask_loss: ground-truth masks must be binary");
      sum += bce(p[i], g[i]);
    }
    n += p.size();
  }
  return sum / static_cast<double>(n);
}

inline double mask_loss(const MaskSet& pred, const MaskSet& gt) {
  return mask_loss(std::span(&pred, 1), std::span(&gt, 1));
}

/// d mask_loss / d pred for one view; zero inside the clamped region.
inline Raster<double> mask_loss_gradient(const MaskSet& pred, const MaskSet& gt) {
  require_same_grid(pred.values, gt.values, "mask_loss_gradient");
  Raster<double> grad(pred.height(), pred.width(), 3, 0.0);
  const double norm = 1.0 / static_cast<double>(pred.values.size());
  const auto p = pred.values.data();
  const auto g = gt.values.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= kBceEpsilon || p[i] >= 1.0 - kBceEpsilon) continue;
    grad.data()[i] = norm * (p[i] - g[i]) / (p[i] * (1.0 - p[i]));
  }
  return grad;
}

/// Gradient of rotation_angle(a, b) with respect to a left perturbation
/// a <- Exp(w) a at w = 0. Undefined at angles 0 and pi.
inline Vec3 rotation_angle_gradient(const Rotation& a, const Rotation& b) {
  const double theta = rotation_angle(a, b);
  const Mat3 m = b.matrix() * a.matrix().transpose();
  // d tr(a^T Exp(w)^T b) / dw = -(m23 - m32, m31 - m13, m12 - m21).
  const Vec3 dtrace(-(m(1, 2) - m(2, 1)), -(m(2, 0) - m(0, 2)), -(m(0, 1) - m(1, 0)));
  return -dtrace / (2.0 * std::sin(theta));
}

inline double relative_pose_loss(const RigidTransform& pred, const RigidTransform& gt, double alpha,
                                 double delta = 1.0) {
  return alpha * huber(pred.translation, gt.translation, delta) + rotation_angle(pred.rotation, gt.rotation);
}

/// Gradient (left rotation perturbation, then translation) of relative_pose_loss.
inline Eigen::Matrix<double, 6, 1> relative_pose_loss_gradient(const RigidTransform& pred,
                                                               const RigidTransform& gt, double alpha,
                                                               double delta = 1.0) {
  Eigen::Matrix<double, 6, 1> g;
  g.head<3>() = rotation_angle_gradient(pred.rotation, gt.rotation);
  for (int k = 0; k < 3; ++k) {
    g(3 + k) = alpha * huber_derivative(pred.translation(k) - gt.translation(k), delta);
  }
  return g;
}

/// Scale, absolute translation, and absolute rotation of the first view.
inline double st_loss(const Similarity& pred, const Similarity& gt, double beta1, double beta2,
                      double delta = 1.0) {
  return beta1 * huber(pred.scale - gt.scale, delta) +
         beta2 * huber(pred.rigid.translation, gt.rigid.translation, delta) +
         rotation_angle(pred.rigid.rotation, gt.rigid.rotation);
}

/// Gradient ordered (scale, left rotation perturbation, translation).
inline Eigen::Matrix<double, 7, 1> st_loss_gradient(const Similarity& pred, const Similarity& gt,
                                                    double beta1, double beta2, double delta = 1.0) {
  Eigen::Matrix<double, 7, 1> g;
  g(0) = beta1 * huber_derivative(pred.scale - gt.scale, delta);
  g.segment<3>(1) = rotation_angle_gradient(pred.rigid.rotation, gt.rigid.rotation);
  for (int k = 0; k < 3; ++k) {
    g(4 + k) = beta2 * huber_derivative(pred.rigid.translation(k) - gt.rigid.translation(k), delta);
  }
  return g;
}

/// gamma * mean |heatmap difference| + mean |coordinate difference|.
inline double keypoint_loss(const Heatmap& pred_hm, const Heatmap& gt_hm, const Keypoints2D& pred_kp,
                            const Keypoints2D& gt_kp, double gamma) {
  if (pred_hm.height() != gt_hm.height() || pred_hm.width() != gt_hm.width() ||
      pred_hm.channels() != gt_hm.channels()) {
    throw DimensionMismatch("keypoint_loss: heatmap shapes differ");
  }
  if (pred_kp.size() != gt_kp.size() || static_cast<int>(gt_kp.size()) != gt_hm.channels()) {
    throw DimensionMismatch("keypoint_loss: keypoint counts differ");
  }
  if (gt_kp.empty()) throw InvalidArgument("keypoint_loss: no keypoints");
  double hm = 0.0;
  for (std::size_t i = 0; i < gt_hm.size(); ++i) hm += std::abs(pred_hm.data()[i] - gt_hm.data()[i]);
  double co = 0.0;
  for (std::size_t i = 0; i < gt_kp.size(); ++i) co += (pred_kp[i] - gt_kp[i]).lpNorm<1>();
  return gamma * hm / static_cast<double>(gt_hm.size()) + co / (2.0 * static_cast<double>(gt_kp.size()));
}

struct KeypointLossGradient {
  Raster<double> heatmap;
  std::vector<Vec2> coords;
};

inline KeypointLossGradient keypoint_loss_gradient(const Heatmap& pred_hm, const Heatmap& gt_hm,
                                                   const Keypoints2D& pred_kp, const Keypoints2D& gt_kp,
                                                   double gamma) {
  KeypointLossGradient g{Raster<double>(pred_hm.height(), pred_hm.width(), pred_hm.channels()), {}};
  const double hn = gamma / static_cast<double>(gt_hm.size());
  for (std::size_t i = 0; i < gt_hm.size(); ++i) {
    g.heatmap.data()[i] = hn * detail::sign(pred_hm.data()[i] - gt_hm.data()[i]);
  }
  const double cn = 1.0 / (2.0 * static_cast<double>(gt_kp.size()));
  for (std::size_t i = 0; i < gt_kp.size(); ++i) {
    g.coords.emplace_back(cn * detail::sign(pred_kp[i].x() - gt_kp[i].x()),
                          cn * detail::sign(pred_kp[i].y() - gt_kp[i].y()));
  }
  return g;
}

/// Everything the objective consumes for one sample of N views. Relative
/// poses express view i in the frame of view 0; entry 0 is ignored.
struct LossInputs {
  std::vector<PointMap> points;
  std::vector<MaskSet> masks;
  std::vector<RigidTransform> relative_poses;
  Similarity similarity;
  std::vector<Heatmap> heatmaps;
  std::vector<Keypoints2D> keypoints;
};

struct LossBreakdown {
  double point = 0.0;
  double normal = 0.0;
  double mask = 0.0;
  double relative_pose = 0.0;
  double similarity = 0.0;
  double keypoint = 0.0;
  /// Weighted terms lambda_k * L_k, in the same order.
  std::array<double, 6> weighted{};
  double total = 0.0;

  nlohmann::json to_json() const {
    return {{"point", point},           {"normal", normal},         {"mask", mask},
            {"relative_pose", relative_pose}, {"similarity", similarity}, {"keypoint", keypoint},
            {"weighted", weighted},      {"total", total}};
  }
};

/// Weighted sum of the six objectives. Per-view terms (relative pose,
/// keypoints) are averaged over the views that carry them; a monocular sample
/// has a zero relative-pose term.
inline LossBreakdown total_loss(const LossInputs& pred, const LossInputs& gt, const LossWeights& w) {
  w.validate();
  LossBreakdown b;
  b.point = point_loss(pred.points, gt.points);
  b.normal = normal_loss(pred.points, gt.points);
  b.mask = mask_loss(pred.masks, gt.masks);
  if (pred.relative_poses.size() != gt.relative_poses.size()) {
    throw DimensionMismatch("total_loss: relative pose counts differ");
  }
  if (pred.relative_poses.size() > 1) {
    for (std::size_t i = 1; i < pred.relative_poses.size(); ++i) {
      b.relative_pose += relative_pose_loss(pred.relative_poses[i], gt.relative_poses[i], w.alpha, w.huber_delta);
    }
    b.relative_pose /= static_cast<double>(pred.relative_poses.size() - 1);
  }
  b.similarity = st_loss(pred.similarity, gt.similarity, w.beta1, w.beta2, w.huber_delta);
  detail::require_same_views(pred.heatmaps.size(), gt.heatmaps.size(), "total_loss heatmaps");
  if (pred.keypoints.size() != pred.heatmaps.size() || gt.keypoints.size() != gt.heatmaps.size()) {
    throw DimensionMismatch("total_loss: keypoint and heatmap view counts differ");
  }
  for (std::size_t v = 0; v < pred.heatmaps.size(); ++v) {
    b.keypoint += keypoint_loss(pred.heatmaps[v], gt.heatmaps[v], pred.keypoints[v], gt.keypoints[v], w.gamma);
  }
  b.keypoint /= static_cast<double>(pred.heatmaps.size());
  const std::array<double, 6> terms = {b.point, b.normal, b.mask, b.relative_pose, b.similarity, b.keypoint};
  for (int i = 0; i < 6; ++i) {
    b.weighted[i] = w.lambda[i] * terms[i];
    b.total += b.weighted[i];
  }
  return b;
}

}  // namespace mrecon
