#pragma once

#include <cmath>
#include <span>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "mrecon/losses.hpp"
#include "mrecon/transforms.hpp"

namespace mrecon {

struct PointMapReport {
  double point_err = 0.0;   ///< meters, after optimal scale alignment
  double normal_err = 0.0;  ///< radians
  double scale_err = 0.0;   ///< |s_hat - s| / s

  nlohmann::json to_json() const {
    return {{"point_err", point_err}, {"normal_err", normal_err}, {"scale_err", scale_err}};
  }
};

struct PoseThresholds {
  double translation = 0.03;  ///< meters
  double rotation = 0.03;     ///< radians
};

/// Translation/rotation errors with threshold accuracies. For a single pair
/// the accuracies are 0 or 1; aggregate() turns them into fractions.
struct PoseReport {
  double translation_err = 0.0;
  double rotation_err = 0.0;
  double translation_acc = 0.0;
  double rotation_acc = 0.0;
  PoseThresholds thresholds;

  nlohmann::json to_json(const char* t = "rte", const char* r = "rre", const char* ta = "rta",
                         const char* ra = "rra") const {
    return {{t, translation_err},
            {r, rotation_err},
            {ta, translation_acc},
            {ra, rotation_acc},
            {"threshold_translation", thresholds.translation},
            {"threshold_rotation", thresholds.rotation}};
  }
};

/// Same fields for an absolute camera pose in the robot base frame.
struct AbsolutePoseReport : PoseReport {
  nlohmann::json to_json() const { return PoseReport::to_json("ate", "are", "ata", "ara"); }
};

/// Point error uses the same aligned-scale L1 as point_loss; normal error the
/// mean normal angle; scale error is relative.
inline PointMapReport point_map_metrics(std::span<const PointMap> pred, std::span<const PointMap> gt,
                                        double pred_scale, double gt_scale) {
  if (!(gt_scale > 0.0) || !(pred_scale > 0.0) || !std::isfinite(pred_scale)) {
    throw InvalidArgument("point_map_metrics: scales must be positive");
  }
  PointMapReport r;
  r.point_err = point_loss(pred, gt);
  r.normal_err = normal_loss(pred, gt);
  r.scale_err = std::abs(pred_scale - gt_scale) / gt_scale;
  return r;
}

inline PointMapReport point_map_metrics(const PointMap& pred, const PointMap& gt, double pred_scale,
                                        double gt_scale) {
  return point_map_metrics(std::span(&pred, 1), std::span(&gt, 1), pred_scale, gt_scale);
}

namespace detail {

inline PoseReport pose_errors(const RigidTransform& pred, const RigidTransform& gt, const PoseThresholds& th) {
  if (!(th.translation > 0.0) || !(th.rotation > 0.0)) {
    throw InvalidArgument("pose metrics: thresholds must be positive");
  }
  PoseReport r;
  r.thresholds = th;
  r.translation_err = (pred.translation - gt.translation).norm();
  r.rotation_err = rotation_angle(pred.rotation, gt.rotation);
  r.translation_acc = r.translation_err < th.translation ? 1.0 : 0.0;
  r.rotation_acc = r.rotation_err < th.rotation ? 1.0 : 0.0;
  return r;
}

}  // namespace detail

inline PoseReport relative_pose_metrics(const RigidTransform& pred, const RigidTransform& gt,
                                        const PoseThresholds& th = {}) {
  return detail::pose_errors(pred, gt, th);
}

/// Both poses are camera -> robot base.
inline AbsolutePoseReport absolute_pose_metrics(const RigidTransform& pred, const RigidTransform& gt,
                                                const PoseThresholds& th = {0.01, 0.01}) {
  AbsolutePoseReport r;
  static_cast<PoseReport&>(r) = detail::pose_errors(pred, gt, th);
  return r;
}

inline PointMapReport aggregate(std::span<const PointMapReport> reports) {
  if (reports.empty()) throw InvalidArgument("aggregate: no reports");
  PointMapReport out;
  for (const auto& r : reports) {
    out.point_err += r.point_err;
    out.normal_err += r.normal_err;
    out.scale_err += r.scale_err;
  }
  const double n = static_cast<double>(reports.size());
  out.point_err /= n;
  out.normal_err /= n;
  out.scale_err /= n;
  return out;
}

template <typename Report>
  requires std::is_base_of_v<PoseReport, Report>
Report aggregate(std::span<const Report> reports) {
  if (reports.empty()) throw InvalidArgument("aggregate: no reports");
  Report out;
  out.thresholds = reports.front().thresholds;
  for (const auto& r : reports) {
    if (r.thresholds.translation != out.thresholds.translation || r.thresholds.rotation != out.thresholds.rotation) {
      throw InvalidArgument("aggregate: reports use different thresholds");
    }
    out.translation_err += r.translation_err;
    out.rotation_err += r.rotation_err;
    out.translation_acc += r.translation_acc;
    out.rotation_acc += r.rotation_acc;
  }
  const double n = static_cast<double>(reports.size());
  out.translation_err /= n;
  out.rotation_err /= n;
  out.translation_acc /= n;
  out.rotation_acc /= n;
  return out;
}

template <typename Report>
Report aggregate(const std::vector<Report>& reports) {
  return aggregate(std::span<const Report>(reports));
}

}  // namespace mrecon
