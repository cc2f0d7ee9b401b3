#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "mrecon/bundle.hpp"
#include "mrecon/losses.hpp"

namespace mrecon {

/// Width of the ground-truth keypoint heatmap bumps, pixels.
inline constexpr double kHeatmapSigma = 2.0;

/// Perturbations applied by the mock predictor. Pose noise is a left
/// rotation Exp(sigma_r z) and an additive translation; scale noise is
/// multiplicative, exp(sigma_s z). heatmap_blur widens the predicted bumps
/// in quadrature; keypoint jitters the predicted 2D keypoints (pixels).
struct NoiseModel {
  double depth = 0.0;        ///< meters
  double coord = 0.0;        ///< normalized image units
  double translation = 0.0;  ///< meters
  double rotation = 0.0;     ///< radians
  double scale = 0.0;
  double heatmap_blur = 0.0;  ///< pixels
  double mask_flip = 0.0;     ///< probability per mask entry
  double keypoint = 0.0;      ///< pixels

  void validate() const {
    for (double v : {depth, coord, translation, rotation, scale, heatmap_blur, keypoint}) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("noise model: sigmas must be finite and >= 0");
    }
    if (!(mask_flip >= 0.0 && mask_flip <= 1.0)) throw InvalidArgument("noise model: mask flip rate in [0, 1]");
  }

  nlohmann::json to_json() const {
    return {{"depth", depth}, {"coord", coord}, {"translation", translation}, {"rotation", rotation},
            {"scale", scale}, {"heatmap_blur", heatmap_blur}, {"mask_flip", mask_flip}, {"keypoint", keypoint}};
  }
};

/// Unit-amplitude isotropic Gaussian per keypoint channel.
inline Heatmap gaussian_heatmap(const Keypoints2D& kps, int height, int width, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_heatmap: sigma must be positive");
  Heatmap hm(height, width, static_cast<int>(kps.size()));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      for (std::size_t k = 0; k < kps.size(); ++k) {
        const double dx = c - kps[k].x(), dy = r - kps[k].y();
        hm(r, c, static_cast<int>(k)) = std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  return hm;
}

struct Prediction {
  std::vector<DepthMap> depth;
  std::vector<CoordMap> coords;
  LossInputs outputs;  ///< point maps are the unprojected noisy depth/coords
};

/// Ground truth in the layout the losses consume. Point maps are local
/// (camera frame); relative poses include the identity for view 0.
inline LossInputs ground_truth(const SceneBundle& b, bool with_heatmaps = true) {
  LossInputs gt;
  gt.points = local_points(b);
  for (const auto& v : b.views) {
    gt.masks.push_back(v.masks);
    gt.keypoints.push_back(v.keypoints);
    if (with_heatmaps) {
      gt.heatmaps.push_back(gaussian_heatmap(v.keypoints, v.intrinsics.height, v.intrinsics.width, kHeatmapSigma));
    }
  }
  gt.relative_poses = relative_poses(b);
  gt.similarity = b.similarity;
  return gt;
}

namespace detail {

// One independent stream per quantity keeps draws aligned across noise
// levels, so sweeps see common random numbers.
enum NoiseStream : std::uint64_t { kDepth = 1, kCoord, kPose, kSimilarity, kMask, kKeypoint };

inline RigidTransform perturb(const RigidTransform& t, const NoiseModel& n, Rng& rng) {
  const Vec3 w(rng.normal(), rng.normal(), rng.normal());
  const Vec3 d(rng.normal(), rng.normal(), rng.normal());
  return {Rotation::exp(n.rotation * w) * t.rotation, t.translation + n.translation * d};
}

}  // namespace detail

/// Ground truth perturbed per `noise`. A zero noise model reproduces the
/// ground truth exactly.
inline Prediction mock_predict(const SceneBundle& b, const NoiseModel& noise, std::uint64_t seed,
                               bool with_heatmaps = true) {
  noise.validate();
  const std::uint64_t base = derive_seed(seed, b.seed);
  auto stream = [&](detail::NoiseStream s) { return Rng(derive_seed(base, s)); };
  Rng depth_rng = stream(detail::kDepth), coord_rng = stream(detail::kCoord), mask_rng = stream(detail::kMask),
      kp_rng = stream(detail::kKeypoint), pose_rng = stream(detail::kPose), sim_rng = stream(detail::kSimilarity);

  Prediction p;
  LossInputs& out = p.outputs;
  for (const auto& v : b.views) {
    Raster<double> depth = v.depth.values;
    for (std::size_t i = 0; i < depth.size(); ++i) {
      const double z = depth_rng.normal();
      if (v.depth.valid.data()[i]) depth.data()[i] += noise.depth * z;
    }
    DepthMap d = DepthMap::from_values(std::move(depth));
    for (std::size_t i = 0; i < d.valid.size(); ++i) d.valid.data()[i] &= v.depth.valid.data()[i];

    CoordMap c = v.coords;
    for (double& x : c.values.data()) x += noise.coord * coord_rng.normal();

    MaskSet m = v.masks;
    for (double& x : m.values.data()) {
      if (mask_rng.uniform() < noise.mask_flip) x = 1.0 - x;
    }

    Keypoints2D kp = v.keypoints;
    for (auto& k : kp) {
      const double dx = kp_rng.normal(), dy = kp_rng.normal();
      k += noise.keypoint * Vec2(dx, dy);
    }
    if (with_heatmaps) {
      const double sigma = std::hypot(kHeatmapSigma, noise.heatmap_blur);
      out.heatmaps.push_back(gaussian_heatmap(kp, v.intrinsics.height, v.intrinsics.width, sigma));
    }
    out.points.push_back(unproject(c, d));
    out.masks.push_back(std::move(m));
    out.keypoints.push_back(std::move(kp));
    p.depth.push_back(std::move(d));
    p.coords.push_back(std::move(c));
  }

  const auto rels = relative_poses(b);
  out.relative_poses.push_back(rels.front());
  for (std::size_t i = 1; i < rels.size(); ++i) out.relative_poses.push_back(detail::perturb(rels[i], noise, pose_rng));

  out.similarity.rigid = detail::perturb(b.similarity.rigid, noise, sim_rng);
  out.similarity.scale = b.similarity.scale * std::exp(noise.scale * sim_rng.normal());
  return p;
}

}  // namespace mrecon
