#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mrecon/losses.hpp"
#include "mrecon/random.hpp"

namespace mrecon {

struct GradientCheckOptions {
  double epsilon = 1e-6;
  /// Gradient entries where both the analytic and numeric magnitudes fall
  /// below this are treated as exact zeros.
  double zero_floor = 1e-10;
  /// Relative disagreement between one-sided slopes that flags a kink.
  double kink_tolerance = 1e-2;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares an analytic gradient against central finite differences at the
/// coordinates listed in `indices` (all coordinates when empty). Throws
/// NonDifferentiable if the forward and backward slopes disagree, which
/// happens when the evaluation point sits on a kink.
inline GradientCheckResult check_gradient(const std::function<double(std::span<const double>)>& f,
                                          std::span<const double> x, std::span<const double> analytic,
                                          std::span<const std::size_t> indices = {},
                                          const GradientCheckOptions& opt = {}) {
  if (analytic.size() != x.size()) throw DimensionMismatch("check_gradient: gradient size differs from input");
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) all[i] = i;
    indices = all;
  }
  std::vector<double> probe(x.begin(), x.end());
  const double f0 = f(probe);
  GradientCheckResult res;
  for (std::size_t i : indices) {
    const double h = opt.epsilon * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    const double forward = (fp - f0) / h;
    const double backward = (f0 - fm) / h;
    const double central = (fp - fm) / (2.0 * h);
    const double slope_scale = std::max({std::abs(forward), std::abs(backward), opt.zero_floor});
    if (std::abs(forward - backward) > opt.kink_tolerance * slope_scale &&
        std::abs(forward - backward) > 1e3 * opt.zero_floor) {
      throw NonDifferentiable("check_gradient: one-sided slopes disagree at coordinate " + std::to_string(i) +
                              " (" + std::to_string(backward) + " vs " + std::to_string(forward) + ")");
    }
    const double scale = std::max(std::abs(central), std::abs(analytic[i]));
    const double err = scale < opt.zero_floor ? 0.0 : std::abs(central - analytic[i]) / scale;
    if (err > res.max_relative_error) {
      res.max_relative_error = err;
      res.worst_index = i;
    }
    ++res.checked;
  }
  return res;
}

// Named loss suite. Each entry samples a random smooth evaluation point (away
// from L1/Huber kinks, BCE clamps, and rotation angles 0 and pi), flattens
// the predicted quantities into a parameter vector, and checks the closed
// form gradient.

inline const std::vector<std::string>& gradient_check_names() {
  static const std::vector<std::string> names = {"mask",     "point",     "relative_pose", "similarity",
                                                 "keypoint", "rotation_angle", "soft_argmax"};
  return names;
}

namespace detail {

inline Rotation random_rotation(Rng& rng, double max_angle = std::numbers::pi) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  return Rotation::about_axis(axis, rng.uniform(0.0, max_angle));
}

// Residual magnitudes in [lo, hi] with random sign.
inline double offset(Rng& rng, double lo, double hi) {
  return (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(lo, hi);
}

inline Rotation rotated_left(const Rotation& base, std::span<const double> w) {
  return Rotation::exp(Vec3(w[0], w[1], w[2])) * base;
}

inline GradientCheckResult check_mask(Rng& rng, const GradientCheckOptions& opt) {
  const int h = 6, w = 5;
  MaskSet gt(h, w), pred(h, w);
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    gt.values.data()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    pred.values.data()[i] = rng.uniform(0.05, 0.95);
  }
  const Raster<double> g = mask_loss_gradient(pred, gt);
  auto f = [&](std::span<const double> x) {
    MaskSet p(h, w);
    std::copy(x.begin(), x.end(), p.values.data().begin());
    return mask_loss(p, gt);
  };
  return check_gradient(f, pred.values.data(), g.data(), {}, opt);
}

inline GradientCheckResult check_point(Rng& rng, const GradientCheckOptions& opt) {
  const int h = 5, w = 4;
  PointMap gt(h, w), pred(h, w);
  const double true_scale = rng.uniform(0.5, 2.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 3));
      gt.set(r, c, p);
      // Residuals well away from zero keep every L1 term differentiable.
      Vec3 q = p / true_scale;
      for (int k = 0; k < 3; ++k) q(k) += offset(rng, 0.05, 0.2);
      pred.set(r, c, q);
    }
  }
  const Raster<double> g = point_loss_gradient(pred, gt);
  auto f = [&](std::span<const double> x) {
    PointMap p = pred;
    std::copy(x.begin(), x.end(), p.values.data().begin());
    return point_loss(p, gt);
  };
  return check_gradient(f, pred.values.data(), g.data(), {}, opt);
}

inline GradientCheckResult check_relative_pose(Rng& rng, const GradientCheckOptions& opt) {
  const RigidTransform gt{random_rotation(rng), Vec3(rng.normal(), rng.normal(), rng.normal())};
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  const Rotation pred_rot = Rotation::about_axis(axis, rng.uniform(0.2, 2.5)) * gt.rotation;
  Vec3 dt;
  // Mix quadratic and linear Huber branches, away from |r| = delta and r = 0.
  for (int k = 0; k < 3; ++k) dt(k) = k == 0 ? offset(rng, 1.3, 2.0) : offset(rng, 0.1, 0.7);
  const RigidTransform pred{pred_rot, gt.translation + dt};
  const double alpha = rng.uniform(0.5, 2.0);
  const auto g = relative_pose_loss_gradient(pred, gt, alpha);
  const std::vector<double> x0 = {0, 0, 0, pred.translation.x(), pred.translation.y(), pred.translation.z()};
  auto f = [&](std::span<const double> x) {
    RigidTransform p{rotated_left(pred.rotation, x.subspan(0, 3)), Vec3(x[3], x[4], x[5])};
    return relative_pose_loss(p, gt, alpha);
  };
  return check_gradient(f, x0, std::span<const double>(g.data(), 6), {}, opt);
}

inline GradientCheckResult check_similarity(Rng& rng, const GradientCheckOptions& opt) {
  Similarity gt{rng.uniform(0.5, 2.0), {random_rotation(rng), Vec3(rng.normal(), rng.normal(), rng.normal())}};
  Similarity pred = gt;
  pred.scale += offset(rng, 0.05, 0.5);
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  pred.rigid.rotation = Rotation::about_axis(axis, rng.uniform(0.2, 2.5)) * gt.rigid.rotation;
  for (int k = 0; k < 3; ++k) pred.rigid.translation(k) += k == 1 ? offset(rng, 1.3, 2.0) : offset(rng, 0.1, 0.7);
  const double b1 = rng.uniform(0.5, 2.0), b2 = rng.uniform(0.5, 2.0);
  const auto g = st_loss_gradient(pred, gt, b1, b2);
  const std::vector<double> x0 = {pred.scale, 0, 0, 0, pred.rigid.translation.x(), pred.rigid.translation.y(),
                                  pred.rigid.translation.z()};
  auto f = [&](std::span<const double> x) {
    Similarity p{x[0], {rotated_left(pred.rigid.rotation, x.subspan(1, 3)), Vec3(x[4], x[5], x[6])}};
    return st_loss(p, gt, b1, b2);
  };
  return check_gradient(f, x0, std::span<const double>(g.data(), 7), {}, opt);
}

inline GradientCheckResult check_keypoint(Rng& rng, const GradientCheckOptions& opt) {
  const int h = 4, w = 5, n = 3;
  Heatmap gt_hm(h, w, n), pred_hm(h, w, n);
  for (std::size_t i = 0; i < gt_hm.size(); ++i) {
    gt_hm.data()[i] = rng.uniform(0.0, 1.0);
    pred_hm.data()[i] = gt_hm.data()[i] + offset(rng, 0.05, 0.3);
  }
  Keypoints2D gt_kp, pred_kp;
  for (int i = 0; i < n; ++i) {
    gt_kp.emplace_back(rng.uniform(0, w - 1), rng.uniform(0, h - 1));
    pred_kp.push_back(gt_kp.back() + Vec2(offset(rng, 0.2, 1.0), offset(rng, 0.2, 1.0)));
  }
  const double gamma = rng.uniform(0.5, 2.0);
  const auto g = keypoint_loss_gradient(pred_hm, gt_hm, pred_kp, gt_kp, gamma);
  std::vector<double> x0(pred_hm.data().begin(), pred_hm.data().end());
  std::vector<double> ga(g.heatmap.data().begin(), g.heatmap.data().end());
  for (int i = 0; i < n; ++i) {
    x0.push_back(pred_kp[i].x());
    x0.push_back(pred_kp[i].y());
    ga.push_back(g.coords[i].x());
    ga.push_back(g.coords[i].y());
  }
  auto f = [&](std::span<const double> x) {
    Heatmap hm(h, w, n);
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(hm.size()), hm.data().begin());
    Keypoints2D kp;
    for (int i = 0; i < n; ++i) kp.emplace_back(x[hm.size() + 2 * i], x[hm.size() + 2 * i + 1]);
    return keypoint_loss(hm, gt_hm, kp, gt_kp, gamma);
  };
  return check_gradient(f, x0, ga, {}, opt);
}

inline GradientCheckResult check_rotation_angle(Rng& rng, const GradientCheckOptions& opt) {
  const Rotation b = random_rotation(rng);
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  // Identity-adjacent: a small but not vanishing relative rotation.
  const Rotation a = Rotation::about_axis(axis, rng.uniform(0.01, 0.1)) * b;
  const Vec3 g = rotation_angle_gradient(a, b);
  const std::vector<double> x0 = {0, 0, 0};
  auto f = [&](std::span<const double> x) { return rotation_angle(rotated_left(a, x), b); };
  return check_gradient(f, x0, std::span<const double>(g.data(), 3), {}, opt);
}

inline GradientCheckResult check_soft_argmax(Rng& rng, const GradientCheckOptions& opt) {
  const int h = 6, w = 7;
  Heatmap hm(h, w, 1);
  for (double& v : hm.data()) v = rng.uniform(0.0, 3.0);
  const double temperature = rng.uniform(0.5, 2.0);
  const auto [du, dv] = soft_argmax_gradient(hm, 0, temperature);
  // Check d(u + 2 v) so both output coordinates contribute.
  std::vector<double> g(du.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = du[i] + 2.0 * dv[i];
  auto f = [&](std::span<const double> x) {
    Heatmap p(h, w, 1);
    std::copy(x.begin(), x.end(), p.data().begin());
    const Vec2 uv = soft_argmax(p, temperature)[0];
    return uv.x() + 2.0 * uv.y();
  };
  return check_gradient(f, hm.data(), g, {}, opt);
}

}  // namespace detail

/// Runs the named check on `trials` random evaluation points and returns the
/// worst relative error seen.
inline GradientCheckResult check_named_gradient(const std::string& name, std::uint64_t seed, int trials = 5,
                                                const GradientCheckOptions& opt = {}) {
  std::uint64_t stream = 1469598103934665603ULL;  // FNV-1a of the name
  for (char ch : name) stream = (stream ^ static_cast<unsigned char>(ch)) * 1099511628211ULL;
  Rng rng(derive_seed(seed, stream));
  GradientCheckResult worst;
  for (int t = 0; t < trials; ++t) {
    GradientCheckResult r;
    if (name == "mask") r = detail::check_mask(rng, opt);
    else if (name == "point") r = detail::check_point(rng, opt);
    else if (name == "relative_pose") r = detail::check_relative_pose(rng, opt);
    else if (name == "similarity") r = detail::check_similarity(rng, opt);
    else if (name == "keypoint") r = detail::check_keypoint(rng, opt);
    else if (name == "rotation_angle") r = detail::check_rotation_angle(rng, opt);
    else if (name == "soft_argmax") r = detail::check_soft_argmax(rng, opt);
    else throw InvalidArgument("unknown gradient check '" + name + "'");
    if (r.max_relative_error >= worst.max_relative_error) {
      worst.max_relative_error = r.max_relative_error;
      worst.worst_index = r.worst_index;
    }
    worst.checked += r.checked;
  }
  return worst;
}

}  // namespace mrecon
