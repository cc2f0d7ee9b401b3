#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace mrecon;

namespace {

PointMap bumpy_map(int h, int w) {
  PointMap m(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) m.set(r, c, Vec3(0.02 * c, 0.02 * r, 1.5 + 0.1 * std::sin(0.3 * c) * std::cos(0.2 * r)));
  }
  return m;
}

}  // namespace

TEST(PointMapMetrics, Examples) {
  const PointMap gt = bumpy_map(12, 16);
  const PointMapReport same = point_map_metrics(gt, gt, 1.0, 1.0);
  EXPECT_EQ(same.point_err, 0.0);
  EXPECT_EQ(same.normal_err, 0.0);
  EXPECT_EQ(same.scale_err, 0.0);

  PointMap doubled = gt;
  for (double& v : doubled.values.data()) v *= 2.0;
  const PointMapReport d = point_map_metrics(doubled, gt, 1.0, 1.0);
  EXPECT_NEAR(d.point_err, 0.0, 1e-12);
  EXPECT_NEAR(d.normal_err, 0.0, 1e-7);

  EXPECT_NEAR(point_map_metrics(gt, gt, 1.1, 1.0).scale_err, 0.1, 1e-12);
  EXPECT_THROW(point_map_metrics(gt, gt, 1.0, 0.0), InvalidArgument);
}

TEST(PointMapMetrics, ZeroIffEqualUpToScale) {
  const PointMap gt = bumpy_map(10, 10);
  PointMap moved = gt;
  moved.values(4, 4, 2) += 0.01;
  const PointMapReport r = point_map_metrics(moved, gt, 1.0, 1.0);
  EXPECT_GT(r.point_err, 0.0);
  EXPECT_GT(r.normal_err, 0.0);
}

TEST(RelativePoseMetrics, Examples) {
  Rng rng(1);
  const RigidTransform gt = testutil::random_rigid(rng);
  const PoseReport same = relative_pose_metrics(gt, gt);
  EXPECT_EQ(same.translation_err, 0.0);
  EXPECT_EQ(same.rotation_err, 0.0);
  EXPECT_EQ(same.translation_acc, 1.0);
  EXPECT_EQ(same.rotation_acc, 1.0);

  RigidTransform off = gt;
  off.translation += Vec3(0.05, 0, 0);
  const PoseReport r = relative_pose_metrics(off, gt, {0.03, 0.03});
  EXPECT_NEAR(r.translation_err, 0.05, 1e-12);
  EXPECT_EQ(r.translation_acc, 0.0);
  EXPECT_EQ(r.rotation_acc, 1.0);
  EXPECT_THROW(relative_pose_metrics(gt, gt, {0.0, 0.03}), InvalidArgument);
}

TEST(RelativePoseMetrics, CountingOracle) {
  Rng rng(2);
  const PoseThresholds th{0.03, 0.03};
  std::vector<PoseReport> reports;
  int both_below = 0;
  for (int i = 0; i < 10; ++i) {
    const RigidTransform gt = testutil::random_rigid(rng);
    // 7 of 10 pairs below both thresholds
    const double mag = i < 7 ? 0.01 : 0.08;
    const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const RigidTransform pred{Rotation::from_matrix(testutil::axis_angle(axis, mag)) * gt.rotation,
                              gt.translation + mag * Vec3(rng.normal(), rng.normal(), rng.normal()).normalized()};
    reports.push_back(relative_pose_metrics(pred, gt, th));
    const bool t_ok = (pred.translation - gt.translation).norm() < th.translation;
    const bool r_ok = Eigen::AngleAxisd(pred.rotation.matrix() * gt.rotation.matrix().transpose()).angle() < th.rotation;
    both_below += t_ok && r_ok;
  }
  ASSERT_EQ(both_below, 7);
  const PoseReport agg = aggregate(reports);
  EXPECT_DOUBLE_EQ(agg.translation_acc, 0.7);
  EXPECT_DOUBLE_EQ(agg.rotation_acc, 0.7);
}

TEST(RelativePoseMetrics, SymmetricUnderConsistentInverse) {
  // rte is invariant under inverting both poses when the rotations agree;
  // rre always is.
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const RigidTransform gt = testutil::random_rigid(rng);
    RigidTransform pred{testutil::random_rotation(rng), testutil::random_rigid(rng).translation};
    const PoseReport a = relative_pose_metrics(pred, gt), b = relative_pose_metrics(invert(pred), invert(gt));
    EXPECT_NEAR(a.rotation_err, b.rotation_err, 1e-9);
    pred.rotation = gt.rotation;
    const PoseReport c = relative_pose_metrics(pred, gt), d = relative_pose_metrics(invert(pred), invert(gt));
    EXPECT_NEAR(c.translation_err, d.translation_err, 1e-9);
  }
}

TEST(AbsolutePoseMetrics, Examples) {
  Rng rng(4);
  const RigidTransform gt = testutil::random_rigid(rng);
  const AbsolutePoseReport same = absolute_pose_metrics(gt, gt);
  EXPECT_EQ(same.translation_acc, 1.0);
  EXPECT_EQ(same.rotation_acc, 1.0);
  EXPECT_EQ(same.thresholds.translation, 0.01);

  const RigidTransform turned{Rotation::from_matrix(testutil::axis_angle(Vec3::UnitZ(), 0.02)) * gt.rotation,
                              gt.translation};
  const AbsolutePoseReport r = absolute_pose_metrics(turned, gt);
  EXPECT_NEAR(r.rotation_err, 0.02, 1e-12);
  EXPECT_EQ(r.rotation_acc, 0.0);
  const auto j = r.to_json();
  EXPECT_TRUE(j.contains("ate"));
  EXPECT_TRUE(j.contains("ara"));
}

TEST(AbsolutePoseMetrics, PnPOnOracleScene) {
  const SceneBundle b = generate_bundle(testutil::small_config(2), 8);
  for (const auto& v : b.views) {
    const PnPResult pnp = solve_pnp(b.keypoints3d, v.keypoints, v.intrinsics);
    const AbsolutePoseReport r = absolute_pose_metrics(invert(pnp.extrinsic), v.pose_robot);
    EXPECT_LT(r.translation_err, 1e-6);
    EXPECT_EQ(r.translation_acc, 1.0);
  }
}

TEST(Aggregate, Examples) {
  PointMapReport a{0.1, 0.2, 0.3};
  const std::vector<PointMapReport> one{a};
  const PointMapReport s = aggregate(std::span<const PointMapReport>(one));
  EXPECT_EQ(s.point_err, 0.1);
  EXPECT_EQ(s.scale_err, 0.3);

  const std::vector<PointMapReport> two{a, PointMapReport{0.3, 0.2, 0.3}};
  EXPECT_NEAR(aggregate(std::span<const PointMapReport>(two)).point_err, 0.2, 1e-15);

  EXPECT_THROW(aggregate(std::span<const PointMapReport>()), InvalidArgument);
  EXPECT_THROW(aggregate(std::vector<PoseReport>{}), InvalidArgument);
}

TEST(Aggregate, MatchesRecomputation) {
  Rng rng(5);
  std::vector<PoseReport> reports;
  std::vector<double> t_errs;
  for (int i = 0; i < 37; ++i) {
    const RigidTransform gt = testutil::random_rigid(rng);
    const double mag = rng.uniform(0.0, 0.06);
    const RigidTransform pred{Rotation::from_matrix(testutil::axis_angle(Vec3(1, 0, 1), mag)) * gt.rotation,
                              gt.translation + Vec3(mag, 0, 0)};
    reports.push_back(relative_pose_metrics(pred, gt));
    t_errs.push_back(mag);
  }
  double t_mean = 0.0, acc = 0.0;
  for (double e : t_errs) {
    t_mean += e;
    acc += e < 0.03;
  }
  const PoseReport agg = aggregate(reports);
  EXPECT_NEAR(agg.translation_err, t_mean / 37, 1e-12);
  EXPECT_NEAR(agg.rotation_err, t_mean / 37, 1e-12);
  EXPECT_NEAR(agg.translation_acc, acc / 37, 1e-12);
  EXPECT_GE(agg.rotation_acc, 0.0);
  EXPECT_LE(agg.rotation_acc, 1.0);

  std::vector<PoseReport> mixed = reports;
  mixed[3].thresholds.translation = 0.01;
  EXPECT_THROW(aggregate(mixed), InvalidArgument);
}
