#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "test_util.hpp"

using namespace mrecon;
using testutil::random_rigid;
using testutil::random_rotation;

namespace {

double det_error(const Mat3& r) { return std::abs(r.determinant() - 1.0); }
double ortho_error(const Mat3& r) { return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Orthogonalize9D, IdentityAndScaledRotation) {
  const Rotation id = orthogonalize_9d(to_nine_d(Mat3::Identity()));
  EXPECT_LT(testutil::max_abs(id.matrix() - Mat3::Identity()), 1e-15);
  Rng rng(1);
  const Rotation r = random_rotation(rng);
  const Rotation r2 = orthogonalize_9d(to_nine_d(2.0 * r.matrix()));
  EXPECT_LT(testutil::max_abs(r2.matrix() - r.matrix()), 1e-14);
}

TEST(Orthogonalize9D, NoisyRotationMatchesPolarOracle) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Rotation r = random_rotation(rng);
    Mat3 m = r.matrix();
    for (int k = 0; k < 9; ++k) m(k / 3, k % 3) += rng.uniform(-1e-3, 1e-3);
    const Rotation q = orthogonalize_9d(to_nine_d(m));
    EXPECT_LT(rotation_angle(q, r), 1e-2);
    EXPECT_LT(testutil::max_abs(q.matrix() - testutil::polar_oracle(m)), 1e-9);
  }
}

TEST(Orthogonalize9D, ScaleInvariant) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Mat3 m;
    for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = rng.normal();
    const double lambda = std::exp(rng.uniform(-5, 5));
    const Mat3 a = orthogonalize_9d(to_nine_d(m)).matrix();
    const Mat3 b = orthogonalize_9d(to_nine_d(lambda * m)).matrix();
    EXPECT_LT(testutil::max_abs(a - b), 1e-9);
  }
}

TEST(Orthogonalize9D, NegativeDeterminantFlipsSmallestDirection) {
  const Mat3 m = Vec3(3.0, 2.0, -0.5).asDiagonal();
  const Mat3 r = orthogonalize_9d(to_nine_d(m)).matrix();
  EXPECT_LT(testutil::max_abs(r - Mat3::Identity()), 1e-15);
}

TEST(Orthogonalize9D, RankDeficientThrows) {
  Mat3 m = Mat3::Zero();
  m(0, 0) = 1.0;
  EXPECT_THROW(orthogonalize_9d(to_nine_d(m)), DegenerateInput);
  EXPECT_THROW(orthogonalize_9d(to_nine_d(Mat3::Zero())), DegenerateInput);
  // One vanishing singular value is still a valid input.
  Mat3 rank2 = Mat3::Zero();
  rank2(0, 0) = 1.0;
  rank2(1, 1) = 2.0;
  EXPECT_LT(det_error(orthogonalize_9d(to_nine_d(rank2)).matrix()), 1e-12);
}

TEST(Orthogonalize9D, NearSingularInputsStayOnSO3) {
  Rng rng(4);
  for (double s3 : {1e-3, 1e-8, 1e-14, 0.0}) {
    for (int i = 0; i < 100; ++i) {
      const Mat3 u = testutil::random_rotation_matrix(rng), v = testutil::random_rotation_matrix(rng);
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const Mat3 m = u * Vec3(rng.uniform(0.5, 2), rng.uniform(0.1, 0.5), sign * s3).asDiagonal() * v.transpose();
      const Mat3 r = orthogonalize_9d(to_nine_d(m)).matrix();
      EXPECT_LT(ortho_error(r), 1e-9);
      EXPECT_LT(det_error(r), 1e-9);
      EXPECT_LT(testutil::max_abs(r - testutil::polar_oracle(m)), 1e-9);
    }
  }
}

TEST(RotationAngle, Examples) {
  Rng rng(5);
  const Rotation a = random_rotation(rng);
  EXPECT_EQ(rotation_angle(a, a), 0.0);
  for (int i = 0; i < 20; ++i) {
    const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    const Rotation b = Rotation::unchecked(testutil::axis_angle(axis, 0.3));
    EXPECT_NEAR(rotation_angle(Rotation(), b), 0.3, 1e-14);
  }
  const Rotation half = Rotation::unchecked(testutil::axis_angle(Vec3::UnitX(), std::numbers::pi));
  EXPECT_NEAR(rotation_angle(Rotation(), half), std::numbers::pi, 1e-12);
}

TEST(RotationAngle, SymmetricAndTriangle) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const Rotation a = random_rotation(rng), b = random_rotation(rng), c = random_rotation(rng);
    EXPECT_NEAR(rotation_angle(a, b), rotation_angle(b, a), 1e-12);
    EXPECT_LE(rotation_angle(a, c), rotation_angle(a, b) + rotation_angle(b, c) + 1e-9);
    const double th = rotation_angle(a, b);
    EXPECT_GE(th, 0.0);
    EXPECT_LE(th, std::numbers::pi);
  }
}

TEST(RotationAngle, AgreesWithClampedArccos) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Rotation a = random_rotation(rng), b = random_rotation(rng);
    const double c = std::clamp(((a.matrix().transpose() * b.matrix()).trace() - 1.0) / 2.0, -1.0, 1.0);
    // arccos is ill-conditioned near 0 and pi; compare away from the ends.
    if (std::abs(c) < 0.999) EXPECT_NEAR(rotation_angle(a, b), std::acos(c), 1e-12);
  }
}

TEST(RelativePose, Examples) {
  Rng rng(8);
  const RigidTransform p = random_rigid(rng);
  const RigidTransform self = relative_pose(p, p);
  EXPECT_LT(testutil::max_abs(self.rotation.matrix() - Mat3::Identity()), 1e-15);
  EXPECT_LT(self.translation.norm(), 1e-15);

  const RigidTransform r = relative_pose({}, {Rotation(), Vec3(1, 2, 3)});
  EXPECT_EQ(r.rotation.matrix(), Mat3::Identity());
  EXPECT_EQ(r.translation, Vec3(1, 2, 3));

  for (int i = 0; i < 100; ++i) {
    const RigidTransform a = random_rigid(rng), b = random_rigid(rng);
    const RigidTransform back = compose(a, relative_pose(a, b));
    EXPECT_LT(testutil::max_abs(back.rotation.matrix() - b.rotation.matrix()), 1e-12);
    EXPECT_LT((back.translation - b.translation).norm(), 1e-12);
  }
}

TEST(Compose, GroupLaws) {
  Rng rng(9);
  const RigidTransform id = invert(RigidTransform::identity());
  EXPECT_EQ(id.rotation.matrix(), Mat3::Identity());
  EXPECT_EQ(id.translation.norm(), 0.0);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform t = random_rigid(rng);
    const RigidTransform e = compose(t, invert(t));
    EXPECT_LT(testutil::max_abs(e.rotation.matrix() - Mat3::Identity()), 1e-12);
    EXPECT_LT(e.translation.norm(), 1e-12);

    const Similarity s{std::exp(rng.normal()), random_rigid(rng)};
    const Similarity es = compose(s, invert(s));
    EXPECT_NEAR(es.scale, 1.0, 1e-12);
    EXPECT_LT(testutil::max_abs(es.rigid.rotation.matrix() - Mat3::Identity()), 1e-12);
    EXPECT_LT(es.rigid.translation.norm(), 1e-12);

    // Composition agrees with applying the factors in turn.
    const Similarity s2{std::exp(rng.normal()), random_rigid(rng)};
    const Vec3 p(rng.normal(), rng.normal(), rng.normal());
    EXPECT_LT((compose(s, s2).apply(p) - s.apply(s2.apply(p))).norm(), 1e-12);
    EXPECT_LT(((s.matrix() * p.homogeneous()).head<3>() - s.apply(p)).norm(), 1e-12);
  }
  const Similarity a{2.0, {}}, b{3.0, {}};
  EXPECT_EQ(compose(a, b).scale, 6.0);
}

TEST(Similarity, AppliesScaleAfterRigid) {
  const Similarity s{2.0, {}};
  EXPECT_EQ(s.apply(Vec3(1, 1, 1)), Vec3(2, 2, 2));
  const Similarity t{2.0, {Rotation(), Vec3(1, 0, 0)}};
  EXPECT_EQ(t.apply(Vec3(0, 0, 0)), Vec3(2, 0, 0));
  EXPECT_THROW((Similarity{0.0, {}}.validate()), InvalidArgument);
}

TEST(Registration, IdentityAndLengthMismatch) {
  PointMap m(2, 2);
  m.set(0, 0, {1, 2, 3});
  const std::vector<PointMap> one{m};
  const std::vector<RigidTransform> ids{RigidTransform::identity()};
  EXPECT_EQ(register_views(one, ids).front(), m);
  EXPECT_THROW(register_views(one, std::vector<RigidTransform>{}), DimensionMismatch);
  EXPECT_EQ(to_canonical(one, Similarity::identity()).front(), m);
}

TEST(Registration, TwoViewsOfAPlaneStayCoplanar) {
  // Two cameras looking down at z = 0; register view 1 into view 0 and check
  // both clouds lie on the same plane.
  const Intrinsics k{80, 80, 20, 15, 40, 30};
  const CoordMap coords = coords_from_intrinsics(k);
  const RigidTransform cam0{Rotation::unchecked(testutil::axis_angle(Vec3::UnitX(), std::numbers::pi)), Vec3(0, 0, 1)};
  const RigidTransform cam1{
      Rotation::unchecked(testutil::axis_angle(Vec3::UnitX(), std::numbers::pi) * testutil::axis_angle(Vec3::UnitY(), 0.2)),
      Vec3(0.3, -0.1, 1.2)};
  std::vector<PointMap> locals;
  for (const auto& cam : {cam0, cam1}) {
    // Depth of the ray through each pixel to the plane z = 0.
    Raster<double> d(30, 40, 1);
    for (int r = 0; r < 30; ++r) {
      for (int c = 0; c < 40; ++c) {
        const Vec3 ray = cam.rotation * Vec3(coords.at(r, c).x(), coords.at(r, c).y(), 1.0);
        d(r, c) = -cam.translation.z() / ray.z();
      }
    }
    locals.push_back(unproject(coords, DepthMap::from_values(d)));
  }
  const std::vector<RigidTransform> rels{RigidTransform::identity(), relative_pose(cam0, cam1)};
  const auto reg = register_views(locals, rels);
  // The plane in view-0 coordinates: normal R0^T e_z, offset from t0.
  const Vec3 n = cam0.rotation.inverse() * Vec3::UnitZ();
  const double off = -(cam0.translation.dot(Vec3::UnitZ()));
  for (const auto& map : reg) {
    for (int r = 0; r < 30; ++r) {
      for (int c = 0; c < 40; ++c) EXPECT_NEAR(n.dot(map.at(r, c)), off, 1e-9);
    }
  }
}

TEST(Registration, HalfTurnAboutZ) {
  Rng rng(10);
  PointMap v0(4, 4), v1(4, 4);
  const RigidTransform rel{Rotation::unchecked(testutil::axis_angle(Vec3::UnitZ(), std::numbers::pi)), Vec3(0.5, 0, 0)};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const Vec3 p(rng.normal(), rng.normal(), rng.uniform(1, 2));
      v0.set(r, c, p);
      v1.set(r, c, invert(rel).apply(p));
    }
  }
  const std::vector<PointMap> locals{v0, v1};
  const std::vector<RigidTransform> rels{RigidTransform::identity(), rel};
  const auto reg = register_views(locals, rels);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) EXPECT_LT((reg[1].at(r, c) - v0.at(r, c)).norm(), 1e-9);
  }
}
