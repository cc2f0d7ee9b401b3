#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <numbers>
#include <set>

#include "test_util.hpp"

using namespace mrecon;
using testutil::small_config;
using testutil::temp_dir;

namespace {

Camera pinhole(const Vec3& eye, const Vec3& target, int size, double f) {
  Camera cam;
  cam.intrinsics = {f, f, (size - 1) / 2.0, (size - 1) / 2.0, size, size};
  cam.pose = {look_at(eye, target, 0.0), eye};
  cam.target = target;
  return cam;
}

// Geometric (non-quadratic) ray-sphere distance.
std::optional<double> sphere_oracle(const Vec3& c, double r, const Vec3& o, const Vec3& d) {
  const Vec3 l = c - o;
  const double tca = l.dot(d);
  const double d2 = l.squaredNorm() - tca * tca;
  if (d2 > r * r) return std::nullopt;
  const double t = tca - std::sqrt(r * r - d2);
  if (t <= 0.0) return std::nullopt;
  return t;
}

void corrupt_byte(const std::filesystem::path& p, std::size_t offset, char value) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(value);
}

}  // namespace

TEST(RayCast, FrontoParallelPlane) {
  SceneGeometry g;
  const Camera cam = pinhole(Vec3(0.3, 0.1, 1.0), Vec3(0.3, 0.1, 0.0), 21, 40.0);
  const ViewRasters v = render(g, cam);
  for (int r = 0; r < 21; ++r) {
    for (int c = 0; c < 21; ++c) {
      ASSERT_TRUE(v.depth.valid(r, c));
      EXPECT_NEAR(v.depth.values(r, c), 1.0, 1e-12);
      EXPECT_EQ(v.labels(r, c), static_cast<std::uint8_t>(Part::Background));
      EXPECT_EQ(v.masks.at(r, c, Part::Background), 1.0);
    }
  }
}

TEST(RayCast, SphereOnAxis) {
  SceneGeometry g;
  g.spheres.push_back({Vec3(3, 0, 5), 1.0});
  const Camera cam = pinhole(Vec3(0, 0, 5), Vec3(3, 0, 5), 21, 40.0);
  const ViewRasters v = render(g, cam);
  EXPECT_NEAR(v.depth.values(10, 10), 2.0, 1e-12);
  EXPECT_EQ(v.labels(10, 10), static_cast<std::uint8_t>(Part::Object));
}

TEST(RayCast, SphereMatchesGeometricOracle) {
  Rng rng(3);
  SceneGeometry g;
  const Vec3 center(0.6, -0.1, 0.15);
  g.spheres.push_back({center, 0.15});
  const Camera cam = pinhole(Vec3(1.4, 0.5, 0.9), center + Vec3(0.03, -0.02, 0.01), 81, 90.0);
  const ViewRasters v = render(g, cam);
  std::vector<std::pair<int, int>> hits;
  for (int r = 0; r < 81; ++r) {
    for (int c = 0; c < 81; ++c) {
      if (v.labels(r, c) == static_cast<std::uint8_t>(Part::Object)) hits.emplace_back(r, c);
    }
  }
  ASSERT_GE(hits.size(), 100u);
  for (int i = 0; i < 100; ++i) {
    const auto [r, c] = hits[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(hits.size()) - 1))];
    const Intrinsics& k = cam.intrinsics;
    const Vec3 ray((c - k.cx) / k.fx, (r - k.cy) / k.fy, 1.0);
    const auto t = sphere_oracle(center, 0.15, cam.pose.translation, cam.pose.rotation.matrix() * ray.normalized());
    ASSERT_TRUE(t.has_value());
    EXPECT_NEAR(v.depth.values(r, c), *t / ray.norm(), 1e-9);
  }
}

TEST(RayCast, BoxAndCapsule) {
  const Box b{{Rotation::about_axis(Vec3::UnitZ(), std::numbers::pi / 2), Vec3::Zero()}, Vec3(0.1, 0.2, 0.3)};
  EXPECT_NEAR(*ray::box(b, Vec3(0, 0, 5), -Vec3::UnitZ()), 4.7, 1e-12);
  EXPECT_NEAR(*ray::box(b, Vec3(5, 0, 0), -Vec3::UnitX()), 4.8, 1e-12);
  EXPECT_FALSE(ray::box(b, Vec3(5, 0.5, 0), -Vec3::UnitX()).has_value());

  const Capsule cap{Vec3(0, -1, 0), Vec3(0, 1, 0), 0.1};
  EXPECT_NEAR(*ray::capsule(cap, Vec3(-2, 0.3, 0), Vec3::UnitX()), 1.9, 1e-12);
  EXPECT_NEAR(*ray::capsule(cap, Vec3(0, -3, 0), Vec3::UnitY()), 1.9, 1e-12);
  EXPECT_FALSE(ray::capsule(cap, Vec3(-2, 0, 0.2), Vec3::UnitX()).has_value());
}

TEST(RayCast, NearestHitWins) {
  SceneGeometry g;
  g.spheres.push_back({Vec3(0.5, 0, 0.1), 0.1});
  g.capsules.push_back({Vec3(0.5, -0.3, 0.5), Vec3(0.5, 0.3, 0.5), 0.05});
  const Hit h = cast_ray(g, Vec3(0.5, 0, 2), -Vec3::UnitZ());
  EXPECT_EQ(h.part, Part::Robot);
  EXPECT_NEAR(h.distance, 1.45, 1e-12);
  const Hit miss = cast_ray(g, Vec3(0.5, 0, 2), Vec3::UnitZ());
  EXPECT_EQ(miss.part, Part::Invalid);
}

TEST(RayCast, MissIsInvalid) {
  SceneGeometry g;
  const Camera cam = pinhole(Vec3(0, 0, 1), Vec3(1, 0, 1.5), 9, 20.0);
  const ViewRasters v = render(g, cam);
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) {
      EXPECT_FALSE(v.depth.valid(r, c));
      EXPECT_EQ(v.depth.values(r, c), 0.0);
      EXPECT_EQ(v.masks.at(r, c, Part::Robot) + v.masks.at(r, c, Part::Object) + v.masks.at(r, c, Part::Background), 0.0);
    }
  }
}

TEST(CameraSampling, TargetProjectsInsideImage) {
  const CameraSampling cfg;
  const Vec3 center(0.5, 0, 0.1);
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const Camera cam = sample_camera(center, cfg, s);
    const Vec3 pc = invert(cam.pose).apply(cam.target);
    ASSERT_GT(pc.z(), 0.0);
    const Vec2 px = project(pc, cam.intrinsics);
    EXPECT_GE(px.x(), 0.0);
    EXPECT_LT(px.x(), cfg.width);
    EXPECT_GE(px.y(), 0.0);
    EXPECT_LT(px.y(), cfg.height);
    const double radius = (cam.pose.translation - center).norm();
    EXPECT_GE(radius, cfg.radius_min - 1e-12);
    EXPECT_LE(radius, cfg.radius_max + 1e-12);
  }
}

TEST(CameraSampling, Deterministic) {
  const CameraSampling cfg;
  const Camera a = sample_camera(Vec3(0.5, 0, 0.1), cfg, 99), b = sample_camera(Vec3(0.5, 0, 0.1), cfg, 99);
  EXPECT_EQ(a.intrinsics, b.intrinsics);
  EXPECT_EQ(a.pose, b.pose);
  const Camera c = sample_camera(Vec3(0.5, 0, 0.1), cfg, 100);
  EXPECT_FALSE(a.pose == c.pose);
}

TEST(CameraSampling, ZeroRangesGiveCanonicalCamera) {
  const Vec3 center(0.5, 0, 0.1);
  const CameraSampling cfg = CameraSampling::fixed(640, 480, 1.2, 30.0, 45.0);
  const Camera a = sample_camera(center, cfg, 1), b = sample_camera(center, cfg, 2);
  EXPECT_EQ(a.pose, b.pose);
  EXPECT_EQ(a.intrinsics, b.intrinsics);
  EXPECT_EQ(a.intrinsics.fx, 0.85 * 640);
  EXPECT_EQ(a.intrinsics.cx, 320.0);
  const double az = std::numbers::pi / 6, el = std::numbers::pi / 4;
  const Vec3 eye = center + 1.2 * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  EXPECT_LT((a.pose.translation - eye).norm(), 1e-12);
  // optical axis through the center, image x axis horizontal
  const Vec3 axis = a.pose.rotation.matrix().col(2);
  EXPECT_LT((axis - (center - eye).normalized()).norm(), 1e-12);
  EXPECT_NEAR(a.pose.rotation.matrix().col(0).z(), 0.0, 1e-12);
  EXPECT_LT(a.pose.rotation.matrix().col(1).z(), 0.0);  // image down points toward the table
}

TEST(Bundle, ConsistencyAcrossScenes) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SceneBundle b = generate_bundle(small_config(2, 80, 60), seed);
    const ConsistencyReport rep = check_consistency(b);
    EXPECT_GT(rep.checked_pixels, 1000u);
    EXPECT_LT(rep.max_world_residual, 1e-9) << seed;
    EXPECT_LT(rep.max_canonical_residual, 1e-9) << seed;
  }
}

TEST(Bundle, HasAllThreeParts) {
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SceneBundle b = generate_bundle(small_config(2, 80, 60), seed);
    for (const auto& v : b.views) {
      const LabelMap l = binarize(v.masks);
      for (auto x : l.data()) seen.insert(x);
    }
  }
  EXPECT_TRUE(seen.count(static_cast<int>(Part::Robot)));
  EXPECT_TRUE(seen.count(static_cast<int>(Part::Object)));
  EXPECT_TRUE(seen.count(static_cast<int>(Part::Background)));
}

TEST(Bundle, PureFunctionOfSeed) {
  const SceneBundle a = generate_bundle(small_config(2, 40, 30), 17), b = generate_bundle(small_config(2, 40, 30), 17);
  EXPECT_TRUE(bit_identical(a, b));
  const SceneBundle c = generate_bundle(small_config(2, 40, 30), 18);
  EXPECT_FALSE(bit_identical(a, c));
}

TEST(Bundle, KeypointsProjectFromStoredPose) {
  const SceneBundle b = generate_bundle(small_config(2), 4);
  ASSERT_EQ(b.keypoints3d.size(), 8u);
  for (const auto& v : b.views) {
    const Mat3 rt = v.pose_robot.rotation.matrix().transpose();
    for (std::size_t i = 0; i < b.keypoints3d.size(); ++i) {
      const Vec3 pc = rt * (b.keypoints3d[i] - v.pose_robot.translation);
      const Vec2 px(v.intrinsics.fx * pc.x() / pc.z() + v.intrinsics.cx, v.intrinsics.fy * pc.y() / pc.z() + v.intrinsics.cy);
      EXPECT_LT((px - v.keypoints[i]).norm(), 1e-9);
    }
  }
}

TEST(BundleIO, RoundTripBitExact) {
  const auto dir = temp_dir("roundtrip");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SceneBundle b = generate_bundle(small_config(seed % 2 ? 1 : 2, 48, 36), 1000 + seed);
    const auto sub = dir / std::to_string(seed);
    save_bundle(b, sub);
    EXPECT_TRUE(bit_identical(b, load_bundle(sub))) << seed;
  }
}

TEST(BundleIO, BadMagic) {
  const auto dir = temp_dir("magic");
  save_bundle(generate_bundle(small_config(1, 16, 12), 1), dir);
  corrupt_byte(dir / "view0_depth.r3rb", 0, 'X');
  EXPECT_THROW(load_bundle(dir), BadMagic);
}

TEST(BundleIO, TruncatedReportsOffset) {
  const auto dir = temp_dir("trunc");
  save_bundle(generate_bundle(small_config(1, 16, 12), 1), dir);
  const auto p = dir / "view0_coords.r3rb";
  const auto full = std::filesystem::file_size(p);
  std::filesystem::resize_file(p, full - 13);
  try {
    load_bundle(dir);
    FAIL() << "expected TruncatedFile";
  } catch (const TruncatedFile& e) {
    EXPECT_EQ(e.offset(), full - 13);
    EXPECT_NE(std::string(e.what()).find("view0_coords.r3rb"), std::string::npos);
  }
}

TEST(BundleIO, MissingMetadataNamesFile) {
  const auto dir = temp_dir("missing");
  save_bundle(generate_bundle(small_config(1, 16, 12), 1), dir);
  std::filesystem::remove(dir / "meta.json");
  try {
    load_bundle(dir);
    FAIL() << "expected MissingFile";
  } catch (const MissingFile& e) {
    EXPECT_EQ(std::filesystem::path(e.path()).filename(), "meta.json");
  }
}

TEST(BundleIO, VersionMismatch) {
  const auto dir = temp_dir("version");
  save_bundle(generate_bundle(small_config(1, 16, 12), 1), dir);
  std::ifstream in(dir / "meta.json");
  nlohmann::json meta = nlohmann::json::parse(in);
  in.close();
  meta["format_version"] = kBundleFormatVersion + 1;
  std::ofstream(dir / "meta.json") << meta.dump();
  EXPECT_THROW(load_bundle(dir), VersionMismatch);
}

TEST(BundleIO, ShapeMismatch) {
  const auto dir = temp_dir("shape");
  save_bundle(generate_bundle(small_config(1, 16, 12), 1), dir);
  save_raster((dir / "view0_depth.r3rb").string(), Raster<double>(12, 15, 1), DType::F64);
  EXPECT_THROW(load_bundle(dir), DimensionMismatch);
}

TEST(MockPredictor, ZeroNoiseIsExact) {
  const SceneBundle b = generate_bundle(small_config(2, 64, 48), 3);
  const LossInputs gt = ground_truth(b);
  const Prediction p = mock_predict(b, NoiseModel{}, 11);
  ASSERT_EQ(p.outputs.points.size(), 2u);
  for (int v = 0; v < 2; ++v) {
    EXPECT_TRUE(p.outputs.points[v] == gt.points[v]);
    EXPECT_TRUE(p.outputs.masks[v].values == gt.masks[v].values);
    EXPECT_TRUE(p.outputs.heatmaps[v] == gt.heatmaps[v]);
    EXPECT_EQ(p.outputs.keypoints[v], gt.keypoints[v]);
    EXPECT_EQ(p.outputs.relative_poses[v], gt.relative_poses[v]);
    EXPECT_TRUE(p.depth[v].values == b.views[v].depth.values);
  }
  EXPECT_EQ(p.outputs.similarity, gt.similarity);
}

TEST(MockPredictor, Deterministic) {
  const SceneBundle b = generate_bundle(small_config(2, 32, 24), 3);
  NoiseModel n;
  n.depth = 0.01;
  n.translation = 0.02;
  n.mask_flip = 0.1;
  const Prediction a = mock_predict(b, n, 5), c = mock_predict(b, n, 5), d = mock_predict(b, n, 6);
  EXPECT_TRUE(a.outputs.points[1] == c.outputs.points[1]);
  EXPECT_EQ(a.outputs.relative_poses[1], c.outputs.relative_poses[1]);
  EXPECT_FALSE(a.outputs.points[1] == d.outputs.points[1]);
}

TEST(MockPredictor, TranslationErrorMatchesChiMean) {
  // |sigma z| for z ~ N(0, I3) has mean 2 sqrt(2/pi) sigma.
  const double sigma = 0.01;
  NoiseModel n;
  n.translation = sigma;
  const int scenes = 400;
  double sum = 0.0;
  for (int i = 0; i < scenes; ++i) {
    const SceneBundle b = generate_bundle(small_config(2, 8, 6), 5000 + i);
    const Prediction p = mock_predict(b, n, 1, false);
    sum += relative_pose_metrics(p.outputs.relative_poses[1], relative_poses(b)[1]).translation_err;
  }
  const double mean = sum / scenes;
  const double expected = 2.0 * std::sqrt(2.0 / std::numbers::pi) * sigma;
  const double se = std::sqrt(3.0 - 8.0 / std::numbers::pi) * sigma / std::sqrt(static_cast<double>(scenes));
  EXPECT_NEAR(mean, expected, 4.0 * se);
}

TEST(MockPredictor, MaskFlipRate) {
  const SceneBundle b = generate_bundle(small_config(1, 64, 48), 9);
  NoiseModel n;
  n.mask_flip = 0.2;
  const Prediction p = mock_predict(b, n, 2, false);
  const auto& a = p.outputs.masks[0].values.data();
  const auto& g = b.views[0].masks.values.data();
  std::size_t flips = 0;
  for (std::size_t i = 0; i < a.size(); ++i) flips += a[i] != g[i];
  const double rate = static_cast<double>(flips) / static_cast<double>(a.size());
  EXPECT_NEAR(rate, 0.2, 4.0 * std::sqrt(0.2 * 0.8 / static_cast<double>(a.size())));
}

TEST(MockPredictor, RejectsNegativeSigma) {
  const SceneBundle b = generate_bundle(small_config(1, 8, 6), 9);
  NoiseModel n;
  n.depth = -1.0;
  EXPECT_THROW(mock_predict(b, n, 1), InvalidArgument);
  n.depth = 0.0;
  n.mask_flip = 1.5;
  EXPECT_THROW(mock_predict(b, n, 1), InvalidArgument);
}

TEST(Heatmap, PeakAtKeypoint) {
  const Heatmap hm = gaussian_heatmap({{5, 7}}, 12, 10, 2.0);
  EXPECT_EQ(hm(7, 5), 1.0);
  EXPECT_NEAR(hm(7, 7), std::exp(-0.5), 1e-15);
}

TEST(ParallelMap, OrderedAndIndependentOfWorkers) {
  for (int workers : {1, 2, 8}) {
    const auto out = parallel_map<std::size_t>(100, workers, [](std::size_t i) { return i * i; });
    for (std::size_t i = 0; i < 100; ++i) {
      ASSERT_TRUE(out.ok(i));
      EXPECT_EQ(out.values[i], i * i);
    }
  }
}

TEST(ParallelMap, CapturesExceptionsPerIndex) {
  std::atomic<int> calls{0};
  const auto out = parallel_map<int>(20, 4, [&](std::size_t i) {
    ++calls;
    if (i % 7 == 3) throw InvalidArgument("bad " + std::to_string(i));
    return static_cast<int>(i);
  });
  EXPECT_EQ(calls.load(), 20);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(out.ok(i), i % 7 != 3);
  EXPECT_THROW(std::rethrow_exception(out.errors[3]), InvalidArgument);
}
