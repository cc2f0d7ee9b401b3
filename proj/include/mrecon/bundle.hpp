#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrecon/kinematics.hpp"
#include "mrecon/pnp.hpp"
#include "mrecon/raster_io.hpp"
#include "mrecon/scene.hpp"

namespace mrecon {

inline constexpr int kBundleFormatVersion = 1;

// Bundle directory layout:
//
//   meta.json            metadata, all pose matrices 4x4 row-major
//   chain.json           kinematic chain and keypoint spec
//   view<i>_depth.r3rb   f64, 1 channel, 0 where invalid
//   view<i>_valid.r3rb   u8, 1 channel
//   view<i>_coords.r3rb  f64, 2 channels (x, y)
//   view<i>_masks.r3rb   f32, 3 channels (robot, object, background)

struct SceneConfig {
  CameraSampling camera;
  int views = 2;
  Vec3 workspace_center{0.5, 0.0, 0.1};
  int min_spheres = 1, max_spheres = 3;
  int min_boxes = 1, max_boxes = 3;
  double joint_margin = 0.1;  ///< fraction of each joint range kept clear of the limits

  void validate() const {
    if (views < 1 || views > 2) throw InvalidArgument("scene config: views must be 1 or 2");
    if (camera.width < 2 || camera.height < 2) throw InvalidArgument("scene config: image too small");
    if (min_spheres < 0 || min_spheres > max_spheres || min_boxes < 0 || min_boxes > max_boxes) {
      throw InvalidArgument("scene config: bad primitive counts");
    }
    if (!(joint_margin >= 0.0 && joint_margin < 0.5)) throw InvalidArgument("scene config: joint margin in [0, 0.5)");
  }
};

struct ViewData {
  DepthMap depth;
  CoordMap coords;
  MaskSet masks;
  Intrinsics intrinsics;
  RigidTransform pose_world;  ///< camera -> world
  RigidTransform pose_robot;  ///< camera -> robot base
  Keypoints2D keypoints;      ///< projections of the 3D keypoints

  bool operator==(const ViewData&) const = default;
};

struct SceneBundle {
  int format_version = kBundleFormatVersion;
  std::uint64_t seed = 0;
  SceneSpec spec;
  ChainFile chain;
  std::vector<ViewData> views;
  Similarity similarity;  ///< view-0 camera frame -> robot base
  std::vector<Vec3> keypoints3d;  ///< robot base frame
};

namespace detail {

inline nlohmann::json pose_to_json(const RigidTransform& t) {
  const Mat4 m = t.matrix();
  nlohmann::json out = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) for (int c = 0; c < 4; ++c) out.push_back(m(r, c));
  return out;
}

inline RigidTransform pose_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 16) throw FormatError("pose needs 16 row-major entries");
  Mat4 m;
  for (int i = 0; i < 16; ++i) m(i / 4, i % 4) = j[i].get<double>();
  return RigidTransform::from_matrix(m);
}

inline nlohmann::json intrinsics_to_json(const Intrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

inline Intrinsics intrinsics_from_json(const nlohmann::json& j) {
  Intrinsics k{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
               j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>()};
  k.validate();
  return k;
}

inline nlohmann::json spec_to_json(const SceneSpec& s) {
  nlohmann::json spheres = nlohmann::json::array(), boxes = nlohmann::json::array();
  for (const auto& sp : s.spheres) spheres.push_back({{"center", vec3_to_json(sp.center)}, {"radius", sp.radius}});
  for (const auto& b : s.boxes) {
    boxes.push_back({{"pose", pose_to_json(b.pose)}, {"half_extents", vec3_to_json(b.half_extents)}});
  }
  return {{"table",
           {{"height", s.table.height},
            {"x_min", s.table.x_min},
            {"x_max", s.table.x_max},
            {"y_min", s.table.y_min},
            {"y_max", s.table.y_max}}},
          {"spheres", spheres},
          {"boxes", boxes},
          {"chain_file", s.chain_file},
          {"joint_state", s.joints},
          {"views", s.views},
          {"seed", s.seed}};
}

inline SceneSpec spec_from_json(const nlohmann::json& j) {
  SceneSpec s;
  const auto& t = j.at("table");
  s.table = {t.at("height").get<double>(), t.at("x_min").get<double>(), t.at("x_max").get<double>(),
             t.at("y_min").get<double>(), t.at("y_max").get<double>()};
  for (const auto& sp : j.at("spheres")) s.spheres.push_back({vec3_from_json(sp.at("center")), sp.at("radius").get<double>()});
  for (const auto& b : j.at("boxes")) s.boxes.push_back({pose_from_json(b.at("pose")), vec3_from_json(b.at("half_extents"))});
  s.chain_file = j.at("chain_file").get<std::string>();
  s.joints = j.at("joint_state").get<JointState>();
  s.views = j.at("views").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

inline std::string view_file(std::size_t view, const char* what) {
  return "view" + std::to_string(view) + "_" + what + ".r3rb";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline JointState sample_joint_state(const KinematicChain& chain, double margin, Rng& rng) {
  JointState q;
  for (const auto& j : chain.joints()) {
    if (j.type == JointType::Fixed) continue;
    double lo = -std::numbers::pi, hi = std::numbers::pi;
    if (j.limits) {
      const double span = j.limits->upper - j.limits->lower;
      lo = j.limits->lower + margin * span;
      hi = j.limits->upper - margin * span;
    }
    q.push_back(rng.uniform(lo, hi));
  }
  return q;
}

}  // namespace detail

/// Primitives rest on the table top inside the workspace; the arm pose is
/// drawn uniformly from the interior of its joint ranges.
inline SceneSpec random_scene_spec(const SceneConfig& cfg, const KinematicChain& chain, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  SceneSpec s;
  s.seed = seed;
  s.views = cfg.views;
  const double h = s.table.height;
  const int n_spheres = rng.uniform_int(cfg.min_spheres, cfg.max_spheres);
  for (int i = 0; i < n_spheres; ++i) {
    const double r = rng.uniform(0.03, 0.08);
    s.spheres.push_back({Vec3(rng.uniform(0.3, 0.8), rng.uniform(-0.4, 0.4), h + r), r});
  }
  const int n_boxes = rng.uniform_int(cfg.min_boxes, cfg.max_boxes);
  for (int i = 0; i < n_boxes; ++i) {
    const Vec3 half(rng.uniform(0.02, 0.06), rng.uniform(0.02, 0.06), rng.uniform(0.02, 0.06));
    const Rotation yaw = Rotation::about_axis(Vec3::UnitZ(), rng.uniform(-std::numbers::pi, std::numbers::pi));
    s.boxes.push_back({{yaw, Vec3(rng.uniform(0.3, 0.8), rng.uniform(-0.4, 0.4), h + half.z())}, half});
  }
  s.joints = detail::sample_joint_state(chain, cfg.joint_margin, rng);
  return s;
}

/// Renders one scene. Each view's camera is resampled from its own stream
/// until every keypoint lies in front of it and the camera sits outside all
/// solids.
inline SceneBundle generate_bundle(const SceneConfig& cfg, std::uint64_t seed,
                                   const ChainFile& chain = {default_arm(), default_keypoints()}) {
  cfg.validate();
  SceneBundle b;
  b.seed = seed;
  b.chain = chain;
  b.spec = random_scene_spec(cfg, chain.chain, derive_seed(seed, 0));
  const SceneGeometry geom = resolve_geometry(b.spec, chain.chain);
  b.keypoints3d = keypoints_3d(chain.chain, b.spec.joints, chain.keypoints);

  for (int v = 0; v < cfg.views; ++v) {
    Rng rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(v)));
    Camera cam;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) throw DegenerateInput("generate_bundle: no admissible camera found");
      cam = sample_camera(cfg.workspace_center, cfg.camera, rng);
      if (inside_solid(geom, cam.pose.translation)) continue;
      const RigidTransform world_to_cam = invert(cam.pose);
      const bool in_front = std::all_of(b.keypoints3d.begin(), b.keypoints3d.end(),
                                        [&](const Vec3& p) { return world_to_cam.apply(p).z() > 0.05; });
      if (in_front) break;
    }
    ViewRasters ras = render(geom, cam);
    ViewData view{std::move(ras.depth), std::move(ras.coords), std::move(ras.masks), cam.intrinsics,
                  cam.pose, cam.pose, {}};
    const RigidTransform base_to_cam = invert(view.pose_robot);
    for (const Vec3& p : b.keypoints3d) view.keypoints.push_back(project(base_to_cam.apply(p), cam.intrinsics));
    b.views.push_back(std::move(view));
  }
  b.similarity = {1.0, b.views.front().pose_robot};
  return b;
}

/// Ground-truth relative poses: view i expressed in view 0's frame.
inline std::vector<RigidTransform> relative_poses(const SceneBundle& b) {
  std::vector<RigidTransform> out;
  for (const auto& v : b.views) out.push_back(relative_pose(b.views.front().pose_robot, v.pose_robot));
  return out;
}

inline std::vector<PointMap> local_points(const SceneBundle& b) {
  std::vector<PointMap> out;
  for (const auto& v : b.views) out.push_back(unproject(v.coords, v.depth));
  return out;
}

struct ConsistencyReport {
  double max_world_residual = 0.0;      ///< pose_world route, distance to the labelled surface
  double max_canonical_residual = 0.0;  ///< register + canonicalize route
  std::size_t checked_pixels = 0;
};

/// Reprojects every valid pixel into the world twice (through the stored world
/// pose, and through registration plus the similarity) and measures the
/// distance to the analytic surface of the pixel's labelled part.
inline ConsistencyReport check_consistency(const SceneBundle& b) {
  const SceneGeometry geom = resolve_geometry(b.spec, b.chain.chain);
  const auto locals = local_points(b);
  const auto rels = relative_poses(b);
  const auto canonical = to_canonical(register_views(locals, rels), b.similarity);
  ConsistencyReport rep;
  for (std::size_t i = 0; i < b.views.size(); ++i) {
    const ViewData& v = b.views[i];
    const LabelMap labels = binarize(v.masks);
    for (int r = 0; r < v.depth.height(); ++r) {
      for (int c = 0; c < v.depth.width(); ++c) {
        if (!locals[i].is_valid(r, c)) continue;
        const Part part = static_cast<Part>(labels(r, c));
        const Vec3 world = v.pose_world.apply(locals[i].at(r, c));
        rep.max_world_residual = std::max(rep.max_world_residual, surface_distance(geom, world, part));
        rep.max_canonical_residual =
            std::max(rep.max_canonical_residual, surface_distance(geom, canonical[i].at(r, c), part));
        ++rep.checked_pixels;
      }
    }
  }
  return rep;
}

inline void save_bundle(const SceneBundle& b, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create bundle directory " + dir.string() + ": " + ec.message());

  nlohmann::json meta;
  meta["format_version"] = b.format_version;
  meta["seed"] = b.seed;
  meta["scene"] = detail::spec_to_json(b.spec);
  meta["similarity"] = {{"scale", b.similarity.scale}, {"rigid", detail::pose_to_json(b.similarity.rigid)}};
  nlohmann::json kp = nlohmann::json::array();
  for (const auto& p : b.keypoints3d) kp.push_back(detail::vec3_to_json(p));
  meta["keypoints_3d"] = kp;
  meta["views"] = nlohmann::json::array();
  for (std::size_t i = 0; i < b.views.size(); ++i) {
    const ViewData& v = b.views[i];
    nlohmann::json kp2 = nlohmann::json::array();
    for (const auto& p : v.keypoints) kp2.push_back({p.x(), p.y()});
    meta["views"].push_back({{"intrinsics", detail::intrinsics_to_json(v.intrinsics)},
                             {"pose_world", detail::pose_to_json(v.pose_world)},
                             {"pose_robot", detail::pose_to_json(v.pose_robot)},
                             {"keypoints_2d", kp2},
                             {"files",
                              {{"depth", detail::view_file(i, "depth")},
                               {"valid", detail::view_file(i, "valid")},
                               {"coords", detail::view_file(i, "coords")},
                               {"masks", detail::view_file(i, "masks")}}}});
    save_raster((dir / detail::view_file(i, "depth")).string(), v.depth.values, DType::F64);
    save_raster((dir / detail::view_file(i, "valid")).string(), v.depth.valid, DType::U8);
    save_raster((dir / detail::view_file(i, "coords")).string(), v.coords.values, DType::F64);
    save_raster((dir / detail::view_file(i, "masks")).string(), v.masks.values, DType::F32);
  }
  detail::write_text(dir / "meta.json", meta.dump(1) + "\n");
  detail::write_text(dir / b.spec.chain_file, chain_to_json(b.chain.chain, b.chain.keypoints).dump(1) + "\n");
}

inline SceneBundle load_bundle(const std::filesystem::path& dir) {
  const nlohmann::json meta = detail::read_json(dir / "meta.json");
  SceneBundle b;
  try {
    b.format_version = meta.at("format_version").get<int>();
    if (b.format_version != kBundleFormatVersion) {
      throw VersionMismatch((dir / "meta.json").string() + ": format version " + std::to_string(b.format_version) +
                            ", expected " + std::to_string(kBundleFormatVersion));
    }
    b.seed = meta.at("seed").get<std::uint64_t>();
    b.spec = detail::spec_from_json(meta.at("scene"));
    b.similarity = {meta.at("similarity").at("scale").get<double>(),
                    detail::pose_from_json(meta.at("similarity").at("rigid"))};
    for (const auto& p : meta.at("keypoints_3d")) b.keypoints3d.push_back(detail::vec3_from_json(p));
    for (const auto& vj : meta.at("views")) {
      ViewData v;
      v.intrinsics = detail::intrinsics_from_json(vj.at("intrinsics"));
      v.pose_world = detail::pose_from_json(vj.at("pose_world"));
      v.pose_robot = detail::pose_from_json(vj.at("pose_robot"));
      for (const auto& p : vj.at("keypoints_2d")) v.keypoints.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      const auto& files = vj.at("files");
      auto path = [&](const char* key) { return (dir / files.at(key).get<std::string>()).string(); };
      v.depth.values = load_raster<double>(path("depth"));
      v.depth.valid = load_raster<std::uint8_t>(path("valid"));
      v.coords.values = load_raster<double>(path("coords"));
      v.masks.values = load_raster<double>(path("masks"));
      const int h = v.intrinsics.height, w = v.intrinsics.width;
      auto check = [&](const auto& r, int ch, const char* what) {
        if (r.height() != h || r.width() != w || r.channels() != ch) {
          throw DimensionMismatch(path(what) + ": raster shape does not match the intrinsics");
        }
      };
      check(v.depth.values, 1, "depth");
      check(v.depth.valid, 1, "valid");
      check(v.coords.values, 2, "coords");
      check(v.masks.values, 3, "masks");
      b.views.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "meta.json").string() + ": " + e.what());
  }
  if (static_cast<int>(b.views.size()) != b.spec.views) {
    throw FormatError((dir / "meta.json").string() + ": view count does not match the scene");
  }
  b.chain = load_chain_file((dir / b.spec.chain_file).string());
  return b;
}

inline bool operator==(const SceneSpec& a, const SceneSpec& b) {
  auto same_box = [](const Box& x, const Box& y) { return x.pose == y.pose && x.half_extents == y.half_extents; };
  auto same_sphere = [](const Sphere& x, const Sphere& y) { return x.center == y.center && x.radius == y.radius; };
  return a.table.height == b.table.height && a.table.x_min == b.table.x_min && a.table.x_max == b.table.x_max &&
         a.table.y_min == b.table.y_min && a.table.y_max == b.table.y_max &&
         std::equal(a.spheres.begin(), a.spheres.end(), b.spheres.begin(), b.spheres.end(), same_sphere) &&
         std::equal(a.boxes.begin(), a.boxes.end(), b.boxes.begin(), b.boxes.end(), same_box) &&
         a.chain_file == b.chain_file && a.joints == b.joints && a.views == b.views && a.seed == b.seed;
}

/// Field-by-field exact comparison, chain included via its serialized form.
inline bool bit_identical(const SceneBundle& a, const SceneBundle& b) {
  return a.format_version == b.format_version && a.seed == b.seed && a.spec == b.spec && a.views == b.views &&
         a.similarity == b.similarity && a.keypoints3d == b.keypoints3d &&
         chain_to_json(a.chain.chain, a.chain.keypoints) == chain_to_json(b.chain.chain, b.chain.keypoints);
}

}  // namespace mrecon
