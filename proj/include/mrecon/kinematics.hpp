#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrecon/transforms.hpp"

namespace mrecon {

enum class JointType { Revolute, Prismatic, Fixed };

struct JointLimits {
  double lower = 0.0;
  double upper = 0.0;
};

struct Joint {
  std::string name;
  JointType type = JointType::Revolute;
  Vec3 axis = Vec3::UnitZ();
  /// Child link frame relative to the parent link frame at zero motion.
  RigidTransform origin;
  std::optional<JointLimits> limits;
};

/// Serial chain. Link 0 is the base; joint k connects link k-1 to link k, so a
/// chain with J joints has J + 1 links. Fixed joints consume no state entries.
class KinematicChain {
 public:
  KinematicChain() = default;
  explicit KinematicChain(std::vector<Joint> joints, double link_radius = 0.04)
      : joints_(std::move(joints)), link_radius_(link_radius) {
    for (const auto& j : joints_) {
      if (j.type != JointType::Fixed && std::abs(j.axis.norm() - 1.0) > 1e-9) {
        throw InvalidArgument("kinematic chain: joint '" + j.name + "' axis is not unit length");
      }
      if (j.limits && !(j.limits->lower <= j.limits->upper)) {
        throw InvalidArgument("kinematic chain: joint '" + j.name + "' has inverted limits");
      }
    }
  }

  const std::vector<Joint>& joints() const { return joints_; }
  int link_count() const { return static_cast<int>(joints_.size()) + 1; }
  /// Number of actuated joints (Q).
  int dof() const {
    int n = 0;
    for (const auto& j : joints_) n += j.type != JointType::Fixed;
    return n;
  }
  /// Capsule radius used when the chain is rendered.
  double link_radius() const { return link_radius_; }

 private:
  std::vector<Joint> joints_;
  double link_radius_ = 0.04;
};

/// Radians for revolute joints, meters for prismatic ones.
using JointState = std::vector<double>;

struct Keypoint {
  int link = 0;
  Vec3 offset = Vec3::Zero();
};

using KeypointSpec = std::vector<Keypoint>;

inline void validate_state(const KinematicChain& chain, const JointState& q) {
  if (static_cast<int>(q.size()) != chain.dof()) {
    throw DimensionMismatch("joint state has " + std::to_string(q.size()) + " entries, chain has " +
                            std::to_string(chain.dof()) + " joints");
  }
  std::size_t i = 0;
  for (const auto& j : chain.joints()) {
    if (j.type == JointType::Fixed) continue;
    const double v = q[i++];
    if (!std::isfinite(v)) throw InvalidArgument("joint state: non-finite value for " + j.name);
    if (j.limits && (v < j.limits->lower || v > j.limits->upper)) {
      throw JointLimitViolation("joint '" + j.name + "' value " + std::to_string(v) +
                                " outside [" + std::to_string(j.limits->lower) + ", " +
                                std::to_string(j.limits->upper) + "]");
    }
  }
}

/// Base-frame pose of every link (index 0 is the base, identity).
inline std::vector<RigidTransform> forward_kinematics(const KinematicChain& chain,
                                                      const JointState& q) {
  validate_state(chain, q);
  std::vector<RigidTransform> poses;
  poses.reserve(chain.link_count());
  poses.push_back(RigidTransform::identity());
  std::size_t i = 0;
  for (const auto& j : chain.joints()) {
    RigidTransform motion;
    if (j.type == JointType::Revolute) {
      motion.rotation = Rotation::about_axis(j.axis, q[i++]);
    } else if (j.type == JointType::Prismatic) {
      motion.translation = j.axis * q[i++];
    }
    poses.push_back(compose(compose(poses.back(), j.origin), motion));
  }
  return poses;
}

inline void validate_keypoints(const KinematicChain& chain, const KeypointSpec& spec) {
  for (const auto& kp : spec) {
    if (kp.link < 0 || kp.link >= chain.link_count()) {
      throw InvalidArgument("keypoint link index " + std::to_string(kp.link) + " out of range");
    }
  }
}

inline std::vector<Vec3> keypoints_3d(const KinematicChain& chain, const JointState& q,
                                      const KeypointSpec& spec) {
  validate_keypoints(chain, spec);
  const auto poses = forward_kinematics(chain, q);
  std::vector<Vec3> out;
  out.reserve(spec.size());
  for (const auto& kp : spec) out.push_back(poses[kp.link].apply(kp.offset));
  return out;
}

/// Origin transform from a translation and fixed-axis roll/pitch/yaw,
/// R = Rz(yaw) Ry(pitch) Rx(roll).
inline RigidTransform origin_from_xyz_rpy(const Vec3& xyz, const Vec3& rpy) {
  const Mat3 r = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
                  Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                  Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
                     .toRotationMatrix();
  return {Rotation::unchecked(r), xyz};
}

/// 7-DoF arm with the link geometry of a common collaborative manipulator,
/// plus a fixed flange frame.
inline KinematicChain default_arm() {
  constexpr double h = std::numbers::pi / 2.0;
  auto rev = [](const char* name, Vec3 xyz, Vec3 rpy, double lo, double hi) {
    return Joint{name, JointType::Revolute, Vec3::UnitZ(), origin_from_xyz_rpy(xyz, rpy),
                 JointLimits{lo, hi}};
  };
  std::vector<Joint> joints = {
      rev("joint1", {0, 0, 0.333}, {0, 0, 0}, -2.8973, 2.8973),
      rev("joint2", {0, 0, 0}, {-h, 0, 0}, -1.7628, 1.7628),
      rev("joint3", {0, -0.316, 0}, {h, 0, 0}, -2.8973, 2.8973),
      rev("joint4", {0.0825, 0, 0}, {h, 0, 0}, -3.0718, -0.0698),
      rev("joint5", {-0.0825, 0.384, 0}, {-h, 0, 0}, -2.8973, 2.8973),
      rev("joint6", {0, 0, 0}, {h, 0, 0}, -0.0175, 3.7525),
      rev("joint7", {0.088, 0, 0}, {h, 0, 0}, -2.8973, 2.8973),
      Joint{"flange", JointType::Fixed, Vec3::UnitZ(),
            origin_from_xyz_rpy({0, 0, 0.107}, {0, 0, 0}), std::nullopt},
  };
  return KinematicChain(std::move(joints), 0.05);
}

/// Eight keypoints spread from the base to the flange.
inline KeypointSpec default_keypoints() {
  return {{0, {0.1, 0.0, 0.05}}, {1, {0, 0, 0}},    {3, {0, 0, 0}}, {4, {0, 0, 0}},
          {5, {0, 0, 0}},        {6, {0, 0, 0}},    {7, {0, 0, 0}}, {8, {0, 0, 0.05}}};
}

// Chain file schema (JSON):
// {
//   "link_radius": 0.05,
//   "joints": [ { "name": "j1", "type": "revolute" | "prismatic" | "fixed",
//                 "axis": [x, y, z], "xyz": [x, y, z], "rpy": [r, p, y],
//                 "limits": [lower, upper] } ... ],
//   "keypoints": [ { "link": 2, "offset": [x, y, z] } ... ]
// }

namespace detail {

inline Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json vec3_to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline nlohmann::json mat_to_json(const Mat3& m) {
  nlohmann::json out = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.push_back(m(r, c));
  return out;
}

}  // namespace detail

struct ChainFile {
  KinematicChain chain;
  KeypointSpec keypoints;
};

/// Joint origins serialize as "xyz" plus a row-major 3x3 "rotation"; "rpy" is
/// accepted on input as an alternative to "rotation".
inline nlohmann::json chain_to_json(const KinematicChain& chain, const KeypointSpec& keypoints) {
  nlohmann::json j;
  j["link_radius"] = chain.link_radius();
  j["joints"] = nlohmann::json::array();
  for (const auto& joint : chain.joints()) {
    nlohmann::json jj;
    jj["name"] = joint.name;
    jj["type"] = joint.type == JointType::Revolute    ? "revolute"
                 : joint.type == JointType::Prismatic ? "prismatic"
                                                      : "fixed";
    jj["axis"] = detail::vec3_to_json(joint.axis);
    jj["xyz"] = detail::vec3_to_json(joint.origin.translation);
    jj["rotation"] = detail::mat_to_json(joint.origin.rotation.matrix());
    if (joint.limits) jj["limits"] = {joint.limits->lower, joint.limits->upper};
    j["joints"].push_back(jj);
  }
  j["keypoints"] = nlohmann::json::array();
  for (const auto& kp : keypoints) {
    j["keypoints"].push_back({{"link", kp.link}, {"offset", detail::vec3_to_json(kp.offset)}});
  }
  return j;
}

inline ChainFile chain_from_json(const nlohmann::json& j) {
  try {
    std::vector<Joint> joints;
    for (const auto& jj : j.at("joints")) {
      Joint joint;
      joint.name = jj.value("name", "joint" + std::to_string(joints.size() + 1));
      const std::string type = jj.value("type", "revolute");
      if (type == "revolute") joint.type = JointType::Revolute;
      else if (type == "prismatic") joint.type = JointType::Prismatic;
      else if (type == "fixed") joint.type = JointType::Fixed;
      else throw FormatError("chain file: unknown joint type '" + type + "'");
      if (jj.contains("axis")) joint.axis = detail::vec3_from_json(jj["axis"]);
      const Vec3 xyz = jj.contains("xyz") ? detail::vec3_from_json(jj["xyz"]) : Vec3::Zero();
      if (jj.contains("rotation")) {
        const auto& rj = jj["rotation"];
        if (!rj.is_array() || rj.size() != 9) throw FormatError("chain file: rotation needs 9 entries");
        Mat3 m;
        for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = rj[i].get<double>();
        joint.origin = {Rotation::from_matrix(m), xyz};
      } else {
        const Vec3 rpy = jj.contains("rpy") ? detail::vec3_from_json(jj["rpy"]) : Vec3::Zero();
        joint.origin = origin_from_xyz_rpy(xyz, rpy);
      }
      if (jj.contains("limits")) {
        joint.limits = JointLimits{jj["limits"].at(0).get<double>(), jj["limits"].at(1).get<double>()};
      }
      joints.push_back(std::move(joint));
    }
    ChainFile out{KinematicChain(std::move(joints), j.value("link_radius", 0.04)), {}};
    if (j.contains("keypoints")) {
      for (const auto& kj : j["keypoints"]) {
        out.keypoints.push_back({kj.at("link").get<int>(), detail::vec3_from_json(kj.at("offset"))});
      }
    }
    validate_keypoints(out.chain, out.keypoints);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("chain file: ") + e.what());
  }
}

inline ChainFile load_chain_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("chain file " + path + ": " + e.what());
  }
  return chain_from_json(j);
}

}  // namespace mrecon
