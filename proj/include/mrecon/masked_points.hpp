#pragma once

#include <array>
#include <cstdint>

#include "mrecon/camera.hpp"

namespace mrecon {

/// Part labels as stored in 1-byte label rasters.
enum class Part : std::uint8_t { Invalid = 0, Robot = 1, Object = 2, Background = 3 };

inline constexpr std::array<Part, 3> kParts = {Part::Robot, Part::Object, Part::Background};

inline const char* part_name(Part p) {
  switch (p) {
    case Part::Robot: return "robot";
    case Part::Object: return "object";
    case Part::Background: return "background";
    default: return "invalid";
  }
}

/// Per-part probabilities. Channel 0 robot, 1 object, 2 background.
struct MaskSet {
  Raster<double> values;

  MaskSet() = default;
  MaskSet(int height, int width) : values(height, width, 3) {}

  int height() const { return values.height(); }
  int width() const { return values.width(); }
  double& at(int r, int c, Part p) { return values(r, c, static_cast<int>(p) - 1); }
  double at(int r, int c, Part p) const { return values(r, c, static_cast<int>(p) - 1); }

  void validate() const {
    if (values.channels() != 3) throw DimensionMismatch("mask set must have three channels");
    for (double v : values.data()) {
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("mask probabilities must lie in [0, 1]");
    }
  }
  bool operator==(const MaskSet&) const = default;
};

using LabelMap = Raster<std::uint8_t>;

/// Labels each pixel with the most probable part among those above
/// `threshold`. Ties go to the earlier part in robot, object, background order.
inline LabelMap binarize(const MaskSet& masks, double threshold = 0.5) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidArgument("binarize: threshold must lie in (0, 1)");
  }
  LabelMap labels(masks.height(), masks.width(), 1, static_cast<std::uint8_t>(Part::Invalid));
  for (int r = 0; r < masks.height(); ++r) {
    for (int c = 0; c < masks.width(); ++c) {
      Part best = Part::Invalid;
      double best_p = threshold;
      for (Part p : kParts) {
        const double prob = masks.at(r, c, p);
        if (prob > threshold && (best == Part::Invalid || prob > best_p)) {
          best = p;
          best_p = prob;
        }
      }
      labels(r, c) = static_cast<std::uint8_t>(best);
    }
  }
  return labels;
}

struct LabeledPointMap {
  PointMap points;
  LabelMap labels;

  std::size_t count() const { return points.valid_count(); }
  std::size_t count(Part p) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      n += points.valid.data()[i] != 0 && labels.data()[i] == static_cast<std::uint8_t>(p);
    }
    return n;
  }
};

/// Unprojects, masks each part, and merges all parts into one labeled map.
/// A pixel survives only when its depth is valid and it carries a part label.
inline LabeledPointMap compose_masked_points(const DepthMap& depth, const CoordMap& coords,
                                             const MaskSet& masks, double threshold = 0.5) {
  require_same_grid(depth.values, coords.values, "compose_masked_points");
  require_same_grid(depth.values, masks.values, "compose_masked_points");
  const PointMap all = unproject(coords, depth);
  LabeledPointMap out{PointMap(depth.height(), depth.width()), binarize(masks, threshold)};
  for (int r = 0; r < depth.height(); ++r) {
    for (int c = 0; c < depth.width(); ++c) {
      if (!all.is_valid(r, c) || out.labels(r, c) == static_cast<std::uint8_t>(Part::Invalid)) {
        out.labels(r, c) = static_cast<std::uint8_t>(Part::Invalid);
        continue;
      }
      out.points.set(r, c, all.at(r, c));
    }
  }
  return out;
}

}  // namespace mrecon
