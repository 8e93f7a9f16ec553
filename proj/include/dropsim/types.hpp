#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dropsim/geometry.hpp"

namespace dropsim {

enum class ObjectClass { Car, Pedestrian, Cyclist, Other, DontCare };

inline std::string_view to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::Car: return "car";
    case ObjectClass::Pedestrian: return "pedestrian";
    case ObjectClass::Cyclist: return "cyclist";
    case ObjectClass::Other: return "other";
    case ObjectClass::DontCare: return "dontcare";
  }
  return "other";
}

/// Maps a KITTI type string onto the tracked classes. Anything outside
/// {Car, Pedestrian, Cyclist} becomes Other, which is tracked but
/// excluded from metrics.
inline ObjectClass object_class_from_kitti(std::string_view type) {
  if (type == "Car") return ObjectClass::Car;
  if (type == "Pedestrian") return ObjectClass::Pedestrian;
  if (type == "Cyclist") return ObjectClass::Cyclist;
  if (type == "DontCare") return ObjectClass::DontCare;
  return ObjectClass::Other;
}

inline std::string kitti_type(ObjectClass c) {
  switch (c) {
    case ObjectClass::Car: return "Car";
    case ObjectClass::Pedestrian: return "Pedestrian";
    case ObjectClass::Cyclist: return "Cyclist";
    case ObjectClass::DontCare: return "DontCare";
    case ObjectClass::Other: return "Misc";
  }
  return "Misc";
}

/// Single-frame lidar detection (3D box in camera coordinates).
struct Detection3D {
  ObjectClass class_id = ObjectClass::Car;
  Box3D box;
  std::optional<Box2D> box2d_hint;
  double score = 0.0;
};

/// Single-frame camera detection (image-plane box).
struct Detection2D {
  ObjectClass class_id = ObjectClass::Car;
  Box2D box;
  double score = 0.0;
};

/// One cycle worth of input for the perception pipeline.
struct FrameBundle {
  std::string sequence_id;
  int frame_index = 0;
  std::vector<Detection3D> lidar_detections;
  std::vector<Detection2D> camera_detections;
  double timestamp = 0.0;  // frame_index * cycle_time
};

struct GroundTruthEntry {
  int frame = 0;
  Box2D bbox;
  Box3D box;
  double truncated = 0.0;
  int occluded = 0;
};

struct GroundTruthTrack {
  int track_id = -1;
  ObjectClass class_id = ObjectClass::Car;
  std::vector<GroundTruthEntry> entries;  // one entry per frame, ascending
};

}  // namespace dropsim
