#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "dropsim/geometry.hpp"
#include "dropsim/types.hpp"

namespace dropsim {

/// Approximate object heights (m) used by the monocular distance
/// estimate; only the car value is a published parameter, the others are
/// defaults.
struct ClassHeights {
  double car = 1.5;
  double pedestrian = 1.75;
  double cyclist = 1.75;
  double other = 1.5;

  double of(ObjectClass c) const {
    switch (c) {
      case ObjectClass::Car: return car;
      case ObjectClass::Pedestrian: return pedestrian;
      case ObjectClass::Cyclist: return cyclist;
      default: return other;
    }
  }
};

struct SchedulerConfig {
  int n = 1;  // frames to process ...
  int m = 1;  // ... out of every m
  double d_max = 25.0;
  double iou_min = 0.25;
  ClassHeights class_heights;
  bool event_trigger_enabled = false;
  double camera_score_floor = 0.5;
  /// Serve camera detections this many frames late (0 = same cycle).
  int camera_latency_frames = 0;

  void validate() const {
    if (n < 1 || m < n) throw std::invalid_argument("scheduler: need 1 <= n <= m");
    if (d_max <= 0.0) throw std::invalid_argument("scheduler: d_max must be positive");
    if (iou_min < 0.0 || iou_min > 1.0) throw std::invalid_argument("scheduler: iou_min in [0,1]");
  }
};

enum class DecisionReason { None, Periodic, EventTrigger };

inline std::string_view to_string(DecisionReason r) {
  switch (r) {
    case DecisionReason::Periodic: return "periodic";
    case DecisionReason::EventTrigger: return "event-trigger";
    case DecisionReason::None: return "none";
  }
  return "none";
}

struct ScheduleDecision {
  bool process = false;
  DecisionReason reason = DecisionReason::None;
  /// Indices into the frame's camera detections that had no sufficient
  /// predicted-track match (empty unless reason == EventTrigger).
  std::vector<int> triggering_detections;
};

struct ScheduleStats {
  long long frames_total = 0;
  long long frames_processed = 0;
  long long frames_event_triggered = 0;

  double effective_target() const {
    return frames_total > 0 ? static_cast<double>(frames_processed) / frames_total : 0.0;
  }
};

/// Baseline schedule: process frame k iff (k mod m) < n.
inline bool periodic_decision(int frame_index, int n, int m) {
  return frame_index % m < n;
}

/// Monocular distance from the image box height by similar triangles:
/// approximate height * focal length / pixel height.
inline double estimate_distance(const Detection2D& det, const Calibration& calib,
                                const ClassHeights& heights) {
  const double pixel_height = det.box.height();
  return heights.of(det.class_id) * calib.focal_length() / pixel_height;
}

/// Keeps detections estimated at or closer than d_max, preserving order.
/// Boxes without positive extent carry no usable height and are skipped.
inline std::vector<Detection2D> filter_near(const std::vector<Detection2D>& dets,
                                            const Calibration& calib,
                                            const SchedulerConfig& cfg) {
  std::vector<Detection2D> near;
  for (const auto& det : dets) {
    if (!det.box.valid()) continue;
    if (estimate_distance(det, calib, cfg.class_heights) <= cfg.d_max) near.push_back(det);
  }
  return near;
}

struct TriggerResult {
  bool fire = false;
  std::vector<int> indices;  // offending near-detection indices
};

/// Discrepancy test: fires when any near camera detection has a maximum
/// 2D IoU against all projectable predicted boxes strictly below iou_min
/// (vacuously when near detections exist but nothing projects).
inline TriggerResult event_trigger(const std::vector<Box3D>& predicted_tracks,
                                   const std::vector<Detection2D>& near_dets,
                                   const Calibration& calib, double iou_min) {
  TriggerResult result;
  if (near_dets.empty()) return result;

  std::vector<Box2D> projected;
  projected.reserve(predicted_tracks.size());
  for (const auto& box : predicted_tracks) {
    if (auto p = project_box3d(box, calib)) projected.push_back(*p);
  }

  for (int i = 0; i < static_cast<int>(near_dets.size()); ++i) {
    double best = 0.0;
    for (const auto& p : projected) best = std::max(best, iou_2d(near_dets[i].box, p));
    if (best < iou_min) result.indices.push_back(i);
  }
  result.fire = !result.indices.empty();
  return result;
}

/// Frame-dropping decision per the periodic baseline plus the optional
/// event trigger; the trigger can only add processed frames, so the
/// baseline target stays a lower bound and the periodic phase is never
/// shifted.
inline ScheduleDecision decide(int frame_index, const std::vector<Box3D>& predicted_tracks,
                               const std::vector<Detection2D>& camera_dets,
                               const Calibration& calib, const SchedulerConfig& cfg,
                               ScheduleStats& stats) {
  ScheduleDecision decision;
  ++stats.frames_total;

  if (periodic_decision(frame_index, cfg.n, cfg.m)) {
    decision.process = true;
    decision.reason = DecisionReason::Periodic;
    ++stats.frames_processed;
    return decision;
  }

  if (cfg.event_trigger_enabled) {
    std::vector<Detection2D> near;
    std::vector<int> original_index;
    for (int i = 0; i < static_cast<int>(camera_dets.size()); ++i) {
      const auto& det = camera_dets[i];
      if (!det.box.valid() || det.score < cfg.camera_score_floor) continue;
      if (estimate_distance(det, calib, cfg.class_heights) > cfg.d_max) continue;
      near.push_back(det);
      original_index.push_back(i);
    }
    const TriggerResult trigger = event_trigger(predicted_tracks, near, calib, cfg.iou_min);
    if (trigger.fire) {
      decision.process = true;
      decision.reason = DecisionReason::EventTrigger;
      for (int idx : trigger.indices) decision.triggering_detections.push_back(original_index[idx]);
      ++stats.frames_processed;
      ++stats.frames_event_triggered;
      return decision;
    }
  }

  return decision;
}

/// Stateful per-sequence wrapper around decide().
class Scheduler {
 public:
  explicit Scheduler(SchedulerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const SchedulerConfig& config() const { return cfg_; }
  const ScheduleStats& stats() const { return stats_; }

  ScheduleDecision decide(int frame_index, const std::vector<Box3D>& predicted_tracks,
                          const std::vector<Detection2D>& camera_dets, const Calibration& calib) {
    return dropsim::decide(frame_index, predicted_tracks, camera_dets, calib, cfg_, stats_);
  }

 private:
  SchedulerConfig cfg_;
  ScheduleStats stats_;
};

}  // namespace dropsim
