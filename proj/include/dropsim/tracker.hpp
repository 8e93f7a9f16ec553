#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dropsim/assignment.hpp"
#include "dropsim/geometry.hpp"
#include "dropsim/scheduler.hpp"
#include "dropsim/types.hpp"

namespace dropsim {

enum class TrackerVariant { LidarOnly, Fusion };

inline TrackerVariant parse_tracker_variant(std::string_view id) {
  if (id == "lidar-only") return TrackerVariant::LidarOnly;
  if (id == "fusion") return TrackerVariant::Fusion;
  throw std::invalid_argument("unknown tracker variant: " + std::string(id));
}

inline std::string_view to_string(TrackerVariant v) {
  return v == TrackerVariant::LidarOnly ? "lidar-only" : "fusion";
}

struct TrackerConfig {
  TrackerVariant variant = TrackerVariant::LidarOnly;

  OverlapMetric association_metric = OverlapMetric::BevIou;
  /// Gate interpretation depends on the metric: minimum BEV IoU for
  /// BevIou, maximum center distance in meters for CentroidDistance.
  double association_gate = 0.01;
  bool greedy_association = false;  // ablation switch

  int confirm_hits = 2;
  int max_misses = 2;        // lidar misses, counted on processed frames only
  int max_coast_frames = 30; // wall-clock frames since the last update
  double lidar_score_floor = 0.3;

  // Fusion stage.
  double camera_iou_gate = 0.3;
  double camera_score_floor = 0.5;
  int camera_hit_weight = 1;
  bool camera_corrects_position = false;
  double camera_meas_noise_px = 8.0;

  // Process noise per cycle (standard deviations).
  double process_noise_pos = 0.1;
  double process_noise_yaw = 0.01;
  double process_noise_dim = 0.01;
  double process_noise_vel = 0.1;

  // Measurement noise (standard deviations).
  double meas_noise_pos = 0.3;
  double meas_noise_yaw = 0.1;
  double meas_noise_dim = 0.1;

  // Birth covariance (standard deviations); velocity is inflated since a
  // single detection carries no motion evidence.
  double birth_pos_std = 1.0;
  double birth_yaw_std = 0.5;
  double birth_dim_std = 0.3;
  double birth_vel_std = 2.0;
};

/// Kalman state over (x, y, z, yaw, l, w, h, vx, vy, vz); positions in
/// meters (camera coordinates), velocities in meters per cycle.
struct TrackState {
  using Vector = Eigen::Matrix<double, 10, 1>;
  using Matrix = Eigen::Matrix<double, 10, 10>;

  Vector mean = Vector::Zero();
  Matrix covariance = Matrix::Identity();

  Box3D to_box3d() const {
    Box3D b;
    b.center = mean.head<3>();
    b.yaw = mean(3);
    b.length = mean(4);
    b.width = mean(5);
    b.height = mean(6);
    return b;
  }
};

enum class TrackStatus { Tentative, Confirmed, Dead };

struct Track {
  int id = 0;
  TrackState state;
  ObjectClass class_id = ObjectClass::Car;
  TrackStatus status = TrackStatus::Tentative;
  int consecutive_hits = 0;
  int missed_processed_frames = 0;
  int age_frames = 0;
  int last_update_frame = 0;
  double score = 0.0;
};

namespace kalman {

inline TrackState::Matrix process_noise(const TrackerConfig& cfg) {
  TrackState::Vector d;
  d << cfg.process_noise_pos, cfg.process_noise_pos, cfg.process_noise_pos, cfg.process_noise_yaw,
      cfg.process_noise_dim, cfg.process_noise_dim, cfg.process_noise_dim, cfg.process_noise_vel,
      cfg.process_noise_vel, cfg.process_noise_vel;
  return d.cwiseProduct(d).asDiagonal();
}

/// Advances one cycle with the constant-velocity model; yaw and
/// dimensions carry zero velocity.
inline void predict(TrackState& s, const TrackerConfig& cfg) {
  TrackState::Matrix f = TrackState::Matrix::Identity();
  f(0, 7) = 1.0;
  f(1, 8) = 1.0;
  f(2, 9) = 1.0;
  s.mean.head<3>() += s.mean.tail<3>();
  s.covariance = f * s.covariance * f.transpose() + process_noise(cfg);
  s.covariance = ((s.covariance + s.covariance.transpose()) / 2.0).eval();
}

using Measurement = Eigen::Matrix<double, 7, 1>;

inline Measurement measurement_from(const Detection3D& det) {
  Measurement z;
  z << det.box.center.x(), det.box.center.y(), det.box.center.z(), det.box.yaw, det.box.length,
      det.box.width, det.box.height;
  return z;
}

/// Linear Kalman correction on the measured components, Joseph form.
/// Returns false (state untouched) when the innovation covariance is not
/// positive definite.
inline bool update(TrackState& s, const Measurement& z, const TrackerConfig& cfg) {
  using H = Eigen::Matrix<double, 7, 10>;
  H h = H::Zero();
  for (int i = 0; i < 7; ++i) h(i, i) = 1.0;

  Eigen::Matrix<double, 7, 1> noise;
  noise << cfg.meas_noise_pos, cfg.meas_noise_pos, cfg.meas_noise_pos, cfg.meas_noise_yaw,
      cfg.meas_noise_dim, cfg.meas_noise_dim, cfg.meas_noise_dim;
  const Eigen::Matrix<double, 7, 7> r = noise.cwiseProduct(noise).asDiagonal();

  Eigen::Matrix<double, 7, 1> innovation = z - h * s.mean;
  innovation(3) = wrap_angle(innovation(3));

  const Eigen::Matrix<double, 7, 7> innovation_cov = h * s.covariance * h.transpose() + r;
  const Eigen::LLT<Eigen::Matrix<double, 7, 7>> llt(innovation_cov);
  if (llt.info() != Eigen::Success) return false;

  const Eigen::Matrix<double, 10, 7> gain =
      s.covariance * h.transpose() * llt.solve(Eigen::Matrix<double, 7, 7>::Identity());
  s.mean += gain * innovation;
  s.mean(3) = wrap_angle(s.mean(3));
  for (int i = 4; i < 7; ++i) s.mean(i) = std::max(s.mean(i), 1e-2);  // dims stay positive

  const TrackState::Matrix ikh = TrackState::Matrix::Identity() - gain * h;
  s.covariance = ikh * s.covariance * ikh.transpose() + gain * r * gain.transpose();
  s.covariance = ((s.covariance + s.covariance.transpose()) / 2.0).eval();
  return true;
}

}  // namespace kalman

/// Advances every track by `dt_cycles` prediction steps.
inline void predict_all(std::vector<Track>& tracks, int dt_cycles, const TrackerConfig& cfg) {
  for (Track& t : tracks)
    for (int k = 0; k < dt_cycles; ++k) kalman::predict(t.state, cfg);
}

struct Association {
  std::vector<std::pair<int, int>> matches;  // (track index, detection index)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_detections;
};

namespace detail {

/// Cross-class sentinel: far below every gate, small enough that sums of
/// a few similarities keep full double precision.
inline constexpr double kClassMismatch = -1e6;

inline double association_similarity(const Track& track, const Detection3D& det,
                                     const TrackerConfig& cfg) {
  if (track.class_id != det.class_id) return kClassMismatch;
  const Box3D predicted = track.state.to_box3d();
  if (cfg.association_metric == OverlapMetric::BevIou) return bev_iou(predicted, det.box);
  return -centroid_distance(predicted, det.box);
}

inline bool passes_gate(double similarity, const TrackerConfig& cfg) {
  if (cfg.association_metric == OverlapMetric::BevIou) return similarity >= cfg.association_gate;
  return -similarity <= cfg.association_gate;
}

inline void associate_stage(const std::vector<Track>& tracks, const std::vector<int>& track_idx,
                            const std::vector<Detection3D>& dets, std::vector<int>& det_idx,
                            const TrackerConfig& cfg, Association& out) {
  if (track_idx.empty() || det_idx.empty()) {
    out.unmatched_tracks.insert(out.unmatched_tracks.end(), track_idx.begin(), track_idx.end());
    return;
  }
  Eigen::MatrixXd sim(track_idx.size(), det_idx.size());
  for (size_t r = 0; r < track_idx.size(); ++r)
    for (size_t c = 0; c < det_idx.size(); ++c)
      sim(r, c) = association_similarity(tracks[track_idx[r]], dets[det_idx[c]], cfg);

  const auto pairs = cfg.greedy_association ? solve_assignment_greedy(sim) : solve_assignment_max(sim);

  std::vector<bool> track_taken(track_idx.size(), false), det_taken(det_idx.size(), false);
  for (const auto& [r, c] : pairs) {
    if (!passes_gate(sim(r, c), cfg)) continue;
    out.matches.emplace_back(track_idx[r], det_idx[c]);
    track_taken[r] = true;
    det_taken[c] = true;
  }
  for (size_t r = 0; r < track_idx.size(); ++r)
    if (!track_taken[r]) out.unmatched_tracks.push_back(track_idx[r]);
  std::vector<int> remaining;
  for (size_t c = 0; c < det_idx.size(); ++c)
    if (!det_taken[c]) remaining.push_back(det_idx[c]);
  det_idx = std::move(remaining);
}

}  // namespace detail

/// Globally optimal gated assignment between predicted tracks and
/// detections. Confirmed tracks are matched first; tentative tracks
/// compete only for the remaining detections.
inline Association associate(const std::vector<Track>& tracks,
                             const std::vector<Detection3D>& detections,
                             const TrackerConfig& cfg) {
  Association out;
  std::vector<int> confirmed, tentative;
  for (int i = 0; i < static_cast<int>(tracks.size()); ++i) {
    (tracks[i].status == TrackStatus::Confirmed ? confirmed : tentative).push_back(i);
  }
  std::vector<int> det_idx(detections.size());
  for (int i = 0; i < static_cast<int>(detections.size()); ++i) det_idx[i] = i;

  detail::associate_stage(tracks, confirmed, detections, det_idx, cfg, out);
  detail::associate_stage(tracks, tentative, detections, det_idx, cfg, out);
  out.unmatched_detections = std::move(det_idx);
  return out;
}

/// Drop-aware multi-object tracker. One instance per sequence; stepping
/// is single-threaded and deterministic.
class Tracker {
 public:
  Tracker(TrackerConfig cfg, Calibration calib = {}) : cfg_(std::move(cfg)), calib_(calib) {}

  const TrackerConfig& config() const { return cfg_; }
  const std::vector<Track>& tracks() const { return tracks_; }

  /// Track states advanced to the next frame time without mutating the
  /// tracker; feeds the frame-dropping decision.
  std::vector<Box3D> predicted_boxes(int dt_cycles = 1) const {
    std::vector<Box3D> boxes;
    boxes.reserve(tracks_.size());
    for (const Track& t : tracks_) {
      TrackState s = t.state;
      for (int k = 0; k < dt_cycles; ++k) kalman::predict(s, cfg_);
      boxes.push_back(s.to_box3d());
    }
    return boxes;
  }

  /// Advances one cycle. On dropped frames tracks coast (prediction
  /// only); lifecycle counters are untouched apart from age and the
  /// wall-clock coast limit. Returns the confirmed tracks.
  std::vector<Track> step(const FrameBundle& frame, const ScheduleDecision& decision) {
    predict_all(tracks_, 1, cfg_);
    for (Track& t : tracks_) ++t.age_frames;

    bool processed = decision.process;
    if (processed) lidar_stage(frame);
    if (cfg_.variant == TrackerVariant::Fusion) camera_stage(frame, processed);
    promote_and_prune(frame.frame_index);

    std::vector<Track> confirmed;
    for (const Track& t : tracks_)
      if (t.status == TrackStatus::Confirmed) confirmed.push_back(t);
    return confirmed;
  }

 private:
  void lidar_stage(const FrameBundle& frame) {
    std::vector<Detection3D> dets;
    dets.reserve(frame.lidar_detections.size());
    for (const auto& d : frame.lidar_detections)
      if (d.score >= cfg_.lidar_score_floor) dets.push_back(d);

    const Association assoc = associate(tracks_, dets, cfg_);
    lidar_matched_.assign(tracks_.size(), false);
    for (const auto& [ti, di] : assoc.matches) {
      Track& t = tracks_[ti];
      if (kalman::update(t.state, kalman::measurement_from(dets[di]), cfg_)) {
        ++t.consecutive_hits;
        t.missed_processed_frames = 0;
        t.last_update_frame = frame.frame_index;
        t.score = dets[di].score;
        lidar_matched_[ti] = true;
      }
    }
    for (int ti : assoc.unmatched_tracks) {
      ++tracks_[ti].missed_processed_frames;
      tracks_[ti].consecutive_hits = 0;
    }
    for (int di : assoc.unmatched_detections) birth(dets[di], frame.frame_index);
  }

  /// Runs on every frame in fusion mode: camera matches refresh the coast
  /// clock and count toward confirmation, but never spawn tracks and (by
  /// default) never correct the 3D state.
  void camera_stage(const FrameBundle& frame, bool processed) {
    std::vector<const Detection2D*> dets;
    for (const auto& d : frame.camera_detections)
      if (d.score >= cfg_.camera_score_floor) dets.push_back(&d);
    if (dets.empty() || tracks_.empty()) return;

    std::vector<int> projectable;
    std::vector<Box2D> projected;
    for (int i = 0; i < static_cast<int>(tracks_.size()); ++i) {
      const auto box = project_box3d(tracks_[i].state.to_box3d(), calib_);
      if (!box) continue;
      projectable.push_back(i);
      projected.push_back(*box);
    }
    if (projectable.empty()) return;

    Eigen::MatrixXd sim(projectable.size(), dets.size());
    for (size_t r = 0; r < projectable.size(); ++r)
      for (size_t c = 0; c < dets.size(); ++c)
        sim(r, c) = tracks_[projectable[r]].class_id == dets[c]->class_id
                        ? iou_2d(projected[r], dets[c]->box)
                        : -1.0;

    const auto pairs = solve_assignment_max(sim);
    if (!processed) lidar_matched_.assign(tracks_.size(), false);
    for (const auto& [r, c] : pairs) {
      if (sim(r, c) < cfg_.camera_iou_gate) continue;
      Track& t = tracks_[projectable[r]];
      t.last_update_frame = frame.frame_index;
      if (!lidar_matched_[projectable[r]]) t.consecutive_hits += cfg_.camera_hit_weight;
      if (cfg_.camera_corrects_position) correct_lateral(t, dets[c]->box);
    }
  }

  /// Optional camera-based lateral correction: treats the detection's
  /// horizontal center as a bearing measurement at the track's depth.
  void correct_lateral(Track& t, const Box2D& det_box) {
    const double f = calib_.focal_length();
    if (f <= 0.0) return;
    const double cx = calib_.projection(0, 2);
    const double z = t.state.mean(2);
    const double measured_x = ((det_box.x_min + det_box.x_max) / 2.0 - cx) * z / f;
    const double meas_var = std::pow(cfg_.camera_meas_noise_px * z / f, 2);
    const double p = t.state.covariance(0, 0);
    const double gain = p / (p + meas_var);
    t.state.mean(0) += gain * (measured_x - t.state.mean(0));
    t.state.covariance(0, 0) = (1.0 - gain) * p;
  }

  void birth(const Detection3D& det, int frame_index) {
    Track t;
    t.id = next_id_++;
    t.class_id = det.class_id;
    t.state.mean.setZero();
    t.state.mean.head<3>() = det.box.center;
    t.state.mean(3) = det.box.yaw;
    t.state.mean(4) = det.box.length;
    t.state.mean(5) = det.box.width;
    t.state.mean(6) = det.box.height;
    TrackState::Vector d;
    d << cfg_.birth_pos_std, cfg_.birth_pos_std, cfg_.birth_pos_std, cfg_.birth_yaw_std,
        cfg_.birth_dim_std, cfg_.birth_dim_std, cfg_.birth_dim_std, cfg_.birth_vel_std,
        cfg_.birth_vel_std, cfg_.birth_vel_std;
    t.state.covariance = d.cwiseProduct(d).asDiagonal();
    t.status = TrackStatus::Tentative;
    t.consecutive_hits = 1;
    t.age_frames = 0;
    t.last_update_frame = frame_index;
    t.score = det.score;
    tracks_.push_back(std::move(t));
    lidar_matched_.push_back(true);
  }

  void promote_and_prune(int frame_index) {
    for (Track& t : tracks_) {
      if (t.status == TrackStatus::Tentative && t.consecutive_hits >= cfg_.confirm_hits)
        t.status = TrackStatus::Confirmed;
      if (t.missed_processed_frames > cfg_.max_misses ||
          frame_index - t.last_update_frame > cfg_.max_coast_frames)
        t.status = TrackStatus::Dead;
    }
    std::erase_if(tracks_, [](const Track& t) { return t.status == TrackStatus::Dead; });
  }

  TrackerConfig cfg_;
  Calibration calib_;
  std::vector<Track> tracks_;
  std::vector<bool> lidar_matched_;
  int next_id_ = 1;
};

/// Single step of the lidar-only variant over externally owned tracks.
inline std::vector<Track> step_lidar_only(Tracker& tracker, const FrameBundle& frame,
                                          const ScheduleDecision& decision) {
  return tracker.step(frame, decision);
}

inline std::vector<Track> step_fusion(Tracker& tracker, const FrameBundle& frame,
                                      const ScheduleDecision& decision) {
  return tracker.step(frame, decision);
}

}  // namespace dropsim
