#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dropsim/geometry.hpp"
#include "dropsim/kitti_io.hpp"
#include "dropsim/types.hpp"

#include "json.hpp"

namespace dropsim {

// ---------------------------------------------------------------------------
// Deterministic splittable randomness
// ---------------------------------------------------------------------------

namespace rng {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

enum class Draw : uint64_t {
  LidarRecall = 1,
  LidarNoise,
  CameraRecall,
  CameraNoise,
  LidarFpCount,
  CameraFpCount,
  LidarFpBox,
  CameraFpBox,
  LidarScore,
  CameraScore,
};

/// Every random draw is keyed by (seed, agent, frame, purpose, index), so
/// adding or removing an agent never reshuffles the draws of the others.
class Keyed {
 public:
  explicit Keyed(uint64_t seed) : seed_(seed) {}

  double uniform(int64_t agent, int64_t frame, Draw purpose, uint64_t index = 0) const {
    uint64_t h = splitmix64(seed_);
    h = splitmix64(h ^ static_cast<uint64_t>(agent));
    h = splitmix64(h ^ static_cast<uint64_t>(frame));
    h = splitmix64(h ^ static_cast<uint64_t>(purpose));
    h = splitmix64(h ^ index);
    return static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
  }

  double normal(int64_t agent, int64_t frame, Draw purpose, uint64_t index = 0) const {
    // Box-Muller on two keyed uniforms; portable across platforms.
    const double u1 = std::max(uniform(agent, frame, purpose, 2 * index), 1e-300);
    const double u2 = uniform(agent, frame, purpose, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  bool bernoulli(double p, int64_t agent, int64_t frame, Draw purpose) const {
    return uniform(agent, frame, purpose) < p;
  }

  int poisson(double lambda, int64_t agent, int64_t frame, Draw purpose) const {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    double product = 1.0;
    int count = 0;
    while (true) {
      product *= uniform(agent, frame, purpose, static_cast<uint64_t>(count));
      if (product <= limit) return count;
      ++count;
    }
  }

 private:
  uint64_t seed_;
};

}  // namespace rng

// ---------------------------------------------------------------------------
// Scenario specification
// ---------------------------------------------------------------------------

struct VelocitySegment {
  int from_frame = 0;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // meters per cycle
};

struct OcclusionWindow {
  int first_frame = 0;
  int last_frame = 0;  // inclusive

  bool contains(int frame) const { return frame >= first_frame && frame <= last_frame; }
};

struct AgentSpec {
  ObjectClass class_id = ObjectClass::Car;
  int spawn_frame = 0;
  int despawn_frame = 0;  // exclusive
  Eigen::Vector3d initial_center = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  double height = 1.5, width = 1.7, length = 4.0;
  std::vector<VelocitySegment> velocity;
  std::vector<OcclusionWindow> occlusions;

  bool occluded_at(int frame) const {
    for (const auto& w : occlusions)
      if (w.contains(frame)) return true;
    return false;
  }
};

struct NoiseSpec {
  double pos_sigma = 0.0;
  double dim_sigma = 0.0;
  double yaw_sigma = 0.0;
  double lidar_recall = 1.0;
  double camera_recall = 1.0;
  double lidar_fp_rate = 0.0;  // expected false positives per frame
  double camera_fp_rate = 0.0;
};

struct ScenarioSpec {
  std::string name = "scenario";
  int duration_frames = 0;
  std::vector<AgentSpec> agents;
  NoiseSpec noise;
  uint64_t rng_seed = 0;
  double cycle_time = 0.1;

  void validate() const {
    if (duration_frames <= 0) throw std::invalid_argument("scenario: duration_frames must be > 0");
    for (size_t i = 0; i < agents.size(); ++i) {
      const auto& a = agents[i];
      if (a.spawn_frame < 0 || a.spawn_frame >= duration_frames)
        throw std::invalid_argument("scenario: agent " + std::to_string(i) +
                                    " spawn_frame outside duration");
      if (a.despawn_frame <= a.spawn_frame)
        throw std::invalid_argument("scenario: agent " + std::to_string(i) +
                                    " despawn_frame before spawn");
    }
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(noise.lidar_recall) || !in_unit(noise.camera_recall))
      throw std::invalid_argument("scenario: recalls must lie in [0,1]");
  }
};

/// KITTI-like synthetic pinhole: focal 720 px, 1242x375 image.
inline Calibration synthetic_calibration() {
  Calibration calib;
  calib.projection << 720.0, 0.0, 621.0, 0.0, 0.0, 720.0, 187.5, 0.0, 0.0, 0.0, 1.0, 0.0;
  calib.rectification = Eigen::Matrix3d::Identity();
  calib.lidar_to_cam << 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0;
  calib.image_width = 1242;
  calib.image_height = 375;
  return calib;
}

/// Generated streams, kept in the serialized row representation so that
/// writing and re-parsing reproduces the in-memory data exactly.
struct ScenarioData {
  std::string sequence_id = "0000";
  int num_frames = 0;
  Calibration calib;
  std::vector<kitti::LabelRow> gt_rows;
  std::vector<kitti::LabelRow> lidar_rows;
  std::vector<kitti::LabelRow> camera_rows;

  kitti::SequenceData to_sequence_data() const {
    kitti::SequenceData data;
    data.info = kitti::SequenceInfo{sequence_id, num_frames};
    data.calib = calib;
    data.gt = kitti::group_tracks(gt_rows);
    data.dont_care = kitti::collect_dont_care(gt_rows);
    data.lidar_by_frame = kitti::lidar_detections_by_frame(lidar_rows, num_frames);
    data.camera_by_frame = kitti::camera_detections_by_frame(camera_rows, num_frames);
    return data;
  }
};

namespace detail {

inline Eigen::Vector3d agent_center_at(const AgentSpec& agent, int frame) {
  Eigen::Vector3d center = agent.initial_center;
  for (int t = agent.spawn_frame; t < frame; ++t) {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    for (const auto& seg : agent.velocity)
      if (seg.from_frame <= t) v = seg.velocity;
    center += v;
  }
  return center;
}

inline kitti::LabelRow row_from_box(int frame, long long id, ObjectClass cls, const Box3D& box,
                                    const Calibration& calib, double truncated, int occluded) {
  kitti::LabelRow row;
  row.frame = frame;
  row.track_id = id;
  row.type = kitti_type(cls);
  row.truncated = truncated;
  row.occluded = occluded;
  row.alpha = wrap_angle(box.yaw - std::atan2(box.center.x(), box.center.z()));
  if (const auto projected = project_box3d(box, calib)) {
    row.bbox = *projected;
  } else {
    row.bbox = Box2D{-1.0, -1.0, -1.0, -1.0};
    row.truncated = 1.0;
  }
  row.set_box3d(box);
  return row;
}

}  // namespace detail

/// Deterministic scenario synthesis: ground truth from the agent
/// kinematics, plus independently perturbed lidar and camera detection
/// streams. Occluded frames emit nothing for that agent.
inline ScenarioData generate(const ScenarioSpec& spec) {
  spec.validate();
  const rng::Keyed rng(spec.rng_seed);
  ScenarioData data;
  data.sequence_id = spec.name.size() == 4 ? spec.name : "0000";
  data.num_frames = spec.duration_frames;
  data.calib = synthetic_calibration();

  auto perturbed = [&](const Box3D& truth, int64_t agent, int64_t frame, rng::Draw purpose) {
    Box3D box = truth;
    if (spec.noise.pos_sigma > 0.0) {
      box.center.x() += spec.noise.pos_sigma * rng.normal(agent, frame, purpose, 0);
      box.center.y() += spec.noise.pos_sigma * rng.normal(agent, frame, purpose, 1);
      box.center.z() += spec.noise.pos_sigma * rng.normal(agent, frame, purpose, 2);
    }
    if (spec.noise.dim_sigma > 0.0) {
      box.height = std::max(0.2, box.height + spec.noise.dim_sigma * rng.normal(agent, frame, purpose, 3));
      box.width = std::max(0.2, box.width + spec.noise.dim_sigma * rng.normal(agent, frame, purpose, 4));
      box.length = std::max(0.2, box.length + spec.noise.dim_sigma * rng.normal(agent, frame, purpose, 5));
    }
    if (spec.noise.yaw_sigma > 0.0)
      box.yaw = wrap_angle(box.yaw + spec.noise.yaw_sigma * rng.normal(agent, frame, purpose, 6));
    return box;
  };

  auto random_box = [&](int64_t frame, rng::Draw purpose, int64_t index) {
    Box3D box;
    const int64_t key = 1'000'000 + index;
    box.center.x() = -20.0 + 40.0 * rng.uniform(key, frame, purpose, 0);
    box.center.z() = 5.0 + 55.0 * rng.uniform(key, frame, purpose, 1);
    box.height = 1.3 + 0.6 * rng.uniform(key, frame, purpose, 2);
    box.width = 1.5 + 0.4 * rng.uniform(key, frame, purpose, 3);
    box.length = 3.3 + 1.4 * rng.uniform(key, frame, purpose, 4);
    box.center.y() = 1.65 - box.height / 2.0;
    box.yaw = wrap_angle(-kPi + 2.0 * kPi * rng.uniform(key, frame, purpose, 5));
    return box;
  };

  for (int frame = 0; frame < spec.duration_frames; ++frame) {
    for (size_t a = 0; a < spec.agents.size(); ++a) {
      const auto& agent = spec.agents[a];
      if (frame < agent.spawn_frame || frame >= agent.despawn_frame) continue;
      Box3D truth;
      truth.center = detail::agent_center_at(agent, frame);
      truth.height = agent.height;
      truth.width = agent.width;
      truth.length = agent.length;
      truth.yaw = wrap_angle(agent.yaw);

      const bool occluded = agent.occluded_at(frame);
      data.gt_rows.push_back(detail::row_from_box(frame, static_cast<long long>(a),
                                                  agent.class_id, truth, data.calib, 0.0,
                                                  occluded ? 2 : 0));
      if (occluded) continue;

      const int64_t ai = static_cast<int64_t>(a);
      if (rng.bernoulli(spec.noise.lidar_recall, ai, frame, rng::Draw::LidarRecall)) {
        const Box3D det = perturbed(truth, ai, frame, rng::Draw::LidarNoise);
        auto row = detail::row_from_box(frame, ai, agent.class_id, det, data.calib, 0.0, 0);
        row.score = 0.6 + 0.4 * rng.uniform(ai, frame, rng::Draw::LidarScore);
        data.lidar_rows.push_back(std::move(row));
      }
      if (rng.bernoulli(spec.noise.camera_recall, ai, frame, rng::Draw::CameraRecall)) {
        const Box3D det = perturbed(truth, ai, frame, rng::Draw::CameraNoise);
        if (const auto projected = project_box3d(det, data.calib); projected && projected->valid()) {
          kitti::LabelRow row;
          row.frame = frame;
          row.track_id = ai;
          row.type = kitti_type(agent.class_id);
          row.bbox = *projected;
          row.height = row.width = row.length = kitti::kInvalidField;
          row.x = row.y = row.z = kitti::kInvalidField;
          row.rotation_y = kitti::kInvalidField;
          row.alpha = kitti::kInvalidField;
          row.score = 0.6 + 0.4 * rng.uniform(ai, frame, rng::Draw::CameraScore);
          data.camera_rows.push_back(std::move(row));
        }
      }
    }

    const int lidar_fps = rng.poisson(spec.noise.lidar_fp_rate, -1, frame, rng::Draw::LidarFpCount);
    for (int k = 0; k < lidar_fps; ++k) {
      const Box3D box = random_box(frame, rng::Draw::LidarFpBox, k);
      auto row = detail::row_from_box(frame, -1, ObjectClass::Car, box, data.calib, 0.0, 0);
      row.score = 0.4 + 0.5 * rng.uniform(-1, frame, rng::Draw::LidarScore, static_cast<uint64_t>(k));
      data.lidar_rows.push_back(std::move(row));
    }
    const int camera_fps =
        rng.poisson(spec.noise.camera_fp_rate, -1, frame, rng::Draw::CameraFpCount);
    for (int k = 0; k < camera_fps; ++k) {
      const Box3D box = random_box(frame, rng::Draw::CameraFpBox, k);
      const auto projected = project_box3d(box, data.calib);
      if (!projected || !projected->valid()) continue;
      kitti::LabelRow row;
      row.frame = frame;
      row.track_id = -1;
      row.type = "Car";
      row.bbox = *projected;
      row.height = row.width = row.length = kitti::kInvalidField;
      row.x = row.y = row.z = kitti::kInvalidField;
      row.rotation_y = kitti::kInvalidField;
      row.alpha = kitti::kInvalidField;
      row.score = 0.4 + 0.5 * rng.uniform(-1, frame, rng::Draw::CameraScore, static_cast<uint64_t>(k));
      data.camera_rows.push_back(std::move(row));
    }
  }
  return data;
}

/// Writes the scenario in the dataset directory layout consumed by
/// load_sequence; idempotent for a fixed seed.
inline void write_dataset(const ScenarioData& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "calib");
  fs::create_directories(dir / "label_02");
  fs::create_directories(dir / "det_3d");
  fs::create_directories(dir / "det_2d");
  auto write_file = [&](const fs::path& path, auto&& fn) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    fn(out);
  };
  write_file(dir / "seqmap.txt", [&](std::ostream& out) {
    kitti::write_seqmap({kitti::SequenceInfo{data.sequence_id, data.num_frames}}, out);
  });
  write_file(dir / "calib" / (data.sequence_id + ".txt"),
             [&](std::ostream& out) { kitti::write_calibration(data.calib, out); });
  write_file(dir / "label_02" / (data.sequence_id + ".txt"),
             [&](std::ostream& out) { kitti::write_label_rows(data.gt_rows, out); });
  write_file(dir / "det_3d" / (data.sequence_id + ".txt"),
             [&](std::ostream& out) { kitti::write_label_rows(data.lidar_rows, out); });
  write_file(dir / "det_2d" / (data.sequence_id + ".txt"),
             [&](std::ostream& out) { kitti::write_label_rows(data.camera_rows, out); });
}

// ---------------------------------------------------------------------------
// Canned scenarios
// ---------------------------------------------------------------------------

/// A vehicle crossing from the left appears out of occlusion at
/// `appearance_frame`, inside the trigger's distance threshold. Used to
/// measure the first-confirmed-track frame under baseline versus
/// event-triggered scheduling.
inline ScenarioSpec late_detection_scenario(int appearance_frame = 36) {
  ScenarioSpec spec;
  spec.name = "late-detection";
  spec.duration_frames = std::max(60, appearance_frame + 20);
  spec.rng_seed = 7;

  AgentSpec car;
  car.class_id = ObjectClass::Car;
  car.spawn_frame = 0;
  car.despawn_frame = spec.duration_frames;
  car.height = 1.5;
  car.width = 1.7;
  car.length = 4.0;
  // Crossing left to right at constant depth, entering view at x = -9 m.
  const double vx = 0.7;
  car.initial_center = Eigen::Vector3d(-9.0 - vx * appearance_frame, 1.65 - car.height / 2.0, 15.0);
  car.velocity.push_back(VelocitySegment{0, Eigen::Vector3d(vx, 0.0, 0.0)});
  if (appearance_frame > 0)
    car.occlusions.push_back(OcclusionWindow{0, appearance_frame - 1});
  spec.agents.push_back(std::move(car));
  return spec;
}

/// A noisy urban scene: a few vehicles tracked ahead beyond the trigger
/// distance plus a stream of staggered near-field crossings out of
/// occlusion, which is where the event trigger earns its keep.
inline ScenarioSpec urban_crossings_scenario(uint64_t seed = 1) {
  ScenarioSpec spec;
  spec.name = "urban-crossings";
  spec.duration_frames = 600;
  spec.rng_seed = seed;
  spec.noise.pos_sigma = 0.12;
  spec.noise.dim_sigma = 0.03;
  spec.noise.yaw_sigma = 0.02;
  spec.noise.lidar_recall = 0.95;
  spec.noise.camera_recall = 0.95;
  spec.noise.lidar_fp_rate = 0.05;
  spec.noise.camera_fp_rate = 0.05;

  // Traffic ahead, outside the near-field band.
  const double lane_x[3] = {-3.5, 0.0, 3.5};
  const double lane_z[3] = {30.0, 38.0, 45.0};
  const double lane_vz[3] = {0.25, -0.2, 0.15};
  for (int i = 0; i < 3; ++i) {
    AgentSpec car;
    car.class_id = ObjectClass::Car;
    car.spawn_frame = 0;
    car.despawn_frame = spec.duration_frames;
    car.height = 1.5;
    car.initial_center = Eigen::Vector3d(lane_x[i], 1.65 - car.height / 2.0, lane_z[i]);
    car.velocity.push_back(VelocitySegment{0, Eigen::Vector3d(0.0, 0.0, lane_vz[i])});
    spec.agents.push_back(std::move(car));
  }

  // Near-field crossings appearing out of occlusion every ~37 frames.
  rng::Keyed keyed(seed);
  const int crossing_count = 15;
  for (int k = 0; k < crossing_count; ++k) {
    AgentSpec car;
    car.class_id = ObjectClass::Car;
    car.height = 1.5;
    const int appearance = 20 + 37 * k;
    const int lifetime = 34;
    car.spawn_frame = std::max(0, appearance - 6);
    car.despawn_frame = std::min(spec.duration_frames, appearance + lifetime);
    if (car.spawn_frame >= car.despawn_frame - 4) continue;
    const double z = 12.0 + 8.0 * keyed.uniform(9000 + k, 0, rng::Draw::LidarFpBox, 0);
    const bool from_left = (k % 2) == 0;
    const double vx = (from_left ? 1.0 : -1.0) * (0.55 + 0.25 * keyed.uniform(9000 + k, 1, rng::Draw::LidarFpBox, 1));
    const double x_at_appearance = from_left ? -8.0 : 8.0;
    car.initial_center = Eigen::Vector3d(x_at_appearance - vx * (appearance - car.spawn_frame),
                                         1.65 - car.height / 2.0, z);
    car.yaw = from_left ? kPi / 2.0 : -kPi / 2.0;
    car.velocity.push_back(VelocitySegment{0, Eigen::Vector3d(vx, 0.0, 0.0)});
    if (appearance > car.spawn_frame)
      car.occlusions.push_back(OcclusionWindow{car.spawn_frame, appearance - 1});
    spec.agents.push_back(std::move(car));
  }
  return spec;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const VelocitySegment& v) {
  j = {{"from_frame", v.from_frame}, {"velocity", {v.velocity.x(), v.velocity.y(), v.velocity.z()}}};
}

inline void from_json(const nlohmann::json& j, VelocitySegment& v) {
  v.from_frame = j.value("from_frame", 0);
  const auto vel = j.at("velocity");
  v.velocity = Eigen::Vector3d(vel.at(0).get<double>(), vel.at(1).get<double>(), vel.at(2).get<double>());
}

inline void to_json(nlohmann::json& j, const OcclusionWindow& w) {
  j = {{"first_frame", w.first_frame}, {"last_frame", w.last_frame}};
}

inline void from_json(const nlohmann::json& j, OcclusionWindow& w) {
  w.first_frame = j.at("first_frame").get<int>();
  w.last_frame = j.at("last_frame").get<int>();
}

inline void to_json(nlohmann::json& j, const AgentSpec& a) {
  j = {{"class", std::string(to_string(a.class_id))},
       {"spawn_frame", a.spawn_frame},
       {"despawn_frame", a.despawn_frame},
       {"initial_center", {a.initial_center.x(), a.initial_center.y(), a.initial_center.z()}},
       {"yaw", a.yaw},
       {"dims", {a.height, a.width, a.length}},
       {"velocity", a.velocity},
       {"occlusions", a.occlusions}};
}

inline ObjectClass object_class_from_name(std::string_view name) {
  if (name == "car") return ObjectClass::Car;
  if (name == "pedestrian") return ObjectClass::Pedestrian;
  if (name == "cyclist") return ObjectClass::Cyclist;
  if (name == "dontcare") return ObjectClass::DontCare;
  if (name == "other") return ObjectClass::Other;
  throw std::invalid_argument("unknown object class: " + std::string(name));
}

inline void from_json(const nlohmann::json& j, AgentSpec& a) {
  a.class_id = object_class_from_name(j.value("class", "car"));
  a.spawn_frame = j.value("spawn_frame", 0);
  a.despawn_frame = j.at("despawn_frame").get<int>();
  const auto center = j.at("initial_center");
  a.initial_center = Eigen::Vector3d(center.at(0).get<double>(), center.at(1).get<double>(),
                                     center.at(2).get<double>());
  a.yaw = j.value("yaw", 0.0);
  if (j.contains("dims")) {
    a.height = j["dims"].at(0).get<double>();
    a.width = j["dims"].at(1).get<double>();
    a.length = j["dims"].at(2).get<double>();
  }
  if (j.contains("velocity")) a.velocity = j["velocity"].get<std::vector<VelocitySegment>>();
  if (j.contains("occlusions"))
    a.occlusions = j["occlusions"].get<std::vector<OcclusionWindow>>();
}

inline void to_json(nlohmann::json& j, const NoiseSpec& n) {
  j = {{"pos_sigma", n.pos_sigma},       {"dim_sigma", n.dim_sigma},
       {"yaw_sigma", n.yaw_sigma},       {"lidar_recall", n.lidar_recall},
       {"camera_recall", n.camera_recall}, {"lidar_fp_rate", n.lidar_fp_rate},
       {"camera_fp_rate", n.camera_fp_rate}};
}

inline void from_json(const nlohmann::json& j, NoiseSpec& n) {
  n.pos_sigma = j.value("pos_sigma", 0.0);
  n.dim_sigma = j.value("dim_sigma", 0.0);
  n.yaw_sigma = j.value("yaw_sigma", 0.0);
  n.lidar_recall = j.value("lidar_recall", 1.0);
  n.camera_recall = j.value("camera_recall", 1.0);
  n.lidar_fp_rate = j.value("lidar_fp_rate", 0.0);
  n.camera_fp_rate = j.value("camera_fp_rate", 0.0);
}

inline void to_json(nlohmann::json& j, const ScenarioSpec& s) {
  j = {{"name", s.name},
       {"duration_frames", s.duration_frames},
       {"agents", s.agents},
       {"noise", s.noise},
       {"rng_seed", s.rng_seed},
       {"cycle_time", s.cycle_time}};
}

inline void from_json(const nlohmann::json& j, ScenarioSpec& s) {
  s.name = j.value("name", "scenario");
  s.duration_frames = j.at("duration_frames").get<int>();
  if (j.contains("agents")) s.agents = j["agents"].get<std::vector<AgentSpec>>();
  if (j.contains("noise")) s.noise = j["noise"].get<NoiseSpec>();
  s.rng_seed = j.value("rng_seed", uint64_t{0});
  s.cycle_time = j.value("cycle_time", 0.1);
}

inline ScenarioSpec load_scenario_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario spec " + path.string());
  nlohmann::json j;
  in >> j;
  ScenarioSpec spec = j.get<ScenarioSpec>();
  spec.validate();
  return spec;
}

inline void save_scenario_spec(const ScenarioSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario spec " + path.string());
  out << nlohmann::json(spec).dump(2) << '\n';
}

}  // namespace dropsim
