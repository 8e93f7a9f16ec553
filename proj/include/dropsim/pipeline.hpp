#pragma once

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dropsim/energy.hpp"
#include "dropsim/kitti_io.hpp"
#include "dropsim/metrics.hpp"
#include "dropsim/scenario.hpp"
#include "dropsim/scheduler.hpp"
#include "dropsim/tracker.hpp"

#include "json.hpp"

namespace dropsim {

// ---------------------------------------------------------------------------
// Sequence replay
// ---------------------------------------------------------------------------

struct SequenceRun {
  std::string sequence_id;
  ScheduleStats stats;
  std::vector<kitti::TrackOutput> outputs;          // confirmed tracks, flattened
  std::vector<std::vector<EvalBox>> pred_by_frame;  // evaluation view of the outputs
};

/// Replays one sequence through the scheduler and tracker. Camera
/// detections feed both the frame-dropping decision and (in fusion mode)
/// the tracker's camera stage, optionally delayed by the configured
/// latency.
inline SequenceRun replay_sequence(const kitti::SequenceData& data,
                                   const SchedulerConfig& scheduler_cfg,
                                   const TrackerConfig& tracker_cfg, double cycle_time = 0.1) {
  SequenceRun run;
  run.sequence_id = data.info.id;
  run.pred_by_frame.resize(data.info.num_frames);

  Scheduler scheduler(scheduler_cfg);
  Tracker tracker(tracker_cfg, data.calib);
  const auto frames = kitti::make_frame_bundles(data, cycle_time);
  static const std::vector<Detection2D> no_dets;

  for (const FrameBundle& frame : frames) {
    const int lag = scheduler_cfg.camera_latency_frames;
    const int camera_frame = frame.frame_index - lag;
    const std::vector<Detection2D>& camera_dets =
        camera_frame >= 0 ? frames[camera_frame].camera_detections : no_dets;

    const auto predicted = tracker.predicted_boxes();
    const ScheduleDecision decision =
        scheduler.decide(frame.frame_index, predicted, camera_dets, data.calib);

    FrameBundle input = frame;
    input.camera_detections = camera_dets;
    const auto confirmed = tracker.step(input, decision);

    for (const Track& t : confirmed) {
      kitti::TrackOutput out;
      out.frame = frame.frame_index;
      out.track_id = t.id;
      out.class_id = t.class_id;
      out.box = t.state.to_box3d();
      out.bbox = project_box3d(out.box, data.calib);
      out.score = t.score;
      run.outputs.push_back(out);

      EvalBox eval;
      eval.id = t.id;
      eval.box2d = out.bbox.value_or(Box2D{});
      eval.box3d = out.box;
      eval.has_3d = true;
      run.pred_by_frame[frame.frame_index].push_back(eval);
    }
  }
  run.stats = scheduler.stats();
  return run;
}

// ---------------------------------------------------------------------------
// Experiment = replay + metrics + energy
// ---------------------------------------------------------------------------

struct SequenceMetrics {
  std::string sequence_id;
  ClearResult clear;
  HotaResult hota;
};

struct RunResult {
  std::vector<SequenceRun> runs;
  std::vector<SequenceMetrics> per_sequence;
  ClearResult clear;    // pooled over sequences
  HotaResult hota;      // pooled over sequences
  ScheduleStats stats;  // pooled over sequences
  double sys_draw_w = 0.0;
  std::optional<double> yield_w_per_hota;
};

namespace detail {

template <typename Fn>
inline void parallel_for(size_t count, int jobs, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const size_t width = std::min<size_t>(jobs, count);
  for (size_t i = 0; i < width; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Runs every sequence (optionally in parallel), evaluates metrics per
/// the matching config over the requested classes, and attaches the
/// modeled draw. Results fold in sequence order regardless of
/// completion order.
inline RunResult run_experiment(const std::vector<kitti::SequenceData>& sequences,
                                const SchedulerConfig& scheduler_cfg,
                                const TrackerConfig& tracker_cfg, const MatchingConfig& matching,
                                const EnergyProfile& profile, bool camera_always_on = true,
                                double cycle_time = 0.1, int jobs = 1) {
  RunResult result;
  result.runs.resize(sequences.size());
  detail::parallel_for(sequences.size(), jobs, [&](size_t i) {
    result.runs[i] = replay_sequence(sequences[i], scheduler_cfg, tracker_cfg, cycle_time);
  });

  MetricsAccumulator accumulator(matching);
  for (size_t i = 0; i < sequences.size(); ++i) {
    const auto& data = sequences[i];
    MetricsAccumulator per_seq(matching);
    for (ObjectClass cls : matching.classes) {
      const SequenceEval eval = build_sequence_eval(data.gt, data.dont_care,
                                                    result.runs[i].pred_by_frame,
                                                    data.info.num_frames, cls, matching);
      per_seq.add(eval);
      accumulator.add(eval);
    }
    result.per_sequence.push_back(
        SequenceMetrics{data.info.id, per_seq.clear(), per_seq.hota()});
    result.stats.frames_total += result.runs[i].stats.frames_total;
    result.stats.frames_processed += result.runs[i].stats.frames_processed;
    result.stats.frames_event_triggered += result.runs[i].stats.frames_event_triggered;
  }
  result.clear = accumulator.clear();
  result.hota = accumulator.hota();
  result.sys_draw_w = simulate_draw(result.stats, profile, camera_always_on);
  return result;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct SweepRow {
  int n = 1, m = 1;
  bool trigger = false;
  double eff_target = 0.0;
  std::optional<double> mota, motp;
  double hota = 0.0, det_a = 0.0, ass_a = 0.0;
  long long fp = 0, fn = 0, idsw = 0, gt_count = 0;
  double sys_draw_w = 0.0;
  std::optional<double> yield_w_per_hota;

  static SweepRow from(const RunResult& r, int n, int m, bool trigger) {
    SweepRow row;
    row.n = n;
    row.m = m;
    row.trigger = trigger;
    row.eff_target = r.stats.effective_target();
    row.mota = r.clear.mota();
    row.motp = r.clear.motp();
    row.hota = r.hota.hota;
    row.det_a = r.hota.det_a;
    row.ass_a = r.hota.ass_a;
    row.fp = r.clear.fp;
    row.fn = r.clear.fn;
    row.idsw = r.clear.idsw;
    row.gt_count = r.clear.gt_count;
    row.sys_draw_w = r.sys_draw_w;
    row.yield_w_per_hota = r.yield_w_per_hota;
    return row;
  }

  std::string target_label() const {
    return std::to_string(n) + "/" + std::to_string(m);
  }
};

namespace detail {

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string opt_fixed(const std::optional<double>& v, int digits = 2) {
  return v ? fixed(*v, digits) : std::string("-");
}

}  // namespace detail

inline void write_report_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "target,trigger,eff_target,mota,motp,hota,det_a,ass_a,fp,fn,idsw,gt_count,"
         "sys_draw_w,yield_w_per_hota\n";
  for (const auto& r : rows) {
    out << r.target_label() << ',' << (r.trigger ? "on" : "off") << ','
        << kitti::format_double(r.eff_target) << ','
        << (r.mota ? kitti::format_double(*r.mota) : "") << ','
        << (r.motp ? kitti::format_double(*r.motp) : "") << ',' << kitti::format_double(r.hota)
        << ',' << kitti::format_double(r.det_a) << ',' << kitti::format_double(r.ass_a) << ','
        << r.fp << ',' << r.fn << ',' << r.idsw << ',' << r.gt_count << ','
        << kitti::format_double(r.sys_draw_w) << ','
        << (r.yield_w_per_hota ? kitti::format_double(*r.yield_w_per_hota) : "") << '\n';
  }
}

inline void write_report_text(const std::vector<SweepRow>& rows, std::ostream& out) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %-7s %10s %8s %8s %8s %8s %8s %6s %6s %6s %10s %8s\n",
                "target", "trigger", "eff", "MOTA", "MOTP", "HOTA", "DetA", "AssA", "FP", "FN",
                "IDSW", "draw[W]", "yield");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line),
                  "%-8s %-7s %10.3f %8s %8s %8.2f %8.2f %8.2f %6lld %6lld %6lld %10.1f %8s\n",
                  r.target_label().c_str(), r.trigger ? "on" : "off", r.eff_target,
                  detail::opt_fixed(r.mota).c_str(), detail::opt_fixed(r.motp).c_str(), r.hota,
                  r.det_a, r.ass_a, r.fp, r.fn, r.idsw, r.sys_draw_w,
                  detail::opt_fixed(r.yield_w_per_hota, 1).c_str());
    out << line;
  }
}

inline void to_json(nlohmann::json& j, const SweepRow& r) {
  j = {{"target", r.target_label()},
       {"trigger", r.trigger},
       {"eff_target", r.eff_target},
       {"hota", r.hota},
       {"det_a", r.det_a},
       {"ass_a", r.ass_a},
       {"fp", r.fp},
       {"fn", r.fn},
       {"idsw", r.idsw},
       {"gt_count", r.gt_count},
       {"sys_draw_w", r.sys_draw_w}};
  if (r.mota) j["mota"] = *r.mota;
  if (r.motp) j["motp"] = *r.motp;
  if (r.yield_w_per_hota) j["yield_w_per_hota"] = *r.yield_w_per_hota;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string dataset_dir;  // exactly one of dataset_dir / scenario
  std::string scenario;     // spec file or builtin name prefixed with '@'
  std::vector<std::string> sequences;
  SchedulerConfig scheduler;
  TrackerConfig tracker;
  MatchingConfig matching;
  std::string energy_profile = "pv-rcnn";
  bool camera_always_on = true;
  double cycle_time = 0.1;
  std::string output_dir = "out";
  int jobs = 1;

  void validate() const {
    if (dataset_dir.empty() == scenario.empty())
      throw std::invalid_argument("config: exactly one of dataset_dir / scenario is required");
    if (!dataset_dir.empty() && !std::filesystem::exists(dataset_dir))
      throw std::invalid_argument("config: dataset_dir does not exist: " + dataset_dir);
    if (!scenario.empty() && scenario.front() != '@' && !std::filesystem::exists(scenario))
      throw std::invalid_argument("config: scenario spec does not exist: " + scenario);
    if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
    scheduler.validate();
    matching.validate();
  }
};

inline void to_json(nlohmann::json& j, const SchedulerConfig& c) {
  j = {{"n", c.n},
       {"m", c.m},
       {"d_max", c.d_max},
       {"iou_min", c.iou_min},
       {"event_trigger", c.event_trigger_enabled},
       {"camera_score_floor", c.camera_score_floor},
       {"camera_latency_frames", c.camera_latency_frames},
       {"class_heights",
        {{"car", c.class_heights.car},
         {"pedestrian", c.class_heights.pedestrian},
         {"cyclist", c.class_heights.cyclist},
         {"other", c.class_heights.other}}}};
}

inline void from_json(const nlohmann::json& j, SchedulerConfig& c) {
  c.n = j.value("n", 1);
  c.m = j.value("m", 1);
  c.d_max = j.value("d_max", 25.0);
  c.iou_min = j.value("iou_min", 0.25);
  c.event_trigger_enabled = j.value("event_trigger", false);
  c.camera_score_floor = j.value("camera_score_floor", 0.5);
  c.camera_latency_frames = j.value("camera_latency_frames", 0);
  if (j.contains("class_heights")) {
    const auto& h = j["class_heights"];
    c.class_heights.car = h.value("car", 1.5);
    c.class_heights.pedestrian = h.value("pedestrian", 1.75);
    c.class_heights.cyclist = h.value("cyclist", 1.75);
    c.class_heights.other = h.value("other", 1.5);
  }
}

inline void to_json(nlohmann::json& j, const TrackerConfig& c) {
  j = {{"variant", std::string(to_string(c.variant))},
       {"association_metric", std::string(to_string(c.association_metric))},
       {"association_gate", c.association_gate},
       {"greedy_association", c.greedy_association},
       {"confirm_hits", c.confirm_hits},
       {"max_misses", c.max_misses},
       {"max_coast_frames", c.max_coast_frames},
       {"lidar_score_floor", c.lidar_score_floor},
       {"camera_iou_gate", c.camera_iou_gate},
       {"camera_score_floor", c.camera_score_floor},
       {"camera_hit_weight", c.camera_hit_weight},
       {"camera_corrects_position", c.camera_corrects_position}};
}

inline void from_json(const nlohmann::json& j, TrackerConfig& c) {
  c.variant = parse_tracker_variant(j.value("variant", "lidar-only"));
  c.association_metric = parse_overlap_metric(j.value("association_metric", "bev-iou"));
  c.association_gate = j.value("association_gate", c.association_gate);
  c.greedy_association = j.value("greedy_association", false);
  c.confirm_hits = j.value("confirm_hits", c.confirm_hits);
  c.max_misses = j.value("max_misses", c.max_misses);
  c.max_coast_frames = j.value("max_coast_frames", c.max_coast_frames);
  c.lidar_score_floor = j.value("lidar_score_floor", c.lidar_score_floor);
  c.camera_iou_gate = j.value("camera_iou_gate", c.camera_iou_gate);
  c.camera_score_floor = j.value("camera_score_floor", c.camera_score_floor);
  c.camera_hit_weight = j.value("camera_hit_weight", c.camera_hit_weight);
  c.camera_corrects_position = j.value("camera_corrects_position", false);
  if (c.confirm_hits < 1) throw std::invalid_argument("config: tracker.confirm_hits must be >= 1");
}

inline void to_json(nlohmann::json& j, const MatchingConfig& c) {
  j = {{"similarity",
        c.similarity == MatchingConfig::Similarity::Iou2D ? "2d-iou" : "bev-iou"},
       {"clear_threshold", c.clear_threshold},
       {"max_occluded", c.max_occluded},
       {"max_truncation", c.max_truncation}};
  std::vector<std::string> classes;
  for (ObjectClass cls : c.classes) classes.emplace_back(to_string(cls));
  j["classes"] = classes;
}

inline void from_json(const nlohmann::json& j, MatchingConfig& c) {
  c.similarity = parse_similarity(j.value("similarity", "2d-iou"));
  c.clear_threshold = j.value("clear_threshold", 0.5);
  c.max_occluded = j.value("max_occluded", 1);
  c.max_truncation = j.value("max_truncation", 0.9);
  if (j.contains("classes")) {
    c.classes.clear();
    for (const auto& name : j["classes"]) c.classes.push_back(object_class_from_name(name.get<std::string>()));
  }
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"scheduler", c.scheduler},
                     {"tracker", c.tracker},
                     {"matching", c.matching},
                     {"energy_profile", c.energy_profile},
                     {"camera_always_on", c.camera_always_on},
                     {"cycle_time", c.cycle_time},
                     {"output_dir", c.output_dir},
                     {"jobs", c.jobs}};
  if (!c.dataset_dir.empty()) j["dataset_dir"] = c.dataset_dir;
  if (!c.scenario.empty()) j["scenario"] = c.scenario;
  if (!c.sequences.empty()) j["sequences"] = c.sequences;
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  c.dataset_dir = j.value("dataset_dir", "");
  c.scenario = j.value("scenario", "");
  if (j.contains("sequences")) c.sequences = j["sequences"].get<std::vector<std::string>>();
  if (j.contains("scheduler")) c.scheduler = j["scheduler"].get<SchedulerConfig>();
  if (j.contains("tracker")) c.tracker = j["tracker"].get<TrackerConfig>();
  if (j.contains("matching")) c.matching = j["matching"].get<MatchingConfig>();
  c.energy_profile = j.value("energy_profile", "pv-rcnn");
  c.camera_always_on = j.value("camera_always_on", true);
  c.cycle_time = j.value("cycle_time", 0.1);
  c.output_dir = j.value("output_dir", "out");
  c.jobs = j.value("jobs", 1);
}

// ---------------------------------------------------------------------------
// Input resolution
// ---------------------------------------------------------------------------

inline ScenarioSpec builtin_scenario(std::string_view name) {
  if (name == "late-detection") return late_detection_scenario();
  if (name == "urban-crossings") return urban_crossings_scenario();
  throw std::invalid_argument("unknown builtin scenario '@" + std::string(name) + "'");
}

/// Loads the configured input: a dataset directory (optionally filtered
/// to the listed sequences) or a generated scenario.
inline std::vector<kitti::SequenceData> load_input(const RunConfig& cfg) {
  std::vector<kitti::SequenceData> sequences;
  if (!cfg.dataset_dir.empty()) {
    for (const auto& info : kitti::load_seqmap(cfg.dataset_dir)) {
      if (!cfg.sequences.empty() &&
          std::find(cfg.sequences.begin(), cfg.sequences.end(), info.id) == cfg.sequences.end())
        continue;
      sequences.push_back(kitti::load_sequence(cfg.dataset_dir, info));
    }
    if (sequences.empty()) throw std::runtime_error("config: no sequences selected");
  } else {
    const ScenarioSpec spec = cfg.scenario.front() == '@'
                                  ? builtin_scenario(cfg.scenario.substr(1))
                                  : load_scenario_spec(cfg.scenario);
    sequences.push_back(generate(spec).to_sequence_data());
  }
  return sequences;
}

}  // namespace dropsim
