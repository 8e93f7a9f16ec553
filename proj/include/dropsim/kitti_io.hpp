#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dropsim/geometry.hpp"
#include "dropsim/types.hpp"

namespace dropsim::kitti {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line = -1, std::string key = {})
      : std::runtime_error(line >= 0 ? "line " + std::to_string(line) + ": " + message
                                     : message),
        line_(line),
        key_(std::move(key)) {}

  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  int line_;
  std::string key_;
};

/// Shortest round-trip decimal formatting: parse(format(x)) == x bitwise.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view token, int line) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
    throw ParseError("non-numeric token '" + std::string(token) + "'", line);
  return v;
}

inline long long parse_int(std::string_view token, int line) {
  long long v = 0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
    throw ParseError("non-integer token '" + std::string(token) + "'", line);
  return v;
}

namespace detail {

inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Calibration files
// ---------------------------------------------------------------------------

/// Parses a KITTI calibration file. Accepts both the object and the
/// tracking spellings (R0_rect / R_rect, Tr_velo_to_cam / Tr_velo_cam),
/// with or without trailing colons on the keys. The left color camera
/// projection (P2) is the one retained.
inline Calibration parse_calibration(std::istream& in) {
  std::map<std::string, std::vector<double>> entries;
  std::map<std::string, int> entry_lines;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = detail::tokenize(line);
    if (tokens.empty()) continue;
    std::string key = tokens.front();
    if (!key.empty() && key.back() == ':') key.pop_back();
    std::vector<double> values;
    values.reserve(tokens.size() - 1);
    for (size_t i = 1; i < tokens.size(); ++i) values.push_back(parse_double(tokens[i], line_no));
    entries[key] = std::move(values);
    entry_lines[key] = line_no;
  }

  auto fetch = [&](std::initializer_list<const char*> names, size_t arity,
                   const char* canonical) -> const std::vector<double>& {
    for (const char* name : names) {
      auto it = entries.find(name);
      if (it == entries.end()) continue;
      if (it->second.size() != arity)
        throw ParseError("key '" + std::string(name) + "' expects " + std::to_string(arity) +
                             " values, got " + std::to_string(it->second.size()),
                         entry_lines[name], name);
      return it->second;
    }
    throw ParseError("missing key '" + std::string(canonical) + "'", -1, canonical);
  };

  const auto& p2 = fetch({"P2"}, 12, "P2");
  const auto& rect = fetch({"R0_rect", "R_rect"}, 9, "R0_rect");
  const auto& velo = fetch({"Tr_velo_to_cam", "Tr_velo_cam"}, 12, "Tr_velo_to_cam");

  Calibration calib;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) calib.projection(r, c) = p2[r * 4 + c];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) calib.rectification(r, c) = rect[r * 3 + c];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) calib.lidar_to_cam(r, c) = velo[r * 4 + c];
  return calib;
}

inline void write_calibration(const Calibration& calib, std::ostream& out) {
  auto row_major = [](const auto& mat) {
    std::string s;
    for (int r = 0; r < mat.rows(); ++r)
      for (int c = 0; c < mat.cols(); ++c) {
        s += ' ';
        s += format_double(mat(r, c));
      }
    return s;
  };
  // P0/P1/P3 mirror P2: only P2 is consumed, the others keep the layout
  // familiar to external tooling.
  for (const char* key : {"P0:", "P1:", "P2:", "P3:"}) out << key << row_major(calib.projection) << '\n';
  out << "R0_rect:" << row_major(calib.rectification) << '\n';
  out << "Tr_velo_to_cam:" << row_major(calib.lidar_to_cam) << '\n';
}

// ---------------------------------------------------------------------------
// Label / detection rows
// ---------------------------------------------------------------------------

/// Sentinel for 3D fields in camera-only sidecar rows.
inline constexpr double kInvalidField = -1000.0;

/// One row of the KITTI tracking grammar:
///   frame id type truncated occluded alpha bbox(4) dims(3) location(3)
///   rotation_y [score]
/// `location` is the bottom-face center in camera coordinates; dims come
/// in (height, width, length) order.
struct LabelRow {
  int frame = 0;
  long long track_id = -1;
  std::string type = "Car";
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  Box2D bbox;
  double height = 0.0, width = 0.0, length = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;
  double rotation_y = 0.0;
  std::optional<double> score;

  bool dont_care() const { return type == "DontCare"; }
  bool has_3d() const { return z > kInvalidField + 1.0; }

  /// Geometric-center box (KITTI stores the bottom-face center).
  Box3D to_box3d() const {
    Box3D b;
    b.center = Eigen::Vector3d(x, y - height / 2.0, z);
    b.height = height;
    b.width = width;
    b.length = length;
    b.yaw = wrap_angle(rotation_y);
    return b;
  }

  void set_box3d(const Box3D& b) {
    height = b.height;
    width = b.width;
    length = b.length;
    x = b.center.x();
    y = b.center.y() + b.height / 2.0;
    z = b.center.z();
    rotation_y = b.yaw;
  }

  bool operator==(const LabelRow&) const = default;
};

/// Parses label or detection rows. Detection mode requires the trailing
/// score and ignores ids; label mode requires ids and treats the score as
/// optional. Rows are returned sorted by frame (stable).
inline std::vector<LabelRow> parse_label_file(std::istream& in, bool is_detection) {
  std::vector<LabelRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::tokenize(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 17 || tokens.size() > 18)
      throw ParseError("expected 17 or 18 fields, got " + std::to_string(tokens.size()), line_no);
    if (is_detection && tokens.size() != 18)
      throw ParseError("detection row missing trailing score", line_no);

    LabelRow row;
    row.frame = static_cast<int>(parse_int(tokens[0], line_no));
    row.track_id = parse_int(tokens[1], line_no);
    row.type = tokens[2];
    row.truncated = parse_double(tokens[3], line_no);
    row.occluded = static_cast<int>(parse_int(tokens[4], line_no));
    row.alpha = parse_double(tokens[5], line_no);
    row.bbox = Box2D{parse_double(tokens[6], line_no), parse_double(tokens[7], line_no),
                     parse_double(tokens[8], line_no), parse_double(tokens[9], line_no)};
    row.height = parse_double(tokens[10], line_no);
    row.width = parse_double(tokens[11], line_no);
    row.length = parse_double(tokens[12], line_no);
    row.x = parse_double(tokens[13], line_no);
    row.y = parse_double(tokens[14], line_no);
    row.z = parse_double(tokens[15], line_no);
    row.rotation_y = parse_double(tokens[16], line_no);
    if (tokens.size() == 18) row.score = parse_double(tokens[17], line_no);
    if (row.frame < 0) throw ParseError("negative frame index", line_no);
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const LabelRow& a, const LabelRow& b) { return a.frame < b.frame; });
  return rows;
}

inline void write_label_row(const LabelRow& row, std::ostream& out) {
  out << row.frame << ' ' << row.track_id << ' ' << row.type << ' '
      << format_double(row.truncated) << ' ' << row.occluded << ' ' << format_double(row.alpha)
      << ' ' << format_double(row.bbox.x_min) << ' ' << format_double(row.bbox.y_min) << ' '
      << format_double(row.bbox.x_max) << ' ' << format_double(row.bbox.y_max) << ' '
      << format_double(row.height) << ' ' << format_double(row.width) << ' '
      << format_double(row.length) << ' ' << format_double(row.x) << ' ' << format_double(row.y)
      << ' ' << format_double(row.z) << ' ' << format_double(row.rotation_y);
  if (row.score) out << ' ' << format_double(*row.score);
  out << '\n';
}

inline void write_label_rows(const std::vector<LabelRow>& rows, std::ostream& out) {
  for (const auto& row : rows) write_label_row(row, out);
  if (!out) throw std::runtime_error("label sink write failure");
}

// ---------------------------------------------------------------------------
// Row grouping
// ---------------------------------------------------------------------------

inline std::vector<GroundTruthTrack> group_tracks(const std::vector<LabelRow>& rows) {
  std::map<long long, GroundTruthTrack> by_id;
  for (const auto& row : rows) {
    if (row.dont_care()) continue;
    auto& track = by_id[row.track_id];
    if (track.entries.empty()) {
      track.track_id = static_cast<int>(row.track_id);
      track.class_id = object_class_from_kitti(row.type);
    }
    for (const auto& e : track.entries)
      if (e.frame == row.frame)
        throw ParseError("duplicate entry for track " + std::to_string(row.track_id) +
                         " at frame " + std::to_string(row.frame));
    track.entries.push_back(GroundTruthEntry{row.frame, row.bbox, row.to_box3d(), row.truncated,
                                             row.occluded});
  }
  std::vector<GroundTruthTrack> tracks;
  tracks.reserve(by_id.size());
  for (auto& [id, track] : by_id) {
    std::sort(track.entries.begin(), track.entries.end(),
              [](const GroundTruthEntry& a, const GroundTruthEntry& b) { return a.frame < b.frame; });
    tracks.push_back(std::move(track));
  }
  return tracks;
}

inline std::vector<std::pair<int, Box2D>> collect_dont_care(const std::vector<LabelRow>& rows) {
  std::vector<std::pair<int, Box2D>> regions;
  for (const auto& row : rows)
    if (row.dont_care()) regions.emplace_back(row.frame, row.bbox);
  return regions;
}

inline std::vector<std::vector<Detection3D>> lidar_detections_by_frame(
    const std::vector<LabelRow>& rows, int num_frames) {
  std::vector<std::vector<Detection3D>> frames(num_frames);
  for (const auto& row : rows) {
    if (row.frame >= num_frames || row.dont_care()) continue;
    Detection3D det;
    det.class_id = object_class_from_kitti(row.type);
    det.box = row.to_box3d();
    if (row.bbox.valid()) det.box2d_hint = row.bbox;
    det.score = row.score.value_or(1.0);
    frames[row.frame].push_back(std::move(det));
  }
  return frames;
}

inline std::vector<std::vector<Detection2D>> camera_detections_by_frame(
    const std::vector<LabelRow>& rows, int num_frames) {
  std::vector<std::vector<Detection2D>> frames(num_frames);
  for (const auto& row : rows) {
    if (row.frame >= num_frames || row.dont_care()) continue;
    Detection2D det;
    det.class_id = object_class_from_kitti(row.type);
    det.box = row.bbox;
    det.score = row.score.value_or(1.0);
    frames[row.frame].push_back(det);
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Tracking output
// ---------------------------------------------------------------------------

/// One confirmed track snapshot bound for the submission-format writer.
struct TrackOutput {
  int frame = 0;
  int track_id = 0;
  ObjectClass class_id = ObjectClass::Car;
  Box3D box;
  std::optional<Box2D> bbox;  // projected image box, when available
  double score = 1.0;
};

/// Writes confirmed tracks in the KITTI tracking submission format.
/// parse_label_file(write(x), true) reproduces the rows bit-for-bit.
inline void write_tracking_output(const std::vector<TrackOutput>& outputs, std::ostream& out) {
  std::vector<LabelRow> rows;
  rows.reserve(outputs.size());
  for (const auto& t : outputs) {
    LabelRow row;
    row.frame = t.frame;
    row.track_id = t.track_id;
    row.type = kitti_type(t.class_id);
    row.alpha = wrap_angle(t.box.yaw - std::atan2(t.box.center.x(), t.box.center.z()));
    row.bbox = t.bbox.value_or(Box2D{-1.0, -1.0, -1.0, -1.0});
    row.set_box3d(t.box);
    row.score = t.score;
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const LabelRow& a, const LabelRow& b) { return a.frame < b.frame; });
  write_label_rows(rows, out);
}

// ---------------------------------------------------------------------------
// Dataset directory layout
// ---------------------------------------------------------------------------
//
//   <dataset>/
//     seqmap.txt            "<seq> empty <first> <end>" per sequence
//     calib/<seq>.txt
//     label_02/<seq>.txt    ground truth (optional)
//     det_3d/<seq>.txt      lidar detections with scores
//     det_2d/<seq>.txt      camera detections (sidecar rows, 3D fields -1000)

struct SequenceInfo {
  std::string id;
  int num_frames = 0;
};

inline std::vector<SequenceInfo> parse_seqmap(std::istream& in) {
  std::vector<SequenceInfo> sequences;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::tokenize(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 4) throw ParseError("seqmap rows need 4 fields", line_no);
    const long long first = parse_int(tokens[2], line_no);
    const long long end = parse_int(tokens[3], line_no);
    if (first != 0 || end <= 0) throw ParseError("sequence frames must cover [0, end)", line_no);
    sequences.push_back(SequenceInfo{tokens[0], static_cast<int>(end)});
  }
  return sequences;
}

inline void write_seqmap(const std::vector<SequenceInfo>& sequences, std::ostream& out) {
  char buf[16];
  for (const auto& seq : sequences) {
    std::snprintf(buf, sizeof(buf), "%06d", seq.num_frames);
    out << seq.id << " empty 000000 " << buf << '\n';
  }
}

struct SequenceData {
  SequenceInfo info;
  Calibration calib;
  std::vector<GroundTruthTrack> gt;
  std::vector<std::pair<int, Box2D>> dont_care;
  std::vector<std::vector<Detection3D>> lidar_by_frame;
  std::vector<std::vector<Detection2D>> camera_by_frame;
};

namespace detail {

inline std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace detail

inline std::vector<SequenceInfo> load_seqmap(const std::filesystem::path& dataset_dir) {
  auto in = detail::open_or_throw(dataset_dir / "seqmap.txt");
  return parse_seqmap(in);
}

inline SequenceData load_sequence(const std::filesystem::path& dataset_dir,
                                  const SequenceInfo& info) {
  SequenceData data;
  data.info = info;
  {
    auto in = detail::open_or_throw(dataset_dir / "calib" / (info.id + ".txt"));
    data.calib = parse_calibration(in);
  }
  const auto label_path = dataset_dir / "label_02" / (info.id + ".txt");
  if (std::filesystem::exists(label_path)) {
    auto in = detail::open_or_throw(label_path);
    const auto rows = parse_label_file(in, false);
    data.gt = group_tracks(rows);
    data.dont_care = collect_dont_care(rows);
  }
  {
    auto in = detail::open_or_throw(dataset_dir / "det_3d" / (info.id + ".txt"));
    data.lidar_by_frame = lidar_detections_by_frame(parse_label_file(in, true), info.num_frames);
  }
  {
    auto in = detail::open_or_throw(dataset_dir / "det_2d" / (info.id + ".txt"));
    data.camera_by_frame = camera_detections_by_frame(parse_label_file(in, true), info.num_frames);
  }
  return data;
}

/// One bundle per frame index in [0, num_frames); timestamps are exact
/// multiples of the cycle time.
inline std::vector<FrameBundle> make_frame_bundles(const SequenceData& data, double cycle_time) {
  std::vector<FrameBundle> frames(data.info.num_frames);
  for (int k = 0; k < data.info.num_frames; ++k) {
    frames[k].sequence_id = data.info.id;
    frames[k].frame_index = k;
    frames[k].timestamp = k * cycle_time;
    if (k < static_cast<int>(data.lidar_by_frame.size())) frames[k].lidar_detections = data.lidar_by_frame[k];
    if (k < static_cast<int>(data.camera_by_frame.size())) frames[k].camera_detections = data.camera_by_frame[k];
  }
  return frames;
}

}  // namespace dropsim::kitti
