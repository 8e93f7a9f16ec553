#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dropsim/assignment.hpp"
#include "dropsim/geometry.hpp"
#include "dropsim/types.hpp"

namespace dropsim {

struct MatchingConfig {
  enum class Similarity { Iou2D, BevIou } similarity = Similarity::Iou2D;
  double clear_threshold = 0.5;
  std::vector<double> hota_alphas = default_alphas();
  std::vector<ObjectClass> classes = {ObjectClass::Car};

  // KITTI-convention ignore handling, configurable.
  double dont_care_coverage = 0.5;  // intersection over prediction area
  double ignore_match_iou = 0.5;    // match threshold against ignored GT
  int max_occluded = 1;             // GT beyond these become ignore regions
  double max_truncation = 0.9;

  static std::vector<double> default_alphas() {
    std::vector<double> alphas;
    for (int i = 1; i <= 19; ++i) alphas.push_back(0.05 * i);
    return alphas;
  }

  void validate() const {
    if (clear_threshold <= 0.0 || clear_threshold >= 1.0)
      throw std::invalid_argument("metrics: clear_threshold in (0,1)");
    if (std::adjacent_find(hota_alphas.begin(), hota_alphas.end(),
                           [](double a, double b) { return b <= a; }) != hota_alphas.end())
      throw std::invalid_argument("metrics: hota_alphas must be strictly increasing");
  }
};

inline MatchingConfig::Similarity parse_similarity(std::string_view id) {
  if (id == "2d-iou") return MatchingConfig::Similarity::Iou2D;
  if (id == "bev-iou") return MatchingConfig::Similarity::BevIou;
  throw std::invalid_argument("unknown similarity: " + std::string(id));
}

struct EvalBox {
  int id = -1;
  Box2D box2d;
  Box3D box3d;
  bool has_3d = false;
};

/// Frame-indexed GT/prediction streams for one class of one sequence,
/// after ignore-region preprocessing.
struct SequenceEval {
  std::vector<std::vector<EvalBox>> gt;
  std::vector<std::vector<EvalBox>> pred;
};

inline double eval_similarity(const EvalBox& a, const EvalBox& b,
                              MatchingConfig::Similarity sim) {
  if (sim == MatchingConfig::Similarity::BevIou) {
    if (!a.has_3d || !b.has_3d) return 0.0;
    return bev_iou(a.box3d, b.box3d);
  }
  return iou_2d(a.box2d, b.box2d);
}

// ---------------------------------------------------------------------------
// Frame matching
// ---------------------------------------------------------------------------

struct FrameMatches {
  std::vector<std::pair<int, int>> pairs;  // (gt index, pred index)
  std::vector<double> similarities;
};

/// Hungarian assignment maximizing total similarity with pairs below the
/// threshold removed afterwards.
inline FrameMatches match_frame(const std::vector<EvalBox>& gt, const std::vector<EvalBox>& pred,
                                MatchingConfig::Similarity sim, double threshold) {
  FrameMatches out;
  if (gt.empty() || pred.empty()) return out;
  Eigen::MatrixXd s(gt.size(), pred.size());
  for (size_t r = 0; r < gt.size(); ++r)
    for (size_t c = 0; c < pred.size(); ++c) s(r, c) = eval_similarity(gt[r], pred[c], sim);
  for (const auto& [r, c] : solve_assignment_max(s)) {
    if (s(r, c) < threshold) continue;
    out.pairs.emplace_back(r, c);
    out.similarities.push_back(s(r, c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CLEAR
// ---------------------------------------------------------------------------

struct ClearResult {
  long long tp = 0, fp = 0, fn = 0, idsw = 0;
  long long gt_count = 0;
  double similarity_sum = 0.0;

  /// MOTA percent; empty when there is no ground truth (undefined, not 0).
  std::optional<double> mota() const {
    if (gt_count == 0) return std::nullopt;
    return 100.0 * (1.0 - static_cast<double>(fn + fp + idsw) / static_cast<double>(gt_count));
  }

  std::optional<double> motp() const {
    if (tp == 0) return std::nullopt;
    return 100.0 * similarity_sum / static_cast<double>(tp);
  }

  void accumulate(const ClearResult& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    idsw += other.idsw;
    gt_count += other.gt_count;
    similarity_sum += other.similarity_sum;
  }
};

/// CLEAR counting per the standard matching order: matches persisting
/// from the previous frame are kept first, the remainder is matched by
/// the Hungarian algorithm; an identity switch is counted whenever a GT
/// track's matched prediction id differs between its consecutive matched
/// frames.
inline ClearResult compute_clear(const SequenceEval& seq, const MatchingConfig& cfg) {
  ClearResult result;
  std::map<int, int> prev_match;         // gt id -> pred id in previous frame
  std::map<int, int> last_matched_pred;  // gt id -> most recent matched pred id

  const size_t num_frames = std::max(seq.gt.size(), seq.pred.size());
  for (size_t t = 0; t < num_frames; ++t) {
    static const std::vector<EvalBox> empty;
    const auto& gt = t < seq.gt.size() ? seq.gt[t] : empty;
    const auto& pred = t < seq.pred.size() ? seq.pred[t] : empty;
    result.gt_count += static_cast<long long>(gt.size());

    Eigen::MatrixXd s(gt.size(), pred.size());
    for (size_t r = 0; r < gt.size(); ++r)
      for (size_t c = 0; c < pred.size(); ++c)
        s(r, c) = eval_similarity(gt[r], pred[c], cfg.similarity);

    std::vector<bool> gt_taken(gt.size(), false), pred_taken(pred.size(), false);
    std::vector<std::pair<int, int>> matches;

    // Persist previous-frame pairings that still overlap sufficiently.
    for (size_t r = 0; r < gt.size(); ++r) {
      const auto it = prev_match.find(gt[r].id);
      if (it == prev_match.end()) continue;
      for (size_t c = 0; c < pred.size(); ++c) {
        if (pred_taken[c] || pred[c].id != it->second) continue;
        if (s(r, c) >= cfg.clear_threshold) {
          matches.emplace_back(static_cast<int>(r), static_cast<int>(c));
          gt_taken[r] = true;
          pred_taken[c] = true;
        }
        break;
      }
    }

    std::vector<int> free_gt, free_pred;
    for (size_t r = 0; r < gt.size(); ++r)
      if (!gt_taken[r]) free_gt.push_back(static_cast<int>(r));
    for (size_t c = 0; c < pred.size(); ++c)
      if (!pred_taken[c]) free_pred.push_back(static_cast<int>(c));
    if (!free_gt.empty() && !free_pred.empty()) {
      Eigen::MatrixXd sub(free_gt.size(), free_pred.size());
      for (size_t r = 0; r < free_gt.size(); ++r)
        for (size_t c = 0; c < free_pred.size(); ++c) sub(r, c) = s(free_gt[r], free_pred[c]);
      for (const auto& [r, c] : solve_assignment_max(sub)) {
        if (sub(r, c) < cfg.clear_threshold) continue;
        matches.emplace_back(free_gt[r], free_pred[c]);
      }
    }

    prev_match.clear();
    for (const auto& [r, c] : matches) {
      ++result.tp;
      result.similarity_sum += s(r, c);
      const int gt_id = gt[r].id;
      const int pred_id = pred[c].id;
      const auto last = last_matched_pred.find(gt_id);
      if (last != last_matched_pred.end() && last->second != pred_id) ++result.idsw;
      last_matched_pred[gt_id] = pred_id;
      prev_match[gt_id] = pred_id;
    }
    result.fn += static_cast<long long>(gt.size() - matches.size());
    result.fp += static_cast<long long>(pred.size() - matches.size());
  }
  return result;
}

// ---------------------------------------------------------------------------
// HOTA
// ---------------------------------------------------------------------------

struct HotaResult {
  double hota = 0.0, det_a = 0.0, ass_a = 0.0;  // percent, averaged over alpha
  std::vector<double> alphas;
  std::vector<double> hota_alpha, det_a_alpha, ass_a_alpha;  // percent per alpha
  bool vacuous = false;  // no GT and no predictions: perfection by definition
};

namespace detail {

struct HotaCounts {
  // Per alpha.
  std::vector<double> tp, fn, fp, ass_sum;
};

/// Accumulates the per-alpha HOTA counts of one sequence following the
/// reference formulation: per-frame Hungarian on the product of the
/// global alignment score and the raw similarity, with matches only
/// counting when the similarity reaches alpha.
inline void hota_accumulate(const SequenceEval& seq, const MatchingConfig& cfg, HotaCounts& acc) {
  const auto& alphas = cfg.hota_alphas;
  if (acc.tp.empty()) {
    acc.tp.assign(alphas.size(), 0.0);
    acc.fn.assign(alphas.size(), 0.0);
    acc.fp.assign(alphas.size(), 0.0);
    acc.ass_sum.assign(alphas.size(), 0.0);
  }

  // Dense relabeling.
  std::map<int, int> gt_ids, pred_ids;
  const size_t num_frames = std::max(seq.gt.size(), seq.pred.size());
  static const std::vector<EvalBox> empty;
  auto gt_at = [&](size_t t) -> const std::vector<EvalBox>& {
    return t < seq.gt.size() ? seq.gt[t] : empty;
  };
  auto pred_at = [&](size_t t) -> const std::vector<EvalBox>& {
    return t < seq.pred.size() ? seq.pred[t] : empty;
  };
  for (size_t t = 0; t < num_frames; ++t) {
    for (const auto& b : gt_at(t)) gt_ids.emplace(b.id, static_cast<int>(gt_ids.size()));
    for (const auto& b : pred_at(t)) pred_ids.emplace(b.id, static_cast<int>(pred_ids.size()));
  }
  const int ng = static_cast<int>(gt_ids.size());
  const int np = static_cast<int>(pred_ids.size());

  std::vector<double> gt_id_count(ng, 0.0), pred_id_count(np, 0.0);
  Eigen::MatrixXd potential = Eigen::MatrixXd::Zero(std::max(ng, 1), std::max(np, 1));

  struct FrameView {
    std::vector<int> gid, pid;
    Eigen::MatrixXd sim;
  };
  std::vector<FrameView> views(num_frames);

  for (size_t t = 0; t < num_frames; ++t) {
    auto& view = views[t];
    for (const auto& b : gt_at(t)) view.gid.push_back(gt_ids[b.id]);
    for (const auto& b : pred_at(t)) view.pid.push_back(pred_ids[b.id]);
    for (int g : view.gid) gt_id_count[g] += 1.0;
    for (int p : view.pid) pred_id_count[p] += 1.0;
    const auto& gt = gt_at(t);
    const auto& pred = pred_at(t);
    view.sim.resize(gt.size(), pred.size());
    for (size_t r = 0; r < gt.size(); ++r)
      for (size_t c = 0; c < pred.size(); ++c)
        view.sim(r, c) = eval_similarity(gt[r], pred[c], cfg.similarity);

    // Normalized potential-match weights (the per-frame Jaccard of the
    // similarity mass).
    if (gt.size() > 0 && pred.size() > 0) {
      const Eigen::VectorXd row_sum = view.sim.rowwise().sum();
      const Eigen::VectorXd col_sum = view.sim.colwise().sum();
      for (size_t r = 0; r < gt.size(); ++r)
        for (size_t c = 0; c < pred.size(); ++c) {
          const double denom = row_sum(r) + col_sum(c) - view.sim(r, c);
          if (denom > std::numeric_limits<double>::epsilon())
            potential(view.gid[r], view.pid[c]) += view.sim(r, c) / denom;
        }
    }
  }

  Eigen::MatrixXd alignment = Eigen::MatrixXd::Zero(std::max(ng, 1), std::max(np, 1));
  for (int g = 0; g < ng; ++g)
    for (int p = 0; p < np; ++p) {
      const double denom = gt_id_count[g] + pred_id_count[p] - potential(g, p);
      if (denom > 0.0) alignment(g, p) = potential(g, p) / denom;
    }

  const double eps = std::numeric_limits<double>::epsilon();
  for (size_t a = 0; a < alphas.size(); ++a) {
    const double alpha = alphas[a];
    Eigen::MatrixXd matches = Eigen::MatrixXd::Zero(std::max(ng, 1), std::max(np, 1));
    double tp = 0.0;
    for (size_t t = 0; t < num_frames; ++t) {
      const auto& view = views[t];
      const int rows = static_cast<int>(view.gid.size());
      const int cols = static_cast<int>(view.pid.size());
      double tp_frame = 0.0;
      if (rows > 0 && cols > 0) {
        Eigen::MatrixXd score(rows, cols);
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c)
            score(r, c) = alignment(view.gid[r], view.pid[c]) * view.sim(r, c);
        for (const auto& [r, c] : solve_assignment_max(score)) {
          if (view.sim(r, c) < alpha - eps) continue;
          matches(view.gid[r], view.pid[c]) += 1.0;
          tp_frame += 1.0;
        }
      }
      tp += tp_frame;
      acc.fn[a] += rows - tp_frame;
      acc.fp[a] += cols - tp_frame;
    }
    acc.tp[a] += tp;
    for (int g = 0; g < ng; ++g)
      for (int p = 0; p < np; ++p) {
        if (matches(g, p) <= 0.0) continue;
        const double denom = gt_id_count[g] + pred_id_count[p] - matches(g, p);
        acc.ass_sum[a] += matches(g, p) * (matches(g, p) / denom);
      }
  }
}

inline HotaResult hota_finalize(const HotaCounts& acc, const std::vector<double>& alphas) {
  HotaResult result;
  result.alphas = alphas;
  double total_boxes = 0.0;
  for (size_t a = 0; a < alphas.size(); ++a) total_boxes = std::max(total_boxes, acc.tp[a] + acc.fn[a] + acc.fp[a]);
  if (total_boxes == 0.0) {
    result.vacuous = true;
    result.hota = result.det_a = result.ass_a = 100.0;
    result.hota_alpha.assign(alphas.size(), 100.0);
    result.det_a_alpha.assign(alphas.size(), 100.0);
    result.ass_a_alpha.assign(alphas.size(), 100.0);
    return result;
  }
  for (size_t a = 0; a < alphas.size(); ++a) {
    const double det_denom = acc.tp[a] + acc.fn[a] + acc.fp[a];
    const double det = det_denom > 0.0 ? acc.tp[a] / det_denom : 0.0;
    const double ass = acc.tp[a] > 0.0 ? acc.ass_sum[a] / acc.tp[a] : 0.0;
    result.det_a_alpha.push_back(100.0 * det);
    result.ass_a_alpha.push_back(100.0 * ass);
    result.hota_alpha.push_back(100.0 * std::sqrt(det * ass));
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  result.det_a = mean(result.det_a_alpha);
  result.ass_a = mean(result.ass_a_alpha);
  result.hota = mean(result.hota_alpha);
  return result;
}

}  // namespace detail

inline HotaResult compute_hota(const SequenceEval& seq, const MatchingConfig& cfg) {
  detail::HotaCounts counts;
  detail::hota_accumulate(seq, cfg, counts);
  return detail::hota_finalize(counts, cfg.hota_alphas);
}

/// Multi-sequence evaluation: CLEAR counts pool additively; HOTA pools
/// the per-alpha counts with sequence-local id spaces.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(MatchingConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  void add(const SequenceEval& seq) {
    clear_.accumulate(compute_clear(seq, cfg_));
    detail::hota_accumulate(seq, cfg_, hota_counts_);
  }

  ClearResult clear() const { return clear_; }
  HotaResult hota() const { return detail::hota_finalize(hota_counts_, cfg_.hota_alphas); }
  const MatchingConfig& config() const { return cfg_; }

 private:
  MatchingConfig cfg_;
  ClearResult clear_;
  detail::HotaCounts hota_counts_;
};

// ---------------------------------------------------------------------------
// Preprocessing: class selection, difficulty filter, ignore regions
// ---------------------------------------------------------------------------

/// Builds the evaluation streams for one class. GT entries filtered by
/// the difficulty knobs turn into ignore regions; predictions matched to
/// ignore regions (or covered by DontCare areas) are removed rather than
/// counted as false positives.
inline SequenceEval build_sequence_eval(const std::vector<GroundTruthTrack>& gt_tracks,
                                        const std::vector<std::pair<int, Box2D>>& dont_care,
                                        const std::vector<std::vector<EvalBox>>& pred_by_frame,
                                        int num_frames, ObjectClass cls,
                                        const MatchingConfig& cfg) {
  SequenceEval seq;
  seq.gt.resize(num_frames);
  seq.pred.resize(num_frames);

  std::vector<std::vector<EvalBox>> ignored(num_frames);
  for (const auto& track : gt_tracks) {
    if (track.class_id != cls) continue;
    for (const auto& e : track.entries) {
      if (e.frame < 0 || e.frame >= num_frames) continue;
      EvalBox box;
      box.id = track.track_id;
      box.box2d = e.bbox;
      box.box3d = e.box;
      box.has_3d = e.box.valid();
      const bool hard = e.occluded > cfg.max_occluded || e.truncated > cfg.max_truncation;
      (hard ? ignored[e.frame] : seq.gt[e.frame]).push_back(box);
    }
  }

  for (int t = 0; t < num_frames; ++t) {
    std::vector<EvalBox> preds = t < static_cast<int>(pred_by_frame.size()) ? pred_by_frame[t]
                                                                            : std::vector<EvalBox>{};
    // Image-space evaluation only sees what projects into the image;
    // predictions outside the camera frustum are not representable there.
    if (cfg.similarity == MatchingConfig::Similarity::Iou2D)
      std::erase_if(preds, [](const EvalBox& p) { return !p.box2d.valid(); });
    // Predictions the ignore set accounts for are dropped up front.
    if (!preds.empty() && !ignored[t].empty()) {
      Eigen::MatrixXd s(preds.size(), ignored[t].size());
      for (size_t r = 0; r < preds.size(); ++r)
        for (size_t c = 0; c < ignored[t].size(); ++c)
          s(r, c) = eval_similarity(preds[r], ignored[t][c], cfg.similarity);
      std::vector<bool> drop(preds.size(), false);
      for (const auto& [r, c] : solve_assignment_max(s))
        if (s(r, c) >= cfg.ignore_match_iou) drop[r] = true;
      std::vector<EvalBox> kept;
      for (size_t r = 0; r < preds.size(); ++r)
        if (!drop[r]) kept.push_back(preds[r]);
      preds = std::move(kept);
    }
    if (!preds.empty() && !dont_care.empty()) {
      std::vector<EvalBox> kept;
      for (const auto& p : preds) {
        bool covered = false;
        for (const auto& [frame, region] : dont_care) {
          if (frame != t) continue;
          if (coverage_2d(p.box2d, region) > cfg.dont_care_coverage) {
            covered = true;
            break;
          }
        }
        if (!covered) kept.push_back(p);
      }
      preds = std::move(kept);
    }
    seq.pred[t] = std::move(preds);
  }
  return seq;
}

}  // namespace dropsim
