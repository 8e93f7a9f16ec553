#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dropsim/scheduler.hpp"

#include "json.hpp"

namespace dropsim {

enum class DetectorModel { PointPillars, PvRcnn, Second };

inline std::string_view to_string(DetectorModel m) {
  switch (m) {
    case DetectorModel::PointPillars: return "pointpillars";
    case DetectorModel::PvRcnn: return "pv-rcnn";
    case DetectorModel::Second: return "second";
  }
  return "pv-rcnn";
}

inline DetectorModel parse_detector_model(std::string_view id) {
  if (id == "pointpillars") return DetectorModel::PointPillars;
  if (id == "pv-rcnn") return DetectorModel::PvRcnn;
  if (id == "second") return DetectorModel::Second;
  throw std::invalid_argument("unknown detector model: " + std::string(id));
}

/// Steady-state power model: idle draw plus activity-weighted detector
/// terms. Fitted profiles fold the whole per-frame term into
/// lidar_active_power with busy fraction 1.
struct EnergyProfile {
  std::string model_id = "pv-rcnn";
  double idle_power = 0.0;
  double lidar_active_power = 0.0;
  double lidar_busy_fraction = 1.0;
  double camera_active_power = 0.0;
  double camera_busy_fraction = 1.0;

  void validate() const {
    if (idle_power < 0.0 || lidar_active_power < 0.0 || camera_active_power < 0.0)
      throw std::invalid_argument("energy: powers must be non-negative");
    if (lidar_busy_fraction < 0.0 || lidar_busy_fraction > 1.0 || camera_busy_fraction < 0.0 ||
        camera_busy_fraction > 1.0)
      throw std::invalid_argument("energy: busy fractions in [0,1]");
  }
};

inline double predicted_draw(const EnergyProfile& profile, double effective_target,
                             bool camera_always_on = true) {
  return profile.idle_power +
         effective_target * profile.lidar_busy_fraction * profile.lidar_active_power +
         (camera_always_on ? profile.camera_busy_fraction * profile.camera_active_power : 0.0);
}

/// Modeled median system draw of a run: dropped lidar frames simply do
/// not spend the detector's active energy.
inline double simulate_draw(const ScheduleStats& stats, const EnergyProfile& profile,
                            bool camera_always_on = true) {
  if (stats.frames_total <= 0) throw std::invalid_argument("energy: frames_total must be > 0");
  return predicted_draw(profile, stats.effective_target(), camera_always_on);
}

enum class FitMethod { LeastSquares, Minimax };

inline FitMethod parse_fit_method(std::string_view id) {
  if (id == "least-squares") return FitMethod::LeastSquares;
  if (id == "minimax") return FitMethod::Minimax;
  throw std::invalid_argument("unknown fit method: " + std::string(id));
}

struct ProfileFit {
  EnergyProfile profile;
  std::vector<double> residuals;  // observed - predicted, per input point
  double max_abs_residual = 0.0;
};

namespace detail {

struct AffineLine {
  double intercept = 0.0;
  double slope = 0.0;
};

inline AffineLine fit_least_squares(std::span<const std::pair<double, double>> obs) {
  double mean_t = 0.0, mean_w = 0.0;
  for (const auto& [t, w] : obs) {
    mean_t += t;
    mean_w += w;
  }
  mean_t /= static_cast<double>(obs.size());
  mean_w /= static_cast<double>(obs.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [t, w] : obs) {
    sxx += (t - mean_t) * (t - mean_t);
    sxy += (t - mean_t) * (w - mean_w);
  }
  if (sxx <= 0.0) throw std::invalid_argument("energy fit: need >= 2 distinct targets");
  const double slope = sxy / sxx;
  return AffineLine{mean_w - slope * mean_t, slope};
}

/// Discrete Chebyshev (minimax) affine fit. The optimal line
/// equioscillates on some point triple, so all triples are candidates;
/// two-point inputs reduce to interpolation.
inline AffineLine fit_minimax(std::span<const std::pair<double, double>> obs) {
  const size_t n = obs.size();
  auto max_residual = [&](const AffineLine& line) {
    double worst = 0.0;
    for (const auto& [t, w] : obs) worst = std::max(worst, std::abs(w - line.intercept - line.slope * t));
    return worst;
  };

  AffineLine best;
  double best_err = std::numeric_limits<double>::infinity();
  auto consider = [&](const AffineLine& line) {
    const double err = max_residual(line);
    if (err < best_err) {
      best_err = err;
      best = line;
    }
  };

  bool any_pair = false;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      const auto [ti, wi] = obs[i];
      const auto [tj, wj] = obs[j];
      if (ti == tj) continue;
      any_pair = true;
      const double slope = (wj - wi) / (tj - ti);
      consider(AffineLine{wi - slope * ti, slope});
      for (size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        const auto [tk, wk] = obs[k];
        // Line parallel to chord(i, j), balanced against point k.
        const double c_out = wi - slope * ti;
        const double c_mid = wk - slope * tk;
        consider(AffineLine{(c_out + c_mid) / 2.0, slope});
      }
    }
  if (!any_pair) throw std::invalid_argument("energy fit: need >= 2 distinct targets");
  return best;
}

}  // namespace detail

/// Affine fit of system draw versus effective processing target. The
/// intercept becomes the idle power and the slope the lidar term.
inline ProfileFit fit_profile(std::span<const std::pair<double, double>> observations,
                              FitMethod method = FitMethod::LeastSquares,
                              std::string model_id = "pv-rcnn") {
  if (observations.size() < 2) throw std::invalid_argument("energy fit: need >= 2 observations");
  const detail::AffineLine line = method == FitMethod::LeastSquares
                                      ? detail::fit_least_squares(observations)
                                      : detail::fit_minimax(observations);
  ProfileFit fit;
  fit.profile.model_id = std::move(model_id);
  fit.profile.idle_power = line.intercept;
  fit.profile.lidar_active_power = line.slope;
  fit.profile.lidar_busy_fraction = 1.0;
  for (const auto& [t, w] : observations) {
    const double r = w - predicted_draw(fit.profile, t, false);
    fit.residuals.push_back(r);
    fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(r));
  }
  return fit;
}

struct YieldInput {
  double draw_100 = 0.0;
  double hota_100 = 0.0;
  double draw_target = 0.0;
  double hota_target = 0.0;
};

/// Watts of draw reduction per point of HOTA given up relative to the
/// 100% baseline; empty when the HOTA delta vanishes.
inline std::optional<double> compute_yield(const YieldInput& y) {
  const double hota_delta = y.hota_100 - y.hota_target;
  if (hota_delta == 0.0) return std::nullopt;
  return (y.draw_100 - y.draw_target) / hota_delta;
}

// ---------------------------------------------------------------------------
// Shipped calibration data
// ---------------------------------------------------------------------------

/// Reference median system-draw measurements (W) per detector model over
/// the five baseline processing targets; source of the shipped profiles.
inline std::vector<std::pair<double, double>> reference_draw_observations(DetectorModel model) {
  switch (model) {
    case DetectorModel::PointPillars:
      return {{1.0, 396.0}, {0.5, 375.0}, {1.0 / 3.0, 313.0}, {0.2, 256.0}, {0.1, 221.0}};
    case DetectorModel::PvRcnn:
      return {{1.0, 461.0}, {0.5, 384.0}, {1.0 / 3.0, 335.0}, {0.2, 295.0}, {0.1, 256.0}};
    case DetectorModel::Second:
      return {{1.0, 494.0}, {0.5, 418.0}, {1.0 / 3.0, 349.0}, {0.2, 297.0}, {0.1, 241.0}};
  }
  throw std::invalid_argument("unknown detector model");
}

/// Default profile for a detector model, fitted on the reference
/// observations with the minimax method (smallest worst-case error).
inline EnergyProfile default_profile(DetectorModel model) {
  auto obs = reference_draw_observations(model);
  return fit_profile(obs, FitMethod::Minimax, std::string(to_string(model))).profile;
}

// ---------------------------------------------------------------------------
// Profile files
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const EnergyProfile& p) {
  j = {{"model_id", p.model_id},
       {"idle_power", p.idle_power},
       {"lidar_active_power", p.lidar_active_power},
       {"lidar_busy_fraction", p.lidar_busy_fraction},
       {"camera_active_power", p.camera_active_power},
       {"camera_busy_fraction", p.camera_busy_fraction}};
}

inline void from_json(const nlohmann::json& j, EnergyProfile& p) {
  p.model_id = j.value("model_id", "pv-rcnn");
  p.idle_power = j.at("idle_power").get<double>();
  p.lidar_active_power = j.at("lidar_active_power").get<double>();
  p.lidar_busy_fraction = j.value("lidar_busy_fraction", 1.0);
  p.camera_active_power = j.value("camera_active_power", 0.0);
  p.camera_busy_fraction = j.value("camera_busy_fraction", 1.0);
}

inline EnergyProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open energy profile " + path.string());
  nlohmann::json j;
  in >> j;
  EnergyProfile profile = j.get<EnergyProfile>();
  profile.validate();
  return profile;
}

inline void save_profile(const EnergyProfile& profile, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write energy profile " + path.string());
  out << nlohmann::json(profile).dump(2) << '\n';
}

/// Resolves a profile reference: a built-in model id, else a JSON file,
/// searched in DROPSIM_PROFILE_DIR when the path is not found directly.
inline EnergyProfile resolve_profile(const std::string& reference) {
  for (DetectorModel m : {DetectorModel::PointPillars, DetectorModel::PvRcnn, DetectorModel::Second})
    if (reference == to_string(m)) return default_profile(m);
  namespace fs = std::filesystem;
  if (fs::exists(reference)) return load_profile(reference);
  if (const char* dir = std::getenv("DROPSIM_PROFILE_DIR")) {
    const fs::path candidate = fs::path(dir) / reference;
    if (fs::exists(candidate)) return load_profile(candidate);
    const fs::path with_ext = fs::path(dir) / (reference + ".json");
    if (fs::exists(with_ext)) return load_profile(with_ext);
  }
  throw std::runtime_error("cannot resolve energy profile '" + reference + "'");
}

}  // namespace dropsim
