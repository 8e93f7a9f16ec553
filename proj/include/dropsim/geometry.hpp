#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dropsim {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

/// Axis-aligned box in image coordinates (pixels).
struct Box2D {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  bool valid() const { return x_min < x_max && y_min < y_max; }

  bool operator==(const Box2D&) const = default;
};

inline double iou_2d(const Box2D& a, const Box2D& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Fraction of `a` covered by `b` (intersection over area of `a`).
inline double coverage_2d(const Box2D& a, const Box2D& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0 || a.area() <= 0.0) return 0.0;
  return iw * ih / a.area();
}

/// Oriented box in camera coordinates (x right, y down, z forward).
/// `center` is the geometric box center; `yaw` rotates about the vertical
/// (y) axis and is kept wrapped to (-pi, pi]. Dimensions follow the
/// (height, width, length) order, with length along the local x axis and
/// width along the local z axis.
struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double height = 0.0;
  double width = 0.0;
  double length = 0.0;
  double yaw = 0.0;

  bool valid() const { return height > 0.0 && width > 0.0 && length > 0.0; }

  std::array<Eigen::Vector3d, 8> corners() const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    std::array<Eigen::Vector3d, 8> out;
    int k = 0;
    for (double dx : {length / 2.0, -length / 2.0})
      for (double dy : {height / 2.0, -height / 2.0})
        for (double dz : {width / 2.0, -width / 2.0}) {
          out[k++] = center + Eigen::Vector3d(c * dx + s * dz, dy, -s * dx + c * dz);
        }
    return out;
  }

  /// Footprint corners on the (x, z) ground plane, in cyclic order.
  std::array<Eigen::Vector2d, 4> bev_footprint() const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double hl = length / 2.0, hw = width / 2.0;
    std::array<Eigen::Vector2d, 4> out;
    const std::array<std::pair<double, double>, 4> local = {
        {{hl, hw}, {hl, -hw}, {-hl, -hw}, {-hl, hw}}};
    for (int i = 0; i < 4; ++i) {
      const auto [dx, dz] = local[i];
      out[i] = Eigen::Vector2d(center.x() + c * dx + s * dz, center.z() - s * dx + c * dz);
    }
    return out;
  }
};

/// Camera model: projection (P2), rectification (R0_rect) and the rigid
/// lidar-to-camera transform, plus the image bounds used to clip
/// projected boxes.
struct Calibration {
  Eigen::Matrix<double, 3, 4> projection = Eigen::Matrix<double, 3, 4>::Zero();
  Eigen::Matrix3d rectification = Eigen::Matrix3d::Identity();
  Eigen::Matrix<double, 3, 4> lidar_to_cam = Eigen::Matrix<double, 3, 4>::Zero();
  int image_width = 1242;
  int image_height = 375;

  double focal_length() const { return projection(0, 0); }

  bool rectification_orthonormal(double tol = 1e-6) const {
    return (rectification * rectification.transpose() - Eigen::Matrix3d::Identity())
               .cwiseAbs()
               .maxCoeff() < tol;
  }
};

/// Minimum depth (m) for a corner to take part in the projected hull.
inline constexpr double kMinProjectionDepth = 0.1;

/// Projects a 3D box into the image as the axis-aligned hull of its
/// visible corners, clipped to the image. Corners at or behind
/// kMinProjectionDepth are dropped; returns nullopt when no corner is in
/// front of the camera or the hull lies entirely outside the image.
inline std::optional<Box2D> project_box3d(const Box3D& box, const Calibration& calib) {
  double u_min = std::numeric_limits<double>::infinity();
  double v_min = std::numeric_limits<double>::infinity();
  double u_max = -std::numeric_limits<double>::infinity();
  double v_max = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& corner : box.corners()) {
    const Eigen::Vector3d r = calib.rectification * corner;
    if (r.z() <= kMinProjectionDepth) continue;
    const Eigen::Vector3d p = calib.projection * r.homogeneous();
    const double u = p.x() / p.z();
    const double v = p.y() / p.z();
    u_min = std::min(u_min, u);
    v_min = std::min(v_min, v);
    u_max = std::max(u_max, u);
    v_max = std::max(v_max, v);
    any = true;
  }
  if (!any) return std::nullopt;
  Box2D hull;
  hull.x_min = std::max(u_min, 0.0);
  hull.y_min = std::max(v_min, 0.0);
  hull.x_max = std::min(u_max, static_cast<double>(calib.image_width));
  hull.y_max = std::min(v_max, static_cast<double>(calib.image_height));
  if (hull.x_min > hull.x_max || hull.y_min > hull.y_max) return std::nullopt;
  return hull;
}

namespace detail {

inline double polygon_area(const std::vector<Eigen::Vector2d>& pts) {
  if (pts.size() < 3) return 0.0;
  double twice = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const auto& q = pts[(i + 1) % pts.size()];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return std::abs(twice) / 2.0;
}

inline double signed_area2(const std::vector<Eigen::Vector2d>& pts) {
  double twice = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const auto& q = pts[(i + 1) % pts.size()];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return twice;
}

/// Sutherland-Hodgman clip of a convex `subject` polygon against a convex
/// `clip` polygon given in counter-clockwise order.
inline std::vector<Eigen::Vector2d> clip_convex(std::vector<Eigen::Vector2d> subject,
                                                const std::vector<Eigen::Vector2d>& clip) {
  for (size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    const Eigen::Vector2d a = clip[i];
    const Eigen::Vector2d b = clip[(i + 1) % clip.size()];
    const Eigen::Vector2d edge = b - a;
    auto inside = [&](const Eigen::Vector2d& p) {
      return edge.x() * (p.y() - a.y()) - edge.y() * (p.x() - a.x()) >= 0.0;
    };
    auto intersect = [&](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
      const Eigen::Vector2d d = q - p;
      const double denom = edge.x() * d.y() - edge.y() * d.x();
      const double t = (edge.x() * (a.y() - p.y()) - edge.y() * (a.x() - p.x())) / denom;
      return Eigen::Vector2d(p + t * d);
    };
    std::vector<Eigen::Vector2d> out;
    out.reserve(subject.size() + 1);
    for (size_t j = 0; j < subject.size(); ++j) {
      const Eigen::Vector2d& cur = subject[j];
      const Eigen::Vector2d& prev = subject[(j + subject.size() - 1) % subject.size()];
      const bool cur_in = inside(cur);
      const bool prev_in = inside(prev);
      if (cur_in) {
        if (!prev_in) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (prev_in) {
        out.push_back(intersect(prev, cur));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

inline std::vector<Eigen::Vector2d> footprint_ccw(const Box3D& box) {
  const auto quad = box.bev_footprint();
  std::vector<Eigen::Vector2d> pts(quad.begin(), quad.end());
  if (signed_area2(pts) < 0.0) std::reverse(pts.begin(), pts.end());
  return pts;
}

}  // namespace detail

/// Yaw-aware bird's-eye-view IoU of the two box footprints.
inline double bev_iou(const Box3D& a, const Box3D& b) {
  const auto pa = detail::footprint_ccw(a);
  const auto pb = detail::footprint_ccw(b);
  const double area_a = detail::polygon_area(pa);
  const double area_b = detail::polygon_area(pb);
  const double inter = detail::polygon_area(detail::clip_convex(pa, pb));
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

inline double centroid_distance(const Box3D& a, const Box3D& b) {
  return (a.center - b.center).norm();
}

enum class OverlapMetric { BevIou, CentroidDistance };

inline OverlapMetric parse_overlap_metric(std::string_view id) {
  if (id == "bev-iou") return OverlapMetric::BevIou;
  if (id == "centroid-distance") return OverlapMetric::CentroidDistance;
  throw std::invalid_argument("unknown association metric: " + std::string(id));
}

inline std::string_view to_string(OverlapMetric m) {
  return m == OverlapMetric::BevIou ? "bev-iou" : "centroid-distance";
}

/// Association overlap between two 3D boxes. BevIou yields a ratio in
/// [0, 1]; CentroidDistance yields meters (callers negate for similarity
/// ordering).
inline double overlap_3d(const Box3D& a, const Box3D& b, OverlapMetric metric) {
  switch (metric) {
    case OverlapMetric::BevIou: return bev_iou(a, b);
    case OverlapMetric::CentroidDistance: return centroid_distance(a, b);
  }
  throw std::invalid_argument("unknown association metric id");
}

}  // namespace dropsim
