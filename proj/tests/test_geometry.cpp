#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dropsim/geometry.hpp"

using namespace dropsim;

namespace {

Calibration pinhole_calibration() {
  Calibration calib;
  calib.projection << 720.0, 0.0, 620.0, 0.0, 0.0, 720.0, 180.0, 0.0, 0.0, 0.0, 1.0, 0.0;
  calib.image_width = 1242;
  calib.image_height = 375;
  return calib;
}

Box3D make_box(double x, double y, double z, double h, double w, double l, double yaw = 0.0) {
  Box3D box;
  box.center = Eigen::Vector3d(x, y, z);
  box.height = h;
  box.width = w;
  box.length = l;
  box.yaw = yaw;
  return box;
}

Box2D random_box2d(std::mt19937& gen) {
  std::uniform_real_distribution<double> pos(0.0, 500.0);
  std::uniform_real_distribution<double> size(1.0, 200.0);
  const double x = pos(gen), y = pos(gen);
  return Box2D{x, y, x + size(gen), y + size(gen)};
}

/// Axis-aligned rectangle IoU on the (x, z) plane; independent oracle for
/// the yaw = 0 BEV case.
double axis_aligned_bev_iou(const Box3D& a, const Box3D& b) {
  const double ax0 = a.center.x() - a.length / 2.0, ax1 = a.center.x() + a.length / 2.0;
  const double az0 = a.center.z() - a.width / 2.0, az1 = a.center.z() + a.width / 2.0;
  const double bx0 = b.center.x() - b.length / 2.0, bx1 = b.center.x() + b.length / 2.0;
  const double bz0 = b.center.z() - b.width / 2.0, bz1 = b.center.z() + b.width / 2.0;
  const double ix = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double iz = std::max(0.0, std::min(az1, bz1) - std::max(az0, bz0));
  const double inter = ix * iz;
  const double uni = (ax1 - ax0) * (az1 - az0) + (bx1 - bx0) * (bz1 - bz0) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace

TEST_CASE("wrap_angle lands in (-pi, pi]") {
  CHECK(wrap_angle(kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(-kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(3.0 * kPi / 2.0) == Catch::Approx(-kPi / 2.0));
  CHECK(wrap_angle(0.0) == 0.0);
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> angle(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const double w = wrap_angle(angle(gen));
    CHECK(w > -kPi);
    CHECK(w <= kPi);
  }
}

TEST_CASE("iou_2d basics") {
  const Box2D a{0.0, 0.0, 2.0, 2.0};
  CHECK(iou_2d(a, a) == 1.0);
  CHECK(iou_2d(Box2D{0, 0, 1, 1}, Box2D{2, 2, 3, 3}) == 0.0);
  CHECK(iou_2d(Box2D{0, 0, 2, 2}, Box2D{1, 0, 3, 2}) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("iou_2d properties over random boxes") {
  std::mt19937 gen(42);
  for (int i = 0; i < 500; ++i) {
    const Box2D a = random_box2d(gen);
    const Box2D b = random_box2d(gen);
    const double ab = iou_2d(a, b);
    CHECK(ab == iou_2d(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(iou_2d(a, a) == 1.0);

    // Translation invariance.
    const double dx = 13.25, dy = -7.5;
    const Box2D at{a.x_min + dx, a.y_min + dy, a.x_max + dx, a.y_max + dy};
    const Box2D bt{b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy};
    CHECK(iou_2d(at, bt) == Catch::Approx(ab).margin(1e-12));
  }
}

TEST_CASE("project_box3d matches the hand pinhole projection") {
  const Calibration calib = pinhole_calibration();
  const Box3D cube = make_box(0.0, 0.0, 10.0, 1.0, 1.0, 1.0);
  const auto hull = project_box3d(cube, calib);
  REQUIRE(hull.has_value());
  // Corners at z = 9.5 dominate the hull.
  CHECK(hull->x_min == Catch::Approx(620.0 - 720.0 * 0.5 / 9.5).epsilon(1e-9));
  CHECK(hull->x_max == Catch::Approx(620.0 + 720.0 * 0.5 / 9.5).epsilon(1e-9));
  CHECK(hull->y_min == Catch::Approx(180.0 - 720.0 * 0.5 / 9.5).epsilon(1e-9));
  CHECK(hull->y_max == Catch::Approx(180.0 + 720.0 * 0.5 / 9.5).epsilon(1e-9));
}

TEST_CASE("project_box3d behind-camera and degenerate cases") {
  const Calibration calib = pinhole_calibration();
  CHECK_FALSE(project_box3d(make_box(0.0, 0.0, -5.0, 1.0, 1.0, 1.0), calib).has_value());

  const auto point = project_box3d(make_box(0.0, 0.0, 10.0, 1e-12, 1e-12, 1e-12), calib);
  REQUIRE(point.has_value());
  CHECK(point->x_min == Catch::Approx(620.0));
  CHECK(point->x_max == Catch::Approx(620.0));
  CHECK(point->y_min == Catch::Approx(180.0));
  CHECK(point->y_max == Catch::Approx(180.0));

  // Entirely outside the image (far left) yields none even though the
  // depth is positive.
  CHECK_FALSE(project_box3d(make_box(-50.0, 0.0, 10.0, 1.0, 1.0, 1.0), calib).has_value());
}

TEST_CASE("projected hull contains the projected center") {
  const Calibration calib = pinhole_calibration();
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> x(-8.0, 8.0), y(-2.0, 2.0), z(5.0, 60.0);
  std::uniform_real_distribution<double> dim(0.3, 4.0), yaw(-kPi, kPi);
  for (int i = 0; i < 300; ++i) {
    const Box3D box = make_box(x(gen), y(gen), z(gen), dim(gen), dim(gen), dim(gen), yaw(gen));
    const auto hull = project_box3d(box, calib);
    if (!hull) continue;
    const Eigen::Vector3d p = calib.projection * box.center.homogeneous();
    const double u = p.x() / p.z();
    const double v = p.y() / p.z();
    if (u < 0.0 || u > calib.image_width || v < 0.0 || v > calib.image_height) continue;
    CHECK(u >= hull->x_min - 1e-9);
    CHECK(u <= hull->x_max + 1e-9);
    CHECK(v >= hull->y_min - 1e-9);
    CHECK(v <= hull->y_max + 1e-9);
  }
}

TEST_CASE("overlap_3d examples") {
  const Box3D a = make_box(0.0, 0.0, 10.0, 1.5, 2.0, 2.0);
  CHECK(overlap_3d(a, a, OverlapMetric::BevIou) == Catch::Approx(1.0));

  const Box3D b = make_box(3.0, 0.0, 10.0, 1.5, 2.0, 2.0);
  CHECK(overlap_3d(a, b, OverlapMetric::CentroidDistance) == Catch::Approx(3.0));

  // 2x2 footprints offset by 1 m in x: intersection 2, union 6.
  const Box3D c = make_box(1.0, 0.0, 10.0, 1.5, 2.0, 2.0);
  CHECK(overlap_3d(a, c, OverlapMetric::BevIou) == Catch::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(parse_overlap_metric("volume-iou"), std::invalid_argument);
  CHECK(parse_overlap_metric("bev-iou") == OverlapMetric::BevIou);
  CHECK(parse_overlap_metric("centroid-distance") == OverlapMetric::CentroidDistance);
}

TEST_CASE("bev_iou at yaw 0 equals the axis-aligned oracle") {
  std::mt19937 gen(21);
  std::uniform_real_distribution<double> pos(-10.0, 10.0), dim(0.5, 5.0);
  for (int i = 0; i < 500; ++i) {
    const Box3D a = make_box(pos(gen), 0.0, pos(gen) + 20.0, 1.5, dim(gen), dim(gen));
    const Box3D b = make_box(pos(gen), 0.0, pos(gen) + 20.0, 1.5, dim(gen), dim(gen));
    CHECK(bev_iou(a, b) == Catch::Approx(axis_aligned_bev_iou(a, b)).margin(1e-9));
  }
}

TEST_CASE("bev_iou and centroid distance are translation invariant") {
  std::mt19937 gen(33);
  std::uniform_real_distribution<double> pos(-10.0, 10.0), dim(0.5, 5.0), yaw(-kPi, kPi);
  for (int i = 0; i < 300; ++i) {
    const Box3D a = make_box(pos(gen), pos(gen), pos(gen) + 20.0, 1.5, dim(gen), dim(gen), yaw(gen));
    const Box3D b = make_box(pos(gen), pos(gen), pos(gen) + 20.0, 1.5, dim(gen), dim(gen), yaw(gen));
    Box3D at = a, bt = b;
    const Eigen::Vector3d offset(5.5, -2.0, 11.0);
    at.center += offset;
    bt.center += offset;
    CHECK(bev_iou(at, bt) == Catch::Approx(bev_iou(a, b)).margin(1e-9));
    CHECK(centroid_distance(at, bt) == Catch::Approx(centroid_distance(a, b)).margin(1e-9));
  }
}

TEST_CASE("bev_iou with rotation: quarter turn of a square is symmetric") {
  const Box3D a = make_box(0.0, 0.0, 10.0, 1.5, 2.0, 2.0);
  Box3D b = a;
  b.yaw = kPi / 2.0;
  CHECK(bev_iou(a, b) == Catch::Approx(1.0).margin(1e-9));
  b.yaw = kPi / 4.0;
  // Square rotated 45 degrees inside itself: intersection is the regular
  // octagon with area 8*(sqrt(2)-1), union 2*4 - inter.
  const double inter = 8.0 * (std::sqrt(2.0) - 1.0);
  CHECK(bev_iou(a, b) == Catch::Approx(inter / (8.0 - inter)).margin(1e-9));
}
