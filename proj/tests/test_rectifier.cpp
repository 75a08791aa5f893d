#include "omniloc/partition.hpp"
#include "omniloc/random.hpp"
#include "omniloc/rectifier.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>

using namespace omniloc;

namespace {

// Equirectangular frame whose pixel centers take colors from a function of direction.
EquirectImage paint(int h, const std::function<Rgb(const Direction&)>& color) {
  Image img(2 * h, h);
  EquirectImage probe(Image(2 * h, h));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < 2 * h; ++c) img.set(c, r, color(geo_to_dir(probe.pixel_center_geo(c, r))));
  }
  return EquirectImage(std::move(img));
}

// Smooth, non-symmetric test scene.
Rgb smooth(const Direction& d) {
  auto channel = [](double v) { return static_cast<std::uint8_t>(std::lround(127.5 + 127.5 * v)); };
  return {channel(0.8 * d.x()), channel(0.6 * d.y() + 0.3 * d.z()), channel(std::sin(2.0 * d.z() + d.x()))};
}

}  // namespace

TEST(Intrinsics, FollowTheTileModel) {
  const auto k = PinholeIntrinsics::for_tile(90.0, 512);
  EXPECT_NEAR(k.focal, 256.0, 1e-9);
  EXPECT_DOUBLE_EQ(k.cx, 255.5);
  EXPECT_DOUBLE_EQ(k.cy, 255.5);
}

TEST(Rectify, ConstantSourceGivesConstantTile) {
  const EquirectImage src(Image(64, 32, Rgb{12, 200, 77}));
  Rng rng(1);
  for (int i = 0; i < 5; ++i) {
    const auto view = rectify_partition(src, rng.direction(), rng.uniform(20.0, 170.0), 48);
    for (int v = 0; v < 48; ++v) {
      for (int u = 0; u < 48; ++u) ASSERT_EQ(view.image.at(u, v), (Rgb{12, 200, 77}));
    }
  }
}

TEST(Rectify, CenterPixelSamplesTheCenterDirection) {
  Image img(720, 360, Rgb{0, 0, 0});
  const int col = 123;
  const int row = 97;
  img.set(col, row, Rgb{255, 255, 255});
  const EquirectImage src(std::move(img));
  const Direction center = geo_to_dir(src.pixel_center_geo(col, row));
  for (auto mode : {Interpolation::Nearest, Interpolation::Bilinear}) {
    const auto view = rectify_partition(src, center, 30.0, 17, 0, mode);
    EXPECT_EQ(view.image.at(8, 8), (Rgb{255, 255, 255}));
  }
}

TEST(Rectify, RejectsInvalidArguments) {
  const EquirectImage src(Image(64, 32));
  EXPECT_THROW(rectify_partition(src, Direction(1, 0, 0), 180.0, 64), RectifyError);
  EXPECT_THROW(rectify_partition(src, Direction(1, 0, 0), 0.0, 64), RectifyError);
  EXPECT_THROW(rectify_partition(src, Direction(1, 0, 0), 90.0, 15), RectifyError);
  EXPECT_THROW(EquirectImage(Image(60, 32)), std::invalid_argument);
}

TEST(Rectify, PolarTilesStayInBounds) {
  const EquirectImage src = paint(60, smooth);
  for (const Direction& c : {Direction(0, 0, 1), Direction(0, 0, -1), Direction(1e-7, 0, 1)}) {
    const auto view = rectify_partition(src, c, 150.0, 64);
    EXPECT_EQ(view.side(), 64);
  }
  // A ray straight at the pole reads the top row.
  Image img(80, 40, Rgb{0, 0, 0});
  for (int c = 0; c < 80; ++c) img.set(c, 0, Rgb{9, 9, 9});
  const auto view = rectify_partition(EquirectImage(std::move(img)), Direction(0, 0, 1), 10.0, 17, 0,
                                      Interpolation::Nearest);
  EXPECT_EQ(view.image.at(8, 8), (Rgb{9, 9, 9}));
}

TEST(Rectify, EquivariantUnderRotationAboutNorth) {
  Rng rng(2);
  for (int trial = 0; trial < 4; ++trial) {
    const double angle = rng.uniform(-kPi, kPi);
    const Rotation q = Rotation::axis_angle(Vec3::UnitZ(), angle);
    const Rotation qt = q.inverse();
    const EquirectImage src = paint(240, smooth);
    const EquirectImage rotated = paint(240, [&](const Direction& d) { return smooth(qt * d); });
    Direction center = rng.direction();
    if (std::abs(center.z()) > 0.9) center = Direction(1, 0.3, 0.2);
    const auto a = rectify_partition(src, center, 74.0, 128);
    const auto b = rectify_partition(rotated, q * center, 74.0, 128);
    double diff = 0.0;
    for (int v = 0; v < 128; ++v) {
      for (int u = 0; u < 128; ++u) {
        const Rgb x = a.image.at(u, v);
        const Rgb y = b.image.at(u, v);
        diff += std::abs(x.r - y.r) + std::abs(x.g - y.g) + std::abs(x.b - y.b);
      }
    }
    EXPECT_LT(diff / (128.0 * 128.0 * 3.0), 2.0);
  }
}

TEST(Rectify, EachPixelDependsOnlyOnItsOwnRay) {
  const EquirectImage src = paint(120, smooth);
  const Direction center(0.3, -0.8, 0.4);
  const auto view = rectify_partition(src, center, 74.0, 96);
  const ViewGeometry geom = geometry_of(view);
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const int u = static_cast<int>(rng.next() % 96);
    const int v = static_cast<int>(rng.next() % 96);
    const Rgb alone = sample_equirect(src, dir_to_geo(pixel_to_direction(geom, u, v)), Interpolation::Bilinear);
    ASSERT_EQ(view.image.at(u, v), alone) << u << "," << v;
  }
}

TEST(Rectify, LongitudeSeamIsContinuous) {
  // Left and right halves of the frame differ; a tile straddling lon = pi
  // must blend across the seam rather than clamp.
  Image img(200, 100, Rgb{0, 0, 0});
  for (int r = 0; r < 100; ++r) {
    img.set(0, r, Rgb{200, 200, 200});
    img.set(199, r, Rgb{200, 200, 200});
  }
  const auto view = rectify_partition(EquirectImage(std::move(img)), Direction(-1, 0, 0), 5.0, 33);
  EXPECT_GT(view.image.at(16, 16).r, 150);
}

TEST(DirectionToPixel, AxisAndAntipode) {
  const ViewGeometry geom{Direction(0.2, 0.7, -0.3), 74.0, 512};
  const auto p = direction_to_pixel(geom, geom.center);
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(p->x(), 255.5, 1e-9);
  EXPECT_NEAR(p->y(), 255.5, 1e-9);
  EXPECT_FALSE(direction_to_pixel(geom, -geom.center).has_value());
}

TEST(DirectionToPixel, RoundTripsRandomPixels) {
  Rng rng(4);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const ViewGeometry geom{rng.direction(), rng.uniform(30.0, 150.0), 512};
    const double u = rng.uniform(-0.5, 511.5);
    const double v = rng.uniform(-0.5, 511.5);
    const auto back = direction_to_pixel(geom, pixel_to_direction(geom, u, v));
    ASSERT_TRUE(back.has_value());
    worst = std::max(worst, (*back - Eigen::Vector2d(u, v)).norm());
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(DirectionToPixel, OutsideTheTileIsRejected) {
  const ViewGeometry geom{Direction(1, 0, 0), 60.0, 256};
  // 31 degrees off axis along the image x direction is just outside a 60-degree tile.
  const Direction off = rotation_aligning(geom.center) * geo_to_dir({0.0, 31.0 * kDegToRad});
  EXPECT_FALSE(direction_to_pixel(geom, off).has_value());
  const Direction in = rotation_aligning(geom.center) * geo_to_dir({0.0, 29.0 * kDegToRad});
  EXPECT_TRUE(direction_to_pixel(geom, in).has_value());
}

TEST(RectifyAll, RejectsWholeSphereLayout) {
  PartitionLayout one;
  one.centers = {Direction(1, 0, 0)};
  one.theta_deg = 360.0;
  EXPECT_THROW(rectify_all(EquirectImage(Image(64, 32)), one, 32), RectifyError);
}

TEST(RectifyAll, TwelveViewsCoverTheSphere) {
  const auto layout = solve_layout(12, 1);
  const auto views = rectify_all(paint(32, smooth), layout, 32);
  ASSERT_EQ(views.size(), 12u);
  std::vector<ViewGeometry> geoms;
  for (std::size_t i = 0; i < views.size(); ++i) {
    EXPECT_EQ(views[i].partition_index, static_cast<int>(i));
    EXPECT_EQ(views[i].fov_deg, layout.theta_deg);
    geoms.push_back(geometry_of(views[i]));
  }
  int uncovered = 0;
  for (const Direction& d : fibonacci_sphere(100000)) {
    bool seen = false;
    for (const auto& g : geoms) {
      if (direction_to_pixel(g, d)) {
        seen = true;
        break;
      }
    }
    uncovered += seen ? 0 : 1;
  }
  EXPECT_EQ(uncovered, 0);
}

TEST(RectifyAll, OverlapIsSeenByTwoViews) {
  const auto layout = solve_layout(12, 1);
  // Midpoint of the two closest centers.
  double best = 10.0;
  Direction mid;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    for (std::size_t j = i + 1; j < layout.size(); ++j) {
      const double a = angular_distance(layout.centers[i], layout.centers[j]);
      if (a < best) {
        best = a;
        mid = Direction(layout.centers[i].vec() + layout.centers[j].vec());
      }
    }
  }
  // A marker-sized patch: every corner must be inside both tiles.
  const Vec3 e1 = mid.vec().unitOrthogonal();
  const Vec3 e2 = mid.vec().cross(e1);
  int views_with_patch = 0;
  for (const Direction& c : layout.centers) {
    const ViewGeometry g{c, layout.theta_deg, 256};
    bool all = true;
    for (int s : {-1, 1}) {
      for (int t : {-1, 1}) all = all && direction_to_pixel(g, Direction(mid.vec() + 0.05 * (s * e1 + t * e2)));
    }
    views_with_patch += all ? 1 : 0;
  }
  EXPECT_GE(views_with_patch, 2);
}

TEST(ImageIo, PpmIsByteExactAndPngRoundTrips) {
  Image img(37, 21);
  Rng rng(5);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng.next());
  const auto dir = std::filesystem::temp_directory_path();
  const auto ppm = (dir / "omniloc_io_test.ppm").string();
  const auto png = (dir / "omniloc_io_test.png").string();
  write_image(img, ppm);
  EXPECT_EQ(read_image(ppm), img);
  const auto size = std::filesystem::file_size(ppm);
  EXPECT_EQ(size, std::string("P6\n37 21\n255\n").size() + 37u * 21u * 3u);
  write_image(img, png);
  EXPECT_EQ(read_image(png), img);
  std::filesystem::remove(ppm);
  std::filesystem::remove(png);
  EXPECT_THROW(read_image((dir / "omniloc_missing.png").string()), std::runtime_error);
}
