#include "omniloc/rectifier.hpp"

#include "omniloc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace omniloc {

EquirectImage::EquirectImage(Image pixels) : pixels_(std::move(pixels)) {
  if (pixels_.height() < 2 || pixels_.width() != 2 * pixels_.height()) {
    throw std::invalid_argument("equirectangular image must satisfy width == 2 * height (got " +
                                std::to_string(pixels_.width()) + "x" +
                                std::to_string(pixels_.height()) + ")");
  }
}

void EquirectImage::geo_to_pixel(const GeoCoord& g, double& col, double& row) const {
  col = (g.lon + kPi) / (2.0 * kPi) * width() - 0.5;
  row = (kPi / 2.0 - g.lat) / kPi * height() - 0.5;
}

GeoCoord EquirectImage::pixel_center_geo(int col, int row) const {
  GeoCoord g;
  g.lon = -kPi + (col + 0.5) * 2.0 * kPi / width();
  g.lat = kPi / 2.0 - (row + 0.5) * kPi / height();
  return g;
}

Rgb sample_equirect(const EquirectImage& src, const GeoCoord& g, Interpolation mode) {
  const int w = src.width();
  const int h = src.height();
  double col, row;
  src.geo_to_pixel(g, col, row);
  const Image& img = src.pixels();
  auto wrap = [w](long c) { return static_cast<int>(((c % w) + w) % w); };

  if (mode == Interpolation::Nearest) {
    const int x = wrap(std::lround(std::floor(col + 0.5)));
    const int y = std::clamp(static_cast<int>(std::floor(row + 0.5)), 0, h - 1);
    return img.at(x, y);
  }

  const double fc = std::floor(col);
  const double fx = col - fc;
  const int x0 = wrap(static_cast<long>(fc));
  const int x1 = wrap(static_cast<long>(fc) + 1);
  row = std::clamp(row, 0.0, static_cast<double>(h - 1));
  const int y0 = std::min(static_cast<int>(row), h - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fy = row - y0;

  const Rgb p00 = img.at(x0, y0), p10 = img.at(x1, y0), p01 = img.at(x0, y1), p11 = img.at(x1, y1);
  auto mix = [&](std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    const double top = a * (1.0 - fx) + b * fx;
    const double bot = c * (1.0 - fx) + d * fx;
    return static_cast<std::uint8_t>(std::clamp(std::lround(top * (1.0 - fy) + bot * fy), 0L, 255L));
  };
  return {mix(p00.r, p10.r, p01.r, p11.r), mix(p00.g, p10.g, p01.g, p11.g),
          mix(p00.b, p10.b, p01.b, p11.b)};
}

PinholeIntrinsics PinholeIntrinsics::for_tile(double fov_deg, int side) {
  PinholeIntrinsics k;
  k.focal = (side / 2.0) / std::tan(fov_deg * kDegToRad / 2.0);
  k.cx = (side - 1) / 2.0;
  k.cy = (side - 1) / 2.0;
  return k;
}

const Mat3& camera_basis() {
  static const Mat3 basis = [] {
    Mat3 b;
    b.col(0) = Vec3(0.0, -1.0, 0.0);  // image right
    b.col(1) = Vec3(0.0, 0.0, -1.0);  // image down
    b.col(2) = Vec3(1.0, 0.0, 0.0);   // optical axis
    return b;
  }();
  return basis;
}

Rotation ViewGeometry::camera_to_rig() const {
  return Rotation(rotation_aligning(center).matrix() * camera_basis());
}

Rotation RectifiedView::camera_to_rig() const {
  return Rotation(orientation.matrix() * camera_basis());
}

ViewGeometry geometry_of(const RectifiedView& view) {
  return ViewGeometry{view.center, view.fov_deg, view.side()};
}

Direction pixel_to_direction(const ViewGeometry& view, double u, double v) {
  const PinholeIntrinsics k = view.intrinsics();
  const Vec3 cam((u - k.cx) / k.focal, (v - k.cy) / k.focal, 1.0);
  return Direction(view.camera_to_rig().matrix() * cam);
}

std::optional<Eigen::Vector2d> direction_to_pixel(const ViewGeometry& view, const Direction& d) {
  const Vec3 cam = view.camera_to_rig().matrix().transpose() * d.vec();
  if (!(cam.z() > 1e-12)) return std::nullopt;
  const PinholeIntrinsics k = view.intrinsics();
  const Eigen::Vector2d px(k.focal * cam.x() / cam.z() + k.cx, k.focal * cam.y() / cam.z() + k.cy);
  const double lo = -0.5;
  const double hi = view.side - 0.5;
  if (px.x() < lo || px.x() > hi || px.y() < lo || px.y() > hi) return std::nullopt;
  return px;
}

std::optional<Eigen::Vector2d> direction_to_pixel(const RectifiedView& view, const Direction& d) {
  return direction_to_pixel(geometry_of(view), d);
}

RectifiedView rectify_partition(const EquirectImage& src, const Direction& center, double fov_deg,
                                int side, int partition_index, Interpolation mode) {
  if (!(fov_deg > 0.0) || fov_deg >= 180.0) {
    throw RectifyError("rectify_partition: fov " + std::to_string(fov_deg) +
                       " deg is outside (0, 180); a rectilinear tile cannot span a hemisphere "
                       "and degenerates into a wide-angle image");
  }
  if (side < 16) {
    throw RectifyError("rectify_partition: tile side must be >= 16 px");
  }
  if (src.pixels().empty()) {
    throw RectifyError("rectify_partition: empty source image");
  }

  RectifiedView view;
  view.fov_deg = fov_deg;
  view.center = center;
  view.orientation = rotation_aligning(center);
  view.partition_index = partition_index;
  view.image = Image(side, side);

  const Mat3 cam_to_rig = view.camera_to_rig().matrix();
  const PinholeIntrinsics k = PinholeIntrinsics::for_tile(fov_deg, side);
  parallel_for(0, side, [&](int v) {
    const double y = (v - k.cy) / k.focal;
    for (int u = 0; u < side; ++u) {
      const double x = (u - k.cx) / k.focal;
      const Direction ray(cam_to_rig * Vec3(x, y, 1.0));
      view.image.set(u, v, sample_equirect(src, dir_to_geo(ray), mode));
    }
  });
  return view;
}

std::vector<RectifiedView> rectify_all(const EquirectImage& src, const PartitionLayout& layout,
                                       int side, Interpolation mode) {
  std::vector<RectifiedView> views;
  views.reserve(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    views.push_back(rectify_partition(src, layout.centers[i], layout.theta_deg, side,
                                      static_cast<int>(i), mode));
  }
  return views;
}

}  // namespace omniloc
