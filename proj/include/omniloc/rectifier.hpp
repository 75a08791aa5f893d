#pragma once

// Equirectangular frame -> square rectilinear (pinhole) tiles, one per cap.
//
// Equirectangular mapping: column j covers lon in [-pi + j*2pi/w, -pi + (j+1)*2pi/w),
// row i covers lat from +pi/2 (top) downward in steps of pi/h. Pixel centers
// sit at the middle of those cells.
//
// Tile camera frame: x right, y down, z along the optical axis. The tile
// orientation is rotation_aligning(center); at identity the optical axis is
// world +x, image right is world -y and image down is world -z.

#include "omniloc/geometry.hpp"
#include "omniloc/image.hpp"
#include "omniloc/partition.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace omniloc {

/// Full-sphere equirectangular image; width must equal 2 * height.
class EquirectImage {
public:
  EquirectImage() = default;
  explicit EquirectImage(Image pixels);

  const Image& pixels() const { return pixels_; }
  int width() const { return pixels_.width(); }
  int height() const { return pixels_.height(); }

  /// Continuous pixel coordinates (0.5 = center of the first pixel is at 0.0).
  void geo_to_pixel(const GeoCoord& g, double& col, double& row) const;
  GeoCoord pixel_center_geo(int col, int row) const;

private:
  Image pixels_;
};

enum class Interpolation { Bilinear, Nearest };

/// Samples `src` at `g`: longitude wraps, latitude clamps to the pole rows.
Rgb sample_equirect(const EquirectImage& src, const GeoCoord& g, Interpolation mode);

struct PinholeIntrinsics {
  double focal = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  static PinholeIntrinsics for_tile(double fov_deg, int side);
};

struct RectifiedView {
  Image image;
  double fov_deg = 0.0;
  Rotation orientation;
  Direction center;
  int partition_index = 0;

  int side() const { return image.width(); }
  PinholeIntrinsics intrinsics() const { return PinholeIntrinsics::for_tile(fov_deg, side()); }
  /// Tile camera frame (x right, y down, z forward) to rig frame.
  Rotation camera_to_rig() const;
};

/// Fixed change of basis from the tile camera frame to the canonical rig frame.
const Mat3& camera_basis();

class RectifyError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Geometry of a tile without pixels; what direction_to_pixel and the ray
/// construction need.
struct ViewGeometry {
  Direction center;
  double fov_deg = 0.0;
  int side = 0;

  Rotation camera_to_rig() const;
  PinholeIntrinsics intrinsics() const { return PinholeIntrinsics::for_tile(fov_deg, side); }
};

ViewGeometry geometry_of(const RectifiedView& view);

/// Rig-frame ray through tile pixel (u, v).
Direction pixel_to_direction(const ViewGeometry& view, double u, double v);

/// Projects `d` into the tile; nullopt when d is behind the tile plane or
/// lands outside [-0.5, side - 0.5]^2.
std::optional<Eigen::Vector2d> direction_to_pixel(const ViewGeometry& view, const Direction& d);
std::optional<Eigen::Vector2d> direction_to_pixel(const RectifiedView& view, const Direction& d);

/// Throws RectifyError for fov outside (0, 180), side < 16 or an invalid source.
RectifiedView rectify_partition(const EquirectImage& src, const Direction& center, double fov_deg,
                                int side, int partition_index = 0,
                                Interpolation mode = Interpolation::Bilinear);

/// One view per layout center, fov = layout theta, ordered by partition index.
std::vector<RectifiedView> rectify_all(const EquirectImage& src, const PartitionLayout& layout,
                                       int side, Interpolation mode = Interpolation::Bilinear);

}  // namespace omniloc
