#pragma once

// Spherical primitives shared by every stage of the pipeline.
//
// Axis convention (used everywhere in the library):
//   canonical optical axis = +x, north = +z, lat measured from the equator,
//   lon measured counter-clockwise from +x when seen from +z.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <numbers>
#include <vector>

namespace omniloc {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Unit vector on S^2. Always normalized on construction.
class Direction {
public:
  Direction() : v_(1.0, 0.0, 0.0) {}
  Direction(double x, double y, double z);
  explicit Direction(const Vec3& v);

  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  const Vec3& vec() const { return v_; }

  Direction operator-() const { return Direction(-v_); }
  double dot(const Direction& o) const { return v_.dot(o.v_); }

  friend bool operator==(const Direction& a, const Direction& b) { return a.v_ == b.v_; }

private:
  Vec3 v_;
};

/// Geographic coordinate in radians; lat in [-pi/2, pi/2], lon in (-pi, pi].
struct GeoCoord {
  double lat = 0.0;
  double lon = 0.0;
};

/// Proper rotation (orthonormal, det +1).
class Rotation {
public:
  Rotation() : m_(Mat3::Identity()) {}
  /// Projects `m` onto SO(3) (polar decomposition) so the invariants hold.
  explicit Rotation(const Mat3& m);
  static Rotation identity() { return Rotation(); }
  static Rotation from_quaternion(const Eigen::Quaterniond& q);
  static Rotation axis_angle(const Vec3& axis, double angle);

  const Mat3& matrix() const { return m_; }
  Eigen::Quaterniond quaternion() const;
  Rotation inverse() const;
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Direction operator*(const Direction& d) const { return Direction(m_ * d.vec()); }
  Rotation operator*(const Rotation& o) const;

  /// Geodesic angle between two rotations, radians.
  static double angle_between(const Rotation& a, const Rotation& b);

private:
  struct Trusted {};
  Rotation(const Mat3& m, Trusted) : m_(m) {}
  Mat3 m_;
};

/// Point on the stereographic projection plane of a sphere of radius `radius`.
struct StereoPoint {
  double x = 0.0;
  double y = 0.0;
  double radius = 1.0;
};

double angular_distance(const Direction& a, const Direction& b);

GeoCoord dir_to_geo(const Direction& d);
Direction geo_to_dir(const GeoCoord& g);

/// Inverse stereographic projection onto (lat, lon). Throws for radius <= 0.
GeoCoord inverse_stereographic(const StereoPoint& p);

/// Rotation taking the canonical optical axis (+x) to `center`, rolled so the
/// image "up" is the projection of north. Within 0.1 deg of a pole the up
/// vector falls back to the prime-meridian tangent.
Rotation rotation_aligning(const Direction& center);

/// Deterministic near-uniform spherical Fibonacci lattice.
std::vector<Direction> fibonacci_sphere(std::size_t count);

/// Wrap an angle into (-pi, pi].
double wrap_pi(double angle);

}  // namespace omniloc
