#include "omniloc/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace omniloc {

Direction::Direction(double x, double y, double z) : Direction(Vec3(x, y, z)) {}

Direction::Direction(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("Direction: zero or non-finite vector");
  }
  v_ = v / n;
}

namespace {

Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) {
    u.col(2) = -u.col(2);
  }
  return u * v.transpose();
}

}  // namespace

Rotation::Rotation(const Mat3& m) {
  if (!m.allFinite()) {
    throw std::invalid_argument("Rotation: non-finite matrix");
  }
  m_ = project_to_so3(m);
}

Rotation Rotation::from_quaternion(const Eigen::Quaterniond& q) {
  if (!(q.norm() > 0.0)) {
    throw std::invalid_argument("Rotation: zero quaternion");
  }
  return Rotation(q.normalized().toRotationMatrix());
}

Rotation Rotation::axis_angle(const Vec3& axis, double angle) {
  return Rotation(Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix());
}

Eigen::Quaterniond Rotation::quaternion() const {
  Eigen::Quaterniond q(m_);
  q.normalize();
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  }
  return q;
}

Rotation Rotation::inverse() const { return Rotation(m_.transpose(), Trusted{}); }

Rotation Rotation::operator*(const Rotation& o) const { return Rotation(m_ * o.m_, Trusted{}); }

double Rotation::angle_between(const Rotation& a, const Rotation& b) {
  const Eigen::Quaterniond rel(Mat3(a.m_.transpose() * b.m_));
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

double angular_distance(const Direction& a, const Direction& b) {
  // atan2 form keeps full precision near 0 and pi where acos(dot) does not.
  const double s = a.vec().cross(b.vec()).norm();
  const double c = a.vec().dot(b.vec());
  return std::atan2(s, c);
}

double wrap_pi(double angle) {
  double r = std::fmod(angle + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

GeoCoord dir_to_geo(const Direction& d) {
  const double horiz = std::hypot(d.x(), d.y());
  GeoCoord g;
  g.lat = std::atan2(d.z(), horiz);
  if (horiz == 0.0) {
    g.lon = 0.0;
  } else {
    g.lon = std::atan2(d.y(), d.x());
    if (g.lon <= -kPi) g.lon = kPi;
  }
  return g;
}

Direction geo_to_dir(const GeoCoord& g) {
  const double cl = std::cos(g.lat);
  return Direction(cl * std::cos(g.lon), cl * std::sin(g.lon), std::sin(g.lat));
}

GeoCoord inverse_stereographic(const StereoPoint& p) {
  if (!(p.radius > 0.0)) {
    throw std::invalid_argument("inverse_stereographic: radius must be positive");
  }
  const double rho = std::hypot(p.x, p.y);
  if (rho == 0.0) {
    return GeoCoord{0.0, 0.0};
  }
  const double c = 2.0 * std::atan(rho / (2.0 * p.radius));
  const double sc = std::sin(c);
  GeoCoord g;
  g.lon = std::atan2(p.x * sc, rho * std::cos(c));
  g.lat = std::asin(std::clamp(p.y * sc / rho, -1.0, 1.0));
  if (g.lon <= -kPi) g.lon = kPi;
  return g;
}

Rotation rotation_aligning(const Direction& center) {
  const Vec3 c = center.vec();
  const Vec3 north(0.0, 0.0, 1.0);
  const GeoCoord g = dir_to_geo(center);
  Vec3 up;
  if (std::abs(g.lat) > 89.9 * kDegToRad) {
    // Tangent of the prime meridian at the center's latitude.
    up = Vec3(-std::sin(g.lat), 0.0, std::cos(g.lat));
  } else {
    up = north;
  }
  up = (up - up.dot(c) * c).normalized();
  const Vec3 left = up.cross(c);
  Mat3 m;
  m.col(0) = c;
  m.col(1) = left;
  m.col(2) = up;
  return Rotation(m);
}

std::vector<Direction> fibonacci_sphere(std::size_t count) {
  if (count == 0) {
    throw std::invalid_argument("fibonacci_sphere: count must be >= 1");
  }
  std::vector<Direction> out;
  out.reserve(count);
  if (count == 1) {
    out.emplace_back(0.0, 0.0, 1.0);
    return out;
  }
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  const double n = static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return out;
}

}  // namespace omniloc
