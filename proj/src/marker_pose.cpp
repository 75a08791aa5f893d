#include "omniloc/fiducial.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace omniloc {

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.inverse();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::operator*(const Pose& o) const {
  Pose out;
  out.rotation = rotation * o.rotation;
  out.translation = rotation * o.translation + translation;
  return out;
}

std::array<Vec3, 4> marker_corners_3d(double side_length) {
  const double h = side_length / 2.0;
  return {Vec3(-h, -h, 0.0), Vec3(-h, h, 0.0), Vec3(h, h, 0.0), Vec3(h, -h, 0.0)};
}

std::array<Eigen::Vector2d, 4> project_corners(const Pose& pose, const PinholeIntrinsics& k,
                                               double side_length) {
  std::array<Eigen::Vector2d, 4> out;
  const auto obj = marker_corners_3d(side_length);
  for (int i = 0; i < 4; ++i) {
    const Vec3 p = pose.apply(obj[i]);
    out[i] = Eigen::Vector2d(k.focal * p.x() / p.z() + k.cx, k.focal * p.y() / p.z() + k.cy);
  }
  return out;
}

double reprojection_rms(const Pose& pose, const std::array<Eigen::Vector2d, 4>& corners,
                        const PinholeIntrinsics& k, double side_length) {
  const auto proj = project_corners(pose, k, side_length);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += (proj[i] - corners[i]).squaredNorm();
  return std::sqrt(sum / 4.0);
}

namespace {

void refine_pose(Pose& pose, const std::array<Eigen::Vector2d, 4>& corners,
                 const PinholeIntrinsics& k, double side_length, int iterations = 50) {
  // Levenberg-Marquardt on the 8 corner residuals; left-multiplied rotation update.
  auto residuals = [&](const Pose& p) {
    Eigen::Matrix<double, 8, 1> r;
    const auto proj = project_corners(p, k, side_length);
    for (int i = 0; i < 4; ++i) r.segment<2>(2 * i) = proj[i] - corners[i];
    return r;
  };
  auto perturb = [](const Pose& p, const Eigen::Matrix<double, 6, 1>& d) {
    Pose q = p;
    if (d.head<3>().norm() > 0.0) {
      q.rotation = Rotation::axis_angle(d.head<3>(), d.head<3>().norm()) * p.rotation;
    }
    q.translation = p.translation + d.tail<3>();
    return q;
  };
  auto r0 = residuals(pose);
  double cost = r0.squaredNorm();
  double lambda = -1.0;
  for (int it = 0; it < iterations && cost > 0.0; ++it) {
    Eigen::Matrix<double, 8, 6> jac;
    for (int j = 0; j < 6; ++j) {
      Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
      const double h = j < 3 ? 1e-7 : 1e-7 * std::max(1.0, pose.translation.norm());
      d[j] = h;
      jac.col(j) = (residuals(perturb(pose, d)) - r0) / h;
    }
    const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> jtr = jac.transpose() * r0;
    if (lambda < 0.0) lambda = 1e-3 * jtj.diagonal().maxCoeff();
    bool improved = false;
    while (lambda < 1e12) {
      Eigen::Matrix<double, 6, 6> damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Matrix<double, 6, 1> step = -damped.ldlt().solve(jtr);
      if (!step.allFinite()) break;
      const Pose next = perturb(pose, step);
      const auto r1 = residuals(next);
      if (next.translation.z() > 0.0 && r1.squaredNorm() < cost) {
        const double gain = cost - r1.squaredNorm();
        pose = next;
        r0 = r1;
        cost = r1.squaredNorm();
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = gain > 1e-14 * std::max(1.0, cost);
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
}

}  // namespace

Pose estimate_marker_pose(const std::array<Eigen::Vector2d, 4>& corners, const PinholeIntrinsics& k,
                          double side_length, bool refine) {
  if (!(side_length > 0.0) || !(k.focal > 0.0)) {
    throw PoseError("estimate_marker_pose: side length and focal must be positive");
  }
  double scale = 0.0;
  for (int i = 0; i < 4; ++i) scale = std::max(scale, (corners[(i + 1) % 4] - corners[i]).norm());
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector2d a = corners[(i + 1) % 4] - corners[i];
    const Eigen::Vector2d b = corners[(i + 2) % 4] - corners[i];
    if (!(std::abs(a.x() * b.y() - a.y() * b.x()) > 1e-6 * scale * scale)) {
      throw PoseError("estimate_marker_pose: degenerate homography (collinear corners)");
    }
  }

  // Unit-square object coordinates keep the DLT well conditioned.
  const std::array<Eigen::Vector2d, 4> obj = {Eigen::Vector2d(-0.5, -0.5), Eigen::Vector2d(-0.5, 0.5),
                                              Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.5, -0.5)};
  Eigen::Matrix<double, 8, 9> a;
  for (int i = 0; i < 4; ++i) {
    const double x = (corners[i].x() - k.cx) / k.focal;
    const double y = (corners[i].y() - k.cy) / k.focal;
    const double bx = obj[i].x();
    const double by = obj[i].y();
    a.row(2 * i) << bx, by, 1.0, 0.0, 0.0, 0.0, -x * bx, -x * by, -x;
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, bx, by, 1.0, -y * bx, -y * by, -y;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hm;
  hm << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];

  double mu = (hm.col(0).norm() + hm.col(1).norm()) / 2.0;
  if (!(mu > 0.0) || !hm.allFinite()) {
    throw PoseError("estimate_marker_pose: degenerate homography");
  }
  if (hm(2, 2) < 0.0) mu = -mu;  // marker must lie in front of the camera
  const Vec3 r1 = hm.col(0) / mu;
  const Vec3 r2 = hm.col(1) / mu;
  Mat3 r;
  r.col(0) = r1;
  r.col(1) = r2;
  r.col(2) = r1.cross(r2);

  Pose pose;
  pose.rotation = Rotation(r);
  pose.translation = hm.col(2) / mu * side_length;

  // A noisy planar square admits a second pose with the normal mirrored about
  // the line of sight; keep whichever reprojects better.
  const Vec3 normal = pose.rotation.matrix().col(2);
  const Vec3 sight = pose.translation.normalized();
  const Vec3 mirrored = 2.0 * normal.dot(sight) * sight - normal;
  const Vec3 axis = normal.cross(mirrored);
  if (axis.norm() > 1e-9) {
    Pose alt = pose;
    alt.rotation = Rotation::axis_angle(axis, std::atan2(axis.norm(), normal.dot(mirrored))) * pose.rotation;
    refine_pose(alt, corners, k, side_length);
    Pose base = pose;
    refine_pose(base, corners, k, side_length);
    if (reprojection_rms(alt, corners, k, side_length) < reprojection_rms(base, corners, k, side_length)) {
      return alt;
    }
    if (refine) return base;
    return pose;
  }
  if (refine) refine_pose(pose, corners, k, side_length);
  return pose;
}

const BodyMarker* BodyModel::find(int id) const {
  for (const auto& m : markers) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

void BodyModel::validate() const {
  if (!(side_length > 0.0)) throw std::invalid_argument("body model: side_length must be positive");
  std::set<int> ids;
  for (const auto& m : markers) {
    if (!ids.insert(m.id).second) {
      throw std::invalid_argument("body model: duplicate marker id " + std::to_string(m.id));
    }
    if (m.id < 0 || m.id >= kMarkerIds) {
      throw std::invalid_argument("body model: marker id out of range " + std::to_string(m.id));
    }
  }
}

BodyModel default_body_model(double side_length, double edge) {
  BodyModel model;
  model.name = "rhombicuboctahedron-9";
  model.side_length = side_length;
  const double inradius = edge * (1.0 + std::sqrt(2.0)) / 2.0;
  auto add_face = [&](int id, const Vec3& normal, const Vec3& down) {
    const Vec3 z = -normal;
    const Vec3 y = down;
    const Vec3 x = y.cross(z);
    Mat3 m;
    m.col(0) = x;
    m.col(1) = y;
    m.col(2) = z;
    BodyMarker bm;
    bm.id = id;
    bm.marker_to_body.rotation = Rotation(m);
    bm.marker_to_body.translation = normal * inradius;
    model.markers.push_back(bm);
  };
  for (int k = 0; k < 8; ++k) {
    const double a = k * kPi / 4.0;
    add_face(k, Vec3(std::cos(a), std::sin(a), 0.0), Vec3(0.0, 0.0, -1.0));
  }
  add_face(8, Vec3(0.0, 0.0, 1.0), Vec3(-1.0, 0.0, 0.0));
  return model;
}

std::string body_model_to_json(const BodyModel& model) {
  nlohmann::ordered_json j;
  j["name"] = model.name;
  j["side_length"] = model.side_length;
  j["markers"] = nlohmann::ordered_json::array();
  for (const auto& m : model.markers) {
    const auto q = m.marker_to_body.rotation.quaternion();
    const Vec3& t = m.marker_to_body.translation;
    j["markers"].push_back({{"id", m.id}, {"t", {t.x(), t.y(), t.z()}}, {"q", {q.w(), q.x(), q.y(), q.z()}}});
  }
  return j.dump(2) + "\n";
}

BodyModel body_model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  BodyModel model;
  model.name = j.value("name", std::string("body"));
  model.side_length = j.value("side_length", 0.05);
  for (const auto& m : j.at("markers")) {
    BodyMarker bm;
    bm.id = m.at("id").get<int>();
    const auto t = m.at("t").get<std::vector<double>>();
    const auto q = m.at("q").get<std::vector<double>>();
    if (t.size() != 3 || q.size() != 4) {
      throw std::invalid_argument("body model: 't' needs 3 and 'q' needs 4 numbers");
    }
    bm.marker_to_body.translation = Vec3(t[0], t[1], t[2]);
    bm.marker_to_body.rotation = Rotation::from_quaternion(Eigen::Quaterniond(q[0], q[1], q[2], q[3]));
    model.markers.push_back(bm);
  }
  model.validate();
  return model;
}

BodyModel load_body_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read body model: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return body_model_from_json(ss.str());
}

void save_body_model(const BodyModel& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write body model: " + path);
  f << body_model_to_json(model);
}

Eigen::Quaterniond average_quaternions(const std::vector<Eigen::Quaterniond>& qs) {
  if (qs.empty()) throw std::invalid_argument("average_quaternions: empty input");
  Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
  for (const auto& q : qs) {
    const Eigen::Vector4d v = q.normalized().coeffs();
    acc += v * v.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(acc);
  Eigen::Vector4d v = eig.eigenvectors().col(3);
  // coeffs() order is (x, y, z, w).
  if (v[3] < 0.0) v = -v;
  Eigen::Quaterniond out(v[3], v[0], v[1], v[2]);
  out.normalize();
  return out;
}

Pose body_hypothesis(const Detection& det, const BodyMarker& marker, const Rotation& camera_to_rig) {
  Pose cam_to_rig;
  cam_to_rig.rotation = camera_to_rig;
  return cam_to_rig * det.pose * marker.marker_to_body.inverse();
}

BodyPoseEstimate fuse_body_pose(const std::vector<Detection>& detections, const BodyModel& model,
                                const std::vector<Rotation>& camera_to_rig) {
  if (camera_to_rig.size() != detections.size()) {
    throw std::invalid_argument("fuse_body_pose: one view orientation per detection required");
  }
  BodyPoseEstimate est;
  std::vector<Eigen::Quaterniond> qs;
  Vec3 sum = Vec3::Zero();
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const BodyMarker* m = model.find(detections[i].marker_id);
    if (!m) continue;
    const Pose h = body_hypothesis(detections[i], *m, camera_to_rig[i]);
    qs.push_back(h.rotation.quaternion());
    sum += h.translation;
  }
  if (qs.empty()) return est;
  est.valid = true;
  est.marker_count = static_cast<int>(qs.size());
  est.pose.translation = sum / static_cast<double>(qs.size());
  est.pose.rotation = qs.size() == 1 ? Rotation::from_quaternion(qs.front())
                                     : Rotation::from_quaternion(average_quaternions(qs));
  return est;
}

}  // namespace omniloc
