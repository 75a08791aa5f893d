#include "omniloc/sim.hpp"

#include "omniloc/parallel.hpp"
#include "omniloc/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace omniloc {

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Circle: return "circle";
    case TrajectoryKind::Lissajous: return "lissajous";
    case TrajectoryKind::Spline: return "waypoint-spline";
  }
  return "lissajous";
}

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "circle") return TrajectoryKind::Circle;
  if (s == "lissajous") return TrajectoryKind::Lissajous;
  if (s == "waypoint-spline" || s == "spline") return TrajectoryKind::Spline;
  throw std::invalid_argument("unknown trajectory kind '" + s + "'");
}

Vec3 Trajectory::position(double t) const {
  switch (kind) {
    case TrajectoryKind::Circle: {
      const double a = angular_rate * t + phase;
      return center + Vec3(radius_m * std::cos(a), radius_m * std::sin(a), bob_amplitude_m * std::sin(bob_rate * t));
    }
    case TrajectoryKind::Lissajous:
      return center + Vec3(amplitude.x() * std::sin(rates.x() * t + phases.x()),
                           amplitude.y() * std::sin(rates.y() * t + phases.y()),
                           amplitude.z() * std::sin(rates.z() * t + phases.z()));
    case TrajectoryKind::Spline: {
      const int n = static_cast<int>(waypoints.size());
      const double u = t / segment_s;
      const double fl = std::floor(u);
      const double s = u - fl;
      const int i = static_cast<int>(((static_cast<long>(fl) % n) + n) % n);
      const Vec3& p0 = waypoints[(i + n - 1) % n];
      const Vec3& p1 = waypoints[i];
      const Vec3& p2 = waypoints[(i + 1) % n];
      const Vec3& p3 = waypoints[(i + 2) % n];
      const double s2 = s * s;
      const double s3 = s2 * s;
      return 0.5 * ((2.0 * p1) + (p2 - p0) * s + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s2 +
                    (3.0 * p1 - p0 - 3.0 * p2 + p3) * s3);
    }
  }
  return center;
}

Rotation Trajectory::attitude(double t) const {
  return Rotation::axis_angle(Vec3::UnitZ(), yaw0 + yaw_rate * t) *
         Rotation::axis_angle(Vec3::UnitX(), tilt_amplitude * std::sin(tilt_rate * t));
}

Pose Trajectory::pose_at(double t) const {
  Pose p;
  p.rotation = attitude(t);
  p.translation = position(t);
  return p;
}

int Trajectory::frame_count() const {
  if (!(duration_s > 0.0)) return 0;
  return static_cast<int>(std::floor(duration_s * rate_hz + 1e-9));
}

void Trajectory::validate() const {
  if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) throw std::invalid_argument("trajectory: duration must be >= 0");
  if (!(rate_hz > 0.0)) throw std::invalid_argument("trajectory: rate must be positive");
  if (kind == TrajectoryKind::Circle && !(radius_m > 0.0)) throw std::invalid_argument("trajectory: circle radius must be positive");
  if (kind == TrajectoryKind::Spline) {
    if (waypoints.size() < 3) throw std::invalid_argument("trajectory: spline needs at least 3 waypoints");
    if (!(segment_s > 0.0)) throw std::invalid_argument("trajectory: spline segment time must be positive");
  }
  const double step = std::min(0.01, 0.25 / rate_hz);
  for (double t = 0.0; t <= duration_s + 1e-12; t += step) {
    if (position(t).norm() <= 0.05) {
      throw std::invalid_argument("trajectory: body comes within 0.05 m of the camera at t=" + std::to_string(t));
    }
  }
}

namespace {

Rgb background_from(double sin_lat, double cos_lon, double sin_lon) {
  auto ch = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
  return {ch(130.0 + 45.0 * sin_lat + 15.0 * cos_lon), ch(125.0 + 35.0 * sin_lat - 10.0 * cos_lon),
          ch(120.0 + 25.0 * sin_lat + 20.0 * sin_lon)};
}

}  // namespace

Rgb background_color(const GeoCoord& g) { return background_from(std::sin(g.lat), std::cos(g.lon), std::sin(g.lon)); }

std::array<Vec3, 4> face_corners_rig(const Pose& body_to_rig, const BodyMarker& marker, double side_length) {
  const Pose m = body_to_rig * marker.marker_to_body;
  auto corners = marker_corners_3d(side_length);
  for (auto& c : corners) c = m.apply(c);
  return corners;
}

bool face_front_facing(const Pose& body_to_rig, const BodyMarker& marker) {
  const Pose m = body_to_rig * marker.marker_to_body;
  return m.rotation.matrix().col(2).dot(m.translation) > 0.0;
}

namespace {

struct FaceGeometry {
  Pose marker_to_rig;
  Vec3 normal;  // marker +z in the rig frame
  MarkerSpec spec;
  Direction axis;
  double cos_radius = -1.0;  // angular bounding cap
};

}  // namespace

EquirectImage render_frame(const Pose& body_to_rig, const BodyModel& body, const MarkerDictionary& dictionary,
                           const RenderOptions& options) {
  if (options.height < 2 || options.width != 2 * options.height) {
    throw std::invalid_argument("render_frame: width must equal 2 * height");
  }
  if (options.supersample < 1) throw std::invalid_argument("render_frame: supersample must be >= 1");
  const int w = options.width;
  const int h = options.height;
  const double half = marker_face_half_extent(body.side_length);

  std::vector<FaceGeometry> faces;
  for (const auto& m : body.markers) {
    if (!face_front_facing(body_to_rig, m) || m.id >= dictionary.size()) continue;
    FaceGeometry f;
    f.marker_to_rig = body_to_rig * m.marker_to_body;
    f.normal = f.marker_to_rig.rotation.matrix().col(2);
    f.spec = dictionary.spec(m.id, body.side_length);
    const double dist = f.marker_to_rig.translation.norm();
    const double bound = half * std::sqrt(2.0);
    f.axis = Direction(f.marker_to_rig.translation);
    // Pad by two source pixels so edge pixels get supersampled too.
    const double pad = 2.0 * kPi / h;
    f.cos_radius = dist > bound ? std::cos(std::min(kPi, std::asin(bound / dist) + pad)) : -1.0;
    faces.push_back(f);
  }

  Image img(w, h);
  const EquirectImage frame_geom(Image(w, h));
  const int ss = options.supersample;
  // Pixel-center trigonometry, shared by every row.
  std::vector<double> cos_lon(static_cast<std::size_t>(w)), sin_lon(static_cast<std::size_t>(w));
  for (int col = 0; col < w; ++col) {
    const double lon = frame_geom.pixel_center_geo(col, 0).lon;
    cos_lon[static_cast<std::size_t>(col)] = std::cos(lon);
    sin_lon[static_cast<std::size_t>(col)] = std::sin(lon);
  }
  parallel_for(0, h, [&](int row) {
    const double lat = frame_geom.pixel_center_geo(0, row).lat;
    const double sin_lat = std::sin(lat);
    const double cos_lat = std::cos(lat);
    std::vector<const FaceGeometry*> near;
    for (int col = 0; col < w; ++col) {
      const double cl = cos_lon[static_cast<std::size_t>(col)];
      const double sl = sin_lon[static_cast<std::size_t>(col)];
      const Vec3 d(cos_lat * cl, cos_lat * sl, sin_lat);
      near.clear();
      for (const auto& f : faces) {
        if (d.dot(f.axis.vec()) >= f.cos_radius) near.push_back(&f);
      }
      if (near.empty()) {
        img.set(col, row, background_from(sin_lat, cl, sl));
        continue;
      }
      double acc[3] = {0.0, 0.0, 0.0};
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          GeoCoord sg;
          sg.lon = -kPi + (col + (sx + 0.5) / ss) * 2.0 * kPi / w;
          sg.lat = kPi / 2.0 - (row + (sy + 0.5) / ss) * kPi / h;
          const Vec3 ray = geo_to_dir(sg).vec();
          double best_t = std::numeric_limits<double>::infinity();
          int value = -1;
          for (const FaceGeometry* f : near) {
            const double denom = f->normal.dot(ray);
            if (std::abs(denom) < 1e-12) continue;
            const double t = f->normal.dot(f->marker_to_rig.translation) / denom;
            if (!(t > 0.0) || t >= best_t) continue;
            const Vec3 local = f->marker_to_rig.rotation.matrix().transpose() * (t * ray - f->marker_to_rig.translation);
            if (const auto cell = marker_texture(f->spec, local.x(), local.y())) {
              best_t = t;
              value = *cell;
            }
          }
          if (value < 0) {
            const Rgb b = background_color(sg);
            acc[0] += b.r;
            acc[1] += b.g;
            acc[2] += b.b;
          } else {
            const double v = value ? options.white : options.black;
            acc[0] += v;
            acc[1] += v;
            acc[2] += v;
          }
        }
      }
      const double n = ss * ss;
      auto ch = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
      img.set(col, row, Rgb{ch(acc[0] / n), ch(acc[1] / n), ch(acc[2] / n)});
    }
  });
  return EquirectImage(std::move(img));
}

void GeometricDetectorModel::validate() const {
  if (!(detection_probability >= 0.0 && detection_probability <= 1.0)) {
    throw std::invalid_argument("geometric detector: probability must be in [0, 1]");
  }
  if (!(corner_noise_px >= 0.0)) throw std::invalid_argument("geometric detector: corner noise must be >= 0");
  if (!(min_side_px >= 0.0)) throw std::invalid_argument("geometric detector: min side must be >= 0");
  if (!(max_incidence_deg > 0.0 && max_incidence_deg <= 90.0)) {
    throw std::invalid_argument("geometric detector: max incidence must be in (0, 90]");
  }
  if (!(margin_px >= 0.0)) throw std::invalid_argument("geometric detector: margin must be >= 0");
  if (source_height < 0) throw std::invalid_argument("geometric detector: source height must be >= 0");
}

std::vector<Detection> geometric_detect(const Pose& body_to_rig, const ViewGeometry& view,
                                        const GeometricDetectorModel& model, const BodyModel& body, int frame,
                                        int partition) {
  std::vector<Detection> out;
  const Mat3 rig_to_cam = view.camera_to_rig().matrix().transpose();
  const PinholeIntrinsics k = view.intrinsics();
  const double lo = model.margin_px;
  const double hi = view.side - 1.0 - model.margin_px;
  const double cos_max = std::cos(model.max_incidence_deg * kDegToRad);
  const double source_pitch = model.source_height > 0 ? model.source_height / kPi : 0.0;

  for (const auto& marker : body.markers) {
    const Pose m = body_to_rig * marker.marker_to_body;
    const Vec3 z = m.rotation.matrix().col(2);
    const double dist = m.translation.norm();
    if (!(dist > 0.0)) continue;
    // Cosine of the angle between the face normal and the line of sight.
    if (z.dot(m.translation) / dist < cos_max) continue;

    std::array<Eigen::Vector2d, 4> px;
    bool inside = true;
    const auto corners = face_corners_rig(body_to_rig, marker, body.side_length);
    for (int i = 0; i < 4 && inside; ++i) {
      const Vec3 c = rig_to_cam * corners[i];
      if (!(c.z() > 1e-9)) {
        inside = false;
        break;
      }
      px[i] = Eigen::Vector2d(k.focal * c.x() / c.z() + k.cx, k.focal * c.y() / c.z() + k.cy);
      inside = px[i].x() >= lo && px[i].x() <= hi && px[i].y() >= lo && px[i].y() <= hi;
    }
    if (!inside) continue;

    // A tile sampled finer than the source gains no detail: scale pixel
    // measures by the ratio of local tile magnification to source pitch.
    const Vec3 center_cam = rig_to_cam * m.translation;
    const double cos_off = center_cam.z() / center_cam.norm();
    const double tile_pitch = k.focal / std::pow(cos_off, 1.5);
    const double upsample = source_pitch > 0.0 ? std::max(1.0, tile_pitch / source_pitch) : 1.0;
    double side = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) side = std::min(side, (px[(i + 1) % 4] - px[i]).norm());
    if (side / upsample < model.min_side_px) continue;

    Rng rng({model.seed, static_cast<std::uint64_t>(frame), static_cast<std::uint64_t>(partition),
             static_cast<std::uint64_t>(marker.id)});
    // Miss rate falls with apparent area above the size threshold.
    const double ratio = model.min_side_px / (side / upsample);
    const double p_detect = 1.0 - (1.0 - model.detection_probability) * ratio * ratio;
    if (!rng.bernoulli(p_detect)) continue;
    const double sigma = model.corner_noise_px;
    for (auto& p : px) p += Eigen::Vector2d(sigma * rng.normal(), sigma * rng.normal());

    Detection det;
    det.marker_id = marker.id;
    det.corners = px;
    det.partition_index = partition;
    try {
      det.pose = estimate_marker_pose(px, k, body.side_length, model.refine_pose);
    } catch (const PoseError&) {
      continue;
    }
    out.push_back(det);
  }
  return out;
}

std::string to_string(Algorithm a) { return a == Algorithm::Optimized ? "optimized" : "greedy"; }

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "optimized") return Algorithm::Optimized;
  if (s == "greedy") return Algorithm::Greedy;
  throw std::invalid_argument("unknown algorithm '" + s + "' (expected optimized or greedy)");
}

std::string to_string(DetectorKind d) { return d == DetectorKind::Geometric ? "geometric" : "image"; }

DetectorKind detector_kind_from_string(const std::string& s) {
  if (s == "geometric") return DetectorKind::Geometric;
  if (s == "image") return DetectorKind::Image;
  throw std::invalid_argument("unknown detector '" + s + "' (expected geometric or image)");
}

std::string to_string(ErrorReference r) { return r == ErrorReference::Capture ? "capture" : "completion"; }

ErrorReference error_reference_from_string(const std::string& s) {
  if (s == "capture") return ErrorReference::Capture;
  if (s == "completion") return ErrorReference::Completion;
  throw std::invalid_argument("unknown error reference '" + s + "' (expected capture or completion)");
}

void ExperimentConfig::validate(const PartitionLayout& layout) const {
  trajectory.validate();
  body.validate();
  geometric.validate();
  if (layout.size() == 0) throw std::invalid_argument("experiment: empty layout");
  if (!(layout.theta_deg > 0.0 && layout.theta_deg < 180.0)) {
    throw std::invalid_argument("experiment: layout covering angle must be below 180 deg to rectify");
  }
  if (tile_side < 16) throw std::invalid_argument("experiment: tile side must be >= 16");
  if (tracker.budget < 0) throw std::invalid_argument("experiment: budget must be >= 0");
  if (cost.base_ms < 0.0 || cost.per_tile_ms < 0.0 || cost.per_call_ms < 0.0) {
    throw std::invalid_argument("experiment: cost model terms must be >= 0");
  }
  if (detector == DetectorKind::Image && (render.height < 2 || render.width != 2 * render.height)) {
    throw std::invalid_argument("experiment: render size must satisfy width == 2 * height");
  }
  for (const auto& m : body.markers) {
    if (m.id >= kMarkerIds) throw std::invalid_argument("experiment: body marker id outside the dictionary");
  }
}

std::vector<TruthRow> feed_truth(const Trajectory& traj) {
  std::vector<TruthRow> rows;
  const int n = traj.frame_count();
  rows.reserve(n);
  for (int f = 0; f < n; ++f) {
    const double t = traj.time_of(f);
    rows.push_back(TruthRow{f, t, traj.pose_at(t)});
  }
  return rows;
}

double truth_range_at(const std::vector<TruthRow>& truth, double t) {
  if (truth.empty()) throw std::invalid_argument("truth_range_at: empty truth");
  if (t <= truth.front().t) return truth.front().pose.translation.norm();
  if (t >= truth.back().t) return truth.back().pose.translation.norm();
  const auto it = std::upper_bound(truth.begin(), truth.end(), t, [](double v, const TruthRow& r) { return v < r.t; });
  const TruthRow& b = *it;
  const TruthRow& a = *(it - 1);
  const double s = (t - a.t) / (b.t - a.t);
  return (1.0 - s) * a.pose.translation.norm() + s * b.pose.translation.norm();
}

ExperimentSummary summarize(const std::vector<FrameRecord>& records, const std::vector<TruthRow>& truth,
                            double rate_hz, ErrorReference reference, int tiles, int tile_side) {
  ExperimentSummary s;
  s.feed_frames = static_cast<int>(truth.size());
  s.processed_frames = static_cast<int>(records.size());
  double err = 0.0;
  double calls = 0.0;
  for (const auto& r : records) {
    calls += r.detector_calls;
    if (!r.found || r.marker_count == 0) continue;
    ++s.localizations;
    double t = r.frame / rate_hz;
    if (reference == ErrorReference::Completion) t += r.elapsed_ms / 1000.0;
    err += std::abs(r.estimate.translation.norm() - truth_range_at(truth, t));
  }
  if (s.localizations > 0) s.mean_abs_distance_error_m = err / s.localizations;
  if (s.processed_frames > 0) s.mean_detector_calls = calls / s.processed_frames;
  s.pixels_processed = static_cast<double>(s.processed_frames) * tiles * tile_side * tile_side;
  return s;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const PartitionLayout& layout,
                                const FrameSource& frames) {
  config.validate(layout);
  const auto wall0 = std::chrono::steady_clock::now();
  const Trajectory& traj = config.trajectory;
  const auto truth = feed_truth(traj);
  const int n = static_cast<int>(layout.size());
  TrackerState state(layout, config.tracker, config.body);
  std::vector<ViewGeometry> views;
  for (const auto& c : layout.centers) views.push_back(ViewGeometry{c, layout.theta_deg, config.tile_side});
  const MarkerDictionary& dict = MarkerDictionary::standard();

  ExperimentReport report;
  double busy_until_ms = -std::numeric_limits<double>::infinity();
  for (const auto& row : truth) {
    const double t_ms = row.t * 1000.0;
    if (config.realtime && t_ms < busy_until_ms - 1e-9) continue;

    std::unique_ptr<EquirectImage> frame;
    PartitionDetector detect;
    if (config.detector == DetectorKind::Geometric) {
      detect = [&](int p) { return geometric_detect(row.pose, views[p], config.geometric, config.body, row.frame, p); };
    } else {
      detect = [&](int p) {
        if (!frame) {
          frame = std::make_unique<EquirectImage>(frames ? frames(row)
                                                         : render_frame(row.pose, config.body, dict, config.render));
        }
        const RectifiedView view = rectify_partition(*frame, layout.centers[p], layout.theta_deg, config.tile_side, p);
        return detect_markers(view, view.intrinsics(), dict, config.body.side_length, config.image_detector);
      };
    }
    const FrameResult r = config.algorithm == Algorithm::Optimized ? step_optimized(state, detect)
                                                                    : step_greedy(state, detect);
    FrameRecord rec;
    rec.frame = row.frame;
    rec.found = r.found;
    rec.partition = r.partition;
    rec.detector_calls = r.detector_calls;
    if (r.estimate.valid) {
      rec.estimate = r.estimate.pose;
      rec.marker_count = r.estimate.marker_count;
    }
    rec.elapsed_ms = config.cost.frame_ms(n, r.detector_calls);
    busy_until_ms = t_ms + rec.elapsed_ms;
    report.records.push_back(rec);
  }
  report.summary = summarize(report.records, truth, traj.rate_hz,
                             config.realtime ? config.error_reference : ErrorReference::Capture, n, config.tile_side);
  report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0).count();
  return report;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text, std::size_t columns, const char* what) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto cells = split(line);
    if (cells.size() != columns) {
      throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(columns) + " columns, got " +
                                  std::to_string(cells.size()));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::string truth_csv(const std::vector<TruthRow>& truth) {
  std::string out = "frame,t,x,y,z,qw,qx,qy,qz\n";
  for (const auto& r : truth) {
    const auto q = r.pose.rotation.quaternion();
    const Vec3& p = r.pose.translation;
    out += std::to_string(r.frame) + "," + fmt("%.6f", r.t) + "," + fmt("%.9f", p.x()) + "," + fmt("%.9f", p.y()) +
           "," + fmt("%.9f", p.z()) + "," + fmt("%.9f", q.w()) + "," + fmt("%.9f", q.x()) + "," +
           fmt("%.9f", q.y()) + "," + fmt("%.9f", q.z()) + "\n";
  }
  return out;
}

std::vector<TruthRow> parse_truth_csv(const std::string& text) {
  std::vector<TruthRow> out;
  for (const auto& c : csv_rows(text, 9, "truth csv")) {
    TruthRow r;
    r.frame = std::stoi(c[0]);
    r.t = std::stod(c[1]);
    r.pose.translation = Vec3(std::stod(c[2]), std::stod(c[3]), std::stod(c[4]));
    r.pose.rotation = Rotation::from_quaternion(Eigen::Quaterniond(std::stod(c[5]), std::stod(c[6]), std::stod(c[7]), std::stod(c[8])));
    out.push_back(r);
  }
  return out;
}

std::string results_csv(const std::vector<FrameRecord>& records) {
  std::string out = "frame,found,partition,detector_calls,est_x,est_y,est_z,est_qw,est_qx,est_qy,est_qz,elapsed_ms\n";
  for (const auto& r : records) {
    out += std::to_string(r.frame) + "," + (r.found ? "1" : "0") + "," + std::to_string(r.partition) + "," +
           std::to_string(r.detector_calls) + ",";
    if (r.marker_count > 0) {
      const auto q = r.estimate.rotation.quaternion();
      const Vec3& p = r.estimate.translation;
      out += fmt("%.6f", p.x()) + "," + fmt("%.6f", p.y()) + "," + fmt("%.6f", p.z()) + "," + fmt("%.6f", q.w()) +
             "," + fmt("%.6f", q.x()) + "," + fmt("%.6f", q.y()) + "," + fmt("%.6f", q.z()) + ",";
    } else {
      out += ",,,,,,,";
    }
    out += fmt("%.3f", r.elapsed_ms) + "\n";
  }
  return out;
}

std::vector<FrameRecord> parse_results_csv(const std::string& text) {
  std::vector<FrameRecord> out;
  for (const auto& c : csv_rows(text, 12, "results csv")) {
    FrameRecord r;
    r.frame = std::stoi(c[0]);
    r.found = c[1] == "1";
    r.partition = std::stoi(c[2]);
    r.detector_calls = std::stoi(c[3]);
    if (!c[4].empty()) {
      r.estimate.translation = Vec3(std::stod(c[4]), std::stod(c[5]), std::stod(c[6]));
      r.estimate.rotation = Rotation::from_quaternion(
          Eigen::Quaterniond(std::stod(c[7]), std::stod(c[8]), std::stod(c[9]), std::stod(c[10])));
      r.marker_count = 1;
    }
    r.elapsed_ms = std::stod(c[11]);
    out.push_back(r);
  }
  return out;
}

}  // namespace omniloc
