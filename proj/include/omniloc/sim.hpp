#pragma once

// Synthetic ground truth: scripted body trajectories around the camera rig,
// an equirectangular renderer for the marker faces, an image-free detector
// model, and the experiment loop that replays a feed through the tracker.
//
// Rig frame: camera at the origin, x forward (lon 0), z up.

#include "omniloc/fiducial.hpp"
#include "omniloc/partition.hpp"
#include "omniloc/rectifier.hpp"
#include "omniloc/tracker.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace omniloc {

enum class TrajectoryKind { Circle, Lissajous, Spline };

std::string to_string(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_string(const std::string& s);

struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::Circle;
  double duration_s = 60.0;
  double rate_hz = 30.0;

  /// Circle: center + radius * (cos, sin, 0)(angular_rate * t + phase) plus a
  /// vertical bob of bob_amplitude at bob_rate.
  /// The default keeps the body 0.3 to 0.5 m away, inside the detection
  /// range of 5 cm markers in a 960x480 source.
  Vec3 center = Vec3(0.1, 0.0, 0.0);
  double radius_m = 0.4;
  double angular_rate = 0.3;
  double phase = 0.0;
  double bob_amplitude_m = 0.08;
  double bob_rate = 0.4;

  /// Lissajous: center + amplitude .* sin(rates * t + phases), per axis. The
  /// default spans room scale, up to about 1.5 m.
  Vec3 amplitude = Vec3(1.1, 1.0, 0.25);
  Vec3 rates = Vec3(0.21, 0.29, 0.37);
  Vec3 phases = Vec3(0.0, 1.5707963267948966, 0.7853981633974483);

  /// Spline: closed Catmull-Rom loop through the waypoints, one segment per
  /// segment_s seconds.
  std::vector<Vec3> waypoints;
  double segment_s = 4.0;

  /// Body attitude: yaw = yaw0 + yaw_rate * t, tilt about body x with the
  /// given amplitude and rate.
  double yaw0 = 0.0;
  double yaw_rate = 0.15;
  double tilt_amplitude = 0.1;
  double tilt_rate = 0.5;

  Vec3 position(double t) const;
  Rotation attitude(double t) const;
  /// Body -> rig pose at time t.
  Pose pose_at(double t) const;

  int frame_count() const;
  double time_of(int frame) const { return frame / rate_hz; }

  /// Throws std::invalid_argument on bad parameters or when the body comes
  /// within 0.05 m of the camera.
  void validate() const;
};

struct RenderOptions {
  int width = 960;
  int height = 480;
  /// Subsamples per axis for pixels touched by a marker face.
  int supersample = 3;
  std::uint8_t black = 20;
  std::uint8_t white = 235;
};

/// Ray-casts every front-facing marker face of the body into an
/// equirectangular frame over a deterministic gradient background.
EquirectImage render_frame(const Pose& body_to_rig, const BodyModel& body, const MarkerDictionary& dictionary,
                           const RenderOptions& options = {});

/// Background color of the renderer at a direction.
Rgb background_color(const GeoCoord& g);

/// Marker corners of one body face in the rig frame, TL, BL, BR, TR.
std::array<Vec3, 4> face_corners_rig(const Pose& body_to_rig, const BodyMarker& marker, double side_length);

/// True when the face's printed side is turned toward the camera.
bool face_front_facing(const Pose& body_to_rig, const BodyMarker& marker);

struct GeometricDetectorModel {
  /// Minimum marker side in effective pixels.
  double min_side_px = 12.0;
  double max_incidence_deg = 70.0;
  /// Detection probability at the size threshold; the miss rate then falls
  /// with the square of the apparent side.
  double detection_probability = 0.95;
  /// Corner noise in tile pixels, per corner and axis.
  double corner_noise_px = 0.5;
  /// Corners closer than this to the tile border miss.
  double margin_px = 2.0;
  /// Source frame height; the equirectangular pitch h/pi caps the usable
  /// resolution of an upsampled tile. 0 = tile resolution only.
  int source_height = 480;
  /// Reprojection refinement of each marker pose.
  bool refine_pose = true;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Image-free detection of every visible face in one tile. Noise draws are
/// keyed by (seed, frame, partition, marker) so results do not depend on
/// probe order.
std::vector<Detection> geometric_detect(const Pose& body_to_rig, const ViewGeometry& view,
                                        const GeometricDetectorModel& model, const BodyModel& body,
                                        int frame = 0, int partition = 0);

struct CostModel {
  /// Modeled processing time per frame: base + per_tile * N + per_call * calls.
  double base_ms = 100.0;
  double per_tile_ms = 10.0;
  double per_call_ms = 8.0;

  double frame_ms(int tiles, int calls) const { return base_ms + per_tile_ms * tiles + per_call_ms * calls; }
};

enum class Algorithm { Optimized, Greedy };
enum class DetectorKind { Geometric, Image };
/// Truth used to score an estimate: at frame capture, or when the pipeline
/// finishes the frame (modeled time).
enum class ErrorReference { Capture, Completion };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);
std::string to_string(DetectorKind d);
DetectorKind detector_kind_from_string(const std::string& s);
std::string to_string(ErrorReference r);
ErrorReference error_reference_from_string(const std::string& s);

struct ExperimentConfig {
  Trajectory trajectory;
  BodyModel body = default_body_model();
  Algorithm algorithm = Algorithm::Optimized;
  DetectorKind detector = DetectorKind::Geometric;
  TrackerOptions tracker;
  GeometricDetectorModel geometric;
  DetectorConfig image_detector;
  RenderOptions render;
  int tile_side = 512;
  CostModel cost;
  /// Drop feed frames that arrive while the modeled pipeline is busy.
  bool realtime = true;
  ErrorReference error_reference = ErrorReference::Completion;

  void validate(const PartitionLayout& layout) const;
};

struct FrameRecord {
  int frame = 0;
  bool found = false;
  int partition = -1;
  int detector_calls = 0;
  Pose estimate;
  int marker_count = 0;
  /// Modeled processing time.
  double elapsed_ms = 0.0;
};

struct ExperimentSummary {
  int feed_frames = 0;
  int processed_frames = 0;
  int localizations = 0;
  double mean_abs_distance_error_m = 0.0;
  double mean_detector_calls = 0.0;
  double pixels_processed = 0.0;
};

struct ExperimentReport {
  std::vector<FrameRecord> records;
  ExperimentSummary summary;
  double wall_ms = 0.0;
};

/// Ground truth of a feed, one row per feed frame.
struct TruthRow {
  int frame = 0;
  double t = 0.0;
  Pose pose;
};

/// Supplies the equirectangular frame for a feed row to the image detector.
using FrameSource = std::function<EquirectImage(const TruthRow&)>;

/// Replays the trajectory's feed through the tracker. Every processed frame
/// produces one record; frames dropped by the real-time model produce none.
/// The image detector renders frames itself unless `frames` is given.
ExperimentReport run_experiment(const ExperimentConfig& config, const PartitionLayout& layout,
                                const FrameSource& frames = {});

std::vector<TruthRow> feed_truth(const Trajectory& traj);

/// Body range at time t by linear interpolation of the truth rows.
double truth_range_at(const std::vector<TruthRow>& truth, double t);

ExperimentSummary summarize(const std::vector<FrameRecord>& records, const std::vector<TruthRow>& truth,
                            double rate_hz, ErrorReference reference, int tiles, int tile_side);

std::string truth_csv(const std::vector<TruthRow>& truth);
std::vector<TruthRow> parse_truth_csv(const std::string& text);
std::string results_csv(const std::vector<FrameRecord>& records);
std::vector<FrameRecord> parse_results_csv(const std::string& text);

}  // namespace omniloc
