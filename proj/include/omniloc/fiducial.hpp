#pragma once

// Square fiducials: a 6x6 cell code (black outer ring, 4x4 payload) printed
// inside a one-cell white quiet zone, plus detection, planar pose recovery and
// multi-marker fusion into a body pose.
//
// Marker frame: origin at the marker center, x to the right, y down, z into
// the marker (away from a viewer facing it). Corners are reported
// counter-clockwise as seen in the image, starting top-left:
//   TL(-L/2,-L/2)  BL(-L/2,L/2)  BR(L/2,L/2)  TR(L/2,-L/2).

#include "omniloc/geometry.hpp"
#include "omniloc/image.hpp"
#include "omniloc/rectifier.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace omniloc {

using Payload = std::uint16_t;
inline constexpr int kCodeCells = 6;
inline constexpr int kPayloadCells = 4;
inline constexpr int kMarkerIds = 256;

/// Bit (r * 4 + c) is payload cell (r, c); 1 = white.
Payload rotate_payload(Payload p);
int hamming(Payload a, Payload b);

struct MarkerSpec {
  int id = 0;
  double side_length = 0.05;
  /// code_grid[r][c]: 1 = white, 0 = black. Ring cells are always 0.
  std::array<std::array<std::uint8_t, kCodeCells>, kCodeCells> code_grid{};
};

class DictionaryError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class MarkerDictionary {
public:
  struct Match {
    int id = -1;
    /// Clockwise quarter turns applied to the observed payload to match.
    int rotation = 0;
    int distance = 0;
  };

  /// Validates separation: every payload must differ from every other
  /// payload, and from its own non-trivial rotations, in >= 4 bits under all
  /// four rotations. Throws DictionaryError otherwise.
  explicit MarkerDictionary(std::vector<Payload> payloads);

  /// Payloads drawn from the rotation-closed [16,11,4] extended Hamming code,
  /// one orbit per id, orbits shuffled by `seed`.
  static MarkerDictionary generate(std::uint64_t seed, int count = kMarkerIds);
  static const MarkerDictionary& standard();

  int size() const { return static_cast<int>(payloads_.size()); }
  Payload payload(int id) const;
  MarkerSpec spec(int id, double side_length) const;
  int min_separation() const { return min_separation_; }

  /// Best match within `max_correction` bit errors, over all four rotations.
  std::optional<Match> decode(Payload observed, int max_correction = 1) const;

private:
  std::vector<Payload> payloads_;
  int min_separation_ = 0;
};

/// Marker with its quiet zone, `px` square pixels (8 cells across).
Image render_marker(const MarkerSpec& spec, int px);

/// Cell value (1 white, 0 black) at marker-plane point (x, y) in meters, or
/// nullopt outside the quiet zone.
std::optional<int> marker_texture(const MarkerSpec& spec, double x, double y);

/// Half-extent in meters of the printed face including the quiet zone.
double marker_face_half_extent(double side_length);

struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const;
  Pose operator*(const Pose& o) const;
};

std::array<Vec3, 4> marker_corners_3d(double side_length);

struct Detection {
  int marker_id = -1;
  std::array<Eigen::Vector2d, 4> corners{};
  Pose pose;
  int partition_index = 0;
};

struct DetectorConfig {
  /// A pixel is dark when below `threshold_ratio` times its local mean and at
  /// least `min_contrast` gray levels under it.
  double threshold_ratio = 0.85;
  double min_contrast = 4.0;
  /// Adaptive-threshold window as a fraction of the tile side (odd, >= 7 px).
  double window_fraction = 0.1;
  double min_side_px = 12.0;
  /// Components closer than this to the tile border are dropped.
  int border_margin_px = 2;
  int max_correction = 1;
  /// Reprojection refinement after the homography decomposition.
  bool refine_pose = true;
};

class PoseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Finds and decodes markers; each detection carries a pose computed for
/// `side_length` and the view's partition index.
std::vector<Detection> detect_markers(const Image& image, const PinholeIntrinsics& intrinsics,
                                      const MarkerDictionary& dictionary, double side_length,
                                      const DetectorConfig& config = {}, int partition_index = 0);
std::vector<Detection> detect_markers(const RectifiedView& view, const PinholeIntrinsics& intrinsics,
                                      const MarkerDictionary& dictionary, double side_length,
                                      const DetectorConfig& config = {});

/// Marker pose in the camera frame from its four ordered corners via
/// homography decomposition, optionally refined on the corner reprojection.
/// Throws PoseError when three corners are collinear.
Pose estimate_marker_pose(const std::array<Eigen::Vector2d, 4>& corners,
                          const PinholeIntrinsics& intrinsics, double side_length,
                          bool refine = true);

std::array<Eigen::Vector2d, 4> project_corners(const Pose& pose, const PinholeIntrinsics& intrinsics,
                                               double side_length);
double reprojection_rms(const Pose& pose, const std::array<Eigen::Vector2d, 4>& corners,
                        const PinholeIntrinsics& intrinsics, double side_length);

struct BodyMarker {
  int id = 0;
  /// Marker frame -> body frame.
  Pose marker_to_body;
};

struct BodyModel {
  std::string name = "body";
  double side_length = 0.05;
  std::vector<BodyMarker> markers;

  const BodyMarker* find(int id) const;
  /// Throws std::invalid_argument on duplicate ids or a non-positive side.
  void validate() const;
};

/// Nine faces of a rhombicuboctahedron with edge `edge`: the eight lateral
/// squares around the equator plus the top square. Ids 0..8.
BodyModel default_body_model(double side_length = 0.05, double edge = 0.07);

std::string body_model_to_json(const BodyModel& model);
BodyModel body_model_from_json(const std::string& text);
BodyModel load_body_model(const std::string& path);
void save_body_model(const BodyModel& model, const std::string& path);

struct BodyPoseEstimate {
  bool valid = false;
  /// Body frame -> rig frame.
  Pose pose;
  int marker_count = 0;
};

/// Dominant eigenvector of sum(q q^T); sign-invariant, unit norm, w >= 0.
Eigen::Quaterniond average_quaternions(const std::vector<Eigen::Quaterniond>& qs);

/// Body pose hypothesis of one detection. `camera_to_rig` is the orientation
/// of the tile the detection came from.
Pose body_hypothesis(const Detection& det, const BodyMarker& marker, const Rotation& camera_to_rig);

/// Averages the hypotheses of every detection whose id is in the model.
/// `camera_to_rig[i]` belongs to `detections[i]`.
BodyPoseEstimate fuse_body_pose(const std::vector<Detection>& detections, const BodyModel& model,
                                const std::vector<Rotation>& camera_to_rig);

}  // namespace omniloc
