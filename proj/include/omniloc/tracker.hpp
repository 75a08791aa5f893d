#pragma once

// Partition search over a layout: the last-seen-first optimized scan and the
// full greedy scan, both over a pluggable per-partition detector.

#include "omniloc/fiducial.hpp"
#include "omniloc/partition.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace omniloc {

/// Row i lists every partition index by angular distance from center i,
/// self first, ties broken by ascending index.
using NeighborOrder = std::vector<std::vector<int>>;

NeighborOrder precompute_neighbor_order(const PartitionLayout& layout);

/// Runs the marker detector on one partition of the current frame. Throwing
/// counts as a miss for that partition.
using PartitionDetector = std::function<std::vector<Detection>(int partition)>;

struct TrackerOptions {
  /// Maximum detector calls per frame; 0 = unlimited.
  int budget = 0;
  /// Forget the last-seen partition after this many consecutive full misses;
  /// 0 keeps it forever.
  int staleness_horizon = 0;
  /// When the budget cuts a scan short, the next frame picks the scan up
  /// where it stopped instead of restarting it. The warm scan still probes
  /// the last-seen partition first.
  bool resume_scans = true;
};

struct FrameResult {
  bool found = false;
  int partition = -1;
  std::vector<Detection> detections;
  BodyPoseEstimate estimate;
  int detector_calls = 0;
  int detector_failures = 0;
  /// Partitions probed, in order.
  std::vector<int> probes;
  /// Wall clock spent in the step.
  double elapsed_ms = 0.0;
};

class TrackerState {
public:
  TrackerState(PartitionLayout layout, TrackerOptions options = {}, std::optional<BodyModel> body = std::nullopt);

  const PartitionLayout& layout() const { return layout_; }
  const NeighborOrder& neighbor_order() const { return neighbor_order_; }
  const TrackerOptions& options() const { return options_; }
  const std::optional<BodyModel>& body() const { return body_; }
  /// Tile orientation (camera to rig) per partition.
  const std::vector<Rotation>& view_rotations() const { return view_rotations_; }

  std::optional<int> last_partition() const { return last_; }
  int consecutive_misses() const { return misses_; }
  void reset();

  /// Probe budget in effect for a frame: min(N, budget) or N.
  int call_limit() const;

private:
  friend FrameResult step_optimized(TrackerState& state, const PartitionDetector& detect);
  friend FrameResult step_greedy(TrackerState& state, const PartitionDetector& detect);

  PartitionLayout layout_;
  TrackerOptions options_;
  std::optional<BodyModel> body_;
  NeighborOrder neighbor_order_;
  std::vector<Rotation> view_rotations_;
  std::optional<int> last_;
  int misses_ = 0;
  // Offsets into the interrupted optimized and greedy scans.
  int resume_ = 0;
  int greedy_resume_ = 0;
};

/// Cold: ascending scan until the first partition with detections. Warm:
/// the last-seen partition, then its neighbors nearest first. Stops at the
/// first hit and remembers it; a full miss leaves the last-seen partition in
/// place unless the staleness horizon expires.
FrameResult step_optimized(TrackerState& state, const PartitionDetector& detect);

/// Scans `limit` partitions in index order and fuses every partition that
/// fired. Without a budget that is always 0..N-1; under a budget the window
/// rotates across frames when scans resume, else it stays at 0..limit-1.
FrameResult step_greedy(TrackerState& state, const PartitionDetector& detect);

}  // namespace omniloc
