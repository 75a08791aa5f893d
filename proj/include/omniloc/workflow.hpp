#pragma once

// File-level workflows behind the command-line verbs: layout sweeps, tile
// export, feed generation, tracking a feed and aggregating results.
//
// A feed directory holds feed.json (the simulation settings that produced it),
// truth.csv and, optionally, frames/frame_NNNNN.png.

#include "omniloc/config.hpp"

#include <string>
#include <vector>

namespace omniloc {

struct SweepRow {
  int n = 0;
  double theta_deg = 0.0;
  double pixel_count = 0.0;
  double distortion = 0.0;
  /// Weighted, normalized cost over the swept set.
  double total = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  int best_n = 0;
};

/// Solves every N in `ns` and scores the set with select_n.
SweepResult sweep_set(const Config& config, const std::vector<int>& ns);
/// sweep_set over [n_min, n_max].
SweepResult sweep_n(const Config& config, int n_min, int n_max);
std::string sweep_csv(const SweepResult& sweep);

/// Rectifies every partition of `frame` into `out_dir`/part_<i>.png and
/// returns the number of files written.
int export_tiles(const Config& config, const PartitionLayout& layout, const EquirectImage& frame,
                 const std::string& out_dir);

/// Writes feed.json and truth.csv, plus the rendered frames when asked.
/// Returns the number of feed frames.
int simulate_feed(const Config& config, const std::string& out_dir, bool write_frames);

struct Feed {
  SimulationSettings simulation;
  BodySettings body;
  bool has_frames = false;
  std::string dir;
};

Feed load_feed(const std::string& dir);

/// `spec` is either a feed directory or a trajectory kind ("circle",
/// "lissajous", "spline"). A kind is simulated without frames into
/// `scratch_dir` using the rest of `config.simulation`.
Feed resolve_feed(const Config& config, const std::string& spec, const std::string& scratch_dir);

struct TrackRun {
  ExperimentReport report;
  /// Sidecar written next to the results CSV.
  std::string meta_json;
};

/// Replays a feed through the tracker configured by `config` (algorithm,
/// budget, detector kind and real-time model come from `config`; the scene
/// comes from the feed). Writes `results_path` and `results_path`.meta.json.
TrackRun track_feed(const Config& config, const PartitionLayout& layout, const Feed& feed,
                    const std::string& results_path);

struct ReportRow {
  std::string label;
  int n = 0;
  std::string algorithm;
  int budget = 0;
  ExperimentSummary summary;
  /// Feed frames in which the geometric model sees at least one marker in
  /// some partition.
  int available_frames = 0;
};

/// Re-scores results files against their feeds' truth.
std::vector<ReportRow> build_report(const std::vector<std::string>& results_paths);
std::string report_csv(const std::vector<ReportRow>& rows);

/// Distance-to-target over time: truth as a line, each results file as dots.
Image plot_distance(const std::vector<std::string>& results_paths, int width = 960, int height = 400);

}  // namespace omniloc
