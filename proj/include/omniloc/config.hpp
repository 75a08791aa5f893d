#pragma once

// Every tunable constant of the pipeline in one place. The shipped
// config/default.json is the serialized form of `Config{}`; a user file only
// needs the keys it changes.

#include "omniloc/fiducial.hpp"
#include "omniloc/partition.hpp"
#include "omniloc/rectifier.hpp"
#include "omniloc/sim.hpp"
#include "omniloc/tracker.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace omniloc {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct PartitionSettings {
  SolverConfig solver;
  CostWeights weights;
  /// Evaluate the pixel term with the reciprocal ratio instead.
  bool printed_pixel_form = false;
  /// Source frame used by the pixel term.
  int source_height = 480;
  int source_width = 960;
  std::vector<int> select_candidates = {6, 12, 24};
  int sweep_min = 4;
  int sweep_max = 30;
  std::int64_t seed = 1;
};

struct RectifySettings {
  int tile_side = 512;
  Interpolation interpolation = Interpolation::Bilinear;
};

struct BodySettings {
  double marker_side_m = 0.05;
  double edge_m = 0.07;
};

struct SimulationSettings {
  Trajectory trajectory;
  RenderOptions render;
  GeometricDetectorModel geometric;
  CostModel cost;
  Algorithm algorithm = Algorithm::Optimized;
  DetectorKind detector = DetectorKind::Geometric;
  bool realtime = true;
  ErrorReference error_reference = ErrorReference::Completion;
};

struct Config {
  PartitionSettings partition;
  RectifySettings rectify;
  DetectorConfig detector;
  BodySettings body;
  TrackerOptions tracker;
  SimulationSettings simulation;

  /// Range checks across sections; throws ConfigError.
  void validate() const;

  /// Experiment settings for `layout` with the configured body.
  ExperimentConfig experiment() const;
};

std::string config_to_json(const Config& config);
/// Keys absent from `text` keep their defaults; unknown keys and wrong types
/// throw ConfigError naming the offending key.
Config config_from_json(const std::string& text);
Config load_config(const std::string& path);
void save_config(const Config& config, const std::string& path);

}  // namespace omniloc
