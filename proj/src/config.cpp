#include "omniloc/config.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>

using json_t = nlohmann::json;

namespace Eigen {

// Vectors travel as [x, y, z].
template <typename BasicJsonType>
void to_json(BasicJsonType& j, const Vector3d& v) {
  j = BasicJsonType::array({v.x(), v.y(), v.z()});
}

template <typename BasicJsonType>
void from_json(const BasicJsonType& j, Vector3d& v) {
  if (!j.is_array() || j.size() != 3) throw omniloc::ConfigError("expected a 3-element array");
  v = Vector3d(j[0].template get<double>(), j[1].template get<double>(), j[2].template get<double>());
}

}  // namespace Eigen

namespace omniloc {

NLOHMANN_JSON_SERIALIZE_ENUM(Interpolation, {{Interpolation::Bilinear, "bilinear"}, {Interpolation::Nearest, "nearest"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TrajectoryKind, {{TrajectoryKind::Circle, "circle"},
                                              {TrajectoryKind::Lissajous, "lissajous"},
                                              {TrajectoryKind::Spline, "spline"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Algorithm, {{Algorithm::Optimized, "optimized"}, {Algorithm::Greedy, "greedy"}})
NLOHMANN_JSON_SERIALIZE_ENUM(DetectorKind, {{DetectorKind::Geometric, "geometric"}, {DetectorKind::Image, "image"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ErrorReference, {{ErrorReference::Capture, "capture"},
                                              {ErrorReference::Completion, "completion"}})

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SolverConfig, eta, tolerance, patience, min_step_scale, max_iterations,
                                                restarts, energy_exponent, energy_exponent_max, energy_iterations,
                                                energy_decay, coverage_samples, refine_iterations)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CostWeights, n, pixels, distortion)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PartitionSettings, solver, weights, printed_pixel_form, source_height,
                                                source_width, select_candidates, sweep_min, sweep_max, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RectifySettings, tile_side, interpolation)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DetectorConfig, threshold_ratio, min_contrast, window_fraction,
                                                min_side_px, border_margin_px, max_correction, refine_pose)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BodySettings, marker_side_m, edge_m)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrackerOptions, budget, staleness_horizon, resume_scans)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Trajectory, kind, duration_s, rate_hz, center, radius_m, angular_rate,
                                                phase, bob_amplitude_m, bob_rate, amplitude, rates, phases, waypoints,
                                                segment_s, yaw0, yaw_rate, tilt_amplitude, tilt_rate)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RenderOptions, width, height, supersample, black, white)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GeometricDetectorModel, min_side_px, max_incidence_deg,
                                                detection_probability, corner_noise_px, margin_px, source_height,
                                                refine_pose, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CostModel, base_ms, per_tile_ms, per_call_ms)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SimulationSettings, trajectory, render, geometric, cost, algorithm,
                                                detector, realtime, error_reference)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Config, partition, rectify, detector, body, tracker, simulation)

namespace {

std::string kind_of(const json_t& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  if (j.is_object()) return "object";
  return "null";
}

// Rejects keys the defaults do not have and leaves whose JSON kind differs.
void check_against(const json_t& given, const json_t& reference, const std::string& path) {
  if (reference.is_object()) {
    if (!given.is_object()) throw ConfigError("config: '" + path + "' must be an object");
    for (const auto& [key, value] : given.items()) {
      const std::string child = path.empty() ? key : path + "." + key;
      if (!reference.contains(key)) throw ConfigError("config: unknown key '" + child + "'");
      check_against(value, reference.at(key), child);
    }
    return;
  }
  if (kind_of(given) != kind_of(reference)) {
    throw ConfigError("config: '" + path + "' must be a " + kind_of(reference) + ", got " + kind_of(given));
  }
  static const std::set<std::string> vectors = {"simulation.trajectory.center", "simulation.trajectory.amplitude",
                                                "simulation.trajectory.rates", "simulation.trajectory.phases"};
  if (vectors.count(path) && given.size() != 3) {
    throw ConfigError("config: '" + path + "' must be a 3-element array");
  }
}

// Enum names that do not parse fall back silently; compare every string the
// user gave with its value after a round trip.
void check_strings(const json_t& given, const json_t& parsed, const std::string& path) {
  if (given.is_object()) {
    for (const auto& [key, value] : given.items()) {
      check_strings(value, parsed.at(key), path.empty() ? key : path + "." + key);
    }
  } else if (given.is_string() && given != parsed) {
    throw ConfigError("config: '" + path + "' has unknown value '" + given.get<std::string>() + "'");
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

}  // namespace

void Config::validate() const {
  const auto& s = partition.solver;
  require(s.eta > 0.0 && s.eta <= 1.0, "partition.solver.eta must be in (0, 1]");
  require(s.tolerance > 0.0, "partition.solver.tolerance must be positive");
  require(s.patience >= 1 && s.max_iterations >= 1 && s.restarts >= 1,
          "partition.solver patience, max_iterations and restarts must be >= 1");
  require(s.coverage_samples >= 1000, "partition.solver.coverage_samples must be >= 1000");
  require(s.refine_iterations >= 0 && s.energy_iterations >= 0, "partition.solver iteration counts must be >= 0");
  try {
    partition.weights.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: partition.weights: ") + e.what());
  }
  require(partition.source_height >= 2 && partition.source_width == 2 * partition.source_height,
          "partition source size must satisfy width == 2 * height");
  require(!partition.select_candidates.empty(), "partition.select_candidates must not be empty");
  for (int n : partition.select_candidates) require(n >= 2, "partition.select_candidates entries must be >= 2");
  require(partition.sweep_min >= 2 && partition.sweep_max >= partition.sweep_min,
          "partition sweep range must satisfy 2 <= sweep_min <= sweep_max");

  require(rectify.tile_side >= 16, "rectify.tile_side must be >= 16");

  require(detector.threshold_ratio > 0.0 && detector.threshold_ratio < 1.0, "detector.threshold_ratio must be in (0, 1)");
  require(detector.min_contrast >= 0.0, "detector.min_contrast must be >= 0");
  require(detector.window_fraction > 0.0 && detector.window_fraction <= 1.0, "detector.window_fraction must be in (0, 1]");
  require(detector.min_side_px >= 4.0, "detector.min_side_px must be >= 4");
  require(detector.border_margin_px >= 0, "detector.border_margin_px must be >= 0");
  require(detector.max_correction >= 0 && detector.max_correction <= 1, "detector.max_correction must be 0 or 1");

  require(body.marker_side_m > 0.0, "body.marker_side_m must be positive");
  require(body.edge_m >= body.marker_side_m, "body.edge_m must be at least the marker side");

  require(tracker.budget >= 0, "tracker.budget must be >= 0");
  require(tracker.staleness_horizon >= 0, "tracker.staleness_horizon must be >= 0");

  const auto& sim = simulation;
  try {
    sim.trajectory.validate();
    sim.geometric.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: simulation: ") + e.what());
  }
  require(sim.render.height >= 2 && sim.render.width == 2 * sim.render.height,
          "simulation.render size must satisfy width == 2 * height");
  require(sim.render.supersample >= 1, "simulation.render.supersample must be >= 1");
  require(sim.cost.base_ms >= 0.0 && sim.cost.per_tile_ms >= 0.0 && sim.cost.per_call_ms >= 0.0,
          "simulation.cost terms must be >= 0");
}

ExperimentConfig Config::experiment() const {
  ExperimentConfig e;
  e.trajectory = simulation.trajectory;
  e.body = default_body_model(body.marker_side_m, body.edge_m);
  e.algorithm = simulation.algorithm;
  e.detector = simulation.detector;
  e.tracker = tracker;
  e.geometric = simulation.geometric;
  e.image_detector = detector;
  e.render = simulation.render;
  e.tile_side = rectify.tile_side;
  e.cost = simulation.cost;
  e.realtime = simulation.realtime;
  e.error_reference = simulation.error_reference;
  return e;
}

std::string config_to_json(const Config& config) {
  const json_t j = config;
  return j.dump(2) + "\n";
}

Config config_from_json(const std::string& text) {
  json_t given;
  try {
    given = json_t::parse(text);
  } catch (const json_t::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  const json_t reference = Config{};
  check_against(given, reference, "");
  Config config;
  try {
    config = given.get<Config>();
    check_strings(given, json_t(config), "");
  } catch (const ConfigError&) {
    throw;
  } catch (const json_t::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  config.validate();
  return config;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const Config& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write '" + path + "'");
  out << config_to_json(config);
}

}  // namespace omniloc
