#include "omniloc/config.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace omniloc;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const std::string& text) {
  try {
    config_from_json(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ShippedDefaultMatchesBuiltInDefaults) {
  const std::string shipped = slurp(std::string(OMNILOC_SOURCE_DIR) + "/config/default.json");
  ASSERT_FALSE(shipped.empty());
  EXPECT_EQ(shipped, config_to_json(Config{}));
}

TEST(Config, DefaultsCarryTheDocumentedConstants) {
  const Config c;
  EXPECT_DOUBLE_EQ(c.partition.weights.n, 0.60);
  EXPECT_DOUBLE_EQ(c.partition.weights.pixels, 0.05);
  EXPECT_DOUBLE_EQ(c.partition.weights.distortion, 0.35);
  EXPECT_EQ(c.partition.solver.restarts, 8);
  EXPECT_EQ(c.partition.solver.coverage_samples, 200000);
  EXPECT_EQ(c.partition.solver.refine_iterations, 20);
  EXPECT_EQ(c.partition.source_width, 960);
  EXPECT_EQ(c.partition.source_height, 480);
  EXPECT_EQ(c.rectify.tile_side, 512);
  EXPECT_EQ(c.rectify.interpolation, Interpolation::Bilinear);
  EXPECT_EQ(c.tracker.budget, 0);
  EXPECT_EQ(c.tracker.staleness_horizon, 0);
  EXPECT_DOUBLE_EQ(c.body.marker_side_m, 0.05);
  EXPECT_EQ(c.simulation.render.width, 960);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RoundTrip) {
  Config c;
  c.tracker.budget = 4;
  c.simulation.algorithm = Algorithm::Greedy;
  c.simulation.trajectory.kind = TrajectoryKind::Spline;
  c.simulation.trajectory.waypoints = {Vec3(0.5, 0, 0), Vec3(0, 0.5, 0), Vec3(-0.5, 0, 0.1)};
  c.partition.select_candidates = {4, 8};
  const Config back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.tracker.budget, 4);
  EXPECT_EQ(back.simulation.algorithm, Algorithm::Greedy);
  ASSERT_EQ(back.simulation.trajectory.waypoints.size(), 3u);
}

TEST(Config, PartialFilesKeepDefaults) {
  const Config c = config_from_json(R"({"tracker": {"budget": 3}, "rectify": {"tile_side": 256}})");
  EXPECT_EQ(c.tracker.budget, 3);
  EXPECT_EQ(c.rectify.tile_side, 256);
  EXPECT_EQ(c.partition.solver.restarts, 8);
  EXPECT_EQ(config_to_json(config_from_json("{}")), config_to_json(Config{}));
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_NE(error_of(R"({"tracker": {"bugdet": 3}})").find("tracker.bugdet"), std::string::npos);
  EXPECT_NE(error_of(R"({"tracker": {"budget": "many"}})").find("tracker.budget"), std::string::npos);
  EXPECT_NE(error_of(R"({"simulation": {"algorithm": "fastest"}})").find("simulation.algorithm"), std::string::npos);
  EXPECT_NE(error_of(R"({"rectify": {"tile_side": 4}})").find("rectify.tile_side"), std::string::npos);
  EXPECT_NE(error_of(R"({"partition": {"weights": {"n": 0.9}}})").find("weights"), std::string::npos);
  EXPECT_NE(error_of(R"({"simulation": {"trajectory": {"center": [1, 2]}}})").find("center"), std::string::npos);
  EXPECT_NE(error_of("{not json").find("malformed"), std::string::npos);
  EXPECT_NE(error_of("[]").find("object"), std::string::npos);
}

TEST(Config, ExperimentUsesEverySection) {
  Config c;
  c.body.marker_side_m = 0.04;
  c.rectify.tile_side = 300;
  c.tracker.budget = 5;
  c.simulation.realtime = false;
  const ExperimentConfig e = c.experiment();
  EXPECT_DOUBLE_EQ(e.body.side_length, 0.04);
  EXPECT_EQ(e.tile_side, 300);
  EXPECT_EQ(e.tracker.budget, 5);
  EXPECT_FALSE(e.realtime);
  EXPECT_EQ(e.body.markers.size(), 9u);
}

TEST(Config, SaveAndLoad) {
  const auto path = (std::filesystem::temp_directory_path() / "omniloc_config_test.json").string();
  Config c;
  c.partition.seed = 77;
  save_config(c, path);
  EXPECT_EQ(load_config(path).partition.seed, 77);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path), ConfigError);
}
