#include "omniloc/partition.hpp"
#include "omniloc/random.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace omniloc;

namespace {

// Largest angle from any of `samples` lattice points to its nearest center, in degrees.
double worst_gap_deg(const std::vector<Direction>& centers, std::size_t samples) {
  double worst = 0.0;
  for (const Direction& s : fibonacci_sphere(samples)) {
    double best = -1.0;
    for (const Direction& c : centers) best = std::max(best, s.dot(c));
    worst = std::max(worst, std::acos(std::clamp(best, -1.0, 1.0)));
  }
  return worst * kRadToDeg;
}

std::vector<Direction> octahedron() {
  return {Direction(1, 0, 0), Direction(-1, 0, 0), Direction(0, 1, 0),
          Direction(0, -1, 0), Direction(0, 0, 1),  Direction(0, 0, -1)};
}

}  // namespace

TEST(CoveringAngle, ReferenceArrangements) {
  EXPECT_NEAR(covering_angle({Direction(0.3, -0.2, 0.9)}), 360.0, 1e-9);
  EXPECT_NEAR(covering_angle({Direction(0, 0, 1), Direction(0, 0, -1)}), 180.0, 0.05);
  const double octa = 2.0 * std::acos(1.0 / std::sqrt(3.0)) * kRadToDeg;
  EXPECT_NEAR(covering_angle(octahedron()), octa, 0.2);
  EXPECT_THROW(covering_angle({}), std::invalid_argument);
}

TEST(CoveringAngle, AddingACenterNeverIncreasesIt) {
  Rng rng(8);
  std::vector<Direction> centers;
  for (int i = 0; i < 6; ++i) centers.push_back(rng.direction());
  SolverConfig cfg;
  cfg.coverage_samples = 50000;
  double prev = covering_angle(centers, cfg);
  for (int i = 0; i < 8; ++i) {
    centers.push_back(rng.direction());
    const double next = covering_angle(centers, cfg);
    // Sampling noise only; both values are refined maxima of the same field.
    EXPECT_LE(next, prev + 0.05);
    prev = next;
  }
}

TEST(SolveLayout, TrivialCounts) {
  const auto one = solve_layout(1, 3);
  EXPECT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one.theta_deg, 360.0);

  const auto two = solve_layout(2, 3);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_NEAR(angular_distance(two.centers[0], two.centers[1]) * kRadToDeg, 180.0, 0.5);
  EXPECT_NEAR(two.theta_deg, 180.0, 0.5);

  EXPECT_THROW(solve_layout(0, 1), std::invalid_argument);
}

TEST(SolveLayout, TetrahedronCoveringAngle) {
  // The deepest hole of a regular tetrahedron sits opposite a vertex, at
  // arccos(1/3) from the other three.
  const double oracle = 2.0 * std::acos(1.0 / 3.0) * kRadToDeg;
  EXPECT_NEAR(oracle, 141.06, 0.01);
  EXPECT_NEAR(solve_layout(4, 11).theta_deg, oracle, 2.0);
}

TEST(SolveLayout, SixIsAnOctahedron) {
  const auto layout = solve_layout(6, 5);
  EXPECT_NEAR(layout.theta_deg, 109.47, 1.0);
  for (std::size_t i = 0; i < 6; ++i) {
    double nearest = kPi;
    for (std::size_t j = 0; j < 6; ++j) {
      if (i != j) nearest = std::min(nearest, angular_distance(layout.centers[i], layout.centers[j]));
    }
    EXPECT_NEAR(nearest * kRadToDeg, 90.0, 1.0);
  }
}

TEST(SolveLayout, DeterministicPerSeed) {
  const auto a = solve_layout(9, 42);
  const auto b = solve_layout(9, 42);
  EXPECT_EQ(a.centers, b.centers);
  EXPECT_EQ(a.theta_deg, b.theta_deg);
  EXPECT_EQ(a.seed, 42);
  const auto c = solve_layout(9, 43);
  EXPECT_NE(a.centers, c.centers);
}

TEST(SolveLayout, CoverageOracleSmallN) {
  for (int n = 2; n <= 14; ++n) {
    const auto layout = solve_layout(n, 7);
    EXPECT_LE(worst_gap_deg(layout.centers, 100000), layout.theta_deg / 2.0 + 0.1) << "n=" << n;
    EXPECT_GT(layout.theta_deg, 0.0);
    EXPECT_LE(layout.theta_deg, 360.0);
  }
}

TEST(SolveLayout, TinyIterationBudgetFailsLoudly) {
  SolverConfig cfg;
  cfg.max_iterations = 3;
  cfg.restarts = 1;
  try {
    solve_layout(12, 1, cfg);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_NE(std::string(e.what()).find("3 iterations"), std::string::npos);
  }
}

TEST(PixelCost, Values) {
  EXPECT_DOUBLE_EQ(pixel_cost(1, 360.0, 100, 100), 10000.0);
  EXPECT_NEAR(pixel_cost(12, 74.0, 960, 480), 233642.0, 1.0);
  // The literal ratio, kept for comparison.
  EXPECT_NEAR(pixel_cost(12, 74.0, 960, 480, true), 12.0 * std::pow(360.0 / 74.0, 2) * 960 * 480, 1e-3);
  PartitionLayout layout;
  layout.centers = octahedron();
  layout.theta_deg = 110.0;
  EXPECT_DOUBLE_EQ(pixel_cost(layout, 480, 960), pixel_cost(6, 110.0, 480, 960));
  EXPECT_THROW(pixel_cost(0, 74.0, 10, 10), std::invalid_argument);
  EXPECT_THROW(pixel_cost(12, 74.0, 0, 10), std::invalid_argument);
}

TEST(Distortion, ClosedForms) {
  EXPECT_NEAR(distortion_metric(1e-6), 0.0, 1e-12);
  EXPECT_NEAR(distortion_metric(90.0), 3.0 * std::sqrt(3.0) - 1.0, 1e-12);
  EXPECT_TRUE(std::isinf(distortion_metric(180.0)));
  EXPECT_THROW(distortion_metric(0.0), std::invalid_argument);
  EXPECT_GT(distortion_metric(110.0), distortion_metric(74.0));
  EXPECT_GT(distortion_metric(74.0), distortion_metric(62.0));
  double prev = 0.0;
  for (double t = 1.0; t < 180.0; t += 1.0) {
    const double d = distortion_metric(t);
    EXPECT_GT(d, prev);
    prev = d;
  }
}

TEST(CostWeights, Validation) {
  EXPECT_NO_THROW(CostWeights{}.validate());
  EXPECT_THROW((CostWeights{0.5, 0.2, 0.3}.validate()), std::invalid_argument);
  EXPECT_THROW((CostWeights{0.6, 0.1, 0.35}.validate()), std::invalid_argument);
  EXPECT_THROW((CostWeights{1.0, 0.0, 0.0}.validate()), std::invalid_argument);
}

TEST(SelectN, SixTwelveTwentyFourPicksTwelve) {
  const std::vector<NCandidate> c = {{6, 110.0}, {12, 74.0}, {24, 62.0}};
  const Selection s = select_n(c, 960, 480);
  EXPECT_EQ(s.best_n, 12);
  ASSERT_EQ(s.table.size(), 3u);
  for (const auto& row : s.table) EXPECT_NEAR(row.weights.n + row.weights.pixels + row.weights.distortion, 1.0, 1e-12);
}

TEST(SelectN, SingleCandidateAndEmptySet) {
  EXPECT_EQ(select_n({{9, 90.0}}, 480, 960).best_n, 9);
  EXPECT_THROW(select_n({}, 480, 960), std::invalid_argument);
}

TEST(SelectN, DominantCountWeightPicksSmallestN) {
  const double eps = 1e-3;
  const std::vector<NCandidate> c = {{24, 62.0}, {6, 110.0}, {12, 74.0}, {30, 55.0}};
  EXPECT_EQ(select_n(c, 480, 960, CostWeights{1.0 - 2 * eps, eps, eps}).best_n, 6);
}

TEST(SelectN, ArgminIgnoresSourceScale) {
  // Scaling the source resolution multiplies the pixel column by a constant,
  // which min-max normalization removes.
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<NCandidate> c;
    for (int n = 4; n <= 12; n += 2) c.push_back({n, rng.uniform(40.0, 150.0)});
    const int base = select_n(c, 480, 960).best_n;
    EXPECT_EQ(select_n(c, 960, 1920).best_n, base);
    EXPECT_EQ(select_n(c, 100, 200).best_n, base);
  }
}

TEST(SelectN, IdenticalCandidatesTie) {
  const std::vector<NCandidate> c = {{8, 80.0}, {8, 80.0}};
  EXPECT_EQ(select_n(c, 480, 960).best_n, 8);
}

TEST(LayoutFile, RoundTripWithNineSignificantDigits) {
  const auto layout = solve_layout(5, 2);
  const std::string text = layout_to_json(layout);
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j.at("n").get<int>(), 5);
  EXPECT_EQ(j.at("seed").get<int>(), 2);
  ASSERT_EQ(j.at("centers").size(), 5u);
  EXPECT_TRUE(j.at("centers")[0].contains("lat_deg"));
  EXPECT_TRUE(j.at("centers")[0].contains("lon_deg"));

  const auto back = layout_from_json(text);
  ASSERT_EQ(back.size(), layout.size());
  EXPECT_NEAR(back.theta_deg, layout.theta_deg, 1e-6);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    EXPECT_LT(angular_distance(back.centers[i], layout.centers[i]), 1e-7);
  }
  // Writing the parsed layout again is stable.
  EXPECT_EQ(layout_to_json(back), text);

  const auto path = std::filesystem::temp_directory_path() / "omniloc_layout_test.json";
  save_layout(layout, path.string());
  EXPECT_EQ(layout_to_json(load_layout(path.string())), text);
  std::filesystem::remove(path);
}

TEST(LayoutFile, RejectsInconsistentFiles) {
  EXPECT_THROW(layout_from_json(R"({"n":2,"theta_deg":180,"seed":1,"centers":[{"lat_deg":0,"lon_deg":0}]})"),
               std::invalid_argument);
  EXPECT_THROW(layout_from_json(R"({"n":1,"theta_deg":400,"seed":1,"centers":[{"lat_deg":0,"lon_deg":0}]})"),
               std::invalid_argument);
  EXPECT_THROW(load_layout("/nonexistent/layout.json"), std::runtime_error);
}
