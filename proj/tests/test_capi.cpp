#include "omniloc/omniloc.h"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("omniloc_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Reports marker 4 with fixed corners in one partition only.
struct FakeDetector {
  int target = 0;
  int calls = 0;
};

int fake_detect(void* user, int partition, omniloc_detection* out, int capacity) {
  auto* self = static_cast<FakeDetector*>(user);
  ++self->calls;
  if (partition != self->target || capacity < 1) return 0;
  out[0].marker_id = 4;
  const double c[8] = {236, 236, 236, 276, 276, 276, 276, 236};
  std::memcpy(out[0].corners, c, sizeof c);
  return 1;
}

int failing_detect(void*, int, omniloc_detection*, int) { return -1; }

}  // namespace

TEST(CApi, ConfigLifecycleAndErrors) {
  omniloc_config* cfg = nullptr;
  ASSERT_EQ(omniloc_config_default(&cfg), OMNILOC_OK);
  char* json = nullptr;
  ASSERT_EQ(omniloc_config_to_json(cfg, &json), OMNILOC_OK);
  EXPECT_NE(std::string(json).find("\"tracker\""), std::string::npos);
  omniloc_string_free(json);

  EXPECT_EQ(omniloc_config_merge(cfg, R"({"tracker": {"budget": 4}})"), OMNILOC_OK);
  double budget = 0.0;
  ASSERT_EQ(omniloc_config_get_number(cfg, "tracker.budget", &budget), OMNILOC_OK);
  EXPECT_EQ(budget, 4.0);

  EXPECT_EQ(omniloc_config_merge(cfg, R"({"tracker": {"nope": 1}})"), OMNILOC_ERR_CONFIG);
  EXPECT_NE(std::string(omniloc_last_error()).find("tracker.nope"), std::string::npos);
  // A failed merge leaves the config unchanged.
  ASSERT_EQ(omniloc_config_get_number(cfg, "tracker.budget", &budget), OMNILOC_OK);
  EXPECT_EQ(budget, 4.0);
  EXPECT_STREQ(omniloc_last_error(), "");

  EXPECT_EQ(omniloc_config_get_number(cfg, "tracker.missing", &budget), OMNILOC_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(omniloc_config_to_json(nullptr, &json), OMNILOC_ERR_INVALID_ARGUMENT);
  omniloc_config_free(cfg);

  omniloc_config* bad = nullptr;
  EXPECT_EQ(omniloc_config_from_json("{", &bad), OMNILOC_ERR_CONFIG);
  EXPECT_EQ(bad, nullptr);
  EXPECT_EQ(omniloc_config_load("/nonexistent/omniloc.json", &bad), OMNILOC_ERR_CONFIG);
  EXPECT_STREQ(omniloc_status_string(OMNILOC_ERR_IO), "i/o error");
}

TEST(CApi, LayoutSweepAndSelect) {
  omniloc_config* cfg = nullptr;
  ASSERT_EQ(omniloc_config_default(&cfg), OMNILOC_OK);
  omniloc_layout* layout = nullptr;
  ASSERT_EQ(omniloc_layout_solve(cfg, 6, 1, &layout), OMNILOC_OK);
  EXPECT_EQ(omniloc_layout_size(layout), 6);
  EXPECT_NEAR(omniloc_layout_theta_deg(layout), 109.47, 1.0);
  double lat = 0.0, lon = 0.0;
  EXPECT_EQ(omniloc_layout_center(layout, 0, &lat, &lon), OMNILOC_OK);
  EXPECT_LE(std::abs(lat), 90.0);
  EXPECT_EQ(omniloc_layout_center(layout, 6, &lat, &lon), OMNILOC_ERR_INVALID_ARGUMENT);

  const fs::path dir = scratch("layout");
  const std::string path = (dir / "layout.json").string();
  ASSERT_EQ(omniloc_layout_save(layout, path.c_str()), OMNILOC_OK);
  omniloc_layout* back = nullptr;
  ASSERT_EQ(omniloc_layout_load(path.c_str(), &back), OMNILOC_OK);
  EXPECT_EQ(omniloc_layout_size(back), 6);
  omniloc_layout_free(back);
  EXPECT_EQ(omniloc_layout_load((dir / "missing.json").string().c_str(), &back), OMNILOC_ERR_IO);
  EXPECT_EQ(omniloc_layout_solve(cfg, 0, 1, &back), OMNILOC_ERR_INVALID_ARGUMENT);

  int best = 0;
  char* csv = nullptr;
  const int ns[] = {6, 12, 24};
  ASSERT_EQ(omniloc_select(cfg, ns, 3, &best, &csv), OMNILOC_OK);
  EXPECT_EQ(best, 12);
  EXPECT_EQ(std::string(csv).rfind("n,theta_deg", 0), 0u);
  omniloc_string_free(csv);
  ASSERT_EQ(omniloc_sweep(cfg, 4, 6, &best, nullptr), OMNILOC_OK);
  EXPECT_GE(best, 4);
  EXPECT_EQ(omniloc_sweep(cfg, 6, 4, &best, nullptr), OMNILOC_ERR_INVALID_ARGUMENT);

  omniloc_layout_free(layout);
  omniloc_config_free(cfg);
  fs::remove_all(dir);
}

TEST(CApi, MarkerRectifySimulateTrackReport) {
  const fs::path dir = scratch("pipeline");
  const std::string marker = (dir / "marker.png").string();
  ASSERT_EQ(omniloc_marker_write(7, 120, marker.c_str()), OMNILOC_OK);
  omniloc_image* img = nullptr;
  ASSERT_EQ(omniloc_image_load(marker.c_str(), &img), OMNILOC_OK);
  EXPECT_EQ(omniloc_image_width(img), 120);
  omniloc_image_free(img);
  EXPECT_EQ(omniloc_marker_write(999, 120, marker.c_str()), OMNILOC_ERR_INVALID_ARGUMENT);

  omniloc_config* cfg = nullptr;
  ASSERT_EQ(omniloc_config_default(&cfg), OMNILOC_OK);
  ASSERT_EQ(omniloc_config_merge(cfg, R"({"simulation": {"trajectory": {"duration_s": 1.0},
                                          "render": {"width": 240, "height": 120}}})"),
            OMNILOC_OK);
  const std::string feed = (dir / "feed").string();
  int frames = 0;
  ASSERT_EQ(omniloc_simulate(cfg, feed.c_str(), 1, &frames), OMNILOC_OK);
  EXPECT_EQ(frames, 30);
  EXPECT_TRUE(fs::exists(dir / "feed" / "frames" / "frame_00000.png"));

  omniloc_layout* layout = nullptr;
  ASSERT_EQ(omniloc_layout_solve(cfg, 12, 1, &layout), OMNILOC_OK);
  omniloc_image* frame = nullptr;
  ASSERT_EQ(omniloc_image_load((dir / "feed" / "frames" / "frame_00000.png").string().c_str(), &frame), OMNILOC_OK);
  int written = 0;
  ASSERT_EQ(omniloc_rectify_to_dir(cfg, layout, frame, 64, (dir / "tiles").string().c_str(), &written), OMNILOC_OK);
  EXPECT_EQ(written, 12);
  EXPECT_TRUE(fs::exists(dir / "tiles" / "part_11.png"));
  omniloc_image_free(frame);

  const std::string results = (dir / "run.csv").string();
  omniloc_track_summary s{};
  ASSERT_EQ(omniloc_track(cfg, layout, feed.c_str(), results.c_str(), &s), OMNILOC_OK);
  EXPECT_EQ(s.feed_frames, 30);
  EXPECT_GT(s.processed_frames, 0);
  EXPECT_TRUE(fs::exists(results + ".meta.json"));
  EXPECT_EQ(omniloc_track(cfg, layout, "nowhere", results.c_str(), &s), OMNILOC_ERR_INVALID_ARGUMENT);

  // A trajectory kind generates its feed next to the results.
  const std::string generated = (dir / "gen.csv").string();
  ASSERT_EQ(omniloc_track(cfg, layout, "lissajous", generated.c_str(), nullptr), OMNILOC_OK);
  EXPECT_TRUE(fs::exists(generated + ".feed/truth.csv"));

  const char* paths[] = {results.c_str(), generated.c_str()};
  char* table = nullptr;
  const std::string plot = (dir / "plot.png").string();
  ASSERT_EQ(omniloc_report(paths, 2, nullptr, plot.c_str(), &table), OMNILOC_OK);
  EXPECT_EQ(std::string(table).rfind("label,n,algorithm", 0), 0u);
  EXPECT_NE(std::string(table).find("\nrun,12,optimized,0,30,"), std::string::npos);
  omniloc_string_free(table);
  EXPECT_TRUE(fs::exists(plot));

  omniloc_layout_free(layout);
  omniloc_config_free(cfg);
  fs::remove_all(dir);
}

TEST(CApi, TrackerStepWithCallbackDetector) {
  omniloc_config* cfg = nullptr;
  ASSERT_EQ(omniloc_config_default(&cfg), OMNILOC_OK);
  omniloc_layout* layout = nullptr;
  ASSERT_EQ(omniloc_layout_solve(cfg, 6, 1, &layout), OMNILOC_OK);
  omniloc_tracker* tracker = nullptr;
  ASSERT_EQ(omniloc_tracker_create(cfg, layout, &tracker), OMNILOC_OK);
  EXPECT_EQ(omniloc_tracker_last_partition(tracker), -1);

  FakeDetector det{3, 0};
  omniloc_step_result r{};
  ASSERT_EQ(omniloc_tracker_step(tracker, 0, fake_detect, &det, &r), OMNILOC_OK);
  EXPECT_EQ(r.found, 1);
  EXPECT_EQ(r.partition, 3);
  EXPECT_EQ(r.detector_calls, 4);
  EXPECT_EQ(r.marker_count, 1);
  EXPECT_GT(std::hypot(r.position[0], r.position[1], r.position[2]), 0.1);
  EXPECT_NEAR(std::hypot(std::hypot(r.quaternion[0], r.quaternion[1]), std::hypot(r.quaternion[2], r.quaternion[3])),
              1.0, 1e-9);
  EXPECT_EQ(omniloc_tracker_last_partition(tracker), 3);

  ASSERT_EQ(omniloc_tracker_step(tracker, 0, fake_detect, &det, &r), OMNILOC_OK);
  EXPECT_EQ(r.detector_calls, 1);

  ASSERT_EQ(omniloc_tracker_step(tracker, 1, fake_detect, &det, &r), OMNILOC_OK);
  EXPECT_EQ(r.detector_calls, 6);

  ASSERT_EQ(omniloc_tracker_step(tracker, 0, failing_detect, nullptr, &r), OMNILOC_OK);
  EXPECT_EQ(r.found, 0);
  EXPECT_EQ(r.detector_failures, 6);

  omniloc_tracker_reset(tracker);
  EXPECT_EQ(omniloc_tracker_last_partition(tracker), -1);
  EXPECT_EQ(omniloc_tracker_step(tracker, 0, nullptr, nullptr, &r), OMNILOC_ERR_INVALID_ARGUMENT);

  omniloc_tracker_free(tracker);
  omniloc_layout_free(layout);
  omniloc_config_free(cfg);
}
