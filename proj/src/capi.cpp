#include "omniloc/omniloc.h"

#include "omniloc/workflow.hpp"

#include "json.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace omniloc;

struct omniloc_config {
  Config value;
};

struct omniloc_layout {
  PartitionLayout value;
};

struct omniloc_image {
  Image value;
};

struct omniloc_tracker {
  TrackerState state;
  double fov_deg;
  int tile_side;
  double marker_side_m;
};

namespace {

thread_local std::string last_error;

omniloc_status fail(omniloc_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Maps exceptions thrown by the core onto status codes.
template <typename F>
omniloc_status guarded(F&& body) {
  last_error.clear();
  try {
    body();
    return OMNILOC_OK;
  } catch (const ConfigError& e) {
    return fail(OMNILOC_ERR_CONFIG, e.what());
  } catch (const SolverError& e) {
    return fail(OMNILOC_ERR_SOLVER, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(OMNILOC_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(OMNILOC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(OMNILOC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(OMNILOC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::runtime_error& e) {
    // Everything else the core throws at run time is a file it could not read
    // or write.
    return fail(OMNILOC_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(OMNILOC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(OMNILOC_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

extern "C" {

const char* omniloc_last_error(void) { return last_error.c_str(); }

const char* omniloc_status_string(omniloc_status status) {
  switch (status) {
    case OMNILOC_OK:
      return "ok";
    case OMNILOC_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case OMNILOC_ERR_CONFIG:
      return "configuration error";
    case OMNILOC_ERR_IO:
      return "i/o error";
    case OMNILOC_ERR_SOLVER:
      return "solver error";
    case OMNILOC_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

void omniloc_string_free(char* s) { std::free(s); }

omniloc_status omniloc_config_default(omniloc_config** out) {
  return guarded([&] {
    require(out, "out is null");
    *out = new omniloc_config{};
  });
}

omniloc_status omniloc_config_load(const char* path, omniloc_config** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new omniloc_config{load_config(path)};
  });
}

omniloc_status omniloc_config_from_json(const char* text, omniloc_config** out) {
  return guarded([&] {
    require(text && out, "null argument");
    *out = new omniloc_config{config_from_json(text)};
  });
}

omniloc_status omniloc_config_to_json(const omniloc_config* config, char** out) {
  return guarded([&] {
    require(config && out, "null argument");
    *out = copy_string(config_to_json(config->value));
  });
}

omniloc_status omniloc_config_merge(omniloc_config* config, const char* overrides_json) {
  return guarded([&] {
    require(config && overrides_json, "null argument");
    nlohmann::json overrides;
    try {
      overrides = nlohmann::json::parse(overrides_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    if (!overrides.is_object()) throw ConfigError("config: overrides must be a JSON object");
    nlohmann::json merged = nlohmann::json::parse(config_to_json(config->value));
    merged.merge_patch(overrides);
    config->value = config_from_json(merged.dump());
  });
}

omniloc_status omniloc_config_get_number(const omniloc_config* config, const char* path, double* out) {
  return guarded([&] {
    require(config && path && out, "null argument");
    const nlohmann::json j = nlohmann::json::parse(config_to_json(config->value));
    std::string pointer = "/" + std::string(path);
    for (char& c : pointer) {
      if (c == '.') c = '/';
    }
    const nlohmann::json& v = j.at(nlohmann::json::json_pointer(pointer));
    if (v.is_boolean()) {
      *out = v.get<bool>() ? 1.0 : 0.0;
    } else if (v.is_number()) {
      *out = v.get<double>();
    } else {
      throw std::invalid_argument(std::string("config setting '") + path + "' is not a number");
    }
  });
}

void omniloc_config_free(omniloc_config* config) { delete config; }

omniloc_status omniloc_layout_solve(const omniloc_config* config, int n, long long seed, omniloc_layout** out) {
  return guarded([&] {
    require(config && out, "null argument");
    *out = new omniloc_layout{solve_layout(n, seed, config->value.partition.solver)};
  });
}

omniloc_status omniloc_layout_load(const char* path, omniloc_layout** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new omniloc_layout{load_layout(path)};
  });
}

omniloc_status omniloc_layout_save(const omniloc_layout* layout, const char* path) {
  return guarded([&] {
    require(layout && path, "null argument");
    save_layout(layout->value, path);
  });
}

int omniloc_layout_size(const omniloc_layout* layout) { return layout ? static_cast<int>(layout->value.size()) : 0; }

double omniloc_layout_theta_deg(const omniloc_layout* layout) { return layout ? layout->value.theta_deg : 0.0; }

omniloc_status omniloc_layout_center(const omniloc_layout* layout, int index, double* lat_deg, double* lon_deg) {
  return guarded([&] {
    require(layout && lat_deg && lon_deg, "null argument");
    require(index >= 0 && index < static_cast<int>(layout->value.size()), "partition index out of range");
    const GeoCoord g = dir_to_geo(layout->value.centers[index]);
    *lat_deg = g.lat * 180.0 / std::numbers::pi;
    *lon_deg = g.lon * 180.0 / std::numbers::pi;
  });
}

void omniloc_layout_free(omniloc_layout* layout) { delete layout; }

omniloc_status omniloc_sweep(const omniloc_config* config, int n_min, int n_max, int* best_n, char** csv) {
  return guarded([&] {
    require(config && best_n, "null argument");
    const SweepResult sweep = sweep_n(config->value, n_min, n_max);
    *best_n = sweep.best_n;
    if (csv) *csv = copy_string(sweep_csv(sweep));
  });
}

omniloc_status omniloc_select(const omniloc_config* config, const int* ns, size_t count, int* best_n, char** csv) {
  return guarded([&] {
    require(config && ns && best_n, "null argument");
    const SweepResult sweep = sweep_set(config->value, std::vector<int>(ns, ns + count));
    *best_n = sweep.best_n;
    if (csv) *csv = copy_string(sweep_csv(sweep));
  });
}

omniloc_status omniloc_image_load(const char* path, omniloc_image** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new omniloc_image{read_image(path)};
  });
}

omniloc_status omniloc_image_save(const omniloc_image* image, const char* path) {
  return guarded([&] {
    require(image && path, "null argument");
    write_image(image->value, path);
  });
}

int omniloc_image_width(const omniloc_image* image) { return image ? image->value.width() : 0; }

int omniloc_image_height(const omniloc_image* image) { return image ? image->value.height() : 0; }

void omniloc_image_free(omniloc_image* image) { delete image; }

omniloc_status omniloc_rectify_to_dir(const omniloc_config* config, const omniloc_layout* layout,
                                      const omniloc_image* frame, int side, const char* out_dir, int* written) {
  return guarded([&] {
    require(config && layout && frame && out_dir, "null argument");
    Config c = config->value;
    if (side > 0) c.rectify.tile_side = side;
    const int n = export_tiles(c, layout->value, EquirectImage(frame->value), out_dir);
    if (written) *written = n;
  });
}

omniloc_status omniloc_marker_write(int id, int px, const char* path) {
  return guarded([&] {
    require(path, "null argument");
    const MarkerDictionary& dict = MarkerDictionary::standard();
    require(id >= 0 && id < dict.size(), "marker id out of range");
    write_image(render_marker(dict.spec(id, 0.05), px), path);
  });
}

omniloc_status omniloc_simulate(const omniloc_config* config, const char* out_dir, int write_frames, int* frames) {
  return guarded([&] {
    require(config && out_dir, "null argument");
    const int n = simulate_feed(config->value, out_dir, write_frames != 0);
    if (frames) *frames = n;
  });
}

omniloc_status omniloc_track(const omniloc_config* config, const omniloc_layout* layout, const char* feed,
                             const char* results_path, omniloc_track_summary* summary) {
  return guarded([&] {
    require(config && layout && feed && results_path, "null argument");
    const Feed f = resolve_feed(config->value, feed, std::string(results_path) + ".feed");
    const TrackRun run = track_feed(config->value, layout->value, f, results_path);
    if (summary) {
      const ExperimentSummary& s = run.report.summary;
      *summary = {s.feed_frames,         s.processed_frames,   s.localizations, s.mean_abs_distance_error_m,
                  s.mean_detector_calls, s.pixels_processed};
    }
  });
}

omniloc_status omniloc_report(const char* const* results_paths, size_t count, const char* csv_path,
                              const char* plot_path, char** csv) {
  return guarded([&] {
    require(results_paths && count > 0, "no results files");
    std::vector<std::string> paths;
    for (size_t i = 0; i < count; ++i) {
      require(results_paths[i], "null results path");
      paths.emplace_back(results_paths[i]);
    }
    const std::string table = report_csv(build_report(paths));
    if (csv_path) {
      std::ofstream out(csv_path, std::ios::binary);
      if (!out) throw std::runtime_error(std::string("cannot write '") + csv_path + "'");
      out << table;
    }
    if (plot_path) write_image(plot_distance(paths), plot_path);
    if (csv) *csv = copy_string(table);
  });
}

omniloc_status omniloc_tracker_create(const omniloc_config* config, const omniloc_layout* layout,
                                      omniloc_tracker** out) {
  return guarded([&] {
    require(config && layout && out, "null argument");
    const Config& c = config->value;
    *out = new omniloc_tracker{
        TrackerState(layout->value, c.tracker, default_body_model(c.body.marker_side_m, c.body.edge_m)),
        layout->value.theta_deg, c.rectify.tile_side, c.body.marker_side_m};
  });
}

omniloc_status omniloc_tracker_step(omniloc_tracker* tracker, int greedy, omniloc_detect_fn detect, void* user,
                                    omniloc_step_result* result) {
  return guarded([&] {
    require(tracker && detect && result, "null argument");
    const PinholeIntrinsics intrinsics = PinholeIntrinsics::for_tile(tracker->fov_deg, tracker->tile_side);
    const double side = tracker->marker_side_m;
    // Generous enough for every face of a body in one tile.
    constexpr int kCapacity = 64;
    PartitionDetector adapter = [&](int partition) {
      omniloc_detection buf[kCapacity];
      const int count = detect(user, partition, buf, kCapacity);
      if (count < 0) throw std::runtime_error("detector callback failed");
      std::vector<Detection> dets;
      for (int k = 0; k < std::min(count, kCapacity); ++k) {
        Detection d;
        d.marker_id = buf[k].marker_id;
        d.partition_index = partition;
        for (int c = 0; c < 4; ++c) d.corners[c] = {buf[k].corners[2 * c], buf[k].corners[2 * c + 1]};
        d.pose = estimate_marker_pose(d.corners, intrinsics, side);
        dets.push_back(d);
      }
      return dets;
    };
    const FrameResult r = greedy ? step_greedy(tracker->state, adapter) : step_optimized(tracker->state, adapter);
    *result = {};
    result->found = r.found ? 1 : 0;
    result->partition = r.partition;
    result->detector_calls = r.detector_calls;
    result->detector_failures = r.detector_failures;
    result->marker_count = r.estimate.valid ? r.estimate.marker_count : 0;
    if (r.estimate.valid) {
      const Vec3& t = r.estimate.pose.translation;
      const Eigen::Quaterniond q = r.estimate.pose.rotation.quaternion();
      for (int i = 0; i < 3; ++i) result->position[i] = t[i];
      result->quaternion[0] = q.w();
      result->quaternion[1] = q.x();
      result->quaternion[2] = q.y();
      result->quaternion[3] = q.z();
    }
  });
}

void omniloc_tracker_reset(omniloc_tracker* tracker) {
  if (tracker) tracker->state.reset();
}

int omniloc_tracker_last_partition(const omniloc_tracker* tracker) {
  if (!tracker) return -1;
  return tracker->state.last_partition().value_or(-1);
}

void omniloc_tracker_free(omniloc_tracker* tracker) { delete tracker; }

}  // extern "C"
