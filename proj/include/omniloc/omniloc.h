#ifndef OMNILOC_H
#define OMNILOC_H

/* C interface to the omniloc library.
 *
 * Every function returns an omniloc_status. On failure the message is
 * available from omniloc_last_error() on the same thread until the next call.
 * Handles are opaque and owned by the caller; release them with the matching
 * *_free function. Strings returned through char** are released with
 * omniloc_string_free. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define OMNILOC_API __declspec(dllexport)
#else
#define OMNILOC_API __attribute__((visibility("default")))
#endif

typedef enum omniloc_status {
  OMNILOC_OK = 0,
  OMNILOC_ERR_INVALID_ARGUMENT = 1,
  OMNILOC_ERR_CONFIG = 2,
  OMNILOC_ERR_IO = 3,
  OMNILOC_ERR_SOLVER = 4,
  OMNILOC_ERR_INTERNAL = 5
} omniloc_status;

typedef struct omniloc_config omniloc_config;
typedef struct omniloc_layout omniloc_layout;
typedef struct omniloc_image omniloc_image;
typedef struct omniloc_tracker omniloc_tracker;

OMNILOC_API const char* omniloc_last_error(void);
OMNILOC_API const char* omniloc_status_string(omniloc_status status);
OMNILOC_API void omniloc_string_free(char* s);

/* Configuration. */
OMNILOC_API omniloc_status omniloc_config_default(omniloc_config** out);
OMNILOC_API omniloc_status omniloc_config_load(const char* path, omniloc_config** out);
OMNILOC_API omniloc_status omniloc_config_from_json(const char* text, omniloc_config** out);
OMNILOC_API omniloc_status omniloc_config_to_json(const omniloc_config* config, char** out);
/* Applies a JSON object of overrides on top of `config`, e.g.
 * {"tracker": {"budget": 4}}. */
OMNILOC_API omniloc_status omniloc_config_merge(omniloc_config* config, const char* overrides_json);
/* Reads a numeric or boolean setting by dotted path, e.g. "partition.seed". */
OMNILOC_API omniloc_status omniloc_config_get_number(const omniloc_config* config, const char* path, double* out);
OMNILOC_API void omniloc_config_free(omniloc_config* config);

/* Partition layouts. */
OMNILOC_API omniloc_status omniloc_layout_solve(const omniloc_config* config, int n, long long seed,
                                                omniloc_layout** out);
OMNILOC_API omniloc_status omniloc_layout_load(const char* path, omniloc_layout** out);
OMNILOC_API omniloc_status omniloc_layout_save(const omniloc_layout* layout, const char* path);
OMNILOC_API int omniloc_layout_size(const omniloc_layout* layout);
OMNILOC_API double omniloc_layout_theta_deg(const omniloc_layout* layout);
OMNILOC_API omniloc_status omniloc_layout_center(const omniloc_layout* layout, int index, double* lat_deg,
                                                 double* lon_deg);
OMNILOC_API void omniloc_layout_free(omniloc_layout* layout);

/* Scores N over [n_min, n_max]; `csv` (optional) receives the table. */
OMNILOC_API omniloc_status omniloc_sweep(const omniloc_config* config, int n_min, int n_max, int* best_n, char** csv);
/* Same over an explicit list of N. */
OMNILOC_API omniloc_status omniloc_select(const omniloc_config* config, const int* ns, size_t count, int* best_n,
                                          char** csv);

/* Images (PNG or binary PPM, chosen by extension). */
OMNILOC_API omniloc_status omniloc_image_load(const char* path, omniloc_image** out);
OMNILOC_API omniloc_status omniloc_image_save(const omniloc_image* image, const char* path);
OMNILOC_API int omniloc_image_width(const omniloc_image* image);
OMNILOC_API int omniloc_image_height(const omniloc_image* image);
OMNILOC_API void omniloc_image_free(omniloc_image* image);

/* Writes out_dir/part_<i>.png for every partition of an equirectangular
 * frame. `side` <= 0 uses the configured tile side. */
OMNILOC_API omniloc_status omniloc_rectify_to_dir(const omniloc_config* config, const omniloc_layout* layout,
                                                  const omniloc_image* frame, int side, const char* out_dir,
                                                  int* written);

/* Renders marker `id` at `px` pixels square. */
OMNILOC_API omniloc_status omniloc_marker_write(int id, int px, const char* path);

/* Writes a feed directory (feed.json, truth.csv, optional frames). */
OMNILOC_API omniloc_status omniloc_simulate(const omniloc_config* config, const char* out_dir, int write_frames,
                                            int* frames);

typedef struct omniloc_track_summary {
  int feed_frames;
  int processed_frames;
  int localizations;
  double mean_abs_distance_error_m;
  double mean_detector_calls;
  double pixels_processed;
} omniloc_track_summary;

/* Replays a feed (directory, or a trajectory kind generated on the fly) and
 * writes the results CSV plus `results_path`.meta.json. `summary` may be
 * NULL. */
OMNILOC_API omniloc_status omniloc_track(const omniloc_config* config, const omniloc_layout* layout,
                                         const char* feed, const char* results_path, omniloc_track_summary* summary);

/* Aggregates results files into a CSV table, optionally plotting distance
 * over time to `plot_path`. Either output path may be NULL; `csv` (optional)
 * receives the table. */
OMNILOC_API omniloc_status omniloc_report(const char* const* results_paths, size_t count, const char* csv_path,
                                          const char* plot_path, char** csv);

/* Step-wise tracking with a caller-supplied detector. */

typedef struct omniloc_detection {
  int marker_id;
  /* Tile pixel corners x0 y0 ... x3 y3: top-left, bottom-left, bottom-right,
   * top-right. */
  double corners[8];
} omniloc_detection;

/* Fills up to `capacity` detections for one partition and returns the count,
 * or a negative value if the detector failed (treated as a miss). */
typedef int (*omniloc_detect_fn)(void* user, int partition, omniloc_detection* out, int capacity);

typedef struct omniloc_step_result {
  int found;
  int partition;
  int detector_calls;
  int detector_failures;
  int marker_count;
  /* Body pose in the rig frame, valid when marker_count > 0. */
  double position[3];
  double quaternion[4]; /* w, x, y, z */
} omniloc_step_result;

/* Uses the configured tracker options, body and tile side. */
OMNILOC_API omniloc_status omniloc_tracker_create(const omniloc_config* config, const omniloc_layout* layout,
                                                  omniloc_tracker** out);
/* `greedy` selects the full scan instead of the last-seen-first scan. */
OMNILOC_API omniloc_status omniloc_tracker_step(omniloc_tracker* tracker, int greedy, omniloc_detect_fn detect,
                                                void* user, omniloc_step_result* result);
OMNILOC_API void omniloc_tracker_reset(omniloc_tracker* tracker);
/* Last-seen partition, or -1. */
OMNILOC_API int omniloc_tracker_last_partition(const omniloc_tracker* tracker);
OMNILOC_API void omniloc_tracker_free(omniloc_tracker* tracker);

#ifdef __cplusplus
}
#endif

#endif
