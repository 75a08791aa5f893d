#include "omniloc/omniloc.h"

#include "CLI11.hpp"

#include <cstdio>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

// Thrown on any non-OK status; main() prints it and exits non-zero.
struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(omniloc_status status) {
  if (status != OMNILOC_OK) {
    throw CliError(std::string(omniloc_status_string(status)) + ": " + omniloc_last_error());
  }
}

struct ConfigDeleter {
  void operator()(omniloc_config* c) const { omniloc_config_free(c); }
};
struct LayoutDeleter {
  void operator()(omniloc_layout* l) const { omniloc_layout_free(l); }
};
struct ImageDeleter {
  void operator()(omniloc_image* i) const { omniloc_image_free(i); }
};
struct StringDeleter {
  void operator()(char* s) const { omniloc_string_free(s); }
};

using ConfigPtr = std::unique_ptr<omniloc_config, ConfigDeleter>;
using LayoutPtr = std::unique_ptr<omniloc_layout, LayoutDeleter>;
using ImagePtr = std::unique_ptr<omniloc_image, ImageDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
};

ConfigPtr make_config(const Globals& g) {
  omniloc_config* raw = nullptr;
  if (g.config_path.empty()) {
    check(omniloc_config_default(&raw));
  } else {
    check(omniloc_config_load(g.config_path.c_str(), &raw));
  }
  ConfigPtr config(raw);
  for (const auto& o : g.overrides) check(omniloc_config_merge(config.get(), o.c_str()));
  return config;
}

void merge(omniloc_config* config, const std::string& json) { check(omniloc_config_merge(config, json.c_str())); }

double number(const omniloc_config* config, const char* path) {
  double v = 0.0;
  check(omniloc_config_get_number(config, path, &v));
  return v;
}

LayoutPtr load_layout(const std::string& path) {
  omniloc_layout* raw = nullptr;
  check(omniloc_layout_load(path.c_str(), &raw));
  return LayoutPtr(raw);
}

void write_or_print(const std::string& path, const char* text) {
  if (path.empty() || path == "-") {
    std::fputs(text, stdout);
    return;
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw CliError("cannot write '" + path + "'");
  std::fputs(text, f);
  std::fclose(f);
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"omniloc: 360-degree relative localization from fiducial markers"};
  app.require_subcommand(1);
  Globals globals;
  app.add_option("--config", globals.config_path, "JSON config; missing keys keep their defaults")
      ->check(CLI::ExistingFile);
  app.add_option("--set", globals.overrides, "JSON object merged over the config, e.g. '{\"tracker\":{\"budget\":4}}'");
  app.fallthrough();

  auto* dump = app.add_subcommand("config", "Print the effective config as JSON");
  std::string dump_out;
  dump->add_option("--out", dump_out, "Output file (default stdout)");

  auto* partition = app.add_subcommand("partition", "Solve a partition layout for N caps");
  int part_n = 12;
  long long part_seed = -1;
  std::string part_out;
  partition->add_option("--n", part_n, "Number of partitions")->check(CLI::Range(2, 100));
  partition->add_option("--seed", part_seed, "Solver seed (default: config partition.seed)");
  partition->add_option("--out", part_out, "Layout file")->required();

  auto* sweep = app.add_subcommand("sweep-n", "Score a range of N and pick the best");
  int sweep_min = -1;
  int sweep_max = -1;
  std::vector<int> sweep_set;
  std::string sweep_out;
  sweep->add_option("--min", sweep_min, "Smallest N (default: config)");
  sweep->add_option("--max", sweep_max, "Largest N (default: config)");
  sweep->add_option("--candidates", sweep_set, "Explicit N list instead of a range")->delimiter(',');
  sweep->add_option("--out", sweep_out, "CSV file (default stdout)");

  auto* rectify = app.add_subcommand("rectify", "Cut an equirectangular frame into partition tiles");
  std::string rect_layout, rect_in, rect_dir;
  int rect_side = 0;
  rectify->add_option("--layout", rect_layout, "Layout file")->required()->check(CLI::ExistingFile);
  rectify->add_option("--in", rect_in, "Equirectangular frame (.png or .ppm)")->required()->check(CLI::ExistingFile);
  rectify->add_option("--side", rect_side, "Tile side in pixels (default: config)")->check(CLI::Range(16, 8192));
  rectify->add_option("--out-dir", rect_dir, "Output directory")->required();

  auto* marker = app.add_subcommand("marker", "Render a marker image");
  int marker_id = 0;
  int marker_px = 200;
  std::string marker_out;
  marker->add_option("--id", marker_id, "Marker id")->required();
  marker->add_option("--px", marker_px, "Image side in pixels")->check(CLI::Range(8, 8192));
  marker->add_option("--out", marker_out, "Output file (default marker_<id>.png)");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic feed with ground truth");
  std::string sim_dir, sim_kind;
  bool sim_frames = false;
  double sim_duration = -1.0;
  long long sim_seed = -1;
  simulate->add_option("--out-dir", sim_dir, "Feed directory")->required();
  simulate->add_option("--trajectory", sim_kind, "circle, lissajous or spline (default: config)");
  simulate->add_option("--duration", sim_duration, "Seconds (default: config)");
  simulate->add_option("--seed", sim_seed, "Detector-model seed (default: config)");
  simulate->add_flag("--frames", sim_frames, "Also render equirectangular frames");

  auto* track = app.add_subcommand("track", "Run the tracker over a feed");
  std::string track_layout, track_feed, track_algo, track_detector, track_out;
  int track_budget = -1;
  bool track_offline = false;
  track->add_option("--layout", track_layout, "Layout file")->required()->check(CLI::ExistingFile);
  track->add_option("--feed", track_feed, "Feed directory or trajectory kind")->required();
  track->add_option("--algo", track_algo, "optimized or greedy (default: config)")
      ->check(CLI::IsMember({"optimized", "greedy"}));
  track->add_option("--budget", track_budget, "Detector calls per frame, 0 = unlimited (default: config)")
      ->check(CLI::NonNegativeNumber);
  track->add_option("--detector", track_detector, "geometric or image (default: config)")
      ->check(CLI::IsMember({"geometric", "image"}));
  track->add_flag("--offline", track_offline, "Process every frame and score at capture time");
  track->add_option("--out", track_out, "Results CSV")->required();

  auto* report = app.add_subcommand("report", "Summarize results files");
  std::vector<std::string> report_in;
  std::string report_out, report_plot;
  report->add_option("results", report_in, "Results CSV files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Summary CSV (default stdout)");
  report->add_option("--plot", report_plot, "Distance-over-time PNG");

  CLI11_PARSE(app, argc, argv);

  try {
    ConfigPtr config = make_config(globals);

    if (*dump) {
      char* raw = nullptr;
      check(omniloc_config_to_json(config.get(), &raw));
      StringPtr text(raw);
      write_or_print(dump_out, text.get());
    } else if (*partition) {
      if (part_seed < 0) part_seed = static_cast<long long>(number(config.get(), "partition.seed"));
      omniloc_layout* raw = nullptr;
      check(omniloc_layout_solve(config.get(), part_n, part_seed, &raw));
      LayoutPtr layout(raw);
      check(omniloc_layout_save(layout.get(), part_out.c_str()));
      std::fprintf(stderr, "n=%d theta=%.3f deg -> %s\n", omniloc_layout_size(layout.get()),
                   omniloc_layout_theta_deg(layout.get()), part_out.c_str());
    } else if (*sweep) {
      int best = 0;
      char* raw = nullptr;
      if (!sweep_set.empty()) {
        check(omniloc_select(config.get(), sweep_set.data(), sweep_set.size(), &best, &raw));
      } else {
        const int lo = sweep_min > 0 ? sweep_min : static_cast<int>(number(config.get(), "partition.sweep_min"));
        const int hi = sweep_max > 0 ? sweep_max : static_cast<int>(number(config.get(), "partition.sweep_max"));
        check(omniloc_sweep(config.get(), lo, hi, &best, &raw));
      }
      StringPtr table(raw);
      write_or_print(sweep_out, table.get());
      std::fprintf(stderr, "best n = %d\n", best);
    } else if (*rectify) {
      LayoutPtr layout = load_layout(rect_layout);
      omniloc_image* raw = nullptr;
      check(omniloc_image_load(rect_in.c_str(), &raw));
      ImagePtr frame(raw);
      int written = 0;
      check(omniloc_rectify_to_dir(config.get(), layout.get(), frame.get(), rect_side, rect_dir.c_str(), &written));
      std::fprintf(stderr, "wrote %d tiles to %s\n", written, rect_dir.c_str());
    } else if (*marker) {
      if (marker_out.empty()) marker_out = "marker_" + std::to_string(marker_id) + ".png";
      check(omniloc_marker_write(marker_id, marker_px, marker_out.c_str()));
    } else if (*simulate) {
      std::ostringstream patch;
      patch << "{\"simulation\":{\"trajectory\":{";
      bool comma = false;
      if (!sim_kind.empty()) {
        patch << "\"kind\":" << json_string(sim_kind);
        comma = true;
      }
      if (sim_duration >= 0.0) patch << (comma ? "," : "") << "\"duration_s\":" << sim_duration;
      patch << "}";
      if (sim_seed >= 0) patch << ",\"geometric\":{\"seed\":" << sim_seed << "}";
      patch << "}}";
      merge(config.get(), patch.str());
      int frames = 0;
      check(omniloc_simulate(config.get(), sim_dir.c_str(), sim_frames ? 1 : 0, &frames));
      std::fprintf(stderr, "%d frames -> %s\n", frames, sim_dir.c_str());
    } else if (*track) {
      std::vector<std::string> sim;
      if (track_offline) sim.push_back("\"realtime\":false");
      if (!track_algo.empty()) sim.push_back("\"algorithm\":" + json_string(track_algo));
      if (!track_detector.empty()) sim.push_back("\"detector\":" + json_string(track_detector));
      std::string patch = "{\"simulation\":{";
      for (std::size_t i = 0; i < sim.size(); ++i) patch += (i ? "," : "") + sim[i];
      patch += "}";
      if (track_budget >= 0) patch += ",\"tracker\":{\"budget\":" + std::to_string(track_budget) + "}";
      merge(config.get(), patch + "}");
      LayoutPtr layout = load_layout(track_layout);
      omniloc_track_summary s{};
      check(omniloc_track(config.get(), layout.get(), track_feed.c_str(), track_out.c_str(), &s));
      std::fprintf(stderr,
                   "frames=%d processed=%d localizations=%d mean_abs_error=%.2f cm mean_calls=%.2f -> %s\n",
                   s.feed_frames, s.processed_frames, s.localizations, s.mean_abs_distance_error_m * 100.0,
                   s.mean_detector_calls, track_out.c_str());
    } else if (*report) {
      std::vector<const char*> paths;
      for (const auto& p : report_in) paths.push_back(p.c_str());
      char* raw = nullptr;
      const bool to_stdout = report_out.empty() || report_out == "-";
      check(omniloc_report(paths.data(), paths.size(), to_stdout ? nullptr : report_out.c_str(),
                           report_plot.empty() ? nullptr : report_plot.c_str(), &raw));
      StringPtr table(raw);
      if (to_stdout) std::fputs(table.get(), stdout);
    }
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
