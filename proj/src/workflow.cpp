#include "omniloc/workflow.hpp"

#include "omniloc/parallel.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace omniloc {

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string frame_path(const std::string& dir, int frame) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%05d.png", frame);
  return (fs::path(dir) / "frames" / name).string();
}

// The simulation part of a config travels through feed.json; reuse the config
// serializer by embedding it in an otherwise default Config.
std::string feed_json(const Config& config, bool has_frames) {
  json j = json::parse(config_to_json(config));
  json out;
  out["simulation"] = j.at("simulation");
  out["body"] = j.at("body");
  out["frames"] = has_frames;
  return out.dump(2) + "\n";
}

}  // namespace

SweepResult sweep_set(const Config& config, const std::vector<int>& ns) {
  if (ns.empty()) throw std::invalid_argument("sweep: no N to evaluate");
  for (int n : ns) {
    if (n < 2) throw std::invalid_argument("sweep: every N must be >= 2");
  }
  const auto& p = config.partition;
  std::vector<NCandidate> candidates(ns.size());
  parallel_for(0, static_cast<int>(ns.size()), [&](int i) {
    candidates[i] = {ns[i], solve_layout(ns[i], p.seed, p.solver).theta_deg};
  });
  const Selection sel = select_n(candidates, p.source_height, p.source_width, p.weights, p.printed_pixel_form);
  SweepResult out;
  out.best_n = sel.best_n;
  for (const auto& row : sel.table) {
    out.rows.push_back({row.n, row.theta_deg, row.pixel_count, row.distortion, row.total});
  }
  return out;
}

SweepResult sweep_n(const Config& config, int n_min, int n_max) {
  if (n_min < 2 || n_max < n_min) throw std::invalid_argument("sweep: need 2 <= n_min <= n_max");
  std::vector<int> ns;
  for (int n = n_min; n <= n_max; ++n) ns.push_back(n);
  return sweep_set(config, ns);
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = "n,theta_deg,pixel_count,distortion,total,selected\n";
  for (const auto& r : sweep.rows) {
    out += std::to_string(r.n) + "," + fmt("%.6f", r.theta_deg) + "," + fmt("%.1f", r.pixel_count) + "," +
           fmt("%.6f", r.distortion) + "," + fmt("%.6f", r.total) + "," + (r.n == sweep.best_n ? "1" : "0") + "\n";
  }
  return out;
}

int export_tiles(const Config& config, const PartitionLayout& layout, const EquirectImage& frame,
                 const std::string& out_dir) {
  fs::create_directories(out_dir);
  const int n = static_cast<int>(layout.size());
  parallel_for(0, n, [&](int i) {
    const RectifiedView view = rectify_partition(frame, layout.centers[i], layout.theta_deg, config.rectify.tile_side,
                                                 i, config.rectify.interpolation);
    write_png(view.image, (fs::path(out_dir) / ("part_" + std::to_string(i) + ".png")).string());
  });
  return n;
}

int simulate_feed(const Config& config, const std::string& out_dir, bool write_frames) {
  config.validate();
  fs::create_directories(out_dir);
  const auto truth = feed_truth(config.simulation.trajectory);
  write_text((fs::path(out_dir) / "truth.csv").string(), truth_csv(truth));
  if (write_frames) {
    fs::create_directories(fs::path(out_dir) / "frames");
    const BodyModel body = default_body_model(config.body.marker_side_m, config.body.edge_m);
    const MarkerDictionary& dict = MarkerDictionary::standard();
    parallel_for(0, static_cast<int>(truth.size()), [&](int i) {
      const EquirectImage frame = render_frame(truth[i].pose, body, dict, config.simulation.render);
      write_png(frame.pixels(), frame_path(out_dir, truth[i].frame));
    });
  }
  write_text((fs::path(out_dir) / "feed.json").string(), feed_json(config, write_frames));
  return static_cast<int>(truth.size());
}

Feed load_feed(const std::string& dir) {
  const json j = json::parse(read_text((fs::path(dir) / "feed.json").string()));
  json wrapped;
  wrapped["simulation"] = j.at("simulation");
  wrapped["body"] = j.at("body");
  const Config c = config_from_json(wrapped.dump());
  Feed feed;
  feed.simulation = c.simulation;
  feed.body = c.body;
  feed.has_frames = j.value("frames", false);
  feed.dir = dir;
  return feed;
}

Feed resolve_feed(const Config& config, const std::string& spec, const std::string& scratch_dir) {
  if (fs::is_directory(spec)) return load_feed(spec);
  Config gen = config;
  try {
    gen.simulation.trajectory.kind = trajectory_kind_from_string(spec);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("feed '" + spec + "' is neither a directory nor a trajectory kind");
  }
  simulate_feed(gen, scratch_dir, false);
  return load_feed(scratch_dir);
}

TrackRun track_feed(const Config& config, const PartitionLayout& layout, const Feed& feed,
                    const std::string& results_path) {
  Config run = config;
  // The scene is fixed by the feed; search and cost settings by the caller.
  run.simulation.trajectory = feed.simulation.trajectory;
  run.simulation.render = feed.simulation.render;
  run.simulation.geometric = feed.simulation.geometric;
  run.body = feed.body;
  const ExperimentConfig exp = run.experiment();

  FrameSource frames;
  if (feed.has_frames && exp.detector == DetectorKind::Image) {
    const std::string dir = feed.dir;
    frames = [dir](const TruthRow& row) { return EquirectImage(read_png(frame_path(dir, row.frame))); };
  }
  TrackRun out;
  out.report = run_experiment(exp, layout, frames);

  const fs::path results(results_path);
  if (results.has_parent_path()) fs::create_directories(results.parent_path());
  write_text(results_path, results_csv(out.report.records));

  const ExperimentSummary& s = out.report.summary;
  json meta;
  meta["feed"] = fs::absolute(feed.dir).lexically_normal().string();
  meta["layout"] = json::parse(layout_to_json(layout));
  meta["algorithm"] = to_string(exp.algorithm);
  meta["budget"] = exp.tracker.budget;
  meta["staleness_horizon"] = exp.tracker.staleness_horizon;
  meta["resume_scans"] = exp.tracker.resume_scans;
  meta["detector"] = to_string(exp.detector);
  meta["realtime"] = exp.realtime;
  meta["error_reference"] = to_string(exp.realtime ? exp.error_reference : ErrorReference::Capture);
  meta["tile_side"] = exp.tile_side;
  meta["rate_hz"] = exp.trajectory.rate_hz;
  meta["summary"] = {{"feed_frames", s.feed_frames},
                     {"processed_frames", s.processed_frames},
                     {"localizations", s.localizations},
                     {"mean_abs_distance_error_m", s.mean_abs_distance_error_m},
                     {"mean_detector_calls", s.mean_detector_calls},
                     {"pixels_processed", s.pixels_processed}};
  out.meta_json = meta.dump(2) + "\n";
  write_text(results_path + ".meta.json", out.meta_json);
  return out;
}

namespace {

struct LoadedRun {
  json meta;
  PartitionLayout layout;
  std::vector<FrameRecord> records;
  std::vector<TruthRow> truth;
  Feed feed;
};

LoadedRun load_run(const std::string& results_path) {
  LoadedRun run;
  run.meta = json::parse(read_text(results_path + ".meta.json"));
  run.layout = layout_from_json(run.meta.at("layout").dump());
  run.records = parse_results_csv(read_text(results_path));
  const std::string feed_dir = run.meta.at("feed").get<std::string>();
  run.truth = parse_truth_csv(read_text((fs::path(feed_dir) / "truth.csv").string()));
  run.feed = load_feed(feed_dir);
  return run;
}

}  // namespace

std::vector<ReportRow> build_report(const std::vector<std::string>& results_paths) {
  std::vector<ReportRow> rows;
  for (const auto& path : results_paths) {
    const LoadedRun run = load_run(path);
    ReportRow row;
    row.label = fs::path(path).stem().string();
    row.n = static_cast<int>(run.layout.size());
    row.algorithm = run.meta.at("algorithm").get<std::string>();
    row.budget = run.meta.at("budget").get<int>();
    // Frame timestamps are whole frames over the rate, so the rounded truth
    // file is enough to re-score.
    row.summary = summarize(run.records, run.truth, run.meta.at("rate_hz").get<double>(),
                            error_reference_from_string(run.meta.at("error_reference").get<std::string>()), row.n,
                            run.meta.at("tile_side").get<int>());

    const BodyModel body = default_body_model(run.feed.body.marker_side_m, run.feed.body.edge_m);
    std::vector<ViewGeometry> views;
    for (const auto& c : run.layout.centers) {
      views.push_back(ViewGeometry{c, run.layout.theta_deg, run.meta.at("tile_side").get<int>()});
    }
    const auto exact = feed_truth(run.feed.simulation.trajectory);
    for (const auto& t : exact) {
      for (std::size_t p = 0; p < views.size(); ++p) {
        if (!geometric_detect(t.pose, views[p], run.feed.simulation.geometric, body, t.frame, static_cast<int>(p))
                 .empty()) {
          ++row.available_frames;
          break;
        }
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out =
      "label,n,algorithm,budget,feed_frames,available_frames,processed_frames,localizations,recorded_pct,"
      "mean_abs_distance_error_cm,mean_detector_calls,pixels_processed\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    const double pct = r.available_frames > 0 ? 100.0 * s.localizations / r.available_frames : 0.0;
    out += r.label + "," + std::to_string(r.n) + "," + r.algorithm + "," + std::to_string(r.budget) + "," +
           std::to_string(s.feed_frames) + "," + std::to_string(r.available_frames) + "," +
           std::to_string(s.processed_frames) + "," + std::to_string(s.localizations) + "," + fmt("%.1f", pct) + "," +
           fmt("%.3f", s.mean_abs_distance_error_m * 100.0) + "," + fmt("%.3f", s.mean_detector_calls) + "," +
           fmt("%.0f", s.pixels_processed) + "\n";
  }
  return out;
}

namespace {

void draw_line(Image& img, int x0, int y0, int x1, int y1, Rgb c) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    if (x0 >= 0 && y0 >= 0 && x0 < img.width() && y0 < img.height()) img.set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_dot(Image& img, int x, int y, Rgb c) {
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int u = x + dx;
      const int v = y + dy;
      if (u >= 0 && v >= 0 && u < img.width() && v < img.height()) img.set(u, v, c);
    }
  }
}

}  // namespace

Image plot_distance(const std::vector<std::string>& results_paths, int width, int height) {
  if (results_paths.empty()) throw std::invalid_argument("plot_distance: no results");
  if (width < 100 || height < 100) throw std::invalid_argument("plot_distance: plot must be at least 100x100");
  std::vector<LoadedRun> runs;
  for (const auto& p : results_paths) runs.push_back(load_run(p));

  const auto& truth = runs.front().truth;
  double t_max = 1e-9;
  double d_max = 1e-9;
  for (const auto& r : truth) {
    t_max = std::max(t_max, r.t);
    d_max = std::max(d_max, r.pose.translation.norm());
  }
  for (const auto& run : runs) {
    for (const auto& rec : run.records) {
      if (rec.marker_count > 0) d_max = std::max(d_max, rec.estimate.translation.norm());
    }
  }
  d_max *= 1.1;

  const int left = 50, right = 20, top = 20, bottom = 40;
  const int pw = width - left - right;
  const int ph = height - top - bottom;
  auto px = [&](double t) { return left + static_cast<int>(std::lround(t / t_max * (pw - 1))); };
  auto py = [&](double d) { return top + ph - 1 - static_cast<int>(std::lround(d / d_max * (ph - 1))); };

  Image img(width, height, {255, 255, 255});
  const Rgb axis{60, 60, 60};
  const Rgb grid{225, 225, 225};
  for (int k = 1; k <= 4; ++k) {
    const int y = py(d_max * k / 5.0);
    draw_line(img, left, y, left + pw - 1, y, grid);
  }
  draw_line(img, left, top, left, top + ph - 1, axis);
  draw_line(img, left, top + ph - 1, left + pw - 1, top + ph - 1, axis);

  for (std::size_t i = 1; i < truth.size(); ++i) {
    draw_line(img, px(truth[i - 1].t), py(truth[i - 1].pose.translation.norm()), px(truth[i].t),
              py(truth[i].pose.translation.norm()), {0, 0, 0});
  }
  const Rgb palette[] = {{214, 39, 40}, {31, 119, 180}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}};
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const double rate = runs[k].meta.at("rate_hz").get<double>();
    for (const auto& rec : runs[k].records) {
      if (rec.marker_count == 0) continue;
      draw_dot(img, px(rec.frame / rate), py(rec.estimate.translation.norm()), palette[k % 5]);
    }
  }
  return img;
}

}  // namespace omniloc
