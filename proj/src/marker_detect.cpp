#include "omniloc/fiducial.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace omniloc {

namespace {

using Vec2 = Eigen::Vector2d;
using Quad = std::array<Vec2, 4>;

struct Component {
  std::vector<Vec2> boundary;
  int min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  int pixels = 0;
};

std::vector<std::uint8_t> dark_mask(const GrayImage& g, const DetectorConfig& cfg) {
  const int w = g.width;
  const int h = g.height;
  std::vector<double> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  auto ii = [&](int x, int y) -> double& { return integral[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += g.at(x, y);
      ii(x + 1, y + 1) = ii(x + 1, y) + row;
    }
  }
  int win = static_cast<int>(std::lround(cfg.window_fraction * std::max(w, h)));
  win = std::max(7, win | 1);
  const int r = win / 2;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h, y + r + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w, x + r + 1);
      const double sum = ii(x1, y1) - ii(x0, y1) - ii(x1, y0) + ii(x0, y0);
      const double mean = sum / ((x1 - x0) * (y1 - y0));
      const double v = g.at(x, y);
      if (v < cfg.threshold_ratio * mean && mean - v >= cfg.min_contrast) {
        mask[static_cast<std::size_t>(y) * w + x] = 1;
      }
    }
  }
  return mask;
}

std::vector<Component> components(const std::vector<std::uint8_t>& mask, int w, int h) {
  std::vector<int> label(mask.size(), -1);
  std::vector<Component> out;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (!mask[start] || label[start] >= 0) continue;
    Component comp;
    comp.min_x = comp.max_x = start % w;
    comp.min_y = comp.max_y = start / w;
    const int id = static_cast<int>(out.size());
    label[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w;
      const int y = p / w;
      ++comp.pixels;
      comp.min_x = std::min(comp.min_x, x);
      comp.max_x = std::max(comp.max_x, x);
      comp.min_y = std::min(comp.min_y, y);
      comp.max_y = std::max(comp.max_y, y);
      bool edge = false;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!dx && !dy) continue;
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) {
            edge = true;
            continue;
          }
          const int q = ny * w + nx;
          if (!mask[q]) {
            edge = true;
            continue;
          }
          if (label[q] < 0) {
            label[q] = id;
            stack.push_back(q);
          }
        }
      }
      if (edge) comp.boundary.emplace_back(x, y);
    }
    out.push_back(std::move(comp));
  }
  return out;
}

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(const std::vector<Vec2>& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2& u = p[i];
    const Vec2& v = p[(i + 1) % p.size()];
    a += u.x() * v.y() - v.x() * u.y();
  }
  return a / 2.0;
}

double line_distance(const Vec2& a, const Vec2& b, const Vec2& p) {
  const double len = (b - a).norm();
  return len > 0.0 ? cross(a, b, p) / len : 0.0;
}

// Four hull points spanning the largest quadrilateral, by alternating
// farthest-point searches.
std::optional<Quad> hull_quad(const std::vector<Vec2>& hull) {
  if (hull.size() < 4) return std::nullopt;
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : hull) centroid += p;
  centroid /= static_cast<double>(hull.size());
  auto farthest_from = [&](const Vec2& q) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < hull.size(); ++i) {
      if ((hull[i] - q).squaredNorm() > (hull[best] - q).squaredNorm()) best = i;
    }
    return hull[best];
  };
  auto extreme_side = [&](const Vec2& a, const Vec2& b, double sign) {
    std::size_t best = 0;
    double best_d = -1e300;
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const double d = sign * line_distance(a, b, hull[i]);
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    return std::make_pair(hull[best], best_d);
  };
  Vec2 c0 = farthest_from(centroid);
  Vec2 c2 = farthest_from(c0);
  Vec2 c1, c3;
  for (int pass = 0; pass < 3; ++pass) {
    const auto s1 = extreme_side(c0, c2, 1.0);
    const auto s3 = extreme_side(c0, c2, -1.0);
    if (s1.second <= 0.0 || s3.second <= 0.0) return std::nullopt;
    c1 = s1.first;
    c3 = s3.first;
    const auto s0 = extreme_side(c1, c3, -1.0);
    const auto s2 = extreme_side(c1, c3, 1.0);
    if (s0.second <= 0.0 || s2.second <= 0.0) return std::nullopt;
    c0 = s0.first;
    c2 = s2.first;
  }
  return Quad{c0, c1, c2, c3};
}

struct Line {
  Vec2 point;
  Vec2 dir;
};

std::optional<Vec2> intersect(const Line& a, const Line& b) {
  const double det = a.dir.x() * b.dir.y() - a.dir.y() * b.dir.x();
  if (std::abs(det) < 1e-9) return std::nullopt;
  const Vec2 d = b.point - a.point;
  const double t = (d.x() * b.dir.y() - d.y() * b.dir.x()) / det;
  return a.point + t * a.dir;
}

std::optional<Line> fit_line(const std::vector<Vec2>& pts) {
  if (pts.size() < 3) return std::nullopt;
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  return Line{mean, eig.eigenvectors().col(1)};
}

// Moves each edge onto the gradient peak along its normal, then intersects
// neighboring edge lines.
Quad refine_corners(const GrayImage& g, const Quad& q) {
  Vec2 center = Vec2::Zero();
  for (const auto& p : q) center += p / 4.0;
  std::array<std::optional<Line>, 4> lines;
  for (int e = 0; e < 4; ++e) {
    const Vec2 a = q[e];
    const Vec2 b = q[(e + 1) % 4];
    const double len = (b - a).norm();
    if (len < 4.0) continue;
    const Vec2 dir = (b - a) / len;
    Vec2 normal(-dir.y(), dir.x());
    if (normal.dot((a + b) / 2.0 - center) < 0.0) normal = -normal;
    const double range = std::clamp(0.8 * len / kCodeCells, 2.0, 8.0);
    const int samples = std::clamp(static_cast<int>(len / 2.0), 8, 64);
    std::vector<Vec2> pts;
    for (int i = 0; i < samples; ++i) {
      const double t = 0.15 + 0.7 * (i + 0.5) / samples;
      const Vec2 base = a + t * (b - a);
      // Centroid of the intensity derivative: unbiased for area-sampled edges,
      // where the raw gradient peak snaps to pixel centers.
      const double step = 0.25;
      const int n = static_cast<int>(range / step);
      std::vector<double> grad(2 * n + 1);
      double prev_i = g.sample((base - (n + 0.5) * step * normal).x(), (base - (n + 0.5) * step * normal).y());
      for (int k = -n; k <= n; ++k) {
        const Vec2 p1 = base + (k + 0.5) * step * normal;
        const double cur = g.sample(p1.x(), p1.y());
        grad[k + n] = (cur - prev_i) / step;
        prev_i = cur;
      }
      int arg = -1;
      double best = 0.0;
      for (int k = 0; k < 2 * n + 1; ++k) {
        if (grad[k] > best) {
          best = grad[k];
          arg = k;
        }
      }
      if (arg < 0 || best < 8.0) continue;
      int lo = arg, hi = arg;
      while (lo > 0 && grad[lo - 1] > 0.0) --lo;
      while (hi < 2 * n && grad[hi + 1] > 0.0) ++hi;
      if (lo == 0 || hi == 2 * n) continue;
      double mass = 0.0, moment = 0.0;
      for (int k = lo; k <= hi; ++k) {
        mass += grad[k];
        moment += grad[k] * (k - n) * step;
      }
      const double best_s = moment / mass;
      pts.push_back(base + best_s * normal);
    }
    auto line = fit_line(pts);
    if (line && pts.size() >= 6) {
      // One pass of outlier rejection.
      const Vec2 nrm(-line->dir.y(), line->dir.x());
      std::vector<Vec2> kept;
      for (const auto& p : pts) {
        if (std::abs((p - line->point).dot(nrm)) < 1.0) kept.push_back(p);
      }
      if (kept.size() >= 3) line = fit_line(kept);
    }
    lines[e] = line;
  }
  Quad out = q;
  for (int i = 0; i < 4; ++i) {
    const auto& before = lines[(i + 3) % 4];
    const auto& after = lines[i];
    if (!before || !after) continue;
    const auto p = intersect(*before, *after);
    if (p && (*p - q[i]).norm() < 4.0) out[i] = *p;
  }
  return out;
}

// Homography from cell coordinates (x = column, y = row, 0..6) to pixels.
Eigen::Matrix3d cell_homography(const Quad& q) {
  const std::array<Vec2, 4> src = {Vec2(0, 0), Vec2(0, 6), Vec2(6, 6), Vec2(6, 0)};
  Eigen::Matrix<double, 8, 9> a;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i].x(), y = src[i].y(), u = q[i].x(), v = q[i].y();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y, -v;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Eigen::Matrix3d m;
  m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  return m;
}

struct CellRead {
  bool ok = false;
  Payload payload = 0;
};

CellRead read_cells(const GrayImage& g, const Quad& q) {
  const Eigen::Matrix3d hm = cell_homography(q);
  std::array<std::array<double, kCodeCells>, kCodeCells> mean{};
  double lo = 1e9, hi = -1e9;
  for (int r = 0; r < kCodeCells; ++r) {
    for (int c = 0; c < kCodeCells; ++c) {
      double sum = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const Eigen::Vector3d p = hm * Eigen::Vector3d(c + 0.5 + 0.2 * dx, r + 0.5 + 0.2 * dy, 1.0);
          sum += g.sample(p.x() / p.z(), p.y() / p.z());
        }
      }
      mean[r][c] = sum / 9.0;
      lo = std::min(lo, mean[r][c]);
      hi = std::max(hi, mean[r][c]);
    }
  }
  CellRead out;
  if (hi - lo < 30.0) return out;
  const double thr = (lo + hi) / 2.0;
  for (int r = 0; r < kCodeCells; ++r) {
    for (int c = 0; c < kCodeCells; ++c) {
      const bool white = mean[r][c] > thr;
      const bool ring = r == 0 || c == 0 || r == kCodeCells - 1 || c == kCodeCells - 1;
      if (ring) {
        if (white) return out;
      } else if (white) {
        out.payload |= static_cast<Payload>(1u << ((r - 1) * kPayloadCells + (c - 1)));
      }
    }
  }
  out.ok = true;
  return out;
}

}  // namespace

std::vector<Detection> detect_markers(const Image& image, const PinholeIntrinsics& intrinsics,
                                      const MarkerDictionary& dictionary, double side_length,
                                      const DetectorConfig& config, int partition_index) {
  std::vector<Detection> out;
  if (image.empty()) return out;
  const GrayImage g = to_gray(image);
  const int w = g.width;
  const int h = g.height;
  const auto mask = dark_mask(g, config);
  const int margin = config.border_margin_px;

  std::vector<double> areas;
  for (const auto& comp : components(mask, w, h)) {
    if (comp.min_x < margin || comp.min_y < margin || comp.max_x >= w - margin ||
        comp.max_y >= h - margin) {
      continue;
    }
    const double extent = std::max(comp.max_x - comp.min_x, comp.max_y - comp.min_y);
    if (extent < config.min_side_px || comp.pixels < 4.0 * config.min_side_px) continue;

    const auto hull = convex_hull(comp.boundary);
    const double hull_area = std::abs(polygon_area(hull));
    auto quad = hull_quad(hull);
    if (!quad) continue;
    std::vector<Vec2> qv(quad->begin(), quad->end());
    double area = polygon_area(qv);
    if (std::abs(area) < 0.8 * hull_area) continue;
    // Counter-clockwise as seen in the image (y down) has a negative shoelace sum.
    if (area > 0.0) std::swap((*quad)[1], (*quad)[3]);
    bool short_side = false;
    for (int i = 0; i < 4; ++i) {
      if (((*quad)[(i + 1) % 4] - (*quad)[i]).norm() < config.min_side_px) short_side = true;
    }
    if (short_side) continue;

    // Hull points are pixel centers on the dark side; start half a pixel out.
    Vec2 center = Vec2::Zero();
    for (const auto& p : *quad) center += p / 4.0;
    for (auto& p : *quad) p += 0.5 * (p - center).normalized() * std::sqrt(2.0);

    const Quad refined = refine_corners(g, refine_corners(g, *quad));
    const CellRead cells = read_cells(g, refined);
    if (!cells.ok) continue;
    const auto match = dictionary.decode(cells.payload, config.max_correction);
    if (!match) continue;

    Detection det;
    det.marker_id = match->id;
    det.partition_index = partition_index;
    for (int i = 0; i < 4; ++i) det.corners[i] = refined[(i + match->rotation) % 4];
    try {
      det.pose = estimate_marker_pose(det.corners, intrinsics, side_length, config.refine_pose);
    } catch (const PoseError&) {
      continue;
    }
    if (!det.pose.translation.allFinite()) continue;

    // Keep the larger of overlapping detections of the same id.
    std::vector<Vec2> cv(det.corners.begin(), det.corners.end());
    const double det_area = std::abs(polygon_area(cv));
    bool replaced = false;
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (out[k].marker_id != det.marker_id) continue;
      Vec2 c0 = Vec2::Zero(), c1 = Vec2::Zero();
      for (int i = 0; i < 4; ++i) {
        c0 += out[k].corners[i] / 4.0;
        c1 += det.corners[i] / 4.0;
      }
      if ((c0 - c1).norm() < std::sqrt(det_area)) {
        if (det_area > areas[k]) {
          out[k] = det;
          areas[k] = det_area;
        }
        replaced = true;
      }
    }
    if (!replaced) {
      out.push_back(det);
      areas.push_back(det_area);
    }
  }
  std::vector<std::size_t> order(out.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (out[a].marker_id != out[b].marker_id) return out[a].marker_id < out[b].marker_id;
    return out[a].corners[0].y() < out[b].corners[0].y() ||
           (out[a].corners[0].y() == out[b].corners[0].y() && out[a].corners[0].x() < out[b].corners[0].x());
  });
  std::vector<Detection> sorted;
  sorted.reserve(out.size());
  for (auto i : order) sorted.push_back(out[i]);
  return sorted;
}

std::vector<Detection> detect_markers(const RectifiedView& view, const PinholeIntrinsics& intrinsics,
                                      const MarkerDictionary& dictionary, double side_length,
                                      const DetectorConfig& config) {
  return detect_markers(view.image, intrinsics, dictionary, side_length, config, view.partition_index);
}

}  // namespace omniloc
