#include "omniloc/partition.hpp"

#include "omniloc/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace omniloc {

namespace {

struct ClosestPair {
  int i = -1;
  int j = -1;
  double distance = std::numeric_limits<double>::infinity();
};

ClosestPair closest_pair(const std::vector<Vec3>& pts) {
  ClosestPair best;
  double best_dot = -2.0;
  const int n = static_cast<int>(pts.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = pts[i].dot(pts[j]);
      if (d > best_dot) {
        best_dot = d;
        best.i = i;
        best.j = j;
      }
    }
  }
  if (best.i >= 0) {
    const Vec3& a = pts[best.i];
    const Vec3& b = pts[best.j];
    best.distance = std::atan2(a.cross(b).norm(), a.dot(b));
  }
  return best;
}

// Upper bound on the Tammes separation for n points; the repulsion target.
double separation_target(int n) {
  if (n <= 2) return kPi;
  const double omega = static_cast<double>(n) / (n - 2) * kPi / 6.0;
  const double cot = 1.0 / std::tan(omega);
  return std::acos(std::clamp((cot * cot - 1.0) / 2.0, -1.0, 1.0));
}

Vec3 rotate_about(const Vec3& p, const Vec3& axis, double angle) {
  return (Eigen::AngleAxisd(angle, axis) * p).normalized();
}

// Projected gradient descent on the Riesz s-energy sum 1/|p_i - p_j|^s,
// run as a continuation over increasing exponents. Spreads a random start
// into a near-uniform configuration before the closest-pair refinement.
void relax_energy(std::vector<Vec3>& pts, const SolverConfig& cfg) {
  const int n = static_cast<int>(pts.size());
  std::vector<Vec3> grad(n);
  for (double s = cfg.energy_exponent; s <= cfg.energy_exponent_max; s *= 2.0) {
    double step = 0.5 * std::sqrt(4.0 * kPi / n);
    for (int it = 0; it < cfg.energy_iterations; ++it) {
      std::fill(grad.begin(), grad.end(), Vec3::Zero());
      double min_r2 = 4.0;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          min_r2 = std::min(min_r2, (pts[i] - pts[j]).squaredNorm());
        }
      }
      min_r2 = std::max(min_r2, 1e-24);
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          const Vec3 diff = pts[i] - pts[j];
          // Scaled by the closest pair so large exponents stay in range.
          const double r2 = std::max(diff.squaredNorm(), 1e-24) / min_r2;
          const Vec3 f = diff * std::pow(r2, -(s + 2.0) / 2.0);
          grad[i] += f;
          grad[j] -= f;
        }
      }
      double max_norm = 0.0;
      for (int i = 0; i < n; ++i) {
        grad[i] -= grad[i].dot(pts[i]) * pts[i];
        max_norm = std::max(max_norm, grad[i].norm());
      }
      if (!(max_norm > 0.0)) break;
      for (int i = 0; i < n; ++i) pts[i] = (pts[i] + (step / max_norm) * grad[i]).normalized();
      step *= cfg.energy_decay;
    }
  }
}

struct RestartResult {
  std::vector<Vec3> points;
  double min_distance = 0.0;
};

RestartResult run_restart(int n, std::int64_t seed, int restart, const SolverConfig& cfg) {
  Rng rng({static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(restart)});
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (int k = 0; k < n; ++k) pts.push_back(rng.direction().vec());

  RestartResult result;
  if (n == 1) {
    result.points = pts;
    result.min_distance = std::numeric_limits<double>::infinity();
    return result;
  }

  relax_energy(pts, cfg);

  const double target = separation_target(n);
  ClosestPair cp = closest_pair(pts);
  std::vector<Vec3> best_pts = pts;
  double best = cp.distance;
  double reference = best;
  double scale = 1.0;
  int since_reference = 0;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    Vec3 axis = pts[cp.i].cross(pts[cp.j]);
    const double step = scale * cfg.eta * (target - cp.distance);
    if (axis.norm() > 1e-15 && step > 0.0) {
      axis.normalize();
      pts[cp.i] = rotate_about(pts[cp.i], axis, -step);
      pts[cp.j] = rotate_about(pts[cp.j], axis, step);
    }
    cp = closest_pair(pts);
    if (cp.distance > best) {
      best = cp.distance;
      best_pts = pts;
    }

    if (++since_reference >= cfg.patience) {
      if (best - reference < cfg.tolerance) {
        if (scale <= cfg.min_step_scale) {
          result.points = std::move(best_pts);
          result.min_distance = best;
          return result;
        }
        // Stalled: restart from the best configuration with a finer step.
        scale *= 0.5;
        pts = best_pts;
        cp = closest_pair(pts);
      }
      reference = best;
      since_reference = 0;
    }
  }
  throw SolverError("solve_layout: no convergence within the iteration budget of " +
                    std::to_string(cfg.max_iterations) + " iterations (n=" + std::to_string(n) +
                    ", restart " + std::to_string(restart) + ")");
}

// Spherical circumcenter of three points on the side nearest `hint`.
bool circumcenter(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& hint, Vec3& out) {
  Vec3 nrm = (b - a).cross(c - a);
  const double len = nrm.norm();
  if (!(len > 1e-14)) return false;
  nrm /= len;
  out = nrm.dot(hint) >= 0.0 ? nrm : Vec3(-nrm);
  return true;
}

// Largest dot product to any center, i.e. cos of the distance to the nearest.
double nearest_dot(const std::vector<Vec3>& centers, const Vec3& p) {
  double best = -2.0;
  for (const Vec3& c : centers) best = std::max(best, c.dot(p));
  return best;
}

double depth(const std::vector<Vec3>& centers, const Vec3& p) {
  return std::acos(std::clamp(nearest_dot(centers, p), -1.0, 1.0));
}

const std::vector<Direction>& cached_lattice(std::size_t count) {
  static const std::size_t default_count = SolverConfig{}.coverage_samples;
  static const std::vector<Direction> lattice = fibonacci_sphere(default_count);
  if (count == default_count) return lattice;
  thread_local std::size_t cached_count = 0;
  thread_local std::vector<Direction> cached;
  if (cached_count != count) {
    cached = fibonacci_sphere(count);
    cached_count = count;
  }
  return cached;
}

// Hill-climb from `start` to a local maximum of depth, then snap onto the
// Voronoi vertex formed by the three nearest centers when that vertex is valid.
double refine_hole(const std::vector<Vec3>& centers, Vec3 p, double step, int iterations) {
  double d = depth(centers, p);
  for (int it = 0; it < iterations; ++it) {
    Vec3 t1 = p.unitOrthogonal();
    Vec3 t2 = p.cross(t1);
    bool moved = false;
    for (int k = 0; k < 8; ++k) {
      const double ang = k * kPi / 4.0;
      const Vec3 cand = (p + step * (std::cos(ang) * t1 + std::sin(ang) * t2)).normalized();
      const double dc = depth(centers, cand);
      if (dc > d) {
        d = dc;
        p = cand;
        moved = true;
      }
    }
    if (!moved) step *= 0.5;
  }

  // Three nearest centers.
  std::array<int, 3> idx{-1, -1, -1};
  std::array<double, 3> dots{-3.0, -3.0, -3.0};
  for (int k = 0; k < static_cast<int>(centers.size()); ++k) {
    const double dk = centers[k].dot(p);
    for (int s = 0; s < 3; ++s) {
      if (dk > dots[s]) {
        for (int m = 2; m > s; --m) {
          dots[m] = dots[m - 1];
          idx[m] = idx[m - 1];
        }
        dots[s] = dk;
        idx[s] = k;
        break;
      }
    }
  }
  Vec3 vertex;
  if (idx[2] >= 0 && circumcenter(centers[idx[0]], centers[idx[1]], centers[idx[2]], p, vertex)) {
    const double vd = std::acos(std::clamp(centers[idx[0]].dot(vertex), -1.0, 1.0));
    // Valid only if no other center is closer than the three defining ones.
    if (nearest_dot(centers, vertex) <= centers[idx[0]].dot(vertex) + 1e-12 &&
        (vertex - p).norm() < 4.0 * step + 0.05) {
      d = std::max(d, vd);
    }
  }
  return d;
}

}  // namespace

double min_pairwise_distance(const std::vector<Direction>& centers) {
  std::vector<Vec3> pts;
  pts.reserve(centers.size());
  for (const auto& c : centers) pts.push_back(c.vec());
  return closest_pair(pts).distance;
}

double covering_angle(const std::vector<Direction>& centers, const SolverConfig& config) {
  if (centers.empty()) {
    throw std::invalid_argument("covering_angle: at least one center required");
  }
  if (centers.size() == 1) return 360.0;
  std::vector<Vec3> pts;
  pts.reserve(centers.size());
  for (const auto& c : centers) pts.push_back(c.vec());
  if (pts.size() == 2) {
    const double sep = std::atan2(pts[0].cross(pts[1]).norm(), pts[0].dot(pts[1]));
    return 2.0 * (kPi - sep / 2.0) * kRadToDeg;
  }

  const auto& lattice = cached_lattice(static_cast<std::size_t>(std::max(1000, config.coverage_samples)));
  // Keep the deepest few samples; distinct holes are refined independently.
  constexpr std::size_t kCandidates = 48;
  std::vector<std::pair<double, std::size_t>> worst;
  worst.reserve(kCandidates + 1);
  for (std::size_t s = 0; s < lattice.size(); ++s) {
    const double nd = nearest_dot(pts, lattice[s].vec());
    if (worst.size() < kCandidates || nd < worst.back().first) {
      auto it = std::upper_bound(worst.begin(), worst.end(), std::make_pair(nd, s));
      worst.insert(it, {nd, s});
      if (worst.size() > kCandidates) worst.pop_back();
    }
  }
  const double spacing = std::sqrt(4.0 * kPi / static_cast<double>(lattice.size()));
  double radius = 0.0;
  for (const auto& [nd, s] : worst) {
    radius = std::max(radius, refine_hole(pts, lattice[s].vec(), spacing, config.refine_iterations));
  }
  return 2.0 * radius * kRadToDeg;
}

PartitionLayout solve_layout(int n, std::int64_t seed, const SolverConfig& config) {
  if (n < 1) {
    throw std::invalid_argument("solve_layout: n must be >= 1");
  }
  if (config.restarts < 1) {
    throw std::invalid_argument("solve_layout: restarts must be >= 1");
  }
  RestartResult best;
  best.min_distance = -1.0;
  for (int r = 0; r < config.restarts; ++r) {
    RestartResult res = run_restart(n, seed, r, config);
    if (res.min_distance > best.min_distance) best = std::move(res);
  }
  PartitionLayout layout;
  layout.seed = seed;
  for (const Vec3& p : best.points) layout.centers.emplace_back(p);
  layout.theta_deg = covering_angle(layout.centers, config);
  return layout;
}

void CostWeights::validate() const {
  const double sum = n + pixels + distortion;
  if (!(n > 0.0 && pixels > 0.0 && distortion > 0.0)) {
    throw std::invalid_argument("cost weights must all be positive");
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("cost weights must sum to 1");
  }
  if (n < 5.0 * pixels) {
    throw std::invalid_argument("cost weights must satisfy alpha_N >= 5 * alpha_p");
  }
}

double pixel_cost(int n, double theta_deg, int h, int w, bool printed_form) {
  if (h < 1 || w < 1 || n < 1 || !(theta_deg > 0.0)) {
    throw std::invalid_argument("pixel_cost: invalid arguments");
  }
  const double ratio = printed_form ? 360.0 / theta_deg : theta_deg / 360.0;
  return static_cast<double>(n) * ratio * ratio * static_cast<double>(h) * static_cast<double>(w);
}

double pixel_cost(const PartitionLayout& layout, int h, int w, bool printed_form) {
  return pixel_cost(static_cast<int>(layout.size()), layout.theta_deg, h, w, printed_form);
}

double distortion_metric(double theta_deg) {
  if (!(theta_deg > 0.0)) {
    throw std::invalid_argument("distortion_metric: theta must be positive");
  }
  if (theta_deg >= 180.0) return std::numeric_limits<double>::infinity();
  const double psi = std::atan(std::sqrt(2.0) * std::tan(theta_deg * kDegToRad / 2.0));
  const double sec = 1.0 / std::cos(psi);
  return sec * sec * sec - 1.0;
}

Selection select_n(const std::vector<NCandidate>& candidates, int h, int w,
                   const CostWeights& weights, bool printed_form) {
  if (candidates.empty()) {
    throw std::invalid_argument("select_n: empty candidate list");
  }
  weights.validate();
  Selection sel;
  for (const auto& c : candidates) {
    CostBreakdown row;
    row.n = c.n;
    row.theta_deg = c.theta_deg;
    row.n_term = static_cast<double>(c.n);
    row.pixel_count = pixel_cost(c.n, c.theta_deg, h, w, printed_form);
    row.distortion = distortion_metric(c.theta_deg);
    row.weights = weights;
    sel.table.push_back(row);
  }
  auto normalizer = [&](auto field) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& r : sel.table) {
      lo = std::min(lo, r.*field);
      hi = std::max(hi, r.*field);
    }
    return [lo, hi](double v) {
      if (!(hi > lo)) return 0.0;
      if (std::isinf(v)) return 1.0;
      return (v - lo) / (hi - lo);
    };
  };
  const auto norm_n = normalizer(&CostBreakdown::n_term);
  const auto norm_p = normalizer(&CostBreakdown::pixel_count);
  const auto norm_d = normalizer(&CostBreakdown::distortion);

  double best = std::numeric_limits<double>::infinity();
  for (auto& r : sel.table) {
    r.total = weights.n * norm_n(r.n_term) + weights.pixels * norm_p(r.pixel_count) +
              weights.distortion * norm_d(r.distortion);
    if (r.total < best || (r.total == best && r.n < sel.best_n)) {
      best = r.total;
      sel.best_n = r.n;
    }
  }
  return sel;
}

std::string layout_to_json(const PartitionLayout& layout) {
  // Hand-formatted so numbers carry exactly 9 significant digits.
  auto num = [](double v) {
    std::ostringstream os;
    os << std::setprecision(9) << v;
    return os.str();
  };
  std::ostringstream out;
  out << "{\n  \"n\": " << layout.size() << ",\n  \"theta_deg\": " << num(layout.theta_deg)
      << ",\n  \"seed\": " << layout.seed << ",\n  \"centers\": [";
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const GeoCoord g = dir_to_geo(layout.centers[i]);
    out << (i ? ",\n" : "\n") << "    {\"lat_deg\": " << num(g.lat * kRadToDeg)
        << ", \"lon_deg\": " << num(g.lon * kRadToDeg) << "}";
  }
  out << "\n  ]\n}\n";
  return out.str();
}

PartitionLayout layout_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  PartitionLayout layout;
  layout.theta_deg = j.at("theta_deg").get<double>();
  layout.seed = j.value("seed", std::int64_t{0});
  for (const auto& c : j.at("centers")) {
    GeoCoord g{c.at("lat_deg").get<double>() * kDegToRad, c.at("lon_deg").get<double>() * kDegToRad};
    layout.centers.push_back(geo_to_dir(g));
  }
  const auto n = j.at("n").get<std::size_t>();
  if (n != layout.size() || n == 0) {
    throw std::invalid_argument("layout: 'n' does not match the number of centers");
  }
  if (!(layout.theta_deg > 0.0 && layout.theta_deg <= 360.0)) {
    throw std::invalid_argument("layout: theta_deg must lie in (0, 360]");
  }
  return layout;
}

void save_layout(const PartitionLayout& layout, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write layout file: " + path);
  f << layout_to_json(layout);
}

PartitionLayout load_layout(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read layout file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return layout_from_json(ss.str());
}

}  // namespace omniloc
