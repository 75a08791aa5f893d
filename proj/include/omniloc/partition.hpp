#pragma once

// Sphere partitioning: N circular caps whose union covers the sphere with as
// little overlap as possible, plus the N-selection cost model.

#include "omniloc/geometry.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace omniloc {

struct SolverConfig {
  /// Fraction of the remaining gap to the target separation moved per step.
  double eta = 0.05;
  /// Convergence: min pairwise distance improves by less than `tolerance`
  /// radians over `patience` consecutive iterations.
  double tolerance = 1e-6;
  int patience = 500;
  /// Step multiplier is halved on every stall; the run ends once a stall
  /// occurs at or below this multiplier.
  double min_step_scale = 1.0 / 1024.0;
  int max_iterations = 200000;
  int restarts = 8;
  /// Riesz-energy pre-relaxation from the random start.
  double energy_exponent = 6.0;
  double energy_exponent_max = 96.0;
  int energy_iterations = 400;
  double energy_decay = 0.99;
  /// Samples and hill-climbing steps used by covering_angle().
  int coverage_samples = 200000;
  int refine_iterations = 20;
};

struct PartitionLayout {
  std::vector<Direction> centers;
  double theta_deg = 360.0;
  std::int64_t seed = 0;

  std::size_t size() const { return centers.size(); }
};

struct CostWeights {
  double n = 0.60;
  double pixels = 0.05;
  double distortion = 0.35;

  /// Throws std::invalid_argument unless sum == 1, all > 0, n >= 5 * pixels.
  void validate() const;
};

struct CostBreakdown {
  int n = 0;
  double theta_deg = 0.0;
  double n_term = 0.0;
  double pixel_count = 0.0;
  double distortion = 0.0;
  CostWeights weights;
  double total = 0.0;
};

struct Selection {
  int best_n = 0;
  std::vector<CostBreakdown> table;
};

class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Iterative closest-pair repulsion from random starts. Deterministic for a
/// given (n, seed, config). Throws SolverError when a restart exhausts its
/// iteration budget without meeting the convergence test.
PartitionLayout solve_layout(int n, std::int64_t seed, const SolverConfig& config = {});

/// Smallest cap diameter (degrees) such that caps at `centers` cover S^2.
double covering_angle(const std::vector<Direction>& centers, const SolverConfig& config = {});

/// Smallest pairwise angular distance, radians. +inf for fewer than 2 points.
double min_pairwise_distance(const std::vector<Direction>& centers);

/// Source pixels touched when every cap is rectified independently:
/// N * (theta/360)^2 * h * w. With `printed_form` the reciprocal ratio
/// N * (360/theta)^2 * h * w is returned instead, for comparison only.
double pixel_cost(const PartitionLayout& layout, int h, int w, bool printed_form = false);
double pixel_cost(int n, double theta_deg, int h, int w, bool printed_form = false);

/// Corner solid-angle magnification of a square gnomonic tile with pan = tilt
/// = theta: sec^3(psi) - 1, psi = atan(sqrt(2) tan(theta/2)). +inf for theta >= 180.
double distortion_metric(double theta_deg);

struct NCandidate {
  int n = 0;
  double theta_deg = 0.0;
};

/// Min-max normalizes N, p and d over the candidates, weights them and returns
/// the argmin (ties toward smaller N) with the full table.
Selection select_n(const std::vector<NCandidate>& candidates, int h, int w,
                   const CostWeights& weights = {}, bool printed_form = false);

// Layout file (JSON, 9 significant digits).
std::string layout_to_json(const PartitionLayout& layout);
PartitionLayout layout_from_json(const std::string& text);
void save_layout(const PartitionLayout& layout, const std::string& path);
PartitionLayout load_layout(const std::string& path);

}  // namespace omniloc
