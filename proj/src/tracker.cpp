#include "omniloc/tracker.hpp"

#include "omniloc/rectifier.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace omniloc {

NeighborOrder precompute_neighbor_order(const PartitionLayout& layout) {
  const int n = static_cast<int>(layout.size());
  NeighborOrder order(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> dist(n);
    for (int j = 0; j < n; ++j) dist[j] = j == i ? -1.0 : angular_distance(layout.centers[i], layout.centers[j]);
    auto& row = order[i];
    row.resize(n);
    std::iota(row.begin(), row.end(), 0);
    std::stable_sort(row.begin(), row.end(), [&](int a, int b) { return dist[a] < dist[b]; });
  }
  return order;
}

TrackerState::TrackerState(PartitionLayout layout, TrackerOptions options, std::optional<BodyModel> body)
    : layout_(std::move(layout)), options_(options), body_(std::move(body)) {
  if (layout_.size() == 0) throw std::invalid_argument("tracker: layout has no partitions");
  if (options_.budget < 0) throw std::invalid_argument("tracker: budget must be >= 0");
  if (options_.staleness_horizon < 0) throw std::invalid_argument("tracker: staleness horizon must be >= 0");
  neighbor_order_ = precompute_neighbor_order(layout_);
  for (const auto& c : layout_.centers) {
    view_rotations_.push_back(ViewGeometry{c, layout_.theta_deg, 16}.camera_to_rig());
  }
}

void TrackerState::reset() {
  last_.reset();
  misses_ = 0;
  resume_ = 0;
  greedy_resume_ = 0;
}

int TrackerState::call_limit() const {
  const int n = static_cast<int>(layout_.size());
  return options_.budget > 0 ? std::min(n, options_.budget) : n;
}

namespace {

using Clock = std::chrono::steady_clock;

// One detector call; failures are counted and read as a miss.
std::vector<Detection> probe(const PartitionDetector& detect, int p, FrameResult& r) {
  ++r.detector_calls;
  r.probes.push_back(p);
  try {
    auto dets = detect(p);
    for (auto& d : dets) d.partition_index = p;
    return dets;
  } catch (const std::exception&) {
    ++r.detector_failures;
    return {};
  }
}

void fuse(const std::optional<BodyModel>& body, const std::vector<Rotation>& views, FrameResult& r) {
  if (!body || r.detections.empty()) return;
  std::vector<Rotation> cams;
  cams.reserve(r.detections.size());
  for (const auto& d : r.detections) cams.push_back(views[d.partition_index]);
  r.estimate = fuse_body_pose(r.detections, *body, cams);
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

FrameResult step_optimized(TrackerState& state, const PartitionDetector& detect) {
  const auto t0 = Clock::now();
  FrameResult r;
  const int n = static_cast<int>(state.layout_.size());
  const int limit = state.call_limit();

  auto take_hit = [&](int p, std::vector<Detection>& dets) {
    r.found = true;
    r.partition = p;
    r.detections = std::move(dets);
  };

  // The scan order is `head` (probed every frame) followed by the cyclic
  // `tail`, entered at the resume offset.
  std::vector<int> head;
  std::vector<int> tail;
  if (state.last_) {
    const auto& row = state.neighbor_order_[*state.last_];
    head.push_back(row.front());
    tail.assign(row.begin() + 1, row.end());
  } else {
    tail.resize(n);
    std::iota(tail.begin(), tail.end(), 0);
  }
  const int tail_size = static_cast<int>(tail.size());
  const int start = state.options_.resume_scans && tail_size > 0 ? state.resume_ % tail_size : 0;

  for (int p : head) {
    if (r.detector_calls >= limit) break;
    auto dets = probe(detect, p, r);
    if (!dets.empty()) take_hit(p, dets);
  }
  int scanned = 0;
  while (!r.found && scanned < tail_size && r.detector_calls < limit) {
    const int p = tail[(start + scanned) % tail_size];
    ++scanned;
    auto dets = probe(detect, p, r);
    if (!dets.empty()) take_hit(p, dets);
  }

  if (r.found) {
    state.last_ = r.partition;
    state.misses_ = 0;
    state.resume_ = 0;
  } else {
    ++state.misses_;
    state.resume_ = scanned < tail_size ? start + scanned : 0;
    const int horizon = state.options_.staleness_horizon;
    if (horizon > 0 && state.misses_ >= horizon) {
      state.last_.reset();
      state.resume_ = 0;
    }
  }
  fuse(state.body_, state.view_rotations_, r);
  r.elapsed_ms = ms_since(t0);
  return r;
}

FrameResult step_greedy(TrackerState& state, const PartitionDetector& detect) {
  const auto t0 = Clock::now();
  FrameResult r;
  const int n = static_cast<int>(state.layout_.size());
  const int limit = state.call_limit();
  const int start = state.options_.resume_scans ? state.greedy_resume_ : 0;
  for (int k = 0; k < limit; ++k) {
    const int p = (start + k) % n;
    auto dets = probe(detect, p, r);
    if (dets.empty()) continue;
    if (!r.found) {
      r.found = true;
      r.partition = p;
    }
    r.detections.insert(r.detections.end(), dets.begin(), dets.end());
  }
  state.greedy_resume_ = (start + limit) % n;
  fuse(state.body_, state.view_rotations_, r);
  r.elapsed_ms = ms_since(t0);
  return r;
}

}  // namespace omniloc
