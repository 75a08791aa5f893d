#include "omniloc/fiducial.hpp"

#include "omniloc/random.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <set>
#include <string>
#include <unordered_map>

namespace omniloc {

Payload rotate_payload(Payload p) {
  // Clockwise quarter turn: new(r, c) = old(3 - c, r).
  Payload out = 0;
  for (int r = 0; r < kPayloadCells; ++r) {
    for (int c = 0; c < kPayloadCells; ++c) {
      const int src = (kPayloadCells - 1 - c) * kPayloadCells + r;
      if (p & (1u << src)) out |= static_cast<Payload>(1u << (r * kPayloadCells + c));
    }
  }
  return out;
}

int hamming(Payload a, Payload b) { return std::popcount(static_cast<unsigned>(a ^ b)); }

namespace {

using Point = std::uint8_t;  // element of GF(2)^4

struct Affine {
  std::array<Point, 4> cols{};
  Point shift = 0;
  Point operator()(Point x) const {
    Point y = shift;
    for (int k = 0; k < 4; ++k) {
      if (x & (1u << k)) y ^= cols[k];
    }
    return y;
  }
};

// First affine map (in enumeration order) whose cycles on GF(2)^4 all have
// length 4, i.e. with the same cycle type as a quarter turn of a 4x4 grid.
Affine quarter_turn_affine() {
  for (int a = 0; a < (1 << 16); ++a) {
    Affine g;
    for (int k = 0; k < 4; ++k) g.cols[k] = static_cast<Point>((a >> (4 * k)) & 0xF);
    for (int b = 0; b < 16; ++b) {
      g.shift = static_cast<Point>(b);
      bool ok = true;
      std::array<bool, 16> hit{};
      for (Point x = 0; x < 16 && ok; ++x) {
        const Point y = g(x);
        if (hit[y]) ok = false;
        hit[y] = true;
        const Point y2 = g(y);
        ok = ok && y != x && y2 != x && g(g(y2)) == x;
      }
      if (ok) return g;
    }
  }
  throw DictionaryError("no affine quarter-turn on GF(2)^4");
}

// Evaluation points for the 16 payload cells, chosen so that rotating the
// grid acts on the points as the affine map g. Reed-Muller RM(2,4) is invariant
// under affine maps, so the code becomes closed under grid rotation.
std::array<Point, 16> cell_labels(const Affine& g) {
  auto turn = [](int cell) {
    const int r = cell / kPayloadCells;
    const int c = cell % kPayloadCells;
    return c * kPayloadCells + (kPayloadCells - 1 - r);
  };
  std::array<Point, 16> label{};
  std::array<bool, 16> cell_done{};
  std::array<bool, 16> point_done{};
  int next_point = 0;
  for (int start = 0; start < 16; ++start) {
    if (cell_done[start]) continue;
    while (point_done[next_point]) ++next_point;
    Point p = static_cast<Point>(next_point);
    int cell = start;
    for (int k = 0; k < 4; ++k) {
      label[cell] = p;
      cell_done[cell] = true;
      point_done[p] = true;
      cell = turn(cell);
      p = g(p);
    }
  }
  return label;
}

std::vector<Payload> reed_muller_2_4(const std::array<Point, 16>& label) {
  // Monomials of degree <= 2 in four variables.
  std::vector<Point> monomials = {0};
  for (int i = 0; i < 4; ++i) monomials.push_back(static_cast<Point>(1u << i));
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) monomials.push_back(static_cast<Point>((1u << i) | (1u << j)));
  }
  std::set<Payload> words;
  for (unsigned coeffs = 0; coeffs < (1u << monomials.size()); ++coeffs) {
    Payload w = 0;
    for (int cell = 0; cell < 16; ++cell) {
      int bit = 0;
      for (std::size_t m = 0; m < monomials.size(); ++m) {
        if ((coeffs >> m) & 1u) bit ^= ((label[cell] & monomials[m]) == monomials[m]) ? 1 : 0;
      }
      if (bit) w |= static_cast<Payload>(1u << cell);
    }
    words.insert(w);
  }
  return {words.begin(), words.end()};
}

}  // namespace

MarkerDictionary::MarkerDictionary(std::vector<Payload> payloads) : payloads_(std::move(payloads)) {
  if (payloads_.empty()) throw DictionaryError("marker dictionary is empty");
  int sep = 16;
  for (std::size_t i = 0; i < payloads_.size(); ++i) {
    Payload r = payloads_[i];
    for (int k = 1; k < 4; ++k) {
      r = rotate_payload(r);
      sep = std::min(sep, hamming(payloads_[i], r));
    }
    for (std::size_t j = i + 1; j < payloads_.size(); ++j) {
      Payload q = payloads_[j];
      for (int k = 0; k < 4; ++k, q = rotate_payload(q)) {
        sep = std::min(sep, hamming(payloads_[i], q));
      }
    }
  }
  if (sep < 4) {
    throw DictionaryError("marker dictionary separation " + std::to_string(sep) +
                          " is below the required 4 bits");
  }
  min_separation_ = sep;
}

MarkerDictionary MarkerDictionary::generate(std::uint64_t seed, int count) {
  const auto words = reed_muller_2_4(cell_labels(quarter_turn_affine()));
  const std::set<Payload> code(words.begin(), words.end());

  std::vector<std::array<Payload, 4>> orbits;
  std::set<Payload> seen;
  for (Payload w : words) {
    if (seen.count(w)) continue;
    std::array<Payload, 4> orbit{w, rotate_payload(w), 0, 0};
    orbit[2] = rotate_payload(orbit[1]);
    orbit[3] = rotate_payload(orbit[2]);
    for (Payload o : orbit) seen.insert(o);
    const bool full = orbit[1] != w && orbit[2] != w;
    if (!full) continue;
    if (!code.count(orbit[1])) throw DictionaryError("code is not closed under rotation");
    orbits.push_back(orbit);
  }
  if (static_cast<int>(orbits.size()) < count) {
    throw DictionaryError("not enough rotation orbits for " + std::to_string(count) + " markers");
  }
  Rng rng(seed);
  for (std::size_t i = orbits.size() - 1; i > 0; --i) {
    std::swap(orbits[i], orbits[rng.next() % (i + 1)]);
  }
  std::vector<Payload> chosen;
  chosen.reserve(count);
  for (int i = 0; i < count; ++i) chosen.push_back(orbits[i][rng.next() % 4]);
  return MarkerDictionary(std::move(chosen));
}

const MarkerDictionary& MarkerDictionary::standard() {
  static const MarkerDictionary dict = generate(0x6f6d6e69u);
  return dict;
}

Payload MarkerDictionary::payload(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("marker id " + std::to_string(id));
  return payloads_[id];
}

MarkerSpec MarkerDictionary::spec(int id, double side_length) const {
  if (!(side_length > 0.0)) throw std::invalid_argument("marker side length must be positive");
  MarkerSpec s;
  s.id = id;
  s.side_length = side_length;
  const Payload p = payload(id);
  for (int r = 0; r < kPayloadCells; ++r) {
    for (int c = 0; c < kPayloadCells; ++c) {
      s.code_grid[r + 1][c + 1] = (p >> (r * kPayloadCells + c)) & 1u;
    }
  }
  return s;
}

std::optional<MarkerDictionary::Match> MarkerDictionary::decode(Payload observed,
                                                                int max_correction) const {
  std::optional<Match> best;
  Payload w = observed;
  for (int k = 0; k < 4; ++k, w = rotate_payload(w)) {
    for (int id = 0; id < size(); ++id) {
      const int d = hamming(w, payloads_[id]);
      if (d <= max_correction && (!best || d < best->distance)) {
        best = Match{id, k, d};
      }
    }
  }
  return best;
}

double marker_face_half_extent(double side_length) {
  return side_length / 2.0 + side_length / kCodeCells;
}

std::optional<int> marker_texture(const MarkerSpec& spec, double x, double y) {
  const double half = spec.side_length / 2.0;
  const double outer = marker_face_half_extent(spec.side_length);
  if (std::abs(x) > outer || std::abs(y) > outer) return std::nullopt;
  if (std::abs(x) >= half || std::abs(y) >= half) return 1;
  const double cell = spec.side_length / kCodeCells;
  const int c = std::clamp(static_cast<int>(std::floor((x + half) / cell)), 0, kCodeCells - 1);
  const int r = std::clamp(static_cast<int>(std::floor((y + half) / cell)), 0, kCodeCells - 1);
  return spec.code_grid[r][c];
}

Image render_marker(const MarkerSpec& spec, int px) {
  if (px < 8) throw std::invalid_argument("render_marker: need at least 8 px");
  Image img(px, px, Rgb{255, 255, 255});
  const double outer = marker_face_half_extent(spec.side_length);
  for (int v = 0; v < px; ++v) {
    for (int u = 0; u < px; ++u) {
      const double x = ((u + 0.5) / px * 2.0 - 1.0) * outer;
      const double y = ((v + 0.5) / px * 2.0 - 1.0) * outer;
      const int cell = marker_texture(spec, x, y).value_or(1);
      const std::uint8_t g = cell ? 255 : 0;
      img.set(u, v, Rgb{g, g, g});
    }
  }
  return img;
}

}  // namespace omniloc
