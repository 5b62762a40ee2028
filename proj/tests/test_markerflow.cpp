#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "doctest.h"
#include "tacslip/markerflow.hpp"
#include "tacslip/rng.hpp"

using namespace tacslip;
using namespace tacslip::markerflow;

namespace {

// Renders dark disks on a light background: intensity rises quadratically
// from the disk centre, so the darkness-weighted centroid of the sampled
// pixels sits at the true centre up to discretization error.
GrayFrame render_markers(const std::vector<Point2>& centers, int width, int height,
                         double radius = 5.0) {
  GrayFrame frame;
  frame.width = width;
  frame.height = height;
  frame.pixels.assign(static_cast<std::size_t>(width) * height, 230);
  for (const Point2& c : centers) {
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x - radius)) - 1);
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(c.x + radius)) + 1);
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y - radius)) - 1);
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(c.y + radius)) + 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - c.x, dy = y - c.y;
        const double r = std::sqrt(dx * dx + dy * dy);
        if (r >= radius) continue;
        const double darkness = 1.0 - (r / radius) * (r / radius);
        const auto value = static_cast<std::uint8_t>(230 - 210.0 * darkness);
        std::uint8_t& px = frame.pixels[static_cast<std::size_t>(y) * width + x];
        px = std::min(px, value);
      }
  }
  return frame;
}

// Straightforward re-implementation of gated greedy matching: list every
// reference/current pair, sort by distance, take pairs whose endpoints are
// both unused. Written independently of the library's bookkeeping.
std::vector<int> greedy_match_reference(const MarkerSet& ref, const MarkerSet& cur,
                                        double gate_px) {
  struct Pair {
    double dist;
    std::size_t r, c;
  };
  std::vector<Pair> pairs;
  for (std::size_t r = 0; r < ref.size(); ++r)
    for (std::size_t c = 0; c < cur.size(); ++c) {
      const double dx = ref.positions[r].x - cur.positions[c].x;
      const double dy = ref.positions[r].y - cur.positions[c].y;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d <= gate_px) pairs.push_back({d, r, c});
    }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.dist < b.dist; });
  std::vector<int> out(ref.size(), kUnmatched);
  std::vector<bool> cur_used(cur.size(), false);
  for (const Pair& p : pairs) {
    if (out[p.r] != kUnmatched || cur_used[p.c]) continue;
    out[p.r] = static_cast<int>(p.c);
    cur_used[p.c] = true;
  }
  return out;
}

MarkerSet grid_set(int cols, int rows, double spacing, double ox = 40.0, double oy = 30.0) {
  MarkerSet set;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) set.positions.push_back({ox + c * spacing, oy + r * spacing});
  return set;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("detected centroids of a rendered grid sit within half a pixel") {
  // fractional centres exercise the sub-pixel path
  std::vector<Point2> truth;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 5; ++c) truth.push_back({22.3 + c * 20.0, 18.7 + r * 20.0});

  const GrayFrame frame = render_markers(truth, 140, 110);
  const MarkerSet found = detect_markers(frame);
  REQUIRE(found.size() == truth.size());

  // match each truth point to its nearest detection
  for (const Point2& t : truth) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& p : found.positions) {
      const double d = std::hypot(p.x - t.x, p.y - t.y);
      best = std::min(best, d);
    }
    CHECK(best <= 0.5);
  }
}

TEST_CASE("marker detection validates its inputs") {
  GrayFrame bad;
  CHECK_THROWS_AS(detect_markers(bad), std::invalid_argument);

  GrayFrame flat;
  flat.width = 8;
  flat.height = 8;
  flat.pixels.assign(64, 100);
  CHECK(detect_markers(flat).size() == 0);  // no dynamic range, no blobs

  const GrayFrame frame = render_markers({{10, 10}}, 24, 24);
  DetectParams p;
  p.threshold_fraction = 1.5;
  CHECK_THROWS_AS(detect_markers(frame, p), std::invalid_argument);
  p = {};
  p.connectivity = 6;
  CHECK_THROWS_AS(detect_markers(frame, p), std::invalid_argument);
}

TEST_CASE("min_area suppresses speckle blobs") {
  GrayFrame frame = render_markers({{16.0, 16.0}}, 40, 40);
  // single-pixel speck far from the disk
  frame.pixels[static_cast<std::size_t>(4) * 40 + 33] = 10;
  DetectParams p;
  p.min_area = 4;
  CHECK(detect_markers(frame, p).size() == 1);
  p.min_area = 1;
  CHECK(detect_markers(frame, p).size() == 2);
}

TEST_CASE("default gate is half the median nearest-neighbour spacing") {
  MarkerSet two;
  two.positions = {{0, 0}, {10, 0}};
  CHECK(default_gate(two) == doctest::Approx(5.0));

  const MarkerSet grid = grid_set(9, 7, 24.0);
  CHECK(default_gate(grid) == doctest::Approx(12.0));

  MarkerSet one;
  one.positions = {{3, 3}};
  CHECK(std::isinf(default_gate(one)));
}

TEST_CASE("small displacements resolve to the identity correspondence") {
  // displacement well below half the spacing: nearest neighbour is
  // unambiguous, so the matching must be the identity no matter how the
  // implementation breaks ties internally
  const MarkerSet ref = grid_set(6, 5, 20.0);
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    MarkerSet cur = ref;
    for (Point2& p : cur.positions) {
      p.x += rng.uniform(-4.0, 4.0);
      p.y += rng.uniform(-4.0, 4.0);
    }
    const Correspondence corr = associate_markers(ref, cur);
    REQUIRE(corr.current_of.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(corr.current_of[i] == static_cast<int>(i));
  }
}

TEST_CASE("association equals an independently written greedy matcher") {
  Rng rng(202);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t nr = 1 + rng.index(8);
    const std::size_t nc = 1 + rng.index(8);
    MarkerSet ref, cur;
    for (std::size_t i = 0; i < nr; ++i)
      ref.positions.push_back({rng.uniform(0.0, 50.0), rng.uniform(0.0, 50.0)});
    for (std::size_t i = 0; i < nc; ++i)
      cur.positions.push_back({rng.uniform(0.0, 50.0), rng.uniform(0.0, 50.0)});
    const double gate = rng.uniform(5.0, 40.0);

    const Correspondence got = associate_markers(ref, cur, gate);
    const std::vector<int> want = greedy_match_reference(ref, cur, gate);
    REQUIRE(got.current_of.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got.current_of[i] == want[i]);
  }
}

TEST_CASE("association is injective and respects the gate") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    MarkerSet ref, cur;
    const std::size_t n = 5 + rng.index(30);
    for (std::size_t i = 0; i < n; ++i) {
      ref.positions.push_back({rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0)});
      cur.positions.push_back({rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0)});
    }
    const double gate = 15.0;
    const Correspondence corr = associate_markers(ref, cur, gate);

    std::vector<bool> used(cur.size(), false);
    for (std::size_t i = 0; i < corr.current_of.size(); ++i) {
      const int c = corr.current_of[i];
      if (c == kUnmatched) continue;
      CHECK_FALSE(used[static_cast<std::size_t>(c)]);  // injective
      used[static_cast<std::size_t>(c)] = true;
      const double d = std::hypot(ref.positions[i].x - cur.positions[c].x,
                                  ref.positions[i].y - cur.positions[c].y);
      CHECK(d <= gate);
    }
  }
}

TEST_CASE("displacement field reproduces an analytic rotation") {
  const MarkerSet ref = grid_set(9, 7, 24.0);
  Point2 center{0, 0};
  for (const Point2& p : ref.positions) {
    center.x += p.x;
    center.y += p.y;
  }
  center.x /= static_cast<double>(ref.size());
  center.y /= static_cast<double>(ref.size());

  const double theta = 0.031;
  MarkerSet cur = ref;
  for (Point2& p : cur.positions) {
    const double rx = p.x - center.x, ry = p.y - center.y;
    p.x = center.x + std::cos(theta) * rx - std::sin(theta) * ry;
    p.y = center.y + std::sin(theta) * rx + std::cos(theta) * ry;
  }

  const Correspondence corr = associate_markers(ref, cur);
  const DisplacementField field = displacement_field(ref, cur, corr);
  REQUIRE(field.size() == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double rx = ref.positions[i].x - center.x, ry = ref.positions[i].y - center.y;
    const double ex = std::cos(theta) * rx - std::sin(theta) * ry - rx;
    const double ey = std::sin(theta) * rx + std::cos(theta) * ry - ry;
    CHECK(field.dx[i] == doctest::Approx(ex).epsilon(1e-12));
    CHECK(field.dy[i] == doctest::Approx(ey).epsilon(1e-12));
  }
}

TEST_CASE("unmatched markers carry the previous displacement forward") {
  MarkerSet ref;
  ref.positions = {{0, 0}, {30, 0}, {60, 0}};
  MarkerSet cur;
  cur.positions = {{1, 0}, {61, 2}};  // middle marker lost

  Correspondence corr;
  corr.current_of = {0, kUnmatched, 1};

  DisplacementField prev;
  prev.dx = {0.5, 2.5, 0.0};
  prev.dy = {0.0, -1.0, 0.0};

  const DisplacementField with_prev = displacement_field(ref, cur, corr, &prev);
  CHECK(with_prev.dx[0] == doctest::Approx(1.0));
  CHECK(with_prev.dx[1] == doctest::Approx(2.5));  // carried
  CHECK(with_prev.dy[1] == doctest::Approx(-1.0));
  CHECK(with_prev.dx[2] == doctest::Approx(1.0));
  CHECK(with_prev.dy[2] == doctest::Approx(2.0));

  const DisplacementField no_prev = displacement_field(ref, cur, corr);
  CHECK(no_prev.dx[1] == 0.0);
  CHECK(no_prev.dy[1] == 0.0);
}

TEST_CASE("velocity features equal the frame rate times the mean delta") {
  DisplacementField a, b;
  a.dx = {1.0, 2.0, 3.0};
  a.dy = {0.0, -1.0, 1.0};
  b.dx = {0.5, 1.5, 2.5};
  b.dy = {0.0, 0.0, 0.0};
  const Velocity v = velocity_features(a, b, 25.0);
  CHECK(v.vx == doctest::Approx(25.0 * 0.5));
  CHECK(v.vy == doctest::Approx(25.0 * 0.0));

  // translation invariance: shifting both fields by the same offset keeps v
  DisplacementField a2 = a, b2 = b;
  for (double& d : a2.dx) d += 7.0;
  for (double& d : b2.dx) d += 7.0;
  const Velocity v2 = velocity_features(a2, b2, 25.0);
  CHECK(v2.vx == doctest::Approx(v.vx));
  CHECK(v2.vy == doctest::Approx(v.vy));
}

TEST_CASE("field tracker zeroes the reference frame and tracks shifts") {
  FieldTracker tracker;
  const MarkerSet ref = grid_set(5, 4, 22.0);

  const auto first = tracker.feed(ref);
  REQUIRE(first.has_value());
  CHECK(first->mean_magnitude() == 0.0);
  CHECK(tracker.has_reference());

  MarkerSet shifted = ref;
  for (Point2& p : shifted.positions) p.x += 3.0;
  const auto f = tracker.feed(shifted);
  REQUIRE(f.has_value());
  for (std::size_t i = 0; i < f->size(); ++i) {
    CHECK(f->dx[i] == doctest::Approx(3.0));
    CHECK(f->dy[i] == doctest::Approx(0.0));
  }
}

TEST_CASE("field tracker waits for enough markers") {
  TrackerParams params;
  params.min_markers = 4;
  FieldTracker tracker(params);

  MarkerSet sparse;
  sparse.positions = {{0, 0}, {20, 0}};
  CHECK_FALSE(tracker.feed(sparse).has_value());
  CHECK_FALSE(tracker.has_reference());

  const MarkerSet full = grid_set(3, 2, 20.0);
  CHECK(tracker.feed(full).has_value());
}

TEST_CASE("a large marker-count change re-establishes the reference") {
  FieldTracker tracker;
  const MarkerSet ref = grid_set(6, 5, 20.0);
  tracker.feed(ref);
  CHECK(tracker.recalibrations() == 0);

  // half the markers vanish: outside the tolerance, so the tracker re-zeros
  MarkerSet half = ref;
  half.positions.resize(ref.size() / 2);
  const auto f = tracker.feed(half);
  REQUIRE(f.has_value());
  CHECK(tracker.recalibrations() == 1);
  CHECK(f->mean_magnitude() == 0.0);
  CHECK(tracker.reference().size() == half.size());
}

TEST_CASE("rest recalibration absorbs sub-threshold drift, not a loaded grasp") {
  TrackerParams params;
  params.recalibrate = true;
  params.rest_threshold_px = 0.2;
  params.rest_frames = 5;
  FieldTracker tracker(params);

  const MarkerSet ref = grid_set(5, 4, 20.0);
  tracker.feed(ref);

  // a large sustained deformation must never be re-zeroed away
  MarkerSet loaded = ref;
  for (Point2& p : loaded.positions) p.x += 3.0;
  for (int i = 0; i < 10; ++i) tracker.feed(loaded);
  CHECK_FALSE(tracker.reference().positions[0].x == loaded.positions[0].x);

  // a tiny residual offset held near rest becomes the new zero
  MarkerSet drifted = ref;
  for (Point2& p : drifted.positions) p.x += 0.1;
  for (int i = 0; i < params.rest_frames; ++i) tracker.feed(drifted);
  CHECK(tracker.reference().positions[0].x == doctest::Approx(drifted.positions[0].x));
  const auto f = tracker.feed(drifted);
  REQUIRE(f.has_value());
  CHECK(f->mean_magnitude() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pgm files round-trip exactly") {
  GrayFrame frame;
  frame.width = 17;
  frame.height = 9;
  Rng rng(5);
  frame.pixels.resize(17 * 9);
  for (std::uint8_t& p : frame.pixels) p = static_cast<std::uint8_t>(rng.index(256));

  const auto path = temp_file("tacslip_test_frame.pgm");
  write_pgm(frame, path.string());
  const GrayFrame back = read_pgm(path.string());
  CHECK(back.width == frame.width);
  CHECK(back.height == frame.height);
  CHECK(back.pixels == frame.pixels);
  std::filesystem::remove(path);
}

TEST_CASE("pgm reader rejects non-p5 input") {
  const auto path = temp_file("tacslip_test_bad.pgm");
  std::ofstream out(path);
  out << "P2\n4 4\n255\n";
  out.close();
  CHECK_THROWS(read_pgm(path.string()));
  std::filesystem::remove(path);
}

TEST_CASE("marker csv round-trips a stream") {
  std::vector<MarkerSet> frames;
  Rng rng(9);
  for (int t = 0; t < 4; ++t) {
    MarkerSet set;
    set.timestamp = 0.04 * t;
    const std::size_t n = 3 + rng.index(5);
    for (std::size_t i = 0; i < n; ++i)
      set.positions.push_back({rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)});
    frames.push_back(std::move(set));
  }

  const auto path = temp_file("tacslip_test_markers.csv");
  write_marker_csv(frames, path.string());
  const std::vector<MarkerSet> back = read_marker_csv(path.string());
  REQUIRE(back.size() == frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    CHECK(back[t].timestamp == frames[t].timestamp);
    REQUIRE(back[t].size() == frames[t].size());
    for (std::size_t i = 0; i < frames[t].size(); ++i) {
      CHECK(back[t].positions[i].x == frames[t].positions[i].x);
      CHECK(back[t].positions[i].y == frames[t].positions[i].y);
    }
  }
  std::filesystem::remove(path);
}
