#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tacslip::markerflow {

// One 8-bit grayscale tactile frame, row-major.
struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // size = width * height
  double timestamp = 0.0;            // seconds

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool valid() const {
    return width > 0 && height > 0 &&
           pixels.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Tracked gel-marker centroids of one frame. Index order is stable across a
// stream: index i always refers to the same physical marker.
struct MarkerSet {
  double timestamp = 0.0;  // seconds
  std::vector<Point2> positions;

  std::size_t size() const { return positions.size(); }
};

// Per-marker displacement relative to a reference MarkerSet, in px.
struct DisplacementField {
  double timestamp = 0.0;
  std::vector<double> dx;
  std::vector<double> dy;

  std::size_t size() const { return dx.size(); }
  double magnitude(std::size_t i) const;
  double mean_magnitude() const;
};

inline constexpr int kUnmatched = -1;

// reference index -> current index, kUnmatched where no match was found.
// Injective over matched entries.
struct Correspondence {
  std::vector<int> current_of;

  std::size_t matched_count() const;
};

struct DetectParams {
  double threshold_fraction = 0.5;  // of the frame's dynamic range, in (0,1)
  int min_area = 4;                 // px
  int connectivity = 8;             // 4 or 8
};

// Dark-blob extraction: threshold at min + fraction * (max - min), connected
// components, intensity-weighted centroids. Blobs are emitted in row-major
// order of their first-scanned pixel. A frame with a single intensity value
// has no dynamic range and yields an empty set.
MarkerSet detect_markers(const GrayFrame& frame, const DetectParams& params = {});

// Half the median nearest-neighbor spacing of the set; +inf below 2 markers.
double default_gate(const MarkerSet& markers);

// Greedy nearest-neighbor matching by ascending distance, gated. Each current
// marker is used at most once. gate_px <= 0 selects default_gate(reference).
Correspondence associate_markers(const MarkerSet& reference, const MarkerSet& current,
                                 double gate_px = 0.0);

// dx_i = x_cur(corr(i)) - x_ref(i). Unmatched indices carry the previous
// field's value for that index, zero when no previous field is given.
DisplacementField displacement_field(const MarkerSet& reference, const MarkerSet& current,
                                     const Correspondence& corr,
                                     const DisplacementField* previous = nullptr);

struct Velocity {
  double vx = 0.0;  // px/s
  double vy = 0.0;
};

// Mean per-marker frame-to-frame displacement rate:
// v_i = f * (d_i(t) - d_i(t - dt)), averaged over markers.
Velocity velocity_features(const DisplacementField& field_t, const DisplacementField& field_prev,
                           double frame_rate_hz);

// -------- streaming reference bookkeeping --------

struct TrackerParams {
  double gate_px = 0.0;          // <= 0: derive from reference spacing
  std::size_t min_markers = 1;   // markers required to establish the reference
  bool recalibrate = false;      // re-zero after a sustained rest
  double rest_threshold_px = 0.2;
  int rest_frames = 25;
  double count_change_tolerance = 0.2;  // fraction of reference size
};

// Establishes the displacement reference (first frame with enough markers),
// then produces one field per fed frame. A marker-count change beyond the
// tolerance re-establishes the reference instead of failing.
class FieldTracker {
 public:
  explicit FieldTracker(TrackerParams params = {});

  // nullopt until a reference exists; the reference frame itself yields the
  // all-zero field.
  std::optional<DisplacementField> feed(const MarkerSet& markers);

  bool has_reference() const { return reference_.has_value(); }
  const MarkerSet& reference() const;
  int recalibrations() const { return recalibrations_; }
  void reset();

 private:
  void set_reference(const MarkerSet& markers);

  TrackerParams params_;
  std::optional<MarkerSet> reference_;
  DisplacementField previous_;
  double gate_ = 0.0;
  int rest_streak_ = 0;
  int recalibrations_ = 0;
};

// -------- file ingestion --------

// Binary PGM (P5), 8-bit only.
GrayFrame read_pgm(const std::string& path);
void write_pgm(const GrayFrame& frame, const std::string& path);

// All *.pgm files in a directory, filename-ordered; timestamp = index / f.
std::vector<GrayFrame> read_pgm_dir(const std::string& dir, double frame_rate_hz);

// MarkerSet stream CSV: header t,idx,x,y; one row per marker per frame;
// idx contiguous from 0 within each frame.
std::vector<MarkerSet> read_marker_csv(const std::string& path);
void write_marker_csv(const std::vector<MarkerSet>& frames, const std::string& path);

}  // namespace tacslip::markerflow
