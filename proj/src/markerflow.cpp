#include "tacslip/markerflow.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "tacslip/csv.hpp"

namespace tacslip::markerflow {

double DisplacementField::magnitude(std::size_t i) const {
  return std::sqrt(dx[i] * dx[i] + dy[i] * dy[i]);
}

double DisplacementField::mean_magnitude() const {
  if (dx.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < dx.size(); ++i) sum += magnitude(i);
  return sum / static_cast<double>(dx.size());
}

std::size_t Correspondence::matched_count() const {
  std::size_t n = 0;
  for (int c : current_of)
    if (c != kUnmatched) ++n;
  return n;
}

MarkerSet detect_markers(const GrayFrame& frame, const DetectParams& params) {
  if (!frame.valid()) throw std::invalid_argument("detect_markers: invalid frame");
  if (!(params.threshold_fraction > 0.0 && params.threshold_fraction < 1.0))
    throw std::invalid_argument("detect_markers: threshold fraction must be in (0,1)");
  if (params.min_area < 1) throw std::invalid_argument("detect_markers: min_area must be >= 1");
  if (params.connectivity != 4 && params.connectivity != 8)
    throw std::invalid_argument("detect_markers: connectivity must be 4 or 8");

  MarkerSet out;
  out.timestamp = frame.timestamp;

  auto [lo_it, hi_it] = std::minmax_element(frame.pixels.begin(), frame.pixels.end());
  const int lo = *lo_it, hi = *hi_it;
  if (lo == hi) return out;  // degenerate frame, no dynamic range

  const double threshold = lo + params.threshold_fraction * (hi - lo);
  const int w = frame.width, h = frame.height;

  auto is_dark = [&](int x, int y) { return static_cast<double>(frame.at(x, y)) < threshold; };

  static constexpr int off8[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {-1, 0},
                                     {1, 0},   {-1, 1}, {0, 1},  {1, 1}};
  static constexpr int off4[4][2] = {{0, -1}, {-1, 0}, {1, 0}, {0, 1}};
  const auto* offsets = params.connectivity == 8 ? off8 : off4;
  const int n_off = params.connectivity;

  std::vector<std::uint8_t> visited(static_cast<std::size_t>(w) * h, 0);
  std::vector<int> stack;

  // Row-major scan; each new blob is flood-filled from its first pixel, so
  // output order is row-major by first detection.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx0 = static_cast<std::size_t>(y) * w + x;
      if (visited[idx0] || !is_dark(x, y)) continue;

      stack.clear();
      stack.push_back(static_cast<int>(idx0));
      visited[idx0] = 1;
      double wsum = 0.0, wx = 0.0, wy = 0.0;
      int area = 0;

      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int px = p % w, py = p / w;
        ++area;
        // darkness-weighted centroid. weights are strictly positive inside
        // the blob because every blob pixel is below threshold <= hi.
        const double weight = hi - frame.at(px, py);
        wsum += weight;
        wx += weight * px;
        wy += weight * py;

        for (int k = 0; k < n_off; ++k) {
          const int nx = px + offsets[k][0], ny = py + offsets[k][1];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
          if (visited[nidx] || !is_dark(nx, ny)) continue;
          visited[nidx] = 1;
          stack.push_back(static_cast<int>(nidx));
        }
      }

      if (area >= params.min_area && wsum > 0.0)
        out.positions.push_back({wx / wsum, wy / wsum});
    }
  }
  return out;
}

namespace {

double sq_dist(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

}  // namespace

double default_gate(const MarkerSet& markers) {
  const std::size_t n = markers.size();
  if (n < 2) return std::numeric_limits<double>::infinity();
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = sq_dist(markers.positions[i], markers.positions[j]);
      nearest[i] = std::min(nearest[i], d);
      nearest[j] = std::min(nearest[j], d);
    }
  std::nth_element(nearest.begin(), nearest.begin() + n / 2, nearest.end());
  return 0.5 * std::sqrt(nearest[n / 2]);
}

Correspondence associate_markers(const MarkerSet& reference, const MarkerSet& current,
                                 double gate_px) {
  if (gate_px <= 0.0) gate_px = default_gate(reference);

  struct Pair {
    double d2;
    std::size_t ref, cur;
  };
  const double gate2 = gate_px * gate_px;
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < reference.size(); ++i)
    for (std::size_t j = 0; j < current.size(); ++j) {
      const double d2 = sq_dist(reference.positions[i], current.positions[j]);
      if (d2 <= gate2) pairs.push_back({d2, i, j});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.ref != b.ref) return a.ref < b.ref;
    return a.cur < b.cur;
  });

  Correspondence corr;
  corr.current_of.assign(reference.size(), kUnmatched);
  std::vector<std::uint8_t> cur_used(current.size(), 0);
  for (const Pair& p : pairs) {
    if (corr.current_of[p.ref] != kUnmatched || cur_used[p.cur]) continue;
    corr.current_of[p.ref] = static_cast<int>(p.cur);
    cur_used[p.cur] = 1;
  }
  return corr;
}

DisplacementField displacement_field(const MarkerSet& reference, const MarkerSet& current,
                                     const Correspondence& corr,
                                     const DisplacementField* previous) {
  const std::size_t n = reference.size();
  if (corr.current_of.size() != n)
    throw std::invalid_argument("displacement_field: correspondence size mismatch");
  if (previous && previous->size() != n)
    throw std::invalid_argument("displacement_field: previous field size mismatch");

  DisplacementField field;
  field.timestamp = current.timestamp;
  field.dx.resize(n);
  field.dy.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int j = corr.current_of[i];
    if (j == kUnmatched) {
      field.dx[i] = previous ? previous->dx[i] : 0.0;
      field.dy[i] = previous ? previous->dy[i] : 0.0;
      continue;
    }
    if (j < 0 || static_cast<std::size_t>(j) >= current.size())
      throw std::invalid_argument("displacement_field: correspondence index out of range");
    field.dx[i] = current.positions[j].x - reference.positions[i].x;
    field.dy[i] = current.positions[j].y - reference.positions[i].y;
  }
  return field;
}

Velocity velocity_features(const DisplacementField& field_t, const DisplacementField& field_prev,
                           double frame_rate_hz) {
  const std::size_t n = field_t.size();
  if (n == 0) throw std::invalid_argument("velocity_features: empty field (no markers)");
  if (field_prev.size() != n)
    throw std::invalid_argument("velocity_features: field size mismatch");
  if (!(frame_rate_hz > 0.0))
    throw std::invalid_argument("velocity_features: frame rate must be positive");

  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += frame_rate_hz * (field_t.dx[i] - field_prev.dx[i]);
    sy += frame_rate_hz * (field_t.dy[i] - field_prev.dy[i]);
  }
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

// -------- FieldTracker --------

FieldTracker::FieldTracker(TrackerParams params) : params_(params) {}

const MarkerSet& FieldTracker::reference() const {
  if (!reference_) throw std::logic_error("FieldTracker: no reference established");
  return *reference_;
}

void FieldTracker::reset() {
  reference_.reset();
  previous_ = DisplacementField{};
  rest_streak_ = 0;
}

void FieldTracker::set_reference(const MarkerSet& markers) {
  reference_ = markers;
  gate_ = params_.gate_px > 0.0 ? params_.gate_px : default_gate(markers);
  previous_ = DisplacementField{};
  previous_.timestamp = markers.timestamp;
  previous_.dx.assign(markers.size(), 0.0);
  previous_.dy.assign(markers.size(), 0.0);
  rest_streak_ = 0;
}

std::optional<DisplacementField> FieldTracker::feed(const MarkerSet& markers) {
  if (!reference_) {
    if (markers.size() < params_.min_markers) return std::nullopt;
    set_reference(markers);
    return previous_;
  }

  const double n_ref = static_cast<double>(reference_->size());
  const double change = std::abs(static_cast<double>(markers.size()) - n_ref);
  if (change > params_.count_change_tolerance * n_ref) {
    ++recalibrations_;
    if (markers.size() < params_.min_markers) {
      reset();
      return std::nullopt;
    }
    set_reference(markers);
    return previous_;
  }

  const Correspondence corr = associate_markers(*reference_, markers, gate_);
  DisplacementField field = displacement_field(*reference_, markers, corr, &previous_);
  previous_ = field;

  if (params_.recalibrate) {
    if (field.mean_magnitude() < params_.rest_threshold_px)
      ++rest_streak_;
    else
      rest_streak_ = 0;
    if (rest_streak_ >= params_.rest_frames) set_reference(markers);
  }
  return field;
}

// -------- PGM io --------

namespace {

int next_pgm_token(std::istream& in) {
  // skips whitespace and '#' comment lines
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF) throw std::runtime_error("pgm: truncated header");
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw std::runtime_error("pgm: malformed header");
  return value;
}

}  // namespace

GrayFrame read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pgm: cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5') throw std::runtime_error("pgm: not a binary P5 file: " + path);
  GrayFrame frame;
  frame.width = next_pgm_token(in);
  frame.height = next_pgm_token(in);
  const int maxval = next_pgm_token(in);
  if (frame.width <= 0 || frame.height <= 0)
    throw std::runtime_error("pgm: bad dimensions in " + path);
  if (maxval <= 0 || maxval > 255) throw std::runtime_error("pgm: only 8-bit supported: " + path);
  const std::size_t count =
      static_cast<std::size_t>(frame.width) * static_cast<std::size_t>(frame.height);
  frame.pixels.resize(count);
  in.read(reinterpret_cast<char*>(frame.pixels.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count)
    throw std::runtime_error("pgm: truncated pixel data in " + path);
  return frame;
}

void write_pgm(const GrayFrame& frame, const std::string& path) {
  if (!frame.valid()) throw std::invalid_argument("write_pgm: invalid frame");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pgm: cannot write " + path);
  out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
}

std::vector<GrayFrame> read_pgm_dir(const std::string& dir, double frame_rate_hz) {
  if (!(frame_rate_hz > 0.0)) throw std::invalid_argument("read_pgm_dir: bad frame rate");
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  std::vector<GrayFrame> frames;
  frames.reserve(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    GrayFrame f = read_pgm(paths[i].string());
    f.timestamp = static_cast<double>(i) / frame_rate_hz;
    frames.push_back(std::move(f));
  }
  return frames;
}

// -------- MarkerSet CSV --------

std::vector<MarkerSet> read_marker_csv(const std::string& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw std::runtime_error("marker csv: empty file " + path);
  const auto header = csv::split_line(lines[0]);
  if (header.size() != 4 || header[0] != "t" || header[1] != "idx" || header[2] != "x" ||
      header[3] != "y")
    throw std::runtime_error("marker csv: expected header t,idx,x,y in " + path);

  std::vector<MarkerSet> frames;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto fields = csv::split_line(lines[li]);
    if (fields.size() != 4)
      throw std::runtime_error("marker csv: bad row at line " + std::to_string(li + 1));
    const double t = csv::parse_double(fields[0]);
    const long long idx = csv::parse_int(fields[1]);
    const double x = csv::parse_double(fields[2]);
    const double y = csv::parse_double(fields[3]);
    if (frames.empty() || frames.back().timestamp != t) {
      frames.push_back(MarkerSet{t, {}});
    }
    MarkerSet& frame = frames.back();
    if (idx < 0 || static_cast<std::size_t>(idx) != frame.positions.size())
      throw std::runtime_error("marker csv: idx must be contiguous from 0 per frame (line " +
                               std::to_string(li + 1) + ")");
    frame.positions.push_back({x, y});
  }
  return frames;
}

void write_marker_csv(const std::vector<MarkerSet>& frames, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("marker csv: cannot write " + path);
  out << "t,idx,x,y\n";
  for (const MarkerSet& frame : frames)
    for (std::size_t i = 0; i < frame.positions.size(); ++i)
      out << csv::format_double(frame.timestamp) << ',' << i << ','
          << csv::format_double(frame.positions[i].x) << ','
          << csv::format_double(frame.positions[i].y) << '\n';
}

}  // namespace tacslip::markerflow
