#include "tacslip/features.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "tacslip/csv.hpp"

namespace tacslip::features {

std::uint64_t Histogram::total() const {
  std::uint64_t sum = 0;
  for (std::uint64_t c : counts) sum += c;
  return sum;
}

Histogram magnitude_histogram(const markerflow::DisplacementField& field,
                              const HistogramParams& params) {
  if (params.bins < 2) throw std::invalid_argument("magnitude_histogram: need at least 2 bins");
  if (!(params.max_magnitude_px > 0.0))
    throw std::invalid_argument("magnitude_histogram: range must be positive");
  if (field.size() == 0) throw std::invalid_argument("magnitude_histogram: empty field");

  const std::size_t b = static_cast<std::size_t>(params.bins);
  Histogram hist;
  hist.bin_edges.resize(b + 1);
  for (std::size_t i = 0; i <= b; ++i)
    hist.bin_edges[i] = params.max_magnitude_px * static_cast<double>(i) / static_cast<double>(b);
  hist.counts.assign(b, 0);

  for (std::size_t i = 0; i < field.size(); ++i) {
    const double m = field.magnitude(i);
    std::size_t bin = static_cast<std::size_t>(
        std::floor(m * static_cast<double>(b) / params.max_magnitude_px));
    if (bin >= b) bin = b - 1;  // saturating last bin
    ++hist.counts[bin];
  }
  return hist;
}

double entropy(const Histogram& hist) {
  const std::uint64_t total = hist.total();
  if (total == 0) throw std::invalid_argument("entropy: histogram has no mass");
  double h = 0.0;
  for (std::uint64_t c : hist.counts) {
    if (c == 0) continue;  // 0 * ln(0) := 0
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

double entropy_rate(double entropy_t, double entropy_prev, double frame_rate_hz) {
  if (!(frame_rate_hz > 0.0))
    throw std::invalid_argument("entropy_rate: frame rate must be positive");
  return frame_rate_hz * (entropy_t - entropy_prev);
}

FeatureVector build_feature_vector(const markerflow::DisplacementField& field_t,
                                   const markerflow::DisplacementField& field_prev,
                                   double entropy_prev, double frame_rate_hz, int label,
                                   const HistogramParams& params) {
  const markerflow::Velocity vel = velocity_features(field_t, field_prev, frame_rate_hz);
  const double e = entropy(magnitude_histogram(field_t, params));
  FeatureVector fv;
  fv.t = field_t.timestamp;
  fv.vx = vel.vx;
  fv.vy = vel.vy;
  fv.entropy = e;
  fv.entropy_rate = entropy_rate(e, entropy_prev, frame_rate_hz);
  fv.label = label;
  return fv;
}

void write_feature_csv(const std::vector<FeatureVector>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("feature csv: cannot write " + path);
  out << "t,vx,vy,entropy,entropy_rate,label\n";
  for (const FeatureVector& r : rows) {
    out << csv::format_double(r.t) << ',' << csv::format_double(r.vx) << ','
        << csv::format_double(r.vy) << ',' << csv::format_double(r.entropy) << ','
        << csv::format_double(r.entropy_rate) << ',';
    if (r.label != kLabelNone) out << r.label;
    out << '\n';
  }
}

std::vector<FeatureVector> read_feature_csv(const std::string& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw std::runtime_error("feature csv: empty file " + path);
  const auto header = csv::split_line(lines[0]);
  if (header != feature_csv_header())
    throw std::runtime_error("feature csv: expected header t,vx,vy,entropy,entropy_rate,label in " +
                             path);
  std::vector<FeatureVector> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto fields = csv::split_line(lines[li]);
    if (fields.size() != 6)
      throw std::runtime_error("feature csv: bad row at line " + std::to_string(li + 1));
    FeatureVector r;
    r.t = csv::parse_double(fields[0]);
    r.vx = csv::parse_double(fields[1]);
    r.vy = csv::parse_double(fields[2]);
    r.entropy = csv::parse_double(fields[3]);
    r.entropy_rate = csv::parse_double(fields[4]);
    r.label = fields[5].empty() ? kLabelNone : static_cast<int>(csv::parse_int(fields[5]));
    if (r.label != kLabelNone && r.label != kLabelStable && r.label != kLabelSlip)
      throw std::runtime_error("feature csv: label must be 0 or 1 (line " +
                               std::to_string(li + 1) + ")");
    rows.push_back(r);
  }
  return rows;
}

}  // namespace tacslip::features
