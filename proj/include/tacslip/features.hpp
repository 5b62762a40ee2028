#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tacslip/markerflow.hpp"

namespace tacslip::features {

// Frequency distribution of displacement magnitudes. Uniform bins over
// [0, max]; values above the range clamp into the last bin.
struct Histogram {
  std::vector<double> bin_edges;      // B+1, strictly increasing
  std::vector<std::uint64_t> counts;  // B

  std::uint64_t total() const;
  std::size_t bins() const { return counts.size(); }
};

struct HistogramParams {
  int bins = 32;
  double max_magnitude_px = 30.0;
};

Histogram magnitude_histogram(const markerflow::DisplacementField& field,
                              const HistogramParams& params = {});

// Shannon entropy of the normalized histogram, in nats. 0*ln(0) := 0.
double entropy(const Histogram& hist);

// Forward-difference rate: f * (E(t) - E(t - dt)), nats/s.
double entropy_rate(double entropy_t, double entropy_prev, double frame_rate_hz);

inline constexpr int kLabelStable = 0;
inline constexpr int kLabelSlip = 1;
inline constexpr int kLabelNone = -1;  // inference mode, no label

// One time step of the slip-feature pipeline.
struct FeatureVector {
  double t = 0.0;             // seconds
  double vx = 0.0;            // px/s
  double vy = 0.0;            // px/s
  double entropy = 0.0;       // nats
  double entropy_rate = 0.0;  // nats/s
  int label = kLabelNone;
};

FeatureVector build_feature_vector(const markerflow::DisplacementField& field_t,
                                   const markerflow::DisplacementField& field_prev,
                                   double entropy_prev, double frame_rate_hz,
                                   int label = kLabelNone, const HistogramParams& params = {});

// Interchange CSV: header t,vx,vy,entropy,entropy_rate,label; the label field
// is left empty for unlabeled rows.
void write_feature_csv(const std::vector<FeatureVector>& rows, const std::string& path);
std::vector<FeatureVector> read_feature_csv(const std::string& path);

inline const std::vector<std::string>& feature_csv_header() {
  static const std::vector<std::string> h = {"t", "vx", "vy", "entropy", "entropy_rate", "label"};
  return h;
}

}  // namespace tacslip::features
