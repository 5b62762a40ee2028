#pragma once

#include <string>
#include <vector>

#include "tacslip/features.hpp"

namespace tacslip::ingest {

// Reads a feature table whose header may use foreign column names (externally
// published datasets), mapping recognized synonyms onto the pipeline features.
// vx/vy are required; entropy, entropy rate, time, and label are optional and
// default to 0 / row-index time / unlabeled. Extra columns are ignored.
struct IngestReport {
  std::vector<features::FeatureVector> rows;
  bool has_entropy = false;
  bool has_entropy_rate = false;
  bool has_time = false;
  bool has_label = false;
  std::string mapping;  // human-readable column mapping summary
};

IngestReport read_feature_table(const std::string& path, double fallback_frame_rate_hz = 25.0);

}  // namespace tacslip::ingest
