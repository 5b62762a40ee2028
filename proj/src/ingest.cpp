#include "tacslip/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <stdexcept>

#include "tacslip/csv.hpp"

namespace tacslip::ingest {

namespace {

// lowercase, keep only letters and digits: "Entropy Rate" == "entropy_rate"
std::string canon(std::string_view s) {
  std::string out;
  for (char ch : s) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

const std::map<std::string, std::vector<std::string>>& synonyms() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"t", {"t", "time", "timestamp", "times", "frametime"}},
      {"vx", {"vx", "vbarx", "meanvx", "vxmean", "velocityx", "vmeanx", "avgvx", "xvelocity"}},
      {"vy", {"vy", "vbary", "meanvy", "vymean", "velocityy", "vmeany", "avgvy", "yvelocity"}},
      {"entropy", {"entropy", "e", "h", "entropyvalue", "fieldentropy"}},
      {"entropy_rate",
       {"entropyrate", "erate", "de", "dedt", "deltaentropy", "entropyderivative", "hrate"}},
      {"label", {"label", "slip", "class", "y", "target", "state", "slipstate", "islip"}},
  };
  return table;
}

int parse_label(std::string_view raw) {
  const std::string v = canon(raw);
  if (v.empty()) return features::kLabelNone;
  if (v == "slip" || v == "true" || v == "yes" || v == "slipping") return features::kLabelSlip;
  if (v == "stable" || v == "false" || v == "no" || v == "noslip" || v == "static")
    return features::kLabelStable;
  double num = 0.0;
  try {
    num = csv::parse_double(csv::trim(raw));
  } catch (const std::exception&) {
    throw std::runtime_error("ingest: unrecognized label value '" + std::string(raw) + "'");
  }
  return num != 0.0 ? features::kLabelSlip : features::kLabelStable;
}

}  // namespace

IngestReport read_feature_table(const std::string& path, double fallback_frame_rate_hz) {
  const std::vector<std::string> lines = csv::read_lines(path);
  if (lines.empty()) throw std::runtime_error("ingest: empty file: " + path);

  const std::vector<std::string> header = csv::split_line(lines[0]);
  std::map<std::string, std::size_t> column_of;
  std::vector<std::string> ignored;
  std::ostringstream mapping;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string key = canon(header[i]);
    bool matched = false;
    for (const auto& [feature, names] : synonyms()) {
      if (std::find(names.begin(), names.end(), key) == names.end()) continue;
      if (column_of.count(feature))
        throw std::runtime_error("ingest: columns '" + header[column_of[feature]] + "' and '" +
                                 header[i] + "' both map to " + feature);
      column_of[feature] = i;
      mapping << "  column " << i + 1 << " '" << header[i] << "' -> " << feature << '\n';
      matched = true;
      break;
    }
    if (!matched) ignored.push_back(header[i]);
  }
  if (!column_of.count("vx") || !column_of.count("vy"))
    throw std::runtime_error(
        "ingest: header of " + path +
        " has no recognizable vx/vy columns; rename them or extend the synonym table");
  for (const std::string& name : ignored) mapping << "  ignored column '" << name << "'\n";

  IngestReport rep;
  rep.has_time = column_of.count("t") > 0;
  rep.has_entropy = column_of.count("entropy") > 0;
  rep.has_entropy_rate = column_of.count("entropy_rate") > 0;
  rep.has_label = column_of.count("label") > 0;
  rep.mapping = mapping.str();

  auto field = [&](const std::vector<std::string>& cells, const char* name) -> std::string_view {
    const std::size_t idx = column_of.at(name);
    if (idx >= cells.size()) throw std::runtime_error("ingest: short row in " + path);
    return cells[idx];
  };

  rep.rows.reserve(lines.size() - 1);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (csv::trim(lines[li]).empty()) continue;
    const std::vector<std::string> cells = csv::split_line(lines[li]);
    features::FeatureVector row;
    row.vx = csv::parse_double(field(cells, "vx"));
    row.vy = csv::parse_double(field(cells, "vy"));
    row.t = rep.has_time ? csv::parse_double(field(cells, "t"))
                         : static_cast<double>(rep.rows.size()) / fallback_frame_rate_hz;
    if (rep.has_entropy) row.entropy = csv::parse_double(field(cells, "entropy"));
    if (rep.has_entropy_rate) row.entropy_rate = csv::parse_double(field(cells, "entropy_rate"));
    if (rep.has_label) row.label = parse_label(field(cells, "label"));
    rep.rows.push_back(row);
  }
  if (rep.rows.empty()) throw std::runtime_error("ingest: no data rows in " + path);
  return rep;
}

}  // namespace tacslip::ingest
