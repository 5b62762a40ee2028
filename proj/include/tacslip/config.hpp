#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace tacslip {

// Flat "key = value" text config. '#' starts a comment, blank lines are
// skipped. Lookups remember which keys were touched so callers can reject
// configs containing unknown keys.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig parse_file(const std::string& path);

  bool has(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;

  std::vector<std::string> unused_keys() const;
  bool empty() const { return values_.empty(); }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace tacslip
