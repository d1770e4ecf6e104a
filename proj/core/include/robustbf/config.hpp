#pragma once

#include <map>
#include <string>
#include <vector>

#include "robustbf/experiments.hpp"

namespace robustbf {

// Flat `key = value` configuration text. Lines starting with '#' are comments;
// list values are comma separated. See README for the recognized keys.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig from_file(const std::string& path);

  // Applies a `key=value` override, replacing any earlier value.
  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Builds every config from defaults plus the given keys. Throws ConfigError
// for unknown keys or malformed values.
ExperimentSpec experiment_from(const KeyValueConfig& kv);

std::vector<double> parse_double_list(const std::string& text);

}  // namespace robustbf
